#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "robotest/compat.hpp"
#include "robotest/explorer.hpp"

namespace robotest::harness {

nlohmann::json default_config();

// Effective benchmark configuration: embedded defaults, overlaid by the
// config document, then CLI/environment overrides (ROBOTEST_OUT,
// ROBOTEST_SEED).
struct BenchmarkConfig {
    nlohmann::json effective;

    std::vector<std::string> app_paths;
    std::string device_path;
    std::string device_irregular_path;
    std::vector<std::string> strategies;
    std::vector<uint64_t> seeds;
    int budget_steps = 200;
    double budget_seconds = 0.0;
    std::string out_dir = "out";
    int workers = 4;
    bool debug_overlays = false;

    simbench::CameraRig rig_truth;
    simbench::SceneConfig scene;
    kinematics::ArmConfig arm;
    vision::VisionParams vision_params;

    double px_per_mm = 5.0;
    double cone_half_angle_deg = 60.0;
    bool prefer_unvisited = true;
    int max_redraws = 6;
    double visited_reset_threshold = 0.9;

    double response_threshold = 0.9;
    std::string metric_id = "block";
    int compare_budget_steps = 120;
    std::vector<uint64_t> compare_seeds;

    int calib_views = 5;
    double calib_corner_noise_px = 0.2;
    uint64_t calib_seed = 7;

    std::string calibration_file() const { return out_dir + "/calibration.json"; }

    void validate() const;
};

BenchmarkConfig load_config(const std::string& path, const nlohmann::json& overrides);

// Builds the exploration options for one grid cell; calibrated intrinsics
// replace the truth rig on the perception side when available.
explorer::ExploreOptions make_explore_options(const BenchmarkConfig& cfg,
                                              explorer::StrategyVariant variant, uint64_t seed,
                                              const std::string& app_name,
                                              const camera::CameraIntrinsics* calibrated);

struct RunSummaryRow {
    std::string app;
    std::string strategy;
    uint64_t seed = 0;
    int steps = 0;
    double distance_mm = 0.0;
    double sim_seconds = 0.0;
    int screens_visited = 0;
    int widgets_exercised = 0;
    int crashes = 0;
    int compat_bugs = 0;
    int failed_perceptions = 0;
    double match_rate = 1.0;
};

// Temp-then-rename so interrupted runs never leave truncated artifacts.
void atomic_write_text(const std::string& path, const std::string& content);

std::string trace_to_jsonl(const std::vector<explorer::StepRecord>& steps);
std::vector<explorer::StepRecord> trace_from_jsonl(const std::string& path);

// Chessboard views synthesized for the calibration command.
std::vector<camera::ChessboardView> make_calibration_views(const BenchmarkConfig& cfg);

camera::CameraIntrinsics load_calibration(const std::string& path, double* reproj_err = nullptr);

int cmd_calibrate(const BenchmarkConfig& cfg);
int cmd_explore(const BenchmarkConfig& cfg);
int cmd_compare(const BenchmarkConfig& cfg);
int cmd_report(const std::string& run_dir);

} // namespace robotest::harness
