#include "robotest/harness.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "robotest/error.hpp"
#include "robotest/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace robotest::harness {

json default_config() {
    return json{
        {"apps", json::array()},
        {"device", ""},
        {"device_irregular", ""},
        {"strategies", {"center", "edge", "random"}},
        {"seeds", {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}},
        {"budget_steps", 200},
        {"budget_seconds", 0.0},
        {"out_dir", "out"},
        {"workers", 4},
        {"camera",
         {{"fx", 1000.0},
          {"fy", 1000.0},
          {"cx", 640.0},
          {"cy", 360.0},
          {"s", 0.0},
          {"k1", 0.0},
          {"position_mm", {180.0, 100.0}},
          {"height_mm", 200.0}}},
        {"scene",
         {{"photo", {1280, 720}},
          {"background", 90},
          {"illumination", 0.12},
          {"noise_sigma", 0.0}}},
        {"arm",
         {{"l1", 200.0},
          {"l2", 180.0},
          {"l3", 60.0},
          {"speed_mm_s", 50.0},
          {"hover_mm", 10.0},
          {"alpha", 0.0},
          {"tap_dwell_ms", 100.0},
          {"long_press_ms", 800.0},
          {"double_tap_gap_ms", 150.0},
          {"double_tap_window_ms", 300.0}}},
        {"vision",
         {{"canny_low", 50.0},
          {"canny_high", 150.0},
          {"canny_sigma", 1.4},
          {"close_kernel", 5},
          {"nesting_threshold", 0.85},
          {"oversize_fraction", 0.9},
          {"text_confidence", 0.8},
          {"dedup_iou", 0.7},
          {"screen_min_area", 0.05},
          {"ink_threshold", 140}}},
        {"explorer",
         {{"px_per_mm", 5.0},
          {"cone_half_angle_deg", 60.0},
          {"prefer_unvisited", true},
          {"max_redraws", 6},
          {"visited_reset_threshold", 0.9}}},
        {"compare",
         {{"response_threshold", 0.9},
          {"metric", "block"},
          {"budget_steps", 120},
          {"seeds", {1, 2, 3, 4, 5}}}},
        {"calibration", {{"views", 5}, {"corner_noise_px", 0.2}, {"seed", 7}}},
    };
}

namespace {

void deep_merge(json& base, const json& over) {
    if (!over.is_object() || !base.is_object()) {
        base = over;
        return;
    }
    for (const auto& [key, value] : over.items()) {
        if (base.contains(key) && base[key].is_object() && value.is_object())
            deep_merge(base[key], value);
        else
            base[key] = value;
    }
}

std::vector<uint64_t> seed_list(const json& j) {
    std::vector<uint64_t> out;
    for (const auto& s : j) out.push_back(s.get<uint64_t>());
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

} // namespace

void BenchmarkConfig::validate() const {
    if (app_paths.empty()) raise(ErrorCode::ConfigError, "config needs at least one app model");
    if (strategies.empty()) raise(ErrorCode::ConfigError, "config needs at least one strategy");
    if (seeds.empty()) raise(ErrorCode::ConfigError, "config needs at least one seed");
    if (budget_steps <= 0 && budget_seconds <= 0)
        raise(ErrorCode::ConfigError, "config needs a positive budget");
}

BenchmarkConfig load_config(const std::string& path, const json& overrides) {
    json effective = default_config();
    if (!path.empty()) {
        std::ifstream in(path);
        if (!in) raise(ErrorCode::ConfigError, "cannot open config " + path);
        json file;
        try {
            in >> file;
        } catch (const json::exception& e) {
            raise(ErrorCode::ConfigError, std::string("bad config json: ") + e.what());
        }
        deep_merge(effective, file);
    }
    deep_merge(effective, overrides);

    if (const char* env_out = std::getenv("ROBOTEST_OUT"))
        effective["out_dir"] = std::string(env_out);
    if (const char* env_seed = std::getenv("ROBOTEST_SEED"))
        effective["seeds"] = {std::strtoull(env_seed, nullptr, 10)};

    BenchmarkConfig cfg;
    cfg.effective = effective;
    for (const auto& a : effective["apps"]) cfg.app_paths.push_back(a.get<std::string>());
    cfg.device_path = effective["device"].get<std::string>();
    cfg.device_irregular_path = effective["device_irregular"].get<std::string>();
    for (const auto& s : effective["strategies"]) cfg.strategies.push_back(s.get<std::string>());
    cfg.seeds = seed_list(effective["seeds"]);
    cfg.budget_steps = effective["budget_steps"].get<int>();
    cfg.budget_seconds = effective["budget_seconds"].get<double>();
    cfg.out_dir = effective["out_dir"].get<std::string>();
    cfg.workers = std::max(1, effective["workers"].get<int>());
    cfg.debug_overlays = effective.value("debug_overlays", false);

    const auto& cam = effective["camera"];
    cfg.rig_truth.intrinsics = {cam["fx"].get<double>(), cam["fy"].get<double>(),
                                cam["cx"].get<double>(), cam["cy"].get<double>(),
                                cam["s"].get<double>(),  cam["k1"].get<double>()};
    cfg.rig_truth.pose = camera::look_down_pose(
        {cam["position_mm"][0].get<double>(), cam["position_mm"][1].get<double>()},
        cam["height_mm"].get<double>());

    const auto& scene = effective["scene"];
    cfg.scene.photo_w = scene["photo"][0].get<int>();
    cfg.scene.photo_h = scene["photo"][1].get<int>();
    cfg.scene.background_level = static_cast<uint8_t>(scene["background"].get<int>());
    cfg.scene.illumination_gradient = scene["illumination"].get<double>();
    cfg.scene.noise_sigma = scene["noise_sigma"].get<double>();

    const auto& arm = effective["arm"];
    cfg.arm.links = {arm["l1"].get<double>(), arm["l2"].get<double>(), arm["l3"].get<double>()};
    cfg.arm.speed_mm_s = arm["speed_mm_s"].get<double>();
    cfg.arm.hover_height_mm = arm["hover_mm"].get<double>();
    cfg.arm.pen_alpha = arm["alpha"].get<double>();
    cfg.arm.tap_dwell_ms = arm["tap_dwell_ms"].get<double>();
    cfg.arm.long_press_ms = arm["long_press_ms"].get<double>();
    cfg.arm.double_tap_gap_ms = arm["double_tap_gap_ms"].get<double>();
    cfg.arm.double_tap_window_ms = arm["double_tap_window_ms"].get<double>();

    const auto& vis = effective["vision"];
    cfg.vision_params.canny_low = vis["canny_low"].get<double>();
    cfg.vision_params.canny_high = vis["canny_high"].get<double>();
    cfg.vision_params.canny_sigma = vis["canny_sigma"].get<double>();
    cfg.vision_params.close_kernel = vis["close_kernel"].get<int>();
    cfg.vision_params.nesting_threshold = vis["nesting_threshold"].get<double>();
    cfg.vision_params.oversize_fraction = vis["oversize_fraction"].get<double>();
    cfg.vision_params.text_confidence_floor = vis["text_confidence"].get<double>();
    cfg.vision_params.dedup_iou = vis["dedup_iou"].get<double>();
    cfg.vision_params.screen_min_area_fraction = vis["screen_min_area"].get<double>();
    cfg.vision_params.ink_threshold = vis["ink_threshold"].get<int>();

    const auto& exp = effective["explorer"];
    cfg.px_per_mm = exp["px_per_mm"].get<double>();
    cfg.cone_half_angle_deg = exp["cone_half_angle_deg"].get<double>();
    cfg.prefer_unvisited = exp["prefer_unvisited"].get<bool>();
    cfg.max_redraws = exp["max_redraws"].get<int>();
    cfg.visited_reset_threshold = exp["visited_reset_threshold"].get<double>();

    const auto& cmp = effective["compare"];
    cfg.response_threshold = cmp["response_threshold"].get<double>();
    cfg.metric_id = cmp["metric"].get<std::string>();
    cfg.compare_budget_steps = cmp["budget_steps"].get<int>();
    cfg.compare_seeds = seed_list(cmp["seeds"]);

    const auto& cal = effective["calibration"];
    cfg.calib_views = cal["views"].get<int>();
    cfg.calib_corner_noise_px = cal["corner_noise_px"].get<double>();
    cfg.calib_seed = cal["seed"].get<uint64_t>();
    return cfg;
}

explorer::ExploreOptions make_explore_options(const BenchmarkConfig& cfg,
                                              explorer::StrategyVariant variant, uint64_t seed,
                                              const std::string& app_name,
                                              const camera::CameraIntrinsics* calibrated) {
    explorer::ExploreOptions opts;
    opts.strategy.variant = variant;
    opts.strategy.seed = Rng::mix(seed, Rng::hash_str(app_name) ^
                                            Rng::hash_str(explorer::strategy_name(variant)));
    opts.strategy.cone_half_angle_rad = deg_to_rad(cfg.cone_half_angle_deg);
    opts.strategy.prefer_unvisited = cfg.prefer_unvisited;
    opts.strategy.max_redraws = cfg.max_redraws;
    opts.budget.steps = cfg.budget_steps;
    opts.budget.seconds = cfg.budget_seconds;
    opts.perception.vision = cfg.vision_params;
    opts.perception.scene = cfg.scene;
    opts.perception.px_per_mm = cfg.px_per_mm;
    opts.perception.rig = cfg.rig_truth;
    if (calibrated) {
        opts.perception.rig.intrinsics = *calibrated;
        opts.perception.rig.intrinsics.k1 = cfg.rig_truth.intrinsics.k1;
    }
    opts.rig_truth = cfg.rig_truth;
    opts.arm = cfg.arm;
    opts.visited_reset_threshold = cfg.visited_reset_threshold;
    return opts;
}

void atomic_write_text(const std::string& path, const std::string& content) {
    fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) raise(ErrorCode::IoError, "cannot write " + tmp.string());
        out << content;
    }
    fs::rename(tmp, target);
}

std::string trace_to_jsonl(const std::vector<explorer::StepRecord>& steps) {
    std::ostringstream out;
    for (const auto& s : steps) {
        json j{{"step", s.index},
               {"found", s.screen_found},
               {"gesture", kinematics::gesture_name(s.gesture)},
               {"screen_level", s.screen_level},
               {"bounds", {s.detected_bounds.x, s.detected_bounds.y, s.detected_bounds.w,
                           s.detected_bounds.h}},
               {"tap_px", {s.tap_rect_px.x, s.tap_rect_px.y}},
               {"tap_mm", {s.tap_world.x, s.tap_world.y}},
               {"widget", s.model_widget_id},
               {"matched", s.target_matched},
               {"response", std::string(1, s.response)},
               {"before", s.screen_before},
               {"after", s.screen_after},
               {"segment_mm", s.segment_mm},
               {"cumulative_mm", s.cumulative_mm},
               {"sim_s", s.sim_seconds}};
        if (!s.photo_ref.empty()) j["photo"] = s.photo_ref;
        out << j.dump() << "\n";
    }
    return out.str();
}

std::vector<explorer::StepRecord> trace_from_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::IoError, "cannot open trace " + path);
    std::vector<explorer::StepRecord> steps;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        explorer::StepRecord s;
        s.index = j["step"].get<int>();
        s.screen_found = j["found"].get<bool>();
        s.gesture = kinematics::gesture_from_name(j["gesture"].get<std::string>());
        s.screen_level = j["screen_level"].get<bool>();
        s.detected_bounds = {j["bounds"][0].get<int>(), j["bounds"][1].get<int>(),
                             j["bounds"][2].get<int>(), j["bounds"][3].get<int>()};
        s.tap_rect_px = {j["tap_px"][0].get<double>(), j["tap_px"][1].get<double>()};
        s.tap_world = {j["tap_mm"][0].get<double>(), j["tap_mm"][1].get<double>()};
        s.model_widget_id = j["widget"].get<std::string>();
        s.target_matched = j["matched"].get<bool>();
        s.response = j["response"].get<std::string>()[0];
        s.screen_before = j["before"].get<std::string>();
        s.screen_after = j["after"].get<std::string>();
        s.segment_mm = j["segment_mm"].get<double>();
        s.cumulative_mm = j["cumulative_mm"].get<double>();
        s.sim_seconds = j["sim_s"].get<double>();
        if (j.contains("photo")) s.photo_ref = j["photo"].get<std::string>();
        steps.push_back(std::move(s));
    }
    return steps;
}

std::vector<camera::ChessboardView> make_calibration_views(const BenchmarkConfig& cfg) {
    Rng rng(cfg.calib_seed);
    std::vector<camera::ChessboardView> views;
    const int cols = 12, rows = 9;
    const double square = 20.0;
    for (int v = 0; v < cfg.calib_views; ++v) {
        // Strong, diverse tilts keep the focal lengths well conditioned.
        static const double tilt_x[] = {28.0, -26.0, 24.0, -22.0, 30.0, -18.0, 20.0, -30.0};
        static const double tilt_y[] = {-24.0, 22.0, -28.0, 26.0, 18.0, -20.0, 30.0, -16.0};
        double ax = deg_to_rad(tilt_x[v % 8]) + rng.uniform(-0.02, 0.02);
        double ay = deg_to_rad(tilt_y[(v * 3 + 1) % 8]) + rng.uniform(-0.02, 0.02);
        double az = deg_to_rad(9.0 * v - 18.0);
        Eigen::Matrix3d R = (Eigen::AngleAxisd(az, Eigen::Vector3d::UnitZ()) *
                             Eigen::AngleAxisd(ay, Eigen::Vector3d::UnitY()) *
                             Eigen::AngleAxisd(ax, Eigen::Vector3d::UnitX()))
                                .toRotationMatrix();
        Eigen::Vector3d t(-95.0 + 12.0 * v, -62.0 + 8.0 * v, 600.0 + 30.0 * v);
        camera::CameraPose pose{R, t};
        camera::ChessboardView view;
        view.cols = cols;
        view.rows = rows;
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) {
                Vec2 world{c * square, r * square};
                Vec2 px = camera::project(cfg.rig_truth.intrinsics, pose, {world.x, world.y, 0.0});
                px.x += rng.normal(0.0, cfg.calib_corner_noise_px);
                px.y += rng.normal(0.0, cfg.calib_corner_noise_px);
                view.correspondences.push_back({world, px});
            }
        views.push_back(std::move(view));
    }
    return views;
}

camera::CameraIntrinsics load_calibration(const std::string& path, double* reproj_err) {
    std::ifstream in(path);
    if (!in) raise(ErrorCode::MissingRuns, "no calibration file at " + path + "; run calibrate");
    json j;
    in >> j;
    camera::CameraIntrinsics intr{j["fx"].get<double>(), j["fy"].get<double>(),
                                  j["cx"].get<double>(), j["cy"].get<double>(),
                                  j["s"].get<double>(),  j["k1"].get<double>()};
    if (reproj_err) *reproj_err = j["reprojection_error_px"].get<double>();
    return intr;
}

int cmd_calibrate(const BenchmarkConfig& cfg) {
    try {
        auto views = make_calibration_views(cfg);
        auto result = camera::calibrate(views);
        json j{{"fx", result.intrinsics.fx},
               {"fy", result.intrinsics.fy},
               {"cx", result.intrinsics.cx},
               {"cy", result.intrinsics.cy},
               {"s", result.intrinsics.s},
               {"k1", result.intrinsics.k1},
               {"reprojection_error_px", result.mean_reprojection_error_px},
               {"views", cfg.calib_views},
               {"corner_noise_px", cfg.calib_corner_noise_px}};
        atomic_write_text(cfg.calibration_file(), j.dump(2) + "\n");
        std::printf("calibrated: fx=%.3f fy=%.3f cx=%.3f cy=%.3f s=%.5f\n", result.intrinsics.fx,
                    result.intrinsics.fy, result.intrinsics.cx, result.intrinsics.cy,
                    result.intrinsics.s);
        std::printf("mean reprojection error: %.6f px\n", result.mean_reprojection_error_px);
        std::printf("wrote %s\n", cfg.calibration_file().c_str());
        return 0;
    } catch (const Error& e) {
        std::fprintf(stderr, "calibrate failed: %s\n", e.what());
        return 2;
    }
}

namespace {

struct GridCell {
    size_t app_index;
    std::string strategy;
    uint64_t seed;
};

std::string run_stem(const std::string& app, const std::string& strategy, uint64_t seed) {
    return app + "__" + strategy + "__seed" + std::to_string(seed);
}

std::string summary_csv_header() {
    return "app,strategy,seed,steps,distance_mm,sim_seconds,screens_visited,widgets_exercised,"
           "crashes,compat_bugs,failed_perceptions,match_rate\n";
}

std::string summary_csv_row(const RunSummaryRow& r) {
    std::ostringstream out;
    out << r.app << ',' << r.strategy << ',' << r.seed << ',' << r.steps << ','
        << format_double(r.distance_mm) << ',' << format_double(r.sim_seconds) << ','
        << r.screens_visited << ',' << r.widgets_exercised << ',' << r.crashes << ','
        << r.compat_bugs << ',' << r.failed_perceptions << ',' << format_double(r.match_rate)
        << '\n';
    return out.str();
}

json row_to_json(const RunSummaryRow& r) {
    return json{{"app", r.app},
                {"strategy", r.strategy},
                {"seed", r.seed},
                {"steps", r.steps},
                {"distance_mm", r.distance_mm},
                {"sim_seconds", r.sim_seconds},
                {"screens_visited", r.screens_visited},
                {"widgets_exercised", r.widgets_exercised},
                {"crashes", r.crashes},
                {"compat_bugs", r.compat_bugs},
                {"failed_perceptions", r.failed_perceptions},
                {"match_rate", r.match_rate}};
}

RunSummaryRow row_from_json(const json& j) {
    RunSummaryRow r;
    r.app = j["app"].get<std::string>();
    r.strategy = j["strategy"].get<std::string>();
    r.seed = j["seed"].get<uint64_t>();
    r.steps = j["steps"].get<int>();
    r.distance_mm = j["distance_mm"].get<double>();
    r.sim_seconds = j["sim_seconds"].get<double>();
    r.screens_visited = j["screens_visited"].get<int>();
    r.widgets_exercised = j["widgets_exercised"].get<int>();
    r.crashes = j["crashes"].get<int>();
    r.compat_bugs = j["compat_bugs"].get<int>();
    r.failed_perceptions = j["failed_perceptions"].get<int>();
    r.match_rate = j["match_rate"].get<double>();
    return r;
}

// Runs `fn(cell_index)` over the grid with a small worker pool; results are
// aggregated in index order so parallelism never changes any output.
template <typename Fn>
void run_pool(size_t cells, int workers, Fn&& fn) {
    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= cells) return;
            fn(i);
        }
    };
    if (workers <= 1 || cells <= 1) {
        worker();
        return;
    }
    std::vector<std::thread> pool;
    int n = std::min<int>(workers, static_cast<int>(cells));
    pool.reserve(n);
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
}

} // namespace

int cmd_explore(const BenchmarkConfig& cfg) {
    try {
        cfg.validate();
        camera::CameraIntrinsics calibrated = load_calibration(cfg.calibration_file());

        std::vector<simbench::AppModel> apps;
        for (const auto& p : cfg.app_paths) apps.push_back(simbench::AppModel::load_json(p));
        simbench::DeviceProfile device = simbench::DeviceProfile::load_json(cfg.device_path);

        std::vector<GridCell> cells;
        for (size_t a = 0; a < apps.size(); ++a)
            for (const auto& s : cfg.strategies)
                for (uint64_t seed : cfg.seeds) cells.push_back({a, s, seed});

        std::vector<RunSummaryRow> rows(cells.size());
        std::vector<std::string> errors(cells.size());

        run_pool(cells.size(), cfg.workers, [&](size_t i) {
            const GridCell& cell = cells[i];
            try {
                const auto& app = apps[cell.app_index];
                auto opts = make_explore_options(cfg, explorer::strategy_from_name(cell.strategy),
                                                 cell.seed, app.name, &calibrated);
                if (cfg.debug_overlays)
                    opts.debug_dir =
                        cfg.out_dir + "/debug/" + run_stem(app.name, cell.strategy, cell.seed);
                simbench::AppSession session(app, device);
                auto result = explorer::run_exploration(session, opts);

                std::string trace_path = cfg.out_dir + "/runs/" +
                                         run_stem(app.name, cell.strategy, cell.seed) + ".jsonl";
                atomic_write_text(trace_path, trace_to_jsonl(result.steps));

                RunSummaryRow row;
                row.app = app.name;
                row.strategy = cell.strategy;
                row.seed = cell.seed;
                row.steps = result.metrics.steps;
                row.distance_mm = result.metrics.distance_mm;
                row.sim_seconds = result.metrics.sim_seconds;
                row.screens_visited = result.metrics.screens_visited;
                row.widgets_exercised = result.metrics.widgets_exercised;
                row.crashes = result.metrics.crashes;
                row.failed_perceptions = result.metrics.failed_perceptions;
                row.match_rate = result.metrics.target_match_rate();
                rows[i] = row;
            } catch (const std::exception& e) {
                errors[i] = e.what(); // record and keep the grid going
            }
        });

        std::string csv = summary_csv_header();
        json rows_json = json::array();
        int failed = 0;
        for (size_t i = 0; i < rows.size(); ++i) {
            if (!errors[i].empty()) {
                ++failed;
                std::fprintf(stderr, "run %s/%s/seed%llu failed: %s\n",
                             apps[cells[i].app_index].name.c_str(), cells[i].strategy.c_str(),
                             static_cast<unsigned long long>(cells[i].seed), errors[i].c_str());
                continue;
            }
            csv += summary_csv_row(rows[i]);
            rows_json.push_back(row_to_json(rows[i]));
        }

        // Per-strategy aggregates: mean and sample standard deviation.
        json aggregates = json::array();
        for (const auto& strategy : cfg.strategies) {
            std::vector<double> dists;
            for (size_t i = 0; i < rows.size(); ++i)
                if (errors[i].empty() && rows[i].strategy == strategy)
                    dists.push_back(rows[i].distance_mm);
            if (dists.empty()) continue;
            double mean = 0;
            for (double d : dists) mean += d;
            mean /= dists.size();
            double var = 0;
            for (double d : dists) var += (d - mean) * (d - mean);
            double stddev = dists.size() > 1 ? std::sqrt(var / (dists.size() - 1)) : 0.0;
            aggregates.push_back({{"strategy", strategy},
                                  {"runs", dists.size()},
                                  {"mean_distance_mm", mean},
                                  {"stddev_distance_mm", stddev}});
            std::printf("%-8s runs=%zu mean_distance=%.2f mm (sd %.2f)\n", strategy.c_str(),
                        dists.size(), mean, stddev);
        }

        atomic_write_text(cfg.out_dir + "/summary.csv", csv);
        json summary{{"rows", rows_json}, {"aggregates", aggregates}};
        atomic_write_text(cfg.out_dir + "/summary.json", summary.dump(2) + "\n");
        std::printf("wrote %s/summary.{csv,json} (%zu runs, %d failed)\n", cfg.out_dir.c_str(),
                    rows.size(), failed);
        return failed == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::fprintf(stderr, "explore failed: %s\n", e.what());
        return 2;
    }
}

int cmd_compare(const BenchmarkConfig& cfg) {
    try {
        if (cfg.device_irregular_path.empty())
            raise(ErrorCode::ConfigError, "compare needs device_irregular in the config");
        camera::CameraIntrinsics calibrated = load_calibration(cfg.calibration_file());

        std::vector<simbench::AppModel> apps;
        for (const auto& p : cfg.app_paths) apps.push_back(simbench::AppModel::load_json(p));
        simbench::DeviceProfile regular = simbench::DeviceProfile::load_json(cfg.device_path);
        simbench::DeviceProfile irregular =
            simbench::DeviceProfile::load_json(cfg.device_irregular_path);

        struct Cell {
            size_t app_index;
            uint64_t seed;
        };
        std::vector<Cell> cells;
        for (size_t a = 0; a < apps.size(); ++a)
            for (uint64_t seed : cfg.compare_seeds) cells.push_back({a, seed});

        std::vector<std::vector<compat::BugReport>> reports(cells.size());
        std::vector<std::string> errors(cells.size());

        run_pool(cells.size(), cfg.workers, [&](size_t i) {
            const Cell& cell = cells[i];
            try {
                const auto& app = apps[cell.app_index];
                compat::ComparisonOptions copts;
                copts.explore = make_explore_options(cfg, explorer::StrategyVariant::Center,
                                                     cell.seed, app.name, &calibrated);
                copts.explore.budget.steps = cfg.compare_budget_steps;
                copts.explore.budget.seconds = 0;
                copts.response_threshold = cfg.response_threshold;
                copts.metric_id = cfg.metric_id;
                copts.evidence_dir = cfg.out_dir + "/bugs/evidence/" + app.name + "_seed" +
                                     std::to_string(cell.seed);
                auto result = compat::run_comparison_session(app, irregular, regular, copts);
                reports[i] = std::move(result.reports);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::ProfileMismatch)
                    errors[i] = e.what(); // abort this pair only
                else
                    errors[i] = e.what();
            }
        });

        // Dedup across seeds by the report key.
        std::set<std::string> seen;
        json all = json::array();
        std::map<std::string, std::map<std::string, int>> table; // app -> kind -> count
        int total = 0;
        for (size_t i = 0; i < cells.size(); ++i) {
            if (!errors[i].empty()) {
                std::fprintf(stderr, "compare %s/seed%llu failed: %s\n",
                             apps[cells[i].app_index].name.c_str(),
                             static_cast<unsigned long long>(cells[i].seed), errors[i].c_str());
                continue;
            }
            for (const auto& r : reports[i]) {
                if (!seen.insert(r.dedup_key()).second) continue;
                ++total;
                const char* kind = r.kind == compat::BugReport::Kind::Crash ? "crash" : "compatibility";
                ++table[r.app][kind];
                all.push_back({{"kind", kind},
                               {"app", r.app},
                               {"screen", r.screen},
                               {"widget", r.widget},
                               {"gesture", kinematics::gesture_name(r.gesture)},
                               {"first_step", r.first_step},
                               {"similarity_dut", r.similarity_a},
                               {"similarity_ref", r.similarity_b},
                               {"seed", cells[i].seed},
                               {"evidence", r.evidence}});
            }
        }
        atomic_write_text(cfg.out_dir + "/bugs/reports.json", all.dump(2) + "\n");

        std::string csv = "app,crash,compatibility\n";
        for (const auto& app : apps) {
            auto it = table.find(app.name);
            int crash = 0, compat_count = 0;
            if (it != table.end()) {
                crash = it->second.count("crash") ? it->second.at("crash") : 0;
                compat_count = it->second.count("compatibility") ? it->second.at("compatibility") : 0;
            }
            csv += app.name + "," + std::to_string(crash) + "," + std::to_string(compat_count) + "\n";
            std::printf("%-12s crash=%d compatibility=%d\n", app.name.c_str(), crash, compat_count);
        }
        atomic_write_text(cfg.out_dir + "/bugs/findings.csv", csv);
        std::printf("wrote %s/bugs/reports.json (%d unique findings)\n", cfg.out_dir.c_str(), total);

        for (const auto& e : errors)
            if (!e.empty()) return 2;
        return total > 0 ? 3 : 0;
    } catch (const Error& e) {
        std::fprintf(stderr, "compare failed: %s\n", e.what());
        return 2;
    }
}

int cmd_report(const std::string& run_dir) {
    try {
        std::ifstream in(run_dir + "/summary.json");
        if (!in) raise(ErrorCode::MissingRuns, "no summary.json under " + run_dir);
        json summary;
        in >> summary;

        std::vector<RunSummaryRow> rows;
        for (const auto& j : summary["rows"]) rows.push_back(row_from_json(j));
        if (rows.empty()) raise(ErrorCode::MissingRuns, "summary has no rows");

        int warnings = 0;

        // Re-derive every number from the persisted traces.
        for (const auto& row : rows) {
            std::string trace_path =
                run_dir + "/runs/" + run_stem(row.app, row.strategy, row.seed) + ".jsonl";
            auto steps = trace_from_jsonl(trace_path);
            double distance = 0;
            int crashes = 0, failed = 0;
            std::set<std::string> screens, widgets;
            for (const auto& s : steps) {
                distance += s.segment_mm;
                if (s.response == 'c') ++crashes;
                if (!s.screen_found) ++failed;
                screens.insert(s.screen_before);
                screens.insert(s.screen_after);
                if (!s.model_widget_id.empty())
                    widgets.insert(s.screen_before + "/" + s.model_widget_id);
            }
            auto close = [](double a, double b) { return std::abs(a - b) < 1e-6; };
            if (static_cast<int>(steps.size()) != row.steps || !close(distance, row.distance_mm) ||
                crashes != row.crashes || failed != row.failed_perceptions ||
                static_cast<int>(screens.size()) != row.screens_visited ||
                static_cast<int>(widgets.size()) != row.widgets_exercised)
                raise(ErrorCode::MissingRuns,
                      "summary disagrees with trace for " +
                          run_stem(row.app, row.strategy, row.seed));
        }

        // Grid completeness: every (app, strategy) pair should cover the seed union.
        std::set<std::string> app_names, strategy_names;
        std::set<uint64_t> seed_set;
        for (const auto& r : rows) {
            app_names.insert(r.app);
            strategy_names.insert(r.strategy);
            seed_set.insert(r.seed);
        }
        std::map<std::string, std::vector<double>> by_strategy;
        std::ostringstream table;
        table << "strategy   runs  mean_dist_mm  sd_dist_mm  mean_screens  mean_widgets  crashes  "
                 "match\n";
        std::string series = "strategy,app,seed,distance_mm,screens,widgets,crashes,match_rate\n";
        for (const auto& strategy : strategy_names) {
            std::vector<double> dists;
            double screens = 0, widgets = 0, match = 0;
            int crashes = 0, n = 0;
            for (const auto& r : rows) {
                if (r.strategy != strategy) continue;
                ++n;
                dists.push_back(r.distance_mm);
                screens += r.screens_visited;
                widgets += r.widgets_exercised;
                crashes += r.crashes;
                match += r.match_rate;
                series += strategy + "," + r.app + "," + std::to_string(r.seed) + "," +
                          format_double(r.distance_mm) + "," + std::to_string(r.screens_visited) +
                          "," + std::to_string(r.widgets_exercised) + "," +
                          std::to_string(r.crashes) + "," + format_double(r.match_rate) + "\n";
            }
            for (const auto& app : app_names)
                for (uint64_t seed : seed_set) {
                    bool present = false;
                    for (const auto& r : rows)
                        present |= r.strategy == strategy && r.app == app && r.seed == seed;
                    if (!present) {
                        ++warnings;
                        table << "# missing: " << app << "/" << strategy << "/seed" << seed << "\n";
                    }
                }
            double mean = 0;
            for (double d : dists) mean += d;
            mean /= n;
            double var = 0;
            for (double d : dists) var += (d - mean) * (d - mean);
            double sd = n > 1 ? std::sqrt(var / (n - 1)) : 0.0;
            char buf[256];
            std::snprintf(buf, sizeof(buf), "%-10s %4d  %12.2f  %10.2f  %12.2f  %12.2f  %7d  %.4f\n",
                          strategy.c_str(), n, mean, sd, screens / n, widgets / n, crashes,
                          match / n);
            table << buf;
        }

        atomic_write_text(run_dir + "/report.txt", table.str());
        atomic_write_text(run_dir + "/report_series.csv", series);
        std::fputs(table.str().c_str(), stdout);
        if (warnings) std::printf("warnings: %d missing grid cells\n", warnings);
        std::printf("wrote %s/report.txt and report_series.csv\n", run_dir.c_str());
        return 0;
    } catch (const Error& e) {
        std::fprintf(stderr, "report failed: %s\n", e.what());
        return 2;
    }
}

} // namespace robotest::harness
