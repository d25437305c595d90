#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "robotest/camera.hpp"
#include "robotest/kinematics.hpp"
#include "robotest/rng.hpp"
#include "robotest/simbench.hpp"
#include "robotest/vision.hpp"

namespace robotest::explorer {

enum class StrategyVariant { Random, Edge, Center };

const char* strategy_name(StrategyVariant v);
StrategyVariant strategy_from_name(const std::string& name);

struct Strategy {
    StrategyVariant variant = StrategyVariant::Center;
    uint64_t seed = 1;
    double cone_half_angle_rad = deg_to_rad(60.0);
    bool prefer_unvisited = true; // off reproduces the bare history rule
    int max_redraws = 6;
};

// steps == 0 disables the step budget; seconds == 0 disables the time budget.
struct Budget {
    int steps = 200;
    double seconds = 0.0;
};

struct PerceptionConfig {
    vision::VisionParams vision;
    simbench::CameraRig rig;
    simbench::SceneConfig scene;
    double px_per_mm = 5.0; // rectified working resolution
};

// Everything the robot derives from one photo.
struct Perception {
    bool ok = false;
    camera::ScreenQuad quad;
    Image rectified;
    std::vector<vision::Widget> widgets;
};

Perception perceive(const Image& photo, double physical_w_mm, double physical_h_mm,
                    const PerceptionConfig& cfg);

// Robot-side memory: the last two operation target points define the
// exploration direction; the visited set resets when the GUI visibly changes.
struct ExplorationHistory {
    std::optional<Vec2> last_world;
    std::optional<Vec2> prev_world;
    std::set<std::string> visited;
    int steps = 0;

    std::optional<Vec2> direction() const;
    void push(const Vec2& world_target);
};

std::string widget_visit_key(const Rect& bounds);

struct TargetChoice {
    int index = -1; // into the widget list
    bool screen_level = false;
};

// PoP target selection. `anchor_world` is the strategy's start anchor; used
// only before any history exists. Throws NoWidgets when the list is empty and
// screen-level gestures are not allowed.
TargetChoice select_target(const std::vector<vision::Widget>& widgets,
                           const ExplorationHistory& history, const Strategy& strategy,
                           const camera::ScreenQuad& quad, const Vec2& anchor_world, Rng& rng,
                           bool allow_screen_level = true);

// Uniform pick among gestures compatible with the widget kind; null widget
// means a screen-level gesture (scroll).
kinematics::GestureKind select_gesture_for(const vision::Widget* widget, Rng& rng);

struct StepRecord {
    int index = 0;
    bool screen_found = true;
    kinematics::GestureKind gesture = kinematics::GestureKind::Click;
    bool screen_level = false;
    Rect detected_bounds;
    Vec2 tap_rect_px;
    Vec2 tap_world;
    std::string model_widget_id; // ground-truth resolution at the tap point
    bool target_matched = false;
    char response = 'n'; // 't' transition, 'n' none, 'c' crash
    std::string screen_before;
    std::string screen_after;
    double segment_mm = 0.0;
    double cumulative_mm = 0.0;
    double sim_seconds = 0.0; // cumulative simulated time after this step
    std::string photo_ref;
};

struct ExplorationMetrics {
    int steps = 0;
    int failed_perceptions = 0;
    double distance_mm = 0.0;
    double sim_seconds = 0.0;
    int screens_visited = 0;
    int widgets_exercised = 0;
    int crashes = 0;
    int widget_targeted_steps = 0;
    int matched_steps = 0;

    double target_match_rate() const {
        return widget_targeted_steps ? static_cast<double>(matched_steps) / widget_targeted_steps
                                     : 1.0;
    }
};

struct ExploreOptions {
    Strategy strategy;
    Budget budget;
    PerceptionConfig perception;        // the robot's calibrated belief
    simbench::CameraRig rig_truth;      // the scene's actual camera
    kinematics::ArmConfig arm;
    double visited_reset_threshold = 0.9; // perceived-change level that clears the visited set
    std::string debug_dir;                // when set, per-step overlays land here
};

// One perceive-decide-act cycle, exposed so the comparison harness can
// interleave reference-device replays between steps.
struct StepOutcome {
    StepRecord record;
    Perception perception;
    kinematics::CompoundGesture device_gesture; // device-pixel targets
    bool acted = false;
};

class ExplorationDriver {
public:
    ExplorationDriver(simbench::AppSession& session, const ExploreOptions& opts);

    bool done() const;
    StepOutcome step();
    const ExplorationMetrics& metrics() const { return metrics_; }
    int step_index() const { return step_index_; }

private:
    simbench::AppSession& session_;
    ExploreOptions opts_;
    Rng rng_;
    ExplorationHistory history_;
    std::optional<Vec2> anchor_world_;
    std::optional<kinematics::TipState> tip_;
    std::optional<Image> prev_rectified_;
    std::set<std::string> screens_seen_;
    std::set<std::string> widgets_seen_;
    ExplorationMetrics metrics_;
    int step_index_ = 0;
};

struct RunResult {
    std::vector<StepRecord> steps;
    ExplorationMetrics metrics;
};

RunResult run_exploration(simbench::AppSession& session, const ExploreOptions& opts);

} // namespace robotest::explorer
