#include "robotest/explorer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "robotest/compat.hpp"
#include "robotest/error.hpp"

namespace robotest::explorer {

const char* strategy_name(StrategyVariant v) {
    switch (v) {
        case StrategyVariant::Random: return "random";
        case StrategyVariant::Edge: return "edge";
        case StrategyVariant::Center: return "center";
    }
    return "?";
}

StrategyVariant strategy_from_name(const std::string& name) {
    if (name == "random") return StrategyVariant::Random;
    if (name == "edge") return StrategyVariant::Edge;
    if (name == "center") return StrategyVariant::Center;
    raise(ErrorCode::ConfigError, "unknown strategy '" + name + "'");
}

Perception perceive(const Image& photo, double physical_w_mm, double physical_h_mm,
                    const PerceptionConfig& cfg) {
    Perception p;
    p.quad = vision::detect_screen(photo, physical_w_mm, cfg.vision);

    int rect_w = std::max(8, static_cast<int>(std::lround(physical_w_mm * cfg.px_per_mm)));
    int rect_h = std::max(8, static_cast<int>(std::lround(physical_h_mm * cfg.px_per_mm)));
    p.quad.rect_w = rect_w;
    p.quad.rect_h = rect_h;
    p.quad.scale = physical_w_mm / rect_w;
    // Anchoring in the arm frame presumes the overhead movement camera, for
    // which the photo-frame deflection equals the desk-frame one.
    p.quad.origin_world = camera::unproject_to_plane(cfg.rig.intrinsics, cfg.rig.pose,
                                                     p.quad.corners[0]);

    p.rectified = camera::rectify_screen(photo, p.quad, rect_w, rect_h);
    auto text = vision::detect_text(p.rectified, vision::GlyphLibrary::builtin(), cfg.vision);
    auto nontext = vision::extract_nontext(p.rectified, cfg.vision);
    p.widgets = vision::merge_widgets(text, nontext, cfg.vision.dedup_iou);
    p.ok = true;
    return p;
}

std::optional<Vec2> ExplorationHistory::direction() const {
    if (!last_world || !prev_world) return std::nullopt;
    Vec2 d = *last_world - *prev_world;
    if (d.norm() < 1e-9) return std::nullopt;
    return d.normalized();
}

void ExplorationHistory::push(const Vec2& world_target) {
    prev_world = last_world;
    last_world = world_target;
    ++steps;
}

std::string widget_visit_key(const Rect& bounds) {
    // Quantized so small detection jitter maps to the same key.
    return std::to_string(bounds.x / 8) + ":" + std::to_string(bounds.y / 8) + ":" +
           std::to_string(bounds.w / 8) + ":" + std::to_string(bounds.h / 8);
}

namespace {

Vec2 widget_center_world(const vision::Widget& w, const camera::ScreenQuad& quad) {
    return kinematics::screen_to_world(w.bounds.center(), quad);
}

double median_nn_spacing(const std::vector<Vec2>& centers) {
    if (centers.size() < 2) return 10.0;
    std::vector<double> nn;
    for (size_t i = 0; i < centers.size(); ++i) {
        double best = 1e18;
        for (size_t j = 0; j < centers.size(); ++j)
            if (i != j) best = std::min(best, distance(centers[i], centers[j]));
        nn.push_back(best);
    }
    std::sort(nn.begin(), nn.end());
    return nn[nn.size() / 2];
}

bool inside_screen_world(const Vec2& world, const camera::ScreenQuad& quad) {
    Vec2 px = kinematics::world_to_screen(world, quad);
    return px.x >= 0 && px.y >= 0 && px.x <= quad.rect_w && px.y <= quad.rect_h;
}

} // namespace

TargetChoice select_target(const std::vector<vision::Widget>& widgets,
                           const ExplorationHistory& history, const Strategy& strategy,
                           const camera::ScreenQuad& quad, const Vec2& anchor_world, Rng& rng,
                           bool allow_screen_level) {
    if (widgets.empty()) {
        if (!allow_screen_level)
            raise(ErrorCode::NoWidgets, "empty screen and screen-level gestures disallowed");
        return {-1, true};
    }
    if (strategy.variant == StrategyVariant::Random) {
        return {rng.uniform_int(0, static_cast<int>(widgets.size()) - 1), false};
    }

    std::vector<Vec2> centers;
    centers.reserve(widgets.size());
    for (const auto& w : widgets) centers.push_back(widget_center_world(w, quad));

    if (!history.last_world) {
        // First move: nearest widget to the start anchor.
        int best = 0;
        double best_d = 1e18;
        for (size_t i = 0; i < centers.size(); ++i) {
            double d = distance(centers[i], anchor_world);
            if (d < best_d) {
                best_d = d;
                best = static_cast<int>(i);
            }
        }
        return {best, false};
    }

    const Vec2 last = *history.last_world;
    double spacing = median_nn_spacing(centers);
    std::optional<Vec2> dir = history.direction();
    if (!dir) {
        double a = rng.uniform(-kPi, kPi);
        dir = Vec2{std::cos(a), std::sin(a)};
    }

    for (int attempt = 0; attempt <= strategy.max_redraws; ++attempt) {
        // Reaching the device edge: the projected continuation leaves the
        // screen, so a fresh random direction takes over.
        Vec2 probe = last + *dir * spacing;
        if (inside_screen_world(probe, quad)) {
            int best_unvisited = -1, best_any = -1;
            double d_unvisited = 1e18, d_any = 1e18;
            for (size_t i = 0; i < widgets.size(); ++i) {
                Vec2 delta = centers[i] - last;
                double len = delta.norm();
                if (len < 1e-9) continue; // the widget just operated
                double cos_angle = delta.dot(*dir) / len;
                cos_angle = std::clamp(cos_angle, -1.0, 1.0);
                if (std::acos(cos_angle) > strategy.cone_half_angle_rad) continue;
                bool visited = history.visited.count(widget_visit_key(widgets[i].bounds)) > 0;
                if (len < d_any) {
                    d_any = len;
                    best_any = static_cast<int>(i);
                }
                if (!visited && len < d_unvisited) {
                    d_unvisited = len;
                    best_unvisited = static_cast<int>(i);
                }
            }
            int pick = (strategy.prefer_unvisited && best_unvisited >= 0) ? best_unvisited : best_any;
            if (pick >= 0) return {pick, false};
        }
        double a = rng.uniform(-kPi, kPi);
        dir = Vec2{std::cos(a), std::sin(a)};
    }
    // Bounded retries exhausted: uniform fallback.
    return {rng.uniform_int(0, static_cast<int>(widgets.size()) - 1), false};
}

kinematics::GestureKind select_gesture_for(const vision::Widget* widget, Rng& rng) {
    using kinematics::GestureKind;
    if (!widget) return GestureKind::Scroll;
    std::vector<GestureKind> candidates{GestureKind::Click, GestureKind::DoubleClick,
                                        GestureKind::LongClick, GestureKind::Slide};
    if (widget->looks_like_input_field()) candidates.push_back(GestureKind::Input);
    return candidates[static_cast<size_t>(rng.uniform_int(0, static_cast<int>(candidates.size()) - 1))];
}

namespace {

const char* kInputWords[] = {"HELLO", "ROBOT", "TEST", "DATA", "INPUT", "ABC"};

} // namespace

ExplorationDriver::ExplorationDriver(simbench::AppSession& session, const ExploreOptions& opts)
    : session_(session), opts_(opts), rng_(opts.strategy.seed) {
    screens_seen_.insert(session_.current_screen());
    if (!opts_.debug_dir.empty()) std::filesystem::create_directories(opts_.debug_dir);
}

bool ExplorationDriver::done() const {
    if (opts_.budget.steps > 0 && step_index_ >= opts_.budget.steps) return true;
    if (opts_.budget.seconds > 0 && metrics_.sim_seconds >= opts_.budget.seconds) return true;
    if (opts_.budget.steps <= 0 && opts_.budget.seconds <= 0) return true;
    return false;
}

StepOutcome ExplorationDriver::step() {
    using kinematics::CompoundGesture;
    using kinematics::GestureKind;

    StepOutcome out;
    StepRecord& rec = out.record;
    rec.index = step_index_;
    rec.screen_before = session_.current_screen();
    rec.cumulative_mm = metrics_.distance_mm;
    rec.sim_seconds = metrics_.sim_seconds;

    const auto& device = session_.device();
    uint64_t photo_seed = Rng::mix(opts_.strategy.seed, 0x1000 + step_index_);
    auto shot = session_.photograph(opts_.rig_truth, opts_.perception.scene, photo_seed);

    try {
        out.perception =
            perceive(shot.photo, device.screen_w_mm, device.screen_h_mm, opts_.perception);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::NoScreenFound) throw;
        // A failed perception is a recorded step, not an abort.
        rec.screen_found = false;
        rec.screen_after = rec.screen_before;
        ++metrics_.failed_perceptions;
        ++metrics_.steps;
        ++step_index_;
        return out;
    }

    const auto& quad = out.perception.quad;
    if (!anchor_world_) {
        Vec2 anchor_px{quad.rect_w / 2.0, quad.rect_h / 2.0};
        if (opts_.strategy.variant == StrategyVariant::Edge) {
            // A uniformly sampled boundary point becomes the run's start anchor.
            double perim = 2.0 * (quad.rect_w + quad.rect_h);
            double u = rng_.uniform(0.0, perim);
            if (u < quad.rect_w)
                anchor_px = {u, 0};
            else if (u < quad.rect_w + quad.rect_h)
                anchor_px = {static_cast<double>(quad.rect_w), u - quad.rect_w};
            else if (u < 2 * quad.rect_w + quad.rect_h)
                anchor_px = {u - quad.rect_w - quad.rect_h, static_cast<double>(quad.rect_h)};
            else
                anchor_px = {0, u - 2 * quad.rect_w - quad.rect_h};
        }
        anchor_world_ = kinematics::screen_to_world(anchor_px, quad);
        tip_ = kinematics::TipState{*anchor_world_, opts_.arm.hover_height_mm};
    }

    // A visible GUI change invalidates the robot's visited memory.
    if (prev_rectified_) {
        auto sim = compat::gui_similarity(*prev_rectified_, out.perception.rectified);
        if (sim.value < opts_.visited_reset_threshold) history_.visited.clear();
    }

    TargetChoice choice = select_target(out.perception.widgets, history_, opts_.strategy, quad,
                                        *anchor_world_, rng_);
    const vision::Widget* widget =
        choice.screen_level ? nullptr : &out.perception.widgets[choice.index];
    GestureKind kind = select_gesture_for(widget, rng_);

    CompoundGesture rect_gesture;
    rect_gesture.kind = kind;
    std::map<char, Vec2> key_centers;
    if (widget) {
        Vec2 center = widget->bounds.center();
        switch (kind) {
            case GestureKind::Slide:
                rect_gesture.targets = {{static_cast<double>(widget->bounds.x), center.y},
                                        {static_cast<double>(widget->bounds.right()), center.y}};
                break;
            case GestureKind::Input: {
                rect_gesture.targets = {center};
                rect_gesture.payload =
                    kInputWords[rng_.uniform_int(0, static_cast<int>(std::size(kInputWords)) - 1)];
                auto kb = simbench::SoftKeyboard::layout_for_size(quad.rect_w, quad.rect_h);
                key_centers = kb.key_centers();
                break;
            }
            default:
                rect_gesture.targets = {center};
                break;
        }
        rec.detected_bounds = widget->bounds;
    } else {
        rec.screen_level = true;
    }

    auto plan = kinematics::synthesize_gesture(rect_gesture, *tip_, quad, opts_.arm,
                                               key_centers.empty() ? nullptr : &key_centers);
    double segment = kinematics::path_length(plan.tip_xy_path);
    metrics_.distance_mm += segment;
    metrics_.sim_seconds += kinematics::plan_seconds(plan, opts_.arm);
    tip_ = plan.end;

    // The bench resolves the same gesture through the true device geometry.
    CompoundGesture device_gesture;
    device_gesture.kind = kind;
    device_gesture.payload = rect_gesture.payload;
    for (const auto& t : rect_gesture.targets) {
        Vec2 world = kinematics::screen_to_world(t, quad);
        device_gesture.targets.push_back(device.device_px_from_world(world));
    }

    Vec2 op_point_world = plan.end.xy;
    if (!rect_gesture.targets.empty())
        op_point_world = kinematics::screen_to_world(rect_gesture.targets.front(), quad);

    rec.gesture = kind;
    if (!rect_gesture.targets.empty()) {
        rec.tap_rect_px = rect_gesture.targets.front();
        rec.tap_world = op_point_world;
    }
    rec.segment_mm = segment;

    // Ground-truth resolution, for the trace and the end-to-end criterion.
    const auto& screen_def = session_.model().screens.at(rec.screen_before);
    if (widget && !device_gesture.targets.empty()) {
        const simbench::ModelWidget* resolved =
            simbench::resolve_widget(screen_def, device_gesture.targets.front());
        if (resolved) rec.model_widget_id = resolved->id;

        // Intended = ground-truth widget best overlapping the detected box.
        Rect detected_device = rec.detected_bounds;
        {
            Vec2 tl = device.device_px_from_world(
                kinematics::screen_to_world({static_cast<double>(rec.detected_bounds.x),
                                             static_cast<double>(rec.detected_bounds.y)},
                                            quad));
            Vec2 br = device.device_px_from_world(
                kinematics::screen_to_world({static_cast<double>(rec.detected_bounds.right()),
                                             static_cast<double>(rec.detected_bounds.bottom())},
                                            quad));
            detected_device = {static_cast<int>(std::lround(tl.x)),
                               static_cast<int>(std::lround(tl.y)),
                               static_cast<int>(std::lround(br.x - tl.x)),
                               static_cast<int>(std::lround(br.y - tl.y))};
        }
        const simbench::ModelWidget* intended = nullptr;
        double best_iou = 0.0;
        for (const auto& mw : screen_def.widgets) {
            double iou = rect_iou(mw.bounds, detected_device);
            if (iou > best_iou) {
                best_iou = iou;
                intended = &mw;
            }
        }
        ++metrics_.widget_targeted_steps;
        if (intended && resolved && intended->id == resolved->id) {
            rec.target_matched = true;
            ++metrics_.matched_steps;
        }
    }

    auto resp = session_.apply(device_gesture);
    out.device_gesture = device_gesture;
    out.acted = true;

    switch (resp.kind) {
        case simbench::Response::Kind::Transition: rec.response = 't'; break;
        case simbench::Response::Kind::Crash: rec.response = 'c'; break;
        case simbench::Response::Kind::None: rec.response = 'n'; break;
    }
    if (resp.kind == simbench::Response::Kind::Crash) {
        ++metrics_.crashes;
        session_.reset(); // simple reset-to-initial policy
    }
    rec.screen_after = session_.current_screen();
    screens_seen_.insert(rec.screen_after);
    if (!rec.model_widget_id.empty())
        widgets_seen_.insert(rec.screen_before + "/" + rec.model_widget_id);

    history_.push(op_point_world);
    if (widget) history_.visited.insert(widget_visit_key(widget->bounds));

    rec.cumulative_mm = metrics_.distance_mm;
    rec.sim_seconds = metrics_.sim_seconds;
    metrics_.screens_visited = static_cast<int>(screens_seen_.size());
    metrics_.widgets_exercised = static_cast<int>(widgets_seen_.size());

    if (!opts_.debug_dir.empty()) {
        Image overlay = out.perception.rectified;
        vision::draw_widget_overlay(overlay, out.perception.widgets);
        std::string ref = opts_.debug_dir + "/step" + std::to_string(step_index_) + ".png";
        save_png(overlay, ref);
        rec.photo_ref = ref;
    }

    prev_rectified_ = out.perception.rectified;
    ++metrics_.steps;
    ++step_index_;
    return out;
}

RunResult run_exploration(simbench::AppSession& session, const ExploreOptions& opts) {
    ExplorationDriver driver(session, opts);
    RunResult result;
    while (!driver.done()) result.steps.push_back(driver.step().record);
    result.metrics = driver.metrics();
    return result;
}

} // namespace robotest::explorer
