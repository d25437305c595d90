#include "robotest/kinematics.hpp"

#include <cmath>

#include "robotest/camera.hpp"
#include "robotest/error.hpp"

namespace robotest::kinematics {

const char* direction_name(MoveDirection d) {
    switch (d) {
        case MoveDirection::Forward: return "forward";
        case MoveDirection::Backward: return "backward";
        case MoveDirection::Up: return "up";
        case MoveDirection::Down: return "down";
        case MoveDirection::Left: return "left";
        case MoveDirection::Right: return "right";
    }
    return "?";
}

const char* gesture_name(GestureKind k) {
    switch (k) {
        case GestureKind::Click: return "click";
        case GestureKind::DoubleClick: return "double_click";
        case GestureKind::LongClick: return "long_click";
        case GestureKind::Slide: return "slide";
        case GestureKind::Scroll: return "scroll";
        case GestureKind::Input: return "input";
    }
    return "?";
}

GestureKind gesture_from_name(const std::string& name) {
    if (name == "click") return GestureKind::Click;
    if (name == "double_click") return GestureKind::DoubleClick;
    if (name == "long_click") return GestureKind::LongClick;
    if (name == "slide") return GestureKind::Slide;
    if (name == "scroll") return GestureKind::Scroll;
    if (name == "input") return GestureKind::Input;
    raise(ErrorCode::ConfigError, "unknown gesture kind '" + name + "'");
}

PlanarPose forward_kinematics(const JointState& j, const LinkLengths& l) {
    double a12 = j.theta1 + j.theta2;
    double a123 = a12 + j.theta3;
    PlanarPose p;
    p.x = l.l1 * std::cos(j.theta1) + l.l2 * std::cos(a12) + l.l3 * std::cos(a123);
    p.y = l.l1 * std::sin(j.theta1) + l.l2 * std::sin(a12) + l.l3 * std::sin(a123);
    p.alpha = a123;
    return p;
}

JointState inverse_kinematics(const PlanarPose& target, const LinkLengths& l) {
    // Wrist center: strip the last link along the fixed orientation.
    double u = target.x - l.l3 * std::cos(target.alpha);
    double v = target.y - l.l3 * std::sin(target.alpha);
    double r2 = u * u + v * v;
    if (r2 <= 0.0) raise(ErrorCode::DegenerateTarget, "wrist center at the base axis");

    double c2 = (r2 - l.l1 * l.l1 - l.l2 * l.l2) / (2.0 * l.l1 * l.l2);
    // Tolerate boundary round-off only.
    if (c2 > 1.0 + 1e-12 || c2 < -1.0 - 1e-12)
        raise(ErrorCode::Unreachable, "target outside the two-link annulus");
    c2 = std::clamp(c2, -1.0, 1.0);

    double r = std::sqrt(r2);
    double cg = (r2 + l.l1 * l.l1 - l.l2 * l.l2) / (2.0 * l.l1 * r);
    cg = std::clamp(cg, -1.0, 1.0);

    JointState j;
    j.theta2 = std::acos(c2); // elbow-down branch, theta2 in [0, pi]
    // Quadrant-correct form of the paper's arctan term.
    j.theta1 = std::atan2(v, u) - std::acos(cg);
    j.theta3 = target.alpha - j.theta1 - j.theta2;
    j.z = 0.0;
    return j;
}

bool is_reachable(const PlanarPose& target, const LinkLengths& l) {
    double u = target.x - l.l3 * std::cos(target.alpha);
    double v = target.y - l.l3 * std::sin(target.alpha);
    double r2 = u * u + v * v;
    if (r2 <= 0.0) return false;
    double c2 = (r2 - l.l1 * l.l1 - l.l2 * l.l2) / (2.0 * l.l1 * l.l2);
    return c2 >= -1.0 && c2 <= 1.0;
}

std::vector<AtomicMove> decompose_to_atomics(const TipState& from, const TipState& to,
                                             double hover_height_mm) {
    std::vector<AtomicMove> moves;
    double dx = to.xy.x - from.xy.x;
    double dy = to.xy.y - from.xy.y;
    bool lateral = dx != 0.0 || dy != 0.0;
    double z = from.z;

    if (lateral && z < hover_height_mm) {
        moves.push_back({MoveDirection::Up, hover_height_mm - z});
        z = hover_height_mm;
    }
    if (dx != 0.0)
        moves.push_back({dx > 0 ? MoveDirection::Right : MoveDirection::Left, std::abs(dx)});
    if (dy != 0.0)
        moves.push_back({dy > 0 ? MoveDirection::Forward : MoveDirection::Backward, std::abs(dy)});
    if (to.z != z)
        moves.push_back({to.z > z ? MoveDirection::Up : MoveDirection::Down, std::abs(to.z - z)});
    return moves;
}

double path_length(std::span<const Vec2> tip_xy) {
    double total = 0.0;
    for (size_t i = 1; i < tip_xy.size(); ++i) total += distance(tip_xy[i - 1], tip_xy[i]);
    return total;
}

Vec2 screen_to_world(const Vec2& px, const camera::ScreenQuad& quad) {
    if (quad.rect_w > 0 && quad.rect_h > 0) {
        if (px.x < 0 || px.y < 0 || px.x > quad.rect_w || px.y > quad.rect_h)
            raise(ErrorCode::OutOfScreen, "pixel outside the rectified screen");
    }
    Vec2 scaled{px.x * quad.scale, px.y * quad.scale};
    return quad.origin_world + scaled.rotated(quad.deflection_rad);
}

Vec2 world_to_screen(const Vec2& world_mm, const camera::ScreenQuad& quad) {
    Vec2 local = (world_mm - quad.origin_world).rotated(-quad.deflection_rad);
    return {local.x / quad.scale, local.y / quad.scale};
}

namespace {

class PlanBuilder {
public:
    PlanBuilder(const TipState& from, double hover) : hover_(hover) {
        plan_.end = from;
        plan_.tip_xy_path.push_back(from.xy);
    }

    void move_to(const Vec2& xy, double z) {
        TipState target{xy, z};
        auto moves = decompose_to_atomics(plan_.end, target, hover_);
        bool pen_down = plan_.end.z <= 0.0 && z <= 0.0;
        for (const auto& m : moves) plan_.atomics.push_back(m);
        if (xy.x != plan_.end.xy.x || xy.y != plan_.end.xy.y) {
            if (pen_down) {
                // Drag: lateral travel with the pen on the glass.
                plan_.pen_down_xy_mm +=
                    std::abs(xy.x - plan_.end.xy.x) + std::abs(xy.y - plan_.end.xy.y);
            }
            // Axis-decomposed waypoints (x first, then y).
            if (xy.x != plan_.end.xy.x) plan_.tip_xy_path.push_back({xy.x, plan_.end.xy.y});
            if (xy.y != plan_.end.xy.y) plan_.tip_xy_path.push_back(xy);
        }
        plan_.end = target;
    }

    // A drag keeps the pen down across the lateral move.
    void drag_to(const Vec2& xy) {
        double dx = xy.x - plan_.end.xy.x, dy = xy.y - plan_.end.xy.y;
        if (dx != 0.0) {
            plan_.atomics.push_back({dx > 0 ? MoveDirection::Right : MoveDirection::Left, std::abs(dx)});
            plan_.tip_xy_path.push_back({xy.x, plan_.end.xy.y});
        }
        if (dy != 0.0) {
            plan_.atomics.push_back({dy > 0 ? MoveDirection::Forward : MoveDirection::Backward, std::abs(dy)});
            plan_.tip_xy_path.push_back(xy);
        }
        plan_.pen_down_xy_mm += std::abs(dx) + std::abs(dy);
        plan_.end.xy = xy;
    }

    void pen_down(double touch_z) {
        if (plan_.end.z > touch_z) {
            plan_.atomics.push_back({MoveDirection::Down, plan_.end.z - touch_z});
            plan_.end.z = touch_z;
        }
    }

    void pen_up() {
        if (plan_.end.z < hover_) {
            plan_.atomics.push_back({MoveDirection::Up, hover_ - plan_.end.z});
            plan_.end.z = hover_;
        }
    }

    void dwell(double ms) { plan_.dwell_ms += ms; }

    GesturePlan take() { return std::move(plan_); }

private:
    double hover_;
    GesturePlan plan_;
};

Vec2 map_target(const Vec2& px, const camera::ScreenQuad& quad) {
    if (px.x < 0 || px.y < 0 || px.x > quad.rect_w || px.y > quad.rect_h)
        raise(ErrorCode::TargetOutOfBounds, "gesture target outside the screen");
    return screen_to_world(px, quad);
}

} // namespace

GesturePlan synthesize_gesture(const CompoundGesture& g, const TipState& from,
                               const camera::ScreenQuad& quad, const ArmConfig& arm,
                               const std::map<char, Vec2>* keys) {
    PlanBuilder b(from, arm.hover_height_mm);
    double touch = arm.touch_height_mm;

    auto tap = [&](const Vec2& world) {
        b.move_to(world, arm.hover_height_mm);
        b.pen_down(touch);
        b.dwell(arm.tap_dwell_ms);
        b.pen_up();
    };

    switch (g.kind) {
        case GestureKind::Click: {
            tap(map_target(g.targets.at(0), quad));
            break;
        }
        case GestureKind::DoubleClick: {
            Vec2 w = map_target(g.targets.at(0), quad);
            b.move_to(w, arm.hover_height_mm);
            for (int i = 0; i < 2; ++i) {
                b.pen_down(touch);
                b.dwell(arm.tap_dwell_ms);
                b.pen_up();
                if (i == 0) b.dwell(arm.double_tap_gap_ms);
            }
            break;
        }
        case GestureKind::LongClick: {
            Vec2 w = map_target(g.targets.at(0), quad);
            b.move_to(w, arm.hover_height_mm);
            b.pen_down(touch);
            b.dwell(arm.long_press_ms);
            b.pen_up();
            break;
        }
        case GestureKind::Slide: {
            Vec2 w0 = map_target(g.targets.at(0), quad);
            Vec2 w1 = map_target(g.targets.at(1), quad);
            b.move_to(w0, arm.hover_height_mm);
            b.pen_down(touch);
            b.drag_to(w1);
            b.pen_up();
            break;
        }
        case GestureKind::Scroll: {
            // Bottom-to-top sweep through the screen center.
            Vec2 p0{quad.rect_w / 2.0, quad.rect_h * 0.8};
            Vec2 p1{quad.rect_w / 2.0, quad.rect_h * 0.2};
            b.move_to(screen_to_world(p0, quad), arm.hover_height_mm);
            b.pen_down(touch);
            b.drag_to(screen_to_world(p1, quad));
            b.pen_up();
            break;
        }
        case GestureKind::Input: {
            tap(map_target(g.targets.at(0), quad));
            if (!keys) raise(ErrorCode::UnknownCharacter, "no keyboard layout supplied");
            for (char c : g.payload) {
                auto it = keys->find(c);
                if (it == keys->end())
                    raise(ErrorCode::UnknownCharacter, std::string("no key for '") + c + "'");
                tap(map_target(it->second, quad));
            }
            break;
        }
    }
    b.pen_up();
    return b.take();
}

double plan_seconds(const GesturePlan& plan, const ArmConfig& arm) {
    double travel = 0.0;
    for (const auto& m : plan.atomics) travel += m.distance;
    return travel / arm.speed_mm_s + plan.dwell_ms / 1000.0;
}

} // namespace robotest::kinematics
