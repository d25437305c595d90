#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "robotest/geometry.hpp"

namespace robotest::camera {
struct ScreenQuad;
}

namespace robotest::kinematics {

struct LinkLengths {
    double l1 = 200.0;
    double l2 = 180.0;
    double l3 = 60.0;

    double reach() const { return l1 + l2 + l3; }
};

struct JointState {
    double theta1 = 0.0;
    double theta2 = 0.0; // elbow, kept in [0, pi]
    double theta3 = 0.0;
    double z = 0.0; // pen height above the device plane, mm
};

struct PlanarPose {
    double x = 0.0;
    double y = 0.0;
    double alpha = 0.0; // end-effector orientation, theta1+theta2+theta3
};

enum class MoveDirection { Forward, Backward, Up, Down, Left, Right };

const char* direction_name(MoveDirection d);

struct AtomicMove {
    MoveDirection direction;
    double distance = 0.0; // mm, >= 0
};

enum class GestureKind { Click, DoubleClick, LongClick, Slide, Scroll, Input };

const char* gesture_name(GestureKind k);
GestureKind gesture_from_name(const std::string& name);

// Targets are screen-space pixel points: one for the click family and input,
// two for slide, none for scroll.
struct CompoundGesture {
    GestureKind kind = GestureKind::Click;
    std::vector<Vec2> targets;
    std::string payload; // input text
};

// Arm geometry and timing constants, read from the benchmark config.
struct ArmConfig {
    LinkLengths links;
    double pen_alpha = 0.0;        // fixed planar end-effector orientation
    double hover_height_mm = 10.0; // pen-up travel height
    double touch_height_mm = 0.0;  // pen-down height
    double speed_mm_s = 50.0;
    double tap_dwell_ms = 100.0;
    double long_press_ms = 800.0;
    double double_tap_gap_ms = 150.0; // must stay below the 300 ms window
    double double_tap_window_ms = 300.0;
};

PlanarPose forward_kinematics(const JointState& joints, const LinkLengths& links);

// Closed-form planar IK; throws Unreachable / DegenerateTarget.
JointState inverse_kinematics(const PlanarPose& target, const LinkLengths& links);

bool is_reachable(const PlanarPose& target, const LinkLengths& links);

struct TipState {
    Vec2 xy;        // mm in the arm base frame
    double z = 0.0; // mm above the device plane
};

// Axis decomposition of a tip displacement. Lateral motion below hover height
// is bracketed by an up/down pair so the pen never drags across the screen.
std::vector<AtomicMove> decompose_to_atomics(const TipState& from, const TipState& to,
                                             double hover_height_mm);

double path_length(std::span<const Vec2> tip_xy);

// Maps a rectified-screen pixel to the arm base frame using the stored scale,
// deflection and origin; throws OutOfScreen outside the rectified bounds.
Vec2 screen_to_world(const Vec2& px, const camera::ScreenQuad& quad);
Vec2 world_to_screen(const Vec2& world_mm, const camera::ScreenQuad& quad);

struct GesturePlan {
    std::vector<AtomicMove> atomics;
    std::vector<Vec2> tip_xy_path; // world-frame XY waypoints, starting at `from`
    double dwell_ms = 0.0;         // stationary time beyond movement
    TipState end;
    double pen_down_xy_mm = 0.0; // lateral travel while the pen is down
};

// Expands a compound gesture into atomic movements starting from the current
// tip state. Screen-space targets are mapped through `quad`; `keys` supplies
// soft-keyboard key centers (screen px) for input gestures.
GesturePlan synthesize_gesture(const CompoundGesture& gesture, const TipState& from,
                               const camera::ScreenQuad& quad, const ArmConfig& arm,
                               const std::map<char, Vec2>* keys = nullptr);

// Travel time plus dwell, in seconds.
double plan_seconds(const GesturePlan& plan, const ArmConfig& arm);

} // namespace robotest::kinematics
