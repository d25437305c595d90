#include <cmath>
#include <vector>

#include "doctest.h"
#include "robotest/camera.hpp"
#include "robotest/error.hpp"
#include "robotest/kinematics.hpp"
#include "robotest/rng.hpp"

using namespace robotest;
using namespace robotest::kinematics;

namespace {

// Independent scalar evaluation of the forward chain, kept separate from the
// library so it can serve as the oracle.
Vec2 fk_oracle(double t1, double t2, double t3, double l1, double l2, double l3) {
    double x = l1 * std::cos(t1) + l2 * std::cos(t1 + t2) + l3 * std::cos(t1 + t2 + t3);
    double y = l1 * std::sin(t1) + l2 * std::sin(t1 + t2) + l3 * std::sin(t1 + t2 + t3);
    return {x, y};
}

double total_xy(const std::vector<AtomicMove>& moves, bool x_axis) {
    double sum = 0.0;
    for (const auto& m : moves) {
        if (x_axis && m.direction == MoveDirection::Right) sum += m.distance;
        if (x_axis && m.direction == MoveDirection::Left) sum -= m.distance;
        if (!x_axis && m.direction == MoveDirection::Forward) sum += m.distance;
        if (!x_axis && m.direction == MoveDirection::Backward) sum -= m.distance;
    }
    return sum;
}

double total_z(const std::vector<AtomicMove>& moves) {
    double sum = 0.0;
    for (const auto& m : moves) {
        if (m.direction == MoveDirection::Up) sum += m.distance;
        if (m.direction == MoveDirection::Down) sum -= m.distance;
    }
    return sum;
}

camera::ScreenQuad identity_quad(int w, int h) {
    camera::ScreenQuad q;
    q.scale = 1.0;
    q.deflection_rad = 0.0;
    q.origin_world = {0, 0};
    q.rect_w = w;
    q.rect_h = h;
    return q;
}

} // namespace

TEST_SUITE_BEGIN("kinematics");

TEST_CASE("forward kinematics matches the closed-form sums") {
    LinkLengths l{100, 100, 50};

    auto p = forward_kinematics({0, 0, 0, 0}, l);
    CHECK(p.x == doctest::Approx(250.0));
    CHECK(p.y == doctest::Approx(0.0));
    CHECK(p.alpha == doctest::Approx(0.0));

    auto q = forward_kinematics({kPi / 2, 0, 0, 0}, l);
    CHECK(q.x == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(q.y == doctest::Approx(250.0));
    CHECK(q.alpha == doctest::Approx(kPi / 2));

    // Hand-evaluated oracle case.
    LinkLengths l2{120, 100, 60};
    Vec2 expect = fk_oracle(0.5236, 0.7854, -0.2618, 120, 100, 60);
    auto r = forward_kinematics({0.5236, 0.7854, -0.2618, 0}, l2);
    CHECK(r.x == doctest::Approx(expect.x).epsilon(1e-12));
    CHECK(r.y == doctest::Approx(expect.y).epsilon(1e-12));
    CHECK(expect.x == doctest::Approx(159.804457).epsilon(1e-6));
    CHECK(expect.y == doctest::Approx(208.554387).epsilon(1e-6));
}

TEST_CASE("inverse kinematics on axis targets") {
    LinkLengths l{100, 100, 50};
    auto j = inverse_kinematics({250, 0, 0}, l);
    CHECK(j.theta1 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(j.theta2 == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(j.theta3 == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS_AS(inverse_kinematics({1000, 0, 0}, l), Error);
    CHECK_THROWS_WITH_AS(inverse_kinematics({1000, 0, 0}, l),
                         doctest::Contains("Unreachable"), Error);
    // Wrist center collapses onto the base axis.
    CHECK_THROWS_WITH_AS(inverse_kinematics({50, 0, 0}, {100, 100, 50}),
                         doctest::Contains("DegenerateTarget"), Error);
}

TEST_CASE("FK(IK(t)) identity over random reachable targets") {
    LinkLengths l{200, 180, 60};
    Rng rng(42);
    int tested = 0;
    double max_err = 0.0;
    while (tested < 10000) {
        PlanarPose t;
        t.alpha = rng.uniform(-kPi, kPi);
        double radius = rng.uniform(0.0, l.reach());
        double phi = rng.uniform(-kPi, kPi);
        t.x = radius * std::cos(phi);
        t.y = radius * std::sin(phi);
        if (!is_reachable(t, l)) continue;
        ++tested;
        auto j = inverse_kinematics(t, l);
        CHECK(j.theta2 >= 0.0);
        CHECK(j.theta2 <= kPi + 1e-12);
        auto p = forward_kinematics(j, l);
        max_err = std::max({max_err, std::abs(p.x - t.x), std::abs(p.y - t.y)});
    }
    CHECK(max_err < 1e-6);
}

TEST_CASE("IK is deterministic") {
    LinkLengths l{200, 180, 60};
    PlanarPose t{150, 120, 0.4};
    auto a = inverse_kinematics(t, l);
    auto b = inverse_kinematics(t, l);
    CHECK(a.theta1 == b.theta1);
    CHECK(a.theta2 == b.theta2);
    CHECK(a.theta3 == b.theta3);
}

TEST_CASE("atomic decomposition") {
    SUBCASE("lateral at hover height") {
        auto moves = decompose_to_atomics({{0, 0}, 10}, {{30, 40}, 10}, 10);
        REQUIRE(moves.size() == 2);
        CHECK(moves[0].direction == MoveDirection::Right);
        CHECK(moves[0].distance == doctest::Approx(30));
        CHECK(moves[1].direction == MoveDirection::Forward);
        CHECK(moves[1].distance == doctest::Approx(40));
    }
    SUBCASE("pure descent") {
        auto moves = decompose_to_atomics({{0, 0}, 10}, {{0, 0}, 0}, 10);
        REQUIRE(moves.size() == 1);
        CHECK(moves[0].direction == MoveDirection::Down);
        CHECK(moves[0].distance == doctest::Approx(10));
    }
    SUBCASE("pen-up rule when moving laterally from the glass") {
        auto moves = decompose_to_atomics({{10, 0}, 0}, {{40, 0}, 0}, 10);
        REQUIRE(moves.size() == 3);
        CHECK(moves[0].direction == MoveDirection::Up);
        CHECK(moves[0].distance == doctest::Approx(10));
        CHECK(moves[1].direction == MoveDirection::Right);
        CHECK(moves[1].distance == doctest::Approx(30));
        CHECK(moves[2].direction == MoveDirection::Down);
        CHECK(moves[2].distance == doctest::Approx(10));
    }
    SUBCASE("vector sum equals the displacement exactly") {
        Rng rng(7);
        for (int i = 0; i < 200; ++i) {
            TipState a{{rng.uniform(-50, 50), rng.uniform(-50, 50)}, rng.uniform(0, 15)};
            TipState b{{rng.uniform(-50, 50), rng.uniform(-50, 50)}, rng.uniform(0, 15)};
            auto moves = decompose_to_atomics(a, b, 10);
            CHECK(total_xy(moves, true) == doctest::Approx(b.xy.x - a.xy.x).epsilon(1e-12));
            CHECK(total_xy(moves, false) == doctest::Approx(b.xy.y - a.xy.y).epsilon(1e-12));
            CHECK(total_z(moves) == doctest::Approx(b.z - a.z).epsilon(1e-12));
        }
    }
}

TEST_CASE("path length") {
    std::vector<Vec2> tri{{0, 0}, {30, 40}};
    CHECK(path_length(tri) == doctest::Approx(50.0));
    CHECK(path_length(std::vector<Vec2>{}) == 0.0);
    CHECK(path_length(std::vector<Vec2>{{3, 4}}) == 0.0);

    // Additive under concatenation.
    std::vector<Vec2> a{{0, 0}, {1, 1}, {4, 5}};
    std::vector<Vec2> b{{4, 5}, {10, 2}};
    std::vector<Vec2> ab{{0, 0}, {1, 1}, {4, 5}, {10, 2}};
    CHECK(path_length(ab) == doctest::Approx(path_length(a) + path_length(b)));
}

TEST_CASE("screen/world mapping") {
    camera::ScreenQuad q = identity_quad(100, 100);
    SUBCASE("identity") {
        Vec2 w = screen_to_world({10, 20}, q);
        CHECK(w.x == doctest::Approx(10));
        CHECK(w.y == doctest::Approx(20));
    }
    SUBCASE("pure rotation by 90 degrees") {
        q.deflection_rad = kPi / 2;
        Vec2 w = screen_to_world({10, 0}, q);
        CHECK(w.x == doctest::Approx(0).epsilon(1e-12));
        CHECK(w.y == doctest::Approx(10));
    }
    SUBCASE("composed transform against a hand oracle") {
        q.deflection_rad = deg_to_rad(10);
        q.scale = 0.2;
        q.origin_world = {50, 30};
        // Oracle: scale, rotate, translate composed by hand.
        auto oracle = [&](Vec2 p) {
            double c = std::cos(q.deflection_rad), s = std::sin(q.deflection_rad);
            double sx = p.x * 0.2, sy = p.y * 0.2;
            return Vec2{50 + sx * c - sy * s, 30 + sx * s + sy * c};
        };
        for (Vec2 p : {Vec2{0, 0}, Vec2{10, 5}, Vec2{99, 99}, Vec2{42, 77}}) {
            Vec2 w = screen_to_world(p, q);
            Vec2 e = oracle(p);
            CHECK(w.x == doctest::Approx(e.x).epsilon(1e-12));
            CHECK(w.y == doctest::Approx(e.y).epsilon(1e-12));
        }
    }
    SUBCASE("round trip within 0.1 mm") {
        q.deflection_rad = deg_to_rad(-7);
        q.scale = 0.21;
        q.origin_world = {80, 45};
        Rng rng(3);
        for (int i = 0; i < 100; ++i) {
            Vec2 p{rng.uniform(0, 100), rng.uniform(0, 100)};
            Vec2 back = world_to_screen(screen_to_world(p, q), q);
            CHECK(distance(back, p) * q.scale < 0.1);
        }
    }
    SUBCASE("out of screen") {
        CHECK_THROWS_WITH_AS(screen_to_world({150, 10}, q), doctest::Contains("OutOfScreen"),
                             Error);
    }
}

TEST_CASE("gesture synthesis") {
    ArmConfig arm;
    camera::ScreenQuad q = identity_quad(300, 600);
    q.scale = 0.2;
    TipState from{{30, 60}, arm.hover_height_mm};

    SUBCASE("click: move above, down, up") {
        CompoundGesture g{GestureKind::Click, {{100, 200}}, ""};
        auto plan = synthesize_gesture(g, from, q, arm);
        REQUIRE(plan.atomics.size() >= 3);
        CHECK(plan.atomics.back().direction == MoveDirection::Up);
        CHECK(plan.end.z == doctest::Approx(arm.hover_height_mm));
        CHECK(plan.pen_down_xy_mm == 0.0);
        // Ends above the target.
        CHECK(plan.end.xy.x == doctest::Approx(100 * 0.2));
        CHECK(plan.end.xy.y == doctest::Approx(200 * 0.2));
    }
    SUBCASE("double click has two down/up pairs and a sub-window gap") {
        CompoundGesture g{GestureKind::DoubleClick, {{100, 200}}, ""};
        auto plan = synthesize_gesture(g, from, q, arm);
        int downs = 0, ups = 0;
        for (const auto& m : plan.atomics) {
            downs += m.direction == MoveDirection::Down;
            ups += m.direction == MoveDirection::Up;
        }
        CHECK(downs == 2);
        CHECK(ups >= 2);
        CHECK(arm.double_tap_gap_ms < arm.double_tap_window_ms);
    }
    SUBCASE("long click dwells at least the long-press threshold") {
        CompoundGesture g{GestureKind::LongClick, {{100, 200}}, ""};
        auto plan = synthesize_gesture(g, from, q, arm);
        CHECK(plan.dwell_ms >= arm.long_press_ms);
    }
    SUBCASE("slide drags pen-down across the widget width") {
        CompoundGesture g{GestureKind::Slide, {{40, 100}, {140, 100}}, ""};
        auto plan = synthesize_gesture(g, from, q, arm);
        CHECK(plan.pen_down_xy_mm == doctest::Approx(100 * 0.2));
    }
    SUBCASE("input clicks the field then one key per character") {
        std::map<char, Vec2> keys{{'a', {50, 500}}, {'b', {80, 500}}};
        CompoundGesture g{GestureKind::Input, {{150, 100}}, "ab"};
        auto plan = synthesize_gesture(g, from, q, arm, &keys);
        int downs = 0;
        for (const auto& m : plan.atomics) downs += m.direction == MoveDirection::Down;
        CHECK(downs == 3); // field + 2 keys
        CHECK_THROWS_WITH_AS(synthesize_gesture({GestureKind::Input, {{150, 100}}, "aZ"}, from, q,
                                                arm, &keys),
                             doctest::Contains("UnknownCharacter"), Error);
    }
    SUBCASE("gestures start and end pen-up") {
        for (auto kind : {GestureKind::Click, GestureKind::DoubleClick, GestureKind::LongClick}) {
            CompoundGesture g{kind, {{100, 200}}, ""};
            auto plan = synthesize_gesture(g, from, q, arm);
            CHECK(plan.end.z == doctest::Approx(arm.hover_height_mm));
        }
    }
    SUBCASE("target outside the screen") {
        CompoundGesture g{GestureKind::Click, {{400, 200}}, ""};
        CHECK_THROWS_WITH_AS(synthesize_gesture(g, from, q, arm),
                             doctest::Contains("TargetOutOfBounds"), Error);
    }
}

TEST_SUITE_END();
