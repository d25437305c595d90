#include <cmath>

#include "doctest.h"
#include "robotest/camera.hpp"
#include "robotest/error.hpp"
#include "robotest/rng.hpp"

using namespace robotest;
using namespace robotest::camera;

namespace {

// Synthetic chessboard generator: the calibration oracle. Views are produced
// by projecting a planar grid through known intrinsics and poses; corner
// noise models the simulator's corner reader.
std::vector<ChessboardView> make_views(const CameraIntrinsics& intr, int n_views,
                                       double noise_sigma, uint64_t seed) {
    Rng rng(seed);
    std::vector<ChessboardView> views;
    const int cols = 12, rows = 9;
    const double square = 20.0;
    for (int v = 0; v < n_views; ++v) {
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
        Eigen::Vector3d t(-90.0 + 14.0 * v, -60.0 + 9.0 * v, 620.0 + 35.0 * v);
        CameraPose pose{R, t};

        ChessboardView view;
        view.cols = cols;
        view.rows = rows;
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                Vec2 world{c * square, r * square};
                Vec2 px = project(intr, pose, {world.x, world.y, 0.0});
                px.x += rng.normal(0.0, noise_sigma);
                px.y += rng.normal(0.0, noise_sigma);
                view.correspondences.push_back({world, px});
            }
        }
        views.push_back(std::move(view));
    }
    return views;
}

} // namespace

TEST_SUITE_BEGIN("camera");

TEST_CASE("projection") {
    SUBCASE("identity intrinsics") {
        CameraIntrinsics intr{1, 1, 0, 0, 0, 0};
        CameraPose pose; // camera at origin looking along +z
        Vec2 px = project(intr, pose, {1, 2, 1});
        CHECK(px.x == doctest::Approx(1));
        CHECK(px.y == doctest::Approx(2));
    }
    SUBCASE("principal point") {
        CameraIntrinsics intr{800, 800, 320, 240, 0, 0};
        CameraPose pose;
        Vec2 px = project(intr, pose, {0, 0, 500});
        CHECK(px.x == doctest::Approx(320));
        CHECK(px.y == doctest::Approx(240));
    }
    SUBCASE("skewed matrix against a hand product") {
        CameraIntrinsics intr{800, 820, 320, 240, 2, 0};
        CameraPose pose;
        Eigen::Vector3d w(120, -80, 400);
        // Oracle: explicit matrix multiply.
        double xn = w.x() / w.z(), yn = w.y() / w.z();
        Vec2 expect{800 * xn + 2 * yn + 320, 820 * yn + 240};
        Vec2 px = project(intr, pose, w);
        CHECK(px.x == doctest::Approx(expect.x).epsilon(1e-12));
        CHECK(px.y == doctest::Approx(expect.y).epsilon(1e-12));
    }
    SUBCASE("behind camera") {
        CameraIntrinsics intr{800, 800, 320, 240, 0, 0};
        CameraPose pose;
        CHECK_THROWS_WITH_AS(project(intr, pose, {0, 0, -1}), doctest::Contains("BehindCamera"),
                             Error);
    }
    SUBCASE("affine scaling in normalized coordinates") {
        CameraIntrinsics intr{640, 660, 320, 240, 0, 0};
        CameraPose pose;
        Vec2 a = project(intr, pose, {0.1, 0.2, 1.0});
        Vec2 b = project(intr, pose, {0.2, 0.4, 1.0});
        CHECK((b.x - intr.cx) == doctest::Approx(2 * (a.x - intr.cx)));
        CHECK((b.y - intr.cy) == doctest::Approx(2 * (a.y - intr.cy)));
    }
}

TEST_CASE("unproject inverts project on the desk plane") {
    CameraIntrinsics intr{900, 910, 640, 360, 1.5, 0.02};
    CameraPose pose = look_down_pose({150, 90}, 210.0);
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        Vec2 w{rng.uniform(60, 240), rng.uniform(10, 170)};
        Vec2 px = project(intr, pose, {w.x, w.y, 0.0});
        Vec2 back = unproject_to_plane(intr, pose, px);
        CHECK(distance(back, w) < 1e-6);
    }
}

TEST_CASE("homography estimation") {
    SUBCASE("identity on the unit square") {
        std::vector<std::pair<Vec2, Vec2>> pairs = {
            {{0, 0}, {0, 0}}, {{1, 0}, {1, 0}}, {{1, 1}, {1, 1}}, {{0, 1}, {0, 1}}};
        Homography h = estimate_homography(pairs);
        CHECK((h.H - Eigen::Matrix3d::Identity()).norm() < 1e-9);
    }
    SUBCASE("pure rotation by 90 degrees") {
        std::vector<std::pair<Vec2, Vec2>> pairs = {
            {{0, 0}, {0, 0}}, {{1, 0}, {0, 1}}, {{1, 1}, {-1, 1}}, {{0, 1}, {-1, 0}}};
        Homography h = estimate_homography(pairs);
        Vec2 p = h.apply({0.3, 0.7});
        CHECK(p.x == doctest::Approx(-0.7));
        CHECK(p.y == doctest::Approx(0.3));
    }
    SUBCASE("random quads map within solver tolerance") {
        Rng rng(5);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<std::pair<Vec2, Vec2>> pairs;
            for (int i = 0; i < 4; ++i) {
                double jx = rng.uniform(-20, 20), jy = rng.uniform(-20, 20);
                Vec2 src{(i == 1 || i == 2) * 100.0 + jx, (i >= 2) * 100.0 + jy};
                Vec2 dst{rng.uniform(0, 600), rng.uniform(0, 600)};
                pairs.push_back({src, dst});
            }
            Homography h;
            try {
                h = estimate_homography(pairs);
            } catch (const Error&) {
                continue; // rare degenerate draw
            }
            for (const auto& [s, d] : pairs) CHECK(distance(h.apply(s), d) < 1e-8);
        }
    }
    SUBCASE("round trip moves interior points < 1e-6 px") {
        std::vector<std::pair<Vec2, Vec2>> pairs = {
            {{0, 0}, {12, 7}}, {{300, 0}, {290, 22}}, {{300, 600}, {310, 580}}, {{0, 600}, {-4, 575}}};
        Homography h = estimate_homography(pairs);
        Homography hi = h.inverse();
        Rng rng(9);
        for (int i = 0; i < 100; ++i) {
            Vec2 p{rng.uniform(10, 290), rng.uniform(10, 590)};
            CHECK(distance(hi.apply(h.apply(p)), p) < 1e-6);
        }
    }
    SUBCASE("degenerate points rejected") {
        std::vector<std::pair<Vec2, Vec2>> collinear = {
            {{0, 0}, {0, 0}}, {{1, 1}, {1, 0}}, {{2, 2}, {1, 1}}, {{3, 3}, {0, 1}}};
        CHECK_THROWS_WITH_AS(estimate_homography(collinear), doctest::Contains("DegeneratePoints"),
                             Error);
    }
}

TEST_CASE("zhang calibration") {
    CameraIntrinsics truth{800, 820, 320, 240, 0, 0};

    SUBCASE("noiseless views recover within 1e-3 relative error") {
        auto views = make_views(truth, 5, 0.0, 1);
        auto result = calibrate(views);
        CHECK(std::abs(result.intrinsics.fx - truth.fx) / truth.fx < 1e-3);
        CHECK(std::abs(result.intrinsics.fy - truth.fy) / truth.fy < 1e-3);
        CHECK(std::abs(result.intrinsics.cx - truth.cx) / truth.cx < 1e-3);
        CHECK(std::abs(result.intrinsics.cy - truth.cy) / truth.cy < 1e-3);
        CHECK(std::abs(result.intrinsics.s) < 1e-3);
        CHECK(result.mean_reprojection_error_px < 1e-6);
    }
    SUBCASE("noisy views recover within 1 percent") {
        auto views = make_views(truth, 5, 0.2, 2);
        auto result = calibrate(views);
        CHECK(std::abs(result.intrinsics.fx - truth.fx) / truth.fx < 0.01);
        CHECK(std::abs(result.intrinsics.fy - truth.fy) / truth.fy < 0.01);
        CHECK(std::abs(result.intrinsics.cx - truth.cx) / truth.cx < 0.01);
        CHECK(std::abs(result.intrinsics.cy - truth.cy) / truth.cy < 0.01);
        CHECK(std::abs(result.intrinsics.s - truth.s) < 2.0);
        CHECK(result.mean_reprojection_error_px < 0.5);
    }
    SUBCASE("two views are insufficient") {
        auto views = make_views(truth, 2, 0.0, 3);
        CHECK_THROWS_WITH_AS(calibrate(views), doctest::Contains("InsufficientViews"), Error);
    }
    SUBCASE("pure translation is degenerate") {
        Rng rng(4);
        std::vector<ChessboardView> views;
        for (int v = 0; v < 4; ++v) {
            CameraPose pose;
            pose.R = Eigen::Matrix3d::Identity();
            pose.t = Eigen::Vector3d(-100 + 20 * v, -60 + 10 * v, 600);
            ChessboardView view;
            view.cols = 9;
            view.rows = 6;
            for (int r = 0; r < 6; ++r)
                for (int c = 0; c < 9; ++c) {
                    Vec2 w{c * 25.0, r * 25.0};
                    view.correspondences.push_back({w, project(truth, pose, {w.x, w.y, 0})});
                }
            views.push_back(view);
        }
        CHECK_THROWS_WITH_AS(calibrate(views), doctest::Contains("DegenerateConfiguration"), Error);
    }
}

TEST_CASE("measure deflection") {
    SUBCASE("axis aligned quad") {
        std::array<Vec2, 4> corners{{{100, 100}, {400, 100}, {400, 700}, {100, 700}}};
        auto ds = measure_deflection(corners, 60.0);
        CHECK(ds.angle_rad == doctest::Approx(0.0));
        CHECK(ds.scale_mm_per_px == doctest::Approx(0.2));
    }
    SUBCASE("rotated quad reports the placement angle") {
        double angle = deg_to_rad(7.0);
        Vec2 center{400, 400};
        std::array<Vec2, 4> base{{{-150, -300}, {150, -300}, {150, 300}, {-150, 300}}};
        std::array<Vec2, 4> corners;
        for (int i = 0; i < 4; ++i) corners[i] = center + base[i].rotated(angle);
        auto ds = measure_deflection(corners, 60.0);
        CHECK(rad_to_deg(ds.angle_rad) == doctest::Approx(7.0).epsilon(0.07));

        // Odd in the placement angle.
        for (int i = 0; i < 4; ++i) corners[i] = center + base[i].rotated(-angle);
        auto neg = measure_deflection(corners, 60.0);
        CHECK(neg.angle_rad == doctest::Approx(-ds.angle_rad).epsilon(1e-6));
    }
    SUBCASE("degenerate quad") {
        std::array<Vec2, 4> corners{{{0, 0}, {0, 0}, {10, 10}, {0, 10}}};
        CHECK_THROWS_WITH_AS(measure_deflection(corners, 60.0), doctest::Contains("DegenerateQuad"),
                             Error);
    }
}

TEST_SUITE_END();
