#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "robotest/geometry.hpp"
#include "robotest/image.hpp"

namespace robotest::camera {

// Pinhole intrinsics: pixel = [fx s cx; 0 fy cy; 0 0 1] * normalized, with an
// optional single radial term k1 applied to the normalized coordinates.
struct CameraIntrinsics {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    double s = 0.0;
    double k1 = 0.0;
};

// Extrinsic pose, world -> camera: p_cam = R * p_world + t.
struct CameraPose {
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

CameraPose look_down_pose(const Vec2& camera_xy_mm, double height_mm);
CameraPose pose_from_rodrigues(const Eigen::Vector3d& rvec, const Eigen::Vector3d& t);

struct Homography {
    Eigen::Matrix3d H = Eigen::Matrix3d::Identity();

    Vec2 apply(const Vec2& p) const;
    Homography inverse() const;
};

// Plane-target correspondences for one calibration view: (world mm on Z=0,
// observed pixel).
struct ChessboardView {
    std::vector<std::pair<Vec2, Vec2>> correspondences;
    int cols = 0;
    int rows = 0;
};

// Detected screen: photo-pixel corners clockwise from top-left, plus the
// deflection/scale values stored for the movement transformation. `scale`
// is mm per rectified pixel once the rectified size has been chosen;
// `origin_world` is corner[0] in the arm base frame.
struct ScreenQuad {
    std::array<Vec2, 4> corners{};
    double deflection_rad = 0.0;
    double scale = 0.0;
    Vec2 origin_world{0.0, 0.0};
    int rect_w = 0; // rectified image size, px
    int rect_h = 0;
};

Vec2 project(const CameraIntrinsics& intr, const CameraPose& pose, const Eigen::Vector3d& world);

// Ray through a pixel intersected with the Z=0 plane (world mm). Used to
// anchor a detected quad in the arm base frame.
Vec2 unproject_to_plane(const CameraIntrinsics& intr, const CameraPose& pose, const Vec2& pixel);

struct CalibrationResult {
    CameraIntrinsics intrinsics;
    double mean_reprojection_error_px = 0.0;
    int iterations = 0;
};

struct CalibrationOptions {
    bool refine = true;
    int max_iterations = 20;
    double step_tolerance = 1e-10;
};

// Zhang closed-form solution from per-view homographies, then Gauss-Newton
// on reprojection error.
CalibrationResult calibrate(const std::vector<ChessboardView>& views,
                            const CalibrationOptions& opts = {});

Homography estimate_homography(std::span<const std::pair<Vec2, Vec2>> pairs);

// Warps the quad to an upright out_w x out_h rectangle, bilinear sampling.
Image rectify_screen(const Image& photo, const ScreenQuad& quad, int out_w, int out_h,
                     uint8_t background = 0);

struct DeflectionScale {
    double angle_rad = 0.0;
    double scale_mm_per_px = 0.0; // physical mm per photo pixel along the top/bottom edges
};

DeflectionScale measure_deflection(const std::array<Vec2, 4>& corners, double physical_width_mm);

} // namespace robotest::camera
