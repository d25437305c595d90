#include "robotest/camera.hpp"

#include <cmath>

#include <Eigen/SVD>

#include "robotest/error.hpp"

namespace robotest::camera {

CameraPose look_down_pose(const Vec2& camera_xy_mm, double height_mm) {
    // World frame: x east, y south, z down; the camera sits above the desk at
    // z = -height and its axes coincide with the world axes, so a desk point
    // lands at depth +height.
    CameraPose pose;
    pose.R = Eigen::Matrix3d::Identity();
    pose.t = -Eigen::Vector3d(camera_xy_mm.x, camera_xy_mm.y, -height_mm);
    return pose;
}

CameraPose pose_from_rodrigues(const Eigen::Vector3d& rvec, const Eigen::Vector3d& t) {
    CameraPose pose;
    double angle = rvec.norm();
    if (angle < 1e-14) {
        pose.R = Eigen::Matrix3d::Identity();
    } else {
        pose.R = Eigen::AngleAxisd(angle, rvec / angle).toRotationMatrix();
    }
    pose.t = t;
    return pose;
}

Vec2 Homography::apply(const Vec2& p) const {
    Eigen::Vector3d v = H * Eigen::Vector3d(p.x, p.y, 1.0);
    if (std::abs(v.z()) < 1e-14) raise(ErrorCode::DegeneratePoints, "point maps to infinity");
    return {v.x() / v.z(), v.y() / v.z()};
}

Homography Homography::inverse() const {
    Homography out;
    out.H = H.inverse();
    if (std::abs(out.H(2, 2)) > 1e-14) out.H /= out.H(2, 2);
    return out;
}

Vec2 project(const CameraIntrinsics& intr, const CameraPose& pose, const Eigen::Vector3d& world) {
    Eigen::Vector3d cam = pose.R * world + pose.t;
    if (cam.z() <= 1e-9) raise(ErrorCode::BehindCamera, "point at or behind the camera plane");
    double xn = cam.x() / cam.z();
    double yn = cam.y() / cam.z();
    if (intr.k1 != 0.0) {
        double r2 = xn * xn + yn * yn;
        double f = 1.0 + intr.k1 * r2;
        xn *= f;
        yn *= f;
    }
    return {intr.fx * xn + intr.s * yn + intr.cx, intr.fy * yn + intr.cy};
}

Vec2 unproject_to_plane(const CameraIntrinsics& intr, const CameraPose& pose, const Vec2& pixel) {
    // Undo the intrinsic matrix (skew included).
    double yn = (pixel.y - intr.cy) / intr.fy;
    double xn = (pixel.x - intr.cx - intr.s * yn) / intr.fx;
    if (intr.k1 != 0.0) {
        // Invert the radial term by fixed-point iteration; k1 is small.
        double xd = xn, yd = yn;
        for (int i = 0; i < 10; ++i) {
            double r2 = xn * xn + yn * yn;
            double f = 1.0 + intr.k1 * r2;
            xn = xd / f;
            yn = yd / f;
        }
    }
    Eigen::Vector3d dir_world = pose.R.transpose() * Eigen::Vector3d(xn, yn, 1.0);
    Eigen::Vector3d origin = -pose.R.transpose() * pose.t;
    if (std::abs(dir_world.z()) < 1e-12)
        raise(ErrorCode::DegenerateConfiguration, "ray parallel to the desk plane");
    double t = -origin.z() / dir_world.z();
    Eigen::Vector3d p = origin + t * dir_world;
    return {p.x(), p.y()};
}

namespace {

struct Normalization {
    Eigen::Matrix3d T;
};

Normalization normalize_points(std::vector<Vec2>& pts) {
    Vec2 centroid{0, 0};
    for (const auto& p : pts) centroid += p;
    centroid = centroid * (1.0 / static_cast<double>(pts.size()));
    double mean_dist = 0.0;
    for (const auto& p : pts) mean_dist += distance(p, centroid);
    mean_dist /= static_cast<double>(pts.size());
    double scale = mean_dist > 1e-12 ? std::sqrt(2.0) / mean_dist : 1.0;
    for (auto& p : pts) p = (p - centroid) * scale;

    Normalization n;
    n.T << scale, 0, -scale * centroid.x, 0, scale, -scale * centroid.y, 0, 0, 1;
    return n;
}

bool three_collinear(std::span<const std::pair<Vec2, Vec2>> pairs) {
    size_t n = pairs.size();
    if (n < 3) return true;
    int non_collinear = 0;
    for (size_t i = 0; i + 2 < n && !non_collinear; ++i)
        for (size_t j = i + 1; j + 1 < n && !non_collinear; ++j)
            for (size_t k = j + 1; k < n; ++k) {
                Vec2 a = pairs[i].first, b = pairs[j].first, c = pairs[k].first;
                double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
                if (std::abs(cross) > 1e-9) {
                    non_collinear = 1;
                    break;
                }
            }
    return !non_collinear;
}

} // namespace

Homography estimate_homography(std::span<const std::pair<Vec2, Vec2>> pairs) {
    if (pairs.size() < 4) raise(ErrorCode::DegeneratePoints, "need at least 4 correspondences");
    if (three_collinear(pairs)) raise(ErrorCode::DegeneratePoints, "source points are collinear");

    std::vector<Vec2> src, dst;
    src.reserve(pairs.size());
    dst.reserve(pairs.size());
    for (const auto& [a, b] : pairs) {
        src.push_back(a);
        dst.push_back(b);
    }
    // Hartley normalization for conditioning.
    Normalization ns = normalize_points(src);
    Normalization nd = normalize_points(dst);

    Eigen::MatrixXd A(2 * pairs.size(), 9);
    for (size_t i = 0; i < pairs.size(); ++i) {
        double x = src[i].x, y = src[i].y;
        double u = dst[i].x, v = dst[i].y;
        A.row(2 * i) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
        A.row(2 * i + 1) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    Eigen::VectorXd h = svd.matrixV().col(8);
    Eigen::Matrix3d Hn;
    Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);

    Homography out;
    out.H = nd.T.inverse() * Hn * ns.T;
    if (std::abs(out.H.determinant()) < 1e-12)
        raise(ErrorCode::DegeneratePoints, "homography is singular");
    if (std::abs(out.H(2, 2)) > 1e-12) out.H /= out.H(2, 2);
    return out;
}

namespace {

// Zhang's constraint row v_ij over the absolute conic image B.
Eigen::Matrix<double, 6, 1> zhang_v(const Eigen::Matrix3d& H, int i, int j) {
    Eigen::Vector3d hi = H.col(i), hj = H.col(j);
    Eigen::Matrix<double, 6, 1> v;
    v << hi(0) * hj(0), hi(0) * hj(1) + hi(1) * hj(0), hi(1) * hj(1),
        hi(2) * hj(0) + hi(0) * hj(2), hi(2) * hj(1) + hi(1) * hj(2), hi(2) * hj(2);
    return v;
}

struct ViewExtrinsic {
    Eigen::Vector3d rvec;
    Eigen::Vector3d t;
};

Eigen::Vector3d rodrigues_from_R(const Eigen::Matrix3d& R) {
    Eigen::AngleAxisd aa(R);
    return aa.axis() * aa.angle();
}

double reprojection_rms(const std::vector<ChessboardView>& views, const CameraIntrinsics& intr,
                        const std::vector<ViewExtrinsic>& ext, double* mean_out) {
    double sum_sq = 0.0, sum = 0.0;
    size_t n = 0;
    for (size_t v = 0; v < views.size(); ++v) {
        CameraPose pose = pose_from_rodrigues(ext[v].rvec, ext[v].t);
        for (const auto& [world, px] : views[v].correspondences) {
            Vec2 proj = project(intr, pose, Eigen::Vector3d(world.x, world.y, 0.0));
            double e = distance(proj, px);
            sum_sq += e * e;
            sum += e;
            ++n;
        }
    }
    if (mean_out) *mean_out = n ? sum / static_cast<double>(n) : 0.0;
    return n ? std::sqrt(sum_sq / static_cast<double>(n)) : 0.0;
}

} // namespace

CalibrationResult calibrate(const std::vector<ChessboardView>& views, const CalibrationOptions& opts) {
    if (views.size() < 3)
        raise(ErrorCode::InsufficientViews,
              "the 5-parameter model needs at least 3 views, got " + std::to_string(views.size()));

    std::vector<Eigen::Matrix3d> homographies;
    for (const auto& view : views) {
        if (view.correspondences.size() < 4)
            raise(ErrorCode::InsufficientViews, "a view has fewer than 4 correspondences");
        homographies.push_back(estimate_homography(view.correspondences).H);
    }

    Eigen::MatrixXd V(2 * views.size(), 6);
    for (size_t i = 0; i < homographies.size(); ++i) {
        V.row(2 * i) = zhang_v(homographies[i], 0, 1).transpose();
        V.row(2 * i + 1) =
            (zhang_v(homographies[i], 0, 0) - zhang_v(homographies[i], 1, 1)).transpose();
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(V, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    // Views related by pure translation leave the system rank-deficient.
    if (sv(4) < 1e-9 * sv(0))
        raise(ErrorCode::DegenerateConfiguration, "views do not constrain the intrinsics");
    Eigen::VectorXd b = svd.matrixV().col(5);

    double B11 = b(0), B12 = b(1), B22 = b(2), B13 = b(3), B23 = b(4), B33 = b(5);
    double denom = B11 * B22 - B12 * B12;
    if (std::abs(denom) < 1e-20 || std::abs(B11) < 1e-20)
        raise(ErrorCode::DegenerateConfiguration, "conic estimate is degenerate");

    double v0 = (B12 * B13 - B11 * B23) / denom;
    double lambda = B33 - (B13 * B13 + v0 * (B12 * B13 - B11 * B23)) / B11;
    double fx2 = lambda / B11;
    double fy2 = lambda * B11 / denom;
    if (fx2 <= 0 || fy2 <= 0)
        raise(ErrorCode::DegenerateConfiguration, "negative focal length estimate");

    CameraIntrinsics intr;
    intr.fx = std::sqrt(fx2);
    intr.fy = std::sqrt(fy2);
    intr.s = -B12 * fx2 * intr.fy / lambda;
    intr.cy = v0;
    intr.cx = intr.s * v0 / intr.fy - B13 * fx2 / lambda;
    intr.k1 = 0.0;

    // Per-view extrinsics from the homographies.
    Eigen::Matrix3d K;
    K << intr.fx, intr.s, intr.cx, 0, intr.fy, intr.cy, 0, 0, 1;
    Eigen::Matrix3d Kinv = K.inverse();
    std::vector<ViewExtrinsic> ext;
    for (const auto& H : homographies) {
        Eigen::Vector3d h1 = H.col(0), h2 = H.col(1), h3 = H.col(2);
        double scale = 1.0 / (Kinv * h1).norm();
        Eigen::Vector3d r1 = scale * (Kinv * h1);
        Eigen::Vector3d r2 = scale * (Kinv * h2);
        Eigen::Vector3d t = scale * (Kinv * h3);
        if (t.z() < 0) { // plane must sit in front of the camera
            r1 = -r1;
            r2 = -r2;
            t = -t;
        }
        Eigen::Matrix3d Q;
        Q.col(0) = r1;
        Q.col(1) = r2;
        Q.col(2) = r1.cross(r2);
        // Closest rotation matrix.
        Eigen::JacobiSVD<Eigen::Matrix3d> rsvd(Q, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::Matrix3d R = rsvd.matrixU() * rsvd.matrixV().transpose();
        if (R.determinant() < 0) {
            Eigen::Matrix3d U = rsvd.matrixU();
            U.col(2) *= -1;
            R = U * rsvd.matrixV().transpose();
        }
        ext.push_back({rodrigues_from_R(R), t});
    }

    CalibrationResult result;
    result.intrinsics = intr;

    if (opts.refine) {
        // Gauss-Newton over [fx fy s cx cy | rvec t per view] with a numeric
        // Jacobian; the problems are tiny so forward differences suffice.
        const size_t nv = views.size();
        const size_t np = 5 + 6 * nv;
        size_t nres = 0;
        for (const auto& v : views) nres += 2 * v.correspondences.size();

        auto pack = [&](Eigen::VectorXd& p) {
            p[0] = intr.fx;
            p[1] = intr.fy;
            p[2] = intr.s;
            p[3] = intr.cx;
            p[4] = intr.cy;
            for (size_t v = 0; v < nv; ++v) {
                p.segment<3>(5 + 6 * v) = ext[v].rvec;
                p.segment<3>(5 + 6 * v + 3) = ext[v].t;
            }
        };
        auto residuals = [&](const Eigen::VectorXd& p, Eigen::VectorXd& r) {
            CameraIntrinsics ci{p[0], p[1], p[3], p[4], p[2], 0.0};
            size_t row = 0;
            for (size_t v = 0; v < nv; ++v) {
                CameraPose pose =
                    pose_from_rodrigues(p.segment<3>(5 + 6 * v), p.segment<3>(5 + 6 * v + 3));
                for (const auto& [world, px] : views[v].correspondences) {
                    Vec2 proj = project(ci, pose, Eigen::Vector3d(world.x, world.y, 0.0));
                    r[row++] = proj.x - px.x;
                    r[row++] = proj.y - px.y;
                }
            }
        };

        Eigen::VectorXd p(np), r(nres), r2(nres);
        pack(p);
        residuals(p, r);
        int iter = 0;
        for (; iter < opts.max_iterations; ++iter) {
            Eigen::MatrixXd J(nres, np);
            for (size_t k = 0; k < np; ++k) {
                double h = std::max(1e-7, 1e-7 * std::abs(p[k]));
                Eigen::VectorXd pk = p;
                pk[k] += h;
                residuals(pk, r2);
                J.col(k) = (r2 - r) / h;
            }
            Eigen::VectorXd step =
                J.colPivHouseholderQr().solve(-r);
            p += step;
            residuals(p, r);
            if (step.norm() < opts.step_tolerance) break;
        }
        result.iterations = iter;
        intr = CameraIntrinsics{p[0], p[1], p[3], p[4], p[2], 0.0};
        for (size_t v = 0; v < nv; ++v) {
            ext[v].rvec = p.segment<3>(5 + 6 * v);
            ext[v].t = p.segment<3>(5 + 6 * v + 3);
        }
        result.intrinsics = intr;
    }

    double mean_err = 0.0;
    reprojection_rms(views, result.intrinsics, ext, &mean_err);
    result.mean_reprojection_error_px = mean_err;
    return result;
}

Image rectify_screen(const Image& photo, const ScreenQuad& quad, int out_w, int out_h,
                     uint8_t background) {
    for (const auto& c : quad.corners) {
        if (c.x < -0.5 || c.y < -0.5 || c.x > photo.width - 0.5 || c.y > photo.height - 0.5)
            raise(ErrorCode::QuadOutOfBounds, "screen quad leaves the photo");
    }
    std::array<std::pair<Vec2, Vec2>, 4> pairs = {{
        {{0.0, 0.0}, quad.corners[0]},
        {{static_cast<double>(out_w), 0.0}, quad.corners[1]},
        {{static_cast<double>(out_w), static_cast<double>(out_h)}, quad.corners[2]},
        {{0.0, static_cast<double>(out_h)}, quad.corners[3]},
    }};
    Homography to_photo = estimate_homography(pairs);

    Image out = Image::make(out_w, out_h, photo.channels, background);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            Vec2 src = to_photo.apply({x + 0.5, y + 0.5});
            bool inside = false;
            for (int c = 0; c < photo.channels; ++c) {
                double v = photo.bilinear(src.x - 0.5, src.y - 0.5, c, inside);
                if (inside)
                    out.at(x, y, c) = static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
            }
        }
    }
    return out;
}

DeflectionScale measure_deflection(const std::array<Vec2, 4>& corners, double physical_width_mm) {
    Vec2 top = corners[1] - corners[0];
    Vec2 bottom = corners[2] - corners[3];
    double top_len = top.norm(), bottom_len = bottom.norm();
    if (top_len < 1e-9 || bottom_len < 1e-9)
        raise(ErrorCode::DegenerateQuad, "zero-length screen edge");

    DeflectionScale out;
    out.angle_rad = 0.5 * (std::atan2(top.y, top.x) + std::atan2(bottom.y, bottom.x));
    out.scale_mm_per_px = physical_width_mm / (0.5 * (top_len + bottom_len));
    return out;
}

} // namespace robotest::camera
