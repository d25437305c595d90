#include "robotest/compat.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "robotest/error.hpp"

namespace fs = std::filesystem;

namespace robotest::compat {

namespace {

void check_comparable(const Image& a, const Image& b) {
    if (a.empty() || b.empty()) raise(ErrorCode::EmptyImage, "similarity of an empty image");
}

std::pair<Image, Image> equalize(const Image& a, const Image& b) {
    Image ga = a.to_gray(), gb = b.to_gray();
    if (ga.width == gb.width && ga.height == gb.height) return {std::move(ga), std::move(gb)};
    // Resample the smaller up to match.
    int w = std::max(ga.width, gb.width), h = std::max(ga.height, gb.height);
    if (ga.width != w || ga.height != h) ga = resize_bilinear(ga, w, h);
    if (gb.width != w || gb.height != h) gb = resize_bilinear(gb, w, h);
    return {std::move(ga), std::move(gb)};
}

} // namespace

double BlockStructuralMetric::compare(const Image& a_in, const Image& b_in) const {
    check_comparable(a_in, b_in);
    auto [a, b] = equalize(a_in, b_in);

    constexpr double C1 = 6.5025;  // (0.01 * 255)^2
    constexpr double C2 = 58.5225; // (0.03 * 255)^2
    double total = 0.0;
    int blocks = 0;
    for (int by = 0; by < a.height; by += block_) {
        for (int bx = 0; bx < a.width; bx += block_) {
            int w = std::min(block_, a.width - bx);
            int h = std::min(block_, a.height - by);
            double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
            int n = w * h;
            for (int y = by; y < by + h; ++y)
                for (int x = bx; x < bx + w; ++x) {
                    double va = a.at(x, y), vb = b.at(x, y);
                    sa += va;
                    sb += vb;
                    saa += va * va;
                    sbb += vb * vb;
                    sab += va * vb;
                }
            double ma = sa / n, mb = sb / n;
            double var_a = saa / n - ma * ma;
            double var_b = sbb / n - mb * mb;
            double cov = sab / n - ma * mb;
            double ssim = ((2 * ma * mb + C1) * (2 * cov + C2)) /
                          ((ma * ma + mb * mb + C1) * (var_a + var_b + C2));
            total += ssim;
            ++blocks;
        }
    }
    if (!blocks) return 0.0;
    return std::clamp(total / blocks, 0.0, 1.0);
}

namespace {

struct Keypoint {
    int x = 0, y = 0;
};

std::vector<Keypoint> detect_corners(const Image& img, int max_points) {
    // Gradient-energy local maxima on a coarse grid.
    std::vector<std::pair<double, Keypoint>> scored;
    for (int y = 4; y < img.height - 4; y += 4) {
        for (int x = 4; x < img.width - 4; x += 4) {
            double gx = img.at(x + 1, y) - img.at(x - 1, y);
            double gy = img.at(x, y + 1) - img.at(x, y - 1);
            double gxy1 = img.at(x + 1, y + 1) - img.at(x - 1, y - 1);
            double score = gx * gx + gy * gy + 0.5 * gxy1 * gxy1;
            if (score > 400.0) scored.push_back({score, {x, y}});
        }
    }
    std::sort(scored.begin(), scored.end(), [](const auto& l, const auto& r) {
        if (l.first != r.first) return l.first > r.first;
        return std::tie(l.second.y, l.second.x) < std::tie(r.second.y, r.second.x);
    });
    std::vector<Keypoint> out;
    for (const auto& [score, kp] : scored) {
        bool crowded = false;
        for (const auto& existing : out)
            if (std::abs(existing.x - kp.x) < 8 && std::abs(existing.y - kp.y) < 8) {
                crowded = true;
                break;
            }
        if (!crowded) out.push_back(kp);
        if (static_cast<int>(out.size()) >= max_points) break;
    }
    return out;
}

double patch_ncc(const Image& a, const Keypoint& pa, const Image& b, const Keypoint& pb) {
    constexpr int R = 4;
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    int n = (2 * R + 1) * (2 * R + 1);
    for (int dy = -R; dy <= R; ++dy)
        for (int dx = -R; dx <= R; ++dx) {
            double va = a.at(std::clamp(pa.x + dx, 0, a.width - 1),
                             std::clamp(pa.y + dy, 0, a.height - 1));
            double vb = b.at(std::clamp(pb.x + dx, 0, b.width - 1),
                             std::clamp(pb.y + dy, 0, b.height - 1));
            sa += va;
            sb += vb;
            saa += va * va;
            sbb += vb * vb;
            sab += va * vb;
        }
    double ma = sa / n, mb = sb / n;
    double da = saa / n - ma * ma, db = sbb / n - mb * mb;
    if (da <= 1e-9 || db <= 1e-9) return 0.0;
    return (sab / n - ma * mb) / std::sqrt(da * db);
}

} // namespace

double KeypointMatchMetric::compare(const Image& a_in, const Image& b_in) const {
    check_comparable(a_in, b_in);
    auto [a, b] = equalize(a_in, b_in);
    auto ka = detect_corners(a, 200);
    auto kb = detect_corners(b, 200);
    if (ka.empty() && kb.empty()) return 1.0;
    if (ka.empty() || kb.empty()) return 0.0;

    auto match_fraction = [](const Image& from, const std::vector<Keypoint>& kf, const Image& to,
                             const std::vector<Keypoint>& kt) {
        int matched = 0;
        for (const auto& p : kf) {
            double best = -1.0;
            for (const auto& q : kt) {
                if (std::abs(p.x - q.x) > 24 || std::abs(p.y - q.y) > 24) continue;
                best = std::max(best, patch_ncc(from, p, to, q));
            }
            if (best > 0.8) ++matched;
        }
        return static_cast<double>(matched) / static_cast<double>(kf.size());
    };
    return 0.5 * (match_fraction(a, ka, b, kb) + match_fraction(b, kb, a, ka));
}

const SimilarityMetric& SimilarityMetric::default_metric() {
    static const BlockStructuralMetric metric;
    return metric;
}

std::unique_ptr<SimilarityMetric> SimilarityMetric::create(const std::string& id) {
    if (id == "block" || id.empty()) return std::make_unique<BlockStructuralMetric>();
    if (id == "keypoint") return std::make_unique<KeypointMatchMetric>();
    raise(ErrorCode::ConfigError, "unknown similarity metric '" + id + "'");
}

SimilarityScore gui_similarity(const Image& a, const Image& b, const SimilarityMetric& metric) {
    return {metric.compare(a, b), metric.id()};
}

const char* operation_class_name(OperationClass c) {
    switch (c) {
        case OperationClass::NormalProgress: return "normal_progress";
        case OperationClass::NormalNoProgress: return "normal_no_progress";
        case OperationClass::CompatibilityBug: return "compatibility_bug";
    }
    return "?";
}

OperationClass classify_operation(const Image& before_a, const Image& after_a,
                                  const Image& before_b, const Image& after_b, double threshold,
                                  const SimilarityMetric& metric) {
    bool responded_a = metric.compare(before_a, after_a) < threshold;
    bool responded_b = metric.compare(before_b, after_b) < threshold;
    if (responded_a && responded_b) return OperationClass::NormalProgress;
    if (!responded_a && !responded_b) return OperationClass::NormalNoProgress;
    return OperationClass::CompatibilityBug;
}

std::string BugReport::dedup_key() const {
    return app + "|" + screen + "|" + widget + "|" + kinematics::gesture_name(gesture) + "|" +
           (kind == Kind::Crash ? "crash" : "compat");
}

namespace {

Image rectified_view(const simbench::AppSession& session, const explorer::ExploreOptions& eopts,
                     const camera::ScreenQuad& quad, uint64_t photo_seed) {
    auto shot = session.photograph(eopts.rig_truth, eopts.perception.scene, photo_seed);
    return camera::rectify_screen(shot.photo, quad, quad.rect_w, quad.rect_h);
}

std::string sanitize(const std::string& s) {
    std::string out;
    for (char c : s) out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    return out;
}

} // namespace

ComparisonResult run_comparison_session(const simbench::AppModel& app,
                                        const simbench::DeviceProfile& device_under_test,
                                        const simbench::DeviceProfile& reference,
                                        const ComparisonOptions& opts) {
    if (device_under_test.screen_w_mm != reference.screen_w_mm ||
        device_under_test.screen_h_mm != reference.screen_h_mm ||
        device_under_test.res_x != reference.res_x || device_under_test.res_y != reference.res_y)
        raise(ErrorCode::ProfileMismatch,
              "comparison devices must share screen size and resolution");

    auto metric = SimilarityMetric::create(opts.metric_id);
    simbench::AppSession session_a(app, device_under_test);
    simbench::AppSession session_b(app, reference);

    explorer::ExplorationDriver driver(session_a, opts.explore);
    const auto& pcfg = opts.explore.perception;

    if (!opts.evidence_dir.empty()) fs::create_directories(opts.evidence_dir);

    ComparisonResult result;
    std::set<std::string> seen_keys;
    std::optional<camera::ScreenQuad> quad_b;

    while (!driver.done()) {
        int step = driver.step_index();
        auto outcome = driver.step();
        if (!outcome.acted) continue; // failed perception: nothing to duplicate

        // Reference-device view before the replay.
        uint64_t seed_b_before = Rng::mix(opts.explore.strategy.seed, 0x2000 + step);
        auto shot_b = session_b.photograph(opts.explore.rig_truth, pcfg.scene, seed_b_before);
        if (!quad_b) {
            explorer::Perception pb = explorer::perceive(shot_b.photo, reference.screen_w_mm,
                                                         reference.screen_h_mm, pcfg);
            quad_b = pb.quad;
        }
        Image before_b = camera::rectify_screen(shot_b.photo, *quad_b, quad_b->rect_w, quad_b->rect_h);

        if (session_b.current_screen() != outcome.record.screen_before)
            raise(ErrorCode::MismatchedScreens,
                  "reference device out of sync before the duplicated operation");

        auto resp_b = session_b.apply(outcome.device_gesture);

        ++result.steps_compared;

        if (outcome.record.response == 'c') {
            // Crash bookkeeping comes from the session, not image comparison.
            BugReport report;
            report.kind = BugReport::Kind::Crash;
            report.app = app.name;
            report.screen = outcome.record.screen_before;
            report.widget = outcome.record.model_widget_id;
            report.gesture = outcome.record.gesture;
            report.first_step = step;
            if (seen_keys.insert(report.dedup_key()).second) result.reports.push_back(report);
            session_b.reset(); // the driver already reset the device under test
            continue;
        }
        if (resp_b.kind == simbench::Response::Kind::Crash) session_b.reset();

        Image after_a = rectified_view(session_a, opts.explore, outcome.perception.quad,
                                       Rng::mix(opts.explore.strategy.seed, 0x3000 + step));
        Image after_b = rectified_view(session_b, opts.explore, *quad_b,
                                       Rng::mix(opts.explore.strategy.seed, 0x4000 + step));

        double sim_a = metric->compare(outcome.perception.rectified, after_a);
        double sim_b = metric->compare(before_b, after_b);
        bool responded_a = sim_a < opts.response_threshold;
        bool responded_b = sim_b < opts.response_threshold;

        if (responded_a != responded_b) {
            BugReport report;
            report.kind = BugReport::Kind::Compatibility;
            report.app = app.name;
            report.screen = outcome.record.screen_before;
            report.widget = outcome.record.model_widget_id;
            report.gesture = outcome.record.gesture;
            report.first_step = step;
            report.similarity_a = sim_a;
            report.similarity_b = sim_b;
            if (seen_keys.insert(report.dedup_key()).second) {
                if (!opts.evidence_dir.empty()) {
                    std::string stem = sanitize(app.name) + "__" + sanitize(report.screen) + "__" +
                                       sanitize(report.widget) + "__" +
                                       kinematics::gesture_name(report.gesture);
                    const Image* imgs[4] = {&outcome.perception.rectified, &after_a, &before_b,
                                            &after_b};
                    const char* tags[4] = {"dut_before", "dut_after", "ref_before", "ref_after"};
                    for (int i = 0; i < 4; ++i) {
                        std::string rel = stem + "__" + tags[i] + ".png";
                        save_png(*imgs[i], (fs::path(opts.evidence_dir) / rel).string());
                        report.evidence[i] = rel;
                    }
                }
                result.reports.push_back(report);
            }
        }

        // Lockstep resync so later comparisons stay meaningful.
        if (session_b.current_screen() != session_a.current_screen())
            session_b.set_screen(session_a.current_screen());
    }

    result.metrics = driver.metrics();
    return result;
}

} // namespace robotest::compat
