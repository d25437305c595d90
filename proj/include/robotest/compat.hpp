#pragma once

#include <memory>
#include <string>
#include <vector>

#include "robotest/explorer.hpp"
#include "robotest/image.hpp"
#include "robotest/simbench.hpp"

namespace robotest::compat {

struct SimilarityScore {
    double value = 0.0; // [0, 1], 1 on identical images
    std::string metric_id;
};

// Pluggable GUI image comparison. The block-structural metric is the default;
// a keypoint-match metric sits behind the same interface.
class SimilarityMetric {
public:
    virtual ~SimilarityMetric() = default;
    virtual double compare(const Image& a, const Image& b) const = 0;
    virtual std::string id() const = 0;

    static const SimilarityMetric& default_metric();
    static std::unique_ptr<SimilarityMetric> create(const std::string& id);
};

class BlockStructuralMetric : public SimilarityMetric {
public:
    explicit BlockStructuralMetric(int block = 16) : block_(block) {}
    double compare(const Image& a, const Image& b) const override;
    std::string id() const override { return "block"; }

private:
    int block_;
};

class KeypointMatchMetric : public SimilarityMetric {
public:
    double compare(const Image& a, const Image& b) const override;
    std::string id() const override { return "keypoint"; }
};

SimilarityScore gui_similarity(const Image& a, const Image& b,
                               const SimilarityMetric& metric = SimilarityMetric::default_metric());

enum class OperationClass { NormalProgress, NormalNoProgress, CompatibilityBug };

const char* operation_class_name(OperationClass c);

// The three-case comparison: responded(X) := similarity(before_X, after_X)
// below the threshold. A = device under test, B = reference device.
OperationClass classify_operation(const Image& before_a, const Image& after_a,
                                  const Image& before_b, const Image& after_b, double threshold,
                                  const SimilarityMetric& metric = SimilarityMetric::default_metric());

struct BugReport {
    enum class Kind { Crash, Compatibility };
    Kind kind = Kind::Compatibility;
    std::string app;
    std::string screen;
    std::string widget;
    kinematics::GestureKind gesture = kinematics::GestureKind::Click;
    int first_step = 0;
    double similarity_a = 1.0;
    double similarity_b = 1.0;
    // Evidence: before/after on the device under test, then the reference.
    std::array<std::string, 4> evidence{};

    std::string dedup_key() const;
};

struct ComparisonOptions {
    explorer::ExploreOptions explore;
    double response_threshold = 0.9;
    std::string metric_id = "block";
    std::string evidence_dir; // empty disables evidence PNGs
};

struct ComparisonResult {
    std::vector<BugReport> reports;
    explorer::ExplorationMetrics metrics; // exploration on the device under test
    int steps_compared = 0;
};

// Drives exploration on the irregular device and replays each operation at
// identical screen coordinates on the reference device, classifying per step.
ComparisonResult run_comparison_session(const simbench::AppModel& app,
                                        const simbench::DeviceProfile& device_under_test,
                                        const simbench::DeviceProfile& reference,
                                        const ComparisonOptions& opts);

} // namespace robotest::compat
