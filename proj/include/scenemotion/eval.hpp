#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scenemotion/motion.hpp"
#include "scenemotion/scene.hpp"

namespace scenemotion {

// ---------------------------------------------------------------------------
// Body proxy: one sphere per joint standing in for mesh vertices.

struct BodyProxy {
    std::array<double, Skeleton::kNumJoints> radius{};
    static BodyProxy standard();
};

// Deterministic Fibonacci directions used to sample the proxy spheres.
std::vector<Vec3> sphere_directions(int count);

struct PenetrationMetrics {
    double pct = 0.0;     // penetrating samples / total samples
    double mean_m = 0.0;  // average depth over all samples and frames, meters
    double max_m = 0.0;   // maximum depth in any frame
};

PenetrationMetrics penetration_metrics(const FrameMatrix& motion, const SceneModel& scene,
                                       const BodyProxy& proxy, int samples_per_joint = 64);

// ---------------------------------------------------------------------------
// Foot sliding: horizontal displacement weighted by contact proximity
// w = clamp(2 - 2^(h/H), 0, 1), summed over feet and averaged per second.
// Returned in cm/s. Heights are measured from each foot joint's rest
// clearance above the floor.

double foot_slide_weight(double height_above_contact, double contact_height);
double foot_sliding(const FrameMatrix& motion, double floor_height,
                    double contact_height = 0.025);

// ---------------------------------------------------------------------------
// Distribution metrics over featurized clips.

struct FeaturizedClip {
    Eigen::VectorXd features;
    std::string text;
};

struct DistributionMetrics {
    double fid = 0.0;
    double diversity = 0.0;
    double multimodality = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

double frechet_distance(const std::vector<Eigen::VectorXd>& a,
                        const std::vector<Eigen::VectorXd>& b);

DistributionMetrics distribution_metrics(const std::vector<FeaturizedClip>& generated,
                                         const std::vector<FeaturizedClip>& reference, int knn_k);

// ---------------------------------------------------------------------------
// Reaching metrics for grasp episodes.

struct ReachingOutcome {
    double error_dist = 0.0;  // final index finger to goal, meters
    double time_used = 0.0;   // seconds to get within the threshold
    bool finished = false;    // crossed the threshold before the cap
};

// `index_positions` is the per-frame world track of the acting index finger.
ReachingOutcome reaching_outcome(const std::vector<Vec3>& index_positions, const Vec3& goal,
                                 double threshold_m, double cap_s, int fps = kFps);

// ---------------------------------------------------------------------------
// Aggregates with bootstrap confidence intervals.

struct MetricSummary {
    double mean = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    int n = 0;
};

MetricSummary summarize(const std::vector<double>& values, int bootstrap, std::uint64_t seed);

}  // namespace scenemotion
