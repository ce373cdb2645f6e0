#include "scenemotion/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

#include <Eigen/Eigenvalues>

#include "scenemotion/rng.hpp"

namespace scenemotion {

// ---------------------------------------------------------------------------

BodyProxy BodyProxy::standard() {
    BodyProxy p;
    const auto& sk = Skeleton::instance();
    for (int j = 0; j < Skeleton::kNumJoints; ++j) p.radius[j] = 0.05;  // limbs
    for (int j : {0, 1, 2, 3, 6, 9, 13, 14}) p.radius[j] = 0.12;       // pelvis + torso
    for (int j : {12, 15, 26, 27}) p.radius[j] = 0.04;                 // neck + head
    for (int j : sk.left_hand) p.radius[j] = 0.04;
    for (int j : sk.right_hand) p.radius[j] = 0.04;
    return p;
}

std::vector<Vec3> sphere_directions(int count) {
    std::vector<Vec3> dirs;
    dirs.reserve(count);
    const double golden = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
        const double z = 1.0 - 2.0 * (i + 0.5) / count;
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double a = golden * i;
        dirs.emplace_back(r * std::cos(a), r * std::sin(a), z);
    }
    return dirs;
}

PenetrationMetrics penetration_metrics(const FrameMatrix& motion, const SceneModel& scene,
                                       const BodyProxy& proxy, int samples_per_joint) {
    if (motion.rows() == 0) throw std::runtime_error("penetration_metrics: empty motion");
    const auto dirs = sphere_directions(samples_per_joint);
    const int frames = static_cast<int>(motion.rows());

    std::vector<double> frame_sum(frames, 0.0);
    std::vector<double> frame_max(frames, 0.0);
    std::vector<std::int64_t> frame_hits(frames, 0);

#pragma omp parallel for schedule(static)
    for (int f = 0; f < frames; ++f) {
        std::vector<Vec3> pts;
        pts.reserve(Skeleton::kNumJoints * dirs.size());
        for (int j = 0; j < Skeleton::kNumJoints; ++j) {
            const Vec3 c(motion(f, j * 3), motion(f, j * 3 + 1), motion(f, j * 3 + 2));
            for (const auto& d : dirs) pts.push_back(c + proxy.radius[j] * d);
        }
        const auto depths = penetration_depths_serial(pts, scene);
        for (double d : depths) {
            frame_sum[f] += d;
            frame_max[f] = std::max(frame_max[f], d);
            frame_hits[f] += d > 0.0;
        }
    }

    PenetrationMetrics m;
    const std::int64_t total =
        static_cast<std::int64_t>(frames) * Skeleton::kNumJoints * samples_per_joint;
    std::int64_t hits = 0;
    double sum = 0.0;
    for (int f = 0; f < frames; ++f) {
        hits += frame_hits[f];
        sum += frame_sum[f];
        m.max_m = std::max(m.max_m, frame_max[f]);
    }
    m.pct = static_cast<double>(hits) / static_cast<double>(total);
    m.mean_m = sum / static_cast<double>(total);
    return m;
}

// ---------------------------------------------------------------------------

double foot_slide_weight(double height_above_contact, double contact_height) {
    const double h = std::max(0.0, height_above_contact);
    return std::clamp(2.0 - std::pow(2.0, h / contact_height), 0.0, 1.0);
}

double foot_sliding(const FrameMatrix& motion, double floor_height, double contact_height) {
    const auto& sk = Skeleton::instance();
    const int frames = static_cast<int>(motion.rows());
    if (frames < 2) return 0.0;

    const int feet[2] = {sk.left_foot, sk.right_foot};
    double total = 0.0;
    for (int f = 1; f < frames; ++f) {
        for (int j : feet) {
            const double dx = motion(f, j * 3) - motion(f - 1, j * 3);
            const double dy = motion(f, j * 3 + 1) - motion(f - 1, j * 3 + 1);
            const double d = std::hypot(dx, dy);
            const double clearance = sk.rest_offsets[j].z();
            const double h = motion(f, j * 3 + 2) - floor_height - clearance;
            total += d * foot_slide_weight(h, contact_height);
        }
    }
    const double seconds = static_cast<double>(frames) / kFps;
    return 100.0 * total / seconds;  // cm/s
}

// ---------------------------------------------------------------------------
// FID

namespace {

Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
    Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

void gaussian_fit(const std::vector<Eigen::VectorXd>& x, Eigen::VectorXd* mean,
                  Eigen::MatrixXd* cov) {
    const int n = static_cast<int>(x.size());
    const int d = static_cast<int>(x[0].size());
    *mean = Eigen::VectorXd::Zero(d);
    for (const auto& v : x) *mean += v;
    *mean /= n;
    *cov = Eigen::MatrixXd::Zero(d, d);
    for (const auto& v : x) {
        const Eigen::VectorXd c = v - *mean;
        *cov += c * c.transpose();
    }
    *cov /= std::max(1, n - 1);
}

double mean_pairwise_distance(const std::vector<const Eigen::VectorXd*>& x) {
    const int n = static_cast<int>(x.size());
    if (n < 2) throw std::runtime_error("distribution metrics: need at least 2 samples per group");
    double sum = 0.0;
    std::int64_t pairs = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            sum += (*x[i] - *x[j]).norm();
            ++pairs;
        }
    return sum / pairs;
}

}  // namespace

double frechet_distance(const std::vector<Eigen::VectorXd>& a,
                        const std::vector<Eigen::VectorXd>& b) {
    if (a.size() < 2 || b.size() < 2)
        throw std::runtime_error("frechet_distance: need at least 2 samples per set");
    Eigen::VectorXd mu_a, mu_b;
    Eigen::MatrixXd cov_a, cov_b;
    gaussian_fit(a, &mu_a, &cov_a);
    gaussian_fit(b, &mu_b, &cov_b);

    const Eigen::MatrixXd root_a = sqrt_psd(cov_a);
    const Eigen::MatrixXd inner = root_a * cov_b * root_a;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()));
    const double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();

    const double d2 = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
    return std::max(0.0, d2);
}

DistributionMetrics distribution_metrics(const std::vector<FeaturizedClip>& generated,
                                         const std::vector<FeaturizedClip>& reference,
                                         int knn_k) {
    if (generated.size() < 2 || reference.size() < 2)
        throw std::runtime_error("distribution_metrics: need at least 2 samples per set");

    std::vector<Eigen::VectorXd> gen, ref;
    for (const auto& c : generated) gen.push_back(c.features);
    for (const auto& c : reference) ref.push_back(c.features);

    DistributionMetrics m;
    m.fid = frechet_distance(gen, ref);

    {
        std::vector<const Eigen::VectorXd*> ptrs;
        for (const auto& v : gen) ptrs.push_back(&v);
        m.diversity = mean_pairwise_distance(ptrs);
    }

    // multimodality: mean pairwise distance within same-text groups
    {
        std::map<std::string, std::vector<const Eigen::VectorXd*>> groups;
        for (const auto& c : generated) groups[c.text].push_back(&c.features);
        double sum = 0.0;
        std::int64_t pairs = 0;
        for (const auto& [text, members] : groups) {
            const int n = static_cast<int>(members.size());
            for (int i = 0; i < n; ++i)
                for (int j = i + 1; j < n; ++j) {
                    sum += (*members[i] - *members[j]).norm();
                    ++pairs;
                }
        }
        if (pairs == 0)
            throw std::runtime_error("distribution_metrics: no text group has 2+ samples");
        m.multimodality = sum / pairs;
    }

    // k-NN manifold precision / recall
    auto knn_radii = [&](const std::vector<Eigen::VectorXd>& xs) {
        const int n = static_cast<int>(xs.size());
        const int k = std::min(knn_k, n - 1);
        std::vector<double> radii(n);
        std::vector<double> dists;
        for (int i = 0; i < n; ++i) {
            dists.clear();
            for (int j = 0; j < n; ++j)
                if (j != i) dists.push_back((xs[i] - xs[j]).norm());
            std::nth_element(dists.begin(), dists.begin() + (k - 1), dists.end());
            radii[i] = dists[k - 1];
        }
        return radii;
    };
    auto manifold_coverage = [&](const std::vector<Eigen::VectorXd>& queries,
                                 const std::vector<Eigen::VectorXd>& support,
                                 const std::vector<double>& radii) {
        int inside = 0;
        for (const auto& q : queries) {
            bool hit = false;
            for (std::size_t i = 0; i < support.size() && !hit; ++i)
                hit = (q - support[i]).norm() <= radii[i];
            inside += hit;
        }
        return static_cast<double>(inside) / queries.size();
    };
    const auto ref_radii = knn_radii(ref);
    const auto gen_radii = knn_radii(gen);
    m.precision = manifold_coverage(gen, ref, ref_radii);
    m.recall = manifold_coverage(ref, gen, gen_radii);
    m.f1 = (m.precision + m.recall) > 0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    return m;
}

// ---------------------------------------------------------------------------

ReachingOutcome reaching_outcome(const std::vector<Vec3>& index_positions, const Vec3& goal,
                                 double threshold_m, double cap_s, int fps) {
    if (index_positions.empty()) throw std::runtime_error("reaching_outcome: empty track");
    ReachingOutcome out;
    out.error_dist = (index_positions.back() - goal).norm();
    out.time_used = cap_s;
    for (std::size_t f = 0; f < index_positions.size(); ++f) {
        if ((index_positions[f] - goal).norm() <= threshold_m) {
            out.time_used = static_cast<double>(f) / fps;
            out.finished = true;
            break;
        }
    }
    return out;
}

MetricSummary summarize(const std::vector<double>& values, int bootstrap, std::uint64_t seed) {
    MetricSummary s;
    s.n = static_cast<int>(values.size());
    if (values.empty()) return s;
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / s.n;
    if (s.n == 1 || bootstrap <= 0) {
        s.ci_lo = s.ci_hi = s.mean;
        return s;
    }
    Rng rng(seed);
    std::vector<double> means(bootstrap);
    for (int b = 0; b < bootstrap; ++b) {
        double acc = 0.0;
        for (int i = 0; i < s.n; ++i) acc += values[rng.uniform_int(0, s.n - 1)];
        means[b] = acc / s.n;
    }
    std::sort(means.begin(), means.end());
    s.ci_lo = means[static_cast<int>(0.025 * (bootstrap - 1))];
    s.ci_hi = means[static_cast<int>(0.975 * (bootstrap - 1))];
    return s;
}

}  // namespace scenemotion
