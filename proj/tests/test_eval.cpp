#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "scenemotion/data.hpp"
#include "scenemotion/eval.hpp"
#include "scenemotion/featurizer.hpp"

#include "oracles.hpp"

using namespace scenemotion;

namespace {

SceneModel box_scene() {
    SceneModel s;
    s.bounds.min = Vec3(-4, -4, 0);
    s.bounds.max = Vec3(4, 4, 2.6);
    OrientedBox b;
    b.center = Vec3(0, 0, 0.5);
    b.half = Vec3(0.5, 0.5, 0.5);
    s.obstacles.push_back(b);
    return s;
}

FrameMatrix rest_motion(int frames, const Vec3& offset) {
    const auto& sk = Skeleton::instance();
    FrameMatrix m(frames, kMotionDim);
    for (int f = 0; f < frames; ++f)
        for (int j = 0; j < Skeleton::kNumJoints; ++j) {
            const Vec3 p = sk.rest_offsets[j] + offset;
            m(f, j * 3) = p.x();
            m(f, j * 3 + 1) = p.y();
            m(f, j * 3 + 2) = p.z();
        }
    return m;
}

std::vector<FeaturizedClip> gaussian_clips(Rng& rng, int n, int dim, const std::string& text,
                                           double shift = 0.0) {
    std::vector<FeaturizedClip> out;
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd f(dim);
        for (int d = 0; d < dim; ++d) f(d) = rng.gaussian() + shift;
        out.push_back({f, text});
    }
    return out;
}

}  // namespace

TEST_CASE("penetration metrics: free space is exactly zero") {
    const auto scene = box_scene();
    const auto m = penetration_metrics(rest_motion(5, Vec3(3, 3, 0)), scene,
                                       BodyProxy::standard(), 32);
    CHECK(m.pct == 0.0);
    CHECK(m.mean_m == 0.0);
    CHECK(m.max_m == 0.0);
}

TEST_CASE("penetration metrics: analytic single-sphere case") {
    // a single joint sphere centered 5 cm inside the box face, radius 5 cm:
    // the deepest sample sits 10 cm inside
    SceneModel scene = box_scene();
    FrameMatrix m = FrameMatrix::Constant(1, kMotionDim, 50.0);  // everything far away
    const auto& sk = Skeleton::instance();
    // place one limb joint (radius 0.05) just inside the +x face
    const int j = sk.left_wrist;
    m(0, j * 3) = 0.45;
    m(0, j * 3 + 1) = 0.0;
    m(0, j * 3 + 2) = 0.5;
    BodyProxy proxy = BodyProxy::standard();
    const auto pm = penetration_metrics(m, scene, proxy, 256);
    CHECK(pm.max_m == doctest::Approx(0.10).epsilon(0.02));
    CHECK(pm.pct > 0.0);
    CHECK(pm.pct < 1.0);
}

TEST_CASE("penetration metrics: agree with 10x denser sampling within 5 percent") {
    Rng rng(5);
    SceneModel scene = box_scene();
    OrientedBox b2;
    b2.center = Vec3(1.2, 0.8, 0.6);
    b2.half = Vec3(0.4, 0.3, 0.6);
    b2.yaw = 0.7;
    scene.obstacles.push_back(b2);

    // random motions overlapping the boxes
    FrameMatrix motion(20, kMotionDim);
    for (int f = 0; f < 20; ++f)
        for (int j = 0; j < Skeleton::kNumJoints; ++j) {
            motion(f, j * 3) = rng.uniform(-0.8, 1.8);
            motion(f, j * 3 + 1) = rng.uniform(-0.8, 1.2);
            motion(f, j * 3 + 2) = rng.uniform(0.1, 1.3);
        }
    const auto base = penetration_metrics(motion, scene, BodyProxy::standard(), 64);
    const auto dense = penetration_metrics(motion, scene, BodyProxy::standard(), 640);
    CHECK(base.pct > 0.0);
    CHECK(std::abs(base.pct - dense.pct) / dense.pct < 0.05);
    CHECK(std::abs(base.mean_m - dense.mean_m) / dense.mean_m < 0.05);
    CHECK(std::abs(base.max_m - dense.max_m) / dense.max_m < 0.05);
}

TEST_CASE("foot sliding: closed-form weight and metric cases") {
    CHECK(foot_slide_weight(0.0, 0.025) == 1.0);
    CHECK(foot_slide_weight(0.025, 0.025) == 0.0);   // 2 - 2^1 = 0
    CHECK(foot_slide_weight(0.5, 0.025) == 0.0);     // airborne
    CHECK(foot_slide_weight(0.0125, 0.025) == doctest::Approx(2.0 - std::sqrt(2.0)));

    // feet pinned: zero
    CHECK(foot_sliding(rest_motion(30, Vec3(0, 0, 0)), 0.0) == 0.0);

    // one foot gliding 0.1 m per frame at contact height: contribution 0.1
    const auto& sk = Skeleton::instance();
    FrameMatrix m = rest_motion(31, Vec3(0, 0, 0));
    for (int f = 0; f < 31; ++f) m(f, sk.right_foot * 3) += 0.1 * f;
    // 30 transitions * 0.1 m over 31/30 s, in cm/s
    const double fs = foot_sliding(m, 0.0);
    CHECK(fs == doctest::Approx(100.0 * 3.0 / (31.0 / 30.0)).epsilon(1e-9));

    // same glide airborne contributes nothing
    FrameMatrix a = rest_motion(31, Vec3(0, 0, 0));
    for (int f = 0; f < 31; ++f) {
        a(f, sk.right_foot * 3) += 0.1 * f;
        a(f, sk.right_foot * 3 + 2) = 0.5;
    }
    CHECK(foot_sliding(a, 0.0) == 0.0);
}

TEST_CASE("frechet distance: identity, symmetry, shift sensitivity") {
    Rng rng(7);
    const auto x = gaussian_clips(rng, 60, 16, "a");
    std::vector<Eigen::VectorXd> xf;
    for (const auto& c : x) xf.push_back(c.features);

    CHECK(frechet_distance(xf, xf) == doctest::Approx(0.0).epsilon(1e-6));

    const auto y = gaussian_clips(rng, 60, 16, "a", 3.0);
    std::vector<Eigen::VectorXd> yf;
    for (const auto& c : y) yf.push_back(c.features);
    const double dxy = frechet_distance(xf, yf);
    const double dyx = frechet_distance(yf, xf);
    CHECK(dxy > 16 * 4.0);  // mean shift alone contributes 16 * 9
    CHECK(dxy == doctest::Approx(dyx).epsilon(1e-6));
}

TEST_CASE("distribution metrics: identical sets give precision = recall = 1, FID 0") {
    Rng rng(9);
    auto set = gaussian_clips(rng, 40, 8, "walk forward");
    for (int i = 0; i < 20; ++i) set[i].text = "sit down";
    const auto m = distribution_metrics(set, set, 3);
    CHECK(m.fid == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(m.precision == 1.0);
    CHECK(m.recall == 1.0);
    CHECK(m.f1 == doctest::Approx(1.0));
    CHECK(m.diversity > 0.0);
    CHECK(m.multimodality > 0.0);
}

TEST_CASE("distribution metrics: a far shift collapses recall") {
    Rng rng(11);
    const auto ref = gaussian_clips(rng, 40, 8, "t");
    const auto gen = gaussian_clips(rng, 40, 8, "t", 50.0);
    const auto m = distribution_metrics(gen, ref, 3);
    CHECK(m.recall == doctest::Approx(0.0));
    CHECK(m.precision == doctest::Approx(0.0));
    CHECK(m.f1 == 0.0);
    CHECK(m.fid > 100.0);
}

TEST_CASE("distribution metrics: split-half FID below the bootstrap 95th percentile") {
    Rng rng(13);
    const auto all = gaussian_clips(rng, 120, 8, "t");
    std::vector<Eigen::VectorXd> a, b, pool;
    for (int i = 0; i < 120; ++i) {
        pool.push_back(all[i].features);
        (i < 60 ? a : b).push_back(all[i].features);
    }
    const double split_fid = frechet_distance(a, b);

    // bootstrap: resample two disjoint halves from the pool
    Rng brng(17);
    std::vector<double> boots;
    for (int rep = 0; rep < 60; ++rep) {
        std::vector<int> idx(120);
        std::iota(idx.begin(), idx.end(), 0);
        for (int i = 119; i > 0; --i) std::swap(idx[i], idx[brng.uniform_int(0, i)]);
        std::vector<Eigen::VectorXd> ba, bb;
        for (int i = 0; i < 60; ++i) ba.push_back(pool[idx[i]]);
        for (int i = 60; i < 120; ++i) bb.push_back(pool[idx[i]]);
        boots.push_back(frechet_distance(ba, bb));
    }
    std::sort(boots.begin(), boots.end());
    const double p95 = boots[static_cast<int>(0.95 * (boots.size() - 1))];
    CHECK(split_fid <= p95 * 1.05);
}

TEST_CASE("distribution metrics: error when a group is too small") {
    Rng rng(19);
    auto one = gaussian_clips(rng, 1, 8, "t");
    const auto ok = gaussian_clips(rng, 10, 8, "t");
    CHECK_THROWS(distribution_metrics(one, ok, 3));
    CHECK_THROWS(distribution_metrics(ok, one, 3));
}

TEST_CASE("reaching outcome: threshold crossing and cap semantics") {
    const Vec3 goal(1, 0, 1);
    std::vector<Vec3> track;
    for (int f = 0; f < 90; ++f)
        track.emplace_back(1 - std::max(0.0, 1.0 - f / 45.0), 0.0, 1.0);
    // crosses 0.20 m at |1 - x| <= 0.2 -> f/45 >= 0.8 -> frame 36
    const auto out = reaching_outcome(track, goal, 0.20, 20.0);
    CHECK(out.finished);
    CHECK(out.time_used == doctest::Approx(36.0 / 30.0));
    CHECK(out.error_dist == doctest::Approx(0.0));

    // never within threshold: flagged at the cap
    std::vector<Vec3> far(10, Vec3(5, 5, 5));
    const auto capped = reaching_outcome(far, goal, 0.20, 20.0);
    CHECK_FALSE(capped.finished);
    CHECK(capped.time_used == 20.0);

    // ends exactly on the goal
    std::vector<Vec3> hit{Vec3(0, 0, 0), goal};
    CHECK(reaching_outcome(hit, goal, 0.20, 20.0).error_dist == 0.0);
}

TEST_CASE("reaching outcome: time monotone under prefix extension") {
    const Vec3 goal(0, 0, 0);
    std::vector<Vec3> track;
    Rng rng(23);
    for (int f = 0; f < 60; ++f)
        track.emplace_back(rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2));
    track[25] = Vec3(0.1, 0, 0);  // success at frame 25
    const auto a = reaching_outcome(track, goal, 0.2, 20.0);
    track.emplace_back(5, 5, 5);
    const auto b = reaching_outcome(track, goal, 0.2, 20.0);
    CHECK(a.time_used == b.time_used);  // earlier success never lost
}

TEST_CASE("summarize: bootstrap interval brackets the mean") {
    Rng rng(29);
    std::vector<double> v;
    for (int i = 0; i < 200; ++i) v.push_back(rng.gaussian() + 5.0);
    const auto s = summarize(v, 200, 7);
    CHECK(s.mean == doctest::Approx(5.0).epsilon(0.05));
    CHECK(s.ci_lo < s.mean);
    CHECK(s.ci_hi > s.mean);
    CHECK(s.ci_hi - s.ci_lo < 1.0);
}

TEST_CASE("featurizer: trains to separate motion types on a small dataset") {
    SyntheticSceneSpec spec;
    Rng srng(31);
    const auto scene = generate_scene(spec, srng);

    std::vector<LabeledMotion> train, held;
    Rng crng(37);
    const MotionType types[3] = {MotionType::kWalkForward, MotionType::kSitDown,
                                 MotionType::kDrink};
    for (int label = 0; label < 3; ++label)
        for (int i = 0; i < 12; ++i) {
            Rng sub = crng.child(label * 100 + i);
            const auto clip = generate_clip(types[label], scene, sub);
            (i < 9 ? train : held).push_back({clip.positions, label});
        }

    FeaturizerConfig cfg;
    cfg.channels1 = 24;
    cfg.channels2 = 48;
    cfg.feature_dim = 64;
    Rng mrng(41);
    MotionFeaturizer model(cfg, 3, mrng);
    nn::Adam adam(model.params(), 1e-3);
    FeaturizerTrainOptions opts;
    opts.epochs = 10;
    opts.batch = 9;
    opts.lr = 1e-3;
    Rng trng(43);
    const auto losses = train_featurizer(model, train, opts, trng, adam);
    CHECK(losses.back() < losses.front());
    CHECK(featurizer_accuracy(model, held) >= 0.8);
    CHECK(model.features(held[0].positions).size() == 64);
}
