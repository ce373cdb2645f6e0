#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "scenemotion/scheduler.hpp"

using namespace scenemotion;

namespace {

SchedulerModelConfig tiny_config() {
    SchedulerModelConfig cfg;
    cfg.width = 32;
    cfg.layers = 1;
    cfg.heads = 2;
    cfg.text_dim = 64;
    return cfg;
}

// Separable toy task: "finished" segments hold a raised arm, unfinished ones
// keep it low.
std::vector<SchedulerExample> toy_examples(int count, Rng& rng) {
    const auto& sk = Skeleton::instance();
    std::vector<SchedulerExample> out;
    for (int i = 0; i < count; ++i) {
        const bool done = i % 2 == 0;
        SchedulerExample ex;
        ex.segment_world = MotionSegment::zeros(8);
        for (int t = 0; t < 8; ++t)
            for (int j = 0; j < Skeleton::kNumJoints; ++j) {
                Vec3 p = sk.rest_offsets[j] +
                         0.01 * Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
                p += Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), 0.0);
                ex.segment_world.set_joint(t, j, p);
            }
        if (done) {
            for (int t = 0; t < 8; ++t) {
                Vec3 w = ex.segment_world.joint(t, sk.right_wrist);
                w.z() += 0.5;
                ex.segment_world.set_joint(t, sk.right_wrist, w);
            }
        }
        ex.frame_number = done ? 42 : 14;
        ex.text = "raise the right hand";
        ex.stage_end = done;
        out.push_back(std::move(ex));
    }
    return out;
}

}  // namespace

TEST_CASE("scheduler: output bounded in [0,1] for arbitrary inputs") {
    Rng rng(1);
    SchedulerModel model(tiny_config(), rng);
    HashedTextEmbedder embedder(64);
    Rng drng(2);
    for (int i = 0; i < 10; ++i) {
        MotionSegment seg = MotionSegment::zeros(8);
        seg.positions = FrameMatrix::Random(8, kMotionDim) * std::pow(10.0, i % 5);
        // keep the hips distinct so canonicalization is defined
        const auto& sk = Skeleton::instance();
        seg.positions(0, sk.left_hip * 3) = -0.1;
        seg.positions(0, sk.right_hip * 3) = 0.1;
        const double p =
            model.predict_stage_end(embedder, seg, drng.uniform(0, 200), "any text at all");
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
}

TEST_CASE("scheduler: deterministic at inference") {
    Rng rng(3);
    SchedulerModel model(tiny_config(), rng);
    model.set_stats(Eigen::VectorXd::Zero(kMotionDim), Eigen::VectorXd::Ones(kMotionDim));
    HashedTextEmbedder embedder(64);
    Rng drng(4);
    const auto ex = toy_examples(2, drng);
    const double a = model.predict_stage_end(embedder, ex[0].segment_world, 10, ex[0].text);
    const double b = model.predict_stage_end(embedder, ex[0].segment_world, 10, ex[0].text);
    CHECK(a == b);
}

TEST_CASE("scheduler: untrained net is near chance, training separates toy labels") {
    Rng rng(5);
    SchedulerModel model(tiny_config(), rng);
    HashedTextEmbedder embedder(64);

    Rng drng(6);
    const auto train = toy_examples(160, drng);
    const auto held = toy_examples(60, drng);

    nn::Adam adam(model.params(), 3e-4);
    SchedulerTrainOptions opts;
    opts.epochs = 30;
    opts.batch = 32;
    opts.lr = 1e-3;
    Rng trng(7);
    const auto losses = train_scheduler(model, embedder, train, opts, trng, adam);

    // loss decreases over training
    CHECK(losses.back() < losses.front());
    // near-perfect on a separable problem
    const double acc = scheduler_accuracy(model, embedder, held, 0.5);
    CHECK(acc >= 0.95);
}

TEST_CASE("scheduler: training requires both label classes") {
    Rng rng(8);
    SchedulerModel model(tiny_config(), rng);
    HashedTextEmbedder embedder(64);
    Rng drng(9);
    auto ex = toy_examples(10, drng);
    for (auto& e : ex) e.stage_end = false;
    nn::Adam adam(model.params(), 1e-3);
    SchedulerTrainOptions opts;
    Rng trng(10);
    CHECK_THROWS(train_scheduler(model, embedder, ex, opts, trng, adam));
    CHECK_THROWS(train_scheduler(model, embedder, {}, opts, trng, adam));
}
