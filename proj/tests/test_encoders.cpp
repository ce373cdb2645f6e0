#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "scenemotion/encoders.hpp"

using namespace scenemotion;

namespace {

DualVoxelBits random_bits(Rng& rng, int count) {
    DualVoxelBits dv;
    for (int i = 0; i < count; ++i) {
        dv.current.set(rng.uniform_int(0, 32767));
        dv.predictive.set(rng.uniform_int(0, 32767));
    }
    return dv;
}

}  // namespace

TEST_CASE("hashed text embedder: deterministic, unit norm, distinct texts") {
    HashedTextEmbedder e(768);
    const auto a = e.embed("walk forward to the table");
    const auto b = e.embed("walk forward to the table");
    const auto c = e.embed("sit down on the sofa");
    CHECK(a.size() == 768);
    CHECK((a - b).norm() == 0.0);
    CHECK((a - c).norm() > 0.1);
    CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-9));
    CHECK_THROWS(e.embed(""));
    CHECK_THROWS(e.embed("...!!!"));  // no alphanumeric tokens
}

TEST_CASE("voxel packing: bit-exact round trip of patch occupancy") {
    Rng rng(3);
    LocalVoxelPatch p;
    for (int i = 0; i < 500; ++i) p.occupancy[rng.uniform_int(0, 32767)] = 1;
    const auto bits = pack_voxels(p);
    for (int i = 0; i < 32768; ++i) CHECK(bits.get(i) == (p.occupancy[i] != 0));
}

TEST_CASE("masking rules per stage") {
    CHECK(scene_token_masked(StageType::kSmallObjectInteraction));
    CHECK_FALSE(scene_token_masked(StageType::kLocomotion));
    CHECK_FALSE(scene_token_masked(StageType::kSceneObjectInteraction));
    CHECK_FALSE(scene_token_masked(StageType::kGrasp));

    CHECK_FALSE(pelvis_token_masked(StageType::kLocomotion));
    CHECK(pelvis_token_masked(StageType::kGrasp));
    CHECK(pelvis_token_masked(StageType::kSceneObjectInteraction));

    CHECK_FALSE(hand_token_masked(StageType::kGrasp));
    CHECK_FALSE(hand_token_masked(StageType::kPutDown));
    CHECK(hand_token_masked(StageType::kLocomotion));
    CHECK(hand_token_masked(StageType::kSmallObjectInteraction));
}

TEST_CASE("condition encoder: token dims, masking, determinism") {
    Rng rng(5);
    nn::ParamStore store;
    const int width = 512;  // default contract: all four tokens are 512-d
    ConditionEncoder enc(store, width, 1, 4, 768, true, false, rng);
    HashedTextEmbedder embedder(768);

    Rng drng(6);
    ConditionInputs in;
    in.voxels = random_bits(drng, 80);
    in.text = "pick up the bottle with the right hand";
    in.frame_number = 28;
    in.pelvis_direction = Vec2(0.01, 0.03);
    in.hand_goal = Vec3(0.2, 0.4, 1.0);

    for (StageType stage :
         {StageType::kLocomotion, StageType::kGrasp, StageType::kPutDown,
          StageType::kSceneObjectInteraction, StageType::kSmallObjectInteraction,
          StageType::kStationary}) {
        in.stage = stage;
        const auto cs = enc.encode(store, embedder, in);
        CHECK(cs.scene_token.size() == width);
        CHECK(cs.text_token.size() == width);
        CHECK(cs.pelvis_goal_token.size() == width);
        CHECK(cs.hand_goal_token.size() == width);

        CHECK(cs.scene_masked == scene_token_masked(stage));
        CHECK(cs.pelvis_masked == pelvis_token_masked(stage));
        CHECK(cs.hand_masked == hand_token_masked(stage));
        if (cs.scene_masked) CHECK(cs.scene_token.norm() == 0.0);
        else CHECK(cs.scene_token.norm() > 1e-6);
        if (cs.pelvis_masked) CHECK(cs.pelvis_goal_token.norm() == 0.0);
        else CHECK(cs.pelvis_goal_token.norm() > 1e-6);
        if (cs.hand_masked) CHECK(cs.hand_goal_token.norm() == 0.0);
        else CHECK(cs.hand_goal_token.norm() > 1e-6);
        CHECK(cs.text_token.norm() > 1e-6);

        // byte-identical repeat
        const auto cs2 = enc.encode(store, embedder, in);
        CHECK((cs.scene_token - cs2.scene_token).norm() == 0.0);
        CHECK((cs.text_token - cs2.text_token).norm() == 0.0);
    }
}

TEST_CASE("scene vit: input shape contract and occupancy sensitivity") {
    Rng rng(7);
    nn::ParamStore store;
    SceneViT vit(store, "vit", 64, 2, 4, false, rng);

    DualVoxelBits zeros;
    DualVoxelBits ones;
    for (int i = 0; i < 32768; ++i) {
        ones.current.set(i);
        ones.predictive.set(i);
    }
    const auto f0 = vit.forward(store, zeros);
    const auto f1 = vit.forward(store, ones);
    CHECK(f0.size() == 64);
    CHECK((f0 - f1).norm() > 1e-6);  // non-degenerate

    Rng drng(8);
    const auto dv = random_bits(drng, 200);
    const auto a = vit.forward(store, dv);
    const auto b = vit.forward(store, dv);
    CHECK((a - b).norm() == 0.0);
}

TEST_CASE("scene vit: flat ablation responds only to column occupancy") {
    Rng rng(9);
    nn::ParamStore store;
    SceneViT vit(store, "vit", 32, 1, 2, true, rng);

    // two different height profiles with the same column footprint
    DualVoxelBits low, high;
    auto idx = [](int x, int y, int z) { return x + 32 * (y + 32 * z); };
    for (int x = 10; x < 14; ++x)
        for (int y = 10; y < 14; ++y) {
            low.current.set(idx(x, y, 2));
            high.current.set(idx(x, y, 28));
        }
    const auto fl = vit.forward(store, low);
    const auto fh = vit.forward(store, high);
    CHECK((fl - fh).norm() == 0.0);  // flattened: heights are identical

    // the dual encoder distinguishes them
    Rng rng2(10);
    nn::ParamStore store2;
    SceneViT dual(store2, "vit", 32, 1, 2, false, rng2);
    CHECK((dual.forward(store2, low) - dual.forward(store2, high)).norm() > 1e-8);
}

TEST_CASE("text-frame encoder: frame sensitivity and the locomotion zero rule") {
    Rng rng(11);
    nn::ParamStore store;
    const int width = 64;
    ConditionEncoder enc(store, width, 1, 2, 128, true, false, rng);
    HashedTextEmbedder embedder(128);

    ConditionInputs in;
    Rng drng(12);
    in.voxels = random_bits(drng, 50);
    in.text = "drink water from the bottle";
    in.stage = StageType::kSmallObjectInteraction;

    in.frame_number = 0;
    const auto t0 = enc.encode(store, embedder, in).text_token;
    in.frame_number = 30;
    const auto t30 = enc.encode(store, embedder, in).text_token;
    CHECK((t0 - t30).norm() > 1e-6);  // same text, different frames

    // locomotion forces frame zero
    in.stage = StageType::kLocomotion;
    in.text = "walk forward";
    in.frame_number = 0;
    const auto l0 = enc.encode(store, embedder, in).text_token;
    in.frame_number = 90;
    const auto l90 = enc.encode(store, embedder, in).text_token;
    CHECK((l0 - l90).norm() == 0.0);
}

TEST_CASE("no-frame-embedding ablation ignores the frame number") {
    Rng rng(13);
    nn::ParamStore store;
    ConditionEncoder enc(store, 64, 1, 2, 128, /*frame_embedding=*/false, false, rng);
    HashedTextEmbedder embedder(128);

    ConditionInputs in;
    Rng drng(14);
    in.voxels = random_bits(drng, 50);
    in.text = "pick up the bottle with the right hand";
    in.stage = StageType::kGrasp;
    in.hand_goal = Vec3(0.1, 0.5, 1.0);

    in.frame_number = 0;
    const auto a = enc.encode(store, embedder, in).text_token;
    in.frame_number = 56;
    const auto b = enc.encode(store, embedder, in).text_token;
    CHECK((a - b).norm() == 0.0);
}

TEST_CASE("goal encoders: determinism and distinct goals") {
    Rng rng(15);
    nn::ParamStore store;
    GoalEncoder ge(store, "goal", 3, 64, rng);
    const auto a = ge.forward(store, Vec3(0.1, 0.2, 0.3));
    const auto b = ge.forward(store, Vec3(0.1, 0.2, 0.3));
    const auto c = ge.forward(store, Vec3(-0.4, 0.1, 0.9));
    CHECK((a - b).norm() == 0.0);
    CHECK((a - c).norm() > 1e-8);

    Vec3 bad(0.0, 0.0, std::nan(""));
    CHECK_THROWS(ge.forward(store, bad));
}

TEST_CASE("mask_scene_token helper zeroes exactly for small-object stages") {
    ConditionSet cs;
    cs.scene_token = Eigen::VectorXd::Ones(8);
    cs.text_token = Eigen::VectorXd::Ones(8);
    cs.pelvis_goal_token = Eigen::VectorXd::Ones(8);
    cs.hand_goal_token = Eigen::VectorXd::Ones(8);
    const auto masked = mask_scene_token(cs, StageType::kSmallObjectInteraction);
    CHECK(masked.scene_token.norm() == 0.0);
    CHECK(masked.scene_masked);
    const auto kept = mask_scene_token(cs, StageType::kLocomotion);
    CHECK(kept.scene_token.norm() > 0.0);
    const auto sofa = mask_scene_token(cs, StageType::kSceneObjectInteraction);
    CHECK(sofa.scene_token.norm() > 0.0);
}
