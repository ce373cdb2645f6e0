#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "scenemotion/data.hpp"
#include "scenemotion/eval.hpp"

using namespace scenemotion;
namespace fs = std::filesystem;

namespace {

SceneModel test_scene(std::uint64_t seed = 5) {
    SyntheticSceneSpec spec;
    Rng rng(seed);
    return generate_scene(spec, rng);
}

std::vector<unsigned char> file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::vector<unsigned char>(std::istreambuf_iterator<char>(f), {});
}

}  // namespace

TEST_CASE("generate_scene: deterministic per seed, requested obstacle count") {
    SyntheticSceneSpec spec;
    spec.obstacles_min = 6;
    spec.obstacles_max = 6;
    Rng a(42), b(42), c(43);
    const auto s1 = generate_scene(spec, a);
    const auto s2 = generate_scene(spec, b);
    const auto s3 = generate_scene(spec, c);
    CHECK(s1.obstacles.size() == 6);
    REQUIRE(s1.obstacles.size() == s2.obstacles.size());
    for (std::size_t i = 0; i < s1.obstacles.size(); ++i)
        CHECK((s1.obstacles[i].center - s2.obstacles[i].center).norm() == 0.0);
    bool differs = s1.obstacles.size() != s3.obstacles.size();
    for (std::size_t i = 0; !differs && i < s1.obstacles.size(); ++i)
        differs = (s1.obstacles[i].center - s3.obstacles[i].center).norm() > 0;
    CHECK(differs);

    // registry populated
    CHECK(s1.static_objects.count("sofa") == 1);
    CHECK(s1.dynamic_objects.count("bottle") == 1);
}

TEST_CASE("generate_scene: zero obstacles gives an empty room") {
    SyntheticSceneSpec spec;
    spec.obstacles_min = 0;
    spec.obstacles_max = 0;
    spec.with_objects = false;
    Rng rng(1);
    const auto s = generate_scene(spec, rng);
    CHECK(s.obstacles.empty());
}

TEST_CASE("walk clip: pelvis approaches the goal, feet alternate contact, low sliding") {
    const auto scene = test_scene();
    Rng rng(7);
    const auto clip = generate_clip(MotionType::kWalkForward, scene, rng);
    REQUIRE(clip.goal.has_value());
    const auto& sk = Skeleton::instance();

    MotionSegment all;
    all.positions = clip.positions;
    const Vec3 start = all.joint(0, sk.pelvis);
    const Vec3 end = all.joint(clip.frames() - 1, sk.pelvis);
    const Vec2 goal(clip.goal->x(), clip.goal->y());
    const double d_start = (Vec2(start.x(), start.y()) - goal).norm();
    const double d_end = (Vec2(end.x(), end.y()) - goal).norm();
    CHECK(d_end < 0.25);
    CHECK(d_end < d_start);

    // mostly decreasing distance over time
    int decreases = 0, total = 0;
    for (int f = kFps / 2; f + kFps / 2 < clip.frames(); f += kFps / 2) {
        const Vec3 a = all.joint(f - kFps / 2, sk.pelvis);
        const Vec3 b = all.joint(f + kFps / 2, sk.pelvis);
        decreases += (Vec2(b.x(), b.y()) - goal).norm() < (Vec2(a.x(), a.y()) - goal).norm();
        ++total;
    }
    CHECK(decreases >= total - 1);

    // feet alternate: both feet are never simultaneously high
    int both_high = 0;
    for (int f = 0; f < clip.frames(); ++f) {
        const double lz = all.joint(f, sk.left_ankle).z() - sk.rest_offsets[sk.left_ankle].z();
        const double rz = all.joint(f, sk.right_ankle).z() - sk.rest_offsets[sk.right_ankle].z();
        if (lz > 0.02 && rz > 0.02) ++both_high;
    }
    CHECK(both_high == 0);

    // anchored stance keeps reference foot sliding small
    const double fs = foot_sliding(clip.positions, scene.floor_height, 0.025);
    CHECK(fs < 8.0);  // cm/s
}

TEST_CASE("pick up clip: index finger ends on the goal") {
    const auto scene = test_scene();
    const auto& sk = Skeleton::instance();
    for (int i = 0; i < 5; ++i) {
        Rng rng(100 + i);
        const auto clip = generate_clip(MotionType::kPickUp, scene, rng);
        REQUIRE(clip.goal.has_value());
        MotionSegment all;
        all.positions = clip.positions;
        const Vec3 tip = all.joint(clip.frames() - 1, sk.right_index_tip);
        CHECK((tip - *clip.goal).norm() < 0.02);
    }
}

TEST_CASE("stand still clip: near-constant pose") {
    const auto scene = test_scene();
    Rng rng(11);
    const auto clip = generate_clip(MotionType::kStandStill, scene, rng);
    for (int j = 0; j < Skeleton::kNumJoints; ++j)
        for (int a = 0; a < 3; ++a) {
            const auto col = clip.positions.col(j * 3 + a);
            const double mean = col.mean();
            const double var = (col.array() - mean).square().mean();
            CHECK(var < 1e-4);
        }
}

TEST_CASE("sit clip: pelvis descends onto the seat") {
    const auto scene = test_scene();
    const auto& sk = Skeleton::instance();
    Rng rng(13);
    const auto clip = generate_clip(MotionType::kSitDown, scene, rng);
    MotionSegment all;
    all.positions = clip.positions;
    const double z0 = all.joint(0, sk.pelvis).z();
    const double z1 = all.joint(clip.frames() - 1, sk.pelvis).z();
    CHECK(z0 == doctest::Approx(0.95).epsilon(0.02));
    CHECK(z1 < 0.62);
    REQUIRE(clip.goal.has_value());
    const Vec3 pelvis_end = all.joint(clip.frames() - 1, sk.pelvis);
    CHECK((Vec2(pelvis_end.x(), pelvis_end.y()) - Vec2(clip.goal->x(), clip.goal->y())).norm() <
          0.25);
}

TEST_CASE("mirror clip: swaps annotation sides and negates x") {
    const auto scene = test_scene();
    Rng rng(17);
    auto clip = generate_clip(MotionType::kPickUp, scene, rng);
    clip.text = "pick up the bottle with the right hand";
    const auto m = mirror_clip(clip);
    CHECK(m.text == "pick up the bottle with the left hand");
    CHECK(m.goal->x() == doctest::Approx(-clip.goal->x()));
    const auto& sk = Skeleton::instance();
    // mirrored left hip x equals the negated original right hip x
    CHECK(m.positions(0, sk.left_hip * 3) ==
          doctest::Approx(-clip.positions(0, sk.right_hip * 3)).epsilon(1e-12));
    CHECK(mirror_clip(m).text == clip.text);
}

TEST_CASE("clip file round trip") {
    const auto scene = test_scene();
    Rng rng(19);
    auto clip = generate_clip(MotionType::kDrink, scene, rng);
    clip.scene_id = "scene_007";
    const std::string path = (fs::temp_directory_path() / "sm_clip_test.smc").string();
    save_clip(clip, path);
    const auto loaded = load_clip(path);
    CHECK(loaded.text == clip.text);
    CHECK(loaded.type == clip.type);
    CHECK(loaded.scene_id == clip.scene_id);
    CHECK(loaded.frames() == clip.frames());
    // float32 round trip
    CHECK((loaded.positions - clip.positions).cwiseAbs().maxCoeff() < 1e-5);
    fs::remove(path);
}

TEST_CASE("segment_clip: window arithmetic and locomotion frame numbers") {
    const int w = 16;
    LabeledClip clip;
    clip.type = MotionType::kDrink;
    const int k = 3;
    clip.positions = FrameMatrix::Random(2 + k * (w - 2) + w - 2, kMotionDim);
    // length 2 + 4*(w-2) gives exactly 4 windows
    const auto windows = segment_clip(clip, w);
    CHECK(windows.size() == 4);
    for (std::size_t i = 0; i < windows.size(); ++i) {
        CHECK(windows[i].segment.start_frame_global == static_cast<int>(i) * (w - 2));
        CHECK(windows[i].frame_number == static_cast<double>(i * (w - 2)));
        CHECK((windows[i].history - windows[i].segment.positions.topRows(2)).norm() == 0.0);
    }

    clip.type = MotionType::kWalkForward;
    for (const auto& win : segment_clip(clip, w)) CHECK(win.frame_number == 0.0);
}

TEST_CASE("scheduler examples: exactly the final window is positive") {
    const auto scene = test_scene();
    Rng rng(23);
    const auto clip = generate_clip(MotionType::kPickUp, scene, rng);
    const auto ex = clip_to_scheduler_examples(clip, 16);
    REQUIRE(ex.size() >= 2);
    int positives = 0;
    for (std::size_t i = 0; i < ex.size(); ++i) {
        positives += ex[i].stage_end;
        if (ex[i].stage_end) CHECK(i == ex.size() - 1);
    }
    CHECK(positives == 1);
}

TEST_CASE("clip_to_examples: canonical windows with stage-consistent conditions") {
    const auto scene = test_scene();
    Rng rng(29);
    const auto walk = generate_clip(MotionType::kWalkForward, scene, rng);
    const auto examples = clip_to_examples(walk, scene, 16);
    REQUIRE(!examples.empty());
    const auto& sk = Skeleton::instance();
    for (const auto& e : examples) {
        CHECK(e.cond.stage == StageType::kLocomotion);
        CHECK(e.cond.frame_number == 0.0);
        // canonical: pelvis of frame 0 at origin
        CHECK(std::abs(e.x0_canonical(0, sk.pelvis * 3)) < 1e-9);
        CHECK(std::abs(e.x0_canonical(0, sk.pelvis * 3 + 1)) < 1e-9);
        CHECK(e.x0_canonical.allFinite());
    }
    // cruising windows carry a forward-ish canonical direction
    bool some_forward = false;
    for (const auto& e : examples)
        if (e.cond.pelvis_direction.norm() > 0.015 &&
            e.cond.pelvis_direction.y() > std::abs(e.cond.pelvis_direction.x()))
            some_forward = true;
    CHECK(some_forward);

    Rng rng2(31);
    const auto grasp = generate_clip(MotionType::kPickUp, scene, rng2);
    const auto gex = clip_to_examples(grasp, scene, 16);
    for (const auto& e : gex) {
        CHECK(e.cond.stage == StageType::kGrasp);
        CHECK(e.cond.hand_goal.norm() > 0.1);
        CHECK(e.cond.hand_goal.norm() < 2.0);  // local frame, within reach
    }
}

TEST_CASE("build_dataset: 4:1 scene split, mirroring doubles train clips, reruns identical") {
    RunConfig cfg = desk_profile();
    cfg.data.n_scenes = 5;
    cfg.data.walk_clips_per_scene = 2;
    cfg.data.interaction_clips_per_scene = 4;

    const auto dir1 = fs::temp_directory_path() / "sm_ds_a";
    const auto dir2 = fs::temp_directory_path() / "sm_ds_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);

    Rng r1(77), r2(77);
    const auto s1 = build_dataset(cfg, dir1.string(), r1);
    const auto s2 = build_dataset(cfg, dir2.string(), r2);

    CHECK(s1.n_scenes == 5);
    CHECK(s1.train_clips % 2 == 0);  // originals and mirrors
    CHECK(s1.train_clips > 0);
    CHECK(s1.eval_clips > 0);

    const auto ds = load_dataset(dir1.string());
    CHECK(ds.scenes.size() == 5);
    int train_scenes = 0, eval_scenes = 0;
    std::set<std::string> train_ids, eval_ids;
    for (const auto& e : ds.clips) {
        if (e.split == "train") train_ids.insert(e.clip.scene_id);
        else eval_ids.insert(e.clip.scene_id);
    }
    train_scenes = static_cast<int>(train_ids.size());
    eval_scenes = static_cast<int>(eval_ids.size());
    CHECK(train_scenes == 4);
    CHECK(eval_scenes == 1);
    for (const auto& id : eval_ids) CHECK(train_ids.count(id) == 0);

    // byte-identical regeneration
    for (const auto& entry : fs::recursive_directory_iterator(dir1)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), dir1);
        CHECK(file_bytes(entry.path().string()) == file_bytes((dir2 / rel).string()));
    }
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}
