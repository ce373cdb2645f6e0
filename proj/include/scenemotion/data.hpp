#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "scenemotion/config.hpp"
#include "scenemotion/diffusion.hpp"
#include "scenemotion/motion.hpp"
#include "scenemotion/scene.hpp"

namespace scenemotion {

// ---------------------------------------------------------------------------
// Synthetic scenes

struct SyntheticSceneSpec {
    double room_min = 6.0;
    double room_max = 8.0;
    int obstacles_min = 5;
    int obstacles_max = 8;
    bool with_objects = true;
    int max_retries = 200;
};

SceneModel generate_scene(const SyntheticSceneSpec& spec, Rng& rng);
SceneModel mirror_scene(const SceneModel& scene);  // x -> -x

// ---------------------------------------------------------------------------
// Motion taxonomy (supported subset)

enum class MotionType {
    kWalkForward,
    kWalkBack,
    kWalkLeft,
    kWalkRight,
    kTurnLeft,
    kTurnRight,
    kPickUp,
    kPutDown,
    kSitDown,
    kStandUp,
    kDrink,
    kStandStill,
};

const char* motion_type_name(MotionType t);
MotionType motion_type_from_name(const std::string& name);
StageType stage_for_motion(MotionType t);
bool is_locomotion(MotionType t);
std::vector<MotionType> supported_motion_types();

// ---------------------------------------------------------------------------

struct LabeledClip {
    FrameMatrix positions;  // L x 84, world
    std::string text;
    MotionType type = MotionType::kStandStill;
    std::string scene_id;
    std::optional<Vec3> goal;             // world; reach target / seat / walk goal
    std::optional<std::string> object_id;
    bool mirrored = false;

    int frames() const { return static_cast<int>(positions.rows()); }
    double seconds() const { return frames() / static_cast<double>(kFps); }
};

// Kinematic oracle; throws when the goal cannot be reached in this scene.
LabeledClip generate_clip(MotionType type, const SceneModel& scene, Rng& rng);

LabeledClip mirror_clip(const LabeledClip& clip);  // motion + annotation + goal

void save_clip(const LabeledClip& clip, const std::string& path);
LabeledClip load_clip(const std::string& path);

// ---------------------------------------------------------------------------
// Windows

struct ClipWindow {
    MotionSegment segment;  // world coordinates, W frames
    double frame_number;    // window start offset; 0 for locomotion
    FrameMatrix history;    // 2 x 84, equals segment rows 0..1
};

std::vector<ClipWindow> segment_clip(const LabeledClip& clip, int window);

// Training examples for the denoiser (canonical x0 + conditions built from
// the clip's scene).
std::vector<TrainingExample> clip_to_examples(const LabeledClip& clip, const SceneModel& scene,
                                              int window);

struct SchedulerExample {
    MotionSegment segment_world;
    double frame_number;
    std::string text;
    bool stage_end;
};
std::vector<SchedulerExample> clip_to_scheduler_examples(const LabeledClip& clip, int window);

// ---------------------------------------------------------------------------
// Dataset on disk: one directory per scene plus a manifest.

struct Dataset {
    struct Entry {
        LabeledClip clip;
        std::string split;  // "train" | "eval"
    };
    std::map<std::string, SceneModel> scenes;           // by scene id
    std::map<std::string, SceneModel> mirrored_scenes;  // lazily built copies
    std::vector<Entry> clips;

    const SceneModel& scene_for(const Entry& e) const;
};

struct BuildSummary {
    int n_scenes = 0;
    int train_clips = 0;  // including mirrored copies
    int eval_clips = 0;
    std::string manifest_path;
};

BuildSummary build_dataset(const RunConfig& cfg, const std::string& out_dir, Rng& rng);
Dataset load_dataset(const std::string& dir);

// Path helper shared with the data oracle: greedy sub-goal walk on a walkable
// map; returns waypoints from start to goal. Throws when blocked.
std::vector<Vec2> plan_walk_path(const WalkableMap& map, const Vec2& start, const Vec2& goal,
                                 double ring_radius, double arrive_eps);

// Walkable map with obstacle footprints inflated by a height-dependent
// clearance; the data oracle keeps a wider berth around tall furniture.
WalkableMap inflated_walkable_map(const SceneModel& scene, double cell_size = 0.05);
double clearance_for_height(double obstacle_height);

// Rejection-sampled standing spot keeping `clearance` meters from every
// obstacle. Throws when the scene leaves no room.
Vec2 sample_standing_position(const SceneModel& scene, Rng& rng, double clearance = 0.4);

}  // namespace scenemotion
