#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scenemotion/config.hpp"
#include "scenemotion/diffusion.hpp"
#include "scenemotion/motion.hpp"
#include "scenemotion/scene.hpp"
#include "scenemotion/scheduler.hpp"

namespace scenemotion {

// ---------------------------------------------------------------------------
// Plans

struct PlanStep {
    std::string text;
    int step_id = 1;
    StageType stage = StageType::kLocomotion;
    std::optional<Vec3> goal_point;        // world
    std::optional<std::string> object_id;  // resolved against the scene registry
    double speed = 1.1;                    // m/s, locomotion only
};

struct InstructionPlan {
    std::vector<PlanStep> steps;
};

class PlanError : public std::runtime_error {
public:
    PlanError(const std::string& what, std::string raw_payload)
        : std::runtime_error(what), raw(std::move(raw_payload)) {}
    std::string raw;
};

class PlannerBackend {
public:
    virtual ~PlannerBackend() = default;
    virtual InstructionPlan plan(const std::string& instruction, const SceneModel& scene,
                                 const Vec3& goal) = 0;
};

// Offline template planner: verb + object keyword table emitting walk, grasp
// and interaction steps. Always available; tests never need the network.
class RulePlanner : public PlannerBackend {
public:
    explicit RulePlanner(double default_speed = 1.1) : speed_(default_speed) {}
    InstructionPlan plan(const std::string& instruction, const SceneModel& scene,
                         const Vec3& goal) override;

private:
    double speed_;
};

// HTTP backend posting the task-decomposition prompt; expects a JSON array of
// {step, step_id, category}. URL and key come from the configured env vars.
class RemotePlanner : public PlannerBackend {
public:
    RemotePlanner(PlannerClientConfig cfg, double default_speed = 1.1);
    InstructionPlan plan(const std::string& instruction, const SceneModel& scene,
                         const Vec3& goal) override;

private:
    PlannerClientConfig cfg_;
    double speed_;
};

std::string build_planner_prompt(const std::string& action,
                                 const std::vector<std::string>& example_steps);
// Parses the backend's JSON array; throws PlanError with the raw payload kept.
InstructionPlan parse_planner_response(const std::string& body, const SceneModel& scene,
                                       const Vec3& goal, double default_speed);

InstructionPlan plan_from_instruction(const std::string& instruction, const SceneModel& scene,
                                      const Vec3& goal, PlannerBackend& backend);

std::unique_ptr<PlannerBackend> make_planner(const PlannerClientConfig& cfg, double default_speed);

// ---------------------------------------------------------------------------
// Locomotion sub-goals

struct LocomotionDirection {
    Vec2 direction_mps{Vec2::Zero()};  // unit direction scaled by speed, m/s
    Vec2 subgoal{Vec2::Zero()};
    bool arrived = false;
};

// Ring of walkable sub-goal candidates around the current position; picks the
// one closest in angle to the goal direction. Throws when fully blocked.
LocomotionDirection next_locomotion_direction(const WalkableMap& map, const Vec2& current,
                                              const Vec2& goal, double speed_mps,
                                              int candidates = 72, int window = 16,
                                              double arrive_threshold = 0.3);

// ---------------------------------------------------------------------------
// Episodes

struct StageBoundary {
    int step_id = 0;
    int start_frame = 0;
    int end_frame = 0;  // exclusive
};

struct EpisodeResult {
    FrameMatrix motion;  // L x 84 world
    std::vector<ObjectPoseTrack> object_tracks;
    std::vector<StageBoundary> boundaries;
    bool truncated = false;
    std::string diagnostic;
};

struct EpisodeModels {
    const DenoiserModel* denoiser = nullptr;
    const SchedulerModel* scheduler = nullptr;
    const TextEmbedder* embedder = nullptr;
};

// frame counter advance between segments; locomotion stays at zero
double advance_frame_counter(StageType stage, double counter, int window, double rate);

// argmin-distance frame of the acting index finger to the goal (ties to the
// earliest frame)
int closest_index_frame(const FrameMatrix& frames, const Vec3& goal, bool right_hand);

// Rigid hand binding over [attach_frame, release_frame); the object follows
// the wrist frame with the offset captured at the attach event.
ObjectPoseTrack build_object_track(const FrameMatrix& motion, const std::string& object_id,
                                   const DynamicObject& object, int attach_frame,
                                   int release_frame, bool right_hand);

EpisodeResult run_episode(const InstructionPlan& plan, const SceneModel& scene,
                          const FrameMatrix& start_pose, const EpisodeModels& models,
                          const RunConfig& cfg, Rng& rng);

// Standing rest pose history (2 frames) at a position/yaw, used to seed
// episodes.
FrameMatrix standing_start_pose(const Vec2& position, double yaw);

// Episode file I/O (binary container with provenance metadata).
void save_episode(const EpisodeResult& episode, const std::string& path,
                  const nlohmann::json& provenance);
EpisodeResult load_episode(const std::string& path);

}  // namespace scenemotion
