#include "scenemotion/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "scenemotion/container.hpp"

namespace scenemotion {

// ---------------------------------------------------------------------------

LocomotionDirection next_locomotion_direction(const WalkableMap& map, const Vec2& current,
                                              const Vec2& goal, double speed_mps, int candidates,
                                              int window, double arrive_threshold) {
    LocomotionDirection out;
    const Vec2 to_goal = goal - current;
    const double dist = to_goal.norm();
    if (dist < arrive_threshold) {
        out.arrived = true;
        out.subgoal = current;
        return out;
    }

    const double ring = speed_mps * window / kFps;
    const double want = std::atan2(to_goal.y(), to_goal.x());

    // direct shot when the goal is inside the ring
    if (dist <= ring && is_walkable_segment(map, current, goal)) {
        out.subgoal = goal;
        const Vec2 dir = to_goal / dist;
        // slow down for the final approach
        const double speed = std::min(speed_mps, dist * kFps / (window - 2) * 0.9);
        out.direction_mps = dir * speed;
        return out;
    }

    double best_off = 1e9;
    Vec2 best;
    bool found = false;
    for (const double radius : {ring, ring * 0.5, ring * 0.25}) {
        for (int k = 0; k < candidates; ++k) {
            // ordered by |angle|: 0, +5, -5, +10, -10 degrees ...
            const double off =
                (k % 2 == 0 ? 1.0 : -1.0) * (2.0 * kPi / candidates) * ((k + 1) / 2);
            const Vec2 cand = current + radius * Vec2(std::cos(want + off), std::sin(want + off));
            if (!map.in_bounds(cand)) continue;
            if (!is_walkable_segment(map, current, cand)) continue;
            if (std::abs(off) < best_off) {
                best_off = std::abs(off);
                best = cand;
                found = true;
            }
        }
        if (found) break;
    }
    if (!found) throw std::runtime_error("next_locomotion_direction: blocked");
    out.subgoal = best;
    out.direction_mps = (best - current).normalized() * speed_mps;
    return out;
}

double advance_frame_counter(StageType stage, double counter, int window, double rate) {
    if (stage == StageType::kLocomotion) return 0.0;
    return counter + rate * (window - 2);
}

int closest_index_frame(const FrameMatrix& frames, const Vec3& goal, bool right_hand) {
    const auto& sk = Skeleton::instance();
    const int tip = right_hand ? sk.right_index_tip : sk.left_index_tip;
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int f = 0; f < frames.rows(); ++f) {
        const Vec3 p(frames(f, tip * 3), frames(f, tip * 3 + 1), frames(f, tip * 3 + 2));
        const double d = (p - goal).norm();
        if (d < best_d - 1e-15) {  // strict: ties keep the earliest frame
            best_d = d;
            best = f;
        }
    }
    return best;
}

ObjectPoseTrack build_object_track(const FrameMatrix& motion, const std::string& object_id,
                                   const DynamicObject& object, int attach_frame,
                                   int release_frame, bool right_hand) {
    const int n = static_cast<int>(motion.rows());
    ObjectPoseTrack track;
    track.object_id = object_id;
    track.poses.resize(n);
    track.attach_states.resize(n, AttachState::kNone);

    const ObjectPose initial{object.location, object.rotation};
    if (attach_frame < 0) attach_frame = n;
    if (release_frame < 0) release_frame = n;

    // offset in the attach-frame hand coordinates
    ObjectPose released = initial;
    Vec3 local_offset = Vec3::Zero();
    Mat3 local_rot = object.rotation;
    if (attach_frame < n) {
        const HandFrame h = hand_frame(motion.row(attach_frame), right_hand);
        const Mat3 inv = yaw_rotation(-h.yaw);
        local_offset = inv * (object.location - h.origin);
        local_rot = inv * object.rotation;
    }

    for (int f = 0; f < n; ++f) {
        if (f < attach_frame) {
            track.poses[f] = initial;
        } else if (f < release_frame) {
            const HandFrame h = hand_frame(motion.row(f), right_hand);
            const Mat3 r = yaw_rotation(h.yaw);
            track.poses[f] = {h.origin + r * local_offset, r * local_rot};
            track.attach_states[f] = right_hand ? AttachState::kRightHand : AttachState::kLeftHand;
            released = track.poses[f];
        } else {
            track.poses[f] = released;
        }
    }
    return track;
}

FrameMatrix standing_start_pose(const Vec2& position, double yaw) {
    const auto& sk = Skeleton::instance();
    FrameMatrix frames(2, kMotionDim);
    for (int f = 0; f < 2; ++f)
        for (int j = 0; j < Skeleton::kNumJoints; ++j) {
            const Vec3& r = sk.rest_offsets[j];
            const Vec2 xy = rotate2(Vec2(r.x(), r.y()), yaw);
            frames(f, j * 3) = position.x() + xy.x();
            frames(f, j * 3 + 1) = position.y() + xy.y();
            frames(f, j * 3 + 2) = r.z();
        }
    return frames;
}

// ---------------------------------------------------------------------------

namespace {

struct AttachPlan {
    std::string object_id;
    int attach_frame = -1;   // global
    int release_frame = -1;  // global
};

Vec3 pelvis_of(const Eigen::Ref<const Eigen::RowVectorXd>& frame) {
    const auto& sk = Skeleton::instance();
    return Vec3(frame(sk.pelvis * 3), frame(sk.pelvis * 3 + 1), frame(sk.pelvis * 3 + 2));
}

}  // namespace

EpisodeResult run_episode(const InstructionPlan& plan, const SceneModel& scene,
                          const FrameMatrix& start_pose, const EpisodeModels& models,
                          const RunConfig& cfg, Rng& rng) {
    if (plan.steps.empty()) throw std::runtime_error("run_episode: empty plan");
    if (!models.denoiser || !models.scheduler || !models.embedder)
        throw std::runtime_error("run_episode: missing models");

    const int window = models.denoiser->config().window;
    const WalkableMap wmap =
        build_walkable_map(scene, cfg.scene.walkable_cell, cfg.scene.band_lo, cfg.scene.band_hi);

    MotionTrack track;
    track.seed(start_pose);

    EpisodeResult result;
    std::vector<AttachPlan> attaches;

    for (const auto& step : plan.steps) {
        const int stage_start = result.boundaries.empty() ? 0 : track.length();
        double frame_counter = 0.0;
        int segments = 0;
        bool stage_done = false;

        while (!stage_done) {
            if (segments >= cfg.sampling.stage_cap) {
                result.truncated = true;
                result.diagnostic = "stage cap reached at step " + std::to_string(step.step_id) +
                                    " (" + step.text + ")";
                break;
            }

            const FrameMatrix history = track.tail(2);
            const Vec3 pelvis0 = pelvis_of(history.row(0));
            CanonicalFrame frame;
            frame.pelvis_position = pelvis0;
            frame.pelvis_yaw = wrap_angle(facing_yaw(history.row(0)));

            ConditionInputs inputs;
            inputs.stage = step.stage;
            inputs.text = step.text;
            inputs.frame_number = frame_counter;

            DualVoxelGoal voxel_goal;
            bool arrived = false;
            if (step.stage == StageType::kLocomotion) {
                if (!step.goal_point)
                    throw std::runtime_error("run_episode: locomotion step without goal");
                const Vec3 pelvis_now = pelvis_of(history.row(1));
                const Vec2 now(pelvis_now.x(), pelvis_now.y());
                const Vec2 goal(step.goal_point->x(), step.goal_point->y());
                LocomotionDirection dir;
                try {
                    dir = next_locomotion_direction(wmap, now, goal, step.speed,
                                                    cfg.sampling.subgoal_candidates, window,
                                                    cfg.sampling.arrive_threshold);
                } catch (const std::runtime_error& e) {
                    // keep the partial episode; the character walked itself
                    // into a spot with no walkable sub-goal
                    result.truncated = true;
                    result.diagnostic = std::string(e.what()) + " at step " +
                                        std::to_string(step.step_id);
                    break;
                }
                arrived = dir.arrived;
                inputs.pelvis_direction =
                    direction_to_canonical(dir.direction_mps / kFps, frame);
                voxel_goal.point = Vec3(dir.subgoal.x(), dir.subgoal.y(), pelvis0.z());
            } else if (step.stage == StageType::kGrasp || step.stage == StageType::kPutDown) {
                Vec3 goal;
                if (step.goal_point) {
                    goal = *step.goal_point;
                } else if (step.object_id) {
                    const auto loc = scene.object_location(*step.object_id);
                    if (!loc) throw std::runtime_error("run_episode: unknown object " + *step.object_id);
                    goal = *loc + Vec3(0, 0, 0.11);
                } else {
                    throw std::runtime_error("run_episode: hand stage without goal");
                }
                inputs.hand_goal = transform_to_canonical(goal, frame);
                voxel_goal.point = goal;
            } else if (step.stage == StageType::kSceneObjectInteraction) {
                if (step.object_id) voxel_goal.object_id = step.object_id;
                else if (step.goal_point) voxel_goal.point = step.goal_point;
            }

            inputs.voxels = pack_dual(
                build_dual_voxel(scene, pelvis0, frame.pelvis_yaw, step.stage, voxel_goal));

            // canonical history for the sampler
            FrameMatrix hist_canon(2, kMotionDim);
            for (int r = 0; r < 2; ++r)
                for (int j = 0; j < Skeleton::kNumJoints; ++j) {
                    const Vec3 p(history(r, j * 3), history(r, j * 3 + 1), history(r, j * 3 + 2));
                    const Vec3 q = transform_to_canonical(p, frame);
                    hist_canon(r, j * 3) = q.x();
                    hist_canon(r, j * 3 + 1) = q.y();
                    hist_canon(r, j * 3 + 2) = q.z();
                }

            // hand guidance during grasp (against the object) and put-down
            // (against the scene)
            GuidanceHook hook;
            if (step.stage == StageType::kGrasp && step.object_id &&
                scene.dynamic_objects.count(*step.object_id)) {
                const DynamicObject* obj = &scene.dynamic_objects.at(*step.object_id);
                hook = [obj, &frame](FrameMatrix& x0_canonical, int t) {
                    MotionSegment seg;
                    seg.positions = x0_canonical;
                    const MotionSegment world = decanonicalize(seg, frame);
                    const MotionSegment guided = apply_hand_guidance(world, GuidanceTarget{obj}, t);
                    x0_canonical = canonicalize_to(guided, frame);
                };
            } else if (step.stage == StageType::kPutDown) {
                const SceneModel* sc = &scene;
                hook = [sc, &frame](FrameMatrix& x0_canonical, int t) {
                    MotionSegment seg;
                    seg.positions = x0_canonical;
                    const MotionSegment world = decanonicalize(seg, frame);
                    const MotionSegment guided = apply_hand_guidance(world, GuidanceTarget{sc}, t);
                    x0_canonical = canonicalize_to(guided, frame);
                };
            }

            Rng seg_rng = rng.child(0x5eed0000ull + track.length());
            const MotionSegment seg_canon = models.denoiser->sample_segment(
                *models.embedder, inputs, hist_canon, seg_rng, hook ? &hook : nullptr);
            const MotionSegment seg_world = decanonicalize(seg_canon, frame);
            track.append_segment(seg_world);
            ++segments;

            frame_counter = advance_frame_counter(step.stage, frame_counter, window,
                                                  cfg.sampling.frame_rate);

            // stage end
            if (step.stage == StageType::kLocomotion) {
                const Vec3 pelvis_now = pelvis_of(track.frames().row(track.length() - 1));
                const Vec2 now(pelvis_now.x(), pelvis_now.y());
                const Vec2 goal(step.goal_point->x(), step.goal_point->y());
                stage_done = arrived || (now - goal).norm() < cfg.sampling.arrive_threshold;
            } else {
                const double p = models.scheduler->predict_stage_end(
                    *models.embedder, seg_world, frame_counter, step.text);
                stage_done = p >= cfg.scheduler.threshold;
            }
        }
        if (result.truncated && !stage_done) {
            result.boundaries.push_back({step.step_id, stage_start, track.length()});
            break;
        }

        // attach / release events
        if ((step.stage == StageType::kGrasp || step.stage == StageType::kPutDown) &&
            step.object_id && scene.dynamic_objects.count(*step.object_id)) {
            const FrameMatrix stage_frames =
                track.frames().middleRows(stage_start, track.length() - stage_start);
            Vec3 goal = step.goal_point
                            ? *step.goal_point
                            : scene.dynamic_objects.at(*step.object_id).location + Vec3(0, 0, 0.11);
            const int event =
                stage_start + closest_index_frame(stage_frames, goal, /*right_hand=*/true);
            if (step.stage == StageType::kGrasp) {
                AttachPlan ap;
                ap.object_id = *step.object_id;
                ap.attach_frame = event;
                attaches.push_back(ap);
            } else {
                for (auto it = attaches.rbegin(); it != attaches.rend(); ++it) {
                    if (it->object_id == *step.object_id && it->release_frame < 0) {
                        it->release_frame = event;
                        break;
                    }
                }
            }
        }
        result.boundaries.push_back({step.step_id, stage_start, track.length()});
    }

    result.motion = track.frames();
    for (const auto& [id, obj] : scene.dynamic_objects) {
        int attach = -1, release = -1;
        for (const auto& ap : attaches) {
            if (ap.object_id == id) {
                attach = ap.attach_frame;
                release = ap.release_frame;
                break;
            }
        }
        result.object_tracks.push_back(
            build_object_track(result.motion, id, obj, attach, release, true));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Episode I/O

void save_episode(const EpisodeResult& episode, const std::string& path,
                  const nlohmann::json& provenance) {
    ArrayContainer c;
    const int n = static_cast<int>(episode.motion.rows());
    std::vector<double> motion(episode.motion.data(), episode.motion.data() + episode.motion.size());
    c.put_f8("motion", motion, {n, kMotionDim});

    auto bounds = nlohmann::json::array();
    for (const auto& b : episode.boundaries)
        bounds.push_back({{"step_id", b.step_id}, {"start", b.start_frame}, {"end", b.end_frame}});
    c.meta["boundaries"] = bounds;
    c.meta["truncated"] = episode.truncated;
    c.meta["diagnostic"] = episode.diagnostic;
    c.meta["provenance"] = provenance;

    auto tracks = nlohmann::json::array();
    for (std::size_t i = 0; i < episode.object_tracks.size(); ++i) {
        const auto& t = episode.object_tracks[i];
        tracks.push_back(t.object_id);
        std::vector<double> poses;
        poses.reserve(t.poses.size() * 12);
        for (const auto& p : t.poses) {
            for (int a = 0; a < 3; ++a) poses.push_back(p.location(a));
            for (int a = 0; a < 9; ++a) poses.push_back(p.rotation.data()[a]);
        }
        c.put_f8("object_" + std::to_string(i), poses,
                 {static_cast<std::int64_t>(t.poses.size()), 12});
        std::vector<std::int64_t> states;
        states.reserve(t.attach_states.size());
        for (auto s : t.attach_states) states.push_back(static_cast<std::int64_t>(s));
        c.put_i8("object_" + std::to_string(i) + "_attach", states,
                 {static_cast<std::int64_t>(states.size())});
    }
    c.meta["object_ids"] = tracks;
    c.save(path);
}

EpisodeResult load_episode(const std::string& path) {
    const auto c = ArrayContainer::load(path);
    EpisodeResult e;
    const auto& a = c.array("motion");
    const int n = static_cast<int>(a.shape.at(0));
    const auto motion = c.get_f8("motion");
    e.motion.resize(n, kMotionDim);
    std::copy(motion.begin(), motion.end(), e.motion.data());
    for (const auto& b : c.meta.at("boundaries"))
        e.boundaries.push_back({b.at("step_id"), b.at("start"), b.at("end")});
    e.truncated = c.meta.at("truncated");
    e.diagnostic = c.meta.at("diagnostic");
    const auto ids = c.meta.at("object_ids").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        ObjectPoseTrack t;
        t.object_id = ids[i];
        const auto poses = c.get_f8("object_" + std::to_string(i));
        const auto states = c.get_i8("object_" + std::to_string(i) + "_attach");
        const int m = static_cast<int>(poses.size() / 12);
        for (int f = 0; f < m; ++f) {
            ObjectPose p;
            for (int k = 0; k < 3; ++k) p.location(k) = poses[f * 12 + k];
            for (int k = 0; k < 9; ++k) p.rotation.data()[k] = poses[f * 12 + 3 + k];
            t.poses.push_back(p);
            t.attach_states.push_back(static_cast<AttachState>(states[f]));
        }
        e.object_tracks.push_back(std::move(t));
    }
    return e;
}

}  // namespace scenemotion
