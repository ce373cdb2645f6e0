#include "scenemotion/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "scenemotion/data.hpp"

namespace scenemotion {

namespace {

Vec2 pelvis_xy(const FrameMatrix& motion, int frame) {
    const auto& sk = Skeleton::instance();
    return Vec2(motion(frame, sk.pelvis * 3), motion(frame, sk.pelvis * 3 + 1));
}

std::vector<Vec3> index_track(const FrameMatrix& motion, int from_frame) {
    const auto& sk = Skeleton::instance();
    std::vector<Vec3> out;
    for (int f = from_frame; f < motion.rows(); ++f)
        out.emplace_back(motion(f, sk.right_index_tip * 3), motion(f, sk.right_index_tip * 3 + 1),
                         motion(f, sk.right_index_tip * 3 + 2));
    return out;
}

}  // namespace

std::vector<LocomotionTask> sample_locomotion_tasks(const std::vector<const SceneModel*>& scenes,
                                                    int count, std::uint64_t seed) {
    std::vector<LocomotionTask> tasks;
    Rng rng(seed);
    int attempts = 0;
    while (static_cast<int>(tasks.size()) < count) {
        if (++attempts > count * 400)
            throw std::runtime_error("sample_locomotion_tasks: scenes too open or too blocked");
        const int si = rng.uniform_int(0, static_cast<int>(scenes.size()) - 1);
        const SceneModel& scene = *scenes[si];
        const WalkableMap map = build_walkable_map(scene);
        Vec2 start, goal;
        try {
            Rng srng = rng.child(attempts);
            start = Vec2(srng.uniform(scene.bounds.min.x() + 0.6, scene.bounds.max.x() - 0.6),
                         srng.uniform(scene.bounds.min.y() + 0.6, scene.bounds.max.y() - 0.6));
            goal = Vec2(srng.uniform(scene.bounds.min.x() + 0.6, scene.bounds.max.x() - 0.6),
                        srng.uniform(scene.bounds.min.y() + 0.6, scene.bounds.max.y() - 0.6));
        } catch (...) {
            continue;
        }
        const double dist = (goal - start).norm();
        if (dist < 2.2) continue;
        // both endpoints in free space
        bool free_ok = true;
        for (const auto& b : scene.obstacles) {
            if (b.contains(Vec3(start.x(), start.y(), b.center.z())) ||
                b.surface_distance(Vec3(start.x(), start.y(), b.center.z())) < 0.25 ||
                b.contains(Vec3(goal.x(), goal.y(), b.center.z())) ||
                b.surface_distance(Vec3(goal.x(), goal.y(), b.center.z())) < 0.25)
                free_ok = false;
        }
        if (!free_ok) continue;
        // the paper's protocol keeps only pairs whose direct path is blocked
        if (is_walkable_segment(map, start, goal)) continue;
        // but a detour must exist
        try {
            plan_walk_path(map, start, goal, 0.55, 0.25);
        } catch (...) {
            continue;
        }
        LocomotionTask t;
        t.scene_index = si;
        t.start = start;
        t.goal = goal;
        t.seed = rng.child(0xb00b5 + attempts).next_u64();
        tasks.push_back(t);
    }
    return tasks;
}

FrameMatrix generate_matched_clip(const DenoiserModel& model, const TextEmbedder& embedder,
                                  const LabeledClip& clip, const SceneModel& scene,
                                  const RunConfig& cfg, Rng& rng) {
    const int window = model.config().window;
    const int target_len = clip.frames();
    const StageType stage = stage_for_motion(clip.type);
    const auto& sk = Skeleton::instance();

    MotionTrack track;
    track.seed(clip.positions.topRows(2));
    double frame_counter = 0.0;
    int guard = 0;
    while (track.length() < target_len && ++guard < 100) {
        const FrameMatrix history = track.tail(2);
        CanonicalFrame frame;
        frame.pelvis_position =
            Vec3(history(0, sk.pelvis * 3), history(0, sk.pelvis * 3 + 1), history(0, sk.pelvis * 3 + 2));
        frame.pelvis_yaw = wrap_angle(facing_yaw(history.row(0)));

        ConditionInputs in;
        in.stage = stage;
        in.text = clip.text;
        in.frame_number = frame_counter;
        DualVoxelGoal goal;
        if (stage == StageType::kLocomotion && clip.goal) {
            goal.point = *clip.goal;
            const Vec2 dir(clip.goal->x() - frame.pelvis_position.x(),
                           clip.goal->y() - frame.pelvis_position.y());
            const double n = dir.norm();
            if (n > 1e-6)
                in.pelvis_direction =
                    direction_to_canonical(dir / n * cfg.sampling.speed / kFps, frame);
        } else if (clip.goal) {
            goal.point = *clip.goal;
        }
        if (stage == StageType::kGrasp || stage == StageType::kPutDown)
            in.hand_goal = transform_to_canonical(*clip.goal, frame);
        in.voxels =
            pack_dual(build_dual_voxel(scene, frame.pelvis_position, frame.pelvis_yaw, stage, goal));

        FrameMatrix hist_canon(2, kMotionDim);
        MotionSegment hist_seg;
        hist_seg.positions = history;
        hist_canon = canonicalize_to(hist_seg, frame);

        Rng seg_rng = rng.child(0xc11b + track.length());
        const MotionSegment seg_canon =
            model.sample_segment(embedder, in, hist_canon, seg_rng, nullptr);
        track.append_segment(decanonicalize(seg_canon, frame));
        frame_counter = advance_frame_counter(stage, frame_counter, window, cfg.sampling.frame_rate);
    }
    FrameMatrix out = track.frames();
    if (out.rows() > target_len) return out.topRows(target_len);
    return out;
}

BenchmarkReport run_benchmark(const VariantSet& variants,
                              const std::vector<const SceneModel*>& eval_scenes,
                              const Dataset* eval_clips, int n_episodes, const RunConfig& cfg,
                              std::uint64_t seed) {
    if (!variants.full || !variants.scheduler || !variants.embedder)
        throw std::runtime_error("run_benchmark: full model, scheduler and embedder are required");
    BenchmarkReport report;
    const BodyProxy proxy = BodyProxy::standard();

    // --- locomotion: full vs flattened-voxel ablation on paired tasks
    {
        const auto tasks = sample_locomotion_tasks(eval_scenes, n_episodes, seed);
        std::vector<std::pair<std::string, const DenoiserModel*>> row;
        row.emplace_back("full", variants.full);
        if (variants.flat_voxel) row.emplace_back("flat_voxel", variants.flat_voxel);

        for (const auto& [name, model] : row) {
            auto& bucket = report.raw["locomotion"][name];
            bucket["pene_pct"].resize(tasks.size());
            bucket["pene_mean_cm"].resize(tasks.size());
            bucket["pene_max_cm"].resize(tasks.size());
            bucket["foot_slide"].resize(tasks.size());
            bucket["goal_dist"].resize(tasks.size());
            bucket["reached"].resize(tasks.size());

            const int n = static_cast<int>(tasks.size());
#pragma omp parallel for schedule(dynamic)
            for (int i = 0; i < n; ++i) {
                const auto& task = tasks[i];
                const SceneModel& scene = *eval_scenes[task.scene_index];
                InstructionPlan plan;
                PlanStep step;
                step.step_id = 1;
                step.stage = StageType::kLocomotion;
                step.text = "walk forward";
                step.goal_point = Vec3(task.goal.x(), task.goal.y(), 0.95);
                step.speed = cfg.sampling.speed;
                plan.steps.push_back(step);

                EpisodeModels models{model, variants.scheduler, variants.embedder};
                const double yaw0 = std::atan2(-(task.goal.x() - task.start.x()),
                                               task.goal.y() - task.start.y());
                Rng erng(task.seed);
                EpisodeResult ep;
                bool failed = false;
                try {
                    ep = run_episode(plan, scene, standing_start_pose(task.start, yaw0), models,
                                     cfg, erng);
                } catch (const std::runtime_error&) {
                    failed = true;  // blocked; counted as unreached with no penetration sample
                }
                if (failed || ep.motion.rows() == 0) {
                    bucket["pene_pct"][i] = 0;
                    bucket["pene_mean_cm"][i] = 0;
                    bucket["pene_max_cm"][i] = 0;
                    bucket["foot_slide"][i] = 0;
                    bucket["goal_dist"][i] = (task.goal - task.start).norm();
                    bucket["reached"][i] = 0;
                    continue;
                }
                const auto pm = penetration_metrics(ep.motion, scene, proxy,
                                                    cfg.eval.sphere_samples);
                bucket["pene_pct"][i] = pm.pct;
                bucket["pene_mean_cm"][i] = pm.mean_m * 100.0;
                bucket["pene_max_cm"][i] = pm.max_m * 100.0;
                bucket["foot_slide"][i] =
                    foot_sliding(ep.motion, scene.floor_height, cfg.eval.foot_contact_height);
                const double gd =
                    (pelvis_xy(ep.motion, static_cast<int>(ep.motion.rows()) - 1) - task.goal)
                        .norm();
                bucket["goal_dist"][i] = gd;
                bucket["reached"][i] = gd <= 0.5 ? 1.0 : 0.0;
            }
        }
    }

    // --- object reaching: walk + grasp with the full model
    {
        Rng rng(seed ^ 0x5eeded);
        auto& bucket = report.raw["reaching"]["full"];
        bucket["error_dist"].assign(n_episodes, 0.0);
        bucket["pene_pct"].assign(n_episodes, 0.0);
        bucket["time_used"].assign(n_episodes, 0.0);
        bucket["finished"].assign(n_episodes, 0.0);

        struct ReachTask {
            int scene_index;
            Vec2 start;
            std::uint64_t seed;
        };
        std::vector<ReachTask> tasks;
        int attempts = 0;
        while (static_cast<int>(tasks.size()) < n_episodes && attempts < n_episodes * 300) {
            ++attempts;
            const int si = rng.uniform_int(0, static_cast<int>(eval_scenes.size()) - 1);
            const SceneModel& scene = *eval_scenes[si];
            if (!scene.dynamic_objects.count("bottle")) continue;
            const Vec3 bottle = scene.dynamic_objects.at("bottle").location;
            Rng srng = rng.child(attempts);
            const double d = srng.uniform(1.2, 2.2);
            const double a = srng.uniform(-kPi, kPi);
            const Vec2 start(bottle.x() + d * std::cos(a), bottle.y() + d * std::sin(a));
            if (!scene.bounds.contains(Vec3(start.x(), start.y(), 1.0))) continue;
            bool ok = true;
            for (const auto& b : scene.obstacles)
                if (b.contains(Vec3(start.x(), start.y(), b.center.z())) ||
                    b.surface_distance(Vec3(start.x(), start.y(), b.center.z())) < 0.3)
                    ok = false;
            if (!ok) continue;
            tasks.push_back({si, start, rng.child(0xabc + attempts).next_u64()});
        }

        const int n = static_cast<int>(tasks.size());
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < n; ++i) {
            const auto& task = tasks[i];
            const SceneModel& scene = *eval_scenes[task.scene_index];
            const Vec3 goal = scene.dynamic_objects.at("bottle").location + Vec3(0, 0, 0.11);
            RulePlanner planner(cfg.sampling.speed);
            const auto plan = planner.plan("pick up the bottle", scene, goal);

            EpisodeModels models{variants.full, variants.scheduler, variants.embedder};
            Rng erng(task.seed);
            EpisodeResult ep;
            try {
                const double yaw0 =
                    std::atan2(-(goal.x() - task.start.x()), goal.y() - task.start.y());
                ep = run_episode(plan, scene, standing_start_pose(task.start, yaw0), models, cfg,
                                 erng);
            } catch (const std::runtime_error&) {
                bucket["error_dist"][i] = (Vec3(task.start.x(), task.start.y(), 0.95) - goal).norm();
                bucket["time_used"][i] = cfg.eval.reach_time_cap;
                continue;
            }
            // grasp stage starts at the last boundary
            const int grasp_start =
                ep.boundaries.empty() ? 0 : ep.boundaries.back().start_frame;
            const auto outcome = reaching_outcome(index_track(ep.motion, 0), goal,
                                                  cfg.eval.reach_threshold,
                                                  cfg.eval.reach_time_cap);
            const auto pm = penetration_metrics(
                ep.motion.bottomRows(ep.motion.rows() - grasp_start), scene, proxy,
                cfg.eval.sphere_samples);
            bucket["error_dist"][i] = outcome.error_dist;
            bucket["pene_pct"][i] = pm.pct;
            bucket["time_used"][i] = outcome.time_used;
            bucket["finished"][i] = outcome.finished ? 1.0 : 0.0;
        }
    }

    // --- interactive motion: distribution metrics vs the eval reference set
    if (eval_clips && variants.featurizer) {
        std::vector<const Dataset::Entry*> refs;
        for (const auto& e : eval_clips->clips) {
            if (e.split != "eval") continue;
            if (is_locomotion(e.clip.type)) continue;
            if (e.clip.type == MotionType::kStandStill) continue;
            refs.push_back(&e);
        }
        const int max_refs = 24;
        if (static_cast<int>(refs.size()) > max_refs) refs.resize(max_refs);

        if (refs.size() >= 4) {
            std::vector<FeaturizedClip> reference;
            for (const auto* e : refs)
                reference.push_back({variants.featurizer->features(e->clip.positions),
                                     e->clip.text});

            std::vector<std::pair<std::string, const DenoiserModel*>> row;
            row.emplace_back("full", variants.full);
            if (variants.no_frame_embed) row.emplace_back("no_frame_embed", variants.no_frame_embed);

            for (const auto& [name, model] : row) {
                const int reps = 2;  // two seeds per text for multimodality groups
                std::vector<FeaturizedClip> generated(refs.size() * reps);
                const int n = static_cast<int>(refs.size());
#pragma omp parallel for schedule(dynamic)
                for (int idx = 0; idx < n * reps; ++idx) {
                    const int i = idx / reps;
                    const int rep = idx % reps;
                    const auto* e = refs[i];
                    const SceneModel& scene = eval_clips->scene_for(*e);
                    Rng grng(seed ^ (0x9e00 + idx * 131 + rep));
                    const FrameMatrix gen = generate_matched_clip(*model, *variants.embedder,
                                                                  e->clip, scene, cfg, grng);
                    generated[idx] = {variants.featurizer->features(gen), e->clip.text};
                }
                const auto dm = distribution_metrics(generated, reference, cfg.eval.knn_k);
                auto& bucket = report.raw["interactive"][name];
                bucket["fid"] = {dm.fid};
                bucket["diversity"] = {dm.diversity};
                bucket["multimodality"] = {dm.multimodality};
                bucket["precision"] = {dm.precision};
                bucket["recall"] = {dm.recall};
                bucket["f1"] = {dm.f1};
            }
        }
    }

    // summaries
    for (const auto& [setting, variants_map] : report.raw)
        for (const auto& [variant, metrics] : variants_map)
            for (const auto& [metric, values] : metrics)
                report.summary[setting][variant][metric] =
                    summarize(values, cfg.eval.bootstrap, seed ^ fnv1a(setting + variant + metric));
    return report;
}

nlohmann::json BenchmarkReport::to_json() const {
    nlohmann::json j;
    for (const auto& [setting, variants_map] : summary)
        for (const auto& [variant, metrics] : variants_map)
            for (const auto& [metric, s] : metrics) {
                j[setting][variant][metric] = {
                    {"mean", s.mean}, {"ci_lo", s.ci_lo}, {"ci_hi", s.ci_hi}, {"n", s.n}};
                const auto& values = raw.at(setting).at(variant).at(metric);
                j[setting][variant][metric]["values"] = values;
            }
    return j;
}

std::string BenchmarkReport::to_table() const {
    std::ostringstream os;
    for (const auto& [setting, variants_map] : summary) {
        os << "== " << setting << " ==\n";
        // header from the first variant's metric names
        const auto& first = variants_map.begin()->second;
        os << "variant";
        for (const auto& [metric, s] : first) os << "\t" << metric;
        os << "\n";
        for (const auto& [variant, metrics] : variants_map) {
            os << variant;
            for (const auto& [metric, s] : metrics) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "\t%.4f±%.4f", s.mean,
                              (s.ci_hi - s.ci_lo) / 2.0);
                os << buf;
            }
            os << "\n";
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace scenemotion
