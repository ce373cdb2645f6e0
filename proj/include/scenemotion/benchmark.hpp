#pragma once

#include <map>
#include <string>
#include <vector>

#include "scenemotion/eval.hpp"
#include "scenemotion/featurizer.hpp"
#include "scenemotion/orchestrator.hpp"

namespace scenemotion {

struct Dataset;

// Model variants compared by the benchmark. Ablations may be left null; the
// corresponding comparisons are skipped.
struct VariantSet {
    const DenoiserModel* full = nullptr;
    const DenoiserModel* flat_voxel = nullptr;
    const DenoiserModel* no_frame_embed = nullptr;
    const SchedulerModel* scheduler = nullptr;
    const MotionFeaturizer* featurizer = nullptr;
    const TextEmbedder* embedder = nullptr;
};

struct BenchmarkReport {
    // setting -> variant -> metric -> per-episode values
    std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>> raw;
    // summaries with bootstrap CIs, same keys
    std::map<std::string, std::map<std::string, std::map<std::string, MetricSummary>>> summary;

    nlohmann::json to_json() const;
    std::string to_table() const;
};

// Paired start/goal tuples whose straight line crosses an obstacle footprint.
struct LocomotionTask {
    int scene_index = 0;
    Vec2 start;
    Vec2 goal;
    std::uint64_t seed = 0;
};
std::vector<LocomotionTask> sample_locomotion_tasks(const std::vector<const SceneModel*>& scenes,
                                                    int count, std::uint64_t seed);

BenchmarkReport run_benchmark(const VariantSet& variants,
                              const std::vector<const SceneModel*>& eval_scenes,
                              const Dataset* eval_clips, int n_episodes, const RunConfig& cfg,
                              std::uint64_t seed);

// Chained segment generation matching a reference clip's conditions; used for
// the interactive-motion distribution metrics.
FrameMatrix generate_matched_clip(const DenoiserModel& model, const TextEmbedder& embedder,
                                  const LabeledClip& clip, const SceneModel& scene,
                                  const RunConfig& cfg, Rng& rng);

}  // namespace scenemotion
