#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

namespace scenemotion {

// Committed defaults are the full-scale hyperparameters; the desk profile
// (configs/desk.json) overrides the sizes so everything trains on a CPU.
struct DiffusionConfig {
    int timesteps = 100;
    double beta_start = 1e-3;  // linear ramp, endpoints scaled for T=100
    double beta_end = 0.2;
    int window = 16;  // frames per segment, two of them pinned history
    int width = 512;
    int layers = 8;
    int heads = 16;
    int vit_layers = 6;
    int vit_heads = 16;
    int text_dim = 768;
    double lr = 1e-4;
    int epochs = 500;
    int batch = 1024;
    int guidance_last_steps = 10;
    bool frame_embedding = true;      // ablation: no-frame-embed
    std::string scene_encoding = "dual";  // ablation: "flat"
};

struct SchedulerModelConfig {
    int width = 512;
    int layers = 3;
    int heads = 8;
    double lr = 1e-4;
    int epochs = 5;
    int batch = 1024;
    int text_dim = 768;
    double threshold = 0.5;
};

struct FeaturizerConfig {
    int channels1 = 64;
    int channels2 = 128;
    int feature_dim = 256;  // penultimate features
    double lr = 3e-4;
    int epochs = 12;
    int batch = 32;
};

struct SceneBuildConfig {
    double walkable_cell = 0.05;
    double band_lo = 0.1;  // above floor
    double band_hi = 1.8;
};

struct DataGenConfig {
    int n_scenes = 10;
    int walk_clips_per_scene = 26;
    int interaction_clips_per_scene = 30;
    double room_min = 6.0;
    double room_max = 8.0;
    int obstacles_min = 5;
    int obstacles_max = 8;
};

struct SamplingRunConfig {
    double speed = 1.1;            // m/s locomotion condition
    double arrive_threshold = 0.3;  // m, locomotion stage end
    int stage_cap = 40;            // max segments per stage
    double frame_rate = 1.0;       // frame counter advance per generated frame
    int subgoal_candidates = 72;   // 5 degree spacing
};

struct EvalRunConfig {
    int episodes = 50;
    int knn_k = 3;
    double foot_contact_height = 0.025;  // H in the sliding weight
    double reach_threshold = 0.20;       // m, "time used" success distance
    double reach_time_cap = 20.0;        // s
    int sphere_samples = 64;             // body proxy samples per joint
    int bootstrap = 200;
};

struct PlannerClientConfig {
    std::string mode = "offline";  // "offline" | "remote"
    std::string url_env = "PLANNER_URL";
    std::string api_key_env = "PLANNER_API_KEY";
    bool fallback_to_offline = true;
};

struct PathsConfig {
    std::string data_dir = "out/dataset";
    std::string checkpoint = "out/denoiser.ckpt";
    std::string scheduler_checkpoint = "out/scheduler.ckpt";
    std::string featurizer_checkpoint = "out/featurizer.ckpt";
    std::string out_dir = "out";
};

struct RunConfig {
    std::uint64_t seed = 0;
    DiffusionConfig diffusion;
    SchedulerModelConfig scheduler;
    FeaturizerConfig featurizer;
    SceneBuildConfig scene;
    DataGenConfig data;
    SamplingRunConfig sampling;
    EvalRunConfig eval;
    PlannerClientConfig planner;
    PathsConfig paths;

    void validate() const;  // throws on out-of-range values
    nlohmann::json to_json() const;
    // Applies the keys present in `j` on top of the current values; unknown
    // keys are rejected.
    void apply_json(const nlohmann::json& j);

    std::uint64_t hash() const;
};

RunConfig load_config(const std::string& path_or_empty);

// Small committed profile used by tests and the acceptance suite.
RunConfig desk_profile();

extern const char* kVersionString;

}  // namespace scenemotion
