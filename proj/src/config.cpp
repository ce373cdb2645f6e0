#include "scenemotion/config.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "scenemotion/rng.hpp"

namespace scenemotion {

const char* kVersionString = "scenemotion 0.1.0";

namespace {

// Field binding keeps load/save/unknown-key handling in one place.
template <typename T>
void set_field(nlohmann::json& out, const std::string& key, const T& v) {
    out[key] = v;
}

template <typename T>
void get_field(const nlohmann::json& in, const std::string& key, T& v) {
    if (in.contains(key)) v = in.at(key).get<T>();
}

void reject_unknown(const nlohmann::json& j, const nlohmann::json& reference,
                    const std::string& scope) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!reference.contains(it.key()))
            throw std::runtime_error("config: unknown key '" + scope + it.key() + "'");
        if (it.value().is_object())
            reject_unknown(it.value(), reference.at(it.key()), scope + it.key() + ".");
    }
}

}  // namespace

nlohmann::json RunConfig::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;

    auto& d = j["diffusion"];
    set_field(d, "timesteps", diffusion.timesteps);
    set_field(d, "beta_start", diffusion.beta_start);
    set_field(d, "beta_end", diffusion.beta_end);
    set_field(d, "window", diffusion.window);
    set_field(d, "width", diffusion.width);
    set_field(d, "layers", diffusion.layers);
    set_field(d, "heads", diffusion.heads);
    set_field(d, "vit_layers", diffusion.vit_layers);
    set_field(d, "vit_heads", diffusion.vit_heads);
    set_field(d, "text_dim", diffusion.text_dim);
    set_field(d, "lr", diffusion.lr);
    set_field(d, "epochs", diffusion.epochs);
    set_field(d, "batch", diffusion.batch);
    set_field(d, "guidance_last_steps", diffusion.guidance_last_steps);
    set_field(d, "frame_embedding", diffusion.frame_embedding);
    set_field(d, "scene_encoding", diffusion.scene_encoding);

    auto& s = j["scheduler"];
    set_field(s, "width", scheduler.width);
    set_field(s, "layers", scheduler.layers);
    set_field(s, "heads", scheduler.heads);
    set_field(s, "lr", scheduler.lr);
    set_field(s, "epochs", scheduler.epochs);
    set_field(s, "batch", scheduler.batch);
    set_field(s, "text_dim", scheduler.text_dim);
    set_field(s, "threshold", scheduler.threshold);

    auto& f = j["featurizer"];
    set_field(f, "channels1", featurizer.channels1);
    set_field(f, "channels2", featurizer.channels2);
    set_field(f, "feature_dim", featurizer.feature_dim);
    set_field(f, "lr", featurizer.lr);
    set_field(f, "epochs", featurizer.epochs);
    set_field(f, "batch", featurizer.batch);

    auto& sc = j["scene"];
    set_field(sc, "walkable_cell", scene.walkable_cell);
    set_field(sc, "band_lo", scene.band_lo);
    set_field(sc, "band_hi", scene.band_hi);

    auto& dg = j["data"];
    set_field(dg, "n_scenes", data.n_scenes);
    set_field(dg, "walk_clips_per_scene", data.walk_clips_per_scene);
    set_field(dg, "interaction_clips_per_scene", data.interaction_clips_per_scene);
    set_field(dg, "room_min", data.room_min);
    set_field(dg, "room_max", data.room_max);
    set_field(dg, "obstacles_min", data.obstacles_min);
    set_field(dg, "obstacles_max", data.obstacles_max);

    auto& sa = j["sampling"];
    set_field(sa, "speed", sampling.speed);
    set_field(sa, "arrive_threshold", sampling.arrive_threshold);
    set_field(sa, "stage_cap", sampling.stage_cap);
    set_field(sa, "frame_rate", sampling.frame_rate);
    set_field(sa, "subgoal_candidates", sampling.subgoal_candidates);

    auto& ev = j["eval"];
    set_field(ev, "episodes", eval.episodes);
    set_field(ev, "knn_k", eval.knn_k);
    set_field(ev, "foot_contact_height", eval.foot_contact_height);
    set_field(ev, "reach_threshold", eval.reach_threshold);
    set_field(ev, "reach_time_cap", eval.reach_time_cap);
    set_field(ev, "sphere_samples", eval.sphere_samples);
    set_field(ev, "bootstrap", eval.bootstrap);

    auto& pl = j["planner"];
    set_field(pl, "mode", planner.mode);
    set_field(pl, "url_env", planner.url_env);
    set_field(pl, "api_key_env", planner.api_key_env);
    set_field(pl, "fallback_to_offline", planner.fallback_to_offline);

    auto& pa = j["paths"];
    set_field(pa, "data_dir", paths.data_dir);
    set_field(pa, "checkpoint", paths.checkpoint);
    set_field(pa, "scheduler_checkpoint", paths.scheduler_checkpoint);
    set_field(pa, "featurizer_checkpoint", paths.featurizer_checkpoint);
    set_field(pa, "out_dir", paths.out_dir);
    return j;
}

void RunConfig::apply_json(const nlohmann::json& j) {
    reject_unknown(j, to_json(), "");
    get_field(j, "seed", seed);
    if (j.contains("diffusion")) {
        const auto& d = j.at("diffusion");
        get_field(d, "timesteps", diffusion.timesteps);
        get_field(d, "beta_start", diffusion.beta_start);
        get_field(d, "beta_end", diffusion.beta_end);
        get_field(d, "window", diffusion.window);
        get_field(d, "width", diffusion.width);
        get_field(d, "layers", diffusion.layers);
        get_field(d, "heads", diffusion.heads);
        get_field(d, "vit_layers", diffusion.vit_layers);
        get_field(d, "vit_heads", diffusion.vit_heads);
        get_field(d, "text_dim", diffusion.text_dim);
        get_field(d, "lr", diffusion.lr);
        get_field(d, "epochs", diffusion.epochs);
        get_field(d, "batch", diffusion.batch);
        get_field(d, "guidance_last_steps", diffusion.guidance_last_steps);
        get_field(d, "frame_embedding", diffusion.frame_embedding);
        get_field(d, "scene_encoding", diffusion.scene_encoding);
    }
    if (j.contains("scheduler")) {
        const auto& s = j.at("scheduler");
        get_field(s, "width", scheduler.width);
        get_field(s, "layers", scheduler.layers);
        get_field(s, "heads", scheduler.heads);
        get_field(s, "lr", scheduler.lr);
        get_field(s, "epochs", scheduler.epochs);
        get_field(s, "batch", scheduler.batch);
        get_field(s, "text_dim", scheduler.text_dim);
        get_field(s, "threshold", scheduler.threshold);
    }
    if (j.contains("featurizer")) {
        const auto& f = j.at("featurizer");
        get_field(f, "channels1", featurizer.channels1);
        get_field(f, "channels2", featurizer.channels2);
        get_field(f, "feature_dim", featurizer.feature_dim);
        get_field(f, "lr", featurizer.lr);
        get_field(f, "epochs", featurizer.epochs);
        get_field(f, "batch", featurizer.batch);
    }
    if (j.contains("scene")) {
        const auto& sc = j.at("scene");
        get_field(sc, "walkable_cell", scene.walkable_cell);
        get_field(sc, "band_lo", scene.band_lo);
        get_field(sc, "band_hi", scene.band_hi);
    }
    if (j.contains("data")) {
        const auto& dg = j.at("data");
        get_field(dg, "n_scenes", data.n_scenes);
        get_field(dg, "walk_clips_per_scene", data.walk_clips_per_scene);
        get_field(dg, "interaction_clips_per_scene", data.interaction_clips_per_scene);
        get_field(dg, "room_min", data.room_min);
        get_field(dg, "room_max", data.room_max);
        get_field(dg, "obstacles_min", data.obstacles_min);
        get_field(dg, "obstacles_max", data.obstacles_max);
    }
    if (j.contains("sampling")) {
        const auto& sa = j.at("sampling");
        get_field(sa, "speed", sampling.speed);
        get_field(sa, "arrive_threshold", sampling.arrive_threshold);
        get_field(sa, "stage_cap", sampling.stage_cap);
        get_field(sa, "frame_rate", sampling.frame_rate);
        get_field(sa, "subgoal_candidates", sampling.subgoal_candidates);
    }
    if (j.contains("eval")) {
        const auto& ev = j.at("eval");
        get_field(ev, "episodes", eval.episodes);
        get_field(ev, "knn_k", eval.knn_k);
        get_field(ev, "foot_contact_height", eval.foot_contact_height);
        get_field(ev, "reach_threshold", eval.reach_threshold);
        get_field(ev, "reach_time_cap", eval.reach_time_cap);
        get_field(ev, "sphere_samples", eval.sphere_samples);
        get_field(ev, "bootstrap", eval.bootstrap);
    }
    if (j.contains("planner")) {
        const auto& pl = j.at("planner");
        get_field(pl, "mode", planner.mode);
        get_field(pl, "url_env", planner.url_env);
        get_field(pl, "api_key_env", planner.api_key_env);
        get_field(pl, "fallback_to_offline", planner.fallback_to_offline);
    }
    if (j.contains("paths")) {
        const auto& pa = j.at("paths");
        get_field(pa, "data_dir", paths.data_dir);
        get_field(pa, "checkpoint", paths.checkpoint);
        get_field(pa, "scheduler_checkpoint", paths.scheduler_checkpoint);
        get_field(pa, "featurizer_checkpoint", paths.featurizer_checkpoint);
        get_field(pa, "out_dir", paths.out_dir);
    }
    validate();
}

void RunConfig::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw std::runtime_error(std::string("config: ") + what);
    };
    require(diffusion.timesteps >= 1, "diffusion.timesteps must be >= 1");
    require(diffusion.beta_start > 0 && diffusion.beta_start < 1, "beta_start in (0,1)");
    require(diffusion.beta_end > diffusion.beta_start && diffusion.beta_end < 1,
            "beta_end in (beta_start,1)");
    require(diffusion.window >= 3, "diffusion.window must be >= 3");
    require(diffusion.width % diffusion.heads == 0, "width must divide heads");
    require(diffusion.width % diffusion.vit_heads == 0, "width must divide vit_heads");
    require(diffusion.scene_encoding == "dual" || diffusion.scene_encoding == "flat",
            "scene_encoding must be dual|flat");
    require(scheduler.width % scheduler.heads == 0, "scheduler width must divide heads");
    require(scheduler.threshold > 0 && scheduler.threshold < 1, "scheduler threshold in (0,1)");
    require(sampling.stage_cap >= 1, "stage_cap >= 1");
    require(eval.knn_k >= 1, "knn_k >= 1");
    require(planner.mode == "offline" || planner.mode == "remote",
            "planner.mode must be offline|remote");
}

std::uint64_t RunConfig::hash() const { return fnv1a(to_json().dump()); }

RunConfig load_config(const std::string& path_or_empty) {
    RunConfig cfg;
    if (path_or_empty.empty()) return cfg;
    std::ifstream f(path_or_empty);
    if (!f) throw std::runtime_error("config: cannot open " + path_or_empty);
    std::stringstream ss;
    ss << f.rdbuf();
    cfg.apply_json(nlohmann::json::parse(ss.str()));
    return cfg;
}

RunConfig desk_profile() {
    RunConfig cfg;
    cfg.diffusion.width = 64;
    cfg.diffusion.layers = 3;
    cfg.diffusion.heads = 4;
    cfg.diffusion.vit_layers = 2;
    cfg.diffusion.vit_heads = 4;
    cfg.diffusion.batch = 32;
    cfg.diffusion.epochs = 12;
    cfg.diffusion.lr = 3e-4;
    cfg.scheduler.width = 64;
    cfg.scheduler.layers = 2;
    cfg.scheduler.heads = 4;
    cfg.scheduler.batch = 128;
    cfg.scheduler.lr = 3e-4;
    cfg.featurizer.channels1 = 48;
    cfg.featurizer.channels2 = 96;
    cfg.data.n_scenes = 10;
    cfg.validate();
    return cfg;
}

}  // namespace scenemotion
