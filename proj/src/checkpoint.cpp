#include "scenemotion/checkpoint.hpp"

#include <stdexcept>

#include "scenemotion/container.hpp"

namespace scenemotion {

namespace {

constexpr int kCheckpointVersion = 1;

void write_common(ArrayContainer& c, const std::string& kind, std::uint64_t config_hash) {
    c.meta["checkpoint_version"] = kCheckpointVersion;
    c.meta["kind"] = kind;
    c.meta["code_version"] = kVersionString;
    c.meta["config_hash"] = config_hash;
    c.meta["skeleton_fingerprint"] = Skeleton::instance().fingerprint();
}

void check_common(const ArrayContainer& c, const std::string& kind) {
    if (c.meta.at("checkpoint_version").get<int>() != kCheckpointVersion)
        throw std::runtime_error("checkpoint: unsupported version");
    if (c.meta.at("kind").get<std::string>() != kind)
        throw std::runtime_error("checkpoint: wrong kind, expected " + kind);
    if (c.meta.at("skeleton_fingerprint").get<std::uint64_t>() !=
        Skeleton::instance().fingerprint())
        throw std::runtime_error("checkpoint: skeleton fingerprint mismatch");
}

void write_stats(ArrayContainer& c, const Eigen::VectorXd& mean, const Eigen::VectorXd& std) {
    c.put_f8("stats.mean", std::vector<double>(mean.data(), mean.data() + mean.size()),
             {mean.size()});
    c.put_f8("stats.std", std::vector<double>(std.data(), std.data() + std.size()), {std.size()});
}

void read_stats(const ArrayContainer& c, Eigen::VectorXd* mean, Eigen::VectorXd* std) {
    const auto m = c.get_f8("stats.mean");
    const auto s = c.get_f8("stats.std");
    *mean = Eigen::Map<const Eigen::VectorXd>(m.data(), static_cast<int>(m.size()));
    *std = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<int>(s.size()));
}

void write_trainer(ArrayContainer& c, const TrainerState& t) {
    t.adam.write_to(c, "trainer.adam.");
    c.meta["trainer.rng"] = t.rng.serialize();
    c.meta["trainer.next_epoch"] = t.next_epoch;
}

bool read_trainer(const ArrayContainer& c, TrainerState* t) {
    if (!c.meta.contains("trainer.next_epoch")) return false;
    t->adam.read_from(c, "trainer.adam.");
    t->rng.deserialize(c.meta.at("trainer.rng").get<std::string>());
    t->next_epoch = c.meta.at("trainer.next_epoch").get<int>();
    return true;
}

}  // namespace

// ---------------------------------------------------------------------------

void save_denoiser(const DenoiserModel& model, const std::string& path,
                   const TrainerState* trainer, std::uint64_t config_hash) {
    ArrayContainer c;
    write_common(c, "denoiser", config_hash);
    const auto& cfg = model.config();
    nlohmann::json j;
    j["timesteps"] = cfg.timesteps;
    j["beta_start"] = cfg.beta_start;
    j["beta_end"] = cfg.beta_end;
    j["window"] = cfg.window;
    j["width"] = cfg.width;
    j["layers"] = cfg.layers;
    j["heads"] = cfg.heads;
    j["vit_layers"] = cfg.vit_layers;
    j["vit_heads"] = cfg.vit_heads;
    j["text_dim"] = cfg.text_dim;
    j["guidance_last_steps"] = cfg.guidance_last_steps;
    j["frame_embedding"] = cfg.frame_embedding;
    j["scene_encoding"] = cfg.scene_encoding;
    c.meta["model_config"] = j;
    c.meta["has_stats"] = model.has_stats();
    write_stats(c, model.stats_mean(), model.stats_std());
    model.params().write_to(c, "params.");
    if (trainer) write_trainer(c, *trainer);
    c.save(path);
}

std::unique_ptr<DenoiserModel> load_denoiser(const std::string& path, TrainerState* trainer) {
    const auto c = ArrayContainer::load(path);
    check_common(c, "denoiser");
    const auto& j = c.meta.at("model_config");
    DiffusionConfig cfg;
    cfg.timesteps = j.at("timesteps");
    cfg.beta_start = j.at("beta_start");
    cfg.beta_end = j.at("beta_end");
    cfg.window = j.at("window");
    cfg.width = j.at("width");
    cfg.layers = j.at("layers");
    cfg.heads = j.at("heads");
    cfg.vit_layers = j.at("vit_layers");
    cfg.vit_heads = j.at("vit_heads");
    cfg.text_dim = j.at("text_dim");
    cfg.guidance_last_steps = j.at("guidance_last_steps");
    cfg.frame_embedding = j.at("frame_embedding");
    cfg.scene_encoding = j.at("scene_encoding");

    Rng init_rng(0);  // overwritten below
    auto model = std::make_unique<DenoiserModel>(cfg, init_rng);
    model->params().read_from(c, "params.");
    if (c.meta.at("has_stats").get<bool>()) {
        Eigen::VectorXd mean, std;
        read_stats(c, &mean, &std);
        model->set_stats(mean, std);
    }
    if (trainer) {
        trainer->adam = nn::Adam(model->params(), 1e-4);
        if (!read_trainer(c, trainer)) trainer->next_epoch = 0;
    }
    return model;
}

void save_scheduler(const SchedulerModel& model, const std::string& path,
                    const TrainerState* trainer, std::uint64_t config_hash) {
    ArrayContainer c;
    write_common(c, "scheduler", config_hash);
    const auto& cfg = model.config();
    nlohmann::json j;
    j["width"] = cfg.width;
    j["layers"] = cfg.layers;
    j["heads"] = cfg.heads;
    j["text_dim"] = cfg.text_dim;
    j["threshold"] = cfg.threshold;
    c.meta["model_config"] = j;
    c.meta["has_stats"] = model.has_stats();
    write_stats(c, model.stats_mean(), model.stats_std());
    model.params().write_to(c, "params.");
    if (trainer) write_trainer(c, *trainer);
    c.save(path);
}

std::unique_ptr<SchedulerModel> load_scheduler(const std::string& path, TrainerState* trainer) {
    const auto c = ArrayContainer::load(path);
    check_common(c, "scheduler");
    const auto& j = c.meta.at("model_config");
    SchedulerModelConfig cfg;
    cfg.width = j.at("width");
    cfg.layers = j.at("layers");
    cfg.heads = j.at("heads");
    cfg.text_dim = j.at("text_dim");
    cfg.threshold = j.at("threshold");
    Rng init_rng(0);
    auto model = std::make_unique<SchedulerModel>(cfg, init_rng);
    model->params().read_from(c, "params.");
    if (c.meta.at("has_stats").get<bool>()) {
        Eigen::VectorXd mean, std;
        read_stats(c, &mean, &std);
        model->set_stats(mean, std);
    }
    if (trainer) {
        trainer->adam = nn::Adam(model->params(), 1e-4);
        if (!read_trainer(c, trainer)) trainer->next_epoch = 0;
    }
    return model;
}

void save_featurizer(const MotionFeaturizer& model, const std::string& path,
                     std::uint64_t config_hash) {
    ArrayContainer c;
    write_common(c, "featurizer", config_hash);
    nlohmann::json j;
    j["n_classes"] = model.n_classes();
    j["feature_dim"] = model.feature_dim();
    c.meta["model_config"] = j;
    model.params().write_to(c, "params.");
    c.save(path);
}

std::unique_ptr<MotionFeaturizer> load_featurizer(const std::string& path) {
    const auto c = ArrayContainer::load(path);
    check_common(c, "featurizer");
    FeaturizerConfig cfg;
    cfg.feature_dim = c.meta.at("model_config").at("feature_dim");
    // conv channel widths are recovered from the stored parameter shapes
    Rng init_rng(0);
    auto probe = std::make_unique<MotionFeaturizer>(
        cfg, c.meta.at("model_config").at("n_classes").get<int>(), init_rng);
    // shapes must match; rebuild with channel sizes from the container
    const auto& c1 = c.array("params.feat.conv1.w");
    const auto& c2 = c.array("params.feat.conv2.w");
    cfg.channels1 = static_cast<int>(c1.shape.at(1));
    cfg.channels2 = static_cast<int>(c2.shape.at(1));
    Rng init_rng2(0);
    auto model = std::make_unique<MotionFeaturizer>(
        cfg, c.meta.at("model_config").at("n_classes").get<int>(), init_rng2);
    model->params().read_from(c, "params.");
    return model;
}

}  // namespace scenemotion
