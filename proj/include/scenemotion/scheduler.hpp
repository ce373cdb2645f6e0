#pragma once

#include <vector>

#include "scenemotion/config.hpp"
#include "scenemotion/data.hpp"
#include "scenemotion/encoders.hpp"
#include "scenemotion/motion.hpp"
#include "scenemotion/nn.hpp"

namespace scenemotion {

// Stage-end classifier: one frame-embedded text token plus one token per
// motion frame, transformer encoder, sigmoid readout from the text token.
class SchedulerModel {
public:
    SchedulerModel(const SchedulerModelConfig& cfg, Rng& rng);

    const SchedulerModelConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return store_; }
    const nn::ParamStore& params() const { return store_; }

    void set_stats(const Eigen::VectorXd& mean, const Eigen::VectorXd& std);
    bool has_stats() const { return stats_set_; }
    const Eigen::VectorXd& stats_mean() const { return mean_; }
    const Eigen::VectorXd& stats_std() const { return std_; }

    // probability that the current stage concludes at this segment
    double predict_stage_end(const TextEmbedder& embedder, const MotionSegment& seg_world,
                             double frame_number, const std::string& text) const;

    // binary cross entropy on one example; accumulates grads when given
    double example_loss(const TextEmbedder& embedder, const SchedulerExample& ex,
                        nn::GradBuffer* gb) const;

private:
    double logit(const TextEmbedder& embedder, const nn::Mat& seg_std, double frame_number,
                 const std::string& text, struct SchedulerCache* cache) const;

    SchedulerModelConfig cfg_;
    nn::ParamStore store_;
    TextFrameEncoder text_;
    nn::Linear frame_in_;
    nn::TransformerEncoder enc_;
    nn::Linear head_;
    Eigen::VectorXd mean_, std_;
    bool stats_set_ = false;
};

struct SchedulerTrainOptions {
    int epochs = 5;
    int batch = 128;
    double lr = 1e-4;
    std::function<void(int, double)> on_epoch;
};

// Balanced-batch Adam training (stage-end windows are rare).
std::vector<double> train_scheduler(SchedulerModel& model, const TextEmbedder& embedder,
                                    const std::vector<SchedulerExample>& examples,
                                    const SchedulerTrainOptions& opts, Rng& rng, nn::Adam& adam);

double scheduler_accuracy(const SchedulerModel& model, const TextEmbedder& embedder,
                          const std::vector<SchedulerExample>& examples, double threshold);

}  // namespace scenemotion
