#pragma once

#include <vector>

#include "scenemotion/config.hpp"
#include "scenemotion/data.hpp"
#include "scenemotion/motion.hpp"
#include "scenemotion/nn.hpp"

namespace scenemotion {

// Four temporal convolutions over canonicalized joints, global average pool,
// motion-type classification head. The pooled penultimate activations are the
// features used by the distribution metrics.
class MotionFeaturizer {
public:
    MotionFeaturizer(const FeaturizerConfig& cfg, int n_classes, Rng& rng);

    int n_classes() const { return n_classes_; }
    int feature_dim() const { return cfg_.feature_dim; }
    nn::ParamStore& params() { return store_; }
    const nn::ParamStore& params() const { return store_; }

    Eigen::VectorXd features(const FrameMatrix& clip_world) const;
    int classify(const FrameMatrix& clip_world) const;

    double example_loss(const FrameMatrix& clip_world, int label, nn::GradBuffer* gb) const;

private:
    Eigen::VectorXd pooled(const nn::Mat& canon, struct FeaturizerCache* cache) const;

    FeaturizerConfig cfg_;
    int n_classes_ = 0;
    nn::Conv1d conv1_, conv2_, conv3_, conv4_;
    nn::Linear head_;
    nn::ParamStore store_;
};

struct FeaturizerTrainOptions {
    int epochs = 12;
    int batch = 32;
    double lr = 3e-4;
    std::function<void(int, double)> on_epoch;
};

struct LabeledMotion {
    FrameMatrix positions;
    int label = 0;
};

std::vector<double> train_featurizer(MotionFeaturizer& model,
                                     const std::vector<LabeledMotion>& examples,
                                     const FeaturizerTrainOptions& opts, Rng& rng, nn::Adam& adam);

double featurizer_accuracy(const MotionFeaturizer& model,
                           const std::vector<LabeledMotion>& examples);

}  // namespace scenemotion
