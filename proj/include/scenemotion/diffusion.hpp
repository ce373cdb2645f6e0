#pragma once

#include <functional>
#include <variant>
#include <vector>

#include "scenemotion/config.hpp"
#include "scenemotion/encoders.hpp"
#include "scenemotion/motion.hpp"
#include "scenemotion/nn.hpp"

namespace scenemotion {

// ---------------------------------------------------------------------------

struct NoiseSchedule {
    int timesteps = 0;
    Eigen::VectorXd betas;       // index t-1 holds beta_t
    Eigen::VectorXd alphas;      // 1 - beta
    Eigen::VectorXd alpha_bars;  // cumulative products

    static NoiseSchedule linear(int timesteps, double beta_start, double beta_end);

    double beta(int t) const { return betas(t - 1); }
    double alpha(int t) const { return alphas(t - 1); }
    double alpha_bar(int t) const { return alpha_bars(t - 1); }
    // posterior variance \tilde beta_t
    double posterior_variance(int t) const;
};

struct NoisedSegment {
    nn::Mat values;  // W x 84, standardized canonical space
    int t = 0;
    // frames 0 and 1 are pinned: they carry zero added noise
};

// Forward process q(x_t | x_0) with the noise zeroed on the two pinned frames.
NoisedSegment q_sample(const nn::Mat& x0, int t, const nn::Mat& noise,
                       const NoiseSchedule& schedule);

// ---------------------------------------------------------------------------
// Guidance

using GuidanceTarget = std::variant<const DynamicObject*, const SceneModel*>;

// Pushes penetrated hand joints out along the averaged surface normal of
// their closest surface points, by the largest penetration depth. Applied to
// the predicted clean signal during the final diffusion steps. Never makes a
// frame worse: a shift that increases depth or penetration count is dropped.
MotionSegment apply_hand_guidance(const MotionSegment& seg_world, const GuidanceTarget& target,
                                  int step_index);

// Hook invoked on the predicted x0 (canonical, unstandardized) at each of the
// final steps.
using GuidanceHook = std::function<void(FrameMatrix& x0_canonical, int step_index)>;

// ---------------------------------------------------------------------------

struct TrainingExample {
    FrameMatrix x0_canonical;  // W x 84
    ConditionInputs cond;
};

struct DenoiserForwardCache {
    ConditionCache cond;
    nn::Mat x_t;
    nn::Mat tokens;      // (W+4) x width
    nn::EncoderCache enc;
    nn::Mat enc_out;
    Eigen::VectorXd t_sin;      // sinusoidal timestep input
    Eigen::VectorXd t_mid;      // timestep mlp hidden pre-activation
    Eigen::VectorXd t_emb;
};

// Epsilon-prediction transformer over W motion tokens plus the four condition
// tokens, with the timestep embedding added to the condition tokens.
class DenoiserModel {
public:
    DenoiserModel(const DiffusionConfig& cfg, Rng& rng);

    const DiffusionConfig& config() const { return cfg_; }
    const NoiseSchedule& schedule() const { return schedule_; }
    nn::ParamStore& params() { return store_; }
    const nn::ParamStore& params() const { return store_; }
    const ConditionEncoder& conditions() const { return cond_; }

    // standardization stats (per column over canonical training windows)
    void set_stats(const Eigen::VectorXd& mean, const Eigen::VectorXd& std);
    bool has_stats() const { return stats_set_; }
    const Eigen::VectorXd& stats_mean() const { return mean_; }
    const Eigen::VectorXd& stats_std() const { return std_; }
    nn::Mat standardize(const FrameMatrix& x) const;
    FrameMatrix unstandardize(const nn::Mat& x) const;

    ConditionSet encode_conditions(const TextEmbedder& embedder, const ConditionInputs& in,
                                   ConditionCache* cache = nullptr) const;

    nn::Mat predict_noise(const nn::Mat& x_t, int t, const ConditionSet& cs,
                          DenoiserForwardCache* cache = nullptr) const;

    // Deterministic loss at a fixed (t, noise); accumulates gradients when
    // `gb` is given. Pinned frames are excluded from the loss.
    double loss_given(const TextEmbedder& embedder, const nn::Mat& x0_std,
                      const ConditionInputs& cond, int t, const nn::Mat& noise,
                      nn::GradBuffer* gb) const;

    // Spec loss: t ~ U(1,T), unit gaussian noise (zeroed on pinned frames).
    double training_loss(const TextEmbedder& embedder, const FrameMatrix& x0_canonical,
                         const ConditionInputs& cond, Rng& rng, nn::GradBuffer* gb = nullptr) const;

    // Ancestral sampling with the two history frames pinned at every step.
    // Returns the canonical-space segment; the caller decanonicalizes.
    MotionSegment sample_segment(const TextEmbedder& embedder, const ConditionInputs& cond,
                                 const FrameMatrix& history_canonical, Rng& rng,
                                 const GuidanceHook* guidance = nullptr) const;

private:
    DiffusionConfig cfg_;
    NoiseSchedule schedule_;
    nn::ParamStore store_;
    ConditionEncoder cond_;
    nn::Linear motion_in_, motion_out_;
    nn::Linear skip_;  // identity-initialized x_t -> epsilon shortcut
    nn::TransformerEncoder encoder_;
    nn::Linear t_mlp1_, t_mlp2_;
    Eigen::VectorXd mean_, std_;
    bool stats_set_ = false;
};

// ---------------------------------------------------------------------------
// Training

struct TrainOptions {
    int epochs = 1;
    int batch = 32;
    double lr = 1e-4;
    // called after each epoch with the mean loss
    std::function<void(int epoch, double loss)> on_epoch;
};

Eigen::VectorXd compute_stats_mean(const std::vector<TrainingExample>& examples);
Eigen::VectorXd compute_stats_std(const std::vector<TrainingExample>& examples,
                                  const Eigen::VectorXd& mean);

// Mini-batch Adam training, OpenMP parallel over the batch with a fixed
// reduction order. Returns per-epoch mean losses.
std::vector<double> train_denoiser(DenoiserModel& model, const TextEmbedder& embedder,
                                   const std::vector<TrainingExample>& examples,
                                   const TrainOptions& opts, Rng& rng, nn::Adam& adam,
                                   int first_epoch = 0);

}  // namespace scenemotion
