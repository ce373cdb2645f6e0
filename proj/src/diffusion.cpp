#include "scenemotion/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace scenemotion {

// ---------------------------------------------------------------------------
// Schedule

NoiseSchedule NoiseSchedule::linear(int timesteps, double beta_start, double beta_end) {
    if (timesteps < 1) throw std::runtime_error("schedule: timesteps must be >= 1");
    NoiseSchedule s;
    s.timesteps = timesteps;
    s.betas.resize(timesteps);
    for (int i = 0; i < timesteps; ++i)
        s.betas(i) = timesteps == 1
                         ? beta_start
                         : beta_start + (beta_end - beta_start) * i / (timesteps - 1.0);
    s.alphas = 1.0 - s.betas.array();
    s.alpha_bars.resize(timesteps);
    double prod = 1.0;
    for (int i = 0; i < timesteps; ++i) {
        prod *= s.alphas(i);
        s.alpha_bars(i) = prod;
    }
    return s;
}

double NoiseSchedule::posterior_variance(int t) const {
    const double ab_prev = t > 1 ? alpha_bar(t - 1) : 1.0;
    return (1.0 - ab_prev) / (1.0 - alpha_bar(t)) * beta(t);
}

NoisedSegment q_sample(const nn::Mat& x0, int t, const nn::Mat& noise,
                       const NoiseSchedule& schedule) {
    if (t < 1 || t > schedule.timesteps) throw std::runtime_error("q_sample: t out of range");
    if (noise.rows() != x0.rows() || noise.cols() != x0.cols())
        throw std::runtime_error("q_sample: noise shape mismatch");
    nn::Mat eps = noise;
    eps.topRows(2).setZero();  // pinned frames carry no noise
    NoisedSegment out;
    const double ab = schedule.alpha_bar(t);
    out.values = std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
    out.values.topRows(2) = x0.topRows(2);
    out.t = t;
    return out;
}

// ---------------------------------------------------------------------------
// Guidance

namespace {

struct JointHit {
    bool penetrated = false;
    double depth = 0.0;
    Vec3 normal{Vec3::Zero()};
};

JointHit probe(const Vec3& p, const GuidanceTarget& target) {
    JointHit hit;
    if (std::holds_alternative<const SceneModel*>(target)) {
        const SceneModel* scene = std::get<const SceneModel*>(target);
        bool inside = false;
        for (const auto& b : scene->obstacles) inside = inside || b.contains(p);
        if (!inside) return hit;
        const auto s = closest_surface_point_and_normal(p, *scene);
        hit.penetrated = true;
        hit.depth = (s.point - p).norm();
        hit.normal = s.normal;
    } else {
        const DynamicObject* obj = std::get<const DynamicObject*>(target);
        const auto s = closest_surface_point_and_normal(p, *obj);
        // inside when the closest sample's outward normal points away from us
        if ((p - s.point).dot(s.normal) < 0) {
            hit.penetrated = true;
            hit.depth = (s.point - p).norm();
            hit.normal = s.normal;
        }
    }
    return hit;
}

}  // namespace

MotionSegment apply_hand_guidance(const MotionSegment& seg_world, const GuidanceTarget& target,
                                  int /*step_index*/) {
    const auto& sk = Skeleton::instance();
    MotionSegment out = seg_world;

    std::vector<int> hands[2] = {{sk.left_wrist}, {sk.right_wrist}};
    hands[0].insert(hands[0].end(), sk.left_hand.begin(), sk.left_hand.end());
    hands[1].insert(hands[1].end(), sk.right_hand.begin(), sk.right_hand.end());

    for (int t = 0; t < out.frames(); ++t) {
        for (const auto& joints : hands) {
            double max_depth = 0.0;
            int count = 0;
            Vec3 dir = Vec3::Zero();
            for (int j : joints) {
                const JointHit hit = probe(out.joint(t, j), target);
                if (hit.penetrated) {
                    ++count;
                    max_depth = std::max(max_depth, hit.depth);
                    dir += hit.normal;
                }
            }
            if (count == 0) continue;
            const double n = dir.norm();
            if (n < 1e-12) continue;
            dir /= n;

            // shift the whole hand group rigidly
            for (int j : joints) out.set_joint(t, j, out.joint(t, j) + max_depth * dir);

            // keep the better of before/after; guidance must never worsen a frame
            double new_max = 0.0;
            int new_count = 0;
            for (int j : joints) {
                const JointHit hit = probe(out.joint(t, j), target);
                if (hit.penetrated) {
                    ++new_count;
                    new_max = std::max(new_max, hit.depth);
                }
            }
            if (new_max > max_depth || new_count > count) {
                for (int j : joints) out.set_joint(t, j, out.joint(t, j) - max_depth * dir);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model

DenoiserModel::DenoiserModel(const DiffusionConfig& cfg, Rng& rng) : cfg_(cfg) {
    schedule_ = NoiseSchedule::linear(cfg.timesteps, cfg.beta_start, cfg.beta_end);
    cond_ = ConditionEncoder(store_, cfg.width, cfg.vit_layers, cfg.vit_heads, cfg.text_dim,
                             cfg.frame_embedding, cfg.scene_encoding == "flat", rng);
    motion_in_ = nn::Linear(store_, "denoiser.motion_in", kMotionDim, cfg.width, rng);
    motion_out_ = nn::Linear(store_, "denoiser.motion_out", cfg.width, kMotionDim, rng);
    skip_ = nn::Linear(store_, "denoiser.skip", kMotionDim, kMotionDim, rng);
    store_.value(skip_.weight_id()) = 0.02 * store_.value(skip_.weight_id()) +
                                      nn::Mat::Identity(kMotionDim, kMotionDim);
    encoder_ = nn::TransformerEncoder(store_, "denoiser.enc", cfg.width, cfg.layers, cfg.heads, rng);
    t_mlp1_ = nn::Linear(store_, "denoiser.t_mlp1", cfg.width, cfg.width, rng);
    t_mlp2_ = nn::Linear(store_, "denoiser.t_mlp2", cfg.width, cfg.width, rng);
    mean_ = Eigen::VectorXd::Zero(kMotionDim);
    std_ = Eigen::VectorXd::Ones(kMotionDim);
}

void DenoiserModel::set_stats(const Eigen::VectorXd& mean, const Eigen::VectorXd& std) {
    if (mean.size() != kMotionDim || std.size() != kMotionDim)
        throw std::runtime_error("denoiser: stats must be 84-d");
    mean_ = mean;
    std_ = std.cwiseMax(1e-6);
    stats_set_ = true;
}

nn::Mat DenoiserModel::standardize(const FrameMatrix& x) const {
    nn::Mat out = x;
    out.rowwise() -= mean_.transpose();
    out.array().rowwise() /= std_.transpose().array();
    return out;
}

FrameMatrix DenoiserModel::unstandardize(const nn::Mat& x) const {
    nn::Mat out = x;
    out.array().rowwise() *= std_.transpose().array();
    out.rowwise() += mean_.transpose();
    return out;
}

ConditionSet DenoiserModel::encode_conditions(const TextEmbedder& embedder,
                                              const ConditionInputs& in,
                                              ConditionCache* cache) const {
    return cond_.encode(store_, embedder, in, cache);
}

nn::Mat DenoiserModel::predict_noise(const nn::Mat& x_t, int t, const ConditionSet& cs,
                                     DenoiserForwardCache* cache) const {
    const int w = static_cast<int>(x_t.rows());
    const int width = cfg_.width;

    // timestep embedding, added to the four condition tokens
    const Eigen::VectorXd t_sin = nn::sinusoidal_embedding(t, width);
    const nn::Mat t_mid = t_mlp1_.forward(store_, t_sin.transpose());
    const Eigen::VectorXd t_emb =
        t_mlp2_.forward(store_, nn::gelu(t_mid)).row(0).transpose();

    nn::Mat tokens(w + 4, width);
    tokens.topRows(w) = motion_in_.forward(store_, x_t);
    tokens.row(w) = (cs.scene_token + t_emb).transpose();
    tokens.row(w + 1) = (cs.text_token + t_emb).transpose();
    tokens.row(w + 2) = (cs.pelvis_goal_token + t_emb).transpose();
    tokens.row(w + 3) = (cs.hand_goal_token + t_emb).transpose();
    tokens += nn::positional_encoding(w + 4, width);

    nn::EncoderCache enc_cache;
    const nn::Mat enc_out = encoder_.forward(store_, tokens, cache ? &enc_cache : nullptr);
    const nn::Mat eps = motion_out_.forward(store_, enc_out.topRows(w)) + skip_.forward(store_, x_t);

    if (cache) {
        cache->x_t = x_t;
        cache->tokens = tokens;
        cache->enc = std::move(enc_cache);
        cache->enc_out = enc_out;
        cache->t_sin = t_sin;
        cache->t_mid = t_mid.row(0).transpose();
        cache->t_emb = t_emb;
    }
    return eps;
}

double DenoiserModel::loss_given(const TextEmbedder& embedder, const nn::Mat& x0_std,
                                 const ConditionInputs& cond, int t, const nn::Mat& noise,
                                 nn::GradBuffer* gb) const {
    const int w = static_cast<int>(x0_std.rows());
    nn::Mat eps_target = noise;
    eps_target.topRows(2).setZero();
    const NoisedSegment noised = q_sample(x0_std, t, noise, schedule_);

    DenoiserForwardCache cache;
    ConditionCache* cond_cache = gb ? &cache.cond : nullptr;
    const ConditionSet cs = cond_.encode(store_, embedder, cond, cond_cache);
    const nn::Mat eps_hat = predict_noise(noised.values, t, cs, gb ? &cache : nullptr);

    // pinned frames excluded from the loss
    const int active = (w - 2) * kMotionDim;
    nn::Mat diff = eps_hat - eps_target;
    diff.topRows(2).setZero();
    const double loss = diff.squaredNorm() / active;

    if (gb) {
        nn::Mat deps = (2.0 / active) * diff;
        skip_.backward(store_, cache.x_t, deps, *gb);
        const nn::Mat denc_top = motion_out_.backward(store_, cache.enc_out.topRows(w), deps, *gb);
        nn::Mat denc = nn::Mat::Zero(w + 4, cfg_.width);
        denc.topRows(w) = denc_top;
        const nn::Mat dtokens = encoder_.backward(store_, cache.enc, denc, *gb);

        motion_in_.backward(store_, cache.x_t, dtokens.topRows(w), *gb);

        const Eigen::VectorXd dscene = dtokens.row(w).transpose();
        const Eigen::VectorXd dtext = dtokens.row(w + 1).transpose();
        const Eigen::VectorXd dpelvis = dtokens.row(w + 2).transpose();
        const Eigen::VectorXd dhand = dtokens.row(w + 3).transpose();
        cond_.backward(store_, cache.cond, dscene, dtext, dpelvis, dhand, *gb);

        const nn::Mat dt_emb = (dscene + dtext + dpelvis + dhand).transpose();
        const nn::Mat act = nn::gelu(cache.t_mid.transpose());
        const nn::Mat dact = t_mlp2_.backward(store_, act, dt_emb, *gb);
        const nn::Mat dmid = nn::gelu_backward(cache.t_mid.transpose(), dact);
        t_mlp1_.backward(store_, cache.t_sin.transpose(), dmid, *gb);
    }
    return loss;
}

double DenoiserModel::training_loss(const TextEmbedder& embedder, const FrameMatrix& x0_canonical,
                                    const ConditionInputs& cond, Rng& rng,
                                    nn::GradBuffer* gb) const {
    const nn::Mat x0 = standardize(x0_canonical);
    const int t = rng.uniform_int(1, schedule_.timesteps);
    nn::Mat noise(x0.rows(), x0.cols());
    for (int i = 0; i < noise.rows(); ++i)
        for (int j = 0; j < noise.cols(); ++j) noise(i, j) = rng.gaussian();
    return loss_given(embedder, x0, cond, t, noise, gb);
}

MotionSegment DenoiserModel::sample_segment(const TextEmbedder& embedder,
                                            const ConditionInputs& cond,
                                            const FrameMatrix& history_canonical, Rng& rng,
                                            const GuidanceHook* guidance) const {
    if (!stats_set_) throw std::runtime_error("sample_segment: model has no normalization stats");
    if (history_canonical.rows() != 2)
        throw std::runtime_error("sample_segment: history must be 2 frames");
    const int w = cfg_.window;
    const nn::Mat hist = standardize(history_canonical);

    const ConditionSet cs = cond_.encode(store_, embedder, cond, nullptr);

    nn::Mat x(w, kMotionDim);
    for (int i = 0; i < w; ++i)
        for (int j = 0; j < kMotionDim; ++j) x(i, j) = rng.gaussian();
    x.topRows(2) = hist;

    // static thresholding on the predicted clean signal; the data is
    // standardized so +-6 sigma comfortably covers every real pose
    const double kX0Clamp = 6.0;
    for (int t = schedule_.timesteps; t >= 1; --t) {
        const nn::Mat eps = predict_noise(x, t, cs, nullptr);
        const double ab = schedule_.alpha_bar(t);
        nn::Mat x0 = (x - std::sqrt(1.0 - ab) * eps) / std::sqrt(ab);
        x0 = x0.cwiseMax(-kX0Clamp).cwiseMin(kX0Clamp);
        x0.topRows(2) = hist;

        if (guidance && t <= cfg_.guidance_last_steps) {
            FrameMatrix x0_canonical = unstandardize(x0);
            (*guidance)(x0_canonical, t);
            x0 = standardize(x0_canonical);
            x0.topRows(2) = hist;
        }

        if (t > 1) {
            const double ab_prev = schedule_.alpha_bar(t - 1);
            const double beta = schedule_.beta(t);
            const double c0 = std::sqrt(ab_prev) * beta / (1.0 - ab);
            const double c1 = std::sqrt(schedule_.alpha(t)) * (1.0 - ab_prev) / (1.0 - ab);
            const double sigma = std::sqrt(schedule_.posterior_variance(t));
            nn::Mat z(w, kMotionDim);
            for (int i = 0; i < w; ++i)
                for (int j = 0; j < kMotionDim; ++j) z(i, j) = rng.gaussian();
            z.topRows(2).setZero();
            x = c0 * x0 + c1 * x + sigma * z;
        } else {
            x = x0;
        }
        x.topRows(2) = hist;
    }

    MotionSegment out;
    out.positions = unstandardize(x);
    return out;
}

// ---------------------------------------------------------------------------
// Training loop

Eigen::VectorXd compute_stats_mean(const std::vector<TrainingExample>& examples) {
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(kMotionDim);
    std::int64_t rows = 0;
    for (const auto& e : examples) {
        mean += e.x0_canonical.colwise().sum().transpose();
        rows += e.x0_canonical.rows();
    }
    return mean / static_cast<double>(rows);
}

Eigen::VectorXd compute_stats_std(const std::vector<TrainingExample>& examples,
                                  const Eigen::VectorXd& mean) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(kMotionDim);
    std::int64_t rows = 0;
    for (const auto& e : examples) {
        const nn::Mat centered = e.x0_canonical.rowwise() - mean.transpose();
        acc += centered.array().square().colwise().sum().matrix().transpose();
        rows += e.x0_canonical.rows();
    }
    return (acc / static_cast<double>(rows)).cwiseSqrt().cwiseMax(1e-4);
}

std::vector<double> train_denoiser(DenoiserModel& model, const TextEmbedder& embedder,
                                   const std::vector<TrainingExample>& examples,
                                   const TrainOptions& opts, Rng& rng, nn::Adam& adam,
                                   int first_epoch) {
    if (examples.empty()) throw std::runtime_error("train_denoiser: empty dataset");
    if (!model.has_stats()) {
        const auto mean = compute_stats_mean(examples);
        model.set_stats(mean, compute_stats_std(examples, mean));
    }
    adam.set_lr(opts.lr);

    const int n = static_cast<int>(examples.size());
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

#ifdef _OPENMP
    const int n_threads = omp_get_max_threads();
#else
    const int n_threads = 1;
#endif
    std::vector<nn::GradBuffer> thread_grads(n_threads, nn::GradBuffer(model.params()));
    nn::GradBuffer total(model.params());

    std::vector<double> epoch_losses;
    for (int epoch = first_epoch; epoch < first_epoch + opts.epochs; ++epoch) {
        // per-epoch shuffle from a fresh ordering; keyed off the run seed so
        // resumed runs replay the identical permutation
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = rng.child(0x0bf5u + static_cast<std::uint64_t>(epoch));
        for (int i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);

        double loss_sum = 0.0;
        int loss_count = 0;
        std::vector<double> sample_losses(opts.batch, 0.0);
        for (int start = 0; start < n; start += opts.batch) {
            const int count = std::min(opts.batch, n - start);
            for (auto& g : thread_grads) g.zero();

#pragma omp parallel for schedule(static)
            for (int k = 0; k < count; ++k) {
#ifdef _OPENMP
                const int tid = omp_get_thread_num();
#else
                const int tid = 0;
#endif
                const auto& ex = examples[order[start + k]];
                Rng sample_rng = rng.child((static_cast<std::uint64_t>(epoch) << 32) ^
                                           static_cast<std::uint64_t>(start + k));
                sample_losses[k] = model.training_loss(embedder, ex.x0_canonical, ex.cond,
                                                       sample_rng, &thread_grads[tid]);
            }

            total.zero();
            for (const auto& g : thread_grads) total.add(g);  // fixed order
            total.scale(1.0 / count);
            adam.step(model.params(), total);
            double batch_loss = 0.0;
            for (int k = 0; k < count; ++k) batch_loss += sample_losses[k];
            loss_sum += batch_loss / count;
            ++loss_count;
        }
        const double mean_loss = loss_sum / std::max(1, loss_count);
        epoch_losses.push_back(mean_loss);
        if (opts.on_epoch) opts.on_epoch(epoch, mean_loss);
    }
    return epoch_losses;
}

}  // namespace scenemotion
