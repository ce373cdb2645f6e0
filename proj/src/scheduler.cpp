#include "scenemotion/scheduler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace scenemotion {

struct SchedulerCache {
    TextFrameCache text;
    nn::Mat frames_std;
    nn::Mat tokens;
    nn::EncoderCache enc;
    nn::Mat enc_out;
};

SchedulerModel::SchedulerModel(const SchedulerModelConfig& cfg, Rng& rng) : cfg_(cfg) {
    text_ = TextFrameEncoder(store_, "sched.text", cfg.text_dim, cfg.width, true, rng);
    frame_in_ = nn::Linear(store_, "sched.frame_in", kMotionDim, cfg.width, rng);
    enc_ = nn::TransformerEncoder(store_, "sched.enc", cfg.width, cfg.layers, cfg.heads, rng);
    head_ = nn::Linear(store_, "sched.head", cfg.width, 1, rng);
    mean_ = Eigen::VectorXd::Zero(kMotionDim);
    std_ = Eigen::VectorXd::Ones(kMotionDim);
}

void SchedulerModel::set_stats(const Eigen::VectorXd& mean, const Eigen::VectorXd& std) {
    mean_ = mean;
    std_ = std.cwiseMax(1e-6);
    stats_set_ = true;
}

double SchedulerModel::logit(const TextEmbedder& embedder, const nn::Mat& seg_std,
                             double frame_number, const std::string& text,
                             SchedulerCache* cache) const {
    const int w = static_cast<int>(seg_std.rows());
    TextFrameCache text_cache;
    const Eigen::VectorXd text_token =
        text_.forward(store_, embedder, text, frame_number, cache ? &text_cache : nullptr);

    nn::Mat tokens(1 + w, cfg_.width);
    tokens.row(0) = text_token.transpose();
    tokens.bottomRows(w) = frame_in_.forward(store_, seg_std);
    tokens += nn::positional_encoding(1 + w, cfg_.width);

    nn::EncoderCache enc_cache;
    const nn::Mat out = enc_.forward(store_, tokens, cache ? &enc_cache : nullptr);
    const double z = head_.forward(store_, out.row(0))(0, 0);
    if (cache) {
        cache->text = std::move(text_cache);
        cache->frames_std = seg_std;
        cache->tokens = tokens;
        cache->enc = std::move(enc_cache);
        cache->enc_out = out;
    }
    return z;
}

double SchedulerModel::predict_stage_end(const TextEmbedder& embedder,
                                         const MotionSegment& seg_world, double frame_number,
                                         const std::string& text) const {
    const auto [canon, frame] = canonicalize(seg_world);
    nn::Mat seg_std = canon.positions;
    seg_std.rowwise() -= mean_.transpose();
    seg_std.array().rowwise() /= std_.transpose().array();
    const double z = logit(embedder, seg_std, frame_number, text, nullptr);
    return 1.0 / (1.0 + std::exp(-z));
}

double SchedulerModel::example_loss(const TextEmbedder& embedder, const SchedulerExample& ex,
                                    nn::GradBuffer* gb) const {
    const auto [canon, frame] = canonicalize(ex.segment_world);
    nn::Mat seg_std = canon.positions;
    seg_std.rowwise() -= mean_.transpose();
    seg_std.array().rowwise() /= std_.transpose().array();

    SchedulerCache cache;
    const double z = logit(embedder, seg_std, ex.frame_number, ex.text, gb ? &cache : nullptr);
    const double p = 1.0 / (1.0 + std::exp(-z));
    const double y = ex.stage_end ? 1.0 : 0.0;
    const double eps = 1e-12;
    const double loss = -(y * std::log(p + eps) + (1.0 - y) * std::log(1.0 - p + eps));

    if (gb) {
        const double dz = p - y;
        nn::Mat dhead = nn::Mat::Constant(1, 1, dz);
        const nn::Mat dout_row = head_.backward(store_, cache.enc_out.row(0), dhead, *gb);
        nn::Mat denc = nn::Mat::Zero(cache.enc_out.rows(), cfg_.width);
        denc.row(0) = dout_row;
        const nn::Mat dtokens = enc_.backward(store_, cache.enc, denc, *gb);
        text_.backward(store_, cache.text, dtokens.row(0).transpose(), *gb);
        frame_in_.backward(store_, cache.frames_std, dtokens.bottomRows(seg_std.rows()), *gb);
    }
    return loss;
}

std::vector<double> train_scheduler(SchedulerModel& model, const TextEmbedder& embedder,
                                    const std::vector<SchedulerExample>& examples,
                                    const SchedulerTrainOptions& opts, Rng& rng, nn::Adam& adam) {
    if (examples.empty()) throw std::runtime_error("train_scheduler: empty dataset");

    if (!model.has_stats()) {
        Eigen::VectorXd mean = Eigen::VectorXd::Zero(kMotionDim);
        std::int64_t rows = 0;
        std::vector<nn::Mat> canon;
        canon.reserve(examples.size());
        for (const auto& ex : examples) {
            canon.push_back(canonicalize(ex.segment_world).first.positions);
            mean += canon.back().colwise().sum().transpose();
            rows += canon.back().rows();
        }
        mean /= static_cast<double>(rows);
        Eigen::VectorXd var = Eigen::VectorXd::Zero(kMotionDim);
        for (const auto& c : canon) {
            const nn::Mat centered = c.rowwise() - mean.transpose();
            var += centered.array().square().colwise().sum().matrix().transpose();
        }
        var /= static_cast<double>(rows);
        model.set_stats(mean, var.cwiseSqrt());
    }
    adam.set_lr(opts.lr);

    std::vector<int> pos, neg;
    for (std::size_t i = 0; i < examples.size(); ++i)
        (examples[i].stage_end ? pos : neg).push_back(static_cast<int>(i));
    if (pos.empty() || neg.empty())
        throw std::runtime_error("train_scheduler: need both positive and negative labels");

#ifdef _OPENMP
    const int n_threads = omp_get_max_threads();
#else
    const int n_threads = 1;
#endif
    std::vector<nn::GradBuffer> thread_grads(n_threads, nn::GradBuffer(model.params()));
    nn::GradBuffer total(model.params());

    const int batches_per_epoch =
        std::max<int>(1, static_cast<int>(examples.size()) / opts.batch);
    std::vector<int> batch_idx(opts.batch);
    std::vector<double> losses(opts.batch);

    std::vector<double> epoch_losses;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        double loss_sum = 0.0;
        for (int b = 0; b < batches_per_epoch; ++b) {
            // balanced batch: half positive, half negative
            for (int k = 0; k < opts.batch; ++k) {
                const bool take_pos = k % 2 == 0;
                const auto& pool = take_pos ? pos : neg;
                batch_idx[k] = pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)];
            }
            for (auto& g : thread_grads) g.zero();

#pragma omp parallel for schedule(static)
            for (int k = 0; k < opts.batch; ++k) {
#ifdef _OPENMP
                const int tid = omp_get_thread_num();
#else
                const int tid = 0;
#endif
                losses[k] = model.example_loss(embedder, examples[batch_idx[k]], &thread_grads[tid]);
            }

            total.zero();
            for (const auto& g : thread_grads) total.add(g);
            total.scale(1.0 / opts.batch);
            adam.step(model.params(), total);
            loss_sum += std::accumulate(losses.begin(), losses.begin() + opts.batch, 0.0) / opts.batch;
        }
        const double mean_loss = loss_sum / batches_per_epoch;
        epoch_losses.push_back(mean_loss);
        if (opts.on_epoch) opts.on_epoch(epoch, mean_loss);
    }
    return epoch_losses;
}

double scheduler_accuracy(const SchedulerModel& model, const TextEmbedder& embedder,
                          const std::vector<SchedulerExample>& examples, double threshold) {
    if (examples.empty()) return 0.0;
    std::vector<int> correct(examples.size(), 0);
    const int n = static_cast<int>(examples.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double p = model.predict_stage_end(embedder, examples[i].segment_world,
                                                 examples[i].frame_number, examples[i].text);
        correct[i] = (p >= threshold) == examples[i].stage_end;
    }
    return std::accumulate(correct.begin(), correct.end(), 0.0) / n;
}

}  // namespace scenemotion
