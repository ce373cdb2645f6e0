#include "scenemotion/featurizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace scenemotion {

struct FeaturizerCache {
    nn::Conv1dCache c1, c2, c3, c4;
    nn::Mat m1, m2, m3, m4;  // pre-gelu activations
    int t_out = 0;
};

MotionFeaturizer::MotionFeaturizer(const FeaturizerConfig& cfg, int n_classes, Rng& rng)
    : cfg_(cfg), n_classes_(n_classes) {
    conv1_ = nn::Conv1d(store_, "feat.conv1", kMotionDim, cfg.channels1, 5, 2, rng);
    conv2_ = nn::Conv1d(store_, "feat.conv2", cfg.channels1, cfg.channels2, 5, 2, rng);
    conv3_ = nn::Conv1d(store_, "feat.conv3", cfg.channels2, cfg.feature_dim, 3, 1, rng);
    conv4_ = nn::Conv1d(store_, "feat.conv4", cfg.feature_dim, cfg.feature_dim, 3, 1, rng);
    head_ = nn::Linear(store_, "feat.head", cfg.feature_dim, n_classes, rng);
}

Eigen::VectorXd MotionFeaturizer::pooled(const nn::Mat& canon, FeaturizerCache* cache) const {
    FeaturizerCache local;
    FeaturizerCache* c = cache ? cache : &local;
    c->m1 = conv1_.forward(store_, canon, &c->c1);
    const nn::Mat a1 = nn::gelu(c->m1);
    c->m2 = conv2_.forward(store_, a1, &c->c2);
    const nn::Mat a2 = nn::gelu(c->m2);
    c->m3 = conv3_.forward(store_, a2, &c->c3);
    const nn::Mat a3 = nn::gelu(c->m3);
    c->m4 = conv4_.forward(store_, a3, &c->c4);
    const nn::Mat a4 = nn::gelu(c->m4);
    c->t_out = static_cast<int>(a4.rows());
    return a4.colwise().mean().transpose();
}

Eigen::VectorXd MotionFeaturizer::features(const FrameMatrix& clip_world) const {
    MotionSegment seg;
    seg.positions = clip_world;
    const auto [canon, frame] = canonicalize(seg);
    return pooled(canon.positions, nullptr);
}

int MotionFeaturizer::classify(const FrameMatrix& clip_world) const {
    const Eigen::VectorXd f = features(clip_world);
    const nn::Mat logits = head_.forward(store_, f.transpose());
    int best = 0;
    logits.row(0).maxCoeff(&best);
    return best;
}

double MotionFeaturizer::example_loss(const FrameMatrix& clip_world, int label,
                                      nn::GradBuffer* gb) const {
    MotionSegment seg;
    seg.positions = clip_world;
    const auto [canon, frame] = canonicalize(seg);

    FeaturizerCache cache;
    const Eigen::VectorXd f = pooled(canon.positions, gb ? &cache : nullptr);
    const nn::Mat logits = head_.forward(store_, f.transpose());

    // softmax cross entropy
    const double mx = logits.row(0).maxCoeff();
    Eigen::RowVectorXd p = (logits.row(0).array() - mx).exp();
    p /= p.sum();
    const double loss = -std::log(std::max(p(label), 1e-12));

    if (gb) {
        Eigen::RowVectorXd dlogits = p;
        dlogits(label) -= 1.0;
        const nn::Mat df = head_.backward(store_, f.transpose(), dlogits, *gb);
        // back through mean pooling and the conv stack
        const nn::Mat da4 = (df.row(0) / cache.t_out).replicate(cache.t_out, 1);
        const nn::Mat dm4 = nn::gelu_backward(cache.m4, da4);
        const nn::Mat da3 = conv4_.backward(store_, cache.c4, dm4, *gb);
        const nn::Mat dm3 = nn::gelu_backward(cache.m3, da3);
        const nn::Mat da2 = conv3_.backward(store_, cache.c3, dm3, *gb);
        const nn::Mat dm2 = nn::gelu_backward(cache.m2, da2);
        const nn::Mat da1 = conv2_.backward(store_, cache.c2, dm2, *gb);
        const nn::Mat dm1 = nn::gelu_backward(cache.m1, da1);
        conv1_.backward(store_, cache.c1, dm1, *gb);
    }
    return loss;
}

std::vector<double> train_featurizer(MotionFeaturizer& model,
                                     const std::vector<LabeledMotion>& examples,
                                     const FeaturizerTrainOptions& opts, Rng& rng,
                                     nn::Adam& adam) {
    if (examples.empty()) throw std::runtime_error("train_featurizer: empty dataset");
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
    std::vector<double> losses(opts.batch);
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng shuffle_rng = rng.child(0x0bf5u + static_cast<std::uint64_t>(epoch));
        for (int i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle_rng.uniform_int(0, i)]);
        double loss_sum = 0.0;
        int batches = 0;
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
                losses[k] = model.example_loss(ex.positions, ex.label, &thread_grads[tid]);
            }
            total.zero();
            for (const auto& g : thread_grads) total.add(g);
            total.scale(1.0 / count);
            adam.step(model.params(), total);
            loss_sum += std::accumulate(losses.begin(), losses.begin() + count, 0.0) / count;
            ++batches;
        }
        epoch_losses.push_back(loss_sum / std::max(1, batches));
        if (opts.on_epoch) opts.on_epoch(epoch, epoch_losses.back());
    }
    return epoch_losses;
}

double featurizer_accuracy(const MotionFeaturizer& model,
                           const std::vector<LabeledMotion>& examples) {
    if (examples.empty()) return 0.0;
    const int n = static_cast<int>(examples.size());
    std::vector<int> correct(n, 0);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        correct[i] = model.classify(examples[i].positions) == examples[i].label;
    return std::accumulate(correct.begin(), correct.end(), 0.0) / n;
}

}  // namespace scenemotion
