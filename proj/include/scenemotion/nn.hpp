#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scenemotion/rng.hpp"

namespace scenemotion {
class ArrayContainer;
}

namespace scenemotion::nn {

using Mat = Eigen::MatrixXd;  // rows = tokens, cols = features

// ---------------------------------------------------------------------------
// Parameter storage. Weights live in one flat registry so optimizers,
// checkpoints and per-thread gradient buffers stay trivial.

class ParamStore {
public:
    int add(const std::string& name, int rows, int cols, double init_scale, Rng& rng);

    Mat& value(int id) { return values_[id]; }
    const Mat& value(int id) const { return values_[id]; }
    const std::string& name(int id) const { return names_[id]; }
    int count() const { return static_cast<int>(values_.size()); }
    std::int64_t total_size() const;

    void write_to(ArrayContainer& c, const std::string& prefix) const;
    void read_from(const ArrayContainer& c, const std::string& prefix);

private:
    std::vector<Mat> values_;
    std::vector<std::string> names_;
};

struct GradBuffer {
    std::vector<Mat> g;

    explicit GradBuffer(const ParamStore& store);
    void zero();
    void add(const GradBuffer& other);
    void scale(double s);
};

// ---------------------------------------------------------------------------
// Layers. forward() is const over the store; backward() consumes the cache
// produced by the matching forward and accumulates parameter gradients.

class Linear {
public:
    Linear() = default;
    Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng);

    Mat forward(const ParamStore& s, const Mat& x) const;
    Mat backward(const ParamStore& s, const Mat& x, const Mat& dy, GradBuffer& gb) const;

    int in_dim(const ParamStore& s) const { return static_cast<int>(s.value(w_).rows()); }
    int out_dim(const ParamStore& s) const { return static_cast<int>(s.value(w_).cols()); }
    int weight_id() const { return w_; }
    int bias_id() const { return b_; }

private:
    int w_ = -1, b_ = -1;
};

struct LayerNormCache {
    Mat xhat;
    Eigen::VectorXd rstd;
};

class LayerNorm {
public:
    LayerNorm() = default;
    LayerNorm(ParamStore& store, const std::string& name, int dim, Rng& rng);

    Mat forward(const ParamStore& s, const Mat& x, LayerNormCache* cache = nullptr) const;
    Mat backward(const ParamStore& s, const LayerNormCache& cache, const Mat& dy,
                 GradBuffer& gb) const;

private:
    int gamma_ = -1, beta_ = -1;
};

Mat gelu(const Mat& x);
Mat gelu_backward(const Mat& x, const Mat& dy);

struct AttentionCache {
    Mat x;                       // input
    Mat qkv;                     // tokens x 3d
    std::vector<Mat> att;        // per head, tokens x tokens (softmax weights)
    Mat merged;                  // tokens x d, pre out-projection
};

class SelfAttention {
public:
    SelfAttention() = default;
    SelfAttention(ParamStore& store, const std::string& name, int dim, int heads, Rng& rng);

    Mat forward(const ParamStore& s, const Mat& x, AttentionCache* cache = nullptr) const;
    Mat backward(const ParamStore& s, const AttentionCache& cache, const Mat& dy,
                 GradBuffer& gb) const;

private:
    Linear qkv_, out_;
    int heads_ = 1;
};

struct BlockCache {
    LayerNormCache ln1, ln2;
    AttentionCache att;
    Mat h;         // after attention residual
    Mat ffn_in;    // ln2 output
    Mat ffn_mid;   // pre-gelu
    Mat gelu_out;
};

// Pre-norm transformer block: x + att(ln1(x)), then h + ffn(ln2(h)).
class TransformerBlock {
public:
    TransformerBlock() = default;
    TransformerBlock(ParamStore& store, const std::string& name, int dim, int heads, Rng& rng);

    Mat forward(const ParamStore& s, const Mat& x, BlockCache* cache = nullptr) const;
    Mat backward(const ParamStore& s, const BlockCache& cache, const Mat& dy,
                 GradBuffer& gb) const;

private:
    LayerNorm ln1_, ln2_;
    SelfAttention att_;
    Linear ffn1_, ffn2_;
};

struct EncoderCache {
    std::vector<BlockCache> blocks;
    LayerNormCache ln_f;
};

class TransformerEncoder {
public:
    TransformerEncoder() = default;
    TransformerEncoder(ParamStore& store, const std::string& name, int dim, int layers, int heads,
                       Rng& rng);

    Mat forward(const ParamStore& s, const Mat& x, EncoderCache* cache = nullptr) const;
    Mat backward(const ParamStore& s, const EncoderCache& cache, const Mat& dy,
                 GradBuffer& gb) const;

    int layers() const { return static_cast<int>(blocks_.size()); }

private:
    std::vector<TransformerBlock> blocks_;
    LayerNorm ln_f_;
};

// ---------------------------------------------------------------------------
// 1d convolution over time (rows = time, cols = channels), zero padded.

struct Conv1dCache {
    Mat x;
};

class Conv1d {
public:
    Conv1d() = default;
    Conv1d(ParamStore& store, const std::string& name, int in_ch, int out_ch, int kernel,
           int stride, Rng& rng);

    Mat forward(const ParamStore& s, const Mat& x, Conv1dCache* cache = nullptr) const;
    Mat backward(const ParamStore& s, const Conv1dCache& cache, const Mat& dy,
                 GradBuffer& gb) const;

private:
    int w_ = -1, b_ = -1;  // w: (kernel*in_ch) x out_ch
    int kernel_ = 1, stride_ = 1;
};

// ---------------------------------------------------------------------------

// Interleaved sin/cos positional encoding, base period 10000.
Eigen::VectorXd sinusoidal_embedding(double position, int dim);
// One row per token index [0, count).
Mat positional_encoding(int count, int dim);

class Adam {
public:
    Adam() = default;
    Adam(const ParamStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-8);

    void step(ParamStore& store, const GradBuffer& grads);
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    std::int64_t steps() const { return t_; }

    void write_to(ArrayContainer& c, const std::string& prefix) const;
    void read_from(const ArrayContainer& c, const std::string& prefix);

private:
    std::vector<Mat> m_, v_;
    double lr_ = 1e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    std::int64_t t_ = 0;
};

}  // namespace scenemotion::nn
