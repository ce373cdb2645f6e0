#include "scenemotion/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "scenemotion/container.hpp"

namespace scenemotion::nn {

namespace {
constexpr double kSqrt2Pi = 2.506628274631000502;
}

// ---------------------------------------------------------------------------
// ParamStore

int ParamStore::add(const std::string& name, int rows, int cols, double init_scale, Rng& rng) {
    Mat m(rows, cols);
    if (init_scale == 0.0) {
        m.setZero();
    } else {
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) m(i, j) = init_scale * rng.gaussian();
    }
    values_.push_back(std::move(m));
    names_.push_back(name);
    return static_cast<int>(values_.size()) - 1;
}

std::int64_t ParamStore::total_size() const {
    std::int64_t n = 0;
    for (const auto& m : values_) n += m.size();
    return n;
}

void ParamStore::write_to(ArrayContainer& c, const std::string& prefix) const {
    auto names = nlohmann::json::array();
    for (int i = 0; i < count(); ++i) {
        const Mat& m = values_[i];
        std::vector<double> flat(m.data(), m.data() + m.size());
        c.put_f8(prefix + names_[i], flat, {m.rows(), m.cols()});
        names.push_back(names_[i]);
    }
    c.meta[prefix + "param_names"] = names;
}

void ParamStore::read_from(const ArrayContainer& c, const std::string& prefix) {
    const auto names = c.meta.at(prefix + "param_names").get<std::vector<std::string>>();
    if (static_cast<int>(names.size()) != count())
        throw std::runtime_error("checkpoint: parameter count mismatch");
    for (int i = 0; i < count(); ++i) {
        if (names[i] != names_[i])
            throw std::runtime_error("checkpoint: parameter name mismatch at " + names_[i]);
        const auto& a = c.array(prefix + names_[i]);
        if (a.shape.size() != 2 || a.shape[0] != values_[i].rows() || a.shape[1] != values_[i].cols())
            throw std::runtime_error("checkpoint: shape mismatch at " + names_[i]);
        const auto flat = c.get_f8(prefix + names_[i]);
        std::copy(flat.begin(), flat.end(), values_[i].data());
    }
}

GradBuffer::GradBuffer(const ParamStore& store) {
    g.reserve(store.count());
    for (int i = 0; i < store.count(); ++i)
        g.emplace_back(Mat::Zero(store.value(i).rows(), store.value(i).cols()));
}

void GradBuffer::zero() {
    for (auto& m : g) m.setZero();
}

void GradBuffer::add(const GradBuffer& other) {
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += other.g[i];
}

void GradBuffer::scale(double s) {
    for (auto& m : g) m *= s;
}

// ---------------------------------------------------------------------------
// Linear

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng) {
    w_ = store.add(name + ".w", in, out, 1.0 / std::sqrt(static_cast<double>(in)), rng);
    b_ = store.add(name + ".b", 1, out, 0.0, rng);
}

Mat Linear::forward(const ParamStore& s, const Mat& x) const {
    return (x * s.value(w_)).rowwise() + s.value(b_).row(0);
}

Mat Linear::backward(const ParamStore& s, const Mat& x, const Mat& dy, GradBuffer& gb) const {
    gb.g[w_].noalias() += x.transpose() * dy;
    gb.g[b_].row(0) += dy.colwise().sum();
    return dy * s.value(w_).transpose();
}

// ---------------------------------------------------------------------------
// LayerNorm

LayerNorm::LayerNorm(ParamStore& store, const std::string& name, int dim, Rng& rng) {
    gamma_ = store.add(name + ".gamma", 1, dim, 0.0, rng);
    beta_ = store.add(name + ".beta", 1, dim, 0.0, rng);
    store.value(gamma_).setOnes();
}

Mat LayerNorm::forward(const ParamStore& s, const Mat& x, LayerNormCache* cache) const {
    const int d = static_cast<int>(x.cols());
    Mat xhat(x.rows(), d);
    Eigen::VectorXd rstd(x.rows());
    for (int i = 0; i < x.rows(); ++i) {
        const double mean = x.row(i).mean();
        const auto centered = x.row(i).array() - mean;
        const double var = centered.square().sum() / d;
        const double r = 1.0 / std::sqrt(var + 1e-5);
        xhat.row(i) = centered * r;
        rstd(i) = r;
    }
    Mat y = (xhat.array().rowwise() * s.value(gamma_).row(0).array()).rowwise() +
            s.value(beta_).row(0).array();
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->rstd = std::move(rstd);
        return y;
    }
    return y;
}

Mat LayerNorm::backward(const ParamStore& s, const LayerNormCache& cache, const Mat& dy,
                        GradBuffer& gb) const {
    const auto& xhat = cache.xhat;
    const int d = static_cast<int>(dy.cols());
    gb.g[gamma_].row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
    gb.g[beta_].row(0) += dy.colwise().sum();

    Mat dx(dy.rows(), d);
    const auto gamma = s.value(gamma_).row(0).array();
    for (int i = 0; i < dy.rows(); ++i) {
        const auto dyg = dy.row(i).array() * gamma;
        const double a = dyg.sum() / d;
        const double b = (dyg * xhat.row(i).array()).sum() / d;
        dx.row(i) = (dyg - a - xhat.row(i).array() * b) * cache.rstd(i);
    }
    return dx;
}

// ---------------------------------------------------------------------------
// GELU (erf form)

Mat gelu(const Mat& x) {
    return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)); });
}

Mat gelu_backward(const Mat& x, const Mat& dy) {
    Mat dx = x;
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) {
            const double v = x(i, j);
            const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
            const double pdf = std::exp(-0.5 * v * v) / kSqrt2Pi;
            dx(i, j) = dy(i, j) * (cdf + v * pdf);
        }
    return dx;
}

// ---------------------------------------------------------------------------
// Self attention

SelfAttention::SelfAttention(ParamStore& store, const std::string& name, int dim, int heads,
                             Rng& rng)
    : heads_(heads) {
    if (dim % heads != 0) throw std::runtime_error("attention: dim must divide heads");
    qkv_ = Linear(store, name + ".qkv", dim, 3 * dim, rng);
    out_ = Linear(store, name + ".out", dim, dim, rng);
}

Mat SelfAttention::forward(const ParamStore& s, const Mat& x, AttentionCache* cache) const {
    const int n = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    const int dh = d / heads_;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const Mat qkv = qkv_.forward(s, x);
    Mat merged(n, d);
    std::vector<Mat> att;
    if (cache) att.reserve(heads_);

    for (int h = 0; h < heads_; ++h) {
        const auto q = qkv.middleCols(h * dh, dh);
        const auto k = qkv.middleCols(d + h * dh, dh);
        const auto v = qkv.middleCols(2 * d + h * dh, dh);
        Mat scores = (q * k.transpose()) * scale;
        for (int i = 0; i < n; ++i) {
            const double mx = scores.row(i).maxCoeff();
            scores.row(i) = (scores.row(i).array() - mx).exp();
            scores.row(i) /= scores.row(i).sum();
        }
        merged.middleCols(h * dh, dh) = scores * v;
        if (cache) att.push_back(std::move(scores));
    }
    const Mat y = out_.forward(s, merged);
    if (cache) {
        cache->x = x;
        cache->qkv = qkv;
        cache->att = std::move(att);
        cache->merged = std::move(merged);
    }
    return y;
}

Mat SelfAttention::backward(const ParamStore& s, const AttentionCache& cache, const Mat& dy,
                            GradBuffer& gb) const {
    const int n = static_cast<int>(cache.x.rows());
    const int d = static_cast<int>(cache.x.cols());
    const int dh = d / heads_;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const Mat dmerged = out_.backward(s, cache.merged, dy, gb);
    Mat dqkv = Mat::Zero(n, 3 * d);

    for (int h = 0; h < heads_; ++h) {
        const auto q = cache.qkv.middleCols(h * dh, dh);
        const auto k = cache.qkv.middleCols(d + h * dh, dh);
        const auto v = cache.qkv.middleCols(2 * d + h * dh, dh);
        const Mat& a = cache.att[h];
        const auto dm = dmerged.middleCols(h * dh, dh);

        dqkv.middleCols(2 * d + h * dh, dh).noalias() += a.transpose() * dm;  // dv
        Mat da = dm * v.transpose();
        // softmax backward per row
        for (int i = 0; i < n; ++i) {
            const double dot = da.row(i).dot(a.row(i));
            da.row(i) = a.row(i).array() * (da.row(i).array() - dot);
        }
        dqkv.middleCols(h * dh, dh).noalias() += (da * k) * scale;             // dq
        dqkv.middleCols(d + h * dh, dh).noalias() += (da.transpose() * q) * scale;  // dk
    }
    return qkv_.backward(s, cache.x, dqkv, gb);
}

// ---------------------------------------------------------------------------
// Transformer block / encoder

TransformerBlock::TransformerBlock(ParamStore& store, const std::string& name, int dim, int heads,
                                   Rng& rng) {
    ln1_ = LayerNorm(store, name + ".ln1", dim, rng);
    att_ = SelfAttention(store, name + ".att", dim, heads, rng);
    ln2_ = LayerNorm(store, name + ".ln2", dim, rng);
    ffn1_ = Linear(store, name + ".ffn1", dim, 4 * dim, rng);
    ffn2_ = Linear(store, name + ".ffn2", 4 * dim, dim, rng);
}

Mat TransformerBlock::forward(const ParamStore& s, const Mat& x, BlockCache* cache) const {
    LayerNormCache ln1c;
    const Mat n1 = ln1_.forward(s, x, cache ? &ln1c : nullptr);
    AttentionCache attc;
    const Mat a = att_.forward(s, n1, cache ? &attc : nullptr);
    const Mat h = x + a;

    LayerNormCache ln2c;
    const Mat n2 = ln2_.forward(s, h, cache ? &ln2c : nullptr);
    const Mat mid = ffn1_.forward(s, n2);
    const Mat act = gelu(mid);
    const Mat y = h + ffn2_.forward(s, act);

    if (cache) {
        cache->ln1 = std::move(ln1c);
        cache->ln2 = std::move(ln2c);
        cache->att = std::move(attc);
        cache->h = h;
        cache->ffn_in = n2;
        cache->ffn_mid = mid;
        cache->gelu_out = act;
    }
    return y;
}

Mat TransformerBlock::backward(const ParamStore& s, const BlockCache& cache, const Mat& dy,
                               GradBuffer& gb) const {
    // ffn branch
    const Mat dact = ffn2_.backward(s, cache.gelu_out, dy, gb);
    const Mat dmid = gelu_backward(cache.ffn_mid, dact);
    const Mat dn2 = ffn1_.backward(s, cache.ffn_in, dmid, gb);
    Mat dh = ln2_.backward(s, cache.ln2, dn2, gb);
    dh += dy;  // residual

    // attention branch
    const Mat dn1 = att_.backward(s, cache.att, dh, gb);
    Mat dx = ln1_.backward(s, cache.ln1, dn1, gb);
    dx += dh;  // residual
    return dx;
}

TransformerEncoder::TransformerEncoder(ParamStore& store, const std::string& name, int dim,
                                       int layers, int heads, Rng& rng) {
    for (int i = 0; i < layers; ++i)
        blocks_.emplace_back(store, name + ".block" + std::to_string(i), dim, heads, rng);
    ln_f_ = LayerNorm(store, name + ".lnf", dim, rng);
}

Mat TransformerEncoder::forward(const ParamStore& s, const Mat& x, EncoderCache* cache) const {
    if (cache) cache->blocks.resize(blocks_.size());
    Mat h = x;
    for (std::size_t i = 0; i < blocks_.size(); ++i)
        h = blocks_[i].forward(s, h, cache ? &cache->blocks[i] : nullptr);
    return ln_f_.forward(s, h, cache ? &cache->ln_f : nullptr);
}

Mat TransformerEncoder::backward(const ParamStore& s, const EncoderCache& cache, const Mat& dy,
                                 GradBuffer& gb) const {
    Mat d = ln_f_.backward(s, cache.ln_f, dy, gb);
    for (int i = static_cast<int>(blocks_.size()) - 1; i >= 0; --i)
        d = blocks_[i].backward(s, cache.blocks[i], d, gb);
    return d;
}

// ---------------------------------------------------------------------------
// Conv1d

Conv1d::Conv1d(ParamStore& store, const std::string& name, int in_ch, int out_ch, int kernel,
               int stride, Rng& rng)
    : kernel_(kernel), stride_(stride) {
    w_ = store.add(name + ".w", kernel * in_ch, out_ch,
                   1.0 / std::sqrt(static_cast<double>(kernel * in_ch)), rng);
    b_ = store.add(name + ".b", 1, out_ch, 0.0, rng);
}

Mat Conv1d::forward(const ParamStore& s, const Mat& x, Conv1dCache* cache) const {
    const int t_in = static_cast<int>(x.rows());
    const int in_ch = static_cast<int>(x.cols());
    const int t_out = (t_in + stride_ - 1) / stride_;
    const int pad = kernel_ / 2;
    const Mat& w = s.value(w_);
    Mat y(t_out, w.cols());
    for (int t = 0; t < t_out; ++t) {
        Eigen::RowVectorXd window = Eigen::RowVectorXd::Zero(kernel_ * in_ch);
        for (int k = 0; k < kernel_; ++k) {
            const int src = t * stride_ + k - pad;
            if (src >= 0 && src < t_in) window.segment(k * in_ch, in_ch) = x.row(src);
        }
        y.row(t) = window * w + s.value(b_).row(0);
    }
    if (cache) cache->x = x;
    return y;
}

Mat Conv1d::backward(const ParamStore& s, const Conv1dCache& cache, const Mat& dy,
                     GradBuffer& gb) const {
    const Mat& x = cache.x;
    const int t_in = static_cast<int>(x.rows());
    const int in_ch = static_cast<int>(x.cols());
    const int pad = kernel_ / 2;
    const Mat& w = s.value(w_);
    Mat dx = Mat::Zero(t_in, in_ch);
    for (int t = 0; t < dy.rows(); ++t) {
        gb.g[b_].row(0) += dy.row(t);
        const Eigen::RowVectorXd dwin = dy.row(t) * w.transpose();
        for (int k = 0; k < kernel_; ++k) {
            const int src = t * stride_ + k - pad;
            if (src < 0 || src >= t_in) continue;
            gb.g[w_].middleRows(k * in_ch, in_ch).noalias() +=
                x.row(src).transpose() * dy.row(t);
            dx.row(src) += dwin.segment(k * in_ch, in_ch);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd sinusoidal_embedding(double position, int dim) {
    Eigen::VectorXd e(dim);
    for (int i = 0; i < dim / 2; ++i) {
        const double freq = std::pow(10000.0, -2.0 * i / dim);
        e(2 * i) = std::sin(position * freq);
        e(2 * i + 1) = std::cos(position * freq);
    }
    if (dim % 2) e(dim - 1) = 0.0;
    return e;
}

Mat positional_encoding(int count, int dim) {
    Mat p(count, dim);
    for (int i = 0; i < count; ++i) p.row(i) = sinusoidal_embedding(i, dim).transpose();
    return p;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(const ParamStore& store, double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (int i = 0; i < store.count(); ++i) {
        m_.emplace_back(Mat::Zero(store.value(i).rows(), store.value(i).cols()));
        v_.emplace_back(Mat::Zero(store.value(i).rows(), store.value(i).cols()));
    }
}

void Adam::step(ParamStore& store, const GradBuffer& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (int i = 0; i < store.count(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads.g[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads.g[i].cwiseProduct(grads.g[i]);
        const Mat mhat = m_[i] / bc1;
        const Mat vhat = v_[i] / bc2;
        store.value(i).array() -= lr_ * mhat.array() / (vhat.array().sqrt() + eps_);
    }
}

void Adam::write_to(ArrayContainer& c, const std::string& prefix) const {
    for (std::size_t i = 0; i < m_.size(); ++i) {
        std::vector<double> mflat(m_[i].data(), m_[i].data() + m_[i].size());
        std::vector<double> vflat(v_[i].data(), v_[i].data() + v_[i].size());
        c.put_f8(prefix + "m" + std::to_string(i), mflat, {m_[i].rows(), m_[i].cols()});
        c.put_f8(prefix + "v" + std::to_string(i), vflat, {v_[i].rows(), v_[i].cols()});
    }
    c.meta[prefix + "t"] = t_;
    c.meta[prefix + "lr"] = lr_;
}

void Adam::read_from(const ArrayContainer& c, const std::string& prefix) {
    for (std::size_t i = 0; i < m_.size(); ++i) {
        const auto mflat = c.get_f8(prefix + "m" + std::to_string(i));
        const auto vflat = c.get_f8(prefix + "v" + std::to_string(i));
        std::copy(mflat.begin(), mflat.end(), m_[i].data());
        std::copy(vflat.begin(), vflat.end(), v_[i].data());
    }
    t_ = c.meta.at(prefix + "t").get<std::int64_t>();
    lr_ = c.meta.at(prefix + "lr").get<double>();
}

}  // namespace scenemotion::nn
