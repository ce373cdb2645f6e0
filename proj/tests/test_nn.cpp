#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "scenemotion/container.hpp"
#include "scenemotion/nn.hpp"

using namespace scenemotion;
using namespace scenemotion::nn;

namespace {

// Central finite differences over every parameter entry; returns the largest
// relative error against the analytic gradient.
double max_grad_rel_error(ParamStore& store, const GradBuffer& analytic,
                          const std::function<double()>& loss, double h = 1e-5) {
    double worst = 0.0;
    for (int p = 0; p < store.count(); ++p) {
        Mat& w = store.value(p);
        for (int i = 0; i < w.rows(); ++i) {
            for (int j = 0; j < w.cols(); ++j) {
                const double keep = w(i, j);
                w(i, j) = keep + h;
                const double up = loss();
                w(i, j) = keep - h;
                const double dn = loss();
                w(i, j) = keep;
                const double fd = (up - dn) / (2 * h);
                const double an = analytic.g[p](i, j);
                // the floor absorbs finite-difference noise on (near) zero
                // gradients, e.g. key biases that cancel inside softmax
                const double denom = std::max({std::abs(fd), std::abs(an), 1e-2});
                worst = std::max(worst, std::abs(fd - an) / denom);
            }
        }
    }
    return worst;
}

Mat random_mat(Rng& rng, int r, int c, double scale = 1.0) {
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = scale * rng.gaussian();
    return m;
}

}  // namespace

TEST_CASE("linear: gradient matches finite differences") {
    Rng rng(1);
    ParamStore store;
    Linear lin(store, "lin", 5, 3, rng);
    const Mat x = random_mat(rng, 4, 5);
    const Mat target = random_mat(rng, 4, 3);

    auto loss = [&] { return (lin.forward(store, x) - target).squaredNorm(); };
    GradBuffer gb(store);
    const Mat y = lin.forward(store, x);
    lin.backward(store, x, 2.0 * (y - target), gb);
    CHECK(max_grad_rel_error(store, gb, loss) < 1e-6);
}

TEST_CASE("layernorm: gradient matches finite differences") {
    Rng rng(2);
    ParamStore store;
    LayerNorm ln(store, "ln", 6, rng);
    const Mat x = random_mat(rng, 3, 6, 2.0);
    const Mat target = random_mat(rng, 3, 6);

    auto loss = [&] { return (ln.forward(store, x) - target).squaredNorm(); };
    GradBuffer gb(store);
    LayerNormCache cache;
    const Mat y = ln.forward(store, x, &cache);
    ln.backward(store, cache, 2.0 * (y - target), gb);
    CHECK(max_grad_rel_error(store, gb, loss) < 1e-6);
}

TEST_CASE("layernorm: input gradient matches finite differences") {
    Rng rng(3);
    ParamStore store;
    LayerNorm ln(store, "ln", 5, rng);
    Mat x = random_mat(rng, 2, 5, 1.5);
    const Mat target = random_mat(rng, 2, 5);

    GradBuffer gb(store);
    LayerNormCache cache;
    const Mat y = ln.forward(store, x, &cache);
    const Mat dx = ln.backward(store, cache, 2.0 * (y - target), gb);

    const double h = 1e-6;
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) {
            const double keep = x(i, j);
            x(i, j) = keep + h;
            const double up = (ln.forward(store, x) - target).squaredNorm();
            x(i, j) = keep - h;
            const double dn = (ln.forward(store, x) - target).squaredNorm();
            x(i, j) = keep;
            const double fd = (up - dn) / (2 * h);
            CHECK(std::abs(fd - dx(i, j)) < 1e-5 * std::max(1.0, std::abs(fd)));
        }
}

TEST_CASE("attention: gradients match finite differences") {
    Rng rng(4);
    ParamStore store;
    SelfAttention att(store, "att", 8, 2, rng);
    const Mat x = random_mat(rng, 5, 8);
    const Mat target = random_mat(rng, 5, 8);

    auto loss = [&] { return (att.forward(store, x) - target).squaredNorm(); };
    GradBuffer gb(store);
    AttentionCache cache;
    const Mat y = att.forward(store, x, &cache);
    att.backward(store, cache, 2.0 * (y - target), gb);
    CHECK(max_grad_rel_error(store, gb, loss) < 1e-5);
}

TEST_CASE("transformer encoder: gradients match finite differences") {
    Rng rng(5);
    ParamStore store;
    TransformerEncoder enc(store, "enc", 8, 2, 2, rng);
    const Mat x = random_mat(rng, 4, 8);
    const Mat target = random_mat(rng, 4, 8);

    auto loss = [&] { return (enc.forward(store, x) - target).squaredNorm(); };
    GradBuffer gb(store);
    EncoderCache cache;
    const Mat y = enc.forward(store, x, &cache);
    const Mat dx = enc.backward(store, cache, 2.0 * (y - target), gb);
    CHECK(dx.rows() == x.rows());
    CHECK(max_grad_rel_error(store, gb, loss) < 1e-5);
}

TEST_CASE("conv1d: gradients match finite differences, stride 1 and 2") {
    Rng rng(6);
    for (int stride : {1, 2}) {
        ParamStore store;
        Conv1d conv(store, "conv", 3, 4, 5, stride, rng);
        const Mat x = random_mat(rng, 9, 3);
        const Mat y0 = conv.forward(store, x);
        const Mat target = random_mat(rng, static_cast<int>(y0.rows()), 4);

        auto loss = [&] { return (conv.forward(store, x) - target).squaredNorm(); };
        GradBuffer gb(store);
        Conv1dCache cache;
        const Mat y = conv.forward(store, x, &cache);
        conv.backward(store, cache, 2.0 * (y - target), gb);
        CHECK(max_grad_rel_error(store, gb, loss) < 1e-6);
    }
}

TEST_CASE("gelu: derivative matches finite differences") {
    Rng rng(7);
    Mat x = random_mat(rng, 3, 4, 2.0);
    const Mat dy = Mat::Ones(3, 4);
    const Mat dx = gelu_backward(x, dy);
    const double h = 1e-6;
    for (int i = 0; i < x.rows(); ++i)
        for (int j = 0; j < x.cols(); ++j) {
            const double keep = x(i, j);
            x(i, j) = keep + h;
            const double up = gelu(x)(i, j);
            x(i, j) = keep - h;
            const double dn = gelu(x)(i, j);
            x(i, j) = keep;
            CHECK(std::abs((up - dn) / (2 * h) - dx(i, j)) < 1e-7);
        }
}

TEST_CASE("sinusoidal embedding: closed form at position 0 and general positions") {
    const auto e0 = sinusoidal_embedding(0.0, 16);
    for (int i = 0; i < 8; ++i) {
        CHECK(e0(2 * i) == 0.0);       // sin(0)
        CHECK(e0(2 * i + 1) == 1.0);   // cos(0)
    }
    // independent recomputation at several positions
    for (double pos : {1.0, 7.0, 30.0, 123.0}) {
        const auto e = sinusoidal_embedding(pos, 32);
        for (int i = 0; i < 16; ++i) {
            const double freq = std::pow(10000.0, -2.0 * i / 32.0);
            CHECK(e(2 * i) == doctest::Approx(std::sin(pos * freq)).epsilon(1e-15));
            CHECK(e(2 * i + 1) == doctest::Approx(std::cos(pos * freq)).epsilon(1e-15));
        }
    }
}

TEST_CASE("adam: converges on a quadratic and serializes its state") {
    Rng rng(8);
    ParamStore store;
    const int id = store.add("w", 3, 3, 1.0, rng);
    const Mat target = random_mat(rng, 3, 3);

    Adam opt(store, 0.05);
    for (int i = 0; i < 400; ++i) {
        GradBuffer gb(store);
        gb.g[id] = 2.0 * (store.value(id) - target);
        opt.step(store, gb);
    }
    CHECK((store.value(id) - target).norm() < 1e-3);

    ArrayContainer c;
    opt.write_to(c, "opt.");
    Adam restored(store, 0.05);
    restored.read_from(c, "opt.");
    CHECK(restored.steps() == opt.steps());
}

TEST_CASE("param store: round trip through a container") {
    Rng rng(9);
    ParamStore store;
    Linear lin(store, "lin", 4, 2, rng);
    LayerNorm ln(store, "ln", 4, rng);
    (void)lin;
    (void)ln;

    ArrayContainer c;
    store.write_to(c, "model.");

    Rng rng2(10);
    ParamStore other;
    Linear lin2(other, "lin", 4, 2, rng2);
    LayerNorm ln2(other, "ln", 4, rng2);
    (void)lin2;
    (void)ln2;
    other.read_from(c, "model.");
    for (int i = 0; i < store.count(); ++i)
        CHECK((other.value(i) - store.value(i)).cwiseAbs().maxCoeff() == 0.0);

    ParamStore wrong;
    Linear lin3(wrong, "other_name", 4, 2, rng2);
    (void)lin3;
    CHECK_THROWS(wrong.read_from(c, "model."));
}

TEST_CASE("positional encoding: deterministic and distinct per index") {
    const Mat p = positional_encoding(6, 16);
    const Mat q = positional_encoding(6, 16);
    CHECK((p - q).cwiseAbs().maxCoeff() == 0.0);
    for (int i = 1; i < 6; ++i) CHECK((p.row(i) - p.row(0)).norm() > 1e-6);
}
