#include <doctest.h>

#include <cmath>

#include "sfda/nn/layers.hpp"
#include "sfda/nn/loss.hpp"
#include "sfda/nn/optim.hpp"

using namespace sfda;
using nn::Tensor4;

namespace {

// Direct convolution oracle, no im2col.
template <typename T>
Tensor4<T> conv_naive(const Tensor4<T>& x, const nn::Conv2d<T>& conv) {
    const auto& g = conv.geom;
    const int oh = g.out_dim(x.h), ow = g.out_dim(x.w);
    Tensor4<T> y(x.n, g.out_c, oh, ow);
    for (int i = 0; i < x.n; ++i)
        for (int co = 0; co < g.out_c; ++co)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    T acc = conv.bias[co];
                    for (int ci = 0; ci < g.in_c; ++ci)
                        for (int ky = 0; ky < g.k; ++ky)
                            for (int kx = 0; kx < g.k; ++kx) {
                                int sy = oy * g.stride + ky * g.dilation - g.pad;
                                int sx = ox * g.stride + kx * g.dilation - g.pad;
                                if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) continue;
                                acc += conv.weight[((static_cast<size_t>(co) * g.in_c + ci) *
                                                        g.k + ky) * g.k + kx] *
                                       x.at(i, ci, sy, sx);
                            }
                    y.at(i, co, oy, ox) = acc;
                }
    return y;
}

template <typename Fn>
void check_param_gradients(std::vector<nn::ParamRef<double>> params, Fn&& loss_fn,
                           double tol = 1e-6) {
    for (auto& p : params) std::fill(p.grad->begin(), p.grad->end(), 0.0);
    loss_fn(true);
    std::vector<std::vector<double>> analytic;
    for (auto& p : params) analytic.push_back(*p.grad);

    const double eps = 1e-6;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& w = *params[pi].value;
        for (size_t j = 0; j < w.size(); j += std::max<size_t>(1, w.size() / 13)) {
            const double orig = w[j];
            w[j] = orig + eps;
            const double lp = loss_fn(false);
            w[j] = orig - eps;
            const double lm = loss_fn(false);
            w[j] = orig;
            const double fd = (lp - lm) / (2 * eps);
            const double an = analytic[pi][j];
            CHECK(std::abs(fd - an) <= tol * std::max({1.0, std::abs(fd), std::abs(an)}));
        }
    }
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("conv2d matches the naive convolution") {
    Pcg32 rng(1);
    for (auto [stride, pad, dil] :
         {std::tuple<int, int, int>{1, 1, 1}, {2, 1, 1}, {1, 2, 2}, {1, 4, 4}}) {
        nn::Conv2d<float> conv(3, 5, 3, stride, pad, dil);
        conv.init_he(rng);
        for (auto& b : conv.bias) b = static_cast<float>(rng.normal());
        Tensor4<float> x(2, 3, 9, 11);
        for (auto& v : x.v) v = static_cast<float>(rng.normal());
        Tensor4<float> got = conv.forward(x);
        Tensor4<float> want = conv_naive(x, conv);
        REQUIRE(got.same_shape(want));
        for (size_t i = 0; i < got.v.size(); ++i)
            CHECK(got.v[i] == doctest::Approx(want.v[i]).epsilon(1e-4));
    }
}

TEST_CASE("conv2d parameter and input gradients pass finite differences") {
    Pcg32 rng(2);
    nn::Conv2d<double> conv(2, 3, 3, 2, 1);
    conv.init_he(rng);
    Tensor4<double> x(2, 2, 7, 6);
    for (auto& v : x.v) v = rng.normal();

    Tensor4<double> saved_gx;
    auto loss_fn = [&](bool want_grad) {
        Tensor4<double> y = conv.forward(x);
        double L = 0;
        for (auto v : y.v) L += 0.5 * v * v;
        if (want_grad) saved_gx = conv.backward(y);
        return L;
    };
    std::vector<nn::ParamRef<double>> params;
    conv.collect(params, "conv");
    check_param_gradients(params, loss_fn);

    const double eps = 1e-6;
    for (size_t j = 0; j < x.v.size(); j += 17) {
        const double orig = x.v[j];
        x.v[j] = orig + eps;
        const double lp = loss_fn(false);
        x.v[j] = orig - eps;
        const double lm = loss_fn(false);
        x.v[j] = orig;
        const double fd = (lp - lm) / (2 * eps);
        CHECK(saved_gx.v[j] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("transpose conv doubles the resolution and passes finite differences") {
    Pcg32 rng(3);
    nn::ConvTranspose2d<double> tconv(3, 2, 3, 2, 1, 1);
    tconv.init_he(rng);
    Tensor4<double> x(1, 3, 5, 7);
    for (auto& v : x.v) v = rng.normal();
    Tensor4<double> y = tconv.forward(x);
    CHECK(y.c == 2);
    CHECK(y.h == 10);
    CHECK(y.w == 14);

    auto loss_fn = [&](bool want_grad) {
        Tensor4<double> out = tconv.forward(x);
        double L = 0;
        for (auto v : out.v) L += 0.5 * v * v;
        if (want_grad) tconv.backward(out);
        return L;
    };
    std::vector<nn::ParamRef<double>> params;
    tconv.collect(params, "tconv");
    check_param_gradients(params, loss_fn);
}

TEST_CASE("bilinear resize is identity at equal size and exact on constants") {
    Tensor4<float> x(1, 2, 5, 9);
    Pcg32 rng(4);
    for (auto& v : x.v) v = static_cast<float>(rng.uniform());
    nn::BilinearResize<float> same(5, 9);
    Tensor4<float> y = same.forward(x);
    for (size_t i = 0; i < x.v.size(); ++i) CHECK(y.v[i] == doctest::Approx(x.v[i]));

    for (auto& v : x.v) v = 0.625f;
    nn::BilinearResize<float> up(20, 36);
    Tensor4<float> big = up.forward(x);
    for (auto v : big.v) CHECK(v == doctest::Approx(0.625f));
}

TEST_CASE("bilinear resize backward is the transpose of forward") {
    // <A x, y> == <x, A^T y> for random x, y.
    Pcg32 rng(5);
    Tensor4<double> x(1, 1, 6, 5);
    for (auto& v : x.v) v = rng.normal();
    nn::BilinearResize<double> up(13, 8);
    Tensor4<double> ax = up.forward(x);
    Tensor4<double> y(1, 1, 13, 8);
    for (auto& v : y.v) v = rng.normal();
    Tensor4<double> aty = up.backward(y);
    double lhs = 0, rhs = 0;
    for (size_t i = 0; i < ax.v.size(); ++i) lhs += ax.v[i] * y.v[i];
    for (size_t i = 0; i < x.v.size(); ++i) rhs += x.v[i] * aty.v[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("cross entropy hits the textbook values") {
    const int C = 4;
    Tensor4<float> logits(1, C, 2, 3);  // all-zero logits -> uniform softmax
    std::vector<uint8_t> labels(6, 2);
    std::vector<float> w(C, 1.f);
    auto r = nn::softmax_cross_entropy(logits, labels, w, C);
    CHECK(r.loss == doctest::Approx(std::log(4.0)).epsilon(1e-6));
    CHECK(r.counted == 6);

    Tensor4<float> conf(1, C, 2, 3);
    for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 3; ++x) conf.at(0, 2, y, x) = 50.f;
    auto r2 = nn::softmax_cross_entropy(conf, labels, w, C);
    CHECK(r2.loss == doctest::Approx(0.0).epsilon(1e-8));

    std::vector<uint8_t> ignored(6, static_cast<uint8_t>(C));
    auto r3 = nn::softmax_cross_entropy(logits, ignored, w, C);
    CHECK(r3.loss == 0.0);
    CHECK(r3.counted == 0);
    for (auto v : r3.dlogits.v) CHECK(v == 0.f);
}

TEST_CASE("cross entropy and entropy gradients pass finite differences") {
    const int C = 3;
    Tensor4<double> logits(2, C, 2, 2);
    Pcg32 rng(6);
    for (auto& v : logits.v) v = rng.normal();
    std::vector<uint8_t> labels = {0, 1, 2, 3, 1, 1, 0, 2};  // one UNKNOWN (=3)
    std::vector<double> w = {1.2, 0.8, 1.0};

    auto ce = nn::softmax_cross_entropy(logits, labels, w, C);
    auto ent = nn::mean_softmax_entropy(logits);
    const double eps = 1e-6;
    for (size_t j = 0; j < logits.v.size(); ++j) {
        const double orig = logits.v[j];
        logits.v[j] = orig + eps;
        const double cp = nn::softmax_cross_entropy(logits, labels, w, C, false).loss;
        const double ep = nn::mean_softmax_entropy(logits, false).value;
        logits.v[j] = orig - eps;
        const double cm = nn::softmax_cross_entropy(logits, labels, w, C, false).loss;
        const double em = nn::mean_softmax_entropy(logits, false).value;
        logits.v[j] = orig;
        CHECK(ce.dlogits.v[j] == doctest::Approx((cp - cm) / (2 * eps)).epsilon(1e-5));
        CHECK(ent.dlogits.v[j] == doctest::Approx((ep - em) / (2 * eps)).epsilon(1e-5));
    }
}

TEST_CASE("conv forward/backward is invariant to the worker thread count") {
    Pcg32 rng(7);
    nn::Conv2d<float> conv(3, 4, 3, 1, 1);
    conv.init_he(rng);
    Tensor4<float> x(4, 3, 8, 8);
    for (auto& v : x.v) v = static_cast<float>(rng.normal());
    const int saved = nn::num_threads();
    nn::set_num_threads(1);
    Tensor4<float> y1 = conv.forward(x);
    Tensor4<float> g1 = conv.backward(y1);
    std::vector<float> dw1 = conv.gweight;
    std::fill(conv.gweight.begin(), conv.gweight.end(), 0.f);
    std::fill(conv.gbias.begin(), conv.gbias.end(), 0.f);
    nn::set_num_threads(2);
    Tensor4<float> y2 = conv.forward(x);
    Tensor4<float> g2 = conv.backward(y2);
    nn::set_num_threads(saved);
    CHECK(y1.v == y2.v);
    CHECK(g1.v == g2.v);
    CHECK(dw1 == conv.gweight);
}

TEST_CASE("sgd momentum step matches the classic update rule") {
    std::vector<double> w = {1.0, -2.0};
    std::vector<double> g = {0.5, 0.25};
    std::vector<nn::ParamRef<double>> params{{"w", &w, &g}};
    nn::SgdMomentum<double> opt(params, {0.1, 0.9, 0.0});
    opt.step(0.1);
    CHECK(w[0] == doctest::Approx(1.0 - 0.1 * 0.5));
    opt.step(0.1);  // momentum buffer now 0.9*0.5 + 0.5
    CHECK(w[0] == doctest::Approx(1.0 - 0.1 * 0.5 - 0.1 * (0.9 * 0.5 + 0.5)));
}

TEST_CASE("poly schedule decays to zero with the configured power") {
    nn::PolySchedule s{0.05, 0.9, 100};
    CHECK(s.lr_at(0) == doctest::Approx(0.05));
    CHECK(s.lr_at(50) == doctest::Approx(0.05 * std::pow(0.5, 0.9)));
    CHECK(s.lr_at(100) == doctest::Approx(0.0));
}

}  // TEST_SUITE
