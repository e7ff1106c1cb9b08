#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "sfda/core/rng.hpp"
#include "sfda/nn/tensor.hpp"

namespace sfda::nn {

int num_threads();
void set_num_threads(int n);

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;

struct ConvGeom {
    int in_c = 0, out_c = 0;
    int k = 3, stride = 1, pad = 1, dilation = 1;

    int out_dim(int in) const {
        return (in + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
    }
};

// im2col for one sample: src is (C,H,W); col is (C*k*k) x (oh*ow) row-major.
template <typename T>
void im2col(const T* src, int c, int h, int w, const ConvGeom& g, int oh, int ow, T* col) {
    const size_t ohw = static_cast<size_t>(oh) * ow;
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                T* row = col + ((static_cast<size_t>(ci) * g.k + ky) * g.k + kx) * ohw;
                const int dy = ky * g.dilation - g.pad;
                const int dx = kx * g.dilation - g.pad;
                for (int oy = 0; oy < oh; ++oy) {
                    const int sy = oy * g.stride + dy;
                    T* dst = row + static_cast<size_t>(oy) * ow;
                    if (sy < 0 || sy >= h) {
                        std::fill(dst, dst + ow, T(0));
                        continue;
                    }
                    const T* srow = src + (static_cast<size_t>(ci) * h + sy) * w;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int sx = ox * g.stride + dx;
                        dst[ox] = (sx >= 0 && sx < w) ? srow[sx] : T(0);
                    }
                }
            }
        }
    }
}

// Transpose of im2col: scatter-accumulate col back onto the (C,H,W) grid.
template <typename T>
void col2im_acc(const T* col, int c, int h, int w, const ConvGeom& g, int oh, int ow, T* dst) {
    const size_t ohw = static_cast<size_t>(oh) * ow;
    for (int ci = 0; ci < c; ++ci) {
        for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
                const T* row = col + ((static_cast<size_t>(ci) * g.k + ky) * g.k + kx) * ohw;
                const int dy = ky * g.dilation - g.pad;
                const int dx = kx * g.dilation - g.pad;
                for (int oy = 0; oy < oh; ++oy) {
                    const int sy = oy * g.stride + dy;
                    if (sy < 0 || sy >= h) continue;
                    T* drow = dst + (static_cast<size_t>(ci) * h + sy) * w;
                    const T* srow = row + static_cast<size_t>(oy) * ow;
                    for (int ox = 0; ox < ow; ++ox) {
                        const int sx = ox * g.stride + dx;
                        if (sx >= 0 && sx < w) drow[sx] += srow[ox];
                    }
                }
            }
        }
    }
}

// 2-D convolution, im2col + GEMM. Batch samples run in parallel; weight
// gradients are reduced in sample order so results do not depend on the
// thread count.
template <typename T>
class Conv2d {
public:
    ConvGeom geom;
    std::vector<T> weight;  // out_c x (in_c*k*k), row-major
    std::vector<T> bias;    // out_c
    std::vector<T> gweight;
    std::vector<T> gbias;

    Conv2d() = default;
    Conv2d(int in_c, int out_c, int k, int stride, int pad, int dilation = 1) {
        geom.in_c = in_c;
        geom.out_c = out_c;
        geom.k = k;
        geom.stride = stride;
        geom.pad = pad;
        geom.dilation = dilation;
        weight.assign(static_cast<size_t>(out_c) * in_c * k * k, T(0));
        bias.assign(out_c, T(0));
        gweight.assign(weight.size(), T(0));
        gbias.assign(bias.size(), T(0));
    }

    // He fan-in init; biases zero.
    void init_he(Pcg32& rng) {
        const double fan_in = static_cast<double>(geom.in_c) * geom.k * geom.k;
        const double s = std::sqrt(2.0 / fan_in);
        for (auto& v : weight) v = static_cast<T>(rng.normal() * s);
        std::fill(bias.begin(), bias.end(), T(0));
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", &weight, &gweight});
        out.push_back({prefix + ".bias", &bias, &gbias});
    }

    Tensor4<T> forward(const Tensor4<T>& x) {
        in_shape_ = {x.n, x.c, x.h, x.w};
        const int oh = geom.out_dim(x.h), ow = geom.out_dim(x.w);
        Tensor4<T> y(x.n, geom.out_c, oh, ow);
        x_ = x;  // kept for backward (im2col is recomputed there)
        const size_t kdim = static_cast<size_t>(geom.in_c) * geom.k * geom.k;
        const size_t ohw = static_cast<size_t>(oh) * ow;
#pragma omp parallel for schedule(static) num_threads(num_threads())
        for (int i = 0; i < x.n; ++i) {
            std::vector<T> col(kdim * ohw);
            im2col(x.sample(i), x.c, x.h, x.w, geom, oh, ow, col.data());
            CMapRM<T> W(weight.data(), geom.out_c, static_cast<Eigen::Index>(kdim));
            CMapRM<T> C(col.data(), static_cast<Eigen::Index>(kdim), static_cast<Eigen::Index>(ohw));
            MapRM<T> Y(y.sample(i), geom.out_c, static_cast<Eigen::Index>(ohw));
            Y.noalias() = W * C;
            for (int co = 0; co < geom.out_c; ++co)
                Y.row(co).array() += bias[co];
        }
        return y;
    }

    // Accumulates into gweight/gbias, returns gradient w.r.t. the input.
    Tensor4<T> backward(const Tensor4<T>& gy) {
        const int n = in_shape_[0], ic = in_shape_[1], ih = in_shape_[2], iw = in_shape_[3];
        const int oh = gy.h, ow = gy.w;
        Tensor4<T> gx(n, ic, ih, iw);
        const size_t kdim = static_cast<size_t>(ic) * geom.k * geom.k;
        const size_t ohw = static_cast<size_t>(oh) * ow;
        std::vector<std::vector<T>> dws(n), dbs(n);
#pragma omp parallel for schedule(static) num_threads(num_threads())
        for (int i = 0; i < n; ++i) {
            std::vector<T> col(kdim * ohw);
            im2col(x_.sample(i), ic, ih, iw, geom, oh, ow, col.data());
            CMapRM<T> G(gy.sample(i), geom.out_c, static_cast<Eigen::Index>(ohw));
            CMapRM<T> C(col.data(), static_cast<Eigen::Index>(kdim), static_cast<Eigen::Index>(ohw));
            dws[i].assign(weight.size(), T(0));
            dbs[i].assign(bias.size(), T(0));
            MapRM<T> DW(dws[i].data(), geom.out_c, static_cast<Eigen::Index>(kdim));
            DW.noalias() = G * C.transpose();
            // Scalar bias reduction: SIMD redux order depends on buffer
            // alignment and would break bitwise reproducibility.
            for (int co = 0; co < geom.out_c; ++co) {
                const T* row = gy.sample(i) + static_cast<size_t>(co) * ohw;
                T s = 0;
                for (size_t p = 0; p < ohw; ++p) s += row[p];
                dbs[i][co] = s;
            }
            // gradient w.r.t. input
            std::vector<T> dcol(kdim * ohw);
            CMapRM<T> W(weight.data(), geom.out_c, static_cast<Eigen::Index>(kdim));
            MapRM<T> DC(dcol.data(), static_cast<Eigen::Index>(kdim), static_cast<Eigen::Index>(ohw));
            DC.noalias() = W.transpose() * G;
            col2im_acc(dcol.data(), ic, ih, iw, geom, oh, ow, gx.sample(i));
        }
        for (int i = 0; i < n; ++i) {
            for (size_t j = 0; j < weight.size(); ++j) gweight[j] += dws[i][j];
            for (size_t j = 0; j < bias.size(); ++j) gbias[j] += dbs[i][j];
        }
        return gx;
    }

    void release_cache() { x_ = Tensor4<T>(); }

private:
    Tensor4<T> x_;
    std::array<int, 4> in_shape_{};
};

// Transposed 2-D convolution (stride-2 upsampling in the decoder). Weight is
// stored as in_c x (out_c*k*k); forward is the backward-data pass of the
// mirrored convolution.
template <typename T>
class ConvTranspose2d {
public:
    // Geometry of the mirrored conv (maps output -> input).
    ConvGeom geom;
    int out_pad = 0;
    std::vector<T> weight;  // in_c x (out_c*k*k)
    std::vector<T> bias;    // out_c
    std::vector<T> gweight;
    std::vector<T> gbias;

    ConvTranspose2d() = default;
    ConvTranspose2d(int in_c, int out_c, int k, int stride, int pad, int out_pad_) {
        geom.in_c = out_c;  // mirrored
        geom.out_c = in_c;
        geom.k = k;
        geom.stride = stride;
        geom.pad = pad;
        out_pad = out_pad_;
        weight.assign(static_cast<size_t>(in_c) * out_c * k * k, T(0));
        bias.assign(out_c, T(0));
        gweight.assign(weight.size(), T(0));
        gbias.assign(bias.size(), T(0));
    }

    int in_c() const { return geom.out_c; }
    int out_c() const { return geom.in_c; }

    int out_dim(int in) const {
        return (in - 1) * geom.stride - 2 * geom.pad + geom.dilation * (geom.k - 1) + 1 + out_pad;
    }

    void init_he(Pcg32& rng) {
        const double fan_in = static_cast<double>(in_c()) * geom.k * geom.k;
        const double s = std::sqrt(2.0 / fan_in);
        for (auto& v : weight) v = static_cast<T>(rng.normal() * s);
        std::fill(bias.begin(), bias.end(), T(0));
    }

    void collect(std::vector<ParamRef<T>>& out, const std::string& prefix) {
        out.push_back({prefix + ".weight", &weight, &gweight});
        out.push_back({prefix + ".bias", &bias, &gbias});
    }

    Tensor4<T> forward(const Tensor4<T>& x) {
        x_ = x;
        const int oh = out_dim(x.h), ow = out_dim(x.w);
        oh_ = oh; ow_ = ow;
        Tensor4<T> y(x.n, out_c(), oh, ow);
        const size_t kdim = static_cast<size_t>(out_c()) * geom.k * geom.k;
        const size_t ihw = static_cast<size_t>(x.h) * x.w;
#pragma omp parallel for schedule(static) num_threads(num_threads())
        for (int i = 0; i < x.n; ++i) {
            // dcol = W^T * x, then scatter onto the output grid.
            std::vector<T> dcol(kdim * ihw);
            CMapRM<T> W(weight.data(), in_c(), static_cast<Eigen::Index>(kdim));
            CMapRM<T> X(x.sample(i), in_c(), static_cast<Eigen::Index>(ihw));
            MapRM<T> DC(dcol.data(), static_cast<Eigen::Index>(kdim), static_cast<Eigen::Index>(ihw));
            DC.noalias() = W.transpose() * X;
            col2im_acc(dcol.data(), out_c(), oh, ow, geom, x.h, x.w, y.sample(i));
            T* ys = y.sample(i);
            const size_t ohw = static_cast<size_t>(oh) * ow;
            for (int co = 0; co < out_c(); ++co) {
                T* pl = ys + co * ohw;
                for (size_t p = 0; p < ohw; ++p) pl[p] += bias[co];
            }
        }
        return y;
    }

    Tensor4<T> backward(const Tensor4<T>& gy) {
        Tensor4<T> gx(x_.n, in_c(), x_.h, x_.w);
        const size_t kdim = static_cast<size_t>(out_c()) * geom.k * geom.k;
        const size_t ihw = static_cast<size_t>(x_.h) * x_.w;
        std::vector<std::vector<T>> dws(x_.n), dbs(x_.n);
#pragma omp parallel for schedule(static) num_threads(num_threads())
        for (int i = 0; i < x_.n; ++i) {
            std::vector<T> col(kdim * ihw);
            im2col(gy.sample(i), out_c(), oh_, ow_, geom, x_.h, x_.w, col.data());
            CMapRM<T> C(col.data(), static_cast<Eigen::Index>(kdim), static_cast<Eigen::Index>(ihw));
            CMapRM<T> W(weight.data(), in_c(), static_cast<Eigen::Index>(kdim));
            MapRM<T> GX(gx.sample(i), in_c(), static_cast<Eigen::Index>(ihw));
            GX.noalias() = W * C;
            dws[i].assign(weight.size(), T(0));
            dbs[i].assign(bias.size(), T(0));
            CMapRM<T> X(x_.sample(i), in_c(), static_cast<Eigen::Index>(ihw));
            MapRM<T> DW(dws[i].data(), in_c(), static_cast<Eigen::Index>(kdim));
            DW.noalias() = X * C.transpose();
            const T* gys = gy.sample(i);
            const size_t ohw = static_cast<size_t>(oh_) * ow_;
            for (int co = 0; co < out_c(); ++co) {
                const T* pl = gys + co * ohw;
                T s = 0;
                for (size_t p = 0; p < ohw; ++p) s += pl[p];
                dbs[i][co] = s;
            }
        }
        for (int i = 0; i < x_.n; ++i) {
            for (size_t j = 0; j < weight.size(); ++j) gweight[j] += dws[i][j];
            for (size_t j = 0; j < bias.size(); ++j) gbias[j] += dbs[i][j];
        }
        return gx;
    }

private:
    Tensor4<T> x_;
    int oh_ = 0, ow_ = 0;
};

template <typename T>
class ReLU {
public:
    Tensor4<T> forward(const Tensor4<T>& x) {
        mask_.assign(x.size(), 0);
        Tensor4<T> y = x;
        for (size_t i = 0; i < y.v.size(); ++i) {
            if (y.v[i] > T(0)) mask_[i] = 1; else y.v[i] = T(0);
        }
        return y;
    }
    Tensor4<T> backward(const Tensor4<T>& gy) {
        Tensor4<T> gx = gy;
        for (size_t i = 0; i < gx.v.size(); ++i)
            if (!mask_[i]) gx.v[i] = T(0);
        return gx;
    }

private:
    std::vector<uint8_t> mask_;
};

template <typename T>
class LeakyReLU {
public:
    explicit LeakyReLU(T slope = T(0.1)) : slope_(slope) {}
    Tensor4<T> forward(const Tensor4<T>& x) {
        mask_.assign(x.size(), 0);
        Tensor4<T> y = x;
        for (size_t i = 0; i < y.v.size(); ++i) {
            if (y.v[i] > T(0)) mask_[i] = 1; else y.v[i] *= slope_;
        }
        return y;
    }
    Tensor4<T> backward(const Tensor4<T>& gy) {
        Tensor4<T> gx = gy;
        for (size_t i = 0; i < gx.v.size(); ++i)
            if (!mask_[i]) gx.v[i] *= slope_;
        return gx;
    }

private:
    T slope_;
    std::vector<uint8_t> mask_;
};

template <typename T>
class Tanh {
public:
    Tensor4<T> forward(const Tensor4<T>& x) {
        y_ = x;
        for (auto& v : y_.v) v = std::tanh(v);
        return y_;
    }
    Tensor4<T> backward(const Tensor4<T>& gy) {
        Tensor4<T> gx = gy;
        for (size_t i = 0; i < gx.v.size(); ++i)
            gx.v[i] *= (T(1) - y_.v[i] * y_.v[i]);
        return gx;
    }

private:
    Tensor4<T> y_;
};

// Bilinear resize on a single CHW plane stack, half-pixel centers, edge clamp.
template <typename T>
void resize_bilinear_plane(const T* src, int c, int h, int w, T* dst, int oh, int ow) {
    const double sy = static_cast<double>(h) / oh;
    const double sx = static_cast<double>(w) / ow;
    std::vector<int> x0(ow), x1(ow);
    std::vector<T> fx(ow);
    for (int ox = 0; ox < ow; ++ox) {
        double p = (ox + 0.5) * sx - 0.5;
        double f = std::floor(p);
        int i0 = static_cast<int>(f);
        double t = p - f;
        if (i0 < 0) { i0 = 0; t = 0.0; }
        if (i0 >= w - 1) { i0 = w - 1; t = 0.0; }
        x0[ox] = i0;
        x1[ox] = std::min(i0 + 1, w - 1);
        fx[ox] = static_cast<T>(t);
    }
    for (int ci = 0; ci < c; ++ci) {
        const T* sp = src + static_cast<size_t>(ci) * h * w;
        T* dp = dst + static_cast<size_t>(ci) * oh * ow;
        for (int oy = 0; oy < oh; ++oy) {
            double p = (oy + 0.5) * sy - 0.5;
            double f = std::floor(p);
            int y0 = static_cast<int>(f);
            double ty = p - f;
            if (y0 < 0) { y0 = 0; ty = 0.0; }
            if (y0 >= h - 1) { y0 = h - 1; ty = 0.0; }
            int y1 = std::min(y0 + 1, h - 1);
            const T* r0 = sp + static_cast<size_t>(y0) * w;
            const T* r1 = sp + static_cast<size_t>(y1) * w;
            T* out = dp + static_cast<size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
                T a = r0[x0[ox]], b = r0[x1[ox]];
                T cc = r1[x0[ox]], d = r1[x1[ox]];
                T t = fx[ox];
                T top = a + (b - a) * t;
                T bot = cc + (d - cc) * t;
                out[ox] = top + (bot - top) * static_cast<T>(ty);
            }
        }
    }
}

// Differentiable bilinear upsampling layer (used to bring head logits back
// to input resolution before the softmax).
template <typename T>
class BilinearResize {
public:
    BilinearResize() = default;
    BilinearResize(int oh, int ow) : oh_(oh), ow_(ow) {}

    void set_output(int oh, int ow) { oh_ = oh; ow_ = ow; }

    Tensor4<T> forward(const Tensor4<T>& x) {
        ih_ = x.h; iw_ = x.w;
        Tensor4<T> y(x.n, x.c, oh_, ow_);
#pragma omp parallel for schedule(static) num_threads(num_threads())
        for (int i = 0; i < x.n; ++i)
            resize_bilinear_plane(x.sample(i), x.c, x.h, x.w, y.sample(i), oh_, ow_);
        return y;
    }

    Tensor4<T> backward(const Tensor4<T>& gy) {
        Tensor4<T> gx(gy.n, gy.c, ih_, iw_);
        const double sy = static_cast<double>(ih_) / oh_;
        const double sx = static_cast<double>(iw_) / ow_;
#pragma omp parallel for schedule(static) num_threads(num_threads())
        for (int i = 0; i < gy.n; ++i) {
            for (int ci = 0; ci < gy.c; ++ci) {
                const T* gp = gy.sample(i) + static_cast<size_t>(ci) * oh_ * ow_;
                T* xp = gx.sample(i) + static_cast<size_t>(ci) * ih_ * iw_;
                for (int oy = 0; oy < oh_; ++oy) {
                    double py = (oy + 0.5) * sy - 0.5;
                    double fy = std::floor(py);
                    int y0 = static_cast<int>(fy);
                    double ty = py - fy;
                    if (y0 < 0) { y0 = 0; ty = 0.0; }
                    if (y0 >= ih_ - 1) { y0 = ih_ - 1; ty = 0.0; }
                    int y1 = std::min(y0 + 1, ih_ - 1);
                    for (int ox = 0; ox < ow_; ++ox) {
                        double px = (ox + 0.5) * sx - 0.5;
                        double fx = std::floor(px);
                        int x0 = static_cast<int>(fx);
                        double tx = px - fx;
                        if (x0 < 0) { x0 = 0; tx = 0.0; }
                        if (x0 >= iw_ - 1) { x0 = iw_ - 1; tx = 0.0; }
                        int x1 = std::min(x0 + 1, iw_ - 1);
                        T g = gp[static_cast<size_t>(oy) * ow_ + ox];
                        xp[static_cast<size_t>(y0) * iw_ + x0] += g * static_cast<T>((1 - ty) * (1 - tx));
                        xp[static_cast<size_t>(y0) * iw_ + x1] += g * static_cast<T>((1 - ty) * tx);
                        xp[static_cast<size_t>(y1) * iw_ + x0] += g * static_cast<T>(ty * (1 - tx));
                        xp[static_cast<size_t>(y1) * iw_ + x1] += g * static_cast<T>(ty * tx);
                    }
                }
            }
        }
        return gx;
    }

private:
    int oh_ = 0, ow_ = 0, ih_ = 0, iw_ = 0;
};

}  // namespace sfda::nn
