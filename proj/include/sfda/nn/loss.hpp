#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "sfda/nn/tensor.hpp"

namespace sfda::nn {

// Per-pixel log-softmax scratch shared by the losses below.
// Writes log-probabilities for one pixel column of logits.
template <typename T>
inline void pixel_log_softmax(const T* logits, size_t stride, int c, T* logp) {
    T m = logits[0];
    for (int k = 1; k < c; ++k) m = std::max(m, logits[k * stride]);
    T s = T(0);
    for (int k = 0; k < c; ++k) s += std::exp(logits[k * stride] - m);
    T lse = m + std::log(s);
    for (int k = 0; k < c; ++k) logp[k] = logits[k * stride] - lse;
}

// Class-weighted cross-entropy over an NCHW logits tensor against uint8
// labels, ignoring `ignore_id` pixels. Loss is the mean over counted pixels
// of w[y] * (-log p[y]); the gradient matches that normalization.
template <typename T>
struct CeResult {
    double loss = 0.0;
    long counted = 0;
    Tensor4<T> dlogits;
};

template <typename T>
CeResult<T> softmax_cross_entropy(const Tensor4<T>& logits,
                                  const std::vector<uint8_t>& labels,
                                  const std::vector<T>& class_weights,
                                  int ignore_id,
                                  bool want_grad = true) {
    const int c = logits.c;
    const size_t plane = logits.plane();
    CeResult<T> r;
    if (want_grad) r.dlogits = Tensor4<T>(logits.n, c, logits.h, logits.w);

    // Pass 1: count supervised pixels (the normalizer is batch-global).
    long counted = 0;
    for (size_t p = 0; p < labels.size(); ++p)
        if (labels[p] != ignore_id) ++counted;
    r.counted = counted;
    if (counted == 0) return r;  // all-ignored batch: zero loss, zero grad

    const T inv = T(1) / static_cast<T>(counted);
    double loss = 0.0;
    std::vector<T> logp(c);
    for (int i = 0; i < logits.n; ++i) {
        const T* ls = logits.sample(i);
        T* gs = want_grad ? r.dlogits.sample(i) : nullptr;
        const uint8_t* lab = labels.data() + static_cast<size_t>(i) * plane;
        for (size_t p = 0; p < plane; ++p) {
            const uint8_t y = lab[p];
            if (y == ignore_id) continue;
            pixel_log_softmax(ls + p, plane, c, logp.data());
            const T wy = class_weights[y];
            loss += -static_cast<double>(wy * logp[y]);
            if (want_grad) {
                for (int k = 0; k < c; ++k) {
                    T pk = std::exp(logp[k]);
                    gs[k * plane + p] = wy * (pk - (k == y ? T(1) : T(0))) * inv;
                }
            }
        }
    }
    r.loss = loss / static_cast<double>(counted);
    return r;
}

// Mean per-pixel self-entropy of softmax(logits) over all pixels, with its
// gradient w.r.t. the logits. Used as the adaptation regularizer.
template <typename T>
struct EntropyResult {
    double value = 0.0;
    Tensor4<T> dlogits;
};

template <typename T>
EntropyResult<T> mean_softmax_entropy(const Tensor4<T>& logits, bool want_grad = true) {
    const int c = logits.c;
    const size_t plane = logits.plane();
    EntropyResult<T> r;
    if (want_grad) r.dlogits = Tensor4<T>(logits.n, c, logits.h, logits.w);
    const size_t total = static_cast<size_t>(logits.n) * plane;
    if (total == 0) return r;
    const T inv = T(1) / static_cast<T>(total);
    double acc = 0.0;
    std::vector<T> logp(c);
    for (int i = 0; i < logits.n; ++i) {
        const T* ls = logits.sample(i);
        T* gs = want_grad ? r.dlogits.sample(i) : nullptr;
        for (size_t p = 0; p < plane; ++p) {
            pixel_log_softmax(ls + p, plane, c, logp.data());
            T ent = T(0);
            for (int k = 0; k < c; ++k) ent -= std::exp(logp[k]) * logp[k];
            acc += static_cast<double>(ent);
            if (want_grad) {
                // dH/dz_k = -p_k (log p_k + H)
                for (int k = 0; k < c; ++k) {
                    T pk = std::exp(logp[k]);
                    gs[k * plane + p] = -pk * (logp[k] + ent) * inv;
                }
            }
        }
    }
    r.value = acc / static_cast<double>(total);
    return r;
}

// In-place channel softmax (inference path).
template <typename T>
void softmax_channels(Tensor4<T>& t) {
    const size_t plane = t.plane();
    std::vector<T> logp(t.c);
    for (int i = 0; i < t.n; ++i) {
        T* s = t.sample(i);
        for (size_t p = 0; p < plane; ++p) {
            pixel_log_softmax(s + p, plane, t.c, logp.data());
            for (int k = 0; k < t.c; ++k) s[k * plane + p] = std::exp(logp[k]);
        }
    }
}

}  // namespace sfda::nn
