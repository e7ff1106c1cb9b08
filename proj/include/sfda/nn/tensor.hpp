#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sfda/core/errors.hpp"

namespace sfda::nn {

// Dense NCHW tensor. Plain storage struct; all math lives in the layers.
template <typename T>
struct Tensor4 {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> v;

    Tensor4() = default;
    Tensor4(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          v(static_cast<size_t>(n_) * c_ * h_ * w_, T(0)) {}

    size_t size() const { return v.size(); }
    size_t plane() const { return static_cast<size_t>(h) * w; }
    size_t sample_stride() const { return static_cast<size_t>(c) * h * w; }

    T* sample(int i) { return v.data() + sample_stride() * i; }
    const T* sample(int i) const { return v.data() + sample_stride() * i; }

    T& at(int i, int k, int y, int x) {
        return v[((static_cast<size_t>(i) * c + k) * h + y) * w + x];
    }
    T at(int i, int k, int y, int x) const {
        return v[((static_cast<size_t>(i) * c + k) * h + y) * w + x];
    }

    void zero() { std::fill(v.begin(), v.end(), T(0)); }

    bool same_shape(const Tensor4& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
};

// Named view of one learnable array and its gradient buffer. Everything that
// owns parameters exposes these; optimizers, checkpoints and freeze checks
// work off the flattened list.
template <typename T>
struct ParamRef {
    std::string name;
    std::vector<T>* value = nullptr;
    std::vector<T>* grad = nullptr;
};

template <typename T>
inline size_t param_count(const std::vector<ParamRef<T>>& ps) {
    size_t k = 0;
    for (const auto& p : ps) k += p.value->size();
    return k;
}

template <typename T>
inline void zero_grads(const std::vector<ParamRef<T>>& ps) {
    for (const auto& p : ps) std::fill(p.grad->begin(), p.grad->end(), T(0));
}

// Byte-exact snapshot of parameter values, for freeze/exclusion contracts.
template <typename T>
inline std::vector<std::vector<T>> snapshot_params(const std::vector<ParamRef<T>>& ps) {
    std::vector<std::vector<T>> out;
    out.reserve(ps.size());
    for (const auto& p : ps) out.push_back(*p.value);
    return out;
}

template <typename T>
inline bool params_equal(const std::vector<ParamRef<T>>& ps,
                         const std::vector<std::vector<T>>& snap) {
    if (ps.size() != snap.size()) return false;
    for (size_t i = 0; i < ps.size(); ++i)
        if (*ps[i].value != snap[i]) return false;
    return true;
}

}  // namespace sfda::nn
