#pragma once

#include <cmath>
#include <vector>

#include "sfda/nn/tensor.hpp"

namespace sfda::nn {

struct SgdConfig {
    double lr = 2.5e-4;
    double momentum = 0.9;
    double weight_decay = 5e-4;
};

// lr(t) = lr0 * (1 - t/total)^power
struct PolySchedule {
    double base_lr = 2.5e-4;
    double power = 0.9;
    long total_steps = 1;

    double lr_at(long step) const {
        double f = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
        if (f < 0.0) f = 0.0;
        return base_lr * std::pow(f, power);
    }
};

// SGD with momentum and decoupled-from-nothing L2 (classic: grad += wd * w).
// One instance per parameter group; momentum buffers stay with the instance,
// so a group that is never stepped is provably untouched.
template <typename T>
class SgdMomentum {
public:
    SgdMomentum() = default;
    SgdMomentum(std::vector<ParamRef<T>> params, SgdConfig cfg)
        : params_(std::move(params)), cfg_(cfg) {
        buffers_.resize(params_.size());
        for (size_t i = 0; i < params_.size(); ++i)
            buffers_[i].assign(params_[i].value->size(), T(0));
    }

    void step(double lr) {
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& w = *params_[i].value;
            auto& g = *params_[i].grad;
            auto& m = buffers_[i];
            const T mu = static_cast<T>(cfg_.momentum);
            const T wd = static_cast<T>(cfg_.weight_decay);
            const T eta = static_cast<T>(lr);
            for (size_t j = 0; j < w.size(); ++j) {
                T grad = g[j] + wd * w[j];
                m[j] = mu * m[j] + grad;
                w[j] -= eta * m[j];
            }
        }
    }

    const std::vector<ParamRef<T>>& params() const { return params_; }

private:
    std::vector<ParamRef<T>> params_;
    SgdConfig cfg_;
    std::vector<std::vector<T>> buffers_;
};

}  // namespace sfda::nn
