/*
 *  Copyright 2026 The FDI Authors
 *
 *  Licensed under the Apache License, Version 2.0 (the "License");
 *  you may not use this file except in compliance with the License.
 *  You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 *  Unless required by applicable law or agreed to in writing, software
 *  distributed under the License is distributed on an "AS IS" BASIS,
 *  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 *  See the License for the specific language governing permissions and
 *  limitations under the License.
 */

#pragma once

#include <cmath>
#include <vector>

#include "fdi/layers.hpp"

namespace fdi {

/// SGD with momentum and (coupled) weight decay:
///   g <- grad + wd*w;  v <- mu*v + g;  w <- w - lr*v
template <typename T>
class SGD {
public:
    SGD(T momentum, T weight_decay) : momentum_(momentum), weight_decay_(weight_decay) {}

    void step(std::vector<ParamRef<T>>& params, T lr) {
        if (velocity_.empty())
            for (auto& p : params) velocity_.emplace_back(p.value->shape());
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            if (!p.grad) continue;
            for (std::size_t j = 0; j < p.value->numel(); ++j) {
                const T g = (*p.grad)[j] + weight_decay_ * (*p.value)[j];
                velocity_[i][j] = momentum_ * velocity_[i][j] + g;
                (*p.value)[j] -= lr * velocity_[i][j];
            }
        }
    }

private:
    T momentum_, weight_decay_;
    std::vector<Tensor<T>> velocity_;
};

template <typename T>
class Adam {
public:
    Adam(T beta1, T beta2, T eps = T(1e-8)) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(std::vector<ParamRef<T>>& params, T lr) {
        if (m_.empty())
            for (auto& p : params) {
                m_.emplace_back(p.value->shape());
                v_.emplace_back(p.value->shape());
            }
        ++t_;
        const T c1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
        const T c2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto& p = params[i];
            if (!p.grad) continue;
            for (std::size_t j = 0; j < p.value->numel(); ++j) {
                const T g = (*p.grad)[j];
                m_[i][j] = beta1_ * m_[i][j] + (T(1) - beta1_) * g;
                v_[i][j] = beta2_ * v_[i][j] + (T(1) - beta2_) * g * g;
                const T mhat = m_[i][j] / c1;
                const T vhat = v_[i][j] / c2;
                (*p.value)[j] -= lr * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

private:
    T beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<Tensor<T>> m_, v_;
};

/// Exponential decay hitting both endpoints exactly:
/// lr(e) = lr_hi * (lr_lo/lr_hi)^(e/(E-1)); a single-epoch run uses lr_hi.
inline double exp_lr_schedule(double lr_hi, double lr_lo, int epoch, int total_epochs) {
    if (total_epochs <= 1) return lr_hi;
    const double t = static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
    return lr_hi * std::pow(lr_lo / lr_hi, t);
}

}  // namespace fdi
