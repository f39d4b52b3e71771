// SPDX-License-Identifier: Apache-2.0
//
// imnet: index-modulation MIMO detection toolkit
// Copyright (C) 2026 imnet contributors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include "imnet/cvnn/layers.hpp"

namespace imnet::cvnn {

/// Adam with bias correction. Real and imaginary slots are independent
/// real parameters.
class Adam {
public:
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    Adam() = default;
    explicit Adam(double learning_rate) : lr(learning_rate) {}

    std::uint64_t steps() const noexcept { return t_; }

    void step(const std::vector<Param*>& params)
    {
        if (m_.empty()) {
            for (const Param* p : params) {
                m_.emplace_back(p->value.size(), 0.0);
                v_.emplace_back(p->value.size(), 0.0);
            }
        }
        detail::require(m_.size() == params.size(), "Adam: parameter list changed between steps");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Param& p = *params[i];
            detail::require(m_[i].size() == p.value.size(), "Adam: parameter shape changed between steps");
            for (std::size_t k = 0; k < p.value.size(); ++k) {
                const double g = p.grad[k];
                m_[i][k] = beta1 * m_[i][k] + (1.0 - beta1) * g;
                v_[i][k] = beta2 * v_[i][k] + (1.0 - beta2) * g * g;
                const double mh = m_[i][k] / bc1;
                const double vh = v_[i][k] / bc2;
                p.value[k] -= lr * mh / (std::sqrt(vh) + eps);
            }
        }
    }

    const std::vector<std::vector<double>>& first_moments() const noexcept { return m_; }
    const std::vector<std::vector<double>>& second_moments() const noexcept { return v_; }

    void set_state(std::uint64_t t, std::vector<std::vector<double>> m, std::vector<std::vector<double>> v)
    {
        detail::require(m.size() == v.size(), "Adam: moment lists differ in length");
        t_ = t;
        m_ = std::move(m);
        v_ = std::move(v);
    }

private:
    std::uint64_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

} // namespace imnet::cvnn
