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

#include "imnet/cvnn/tensor.hpp"

namespace imnet::cvnn {

inline constexpr double bce_clip = 1e-7;

struct LossResult {
    double value = 0.0;
    Tensor grad; // dL/d(prediction)
};

/// Negative mean binary cross-entropy of one probability vector.
inline double bce(std::span<const double> p, std::span<const double> g)
{
    detail::require(p.size() == g.size() && !p.empty(), "bce: size mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        const double pc = std::clamp(p[k], bce_clip, 1.0 - bce_clip);
        acc += g[k] * std::log(pc) + (1.0 - g[k]) * std::log(1.0 - pc);
    }
    return -acc / static_cast<double>(p.size());
}

/// Batch BCE: mean over samples of bce(); labels are (batch x N_t).
inline LossResult bce_loss(const Tensor& p, std::span<const double> labels)
{
    const std::size_t nt = p.sample_size();
    detail::require(labels.size() == p.n * nt && p.n > 0, "bce_loss: label count does not match predictions");
    LossResult r{0.0, Tensor(p.n, p.shape)};
    const double scale = 1.0 / static_cast<double>(nt * p.n);
    for (std::size_t b = 0; b < p.n; ++b) {
        r.value += bce({p.sample(b), nt}, labels.subspan(b * nt, nt));
        for (std::size_t k = 0; k < nt; ++k) {
            const double pv = p.sample(b)[k];
            const double pc = std::clamp(pv, bce_clip, 1.0 - bce_clip);
            const double g = labels[b * nt + k];
            // clipped region has zero derivative
            r.grad.sample(b)[k] = (pv == pc) ? (pc - g) / (pc * (1.0 - pc)) * scale : 0.0;
        }
    }
    r.value /= static_cast<double>(p.n);
    return r;
}

/// Squared error |s_hat - s|^2 summed over all entries.
inline double mse(const ComplexMatrix& s_hat, const ComplexMatrix& s)
{
    detail::require(s_hat.rows() == s.rows() && s_hat.cols() == s.cols(), "mse: shape mismatch");
    return (s_hat - s).frobenius_norm_sq();
}

/// Batch MSE: per-sample summed squared modulus error, averaged over the batch.
inline LossResult mse_loss(const Tensor& pred, const Tensor& target)
{
    detail::require(pred.shape == target.shape && pred.n == target.n && pred.n > 0, "mse_loss: shape mismatch");
    LossResult r{0.0, Tensor(pred.n, pred.shape)};
    const double inv_n = 1.0 / static_cast<double>(pred.n);
    for (std::size_t i = 0; i < pred.data.size(); ++i) {
        const double d = pred.data[i] - target.data[i];
        r.value += d * d;
        r.grad.data[i] = 2.0 * d * inv_n;
    }
    r.value *= inv_n;
    return r;
}

} // namespace imnet::cvnn
