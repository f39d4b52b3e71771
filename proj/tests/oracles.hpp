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


// Independent reference implementations shared by the unit and acceptance
// tests.

#pragma once

#include "imnet/cvnn/loss.hpp"
#include "imnet/cvnn/model.hpp"
#include "imnet/detectors.hpp"

#include <functional>

namespace imnet::oracle {

/// Direct complex-arithmetic correlation, zero padding, stride 1.
/// x: (ci, h, w), w: (co, ci, k, k), b: co. Returns (co, ho, wo).
inline std::vector<cplx> naive_complex_conv(const std::vector<cplx>& x, std::size_t ci, std::size_t h, std::size_t w,
                                            const std::vector<cplx>& wt, const std::vector<cplx>& bias,
                                            std::size_t co, std::size_t k, std::size_t pad)
{
    const std::size_t ho = h + 2 * pad - k + 1, wo = w + 2 * pad - k + 1;
    std::vector<cplx> out(co * ho * wo);
    for (std::size_t o = 0; o < co; ++o)
        for (std::size_t y = 0; y < ho; ++y)
            for (std::size_t xx = 0; xx < wo; ++xx) {
                cplx acc = bias[o];
                for (std::size_t c = 0; c < ci; ++c)
                    for (std::size_t ky = 0; ky < k; ++ky)
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const long iy = static_cast<long>(y + ky) - static_cast<long>(pad);
                            const long ix = static_cast<long>(xx + kx) - static_cast<long>(pad);
                            if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(w)) continue;
                            acc += wt[((o * ci + c) * k + ky) * k + kx] *
                                   x[(c * h + static_cast<std::size_t>(iy)) * w + static_cast<std::size_t>(ix)];
                        }
                out[(o * ho + y) * wo + xx] = acc;
            }
    return out;
}

/// Support minimising the least-squares residual over all C(N_t, N_u)
/// combinations.
inline phy::Tac exhaustive_support(const ComplexMatrix& y, const ComplexMatrix& h, int nu)
{
    const int nt = static_cast<int>(h.cols());
    phy::Tac c(static_cast<std::size_t>(nu)), arg;
    double best = 1e300;
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == nu) {
            const auto hs = h.select_columns(detect::zero_based(c));
            const double r = (y - hs * ls_solve(hs, y)).frobenius_norm_sq();
            if (r < best) {
                best = r;
                arg = c;
            }
            return;
        }
        for (int a = start; a <= nt; ++a) {
            c[static_cast<std::size_t>(depth)] = a;
            rec(a + 1, depth + 1);
        }
    };
    rec(1, 0);
    return arg;
}

enum class LossKind { bce, mse };

struct GradCheckResult {
    double max_rel = 0.0;
    std::size_t checked = 0;
};

/// Central finite differences over every parameter slot and input slot of
/// `model`, each real and imaginary slot perturbed independently.
inline GradCheckResult grad_check(cvnn::Model& model, const cvnn::Tensor& x, LossKind loss,
                                  std::span<const double> target, double step = 1e-4)
{
    using namespace cvnn;
    auto eval = [&](const Tensor& in) {
        const Tensor out = model.forward(in, Mode::train);
        if (loss == LossKind::bce) return bce_loss(out, target);
        Tensor tgt(out.n, out.shape);
        std::copy(target.begin(), target.end(), tgt.data.begin());
        return mse_loss(out, tgt);
    };
    model.zero_grad();
    const auto base = eval(x);
    const Tensor gx = model.backward(base.grad);

    GradCheckResult res;
    auto rel = [](double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); };
    for (Param* p : model.params()) {
        const std::vector<double> analytic = p->grad;
        for (std::size_t k = 0; k < p->value.size(); ++k) {
            const double keep = p->value[k];
            p->value[k] = keep + step;
            const double lp = eval(x).value;
            p->value[k] = keep - step;
            const double lm = eval(x).value;
            p->value[k] = keep;
            res.max_rel = std::max(res.max_rel, rel(analytic[k], (lp - lm) / (2.0 * step)));
            ++res.checked;
        }
    }
    Tensor xp = x;
    for (std::size_t k = 0; k < x.data.size(); ++k) {
        xp.data[k] = x.data[k] + step;
        const double lp = eval(xp).value;
        xp.data[k] = x.data[k] - step;
        const double lm = eval(xp).value;
        xp.data[k] = x.data[k];
        res.max_rel = std::max(res.max_rel, rel(gx.data[k], (lp - lm) / (2.0 * step)));
        ++res.checked;
    }
    return res;
}

/// Random small model around one layer kind plus a random loss target.
struct GradCase {
    cvnn::Model model;
    cvnn::Tensor x;
    std::vector<double> target;
};

inline GradCase make_grad_case(cvnn::LayerKind kind, LossKind loss, Rng& rng)
{
    using namespace cvnn;
    const std::size_t batch = 2 + rng.below(3);
    const std::size_t hh = 2 + rng.below(3), ww = 2 + rng.below(3);
    const std::size_t nc = 1 + rng.below(2); // complex channels
    Shape in{2 * nc, hh, ww};
    std::vector<LayerSpec> specs;
    switch (kind) {
    case LayerKind::complex_conv2d: {
        const auto k = static_cast<std::uint32_t>(1 + 2 * rng.below(2));
        specs.push_back(LayerSpec::complex_conv(static_cast<std::uint32_t>(1 + rng.below(3)), k, k / 2));
        break;
    }
    case LayerKind::real_conv2d: {
        const auto k = static_cast<std::uint32_t>(1 + 2 * rng.below(2));
        specs.push_back(LayerSpec::real_conv(static_cast<std::uint32_t>(1 + rng.below(4)), k, k / 2));
        break;
    }
    case LayerKind::complex_dense:
        in = {2 * (1 + rng.below(5)), 1, 1};
        specs.push_back(LayerSpec::complex_dense(static_cast<std::uint32_t>(1 + rng.below(4))));
        break;
    case LayerKind::real_dense:
        in = {1 + rng.below(8), 1, 1};
        specs.push_back(LayerSpec::real_dense(static_cast<std::uint32_t>(1 + rng.below(6))));
        break;
    default:
        specs.push_back(LayerSpec::of(kind));
        break;
    }
    if (loss == LossKind::bce) {
        specs.push_back(LayerSpec::of(LayerKind::flatten));
        specs.push_back(LayerSpec::real_dense(static_cast<std::uint32_t>(2 + rng.below(4))));
        specs.push_back(LayerSpec::of(LayerKind::sigmoid));
    }
    GradCase gc{Model(in, specs, rng.next_u64()), Tensor(batch, in), {}};
    // non-trivial BN affine parameters so every path carries gradient
    for (std::size_t i = 0; i < gc.model.size(); ++i) {
        const auto k = gc.model.layer(i).kind();
        if (k == LayerKind::complex_batchnorm || k == LayerKind::real_batchnorm)
            for (Param* p : gc.model.layer(i).params())
                for (auto& v : p->value) v += rng.uniform(-0.5, 0.5);
        if (k == LayerKind::complex_conv2d || k == LayerKind::real_conv2d || k == LayerKind::complex_dense ||
            k == LayerKind::real_dense)
            for (Param* p : gc.model.layer(i).params())
                if (p->name == "bias")
                    for (auto& v : p->value) v = rng.uniform(-0.3, 0.3);
    }
    for (auto& v : gc.x.data) {
        double u = rng.uniform(-1.0, 1.0);
        if (kind == LayerKind::relu && std::abs(u) < 0.05) u = u < 0 ? -0.05 : 0.05; // keep off the kink
        v = u;
    }
    const Shape out = gc.model.output_shape();
    gc.target.resize(batch * out.size());
    for (auto& v : gc.target) v = loss == LossKind::bce ? static_cast<double>(rng.bit()) : rng.uniform(-1.0, 1.0);
    return gc;
}

} // namespace imnet::oracle
