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

// Classical IM-MIMO detectors: exhaustive ML, SOMP support recovery and
// zero-forcing estimation on a known support.

#pragma once

#include "imnet/phy.hpp"

#include <limits>
#include <string_view>

namespace imnet::detect {

using phy::Bits;
using phy::Tac;

struct MlResult {
    std::size_t tac_index = 0;
    ComplexMatrix s_hat; // N_u x T
    double metric = 0.0; // summed per-slot minimal squared residual
};

/// Frame-level ML: for each legal TAC, the per-slot minimum over all
/// M^N_u symbol vectors of |y_j - H(J) s|^2 is summed over the frame; the
/// TAC with the least total wins. Ties go to the lowest TAC index and the
/// lowest symbol-vector index.
inline MlResult ml_detect(const ComplexMatrix& y, const ComplexMatrix& h, const phy::TacTable& table,
                          const phy::QamConstellation& qam)
{
    detail::require(y.rows() == h.rows(), "ml_detect: y and h row counts differ");
    detail::require(h.cols() == static_cast<std::size_t>(table.n_t), "ml_detect: h must have N_t columns");
    const std::size_t n_r = h.rows(), t = y.cols();
    const auto n_u = static_cast<std::size_t>(table.n_u);
    const auto m = static_cast<std::size_t>(qam.order());
    std::size_t n_vec = 1;
    for (std::size_t u = 0; u < n_u; ++u) n_vec *= m;

    // split planes of y for the inner loop
    std::vector<double> yr(n_r * t), yi(n_r * t);
    for (std::size_t r = 0; r < n_r; ++r)
        for (std::size_t j = 0; j < t; ++j) {
            yr[j * n_r + r] = y(r, j).real();
            yi[j * n_r + r] = y(r, j).imag();
        }

    std::vector<double> cr(n_vec * n_r), ci(n_vec * n_r);
    std::vector<std::size_t> digits(n_u);
    std::vector<std::size_t> best_vec(t), slot_vec(t);

    MlResult res;
    res.metric = std::numeric_limits<double>::infinity();
    for (std::size_t tac = 0; tac < table.n_l(); ++tac) {
        const Tac& cols = table.tacs[tac];
        // candidate received vectors H(J) s for every symbol vector s
        for (std::size_t v = 0; v < n_vec; ++v) {
            std::size_t rem = v;
            for (std::size_t u = n_u; u-- > 0;) {
                digits[u] = rem % m;
                rem /= m;
            }
            for (std::size_t r = 0; r < n_r; ++r) {
                double ar = 0.0, ai = 0.0;
                for (std::size_t u = 0; u < n_u; ++u) {
                    const cplx hv = h(r, static_cast<std::size_t>(cols[u] - 1));
                    const cplx sv = qam.points()[digits[u]];
                    ar += hv.real() * sv.real() - hv.imag() * sv.imag();
                    ai += hv.real() * sv.imag() + hv.imag() * sv.real();
                }
                cr[v * n_r + r] = ar;
                ci[v * n_r + r] = ai;
            }
        }
        double total = 0.0;
        for (std::size_t j = 0; j < t; ++j) {
            const double* yrj = &yr[j * n_r];
            const double* yij = &yi[j * n_r];
            double best = std::numeric_limits<double>::infinity();
            std::size_t arg = 0;
            for (std::size_t v = 0; v < n_vec; ++v) {
                const double* a = &cr[v * n_r];
                const double* b = &ci[v * n_r];
                double dist = 0.0;
                for (std::size_t r = 0; r < n_r; ++r) {
                    const double dr = yrj[r] - a[r];
                    const double di = yij[r] - b[r];
                    dist += dr * dr + di * di;
                }
                if (dist < best) {
                    best = dist;
                    arg = v;
                }
            }
            total += best;
            slot_vec[j] = arg;
        }
        if (total < res.metric) {
            res.metric = total;
            res.tac_index = tac;
            best_vec = slot_vec;
        }
    }

    res.s_hat = ComplexMatrix(n_u, t);
    for (std::size_t j = 0; j < t; ++j) {
        std::size_t rem = best_vec[j];
        for (std::size_t u = n_u; u-- > 0;) {
            res.s_hat(u, j) = qam.points()[rem % m];
            rem /= m;
        }
    }
    return res;
}

/// Hypotheses searched per slot by ml_detect.
inline double ml_hypotheses_per_slot(const phy::TacTable& table, const phy::QamConstellation& qam)
{
    return static_cast<double>(table.n_l()) * std::pow(static_cast<double>(qam.order()), table.n_u);
}

struct SompResult {
    Tac support;                         // sorted, 1-based
    std::vector<double> residual_norms;  // |R|_F after each iteration
};

/// Simultaneous OMP: N_u greedy picks of the column maximising
/// sum_j |<h_k, r_j>| / |h_k|, each followed by a least-squares
/// re-projection of Y onto the chosen columns.
inline SompResult somp_detect(const ComplexMatrix& y, const ComplexMatrix& h, int n_u)
{
    const std::size_t n_r = h.rows(), n_t = h.cols(), t = y.cols();
    detail::require(y.rows() == n_r, "somp_detect: y and h row counts differ");
    detail::require(n_u > 0 && static_cast<std::size_t>(n_u) < n_t, "somp_detect: need 0 < n_u < N_t");
    detail::require(static_cast<std::size_t>(n_u) <= n_r, "somp_detect: n_u exceeds receive antennas");

    std::vector<double> col_norm(n_t);
    for (std::size_t k = 0; k < n_t; ++k) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n_r; ++r) acc += std::norm(h(r, k));
        col_norm[k] = std::sqrt(acc);
        if (!(col_norm[k] > 0.0)) throw InvalidArgument("somp_detect: channel column " + std::to_string(k + 1) + " is zero");
    }

    SompResult res;
    std::vector<std::size_t> chosen;
    std::vector<bool> used(n_t, false);
    ComplexMatrix resid = y;
    for (int it = 0; it < n_u; ++it) {
        double best = -1.0;
        std::size_t arg = 0;
        for (std::size_t k = 0; k < n_t; ++k) {
            if (used[k]) continue;
            double score = 0.0;
            for (std::size_t j = 0; j < t; ++j) {
                cplx dot = 0.0;
                for (std::size_t r = 0; r < n_r; ++r) dot += std::conj(h(r, k)) * resid(r, j);
                score += std::abs(dot);
            }
            score /= col_norm[k];
            if (score > best) {
                best = score;
                arg = k;
            }
        }
        used[arg] = true;
        chosen.push_back(arg);
        const ComplexMatrix hs = h.select_columns(chosen);
        resid = y - hs * ls_solve(hs, y);
        res.residual_norms.push_back(resid.frobenius_norm());
    }
    std::sort(chosen.begin(), chosen.end());
    for (auto k : chosen) res.support.push_back(static_cast<int>(k) + 1);
    return res;
}

inline std::vector<std::size_t> zero_based(const Tac& support)
{
    std::vector<std::size_t> idx;
    idx.reserve(support.size());
    for (int a : support) idx.push_back(static_cast<std::size_t>(a - 1));
    return idx;
}

/// Zero-forcing estimate (H_J^H H_J)^{-1} H_J^H Y.
inline ComplexMatrix zf_estimate(const ComplexMatrix& y, const ComplexMatrix& h, const Tac& support)
{
    detail::require(support.size() <= h.rows(), "zf_estimate: support larger than receive antennas");
    const auto idx = zero_based(support);
    return ls_solve(h.select_columns(idx), y);
}

/// The interference cancellation matrix W^ZF itself (N_u x N_r).
inline ComplexMatrix zf_matrix(const ComplexMatrix& h, const Tac& support)
{
    const auto idx = zero_based(support);
    return ls_solve(h.select_columns(idx), ComplexMatrix::identity(h.rows()));
}

/// Exact table match, else the legal TAC sharing the most antennas with
/// `support` (first in table order on ties).
inline std::size_t legalize_support(const Tac& support, const phy::TacTable& table)
{
    if (auto idx = table.index_of(support)) return *idx;
    std::size_t best = 0;
    int best_overlap = -1;
    for (std::size_t i = 0; i < table.n_l(); ++i) {
        int overlap = 0;
        for (int a : table.tacs[i]) overlap += std::find(support.begin(), support.end(), a) != support.end();
        if (overlap > best_overlap) {
            best_overlap = overlap;
            best = i;
        }
    }
    return best;
}

enum class ClassicalMethod { ml, somp };

inline std::string_view to_string(ClassicalMethod m) { return m == ClassicalMethod::ml ? "ml" : "somp"; }

struct Detection {
    std::size_t tac_index = 0;
    ComplexMatrix s_hat;
    Bits bits;
};

inline Detection classical_pipeline(const ComplexMatrix& y, const ComplexMatrix& h_est, const phy::TacTable& table,
                                    const phy::QamConstellation& qam, ClassicalMethod method)
{
    Detection d;
    if (method == ClassicalMethod::ml) {
        auto r = ml_detect(y, h_est, table, qam);
        d.tac_index = r.tac_index;
        d.s_hat = std::move(r.s_hat);
    } else {
        const auto r = somp_detect(y, h_est, table.n_u);
        d.tac_index = legalize_support(r.support, table);
        d.s_hat = zf_estimate(y, h_est, table.tacs[d.tac_index]);
    }
    d.bits = phy::demap_frame(d.tac_index, d.s_hat, table, qam);
    return d;
}

} // namespace imnet::detect
