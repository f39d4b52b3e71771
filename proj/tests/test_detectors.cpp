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


#include "imnet/detectors.hpp"

#include <catch_amalgamated.hpp>

#include <functional>

using namespace imnet;
using namespace imnet::phy;
using namespace imnet::detect;

namespace {

// Residual of the best symbol vector per slot, computed by brute force with
// std::complex arithmetic and no shared code with ml_detect.
double brute_tac_metric(const ComplexMatrix& y, const ComplexMatrix& h, const Tac& tac, const QamConstellation& q)
{
    const std::size_t nu = tac.size();
    std::size_t nvec = 1;
    for (std::size_t u = 0; u < nu; ++u) nvec *= static_cast<std::size_t>(q.order());
    double total = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) {
        double best = 1e300;
        for (std::size_t v = 0; v < nvec; ++v) {
            std::size_t rem = v;
            std::vector<cplx> s(nu);
            for (std::size_t u = 0; u < nu; ++u) {
                s[u] = q.points()[rem % static_cast<std::size_t>(q.order())];
                rem /= static_cast<std::size_t>(q.order());
            }
            double d = 0.0;
            for (std::size_t r = 0; r < y.rows(); ++r) {
                cplx acc = y(r, j);
                for (std::size_t u = 0; u < nu; ++u) acc -= h(r, static_cast<std::size_t>(tac[u] - 1)) * s[u];
                d += std::norm(acc);
            }
            best = std::min(best, d);
        }
        total += best;
    }
    return total;
}

// Support minimising the least-squares residual over all combinations.
Tac exhaustive_support(const ComplexMatrix& y, const ComplexMatrix& h, int nu)
{
    const int nt = static_cast<int>(h.cols());
    std::vector<Tac> combos;
    Tac c(static_cast<std::size_t>(nu));
    std::function<void(int, int)> rec = [&](int start, int depth) {
        if (depth == nu) {
            combos.push_back(c);
            return;
        }
        for (int a = start; a <= nt; ++a) {
            c[static_cast<std::size_t>(depth)] = a;
            rec(a + 1, depth + 1);
        }
    };
    rec(1, 0);
    double best = 1e300;
    Tac arg;
    for (const auto& s : combos) {
        const auto hs = h.select_columns(zero_based(s));
        const double r = (y - hs * ls_solve(hs, y)).frobenius_norm_sq();
        if (r < best) {
            best = r;
            arg = s;
        }
    }
    return arg;
}

} // namespace

TEST_CASE("ML recovers noiseless frames exactly", "[detectors]")
{
    Rng rng(1);
    const auto t = build_tac_table(4, 1);
    const QamConstellation q(4);
    for (int trial = 0; trial < 200; ++trial) {
        const auto h = rayleigh_channel(rng, 4, 4);
        const auto f = assemble_frame(random_bits(rng, bits_per_frame(t, q, 4)), t, q, 4);
        const auto y = h * f.x;
        const auto r = ml_detect(y, h, t, q);
        CHECK(r.tac_index == f.tac_index);
        CHECK((r.s_hat - f.s).frobenius_norm() < 1e-12);
        CHECK(r.metric < 1e-20);
        // the zero residual is unique
        for (std::size_t k = 0; k < t.n_l(); ++k)
            if (k != f.tac_index) CHECK(brute_tac_metric(y, h, t.tacs[k], q) > 1e-6);
    }
    CHECK(ml_hypotheses_per_slot(t, q) == 16.0);
}

TEST_CASE("ML metric is the minimum over hypotheses", "[detectors][property]")
{
    Rng rng(2);
    const auto t = preset_4x2();
    const QamConstellation q(4);
    for (int trial = 0; trial < 100; ++trial) {
        const auto h = rayleigh_channel(rng, 3, 4);
        const auto f = assemble_frame(random_bits(rng, bits_per_frame(t, q, 3)), t, q, 3);
        ChannelRealization ch{h, h};
        const auto y = apply_channel(f, ch, 0.0, rng);
        const auto r = ml_detect(y, h, t, q);
        for (std::size_t k = 0; k < t.n_l(); ++k) {
            const double m = brute_tac_metric(y, h, t.tacs[k], q);
            CHECK(r.metric <= m + 1e-9);
            if (k == r.tac_index) CHECK(std::abs(r.metric - m) < 1e-9);
        }
        CHECK(std::abs((y - h.select_columns(zero_based(t.tacs[r.tac_index])) * r.s_hat).frobenius_norm_sq() -
                       r.metric) < 1e-9);
    }
}

TEST_CASE("ML tie-break picks the lowest index", "[detectors]")
{
    const auto t = build_tac_table(4, 1);
    const QamConstellation q(4);
    const ComplexMatrix y(2, 3);
    ComplexMatrix h(2, 4);
    for (std::size_t c = 0; c < 4; ++c) h(0, c) = 1.0;
    const auto r = ml_detect(y, h, t, q);
    CHECK(r.tac_index == 0);
    CHECK(r.s_hat(0, 0) == q.points()[0]);
}

TEST_CASE("SOMP on orthogonal columns", "[detectors]")
{
    const auto h = ComplexMatrix::identity(4);
    ComplexMatrix y(4, 3);
    y(1, 0) = cplx(1, 1);
    y(1, 1) = cplx(-1, 1);
    y(1, 2) = cplx(1, -1);
    const auto r = somp_detect(y, h, 1);
    CHECK(r.support == Tac{2});
}

TEST_CASE("SOMP with a coherent third column", "[detectors]")
{
    Rng rng(3);
    ComplexMatrix h(2, 3);
    h(0, 0) = 1.0;
    h(1, 1) = 1.0;
    h(0, 2) = 1.0 / std::sqrt(2.0);
    h(1, 2) = 1.0 / std::sqrt(2.0);
    ComplexMatrix y(2, 4);
    for (std::size_t j = 0; j < 4; ++j) y(1, j) = rng.complex_normal(1.0);
    const auto r = somp_detect(y, h, 1);
    CHECK(r.support == Tac{2});
    CHECK(r.support == exhaustive_support(y, h, 1));
}

TEST_CASE("SOMP contract", "[detectors][property]")
{
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        const int nu = 1 + static_cast<int>(rng.below(3));
        const auto h = rayleigh_channel(rng, 6, 8);
        const auto y = complex_gaussian(rng, 6, 5, 1.0);
        const auto r = somp_detect(y, h, nu);
        REQUIRE(r.support.size() == static_cast<std::size_t>(nu));
        CHECK(std::adjacent_find(r.support.begin(), r.support.end()) == r.support.end());
        CHECK(std::is_sorted(r.support.begin(), r.support.end()));
        for (std::size_t i = 1; i < r.residual_norms.size(); ++i)
            CHECK(r.residual_norms[i] <= r.residual_norms[i - 1] + 1e-12);
    }
    ComplexMatrix hz(2, 3);
    hz(0, 0) = 1.0;
    hz(1, 1) = 1.0;
    CHECK_THROWS_AS(somp_detect(ComplexMatrix(2, 1), hz, 1), InvalidArgument);
}

TEST_CASE("SOMP agrees with exhaustive search at high SNR", "[detectors]")
{
    Rng rng(5);
    const auto t = build_tac_table(4, 1);
    const QamConstellation q(4);
    int agree = 0;
    const int n = 2000;
    for (int trial = 0; trial < n; ++trial) {
        ChannelRealization ch;
        ch.h = rayleigh_channel(rng, 4, 4);
        ch.h_est = ch.h;
        const auto f = assemble_frame(random_bits(rng, bits_per_frame(t, q, 16)), t, q, 16);
        const auto y = apply_channel(f, ch, 25.0, rng);
        agree += somp_detect(y, ch.h, 1).support == exhaustive_support(y, ch.h, 1);
    }
    CHECK(agree >= 0.99 * n);
}

TEST_CASE("ZF hand case and exactness", "[detectors]")
{
    ComplexMatrix h(2, 2);
    h(0, 0) = 1.0;
    h(1, 1) = 1.0;
    const ComplexMatrix y{{cplx(4, 2)}, {7.0}};
    const auto s = zf_estimate(y, h, Tac{1});
    CHECK(std::abs(s(0, 0) - cplx(4, 2)) < 1e-15);

    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const auto hh = rayleigh_channel(rng, 6, 8);
        const Tac sup{2, 5, 7};
        const auto sm = complex_gaussian(rng, 3, 4, 1.0);
        const auto yy = hh.select_columns(zero_based(sup)) * sm;
        CHECK((zf_estimate(yy, hh, sup) - sm).frobenius_norm() < 1e-10);
        const auto w = zf_matrix(hh, sup);
        CHECK((w * hh.select_columns(zero_based(sup)) - ComplexMatrix::identity(3)).frobenius_norm() < 1e-10);
        const auto noisy = complex_gaussian(rng, 6, 4, 1.0);
        const auto hs = hh.select_columns(zero_based(sup));
        CHECK((hs.adjoint() * (noisy - hs * zf_estimate(noisy, hh, sup))).frobenius_norm() < 1e-10);
    }
    CHECK_THROWS_AS(zf_estimate(ComplexMatrix(2, 1), ComplexMatrix(2, 4), Tac{1, 2, 3}), InvalidArgument);
}

TEST_CASE("support legalisation", "[detectors]")
{
    const auto t = preset_4x2();
    CHECK(legalize_support(Tac{2, 4}, t) == 2);
    // {1,2}: overlap 1 with {1,3},{1,4},{2,4},{2,3}; first in table order wins
    CHECK(legalize_support(Tac{1, 2}, t) == 0);
    CHECK(legalize_support(Tac{3, 4}, t) == 0);
    const auto lex = build_tac_table(8, 2); // first 16 of 28
    const auto idx = legalize_support(Tac{7, 8}, lex);
    CHECK(idx < lex.n_l());
}

TEST_CASE("classical pipelines", "[detectors]")
{
    Rng rng(7);
    const auto t = build_tac_table(4, 1);
    const QamConstellation q(4);
    std::size_t ml_errs = 0, somp_errs = 0, ml_noisy = 0, somp_noisy = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        ChannelRealization ch;
        ch.h = rayleigh_channel(rng, 4, 4);
        ch.h_est = ch.h;
        const auto f = assemble_frame(random_bits(rng, bits_per_frame(t, q, 8)), t, q, 8);
        const auto y = apply_channel(f, ch, std::numeric_limits<double>::infinity(), rng);
        ml_errs += bit_errors(f.bits, classical_pipeline(y, ch.h, t, q, ClassicalMethod::ml).bits);
        somp_errs += bit_errors(f.bits, classical_pipeline(y, ch.h, t, q, ClassicalMethod::somp).bits);
        const auto yn = apply_channel(f, ch, 5.0, rng);
        ml_noisy += bit_errors(f.bits, classical_pipeline(yn, ch.h, t, q, ClassicalMethod::ml).bits);
        somp_noisy += bit_errors(f.bits, classical_pipeline(yn, ch.h, t, q, ClassicalMethod::somp).bits);
    }
    CHECK(ml_errs == 0);
    CHECK(somp_errs == 0);
    CHECK(ml_noisy <= somp_noisy);
}
