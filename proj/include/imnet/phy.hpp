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

// IM-MIMO physical layer: TAC codebook, Gray QAM, frame assembly, channel
// models and link metrics.

#pragma once

#include "imnet/lincomplex.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace imnet::phy {

using Bits = std::vector<std::uint8_t>;
using Tac = std::vector<int>; // sorted, 1-based antenna indices

inline std::uint64_t binomial(int n, int k)
{
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::uint64_t c = 1;
    for (int i = 1; i <= k; ++i) c = c * static_cast<std::uint64_t>(n - k + i) / static_cast<std::uint64_t>(i);
    return c;
}

/// Legal transmit-antenna combinations. Entry i is selected by the spatial
/// bits whose MSB-first value is i.
struct TacTable {
    int n_t = 0;
    int n_u = 0;
    std::vector<Tac> tacs;

    std::size_t n_l() const noexcept { return tacs.size(); }
    int spatial_bits() const noexcept { return std::countr_zero(tacs.size()); }

    std::optional<std::size_t> index_of(const Tac& tac) const
    {
        for (std::size_t i = 0; i < tacs.size(); ++i)
            if (tacs[i] == tac) return i;
        return std::nullopt;
    }

    /// Antenna activation pattern of entry i (length n_t, N_u ones).
    Bits aap(std::size_t i) const
    {
        Bits g(static_cast<std::size_t>(n_t), 0);
        for (int a : tacs.at(i)) g[static_cast<std::size_t>(a - 1)] = 1;
        return g;
    }
};

inline std::size_t legal_tac_count(int n_t, int n_u)
{
    const std::uint64_t c = binomial(n_t, n_u);
    return std::size_t{1} << (std::bit_width(c) - 1);
}

/// First N_L combinations in lexicographic order.
inline TacTable build_tac_table(int n_t, int n_u)
{
    if (n_u <= 0 || n_u >= n_t || n_t > 62)
        throw InvalidArgument("build_tac_table: need 0 < n_u < n_t (got n_t=" + std::to_string(n_t) +
                              ", n_u=" + std::to_string(n_u) + ")");
    TacTable table{n_t, n_u, {}};
    const std::size_t n_l = legal_tac_count(n_t, n_u);
    table.tacs.reserve(n_l);
    Tac comb(static_cast<std::size_t>(n_u));
    for (int i = 0; i < n_u; ++i) comb[static_cast<std::size_t>(i)] = i + 1;
    while (table.tacs.size() < n_l) {
        table.tacs.push_back(comb);
        int pos = n_u - 1;
        while (pos >= 0 && comb[static_cast<std::size_t>(pos)] == n_t - n_u + pos + 1) --pos;
        if (pos < 0) break;
        ++comb[static_cast<std::size_t>(pos)];
        for (int j = pos + 1; j < n_u; ++j) comb[static_cast<std::size_t>(j)] = comb[static_cast<std::size_t>(j - 1)] + 1;
    }
    return table;
}

/// Table from an explicit list. Entries are sorted on input; size must be N_L.
inline TacTable build_tac_table(int n_t, int n_u, std::vector<Tac> list)
{
    if (n_u <= 0 || n_u >= n_t || n_t > 62) throw InvalidArgument("build_tac_table: need 0 < n_u < n_t");
    if (list.size() != legal_tac_count(n_t, n_u))
        throw InvalidArgument("build_tac_table: explicit list must have " +
                              std::to_string(legal_tac_count(n_t, n_u)) + " entries, got " +
                              std::to_string(list.size()));
    for (auto& tac : list) {
        std::sort(tac.begin(), tac.end());
        if (tac.size() != static_cast<std::size_t>(n_u)) throw InvalidArgument("build_tac_table: entry has wrong size");
        for (std::size_t i = 0; i < tac.size(); ++i) {
            if (tac[i] < 1 || tac[i] > n_t) throw InvalidArgument("build_tac_table: antenna index out of range");
            if (i > 0 && tac[i] == tac[i - 1]) throw InvalidArgument("build_tac_table: repeated antenna in entry");
        }
    }
    for (std::size_t i = 0; i < list.size(); ++i)
        for (std::size_t j = i + 1; j < list.size(); ++j)
            if (list[i] == list[j]) throw InvalidArgument("build_tac_table: duplicate entries");
    return TacTable{n_t, n_u, std::move(list)};
}

/// The N_t = 4, N_u = 2 mapping with non-lexicographic ordering
/// 00 -> {1,3}, 01 -> {1,4}, 10 -> {2,4}, 11 -> {2,3}.
inline TacTable preset_4x2() { return build_tac_table(4, 2, {{1, 3}, {1, 4}, {2, 4}, {2, 3}}); }

/// Square Gray-labelled QAM with unit average energy. Label bits are split
/// in half: the leading half selects the in-phase level, the rest the
/// quadrature level. A 0 bit on a 4QAM axis maps to the positive level, so
/// 00 -> (1 + j) / sqrt(2).
class QamConstellation {
public:
    explicit QamConstellation(int m) : m_(m)
    {
        if (m < 4 || !std::has_single_bit(static_cast<unsigned>(m)) || (std::countr_zero(static_cast<unsigned>(m)) % 2) != 0)
            throw InvalidArgument("QamConstellation: order must be a power of 4, got " + std::to_string(m));
        d_ = std::countr_zero(static_cast<unsigned>(m));
        levels_ = 1 << (d_ / 2);
        scale_ = 1.0 / std::sqrt(2.0 * (m - 1) / 3.0);
        points_.resize(static_cast<std::size_t>(m));
        for (int label = 0; label < m; ++label) {
            const int gi = label >> (d_ / 2);
            const int gq = label & (levels_ - 1);
            points_[static_cast<std::size_t>(label)] = {amplitude(gi), amplitude(gq)};
        }
    }

    int order() const noexcept { return m_; }
    int bits_per_symbol() const noexcept { return d_; }
    std::span<const cplx> points() const noexcept { return points_; }
    double min_distance() const noexcept { return 2.0 * scale_; }

    /// Label whose MSB-first bits are bits[0..d).
    static int label_of(std::span<const std::uint8_t> bits)
    {
        int v = 0;
        for (auto b : bits) v = (v << 1) | (b & 1);
        return v;
    }

    cplx map(std::span<const std::uint8_t> bits) const
    {
        detail::require(bits.size() == static_cast<std::size_t>(d_), "QamConstellation::map: wrong bit count");
        return points_[static_cast<std::size_t>(label_of(bits))];
    }

    /// Label of the nearest constellation point (decision regions are
    /// separable per axis).
    int nearest_label(cplx z) const noexcept { return (axis_gray(z.real()) << (d_ / 2)) | axis_gray(z.imag()); }

    cplx nearest_point(cplx z) const noexcept { return points_[static_cast<std::size_t>(nearest_label(z))]; }

    void append_bits(cplx z, Bits& out) const
    {
        const int label = nearest_label(z);
        for (int b = d_ - 1; b >= 0; --b) out.push_back(static_cast<std::uint8_t>((label >> b) & 1));
    }

private:
    static int gray_decode(int g) noexcept
    {
        int i = 0;
        for (; g; g >>= 1) i ^= g;
        return i;
    }
    double amplitude(int gray) const noexcept { return scale_ * (levels_ - 1 - 2 * gray_decode(gray)); }
    int axis_gray(double a) const noexcept
    {
        double idx = std::round((levels_ - 1 - a / scale_) / 2.0);
        if (!(idx >= 0.0)) idx = 0.0; // also maps NaN to the first level
        if (idx > levels_ - 1) idx = levels_ - 1;
        const int i = static_cast<int>(idx);
        return i ^ (i >> 1);
    }

    int m_;
    int d_ = 0;
    int levels_ = 0;
    double scale_ = 1.0;
    std::vector<cplx> points_;
};

/// One IM-MIMO frame: T slots sharing one TAC.
struct Frame {
    Bits bits;
    std::size_t tac_index = 0;
    ComplexMatrix s; // N_u x T, actual symbols in link order
    ComplexMatrix x; // N_t x T, s scattered onto the TAC rows
    std::size_t t = 0;
};

/// b1 spatial bits plus N_u * d symbol bits per slot.
inline std::size_t bits_per_frame(const TacTable& table, const QamConstellation& qam, std::size_t t)
{
    return static_cast<std::size_t>(table.spatial_bits()) +
           static_cast<std::size_t>(table.n_u) * static_cast<std::size_t>(qam.bits_per_symbol()) * t;
}

inline Frame assemble_frame(std::span<const std::uint8_t> bits, const TacTable& table, const QamConstellation& qam,
                            std::size_t t)
{
    const std::size_t expected = bits_per_frame(table, qam, t);
    if (bits.size() != expected)
        throw InvalidArgument("assemble_frame: expected " + std::to_string(expected) + " bits, got " +
                              std::to_string(bits.size()));
    Frame f;
    f.bits.assign(bits.begin(), bits.end());
    f.t = t;
    const auto b1 = static_cast<std::size_t>(table.spatial_bits());
    std::size_t idx = 0;
    for (std::size_t i = 0; i < b1; ++i) idx = (idx << 1) | (bits[i] & 1u);
    f.tac_index = idx;

    const auto n_u = static_cast<std::size_t>(table.n_u);
    const auto d = static_cast<std::size_t>(qam.bits_per_symbol());
    f.s = ComplexMatrix(n_u, t);
    f.x = ComplexMatrix(static_cast<std::size_t>(table.n_t), t);
    const Tac& tac = table.tacs[idx];
    std::size_t pos = b1;
    for (std::size_t j = 0; j < t; ++j) {
        for (std::size_t u = 0; u < n_u; ++u) {
            const cplx sym = qam.map(bits.subspan(pos, d));
            pos += d;
            f.s(u, j) = sym;
            f.x(static_cast<std::size_t>(tac[u] - 1), j) = sym;
        }
    }
    return f;
}

inline Bits random_bits(Rng& rng, std::size_t n)
{
    Bits b(n);
    for (auto& v : b) v = static_cast<std::uint8_t>(rng.bit());
    return b;
}

/// Channel seen by one frame: true H and the receiver's estimate.
struct ChannelRealization {
    ComplexMatrix h;
    ComplexMatrix h_est;
    double rho = 0.0;
    double csi_error_var = 0.0;
};

/// i.i.d. Rayleigh channel, entries CN(0, 1/N_r).
inline ComplexMatrix rayleigh_channel(Rng& rng, std::size_t n_r, std::size_t n_t)
{
    return complex_gaussian(rng, n_r, n_t, 1.0 / static_cast<double>(n_r));
}

/// Exponential correlation matrix: rho^(j-i) above the diagonal, Hermitian.
inline ComplexMatrix exponential_correlation(std::size_t n, double rho)
{
    ComplexMatrix r(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            r(i, j) = std::pow(rho, static_cast<double>(j - i));
            r(j, i) = std::conj(r(i, j));
        }
    return r;
}

/// Kronecker-correlated channel L_r H L_t^H with Cholesky factors of the
/// exponential correlation matrices on both sides (same rho). Second-order
/// statistics match the symmetric-square-root form.
inline ComplexMatrix make_correlated(const ComplexMatrix& h, double rho)
{
    if (!(rho >= 0.0 && rho < 1.0)) throw InvalidArgument("make_correlated: rho must be in [0, 1)");
    if (rho == 0.0) return h;
    const ComplexMatrix lr = cholesky_factor(exponential_correlation(h.rows(), rho));
    const ComplexMatrix lt = cholesky_factor(exponential_correlation(h.cols(), rho));
    return lr * h * lt.adjoint();
}

/// Per-entry estimation error variance N_t sigma_z^2 / (N_p E_p).
inline double csi_error_variance(int n_t, double sigma_z2, double n_p, double e_p)
{
    detail::require(n_p > 0.0 && e_p > 0.0 && sigma_z2 >= 0.0, "csi_error_variance: invalid pilot parameters");
    return static_cast<double>(n_t) * sigma_z2 / (n_p * e_p);
}

/// H + Delta with Delta i.i.d. CN(0, error_var).
inline ComplexMatrix corrupt_csi(const ComplexMatrix& h, double error_var, Rng& rng)
{
    if (!(error_var >= 0.0)) throw InvalidArgument("corrupt_csi: error variance must be non-negative");
    if (error_var == 0.0) return h;
    return h + complex_gaussian(rng, h.rows(), h.cols(), error_var);
}

/// Per-entry noise variance for the given SNR, N_u / (N_r 10^(snr/10)).
/// An infinite SNR disables noise.
inline double noise_variance(int n_u, std::size_t n_r, double snr_db)
{
    if (std::isinf(snr_db) && snr_db > 0) return 0.0;
    return static_cast<double>(n_u) / (static_cast<double>(n_r) * std::pow(10.0, snr_db / 10.0));
}

/// Y = H X + N over all T slots of the frame (true channel).
inline ComplexMatrix apply_channel(const Frame& frame, const ChannelRealization& chan, double snr_db, Rng& rng)
{
    if (chan.h.cols() != frame.x.rows())
        throw InvalidArgument("apply_channel: channel has " + std::to_string(chan.h.cols()) +
                              " columns but frame has " + std::to_string(frame.x.rows()) + " antennas");
    ComplexMatrix y = chan.h * frame.x;
    const double var = noise_variance(static_cast<int>(frame.s.rows()), chan.h.rows(), snr_db);
    if (var > 0.0) y += complex_gaussian(rng, y.rows(), y.cols(), var);
    return y;
}

/// Spatial bits for tac_index followed by hard-decided symbol bits per slot.
inline Bits demap_frame(std::size_t tac_index, const ComplexMatrix& s_hat, const TacTable& table,
                        const QamConstellation& qam)
{
    detail::require(tac_index < table.n_l(), "demap_frame: tac index out of range");
    detail::require(s_hat.rows() == static_cast<std::size_t>(table.n_u), "demap_frame: s_hat must have N_u rows");
    Bits out;
    out.reserve(bits_per_frame(table, qam, s_hat.cols()));
    const int b1 = table.spatial_bits();
    for (int b = b1 - 1; b >= 0; --b) out.push_back(static_cast<std::uint8_t>((tac_index >> b) & 1u));
    for (std::size_t j = 0; j < s_hat.cols(); ++j)
        for (std::size_t u = 0; u < s_hat.rows(); ++u) qam.append_bits(s_hat(u, j), out);
    return out;
}

inline std::size_t bit_errors(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b)
{
    if (a.size() != b.size()) throw InvalidArgument("bit_errors: length mismatch");
    std::size_t e = 0;
    for (std::size_t i = 0; i < a.size(); ++i) e += (a[i] & 1u) != (b[i] & 1u);
    return e;
}

inline double ber(std::span<const std::uint8_t> bits_true, std::span<const std::uint8_t> bits_hat)
{
    const std::size_t errs = bit_errors(bits_true, bits_hat);
    return bits_true.empty() ? 0.0 : static_cast<double>(errs) / static_cast<double>(bits_true.size());
}

/// Fraction of frames whose detected TAC exactly matches the transmitted one.
inline double aap_accuracy(std::span<const std::size_t> tacs_true, std::span<const std::size_t> tacs_hat)
{
    if (tacs_true.size() != tacs_hat.size()) throw InvalidArgument("aap_accuracy: length mismatch");
    if (tacs_true.empty()) return 1.0;
    std::size_t ok = 0;
    for (std::size_t i = 0; i < tacs_true.size(); ++i) ok += tacs_true[i] == tacs_hat[i];
    return static_cast<double>(ok) / static_cast<double>(tacs_true.size());
}

} // namespace imnet::phy
