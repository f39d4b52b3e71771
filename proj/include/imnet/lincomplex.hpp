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

// Minimal dense complex linear algebra: matrices, a counter-based RNG,
// Householder least squares and Cholesky.

#pragma once

#include "imnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace imnet {

using cplx = std::complex<double>;

/// Dense row-major complex matrix. Storage is interleaved (re, im) pairs.
class ComplexMatrix {
public:
    ComplexMatrix() = default;
    ComplexMatrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols)
    {
    }
    ComplexMatrix(std::size_t rows, std::size_t cols, std::vector<cplx> data)
        : rows_(rows), cols_(cols), data_(std::move(data))
    {
        detail::require(data_.size() == rows_ * cols_, "ComplexMatrix: data size does not match shape");
    }
    ComplexMatrix(std::initializer_list<std::initializer_list<cplx>> rows)
        : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0)
    {
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            detail::require(r.size() == cols_, "ComplexMatrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static ComplexMatrix identity(std::size_t n)
    {
        ComplexMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    cplx& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<cplx> data() noexcept { return data_; }
    std::span<const cplx> data() const noexcept { return data_; }

    ComplexMatrix adjoint() const
    {
        ComplexMatrix out(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) out(c, r) = std::conj((*this)(r, c));
        return out;
    }

    /// Columns picked by 0-based index, in the given order.
    ComplexMatrix select_columns(std::span<const std::size_t> idx) const
    {
        ComplexMatrix out(rows_, idx.size());
        for (std::size_t j = 0; j < idx.size(); ++j) {
            detail::require(idx[j] < cols_, "select_columns: index out of range");
            for (std::size_t r = 0; r < rows_; ++r) out(r, j) = (*this)(r, idx[j]);
        }
        return out;
    }

    double frobenius_norm_sq() const noexcept
    {
        double acc = 0.0;
        for (const auto& z : data_) acc += std::norm(z);
        return acc;
    }
    double frobenius_norm() const noexcept { return std::sqrt(frobenius_norm_sq()); }

    bool all_finite() const noexcept
    {
        return std::all_of(data_.begin(), data_.end(),
                           [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
    }

    ComplexMatrix& operator+=(const ComplexMatrix& o)
    {
        detail::require(rows_ == o.rows_ && cols_ == o.cols_, "ComplexMatrix +=: shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
        return *this;
    }
    ComplexMatrix& operator-=(const ComplexMatrix& o)
    {
        detail::require(rows_ == o.rows_ && cols_ == o.cols_, "ComplexMatrix -=: shape mismatch");
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
        return *this;
    }
    ComplexMatrix& operator*=(cplx s)
    {
        for (auto& z : data_) z *= s;
        return *this;
    }

    friend ComplexMatrix operator+(ComplexMatrix a, const ComplexMatrix& b) { return a += b; }
    friend ComplexMatrix operator-(ComplexMatrix a, const ComplexMatrix& b) { return a -= b; }
    friend ComplexMatrix operator*(ComplexMatrix a, cplx s) { return a *= s; }

    friend ComplexMatrix operator*(const ComplexMatrix& a, const ComplexMatrix& b)
    {
        detail::require(a.cols_ == b.rows_, "ComplexMatrix *: inner dimension mismatch");
        ComplexMatrix out(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i) {
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const cplx aik = a(i, k);
                const double ar = aik.real(), ai = aik.imag();
                if (ar == 0.0 && ai == 0.0) continue;
                const cplx* brow = &b.data_[k * b.cols_];
                cplx* orow = &out.data_[i * b.cols_];
                for (std::size_t j = 0; j < b.cols_; ++j) {
                    const double br = brow[j].real(), bi = brow[j].imag();
                    orow[j] += cplx(ar * br - ai * bi, ar * bi + ai * br);
                }
            }
        }
        return out;
    }

    friend bool operator==(const ComplexMatrix&, const ComplexMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<cplx> data_;
};

/// Counter-based generator: output n is a SplitMix64 mix of (seed, n). The
/// stream depends only on the seed, so runs are reproducible across
/// platforms and compilers (std:: distributions are not).
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) noexcept : seed_(seed) {}

    static constexpr std::uint64_t mix(std::uint64_t z) noexcept
    {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Independent seed for work unit (stream, index) of a run.
    static constexpr std::uint64_t derive(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) noexcept
    {
        return mix(mix(seed ^ mix(stream + 0x632BE59BD9B4E019ULL)) + mix(index ^ 0xA0761D6478BD642FULL));
    }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t counter() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept
    {
        ++counter_;
        return mix(seed_ + counter_ * 0x9E3779B97F4A7C15ULL);
    }

    /// Uniform on the open interval (0, 1).
    double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) noexcept
    {
        // multiply-shift; bias is < 2^-64 * n and irrelevant here
        return static_cast<std::uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    int bit() noexcept { return static_cast<int>(next_u64() >> 63); }

    /// Circular complex Gaussian with E|z|^2 = variance (Box-Muller).
    cplx complex_normal(double variance) noexcept
    {
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-variance * std::log(u1));
        const double th = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(th), r * std::sin(th)};
    }

    /// Real standard normal (first Box-Muller branch).
    double normal() noexcept { return complex_normal(2.0).real(); }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

/// Matrix with i.i.d. CN(0, variance) entries.
inline ComplexMatrix complex_gaussian(Rng& rng, std::size_t rows, std::size_t cols, double variance)
{
    if (!(variance > 0.0) || !std::isfinite(variance))
        throw InvalidArgument("complex_gaussian: variance must be positive, got " + std::to_string(variance));
    ComplexMatrix m(rows, cols);
    for (auto& z : m.data()) z = rng.complex_normal(variance);
    return m;
}

/// Least-squares solution of A X = B for tall, full-column-rank A, i.e.
/// (A^H A)^{-1} A^H B, computed through a Householder QR of A.
inline ComplexMatrix ls_solve(const ComplexMatrix& a, const ComplexMatrix& b)
{
    const std::size_t m = a.rows(), n = a.cols(), k = b.cols();
    detail::require(m >= n, "ls_solve: A must have at least as many rows as columns");
    detail::require(b.rows() == m, "ls_solve: A and B row counts differ");
    detail::require(n > 0, "ls_solve: A has no columns");

    ComplexMatrix r = a;
    ComplexMatrix qb = b;
    std::vector<cplx> v(m);

    for (std::size_t j = 0; j < n; ++j) {
        double norm_sq = 0.0;
        for (std::size_t i = j; i < m; ++i) norm_sq += std::norm(r(i, j));
        const double norm = std::sqrt(norm_sq);
        if (norm == 0.0) continue; // caught by the pivot check below

        const cplx x0 = r(j, j);
        const double ax0 = std::abs(x0);
        const cplx phase = ax0 > 0.0 ? x0 / ax0 : cplx(1.0);
        const cplx alpha = -phase * norm; // reflect onto -phase*|x| e1 to avoid cancellation

        for (std::size_t i = j; i < m; ++i) v[i] = r(i, j);
        v[j] -= alpha;
        double vnorm_sq = 0.0;
        for (std::size_t i = j; i < m; ++i) vnorm_sq += std::norm(v[i]);
        if (vnorm_sq == 0.0) continue;
        const double tau = 2.0 / vnorm_sq;

        auto reflect = [&](ComplexMatrix& target, std::size_t col) {
            cplx dot = 0.0;
            for (std::size_t i = j; i < m; ++i) dot += std::conj(v[i]) * target(i, col);
            dot *= tau;
            for (std::size_t i = j; i < m; ++i) target(i, col) -= v[i] * dot;
        };
        for (std::size_t c = j; c < n; ++c) reflect(r, c);
        for (std::size_t c = 0; c < k; ++c) reflect(qb, c);
    }

    double max_pivot = 0.0;
    for (std::size_t j = 0; j < n; ++j) max_pivot = std::max(max_pivot, std::abs(r(j, j)));
    for (std::size_t j = 0; j < n; ++j) {
        if (!(std::abs(r(j, j)) > 1e-12 * max_pivot))
            throw SingularMatrix("ls_solve: A is rank deficient (pivot " + std::to_string(j) + ")");
    }

    ComplexMatrix x(n, k);
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t jj = n; jj-- > 0;) {
            cplx acc = qb(jj, c);
            for (std::size_t l = jj + 1; l < n; ++l) acc -= r(jj, l) * x(l, c);
            x(jj, c) = acc / r(jj, jj);
        }
    }
    return x;
}

/// Lower-triangular L with L L^H = R for Hermitian positive definite R.
inline ComplexMatrix cholesky_factor(const ComplexMatrix& rmat)
{
    const std::size_t n = rmat.rows();
    detail::require(rmat.cols() == n, "cholesky_factor: matrix must be square");
    ComplexMatrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double diag = rmat(j, j).real();
        for (std::size_t p = 0; p < j; ++p) diag -= std::norm(l(j, p));
        if (!(diag > 0.0)) throw DecompositionError("cholesky_factor: matrix is not positive definite");
        const double ljj = std::sqrt(diag);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            cplx acc = rmat(i, j);
            for (std::size_t p = 0; p < j; ++p) acc -= l(i, p) * std::conj(l(j, p));
            l(i, j) = acc / ljj;
        }
    }
    return l;
}

} // namespace imnet
