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

#include "imnet/lincomplex.hpp"

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace imnet::cvnn {

/// Per-sample shape (channels, height, width). Dense features use h = w = 1.
struct Shape {
    std::size_t c = 0, h = 1, w = 1;
    std::size_t size() const noexcept { return c * h * w; }
    friend bool operator==(const Shape&, const Shape&) = default;
    std::string str() const
    {
        return "(" + std::to_string(c) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
    }
};

/// Real activation buffer, layout (batch, channels, height, width).
///
/// Complex layers read the channel axis in split form: for n complex
/// channels the first n real channels hold the real parts and the next n
/// the imaginary parts. A complex network and its real twin therefore have
/// identical buffer shapes at every layer.
struct Tensor {
    std::size_t n = 0;
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::size_t batch, Shape s) : n(batch), shape(s), data(batch * s.size(), 0.0) {}

    std::size_t sample_size() const noexcept { return shape.size(); }
    double* sample(std::size_t b) noexcept { return data.data() + b * shape.size(); }
    const double* sample(std::size_t b) const noexcept { return data.data() + b * shape.size(); }

    double& at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) noexcept
    {
        return data[((b * shape.c + c) * shape.h + y) * shape.w + x];
    }
    double at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const noexcept
    {
        return data[((b * shape.c + c) * shape.h + y) * shape.w + x];
    }

    bool all_finite() const noexcept
    {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }
};

/// Complex tensor with interleaved (re, im) storage, layout
/// (batch, channels, height, width).
struct ComplexTensor {
    std::size_t n = 0;
    Shape shape; // complex channels
    std::vector<cplx> data;

    ComplexTensor() = default;
    ComplexTensor(std::size_t batch, Shape s) : n(batch), shape(s), data(batch * s.size()) {}

    cplx& at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) noexcept
    {
        return data[((b * shape.c + c) * shape.h + y) * shape.w + x];
    }
    const cplx& at(std::size_t b, std::size_t c, std::size_t y, std::size_t x) const noexcept
    {
        return data[((b * shape.c + c) * shape.h + y) * shape.w + x];
    }

    /// Split layout with 2c real channels.
    Tensor to_split() const
    {
        Tensor t(n, {2 * shape.c, shape.h, shape.w});
        const std::size_t plane = shape.h * shape.w;
        for (std::size_t b = 0; b < n; ++b)
            for (std::size_t c = 0; c < shape.c; ++c)
                for (std::size_t p = 0; p < plane; ++p) {
                    const cplx z = data[(b * shape.c + c) * plane + p];
                    t.data[(b * 2 * shape.c + c) * plane + p] = z.real();
                    t.data[(b * 2 * shape.c + shape.c + c) * plane + p] = z.imag();
                }
        return t;
    }

    static ComplexTensor from_split(const Tensor& t)
    {
        detail::require(t.shape.c % 2 == 0, "ComplexTensor::from_split: odd channel count");
        const std::size_t nc = t.shape.c / 2;
        ComplexTensor z(t.n, {nc, t.shape.h, t.shape.w});
        const std::size_t plane = t.shape.h * t.shape.w;
        for (std::size_t b = 0; b < t.n; ++b)
            for (std::size_t c = 0; c < nc; ++c)
                for (std::size_t p = 0; p < plane; ++p)
                    z.data[(b * nc + c) * plane + p] = {t.data[(b * t.shape.c + c) * plane + p],
                                                        t.data[(b * t.shape.c + nc + c) * plane + p]};
        return z;
    }
};

/// Packs complex matrices (one per sample, same shape) as a one-channel
/// complex image in split layout: shape (2, rows, cols).
inline Tensor pack_matrices(std::span<const ComplexMatrix* const> mats)
{
    detail::require(!mats.empty(), "pack_matrices: empty batch");
    const std::size_t rows = mats[0]->rows(), cols = mats[0]->cols();
    Tensor t(mats.size(), {2, rows, cols});
    const std::size_t plane = rows * cols;
    for (std::size_t b = 0; b < mats.size(); ++b) {
        detail::require(mats[b]->rows() == rows && mats[b]->cols() == cols, "pack_matrices: shape mismatch");
        double* dst = t.sample(b);
        for (std::size_t i = 0; i < plane; ++i) {
            dst[i] = mats[b]->data()[i].real();
            dst[plane + i] = mats[b]->data()[i].imag();
        }
    }
    return t;
}

inline ComplexMatrix unpack_matrix(const Tensor& t, std::size_t b)
{
    detail::require(t.shape.c == 2, "unpack_matrix: expected one complex channel");
    ComplexMatrix m(t.shape.h, t.shape.w);
    const std::size_t plane = t.shape.h * t.shape.w;
    const double* src = t.sample(b);
    for (std::size_t i = 0; i < plane; ++i) m.data()[i] = {src[i], src[plane + i]};
    return m;
}

} // namespace imnet::cvnn
