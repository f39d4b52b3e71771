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

// Layers of the complex-valued network engine and their real twins.
//
// Backpropagation runs on the split (real, imag) representation. For a
// real-valued loss this is the complex gradient 2 dL/d(conj z): the real
// slot of a parameter's gradient is dL/d(Re z) and the imaginary slot is
// dL/d(Im z).

#pragma once

#include "imnet/cvnn/tensor.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

namespace imnet::cvnn {

enum class Mode { train, infer };

enum class LayerKind : std::uint16_t {
    complex_conv2d = 1,
    complex_dense = 2,
    relu = 3,    // split ReLU: ReLU(Re z) + j ReLU(Im z); plain ReLU on real tensors
    sigmoid = 4, // split sigmoid, likewise
    complex_batchnorm = 5,
    real_dense = 6, // real twin of complex_dense; also the real probability head
    flatten = 7,
    residual_add = 8, // adds the model input to the running activation
    real_conv2d = 9,
    real_batchnorm = 10,
};

inline std::string_view to_string(LayerKind k)
{
    switch (k) {
    case LayerKind::complex_conv2d: return "complex_conv2d";
    case LayerKind::complex_dense: return "complex_dense";
    case LayerKind::relu: return "relu";
    case LayerKind::sigmoid: return "sigmoid";
    case LayerKind::complex_batchnorm: return "complex_batchnorm";
    case LayerKind::real_dense: return "real_dense";
    case LayerKind::flatten: return "flatten";
    case LayerKind::residual_add: return "residual_add";
    case LayerKind::real_conv2d: return "real_conv2d";
    case LayerKind::real_batchnorm: return "real_batchnorm";
    }
    return "unknown";
}

inline bool is_complex_kind(LayerKind k)
{
    return k == LayerKind::complex_conv2d || k == LayerKind::complex_dense || k == LayerKind::complex_batchnorm;
}

/// Layer hyperparameters. Channel and feature counts of complex layers are
/// in complex units; real layers count real slots.
struct LayerSpec {
    LayerKind kind = LayerKind::relu;
    std::uint32_t out = 0;     // output channels / features
    std::uint32_t kernel = 0;  // square kernel size
    std::uint32_t stride = 1;
    std::uint32_t padding = 0;
    double eps = 1e-5;
    double momentum = 0.9;     // weight of the old running statistics
    bool zero_init = false;    // zero weights instead of Glorot init

    static LayerSpec complex_conv(std::uint32_t out, std::uint32_t k, std::uint32_t pad, bool zero = false)
    {
        return {LayerKind::complex_conv2d, out, k, 1, pad, 1e-5, 0.9, zero};
    }
    static LayerSpec real_conv(std::uint32_t out, std::uint32_t k, std::uint32_t pad, bool zero = false)
    {
        return {LayerKind::real_conv2d, out, k, 1, pad, 1e-5, 0.9, zero};
    }
    static LayerSpec complex_dense(std::uint32_t out) { return {LayerKind::complex_dense, out}; }
    static LayerSpec real_dense(std::uint32_t out) { return {LayerKind::real_dense, out}; }
    static LayerSpec of(LayerKind k) { return {k}; }

    friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Trainable parameter block. Complex parameters store all real parts
/// followed by all imaginary parts.
struct Param {
    std::string name;
    std::vector<double> value;
    std::vector<double> grad;
    bool complex = false;

    Param() = default;
    Param(std::string nm, std::size_t n, bool is_complex)
        : name(std::move(nm)), value(n, 0.0), grad(n, 0.0), complex(is_complex)
    {
    }
};

class Layer {
public:
    Layer(LayerSpec spec, Shape in) : spec_(spec), in_(in) {}
    virtual ~Layer() = default;

    const LayerSpec& spec() const noexcept { return spec_; }
    LayerKind kind() const noexcept { return spec_.kind; }
    Shape input_shape() const noexcept { return in_; }
    Shape output_shape() const noexcept { return out_; }

    virtual Tensor forward(const Tensor& x, Mode mode) = 0;
    /// Accumulates parameter gradients and returns dL/dx.
    virtual Tensor backward(const Tensor& grad_out) = 0;

    virtual std::vector<Param*> params() { return {}; }
    /// Non-trainable state that is checkpointed (BN running statistics).
    virtual std::vector<std::vector<double>*> buffers() { return {}; }

    /// Kernel weights in the Table-style convention: k*k*N_in*N_out for a
    /// real conv, half of that for a complex conv with the same real-slot
    /// widths, N_in*N_out (or half) for dense layers. Biases and BN excluded.
    virtual std::uint64_t weight_count() const { return 0; }
    /// Real FLOPs of one single-sample forward pass.
    virtual std::uint64_t flops() const { return 0; }

protected:
    void check_input(const Tensor& x) const
    {
        if (!(x.shape == in_))
            throw InvalidArgument(std::string(to_string(spec_.kind)) + ": expected input " + in_.str() + ", got " +
                                  x.shape.str());
    }
    void require_cache(bool ok) const
    {
        if (!ok) throw StateError(std::string(to_string(spec_.kind)) + ": backward called without a cached forward");
    }

    LayerSpec spec_;
    Shape in_;
    Shape out_;
};

namespace kernels {

inline std::size_t conv_out(std::size_t n, std::size_t k, std::size_t stride, std::size_t pad)
{
    return (n + 2 * pad - k) / stride + 1;
}

/// Geometry of one 2-D correlation (the usual deep-learning "convolution").
struct ConvGeom {
    std::size_t ci, h, w, co, k, stride, pad, ho, wo;

    std::size_t x_lo(std::size_t kx) const
    {
        // first x with x*stride + kx - pad >= 0
        if (kx >= pad) return 0;
        return (pad - kx + stride - 1) / stride;
    }
    std::size_t x_hi(std::size_t kx) const
    {
        // one past last x with x*stride + kx - pad < w
        if (kx + w <= pad) return 0;
        const std::size_t lim = (w + pad - kx - 1) / stride + 1;
        return std::min(lim, wo);
    }
};

/// out[o] += sign * sum_c w[o,c] (*) in[c]
inline void conv_forward(const ConvGeom& g, const double* in, const double* w, double sign, double* out)
{
    for (std::size_t o = 0; o < g.co; ++o) {
        double* op = out + o * g.ho * g.wo;
        for (std::size_t c = 0; c < g.ci; ++c) {
            const double* ip = in + c * g.h * g.w;
            for (std::size_t ky = 0; ky < g.k; ++ky) {
                for (std::size_t kx = 0; kx < g.k; ++kx) {
                    const double wv = sign * w[((o * g.ci + c) * g.k + ky) * g.k + kx];
                    const std::size_t xl = g.x_lo(kx), xh = g.x_hi(kx);
                    for (std::size_t y = 0; y < g.ho; ++y) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                        const double* row = ip + static_cast<std::size_t>(iy) * g.w;
                        double* orow = op + y * g.wo;
                        if (g.stride == 1) {
                            const double* src = row + kx - g.pad;
                            for (std::size_t x = xl; x < xh; ++x) orow[x] += wv * src[x];
                        } else {
                            for (std::size_t x = xl; x < xh; ++x) orow[x] += wv * row[x * g.stride + kx - g.pad];
                        }
                    }
                }
            }
        }
    }
}

/// gin[c] += sign * sum_o w[o,c] (*)^T gout[o]; gw[o,c] += sign * gout[o] . in[c]
inline void conv_backward(const ConvGeom& g, const double* in, const double* w, const double* gout, double sign,
                          double* gin, double* gw)
{
    for (std::size_t o = 0; o < g.co; ++o) {
        const double* gp = gout + o * g.ho * g.wo;
        for (std::size_t c = 0; c < g.ci; ++c) {
            const double* ip = in + c * g.h * g.w;
            double* gip = gin ? gin + c * g.h * g.w : nullptr;
            for (std::size_t ky = 0; ky < g.k; ++ky) {
                for (std::size_t kx = 0; kx < g.k; ++kx) {
                    const std::size_t widx = ((o * g.ci + c) * g.k + ky) * g.k + kx;
                    const double wv = sign * w[widx];
                    const std::size_t xl = g.x_lo(kx), xh = g.x_hi(kx);
                    double acc = 0.0;
                    for (std::size_t y = 0; y < g.ho; ++y) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(y * g.stride + ky) - static_cast<std::ptrdiff_t>(g.pad);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
                        const std::size_t roff = static_cast<std::size_t>(iy) * g.w;
                        const double* grow = gp + y * g.wo;
                        if (g.stride == 1) {
                            const double* src = ip + roff + kx - g.pad;
                            for (std::size_t x = xl; x < xh; ++x) acc += grow[x] * src[x];
                            if (gip) {
                                double* dst = gip + roff + kx - g.pad;
                                for (std::size_t x = xl; x < xh; ++x) dst[x] += wv * grow[x];
                            }
                        } else {
                            for (std::size_t x = xl; x < xh; ++x) {
                                const std::size_t ix = roff + x * g.stride + kx - g.pad;
                                acc += grow[x] * ip[ix];
                                if (gip) gip[ix] += wv * grow[x];
                            }
                        }
                    }
                    if (gw) gw[widx] += sign * acc;
                }
            }
        }
    }
}

} // namespace kernels

/// Uniform Glorot-style initialisation. Complex parameters draw each slot
/// with the range scaled by 1/sqrt(2).
inline void glorot_init(Param& p, std::size_t fan_in, std::size_t fan_out, Rng& rng)
{
    double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    if (p.complex) limit /= std::sqrt(2.0);
    for (auto& v : p.value) v = rng.uniform(-limit, limit);
}

/// Complex convolution on split tensors:
///   Re out = W_r (*) X_r - W_i (*) X_i,  Im out = W_i (*) X_r + W_r (*) X_i.
class ComplexConv2d final : public Layer {
public:
    ComplexConv2d(LayerSpec s, Shape in, Rng& rng) : Layer(s, in)
    {
        detail::require(in.c % 2 == 0, "complex_conv2d: input must have an even number of split channels");
        detail::require(s.kernel >= 1 && s.out >= 1 && s.stride >= 1, "complex_conv2d: invalid hyperparameters");
        detail::require(in.h + 2 * s.padding >= s.kernel && in.w + 2 * s.padding >= s.kernel,
                        "complex_conv2d: kernel does not fit the padded input");
        g_ = {in.c / 2, in.h, in.w, s.out, s.kernel, s.stride, s.padding,
              kernels::conv_out(in.h, s.kernel, s.stride, s.padding),
              kernels::conv_out(in.w, s.kernel, s.stride, s.padding)};
        out_ = {2 * g_.co, g_.ho, g_.wo};
        const std::size_t nw = g_.co * g_.ci * g_.k * g_.k;
        weight_ = Param("weight", 2 * nw, true);
        bias_ = Param("bias", 2 * g_.co, true);
        if (!s.zero_init) glorot_init(weight_, g_.ci * g_.k * g_.k, g_.co * g_.k * g_.k, rng);
    }

    Tensor forward(const Tensor& x, Mode) override
    {
        check_input(x);
        cache_ = x;
        Tensor y(x.n, out_);
        const std::size_t nw = weight_.value.size() / 2;
        const double* wr = weight_.value.data();
        const double* wi = wr + nw;
        const std::size_t in_half = g_.ci * g_.h * g_.w, out_half = g_.co * g_.ho * g_.wo;
        for (std::size_t b = 0; b < x.n; ++b) {
            const double* xr = x.sample(b);
            const double* xi = xr + in_half;
            double* yr = y.sample(b);
            double* yi = yr + out_half;
            kernels::conv_forward(g_, xr, wr, 1.0, yr);
            kernels::conv_forward(g_, xi, wi, -1.0, yr);
            kernels::conv_forward(g_, xr, wi, 1.0, yi);
            kernels::conv_forward(g_, xi, wr, 1.0, yi);
            for (std::size_t o = 0; o < g_.co; ++o) {
                const double br = bias_.value[o], bi = bias_.value[g_.co + o];
                for (std::size_t p = 0; p < g_.ho * g_.wo; ++p) {
                    yr[o * g_.ho * g_.wo + p] += br;
                    yi[o * g_.ho * g_.wo + p] += bi;
                }
            }
        }
        return y;
    }

    Tensor backward(const Tensor& gy) override
    {
        require_cache(cache_.n == gy.n && cache_.n > 0);
        Tensor gx(cache_.n, in_);
        const std::size_t nw = weight_.value.size() / 2;
        const double* wr = weight_.value.data();
        const double* wi = wr + nw;
        double* gwr = weight_.grad.data();
        double* gwi = gwr + nw;
        const std::size_t in_half = g_.ci * g_.h * g_.w, out_half = g_.co * g_.ho * g_.wo;
        for (std::size_t b = 0; b < gy.n; ++b) {
            const double* xr = cache_.sample(b);
            const double* xi = xr + in_half;
            const double* gr = gy.sample(b);
            const double* gi = gr + out_half;
            double* gxr = gx.sample(b);
            double* gxi = gxr + in_half;
            // dX_r = W_r^T g_r + W_i^T g_i ; dX_i = -W_i^T g_r + W_r^T g_i
            // dW_r = g_r.X_r + g_i.X_i     ; dW_i = -g_r.X_i + g_i.X_r
            kernels::conv_backward(g_, xr, wr, gr, 1.0, gxr, gwr);
            kernels::conv_backward(g_, xi, wi, gr, -1.0, gxi, gwi);
            kernels::conv_backward(g_, xr, wi, gi, 1.0, gxr, gwi);
            kernels::conv_backward(g_, xi, wr, gi, 1.0, gxi, gwr);
            for (std::size_t o = 0; o < g_.co; ++o)
                for (std::size_t p = 0; p < g_.ho * g_.wo; ++p) {
                    bias_.grad[o] += gr[o * g_.ho * g_.wo + p];
                    bias_.grad[g_.co + o] += gi[o * g_.ho * g_.wo + p];
                }
        }
        return gx;
    }

    std::vector<Param*> params() override { return {&weight_, &bias_}; }
    std::uint64_t weight_count() const override { return 2ull * g_.co * g_.ci * g_.k * g_.k; }
    std::uint64_t flops() const override
    {
        const std::uint64_t outs = g_.co * g_.ho * g_.wo;
        return 8ull * outs * g_.ci * g_.k * g_.k + 2ull * outs;
    }

private:
    kernels::ConvGeom g_{};
    Param weight_, bias_;
    Tensor cache_;
};

class RealConv2d final : public Layer {
public:
    RealConv2d(LayerSpec s, Shape in, Rng& rng) : Layer(s, in)
    {
        detail::require(s.kernel >= 1 && s.out >= 1 && s.stride >= 1, "real_conv2d: invalid hyperparameters");
        detail::require(in.h + 2 * s.padding >= s.kernel && in.w + 2 * s.padding >= s.kernel,
                        "real_conv2d: kernel does not fit the padded input");
        g_ = {in.c, in.h, in.w, s.out, s.kernel, s.stride, s.padding,
              kernels::conv_out(in.h, s.kernel, s.stride, s.padding),
              kernels::conv_out(in.w, s.kernel, s.stride, s.padding)};
        out_ = {g_.co, g_.ho, g_.wo};
        weight_ = Param("weight", g_.co * g_.ci * g_.k * g_.k, false);
        bias_ = Param("bias", g_.co, false);
        if (!s.zero_init) glorot_init(weight_, g_.ci * g_.k * g_.k, g_.co * g_.k * g_.k, rng);
    }

    Tensor forward(const Tensor& x, Mode) override
    {
        check_input(x);
        cache_ = x;
        Tensor y(x.n, out_);
        for (std::size_t b = 0; b < x.n; ++b) {
            double* yp = y.sample(b);
            kernels::conv_forward(g_, x.sample(b), weight_.value.data(), 1.0, yp);
            for (std::size_t o = 0; o < g_.co; ++o)
                for (std::size_t p = 0; p < g_.ho * g_.wo; ++p) yp[o * g_.ho * g_.wo + p] += bias_.value[o];
        }
        return y;
    }

    Tensor backward(const Tensor& gy) override
    {
        require_cache(cache_.n == gy.n && cache_.n > 0);
        Tensor gx(cache_.n, in_);
        for (std::size_t b = 0; b < gy.n; ++b) {
            const double* gp = gy.sample(b);
            kernels::conv_backward(g_, cache_.sample(b), weight_.value.data(), gp, 1.0, gx.sample(b),
                                   weight_.grad.data());
            for (std::size_t o = 0; o < g_.co; ++o)
                for (std::size_t p = 0; p < g_.ho * g_.wo; ++p) bias_.grad[o] += gp[o * g_.ho * g_.wo + p];
        }
        return gx;
    }

    std::vector<Param*> params() override { return {&weight_, &bias_}; }
    std::uint64_t weight_count() const override { return 1ull * g_.co * g_.ci * g_.k * g_.k; }
    std::uint64_t flops() const override
    {
        const std::uint64_t outs = g_.co * g_.ho * g_.wo;
        return 2ull * outs * g_.ci * g_.k * g_.k + outs;
    }

private:
    kernels::ConvGeom g_{};
    Param weight_, bias_;
    Tensor cache_;
};

/// Fully connected complex layer on split feature vectors.
class ComplexDense final : public Layer {
public:
    ComplexDense(LayerSpec s, Shape in, Rng& rng) : Layer(s, in)
    {
        detail::require(in.h == 1 && in.w == 1, "complex_dense: input must be flat (use flatten)");
        detail::require(in.c % 2 == 0, "complex_dense: input must have an even number of split features");
        detail::require(s.out >= 1, "complex_dense: out must be positive");
        nin_ = in.c / 2;
        nout_ = s.out;
        out_ = {2 * nout_, 1, 1};
        weight_ = Param("weight", 2 * nin_ * nout_, true);
        bias_ = Param("bias", 2 * nout_, true);
        if (!s.zero_init) glorot_init(weight_, nin_, nout_, rng);
    }

    Tensor forward(const Tensor& x, Mode) override
    {
        check_input(x);
        cache_ = x;
        Tensor y(x.n, out_);
        const double* wr = weight_.value.data();
        const double* wi = wr + nin_ * nout_;
        for (std::size_t b = 0; b < x.n; ++b) {
            const double* xr = x.sample(b);
            const double* xi = xr + nin_;
            double* yr = y.sample(b);
            double* yi = yr + nout_;
            for (std::size_t o = 0; o < nout_; ++o) {
                const double* a = wr + o * nin_;
                const double* c = wi + o * nin_;
                double sr = bias_.value[o], si = bias_.value[nout_ + o];
                for (std::size_t i = 0; i < nin_; ++i) {
                    sr += a[i] * xr[i] - c[i] * xi[i];
                    si += c[i] * xr[i] + a[i] * xi[i];
                }
                yr[o] = sr;
                yi[o] = si;
            }
        }
        return y;
    }

    Tensor backward(const Tensor& gy) override
    {
        require_cache(cache_.n == gy.n && cache_.n > 0);
        Tensor gx(cache_.n, in_);
        const double* wr = weight_.value.data();
        const double* wi = wr + nin_ * nout_;
        double* gwr = weight_.grad.data();
        double* gwi = gwr + nin_ * nout_;
        for (std::size_t b = 0; b < gy.n; ++b) {
            const double* xr = cache_.sample(b);
            const double* xi = xr + nin_;
            const double* gr = gy.sample(b);
            const double* gi = gr + nout_;
            double* gxr = gx.sample(b);
            double* gxi = gxr + nin_;
            for (std::size_t o = 0; o < nout_; ++o) {
                const double a = gr[o], c = gi[o];
                bias_.grad[o] += a;
                bias_.grad[nout_ + o] += c;
                const double* wro = wr + o * nin_;
                const double* wio = wi + o * nin_;
                double* gwro = gwr + o * nin_;
                double* gwio = gwi + o * nin_;
                for (std::size_t i = 0; i < nin_; ++i) {
                    gxr[i] += wro[i] * a + wio[i] * c;
                    gxi[i] += -wio[i] * a + wro[i] * c;
                    gwro[i] += a * xr[i] + c * xi[i];
                    gwio[i] += -a * xi[i] + c * xr[i];
                }
            }
        }
        return gx;
    }

    std::vector<Param*> params() override { return {&weight_, &bias_}; }
    std::uint64_t weight_count() const override { return 2ull * nin_ * nout_; }
    std::uint64_t flops() const override { return 8ull * nin_ * nout_ + 2ull * nout_; }

private:
    std::size_t nin_ = 0, nout_ = 0;
    Param weight_, bias_;
    Tensor cache_;
};

class RealDense final : public Layer {
public:
    RealDense(LayerSpec s, Shape in, Rng& rng) : Layer(s, in)
    {
        detail::require(in.h == 1 && in.w == 1, "real_dense: input must be flat (use flatten)");
        detail::require(s.out >= 1, "real_dense: out must be positive");
        nin_ = in.c;
        nout_ = s.out;
        out_ = {nout_, 1, 1};
        weight_ = Param("weight", nin_ * nout_, false);
        bias_ = Param("bias", nout_, false);
        if (!s.zero_init) glorot_init(weight_, nin_, nout_, rng);
    }

    Tensor forward(const Tensor& x, Mode) override
    {
        check_input(x);
        cache_ = x;
        Tensor y(x.n, out_);
        for (std::size_t b = 0; b < x.n; ++b) {
            const double* xp = x.sample(b);
            double* yp = y.sample(b);
            for (std::size_t o = 0; o < nout_; ++o) {
                const double* w = weight_.value.data() + o * nin_;
                double acc = bias_.value[o];
                for (std::size_t i = 0; i < nin_; ++i) acc += w[i] * xp[i];
                yp[o] = acc;
            }
        }
        return y;
    }

    Tensor backward(const Tensor& gy) override
    {
        require_cache(cache_.n == gy.n && cache_.n > 0);
        Tensor gx(cache_.n, in_);
        for (std::size_t b = 0; b < gy.n; ++b) {
            const double* xp = cache_.sample(b);
            const double* gp = gy.sample(b);
            double* gxp = gx.sample(b);
            for (std::size_t o = 0; o < nout_; ++o) {
                const double g = gp[o];
                bias_.grad[o] += g;
                const double* w = weight_.value.data() + o * nin_;
                double* gw = weight_.grad.data() + o * nin_;
                for (std::size_t i = 0; i < nin_; ++i) {
                    gxp[i] += w[i] * g;
                    gw[i] += g * xp[i];
                }
            }
        }
        return gx;
    }

    std::vector<Param*> params() override { return {&weight_, &bias_}; }
    std::uint64_t weight_count() const override { return 1ull * nin_ * nout_; }
    std::uint64_t flops() const override { return 2ull * nin_ * nout_ + nout_; }

private:
    std::size_t nin_ = 0, nout_ = 0;
    Param weight_, bias_;
    Tensor cache_;
};

/// Split ReLU. On a split tensor this is f(z) = ReLU(Re z) + j ReLU(Im z).
class Relu final : public Layer {
public:
    Relu(LayerSpec s, Shape in) : Layer(s, in) { out_ = in; }

    Tensor forward(const Tensor& x, Mode) override
    {
        check_input(x);
        cache_ = x;
        Tensor y = x;
        for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
        return y;
    }
    Tensor backward(const Tensor& gy) override
    {
        require_cache(cache_.n == gy.n && cache_.n > 0);
        Tensor gx = gy;
        for (std::size_t i = 0; i < gx.data.size(); ++i)
            if (!(cache_.data[i] > 0.0)) gx.data[i] = 0.0;
        return gx;
    }
    std::uint64_t flops() const override { return in_.size(); }

private:
    Tensor cache_;
};

/// Split sigmoid, f(z) = sigma(Re z) + j sigma(Im z).
class Sigmoid final : public Layer {
public:
    Sigmoid(LayerSpec s, Shape in) : Layer(s, in) { out_ = in; }

    static double sigma(double v) noexcept
    {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    }

    Tensor forward(const Tensor& x, Mode) override
    {
        check_input(x);
        Tensor y = x;
        for (auto& v : y.data) v = sigma(v);
        cache_ = y;
        return y;
    }
    Tensor backward(const Tensor& gy) override
    {
        require_cache(cache_.n == gy.n && cache_.n > 0);
        Tensor gx = gy;
        for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] *= cache_.data[i] * (1.0 - cache_.data[i]);
        return gx;
    }
    std::uint64_t flops() const override { return 4ull * in_.size(); }

private:
    Tensor cache_; // outputs
};

class Flatten final : public Layer {
public:
    Flatten(LayerSpec s, Shape in) : Layer(s, in) { out_ = {in.size(), 1, 1}; }

    Tensor forward(const Tensor& x, Mode) override
    {
        check_input(x);
        n_ = x.n;
        Tensor y = x;
        y.shape = out_;
        return y;
    }
    Tensor backward(const Tensor& gy) override
    {
        require_cache(n_ == gy.n && n_ > 0);
        Tensor gx = gy;
        gx.shape = in_;
        return gx;
    }

private:
    std::size_t n_ = 0;
};

/// Marker layer; Model adds its own input here. Shapes must match.
class ResidualAdd final : public Layer {
public:
    ResidualAdd(LayerSpec s, Shape in) : Layer(s, in) { out_ = in; }
    Tensor forward(const Tensor& x, Mode) override { return x; }
    Tensor backward(const Tensor& gy) override { return gy; }
    std::uint64_t flops() const override { return in_.size(); }
};

/// Complex batch normalisation: per complex channel the (re, im) pairs are
/// whitened with (V + eps I)^{-1/2}, V the 2x2 batch covariance, then
/// scaled by a real 2x2 gamma and shifted by a complex beta.
class ComplexBatchNorm final : public Layer {
public:
    ComplexBatchNorm(LayerSpec s, Shape in) : Layer(s, in)
    {
        detail::require(in.c % 2 == 0, "complex_batchnorm: input must have an even number of split channels");
        detail::require(s.eps > 0.0 && s.momentum > 0.0 && s.momentum < 1.0, "complex_batchnorm: bad eps/momentum");
        out_ = in;
        nc_ = in.c / 2;
        gamma_ = Param("gamma", 4 * nc_, false); // rr, ri, ir, ii per channel
        beta_ = Param("beta", 2 * nc_, true);
        for (std::size_t c = 0; c < nc_; ++c) {
            gamma_.value[4 * c + 0] = 1.0 / std::sqrt(2.0);
            gamma_.value[4 * c + 3] = 1.0 / std::sqrt(2.0);
        }
        running_mean_.assign(2 * nc_, 0.0);
        running_cov_.assign(4 * nc_, 0.0);
        for (std::size_t c = 0; c < nc_; ++c) {
            running_cov_[4 * c + 0] = 1.0;
            running_cov_[4 * c + 3] = 1.0;
        }
    }

    struct Whitener {
        double w11, w12, w22; // symmetric (V + eps I)^{-1/2}
    };

    /// Closed-form inverse square root of [[a, b], [b, d]] (SPD).
    static Whitener inv_sqrt(double a, double b, double d)
    {
        const double s = std::sqrt(a * d - b * b);
        const double t = std::sqrt(a + d + 2.0 * s);
        const double inv = 1.0 / (s * t);
        return {(d + s) * inv, -b * inv, (a + s) * inv};
    }

    Tensor forward(const Tensor& x, Mode mode) override
    {
        check_input(x);
        if (mode == Mode::train && x.n < 2) throw InvalidArgument("complex_batchnorm: train mode needs batch size >= 2");
        const std::size_t plane = in_.h * in_.w;
        const std::size_t count = x.n * plane;
        Tensor y(x.n, out_);
        train_cache_ = mode == Mode::train;
        cache_n_ = x.n;
        xhat_.assign(x.data.size(), 0.0);
        centered_.assign(x.data.size(), 0.0);
        stats_.assign(nc_, {});
        for (std::size_t c = 0; c < nc_; ++c) {
            const std::size_t rc = c, ic = nc_ + c;
            double mr, mi, vrr, vri, vii;
            if (mode == Mode::train) {
                mr = mi = 0.0;
                for (std::size_t b = 0; b < x.n; ++b) {
                    const double* xr = x.sample(b) + rc * plane;
                    const double* xi = x.sample(b) + ic * plane;
                    for (std::size_t p = 0; p < plane; ++p) {
                        mr += xr[p];
                        mi += xi[p];
                    }
                }
                mr /= static_cast<double>(count);
                mi /= static_cast<double>(count);
                vrr = vri = vii = 0.0;
                for (std::size_t b = 0; b < x.n; ++b) {
                    const double* xr = x.sample(b) + rc * plane;
                    const double* xi = x.sample(b) + ic * plane;
                    for (std::size_t p = 0; p < plane; ++p) {
                        const double dr = xr[p] - mr, di = xi[p] - mi;
                        vrr += dr * dr;
                        vri += dr * di;
                        vii += di * di;
                    }
                }
                vrr /= static_cast<double>(count);
                vri /= static_cast<double>(count);
                vii /= static_cast<double>(count);
                const double mo = spec_.momentum;
                running_mean_[rc] = mo * running_mean_[rc] + (1.0 - mo) * mr;
                running_mean_[ic] = mo * running_mean_[ic] + (1.0 - mo) * mi;
                double* rv = &running_cov_[4 * c];
                rv[0] = mo * rv[0] + (1.0 - mo) * vrr;
                rv[1] = mo * rv[1] + (1.0 - mo) * vri;
                rv[2] = mo * rv[2] + (1.0 - mo) * vri;
                rv[3] = mo * rv[3] + (1.0 - mo) * vii;
            } else {
                mr = running_mean_[rc];
                mi = running_mean_[ic];
                vrr = running_cov_[4 * c + 0];
                vri = running_cov_[4 * c + 1];
                vii = running_cov_[4 * c + 3];
            }
            const double a = vrr + spec_.eps, bb = vri, d = vii + spec_.eps;
            const Whitener w = inv_sqrt(a, bb, d);
            stats_[c] = {a, bb, d, w};
            const double* gm = &gamma_.value[4 * c];
            const double br = beta_.value[c], bi = beta_.value[nc_ + c];
            for (std::size_t b = 0; b < x.n; ++b) {
                const std::size_t off_r = b * in_.size() + rc * plane, off_i = b * in_.size() + ic * plane;
                for (std::size_t p = 0; p < plane; ++p) {
                    const double dr = x.data[off_r + p] - mr, di = x.data[off_i + p] - mi;
                    const double hr = w.w11 * dr + w.w12 * di;
                    const double hi = w.w12 * dr + w.w22 * di;
                    centered_[off_r + p] = dr;
                    centered_[off_i + p] = di;
                    xhat_[off_r + p] = hr;
                    xhat_[off_i + p] = hi;
                    y.data[off_r + p] = gm[0] * hr + gm[1] * hi + br;
                    y.data[off_i + p] = gm[2] * hr + gm[3] * hi + bi;
                }
            }
        }
        return y;
    }

    Tensor backward(const Tensor& gy) override
    {
        require_cache(cache_n_ == gy.n && cache_n_ > 0);
        const std::size_t plane = in_.h * in_.w;
        const double count = static_cast<double>(gy.n * plane);
        Tensor gx(gy.n, in_);
        for (std::size_t c = 0; c < nc_; ++c) {
            const std::size_t rc = c, ic = nc_ + c;
            const double* gm = &gamma_.value[4 * c];
            double* ggm = &gamma_.grad[4 * c];
            const auto& st = stats_[c];
            const Whitener& w = st.w;
            // pass 1: gamma/beta grads, dL/dxhat, dL/dW and mean of W dxhat
            double gw11 = 0.0, gw12 = 0.0, gw22 = 0.0;
            double sum_r = 0.0, sum_i = 0.0;
            std::vector<double> dh(2 * gy.n * plane);
            std::size_t q = 0;
            for (std::size_t b = 0; b < gy.n; ++b) {
                const std::size_t off_r = b * in_.size() + rc * plane, off_i = b * in_.size() + ic * plane;
                for (std::size_t p = 0; p < plane; ++p, ++q) {
                    const double g_r = gy.data[off_r + p], g_i = gy.data[off_i + p];
                    const double hr = xhat_[off_r + p], hi = xhat_[off_i + p];
                    ggm[0] += g_r * hr;
                    ggm[1] += g_r * hi;
                    ggm[2] += g_i * hr;
                    ggm[3] += g_i * hi;
                    beta_.grad[c] += g_r;
                    beta_.grad[nc_ + c] += g_i;
                    const double dhr = gm[0] * g_r + gm[2] * g_i;
                    const double dhi = gm[1] * g_r + gm[3] * g_i;
                    dh[2 * q] = dhr;
                    dh[2 * q + 1] = dhi;
                    const double dr = centered_[off_r + p], di = centered_[off_i + p];
                    gw11 += dhr * dr;
                    gw12 += dhr * di + dhi * dr;
                    gw22 += dhi * di;
                    sum_r += w.w11 * dhr + w.w12 * dhi;
                    sum_i += w.w12 * dhr + w.w22 * dhi;
                }
            }
            if (!train_cache_) {
                q = 0;
                for (std::size_t b = 0; b < gy.n; ++b) {
                    const std::size_t off_r = b * in_.size() + rc * plane, off_i = b * in_.size() + ic * plane;
                    for (std::size_t p = 0; p < plane; ++p, ++q) {
                        gx.data[off_r + p] = w.w11 * dh[2 * q] + w.w12 * dh[2 * q + 1];
                        gx.data[off_i + p] = w.w12 * dh[2 * q] + w.w22 * dh[2 * q + 1];
                    }
                }
                continue;
            }
            // dL/d(a, b, d) through the closed-form inverse square root
            const auto [da, db, dd] = whitener_vjp(st.a, st.b, st.d, gw11, gw12, gw22);
            const double mean_r = sum_r / count, mean_i = sum_i / count;
            q = 0;
            for (std::size_t b = 0; b < gy.n; ++b) {
                const std::size_t off_r = b * in_.size() + rc * plane, off_i = b * in_.size() + ic * plane;
                for (std::size_t p = 0; p < plane; ++p, ++q) {
                    const double dr = centered_[off_r + p], di = centered_[off_i + p];
                    const double wr = w.w11 * dh[2 * q] + w.w12 * dh[2 * q + 1];
                    const double wi = w.w12 * dh[2 * q] + w.w22 * dh[2 * q + 1];
                    gx.data[off_r + p] = wr - mean_r + (2.0 * da * dr + db * di) / count;
                    gx.data[off_i + p] = wi - mean_i + (2.0 * dd * di + db * dr) / count;
                }
            }
        }
        return gx;
    }

    /// Vector-Jacobian product of (a, b, d) -> (w11, w12, w22); the input
    /// gradient for w12 already sums both off-diagonal entries.
    static std::array<double, 3> whitener_vjp(double a, double b, double d, double g11, double g12, double g22)
    {
        const double s = std::sqrt(a * d - b * b);
        const double t = std::sqrt(a + d + 2.0 * s);
        const double st = s * t;
        // partials of s and t
        const double s_a = d / (2.0 * s), s_d = a / (2.0 * s), s_b = -b / s;
        const double t_a = (1.0 + 2.0 * s_a) / (2.0 * t);
        const double t_d = (1.0 + 2.0 * s_d) / (2.0 * t);
        const double t_b = (2.0 * s_b) / (2.0 * t);
        auto st_p = [&](double sp, double tp) { return sp * t + s * tp; };
        const double st_a = st_p(s_a, t_a), st_b = st_p(s_b, t_b), st_d = st_p(s_d, t_d);
        const double inv2 = 1.0 / (st * st);
        // w11 = (d + s)/st, w12 = -b/st, w22 = (a + s)/st
        auto quot = [&](double num, double num_p, double den_p) { return (num_p * st - num * den_p) * inv2; };
        const double w11_a = quot(d + s, s_a, st_a), w11_b = quot(d + s, s_b, st_b), w11_d = quot(d + s, 1.0 + s_d, st_d);
        const double w12_a = quot(-b, 0.0, st_a), w12_b = quot(-b, -1.0, st_b), w12_d = quot(-b, 0.0, st_d);
        const double w22_a = quot(a + s, 1.0 + s_a, st_a), w22_b = quot(a + s, s_b, st_b), w22_d = quot(a + s, s_d, st_d);
        return {g11 * w11_a + g12 * w12_a + g22 * w22_a,
                g11 * w11_b + g12 * w12_b + g22 * w22_b,
                g11 * w11_d + g12 * w12_d + g22 * w22_d};
    }

    std::vector<Param*> params() override { return {&gamma_, &beta_}; }
    std::vector<std::vector<double>*> buffers() override { return {&running_mean_, &running_cov_}; }
    std::uint64_t flops() const override { return 16ull * (in_.size() / 2); }

    /// Whitened activations of the last forward pass (split layout).
    const std::vector<double>& whitened() const noexcept { return xhat_; }

private:
    struct Stats {
        double a = 0, b = 0, d = 0;
        Whitener w{};
    };
    std::size_t nc_ = 0;
    Param gamma_, beta_;
    std::vector<double> running_mean_, running_cov_;
    bool train_cache_ = false;
    std::size_t cache_n_ = 0;
    std::vector<double> xhat_, centered_;
    std::vector<Stats> stats_;
};

/// Standard per-channel batch normalisation for the real twin.
class RealBatchNorm final : public Layer {
public:
    RealBatchNorm(LayerSpec s, Shape in) : Layer(s, in)
    {
        detail::require(s.eps > 0.0 && s.momentum > 0.0 && s.momentum < 1.0, "real_batchnorm: bad eps/momentum");
        out_ = in;
        gamma_ = Param("gamma", in.c, false);
        beta_ = Param("beta", in.c, false);
        std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0);
        running_mean_.assign(in.c, 0.0);
        running_var_.assign(in.c, 1.0);
    }

    Tensor forward(const Tensor& x, Mode mode) override
    {
        check_input(x);
        if (mode == Mode::train && x.n < 2) throw InvalidArgument("real_batchnorm: train mode needs batch size >= 2");
        const std::size_t plane = in_.h * in_.w;
        const double count = static_cast<double>(x.n * plane);
        Tensor y(x.n, out_);
        train_cache_ = mode == Mode::train;
        cache_n_ = x.n;
        xhat_.assign(x.data.size(), 0.0);
        inv_std_.assign(in_.c, 0.0);
        for (std::size_t c = 0; c < in_.c; ++c) {
            double mean, var;
            if (mode == Mode::train) {
                mean = 0.0;
                for (std::size_t b = 0; b < x.n; ++b)
                    for (std::size_t p = 0; p < plane; ++p) mean += x.sample(b)[c * plane + p];
                mean /= count;
                var = 0.0;
                for (std::size_t b = 0; b < x.n; ++b)
                    for (std::size_t p = 0; p < plane; ++p) {
                        const double dv = x.sample(b)[c * plane + p] - mean;
                        var += dv * dv;
                    }
                var /= count;
                running_mean_[c] = spec_.momentum * running_mean_[c] + (1.0 - spec_.momentum) * mean;
                running_var_[c] = spec_.momentum * running_var_[c] + (1.0 - spec_.momentum) * var;
            } else {
                mean = running_mean_[c];
                var = running_var_[c];
            }
            const double is = 1.0 / std::sqrt(var + spec_.eps);
            inv_std_[c] = is;
            for (std::size_t b = 0; b < x.n; ++b)
                for (std::size_t p = 0; p < plane; ++p) {
                    const std::size_t i = b * in_.size() + c * plane + p;
                    xhat_[i] = (x.data[i] - mean) * is;
                    y.data[i] = gamma_.value[c] * xhat_[i] + beta_.value[c];
                }
        }
        return y;
    }

    Tensor backward(const Tensor& gy) override
    {
        require_cache(cache_n_ == gy.n && cache_n_ > 0);
        const std::size_t plane = in_.h * in_.w;
        const double count = static_cast<double>(gy.n * plane);
        Tensor gx(gy.n, in_);
        for (std::size_t c = 0; c < in_.c; ++c) {
            double sum_g = 0.0, sum_gh = 0.0;
            for (std::size_t b = 0; b < gy.n; ++b)
                for (std::size_t p = 0; p < plane; ++p) {
                    const std::size_t i = b * in_.size() + c * plane + p;
                    sum_g += gy.data[i];
                    sum_gh += gy.data[i] * xhat_[i];
                }
            gamma_.grad[c] += sum_gh;
            beta_.grad[c] += sum_g;
            const double gmm = gamma_.value[c], is = inv_std_[c];
            for (std::size_t b = 0; b < gy.n; ++b)
                for (std::size_t p = 0; p < plane; ++p) {
                    const std::size_t i = b * in_.size() + c * plane + p;
                    if (train_cache_)
                        gx.data[i] = gmm * is * (gy.data[i] - sum_g / count - xhat_[i] * sum_gh / count);
                    else
                        gx.data[i] = gmm * is * gy.data[i];
                }
        }
        return gx;
    }

    std::vector<Param*> params() override { return {&gamma_, &beta_}; }
    std::vector<std::vector<double>*> buffers() override { return {&running_mean_, &running_var_}; }
    std::uint64_t flops() const override { return 4ull * in_.size(); }

private:
    Param gamma_, beta_;
    std::vector<double> running_mean_, running_var_;
    bool train_cache_ = false;
    std::size_t cache_n_ = 0;
    std::vector<double> xhat_, inv_std_;
};

inline std::unique_ptr<Layer> make_layer(const LayerSpec& s, Shape in, Rng& rng)
{
    switch (s.kind) {
    case LayerKind::complex_conv2d: return std::make_unique<ComplexConv2d>(s, in, rng);
    case LayerKind::real_conv2d: return std::make_unique<RealConv2d>(s, in, rng);
    case LayerKind::complex_dense: return std::make_unique<ComplexDense>(s, in, rng);
    case LayerKind::real_dense: return std::make_unique<RealDense>(s, in, rng);
    case LayerKind::relu: return std::make_unique<Relu>(s, in);
    case LayerKind::sigmoid: return std::make_unique<Sigmoid>(s, in);
    case LayerKind::complex_batchnorm: return std::make_unique<ComplexBatchNorm>(s, in);
    case LayerKind::real_batchnorm: return std::make_unique<RealBatchNorm>(s, in);
    case LayerKind::flatten: return std::make_unique<Flatten>(s, in);
    case LayerKind::residual_add: return std::make_unique<ResidualAdd>(s, in);
    }
    throw InvalidArgument("make_layer: unknown layer kind " + std::to_string(static_cast<int>(s.kind)));
}

} // namespace imnet::cvnn
