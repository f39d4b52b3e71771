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


// Two-stage IM-MIMO detector: the AAPD subnet predicts the active antennas
// from Y alone, zero forcing recovers the symbols on that support, and the
// SE subnet refines the zero-forcing estimate through a residual CNN.

#pragma once

#include "imnet/cvnn/adam.hpp"
#include "imnet/cvnn/loss.hpp"
#include "imnet/cvnn/model.hpp"
#include "imnet/detectors.hpp"

#include <chrono>
#include <functional>
#include <numeric>

#include <json.hpp>

namespace imnet::net {

using cvnn::LayerKind;
using cvnn::LayerSpec;
using cvnn::Model;
using cvnn::Mode;
using cvnn::Shape;
using cvnn::Tensor;

enum class Variant { complex, real };

inline std::string_view to_string(Variant v) { return v == Variant::complex ? "complex" : "real"; }

inline Variant parse_variant(std::string_view s)
{
    if (s == "complex") return Variant::complex;
    if (s == "real") return Variant::real;
    throw InvalidArgument("unknown variant '" + std::string(s) + "' (expected complex or real)");
}

/// Hidden widths in complex units. The real twin uses twice as many real
/// channels, i.e. the same number of real value slots.
struct AapdWidths {
    std::uint32_t conv1 = 32;
    std::uint32_t conv2 = 64;
    std::uint32_t fc1 = 256;
    std::uint32_t fc2 = 128;
};

struct SeWidths {
    std::uint32_t conv = 16;
};

/// Layer list of the AAPD subnet: two 3x3 conv + BN + ReLU blocks, two
/// dense + ReLU layers and a sigmoid probability head with N_t outputs.
/// The complex head emits N_t/2 complex values read as N_t real slots
/// (real parts first); for odd N_t it falls back to a real dense head.
inline std::vector<LayerSpec> aapd_specs(std::size_t n_t, Variant v, const AapdWidths& w = {})
{
    detail::require(n_t >= 1, "aapd_specs: n_t must be positive");
    std::vector<LayerSpec> s;
    if (v == Variant::complex) {
        s = {LayerSpec::complex_conv(w.conv1, 3, 1), LayerSpec::of(LayerKind::complex_batchnorm),
             LayerSpec::of(LayerKind::relu),         LayerSpec::complex_conv(w.conv2, 3, 1),
             LayerSpec::of(LayerKind::complex_batchnorm), LayerSpec::of(LayerKind::relu),
             LayerSpec::of(LayerKind::flatten),      LayerSpec::complex_dense(w.fc1),
             LayerSpec::of(LayerKind::relu),         LayerSpec::complex_dense(w.fc2),
             LayerSpec::of(LayerKind::relu)};
        if (n_t % 2 == 0)
            s.push_back(LayerSpec::complex_dense(static_cast<std::uint32_t>(n_t / 2)));
        else
            s.push_back(LayerSpec::real_dense(static_cast<std::uint32_t>(n_t)));
    } else {
        s = {LayerSpec::real_conv(2 * w.conv1, 3, 1), LayerSpec::of(LayerKind::real_batchnorm),
             LayerSpec::of(LayerKind::relu),          LayerSpec::real_conv(2 * w.conv2, 3, 1),
             LayerSpec::of(LayerKind::real_batchnorm), LayerSpec::of(LayerKind::relu),
             LayerSpec::of(LayerKind::flatten),       LayerSpec::real_dense(2 * w.fc1),
             LayerSpec::of(LayerKind::relu),          LayerSpec::real_dense(2 * w.fc2),
             LayerSpec::of(LayerKind::relu),          LayerSpec::real_dense(static_cast<std::uint32_t>(n_t))};
    }
    s.push_back(LayerSpec::of(LayerKind::sigmoid));
    return s;
}

inline Model build_aapd(std::size_t n_r, std::size_t t, std::size_t n_t, Variant v, const AapdWidths& w = {},
                        std::uint64_t seed = 0)
{
    detail::require(n_r >= 1 && t >= 1 && n_t >= 1, "build_aapd: dimensions must be positive");
    return Model({2, n_r, t}, aapd_specs(n_t, v, w), seed);
}

/// SE subnet: two 3x3 conv + ReLU layers, a linear 3x3 conv back to one
/// complex channel (zero-initialised) and a skip from the input.
inline std::vector<LayerSpec> se_specs(Variant v, const SeWidths& w = {})
{
    if (v == Variant::complex)
        return {LayerSpec::complex_conv(w.conv, 3, 1), LayerSpec::of(LayerKind::relu),
                LayerSpec::complex_conv(w.conv, 3, 1), LayerSpec::of(LayerKind::relu),
                LayerSpec::complex_conv(1, 3, 1, true), LayerSpec::of(LayerKind::residual_add)};
    return {LayerSpec::real_conv(2 * w.conv, 3, 1), LayerSpec::of(LayerKind::relu),
            LayerSpec::real_conv(2 * w.conv, 3, 1), LayerSpec::of(LayerKind::relu),
            LayerSpec::real_conv(2, 3, 1, true),    LayerSpec::of(LayerKind::residual_add)};
}

inline Model build_se(std::size_t n_u, std::size_t t, Variant v, const SeWidths& w = {}, std::uint64_t seed = 0)
{
    detail::require(n_u >= 1 && t >= 1, "build_se: dimensions must be positive");
    return Model({2, n_u, t}, se_specs(v, w), seed);
}

/// Top-N_u antennas by probability (ties to the lower index); if that set
/// is not a legal TAC, the legal TAC with the largest probability mass
/// (ties in table order).
inline std::size_t predict_tac(std::span<const double> p, const phy::TacTable& table)
{
    detail::require(p.size() == static_cast<std::size_t>(table.n_t), "predict_tac: need N_t probabilities");
    std::vector<int> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)]; });
    phy::Tac top;
    for (int u = 0; u < table.n_u; ++u) top.push_back(order[static_cast<std::size_t>(u)] + 1);
    std::sort(top.begin(), top.end());
    if (auto idx = table.index_of(top)) return *idx;
    std::size_t best = 0;
    double best_mass = -1.0;
    for (std::size_t i = 0; i < table.n_l(); ++i) {
        double mass = 0.0;
        for (int a : table.tacs[i]) mass += p[static_cast<std::size_t>(a - 1)];
        if (mass > best_mass) {
            best_mass = mass;
            best = i;
        }
    }
    return best;
}

/// Batch of samples for one subnet: inputs and flat targets.
struct TrainSet {
    Tensor x;
    std::vector<double> y;            // AAPD: N_t labels per sample; SE: target split tensor
    std::vector<std::size_t> tac;     // AAPD only: true TAC index per sample
};

inline Tensor gather(const Tensor& src, std::span<const std::size_t> idx)
{
    Tensor out(idx.size(), src.shape);
    const std::size_t n = src.sample_size();
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(src.sample(idx[i]), n, out.sample(i));
    return out;
}

inline std::vector<double> gather_rows(const std::vector<double>& src, std::size_t width, std::span<const std::size_t> idx)
{
    std::vector<double> out(idx.size() * width);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(idx[i] * width), width, out.begin() + static_cast<std::ptrdiff_t>(i * width));
    return out;
}

/// Inference in fixed-size chunks.
inline Tensor predict(Model& m, const Tensor& x, std::size_t chunk = 512)
{
    Tensor out(x.n, m.output_shape());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < x.n; start += chunk) {
        const std::size_t n = std::min(chunk, x.n - start);
        idx.resize(n);
        std::iota(idx.begin(), idx.end(), start);
        const Tensor y = m.forward(gather(x, idx), Mode::infer);
        std::copy(y.data.begin(), y.data.end(), out.sample(start));
    }
    return out;
}

struct TrainConfig {
    double lr = 1e-3;
    std::size_t batch = 100;
    std::size_t max_epochs = 200;
    double gamma1 = 0.05;       // AAPD validation BCE target
    double gamma2_rel = 0.5;    // SE target: validation MSE below gamma2_rel x ZF-input MSE
    std::size_t patience = 20;  // stop after this many epochs without improvement (0 disables)
    std::uint64_t seed = 1;

    void validate() const
    {
        detail::require(lr > 0.0, "train: lr must be positive");
        detail::require(batch >= 2, "train: batch must be at least 2");
        detail::require(max_epochs >= 1, "train: max_epochs must be positive");
        detail::require(gamma1 > 0.0 && gamma2_rel > 0.0, "train: thresholds must be positive");
    }
};

using Logger = std::function<void(const nlohmann::json&)>;

struct TrainResult {
    std::size_t epochs_run = 0;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    double threshold = 0.0;
    bool converged = false; // reached the validation target
    std::vector<double> val_losses;
};

namespace train_detail {

inline double unix_time()
{
    using namespace std::chrono;
    return duration<double>(system_clock::now().time_since_epoch()).count();
}

/// Mini-batch Adam with validation after every epoch, best-state tracking,
/// threshold stop and patience stop.
template <class LossFn, class ValFn>
TrainResult fit(Model& model, const TrainSet& train, std::size_t target_width, const TrainConfig& cfg,
                double threshold, const std::string& stage, LossFn&& loss_fn, ValFn&& val_fn, const Logger& log,
                const nlohmann::json& tags)
{
    cfg.validate();
    detail::require(train.x.n > 0, "train: empty training set");
    detail::require(train.y.size() == train.x.n * target_width, "train: target size mismatch");
    cvnn::Adam opt(cfg.lr);
    TrainResult res;
    res.threshold = threshold;
    res.best_val_loss = std::numeric_limits<double>::infinity();
    Model::State best = model.state();
    std::vector<std::size_t> order(train.x.n);
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(Rng::derive(cfg.seed, 0x5348554646ULL, epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        double train_loss = 0.0;
        std::size_t seen = 0;
        // batches of size 1 cannot run batch norm in train mode; merge the tail
        for (std::size_t start = 0; start < order.size();) {
            std::size_t n = std::min(cfg.batch, order.size() - start);
            if (order.size() - start - n == 1) ++n;
            std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(start + n));
            if (idx.size() == 1) idx.push_back(idx.front());
            const Tensor xb = gather(train.x, idx);
            const auto yb = gather_rows(train.y, target_width, idx);
            model.zero_grad();
            const Tensor out = model.forward(xb, Mode::train);
            const auto l = loss_fn(out, yb);
            if (!std::isfinite(l.value)) throw SingularMatrix(stage + ": training loss became non-finite");
            model.backward(l.grad);
            opt.step(model.params());
            train_loss += l.value * static_cast<double>(n);
            seen += n;
            start += n;
        }
        const auto [val_loss, val_acc] = val_fn(model);
        res.val_losses.push_back(val_loss);
        res.epochs_run = epoch;
        if (val_loss < res.best_val_loss) {
            res.best_val_loss = val_loss;
            res.best_epoch = epoch;
            best = model.state();
            since_best = 0;
        } else {
            ++since_best;
        }
        if (log) {
            nlohmann::json rec = tags;
            rec["stage"] = stage;
            rec["epoch"] = epoch;
            rec["train_loss"] = train_loss / static_cast<double>(std::max<std::size_t>(seen, 1));
            rec["val_loss"] = val_loss;
            if (val_acc >= 0.0) rec["val_accuracy"] = val_acc;
            rec["time"] = unix_time();
            log(rec);
        }
        if (val_loss < threshold) {
            res.converged = true;
            break;
        }
        if (cfg.patience > 0 && since_best >= cfg.patience) break;
    }
    model.restore(best);
    return res;
}

} // namespace train_detail

/// Exact-TAC accuracy of the AAPD on a labelled set.
inline double aapd_accuracy(Model& aapd, const TrainSet& set, const phy::TacTable& table)
{
    const Tensor p = predict(aapd, set.x);
    std::size_t ok = 0;
    for (std::size_t b = 0; b < p.n; ++b)
        ok += predict_tac({p.sample(b), p.sample_size()}, table) == set.tac[b];
    return p.n ? static_cast<double>(ok) / static_cast<double>(p.n) : 0.0;
}

inline double aapd_val_loss(Model& aapd, const TrainSet& set)
{
    const Tensor p = predict(aapd, set.x);
    return cvnn::bce_loss(p, set.y).value;
}

/// Trains on BCE until the validation loss drops below gamma1 or the
/// epoch budget ends; the model is left at its best validation state.
inline TrainResult train_aapd(Model& aapd, const TrainSet& train, const TrainSet& val, const phy::TacTable& table,
                              const TrainConfig& cfg, const Logger& log = {}, const nlohmann::json& tags = {})
{
    detail::require(train.x.n > 0, "train_aapd: empty training set");
    detail::require(val.x.n > 0, "train_aapd: empty validation set");
    const std::size_t nt = aapd.output_shape().size();
    return train_detail::fit(
        aapd, train, nt, cfg, cfg.gamma1, "aapd",
        [](const Tensor& out, const std::vector<double>& y) { return cvnn::bce_loss(out, y); },
        [&](Model& m) {
            const double loss = aapd_val_loss(m, val);
            return std::pair{loss, aapd_accuracy(m, val, table)};
        },
        log, tags);
}

inline double se_val_loss(Model& se, const TrainSet& set)
{
    const Tensor out = predict(se, set.x);
    Tensor target(set.x.n, set.x.shape);
    target.data = set.y;
    return cvnn::mse_loss(out, target).value;
}

/// MSE of the unrefined input against the target (the identity SE).
inline double identity_mse(const TrainSet& set)
{
    Tensor target(set.x.n, set.x.shape);
    target.data = set.y;
    return cvnn::mse_loss(set.x, target).value;
}

inline TrainResult train_se(Model& se, const TrainSet& train, const TrainSet& val, const TrainConfig& cfg,
                            const Logger& log = {}, const nlohmann::json& tags = {})
{
    detail::require(train.x.n > 0, "train_se: empty training set");
    detail::require(val.x.n > 0, "train_se: empty validation set");
    detail::require(train.x.shape == se.input_shape() && val.x.shape == se.input_shape(), "train_se: shape mismatch");
    const double threshold = cfg.gamma2_rel * identity_mse(val);
    const Shape shape = train.x.shape;
    return train_detail::fit(
        se, train, shape.size(), cfg, threshold, "se",
        [shape](const Tensor& out, const std::vector<double>& y) {
            Tensor target(out.n, shape);
            target.data = y;
            return cvnn::mse_loss(out, target);
        },
        [&](Model& m) { return std::pair{se_val_loss(m, val), -1.0}; }, log, tags);
}

/// One received frame as seen by the detector.
struct FrameInput {
    const ComplexMatrix* y;
    const ComplexMatrix* h_est;
};

struct NetDetection {
    std::size_t tac_index = 0;
    ComplexMatrix s_zf;
    ComplexMatrix s_hat;
    phy::Bits bits;
};

/// AAPD input tensor for a list of received matrices.
inline Tensor aapd_input(std::span<const ComplexMatrix* const> ys) { return cvnn::pack_matrices(ys); }

/// Batched inference: TAC from the AAPD (probabilities from Y only), ZF on
/// h_est, SE refinement, hard demapping.
inline std::vector<NetDetection> detect_batch(std::span<const FrameInput> frames, Model& aapd, Model* se,
                                              const phy::TacTable& table, const phy::QamConstellation& qam,
                                              std::size_t chunk = 512)
{
    std::vector<NetDetection> out(frames.size());
    for (std::size_t start = 0; start < frames.size(); start += chunk) {
        const std::size_t n = std::min(chunk, frames.size() - start);
        std::vector<const ComplexMatrix*> ys(n);
        for (std::size_t i = 0; i < n; ++i) ys[i] = frames[start + i].y;
        const Tensor p = aapd.forward(aapd_input(ys), Mode::infer);
        std::vector<const ComplexMatrix*> zf(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto& d = out[start + i];
            d.tac_index = predict_tac({p.sample(i), p.sample_size()}, table);
            d.s_zf = detect::zf_estimate(*frames[start + i].y, *frames[start + i].h_est, table.tacs[d.tac_index]);
            zf[i] = &d.s_zf;
        }
        if (se != nullptr) {
            const Tensor refined = se->forward(cvnn::pack_matrices(zf), Mode::infer);
            for (std::size_t i = 0; i < n; ++i) out[start + i].s_hat = cvnn::unpack_matrix(refined, i);
        } else {
            for (std::size_t i = 0; i < n; ++i) out[start + i].s_hat = out[start + i].s_zf;
        }
        for (std::size_t i = 0; i < n; ++i) {
            auto& d = out[start + i];
            d.bits = phy::demap_frame(d.tac_index, d.s_hat, table, qam);
        }
    }
    return out;
}

inline NetDetection detect_frame(const ComplexMatrix& y, const ComplexMatrix& h_est, Model& aapd, Model* se,
                                 const phy::TacTable& table, const phy::QamConstellation& qam)
{
    const FrameInput f{&y, &h_est};
    return detect_batch({&f, 1}, aapd, se, table, qam).front();
}

/// Training data for both stages.
struct FullTrainData {
    TrainSet aapd;                          // x: Y, y: AAP labels, tac
    std::vector<const ComplexMatrix*> y;    // received matrices (for the ZF stage)
    std::vector<const ComplexMatrix*> h_est;
    std::vector<const ComplexMatrix*> s;    // transmitted symbols
};

/// SE data {S^ZF, S} built with a frozen AAPD.
inline TrainSet make_se_set(Model& aapd, const FullTrainData& d, const phy::TacTable& table,
                            const phy::QamConstellation& qam)
{
    std::vector<FrameInput> frames(d.y.size());
    for (std::size_t i = 0; i < frames.size(); ++i) frames[i] = {d.y[i], d.h_est[i]};
    const auto det = detect_batch(frames, aapd, nullptr, table, qam);
    std::vector<const ComplexMatrix*> zf(det.size());
    for (std::size_t i = 0; i < det.size(); ++i) zf[i] = &det[i].s_zf;
    TrainSet out;
    out.x = cvnn::pack_matrices(zf);
    out.y = cvnn::pack_matrices(d.s).data;
    return out;
}

struct TrainedPair {
    Model aapd;
    Model se;
    TrainResult aapd_result;
    TrainResult se_result;
};

/// Step-by-step training: stage 1 fits the AAPD; only after it is frozen is
/// the SE training set built from its predictions and the SE fitted.
inline TrainedPair train_full(const FullTrainData& train, const FullTrainData& val, const phy::TacTable& table,
                              const phy::QamConstellation& qam, Variant variant, const AapdWidths& aw,
                              const SeWidths& sw, const TrainConfig& cfg, const Logger& log = {},
                              const nlohmann::json& tags = {})
{
    detail::require(!train.y.empty() && !val.y.empty(), "train_full: empty dataset");
    const std::size_t n_r = train.y.front()->rows(), t = train.y.front()->cols();
    auto event = [&](const char* what) {
        if (!log) return;
        nlohmann::json rec = tags;
        rec["event"] = what;
        rec["time"] = train_detail::unix_time();
        log(rec);
    };
    TrainedPair out;
    out.aapd = build_aapd(n_r, t, static_cast<std::size_t>(table.n_t), variant, aw, Rng::derive(cfg.seed, 1));
    event("aapd_start");
    out.aapd_result = train_aapd(out.aapd, train.aapd, val.aapd, table, cfg, log, tags);
    out.aapd.snap_to_storage();
    event("aapd_frozen");
    if (!out.aapd_result.converged && log) {
        nlohmann::json rec = tags;
        rec["warning"] = "aapd did not reach gamma1 within the epoch budget";
        rec["best_val_loss"] = out.aapd_result.best_val_loss;
        log(rec);
    }

    const TrainSet se_train = make_se_set(out.aapd, train, table, qam);
    const TrainSet se_val = make_se_set(out.aapd, val, table, qam);
    event("se_data_built");
    out.se = build_se(static_cast<std::size_t>(table.n_u), t, variant, sw, Rng::derive(cfg.seed, 2));
    TrainConfig se_cfg = cfg;
    se_cfg.seed = Rng::derive(cfg.seed, 3);
    out.se_result = train_se(out.se, se_train, se_val, se_cfg, log, tags);
    out.se.snap_to_storage();
    event("se_frozen");
    return out;
}

} // namespace imnet::net
