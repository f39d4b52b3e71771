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


// Experiment runners behind the CLI: training, evaluation, complexity
// benchmark and the CSI-error sweep. Results are CSV with a JSON mirror.

#pragma once

#include "imnet/cvnn/checkpoint.hpp"
#include "imnet/harness/dataset.hpp"

namespace imnet::harness {

inline constexpr int csv_schema_version = 1;

inline const std::string eval_csv_header =
    "schema_version,detector,variant,snr_db,ber,aap_accuracy,frames,bit_errors,bits,wall_time_s";
inline const std::string sweep_csv_header =
    "schema_version,detector,variant,sigma_c_db,csi_error_var,snr_db,ber,aap_accuracy,frames,bit_errors,bits,wall_time_s";
inline const std::string bench_csv_header =
    "schema_version,detector,variant,params,flops_per_frame,median_latency_s,trials";

struct EvalRow {
    std::string detector;
    std::string variant = "none"; // classical detectors have no variant
    double snr_db = 0.0;
    double ber = 0.0;
    double aap_accuracy = 0.0;
    std::size_t frames = 0;
    std::size_t bit_errors = 0;
    std::size_t bits = 0;
    double wall_time_s = 0.0;
};

struct SweepRow {
    EvalRow eval;
    double sigma_c_db = 0.0;
    double csi_error_var = 0.0;
};

struct BenchRow {
    std::string detector;
    std::string variant = "none";
    std::uint64_t params = 0;
    std::uint64_t flops = 0;
    double median_latency_s = 0.0;
    std::size_t trials = 0;
};

/// Error variance for a sweep point given in dB (-inf means perfect CSI).
inline double sigma_c_to_variance(double sigma_c_db)
{
    if (std::isinf(sigma_c_db) && sigma_c_db < 0) return 0.0;
    return std::pow(10.0, sigma_c_db / 10.0);
}

namespace experiment_detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct FrameOutcome {
    std::size_t errors = 0;
    bool tac_ok = false;
};

inline EvalRow summarize(std::string detector, std::string variant, double snr_db, const Dataset& d,
                         const std::vector<FrameOutcome>& out, double wall)
{
    EvalRow r;
    r.detector = std::move(detector);
    r.variant = std::move(variant);
    r.snr_db = snr_db;
    r.frames = out.size();
    std::size_t tac_ok = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        r.bit_errors += out[i].errors;
        r.bits += d.records[i].bits.size();
        tac_ok += out[i].tac_ok;
    }
    r.ber = r.bits ? static_cast<double>(r.bit_errors) / static_cast<double>(r.bits) : 0.0;
    r.aap_accuracy = r.frames ? static_cast<double>(tac_ok) / static_cast<double>(r.frames) : 0.0;
    r.wall_time_s = wall;
    return r;
}

inline std::string csv_number(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return format_number(v);
}

inline nlohmann::json json_number(double v)
{
    if (std::isfinite(v)) return v;
    return csv_number(v);
}

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    f << text;
    if (!f) throw IoError("write failed: " + path.string());
}

} // namespace experiment_detail

/// ML or SOMP pipeline on every frame, frame-parallel; detection uses h_est.
inline EvalRow evaluate_classical(const Dataset& d, const phy::TacTable& table, const phy::QamConstellation& qam,
                                  detect::ClassicalMethod method, double snr_db, std::size_t threads)
{
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<experiment_detail::FrameOutcome> out(d.records.size());
    parallel_for(d.records.size(), threads, [&](std::size_t i) {
        const auto& r = d.records[i];
        const auto det = detect::classical_pipeline(r.y, r.h_est, table, qam, method);
        out[i] = {phy::bit_errors(r.bits, det.bits), det.tac_index == r.tac_index};
    });
    return experiment_detail::summarize(std::string(detect::to_string(method)), "none", snr_db, d, out,
                                        experiment_detail::seconds_since(t0));
}

inline EvalRow evaluate_imreconet(const Dataset& d, cvnn::Model& aapd, cvnn::Model& se, const phy::TacTable& table,
                                  const phy::QamConstellation& qam, net::Variant variant, double snr_db)
{
    const auto t0 = std::chrono::steady_clock::now();
    std::vector<net::FrameInput> frames(d.records.size());
    for (std::size_t i = 0; i < frames.size(); ++i) frames[i] = {&d.records[i].y, &d.records[i].h_est};
    const auto det = net::detect_batch(frames, aapd, &se, table, qam);
    std::vector<experiment_detail::FrameOutcome> out(det.size());
    for (std::size_t i = 0; i < det.size(); ++i)
        out[i] = {phy::bit_errors(d.records[i].bits, det[i].bits), det[i].tac_index == d.records[i].tac_index};
    return experiment_detail::summarize("imreconet", std::string(net::to_string(variant)), snr_db, d, out,
                                        experiment_detail::seconds_since(t0));
}

inline void sort_rows(std::vector<EvalRow>& rows)
{
    std::stable_sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) {
        return std::tie(a.detector, a.variant, a.snr_db) < std::tie(b.detector, b.variant, b.snr_db);
    });
}

inline void sort_rows(std::vector<SweepRow>& rows)
{
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return std::tie(a.eval.detector, a.eval.variant, a.csi_error_var) <
               std::tie(b.eval.detector, b.eval.variant, b.csi_error_var);
    });
}

inline std::string eval_csv_line(const EvalRow& r)
{
    using experiment_detail::csv_number;
    std::ostringstream os;
    os << csv_schema_version << ',' << r.detector << ',' << r.variant << ',' << csv_number(r.snr_db) << ','
       << csv_number(r.ber) << ',' << csv_number(r.aap_accuracy) << ',' << r.frames << ',' << r.bit_errors << ','
       << r.bits << ',' << csv_number(r.wall_time_s);
    return os.str();
}

inline std::string eval_csv(const std::vector<EvalRow>& rows)
{
    std::string out = eval_csv_header + "\n";
    for (const auto& r : rows) out += eval_csv_line(r) + "\n";
    return out;
}

inline nlohmann::json to_json(const EvalRow& r)
{
    using experiment_detail::json_number;
    return {{"detector", r.detector}, {"variant", r.variant},         {"snr_db", json_number(r.snr_db)},
            {"ber", r.ber},           {"aap_accuracy", r.aap_accuracy}, {"frames", r.frames},
            {"bit_errors", r.bit_errors}, {"bits", r.bits},            {"wall_time_s", r.wall_time_s}};
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows)
{
    using experiment_detail::csv_number;
    std::ostringstream os;
    os << sweep_csv_header << '\n';
    for (const auto& s : rows) {
        const auto& r = s.eval;
        os << csv_schema_version << ',' << r.detector << ',' << r.variant << ',' << csv_number(s.sigma_c_db) << ','
           << csv_number(s.csi_error_var) << ',' << csv_number(r.snr_db) << ',' << csv_number(r.ber) << ','
           << csv_number(r.aap_accuracy) << ',' << r.frames << ',' << r.bit_errors << ',' << r.bits << ','
           << csv_number(r.wall_time_s) << '\n';
    }
    return os.str();
}

inline std::string bench_csv(const std::vector<BenchRow>& rows)
{
    std::ostringstream os;
    os << bench_csv_header << '\n';
    for (const auto& r : rows)
        os << csv_schema_version << ',' << r.detector << ',' << r.variant << ',' << r.params << ',' << r.flops << ','
           << experiment_detail::csv_number(r.median_latency_s) << ',' << r.trials << '\n';
    return os.str();
}

/// Writes <stem>.csv and <stem>.json.
inline void write_results(const std::filesystem::path& out_dir, const std::string& stem, const std::string& csv,
                          const nlohmann::json& mirror)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    experiment_detail::write_text(out_dir / (stem + ".csv"), csv);
    nlohmann::json doc{{"schema_version", csv_schema_version}, {"rows", mirror}};
    experiment_detail::write_text(out_dir / (stem + ".json"), doc.dump(2) + "\n");
}

// ---- checkpoints ---------------------------------------------------------

/// "snr<v>" or "mixed".
inline std::string snr_tag(std::optional<double> snr_db) { return snr_db ? "snr" + format_number(*snr_db) : "mixed"; }

inline std::string checkpoint_name(std::string_view stage, net::Variant v, std::optional<double> snr_db)
{
    return std::string(stage) + "_" + std::string(net::to_string(v)) + "_" + snr_tag(snr_db) + ".cvnn";
}

struct NetPair {
    cvnn::Model aapd;
    cvnn::Model se;
};

/// Loads the AAPD/SE pair for one SNR (falls back to the mixed pair).
/// A missing pair is a configuration error.
inline NetPair load_pair(const std::filesystem::path& dir, net::Variant v, double snr_db)
{
    for (std::optional<double> tag : {std::optional<double>(snr_db), std::optional<double>()}) {
        const auto a = dir / checkpoint_name("aapd", v, tag);
        const auto s = dir / checkpoint_name("se", v, tag);
        if (std::filesystem::exists(a) && std::filesystem::exists(s))
            return {cvnn::load_checkpoint(a).model, cvnn::load_checkpoint(s).model};
    }
    throw ConfigError("missing checkpoint: " + (dir / checkpoint_name("aapd", v, snr_db)).string() + " (or " +
                      checkpoint_name("aapd", v, std::nullopt) + ") and the matching se file");
}

// ---- datasets on disk ------------------------------------------------------

/// Writes train/val/test files for every configured SNR.
inline std::vector<std::filesystem::path> generate_all(const ExperimentConfig& c, const std::filesystem::path& out_dir,
                                                       std::size_t threads)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    std::vector<std::filesystem::path> written;
    for (double snr : c.snr_db)
        for (Split s : {Split::train, Split::val, Split::test}) {
            const auto path = out_dir / dataset_filename(s, snr);
            save_dataset(path, generate_split(c, s, snr, c.count_for(static_cast<int>(s)), threads));
            written.push_back(path);
        }
    return written;
}

inline Dataset load_split(const ExperimentConfig& c, const std::filesystem::path& dir, Split s, double snr_db)
{
    const auto path = dir / dataset_filename(s, snr_db);
    Dataset d = load_dataset(path, c.table());
    check_header(d.header, c, path.string());
    return d;
}

// ---- training -------------------------------------------------------------

struct TrainOutcome {
    std::optional<double> snr_db; // empty for mixed-SNR training
    net::TrainResult aapd;
    net::TrainResult se;
};

inline Dataset concat(std::vector<Dataset> parts)
{
    Dataset out;
    if (parts.empty()) return out;
    out.header = parts.front().header;
    for (auto& p : parts)
        for (auto& r : p.records) out.records.push_back(std::move(r));
    out.header.count = out.records.size();
    return out;
}

/// Trains one AAPD/SE pair per SNR (or one mixed pair) and saves the
/// checkpoints into out_dir.
inline std::vector<TrainOutcome> train_all(const ExperimentConfig& c, const std::filesystem::path& data_dir,
                                           const std::filesystem::path& out_dir, const net::Logger& log)
{
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
    const auto table = c.table();
    const auto qam = c.constellation();
    std::vector<std::optional<double>> groups;
    if (c.mixed_snr_training)
        groups.emplace_back();
    else
        for (double s : c.snr_db) groups.emplace_back(s);

    std::vector<TrainOutcome> outcomes;
    for (const auto& g : groups) {
        std::vector<Dataset> tr, va;
        for (double s : c.snr_db) {
            if (g && *g != s) continue;
            tr.push_back(load_split(c, data_dir, Split::train, s));
            va.push_back(load_split(c, data_dir, Split::val, s));
        }
        const Dataset train = concat(std::move(tr));
        const Dataset val = concat(std::move(va));
        if (train.records.empty() || val.records.empty())
            throw ConfigError("train: empty train or validation split for " + snr_tag(g));
        net::TrainConfig tc = c.train;
        tc.seed = Rng::derive(c.seed, 0x545241494EULL, g ? std::bit_cast<std::uint64_t>(*g) : 0);
        nlohmann::json tags{{"snr", g ? nlohmann::json(*g) : nlohmann::json("mixed")},
                            {"variant", net::to_string(c.variant)}};
        auto pair = net::train_full(training_view(train), training_view(val), table, qam, c.variant, c.aapd, c.se, tc,
                                    log, tags);
        cvnn::save_checkpoint(out_dir / checkpoint_name("aapd", c.variant, g), pair.aapd);
        cvnn::save_checkpoint(out_dir / checkpoint_name("se", c.variant, g), pair.se);
        outcomes.push_back({g, pair.aapd_result, pair.se_result});
    }
    return outcomes;
}

// ---- evaluation -----------------------------------------------------------

inline std::vector<EvalRow> evaluate_all(const ExperimentConfig& c, const std::filesystem::path& data_dir,
                                         const std::filesystem::path& ckpt_dir, std::size_t threads)
{
    const auto table = c.table();
    const auto qam = c.constellation();
    const bool want_net = std::find(c.detectors.begin(), c.detectors.end(), "imreconet") != c.detectors.end();
    std::vector<EvalRow> rows;
    for (double snr : c.snr_db) {
        // checkpoints are resolved before any work so a missing file fails fast
        std::optional<NetPair> nets;
        if (want_net) nets = load_pair(ckpt_dir, c.variant, snr);
        const Dataset test = load_split(c, data_dir, Split::test, snr);
        for (const auto& name : c.detectors) {
            if (name == "ml")
                rows.push_back(evaluate_classical(test, table, qam, detect::ClassicalMethod::ml, snr, threads));
            else if (name == "somp")
                rows.push_back(evaluate_classical(test, table, qam, detect::ClassicalMethod::somp, snr, threads));
            else
                rows.push_back(evaluate_imreconet(test, nets->aapd, nets->se, table, qam, c.variant, snr));
        }
    }
    sort_rows(rows);
    return rows;
}

// ---- CSI-error sweep --------------------------------------------------------

/// Test frames at sweep_snr_db with a growing CSI error. Every sweep point
/// reuses the same bits, channel and noise; only the error draw scales.
inline std::vector<SweepRow> sweep_csi_error(const ExperimentConfig& c, const std::filesystem::path& ckpt_dir,
                                             std::size_t threads)
{
    const auto table = c.table();
    const auto qam = c.constellation();
    const bool want_net = std::find(c.detectors.begin(), c.detectors.end(), "imreconet") != c.detectors.end();
    std::optional<NetPair> nets;
    if (want_net) nets = load_pair(ckpt_dir, c.variant, c.sweep_snr_db);
    std::vector<SweepRow> rows;
    for (double sc : c.sweep_sigma_c_db) {
        const double var = sigma_c_to_variance(sc);
        const Dataset d = generate_split(c, Split::test, c.sweep_snr_db, c.sweep_frames, threads, var);
        for (const auto& name : c.detectors) {
            SweepRow row;
            row.sigma_c_db = sc;
            row.csi_error_var = var;
            if (name == "ml")
                row.eval = evaluate_classical(d, table, qam, detect::ClassicalMethod::ml, c.sweep_snr_db, threads);
            else if (name == "somp")
                row.eval = evaluate_classical(d, table, qam, detect::ClassicalMethod::somp, c.sweep_snr_db, threads);
            else
                row.eval = evaluate_imreconet(d, nets->aapd, nets->se, table, qam, c.variant, c.sweep_snr_db);
            rows.push_back(std::move(row));
        }
    }
    sort_rows(rows);
    return rows;
}

inline nlohmann::json to_json(const SweepRow& s)
{
    nlohmann::json j = to_json(s.eval);
    j["sigma_c_db"] = experiment_detail::json_number(s.sigma_c_db);
    j["csi_error_var"] = s.csi_error_var;
    return j;
}

// ---- complexity benchmark ---------------------------------------------------

inline constexpr double ml_hypothesis_guard = 1e7;

/// 8 FLOPs per complex multiply-accumulate. Per slot and hypothesis ML
/// forms H(J)s (N_r N_u MACs) and the residual norm (N_r MACs).
inline std::uint64_t ml_flops(const phy::TacTable& table, const phy::QamConstellation& qam, std::size_t n_r,
                              std::size_t t)
{
    const double hyp = detect::ml_hypotheses_per_slot(table, qam);
    return static_cast<std::uint64_t>(8.0 * hyp * static_cast<double>(t * n_r * static_cast<std::size_t>(table.n_u + 1)));
}

/// Zero forcing on k columns: QR (N_r k^2 MACs) plus back-substitution and
/// projection of T columns (N_r k T MACs).
inline std::uint64_t zf_flops(std::size_t n_r, std::size_t k, std::size_t t) { return 8 * (n_r * k * k + n_r * k * t); }

/// Iteration k: correlations with all N_t columns (N_t N_r T MACs), a ZF
/// solve on k columns and the residual update (N_r k T MACs).
inline std::uint64_t somp_flops(std::size_t n_t, std::size_t n_u, std::size_t n_r, std::size_t t)
{
    std::uint64_t f = 0;
    for (std::size_t k = 1; k <= n_u; ++k) f += 8 * n_t * n_r * t + zf_flops(n_r, k, t) + 8 * n_r * k * t;
    return f + zf_flops(n_r, n_u, t);
}

template <class F>
double median_latency(std::size_t trials, F&& body)
{
    std::vector<double> s(trials);
    for (auto& v : s) {
        const auto t0 = std::chrono::steady_clock::now();
        body();
        v = experiment_detail::seconds_since(t0);
    }
    std::sort(s.begin(), s.end());
    return trials % 2 ? s[trials / 2] : 0.5 * (s[trials / 2 - 1] + s[trials / 2]);
}

struct BenchResult {
    std::vector<BenchRow> rows;
    std::vector<std::string> warnings;
    nlohmann::json breakdown;
};

/// Parameters, FLOPs per frame and median single-frame latency. Networks are
/// taken from ckpt_dir when present, otherwise freshly initialised (latency
/// and counts do not depend on the weights).
inline BenchResult bench(const ExperimentConfig& c, const std::optional<std::filesystem::path>& ckpt_dir = {})
{
    const auto table = c.table();
    const auto qam = c.constellation();
    const auto n_r = static_cast<std::size_t>(c.n_r), t = static_cast<std::size_t>(c.t);
    const auto n_t = static_cast<std::size_t>(c.n_t), n_u = static_cast<std::size_t>(c.n_u);
    const std::size_t trials = std::max<std::size_t>(c.bench_trials, 1);
    const double snr = c.snr_db.front();
    const Dataset d = generate_split(c, Split::test, snr, trials);
    BenchResult res;
    const double hyp = detect::ml_hypotheses_per_slot(table, qam);
    if (hyp > ml_hypothesis_guard)
        res.warnings.push_back("ml: " + format_number(hyp) + " hypotheses per slot exceeds the 1e7 guard");

    for (const auto& name : c.detectors) {
        BenchRow row;
        row.detector = name;
        row.trials = trials;
        std::size_t k = 0;
        if (name == "ml" || name == "somp") {
            const auto method = name == "ml" ? detect::ClassicalMethod::ml : detect::ClassicalMethod::somp;
            row.flops = name == "ml" ? ml_flops(table, qam, n_r, t) : somp_flops(n_t, n_u, n_r, t);
            row.median_latency_s = median_latency(trials, [&] {
                const auto& r = d.records[k++ % d.records.size()];
                (void)detect::classical_pipeline(r.y, r.h_est, table, qam, method);
            });
        } else {
            std::optional<NetPair> nets;
            if (ckpt_dir) {
                try {
                    nets = load_pair(*ckpt_dir, c.variant, snr);
                } catch (const ConfigError&) {
                }
            }
            if (!nets)
                nets = NetPair{net::build_aapd(n_r, t, n_t, c.variant, c.aapd, Rng::derive(c.seed, 1)),
                               net::build_se(n_u, t, c.variant, c.se, Rng::derive(c.seed, 2))};
            row.variant = std::string(net::to_string(c.variant));
            row.params = nets->aapd.count_params() + nets->se.count_params();
            row.flops = nets->aapd.count_flops() + zf_flops(n_r, n_u, t) + nets->se.count_flops();
            res.breakdown = {{"aapd_params", nets->aapd.count_params()}, {"se_params", nets->se.count_params()},
                             {"aapd_flops", nets->aapd.count_flops()},   {"zf_flops", zf_flops(n_r, n_u, t)},
                             {"se_flops", nets->se.count_flops()}};
            row.median_latency_s = median_latency(trials, [&] {
                const auto& r = d.records[k++ % d.records.size()];
                (void)net::detect_frame(r.y, r.h_est, nets->aapd, &nets->se, table, qam);
            });
        }
        res.rows.push_back(std::move(row));
    }
    return res;
}

inline nlohmann::json to_json(const BenchRow& r)
{
    return {{"detector", r.detector}, {"variant", r.variant},          {"params", r.params},
            {"flops_per_frame", r.flops}, {"median_latency_s", r.median_latency_s}, {"trials", r.trials}};
}

} // namespace imnet::harness
