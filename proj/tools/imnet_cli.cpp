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


// imnet command-line front end.
//
//   imnet gen-data        --config FILE --out DIR
//   imnet train           --config FILE --data DIR --out DIR
//   imnet eval            --config FILE --data DIR --checkpoints DIR --out DIR
//   imnet bench           --config FILE [--checkpoints DIR] [--out DIR]
//   imnet sweep-csi-error --config FILE --checkpoints DIR --out DIR
//
// Exit codes: 0 ok, 2 usage or configuration, 3 I/O, 4 numerical failure.

#include "imnet/harness/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

using namespace imnet;
using namespace imnet::harness;

enum ExitCode { exit_ok = 0, exit_usage = 2, exit_io = 3, exit_numerical = 4 };

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<std::string> variant;
    std::optional<std::string> detectors;
    std::optional<std::size_t> threads;
};

void add_common(CLI::App* sub, Common& c, bool need_out)
{
    sub->add_option("--config", c.config, "experiment config file")->required();
    sub->add_option("--seed", c.seed, "override the config seed");
    auto* out = sub->add_option("--out", c.out, "output directory");
    if (need_out) out->required();
    sub->add_option("--variant", c.variant, "complex or real");
    sub->add_option("--detectors", c.detectors, "comma-separated list of ml, somp, imreconet");
    sub->add_option("--threads", c.threads, "worker threads (default: IMNET_THREADS or all cores)");
}

ExperimentConfig resolve(const Common& c)
{
    ExperimentConfig cfg = load_config(c.config);
    if (c.seed) cfg.seed = *c.seed;
    if (c.variant) apply_setting(cfg, "variant", *c.variant);
    if (c.detectors) apply_setting(cfg, "detectors", *c.detectors);
    if (c.threads) cfg.threads = *c.threads;
    cfg.validate();
    return cfg;
}

void print_eval(const std::vector<EvalRow>& rows)
{
    std::cout << eval_csv(rows);
}

int run(int argc, char** argv)
{
    CLI::App app{"IM-MIMO detection toolkit"};
    app.require_subcommand(1);
    Common gen, train, eval, bench_opts, sweep;
    std::string train_data, eval_data, eval_ckpt, bench_ckpt, sweep_ckpt;

    auto* gen_cmd = app.add_subcommand("gen-data", "generate train/val/test datasets for every SNR");
    add_common(gen_cmd, gen, true);

    auto* train_cmd = app.add_subcommand("train", "train AAPD and SE checkpoints");
    add_common(train_cmd, train, true);
    train_cmd->add_option("--data", train_data, "dataset directory")->required();

    auto* eval_cmd = app.add_subcommand("eval", "BER and AAP accuracy on the test split");
    add_common(eval_cmd, eval, true);
    eval_cmd->add_option("--data", eval_data, "dataset directory")->required();
    eval_cmd->add_option("--checkpoints", eval_ckpt, "checkpoint directory");

    auto* bench_cmd = app.add_subcommand("bench", "parameters, FLOPs and latency per detector");
    add_common(bench_cmd, bench_opts, false);
    bench_cmd->add_option("--checkpoints", bench_ckpt, "checkpoint directory (optional)");

    auto* sweep_cmd = app.add_subcommand("sweep-csi-error", "BER against channel estimation error");
    add_common(sweep_cmd, sweep, true);
    sweep_cmd->add_option("--checkpoints", sweep_ckpt, "checkpoint directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_usage;
    }

    if (gen_cmd->parsed()) {
        const auto cfg = resolve(gen);
        try {
            for (const auto& p : generate_all(cfg, gen.out, resolve_threads(cfg.threads)))
                std::cout << p.string() << '\n';
        } catch (const IoError& e) {
            // an unusable output location is a usage error for gen-data
            throw ConfigError(e.what());
        }
    } else if (train_cmd->parsed()) {
        const auto cfg = resolve(train);
        std::filesystem::create_directories(train.out);
        const auto log_path = std::filesystem::path(train.out) / "train_log.jsonl";
        std::ofstream log_file(log_path, std::ios::trunc);
        if (!log_file) throw IoError("cannot open " + log_path.string());
        const net::Logger log = [&](const nlohmann::json& rec) {
            log_file << rec.dump() << '\n';
            log_file.flush();
            if (rec.contains("warning")) std::cerr << "warning: " << rec.dump() << '\n';
        };
        for (const auto& o : train_all(cfg, train_data, train.out, log))
            std::cout << snr_tag(o.snr_db) << ": aapd epochs=" << o.aapd.epochs_run
                      << " val_bce=" << o.aapd.best_val_loss << (o.aapd.converged ? "" : " (not converged)")
                      << ", se epochs=" << o.se.epochs_run << " val_mse=" << o.se.best_val_loss
                      << (o.se.converged ? "" : " (not converged)") << '\n';
    } else if (eval_cmd->parsed()) {
        const auto cfg = resolve(eval);
        const auto rows = evaluate_all(cfg, eval_data, eval_ckpt, resolve_threads(cfg.threads));
        nlohmann::json mirror = nlohmann::json::array();
        for (const auto& r : rows) mirror.push_back(to_json(r));
        write_results(eval.out, "eval", eval_csv(rows), mirror);
        print_eval(rows);
    } else if (bench_cmd->parsed()) {
        const auto cfg = resolve(bench_opts);
        std::optional<std::filesystem::path> ckpt;
        if (!bench_ckpt.empty()) ckpt = bench_ckpt;
        const auto res = bench(cfg, ckpt);
        for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';
        const std::string csv = bench_csv(res.rows);
        if (!bench_opts.out.empty()) {
            nlohmann::json mirror = nlohmann::json::array();
            for (const auto& r : res.rows) mirror.push_back(to_json(r));
            write_results(bench_opts.out, "bench", csv, mirror);
        }
        std::cout << csv;
    } else if (sweep_cmd->parsed()) {
        const auto cfg = resolve(sweep);
        const auto rows = sweep_csi_error(cfg, sweep_ckpt, resolve_threads(cfg.threads));
        nlohmann::json mirror = nlohmann::json::array();
        for (const auto& r : rows) mirror.push_back(to_json(r));
        const std::string csv = sweep_csv(rows);
        write_results(sweep.out, "sweep_csi_error", csv, mirror);
        std::cout << csv;
    }
    return exit_ok;
}

} // namespace

int main(int argc, char** argv)
{
    try {
        return run(argc, argv);
    } catch (const imnet::IoError& e) {
        std::cerr << "imnet: I/O error: " << e.what() << '\n';
        return exit_io;
    } catch (const imnet::FormatError& e) {
        std::cerr << "imnet: bad file: " << e.what() << '\n';
        return exit_io;
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "imnet: I/O error: " << e.what() << '\n';
        return exit_io;
    } catch (const imnet::InvalidArgument& e) {
        std::cerr << "imnet: " << e.what() << '\n';
        return exit_usage;
    } catch (const imnet::SingularMatrix& e) {
        std::cerr << "imnet: numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const imnet::DecompositionError& e) {
        std::cerr << "imnet: numerical failure: " << e.what() << '\n';
        return exit_numerical;
    } catch (const std::exception& e) {
        std::cerr << "imnet: internal error: " << e.what() << '\n';
        return exit_numerical;
    }
}
