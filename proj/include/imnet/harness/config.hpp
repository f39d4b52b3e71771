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


// Experiment configuration: flat "key = value" text, '#' starts a comment.
// Lists are comma separated.

#pragma once

#include "imnet/imreconet.hpp"
#include "imnet/phy.hpp"

#include <array>
#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

namespace imnet::harness {

class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

enum class ChannelMode {
    fixed, // one Rayleigh draw per seed shared by every frame and split
    block, // a fresh draw per frame, constant over its T slots
};

struct ExperimentConfig {
    int n_t = 4;
    int n_u = 1;
    int n_r = 4;
    int t = 16;
    int m = 4;
    std::vector<double> snr_db{5, 10, 15, 20, 25};
    double rho = 0.0;
    double csi_error_var = 0.0;
    double noise_level_eps = 0.0; // recorded, not used by any detector
    ChannelMode channel_mode = ChannelMode::fixed;
    std::string tac_preset = "lexicographic";

    std::size_t frames = 10000; // per SNR, before the split
    std::array<double, 3> split{0.6, 0.2, 0.2};
    std::size_t frames_train = 0; // explicit counts override frames/split
    std::size_t frames_val = 0;
    std::size_t frames_test = 0;

    std::uint64_t seed = 1;
    std::vector<std::string> detectors{"ml", "somp", "imreconet"};
    net::Variant variant = net::Variant::complex;
    std::size_t threads = 0; // 0: IMNET_THREADS or hardware concurrency

    net::TrainConfig train;
    bool mixed_snr_training = false;
    net::AapdWidths aapd;
    net::SeWidths se;

    double sweep_snr_db = 15.0;
    std::vector<double> sweep_sigma_c_db{-std::numeric_limits<double>::infinity(), -30, -25, -20, -15, -10};
    std::size_t sweep_frames = 5000;
    std::size_t bench_trials = 30;

    std::size_t count_for(int split_index) const
    {
        const std::size_t explicit_counts[3] = {frames_train, frames_val, frames_test};
        if (explicit_counts[split_index] > 0) return explicit_counts[split_index];
        const auto train_n = static_cast<std::size_t>(std::llround(static_cast<double>(frames) * split[0]));
        const auto val_n = static_cast<std::size_t>(std::llround(static_cast<double>(frames) * split[1]));
        if (split_index == 0) return train_n;
        if (split_index == 1) return val_n;
        return frames - std::min(frames, train_n + val_n);
    }

    phy::TacTable table() const
    {
        if (tac_preset == "preset_4x2") {
            if (n_t != 4 || n_u != 2) throw ConfigError("tac_preset preset_4x2 needs n_t = 4 and n_u = 2");
            return phy::preset_4x2();
        }
        return phy::build_tac_table(n_t, n_u);
    }
    phy::QamConstellation constellation() const { return phy::QamConstellation(m); }

    void validate() const
    {
        auto fail = [](const std::string& msg) { throw ConfigError(msg); };
        if (n_u <= 0 || n_u >= n_t) fail("need 0 < n_u < n_t");
        if (n_t > 64) fail("n_t above 64 is not supported");
        if (n_u > n_r) fail("need n_u <= n_r for zero forcing");
        if (t < 1) fail("t must be positive");
        if (m < 4 || !std::has_single_bit(static_cast<unsigned>(m)) || std::countr_zero(static_cast<unsigned>(m)) % 2)
            fail("m must be a power of 4");
        if (snr_db.empty()) fail("snr_db list is empty");
        if (!(rho >= 0.0 && rho < 1.0)) fail("rho must be in [0, 1)");
        if (!(csi_error_var >= 0.0)) fail("csi_error_var must be non-negative");
        if (tac_preset != "lexicographic" && tac_preset != "preset_4x2") fail("tac_preset must be lexicographic or preset_4x2");
        const double ssum = split[0] + split[1] + split[2];
        if (std::abs(ssum - 1.0) > 1e-9 || split[0] < 0 || split[1] < 0 || split[2] < 0)
            fail("split must be three non-negative fractions summing to 1");
        for (const auto& d : detectors)
            if (d != "ml" && d != "somp" && d != "imreconet") fail("unknown detector '" + d + "'");
        if (sweep_frames == 0 || bench_trials == 0) fail("sweep_frames and bench_trials must be positive");
        try {
            train.validate();
        } catch (const InvalidArgument& e) {
            fail(e.what());
        }
        table();
    }
};

namespace config_detail {

inline std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline double to_double(const std::string& key, const std::string& v)
{
    double x = 0.0;
    const char* first = v.data();
    if (!v.empty() && v[0] == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size() || std::isnan(x))
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    return x;
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v)
{
    std::uint64_t x = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || ptr != v.data() + v.size())
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    return x;
}

inline int to_int(const std::string& key, const std::string& v)
{
    const auto x = to_uint(key, v);
    if (x > 1u << 20) throw ConfigError(key + ": value out of range");
    return static_cast<int>(x);
}

inline bool to_bool(const std::string& key, const std::string& v)
{
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

} // namespace config_detail

/// Applies one key/value pair. Unknown keys are errors.
inline void apply_setting(ExperimentConfig& c, const std::string& key, const std::string& v)
{
    using namespace config_detail;
    auto u32 = [&](std::uint32_t& dst) {
        const auto x = to_uint(key, v);
        if (x == 0 || x > 1u << 16) throw ConfigError(key + ": width must be in [1, 65536]");
        dst = static_cast<std::uint32_t>(x);
    };
    auto dlist = [&](std::vector<double>& dst) {
        dst.clear();
        for (const auto& s : split_list(v)) dst.push_back(to_double(key, s));
    };
    if (key == "n_t") c.n_t = to_int(key, v);
    else if (key == "n_u") c.n_u = to_int(key, v);
    else if (key == "n_r") c.n_r = to_int(key, v);
    else if (key == "t") c.t = to_int(key, v);
    else if (key == "m") c.m = to_int(key, v);
    else if (key == "snr_db") dlist(c.snr_db);
    else if (key == "rho") c.rho = to_double(key, v);
    else if (key == "csi_error_var") c.csi_error_var = to_double(key, v);
    else if (key == "noise_level_eps") c.noise_level_eps = to_double(key, v);
    else if (key == "channel_mode") {
        if (v == "fixed") c.channel_mode = ChannelMode::fixed;
        else if (v == "block") c.channel_mode = ChannelMode::block;
        else throw ConfigError("channel_mode must be fixed or block");
    }
    else if (key == "tac_preset") c.tac_preset = v;
    else if (key == "frames") c.frames = to_uint(key, v);
    else if (key == "split") {
        const auto parts = split_list(v);
        if (parts.size() != 3) throw ConfigError("split needs three fractions");
        for (std::size_t i = 0; i < 3; ++i) c.split[i] = to_double(key, parts[i]);
    }
    else if (key == "frames_train") c.frames_train = to_uint(key, v);
    else if (key == "frames_val") c.frames_val = to_uint(key, v);
    else if (key == "frames_test") c.frames_test = to_uint(key, v);
    else if (key == "seed") c.seed = to_uint(key, v);
    else if (key == "detectors") c.detectors = split_list(v);
    else if (key == "variant") {
        try {
            c.variant = net::parse_variant(v);
        } catch (const InvalidArgument& e) {
            throw ConfigError(e.what());
        }
    }
    else if (key == "threads") c.threads = to_uint(key, v);
    else if (key == "lr") c.train.lr = to_double(key, v);
    else if (key == "batch") c.train.batch = to_uint(key, v);
    else if (key == "max_epochs") c.train.max_epochs = to_uint(key, v);
    else if (key == "gamma1") c.train.gamma1 = to_double(key, v);
    else if (key == "gamma2_rel") c.train.gamma2_rel = to_double(key, v);
    else if (key == "patience") c.train.patience = to_uint(key, v);
    else if (key == "mixed_snr_training") c.mixed_snr_training = to_bool(key, v);
    else if (key == "aapd_conv1") u32(c.aapd.conv1);
    else if (key == "aapd_conv2") u32(c.aapd.conv2);
    else if (key == "aapd_fc1") u32(c.aapd.fc1);
    else if (key == "aapd_fc2") u32(c.aapd.fc2);
    else if (key == "se_conv") u32(c.se.conv);
    else if (key == "sweep_snr_db") c.sweep_snr_db = to_double(key, v);
    else if (key == "sweep_sigma_c_db") dlist(c.sweep_sigma_c_db);
    else if (key == "sweep_frames") c.sweep_frames = to_uint(key, v);
    else if (key == "bench_trials") c.bench_trials = to_uint(key, v);
    else if (key == "csi_sigma_z2" || key == "csi_n_p" || key == "csi_e_p") {
        throw ConfigError(key + " must be given together; handled by parse_config");
    }
    else throw ConfigError("unknown key '" + key + "'");
}

inline ExperimentConfig parse_config(std::istream& in, const std::string& origin = "<config>")
{
    ExperimentConfig c;
    std::string line;
    std::size_t lineno = 0;
    std::map<std::string, std::string> pilot;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string body = config_detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = config_detail::trim(body.substr(0, eq));
        const std::string value = config_detail::trim(body.substr(eq + 1));
        try {
            if (key == "csi_sigma_z2" || key == "csi_n_p" || key == "csi_e_p")
                pilot[key] = value;
            else
                apply_setting(c, key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    if (!pilot.empty()) {
        if (pilot.size() != 3) throw ConfigError(origin + ": csi_sigma_z2, csi_n_p and csi_e_p must be given together");
        const double sz = config_detail::to_double("csi_sigma_z2", pilot["csi_sigma_z2"]);
        const double np = config_detail::to_double("csi_n_p", pilot["csi_n_p"]);
        const double ep = config_detail::to_double("csi_e_p", pilot["csi_e_p"]);
        try {
            c.csi_error_var = phy::csi_error_variance(c.n_t, sz, np, ep);
        } catch (const InvalidArgument& e) {
            throw ConfigError(origin + ": " + e.what());
        }
    }
    c.validate();
    return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path)
{
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path.string());
    return parse_config(f, path.string());
}

inline ExperimentConfig parse_config_string(const std::string& text)
{
    std::istringstream in(text);
    return parse_config(in);
}

/// Shortest round-trip text of a number, used in file names and CSV.
inline std::string format_number(double v)
{
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return ec == std::errc() ? std::string(buf, ptr) : std::to_string(v);
}

inline std::size_t resolve_threads(std::size_t requested)
{
    if (requested > 0) return requested;
    if (const char* env = std::getenv("IMNET_THREADS")) {
        std::uint64_t x = 0;
        const std::string_view s(env);
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
        if (ec == std::errc() && ptr == s.data() + s.size() && x > 0) return static_cast<std::size_t>(x);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace imnet::harness
