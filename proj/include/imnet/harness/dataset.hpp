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


// Simulated datasets and the IMDS file format.
//
// Header (little-endian): "IMDS", u16 version, u16 n_t, n_u, n_r, t, m,
// f32 snr_db, u64 record count, u64 seed. Each record holds the packed bits
// (MSB first, ceil(b/8) bytes), Y (N_r x T), H and H_est (N_r x N_t), the
// AAP g (N_t bytes) and S (N_u x T); matrices are row-major interleaved
// (re, im) f32 pairs.

#pragma once

#include "imnet/binio.hpp"
#include "imnet/harness/config.hpp"

#include <fstream>
#include <sstream>
#include <thread>

namespace imnet::harness {

inline constexpr std::uint16_t dataset_version = 1;

struct DatasetHeader {
    std::uint16_t version = dataset_version;
    std::uint16_t n_t = 0, n_u = 0, n_r = 0, t = 0, m = 0;
    float snr_db = 0.0f;
    std::uint64_t count = 0;
    std::uint64_t seed = 0;
    friend bool operator==(const DatasetHeader&, const DatasetHeader&) = default;
};

struct Record {
    phy::Bits bits;
    ComplexMatrix y, h, h_est;
    phy::Bits g;
    ComplexMatrix s;
    std::size_t tac_index = 0; // from the spatial bits, not stored separately
    friend bool operator==(const Record&, const Record&) = default;
};

struct Dataset {
    DatasetHeader header;
    std::vector<Record> records;
};

enum class Split { train = 0, val = 1, test = 2 };

inline std::string_view to_string(Split s)
{
    switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    }
    return "?";
}

inline std::string dataset_filename(Split s, double snr_db)
{
    return std::string(to_string(s)) + "_snr" + format_number(snr_db) + ".imds";
}

inline DatasetHeader header_for(const ExperimentConfig& c, double snr_db, std::uint64_t count)
{
    DatasetHeader h;
    h.n_t = static_cast<std::uint16_t>(c.n_t);
    h.n_u = static_cast<std::uint16_t>(c.n_u);
    h.n_r = static_cast<std::uint16_t>(c.n_r);
    h.t = static_cast<std::uint16_t>(c.t);
    h.m = static_cast<std::uint16_t>(c.m);
    h.snr_db = static_cast<float>(snr_db);
    h.count = count;
    h.seed = c.seed;
    return h;
}

/// Throws ConfigError when a file does not describe the configured system.
inline void check_header(const DatasetHeader& h, const ExperimentConfig& c, const std::string& what)
{
    if (h.n_t != c.n_t || h.n_u != c.n_u || h.n_r != c.n_r || h.t != c.t || h.m != c.m)
        throw ConfigError(what + ": dataset dimensions (n_t=" + std::to_string(h.n_t) + ", n_u=" + std::to_string(h.n_u) +
                          ", n_r=" + std::to_string(h.n_r) + ", t=" + std::to_string(h.t) + ", m=" +
                          std::to_string(h.m) + ") do not match the config");
}

inline std::size_t spatial_index(const phy::Bits& bits, int b1)
{
    std::size_t idx = 0;
    for (int i = 0; i < b1; ++i) idx = (idx << 1) | (bits[static_cast<std::size_t>(i)] & 1u);
    return idx;
}

namespace dataset_detail {

inline void quantize(ComplexMatrix& m)
{
    for (auto& z : m.data())
        z = {static_cast<double>(static_cast<float>(z.real())), static_cast<double>(static_cast<float>(z.imag()))};
}

inline void put_matrix(std::ostream& os, const ComplexMatrix& m)
{
    for (const auto& z : m.data()) {
        binio::put(os, static_cast<float>(z.real()));
        binio::put(os, static_cast<float>(z.imag()));
    }
}

inline ComplexMatrix get_matrix(std::istream& is, std::size_t rows, std::size_t cols)
{
    ComplexMatrix m(rows, cols);
    for (auto& z : m.data()) {
        const float re = binio::get<float>(is);
        const float im = binio::get<float>(is);
        z = {re, im};
    }
    return m;
}

inline constexpr std::uint64_t channel_stream = 0x4348414E4E454CULL;

inline std::uint64_t split_stream(Split s, double snr_db)
{
    return Rng::mix(static_cast<std::uint64_t>(s) + 1) ^ std::bit_cast<std::uint64_t>(snr_db);
}

} // namespace dataset_detail

/// Channel shared by all frames in fixed mode: one Rayleigh draw per seed,
/// Kronecker-correlated when rho > 0.
inline ComplexMatrix fixed_channel(const ExperimentConfig& c)
{
    Rng rng(Rng::derive(c.seed, dataset_detail::channel_stream));
    return phy::make_correlated(phy::rayleigh_channel(rng, static_cast<std::size_t>(c.n_r), static_cast<std::size_t>(c.n_t)),
                                c.rho);
}

/// One frame. Bits, channel, CSI error and noise come from separate
/// streams of frame_seed, so frames that differ only in the CSI error
/// variance share everything else.
inline Record simulate_frame(const ExperimentConfig& c, const phy::TacTable& table, const phy::QamConstellation& qam,
                             const ComplexMatrix& h_fixed, double snr_db, double csi_var, std::uint64_t frame_seed)
{
    Rng bits_rng(Rng::derive(frame_seed, 1));
    Rng chan_rng(Rng::derive(frame_seed, 2));
    Rng csi_rng(Rng::derive(frame_seed, 3));
    Rng noise_rng(Rng::derive(frame_seed, 4));
    Record r;
    const auto t = static_cast<std::size_t>(c.t);
    r.bits = phy::random_bits(bits_rng, phy::bits_per_frame(table, qam, t));
    const phy::Frame f = phy::assemble_frame(r.bits, table, qam, t);
    phy::ChannelRealization ch;
    ch.rho = c.rho;
    ch.csi_error_var = csi_var;
    if (c.channel_mode == ChannelMode::fixed)
        ch.h = h_fixed;
    else
        ch.h = phy::make_correlated(
            phy::rayleigh_channel(chan_rng, static_cast<std::size_t>(c.n_r), static_cast<std::size_t>(c.n_t)), c.rho);
    dataset_detail::quantize(ch.h);
    ch.h_est = phy::corrupt_csi(ch.h, csi_var, csi_rng);
    r.y = phy::apply_channel(f, ch, snr_db, noise_rng);
    r.h = std::move(ch.h);
    r.h_est = std::move(ch.h_est);
    r.g = table.aap(f.tac_index);
    r.s = f.s;
    r.tac_index = f.tac_index;
    dataset_detail::quantize(r.y);
    dataset_detail::quantize(r.h_est);
    dataset_detail::quantize(r.s);
    return r;
}

/// Runs body(i) for i in [0, n) on `threads` workers with static chunking.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& body)
{
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += threads) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// Frames of one split at one SNR. Frame i uses the generator derived from
/// (seed, split, snr, i), so the output is independent of the thread count.
inline Dataset generate_split(const ExperimentConfig& c, Split split, double snr_db, std::size_t count,
                              std::size_t threads = 1, std::optional<double> csi_var_override = std::nullopt,
                              std::uint64_t stream_salt = 0)
{
    const auto table = c.table();
    const auto qam = c.constellation();
    const ComplexMatrix h_fixed = fixed_channel(c);
    const double csi_var = csi_var_override.value_or(c.csi_error_var);
    const std::uint64_t stream = dataset_detail::split_stream(split, snr_db) ^ stream_salt;
    Dataset d;
    d.header = header_for(c, snr_db, count);
    d.records.resize(count);
    parallel_for(count, threads, [&](std::size_t i) {
        d.records[i] = simulate_frame(c, table, qam, h_fixed, snr_db, csi_var, Rng::derive(c.seed, stream, i));
    });
    return d;
}

inline void write_dataset(std::ostream& os, const Dataset& d)
{
    const auto& h = d.header;
    if (h.count != d.records.size()) throw InvalidArgument("write_dataset: header count does not match records");
    binio::put_magic(os, "IMDS");
    binio::put(os, h.version);
    binio::put(os, h.n_t);
    binio::put(os, h.n_u);
    binio::put(os, h.n_r);
    binio::put(os, h.t);
    binio::put(os, h.m);
    binio::put(os, h.snr_db);
    binio::put(os, h.count);
    binio::put(os, h.seed);
    for (const auto& r : d.records) {
        std::vector<std::uint8_t> packed((r.bits.size() + 7) / 8, 0);
        for (std::size_t i = 0; i < r.bits.size(); ++i)
            if (r.bits[i] & 1u) packed[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
        os.write(reinterpret_cast<const char*>(packed.data()), static_cast<std::streamsize>(packed.size()));
        dataset_detail::put_matrix(os, r.y);
        dataset_detail::put_matrix(os, r.h);
        dataset_detail::put_matrix(os, r.h_est);
        for (auto g : r.g) binio::put(os, g);
        dataset_detail::put_matrix(os, r.s);
    }
}

inline DatasetHeader read_header(std::istream& is)
{
    binio::expect_magic(is, "IMDS", "dataset");
    DatasetHeader h;
    h.version = binio::get<std::uint16_t>(is);
    if (h.version != dataset_version) throw FormatError("dataset: unsupported version " + std::to_string(h.version));
    h.n_t = binio::get<std::uint16_t>(is);
    h.n_u = binio::get<std::uint16_t>(is);
    h.n_r = binio::get<std::uint16_t>(is);
    h.t = binio::get<std::uint16_t>(is);
    h.m = binio::get<std::uint16_t>(is);
    h.snr_db = binio::get<float>(is);
    h.count = binio::get<std::uint64_t>(is);
    h.seed = binio::get<std::uint64_t>(is);
    return h;
}

/// Reads a dataset; the table supplies b1 for the TAC index.
inline Dataset read_dataset(std::istream& is, const phy::TacTable& table)
{
    Dataset d;
    d.header = read_header(is);
    const auto& h = d.header;
    if (h.n_t != table.n_t || h.n_u != table.n_u)
        throw ConfigError("dataset: antenna configuration does not match the TAC table");
    if (h.m < 4 || !std::has_single_bit(static_cast<unsigned>(h.m)))
        throw FormatError("dataset: invalid constellation order " + std::to_string(h.m));
    const std::size_t d_bits = static_cast<std::size_t>(std::countr_zero(static_cast<unsigned>(h.m)));
    const std::size_t nbits = static_cast<std::size_t>(table.spatial_bits()) + h.n_u * d_bits * h.t;
    const std::size_t rec_bytes = (nbits + 7) / 8 + 8 * (h.n_r * h.t + 2 * h.n_r * h.n_t + h.n_u * h.t) + h.n_t;
    if (h.count > (std::uint64_t{1} << 40) / std::max<std::size_t>(rec_bytes, 1))
        throw FormatError("dataset: implausible record count");
    d.records.resize(h.count);
    std::vector<std::uint8_t> packed((nbits + 7) / 8);
    for (auto& r : d.records) {
        if (!is.read(reinterpret_cast<char*>(packed.data()), static_cast<std::streamsize>(packed.size())))
            throw FormatError("dataset: truncated record payload");
        r.bits.resize(nbits);
        for (std::size_t i = 0; i < nbits; ++i) r.bits[i] = (packed[i / 8] >> (7 - i % 8)) & 1u;
        r.y = dataset_detail::get_matrix(is, h.n_r, h.t);
        r.h = dataset_detail::get_matrix(is, h.n_r, h.n_t);
        r.h_est = dataset_detail::get_matrix(is, h.n_r, h.n_t);
        r.g.resize(h.n_t);
        for (auto& g : r.g) g = binio::get<std::uint8_t>(is);
        r.s = dataset_detail::get_matrix(is, h.n_u, h.t);
        r.tac_index = spatial_index(r.bits, table.spatial_bits());
        if (r.tac_index >= table.n_l() || table.aap(r.tac_index) != r.g)
            throw FormatError("dataset: record AAP disagrees with its spatial bits");
    }
    if (is.peek() != std::char_traits<char>::eof()) throw FormatError("dataset: trailing bytes after the declared records");
    return d;
}

inline void save_dataset(const std::filesystem::path& path, const Dataset& d)
{
    std::ostringstream buf(std::ios::binary);
    write_dataset(buf, d);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    const std::string bytes = buf.str();
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

inline Dataset load_dataset(const std::filesystem::path& path, const phy::TacTable& table)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open dataset " + path.string());
    try {
        return read_dataset(f, table);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

/// Training view of a dataset (pointers into `d`, which must outlive it).
inline net::FullTrainData training_view(const Dataset& d)
{
    net::FullTrainData out;
    const std::size_t n = d.records.size();
    out.y.reserve(n);
    for (const auto& r : d.records) {
        out.y.push_back(&r.y);
        out.h_est.push_back(&r.h_est);
        out.s.push_back(&r.s);
        out.aapd.tac.push_back(r.tac_index);
        for (auto g : r.g) out.aapd.y.push_back(static_cast<double>(g));
    }
    if (n > 0) out.aapd.x = net::aapd_input(out.y);
    return out;
}

} // namespace imnet::harness
