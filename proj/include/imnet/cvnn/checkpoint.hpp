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


// CVNN checkpoint file. All fields little-endian:
//
//   "CVNN" u16 version
//   u32 c, h, w                         input shape
//   u32 layer count, then per layer:
//     u16 kind, u32 out, kernel, stride, padding, f64 eps, f64 momentum, u8 zero_init
//   per layer: u32 param count, per param: u8 complex, u32 slots, f32 data
//              u32 buffer count, per buffer: u32 length, f32 data
//   u8 has_adam; if set: u64 step, f64 lr, beta1, beta2, eps, then m and v
//   for every param in the same layout as the values
//
// Complex parameters are written as interleaved (re, im) pairs.

#pragma once

#include "imnet/binio.hpp"
#include "imnet/cvnn/adam.hpp"
#include "imnet/cvnn/model.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

namespace imnet::cvnn {

inline constexpr std::uint16_t checkpoint_version = 1;

namespace ckpt_detail {

inline void put_block(std::ostream& os, const std::vector<double>& v, bool complex)
{
    if (complex) {
        const std::size_t half = v.size() / 2;
        for (std::size_t k = 0; k < half; ++k) {
            binio::put(os, static_cast<float>(v[k]));
            binio::put(os, static_cast<float>(v[half + k]));
        }
    } else {
        for (double x : v) binio::put(os, static_cast<float>(x));
    }
}

inline void get_block(std::istream& is, std::vector<double>& v, bool complex)
{
    if (complex) {
        const std::size_t half = v.size() / 2;
        for (std::size_t k = 0; k < half; ++k) {
            v[k] = binio::get<float>(is);
            v[half + k] = binio::get<float>(is);
        }
    } else {
        for (auto& x : v) x = binio::get<float>(is);
    }
}

} // namespace ckpt_detail

inline void write_checkpoint(std::ostream& os, Model& model, const Adam* opt = nullptr)
{
    binio::put_magic(os, "CVNN");
    binio::put(os, checkpoint_version);
    const Shape in = model.input_shape();
    binio::put(os, static_cast<std::uint32_t>(in.c));
    binio::put(os, static_cast<std::uint32_t>(in.h));
    binio::put(os, static_cast<std::uint32_t>(in.w));
    binio::put(os, static_cast<std::uint32_t>(model.specs().size()));
    for (const auto& s : model.specs()) {
        binio::put(os, static_cast<std::uint16_t>(s.kind));
        binio::put(os, s.out);
        binio::put(os, s.kernel);
        binio::put(os, s.stride);
        binio::put(os, s.padding);
        binio::put(os, s.eps);
        binio::put(os, s.momentum);
        binio::put(os, static_cast<std::uint8_t>(s.zero_init));
    }
    for (std::size_t i = 0; i < model.size(); ++i) {
        auto ps = model.layer(i).params();
        binio::put(os, static_cast<std::uint32_t>(ps.size()));
        for (const Param* p : ps) {
            binio::put(os, static_cast<std::uint8_t>(p->complex));
            binio::put(os, static_cast<std::uint32_t>(p->value.size()));
            ckpt_detail::put_block(os, p->value, p->complex);
        }
        auto bs = model.layer(i).buffers();
        binio::put(os, static_cast<std::uint32_t>(bs.size()));
        for (const auto* b : bs) {
            binio::put(os, static_cast<std::uint32_t>(b->size()));
            ckpt_detail::put_block(os, *b, false);
        }
    }
    binio::put(os, static_cast<std::uint8_t>(opt != nullptr && opt->steps() > 0));
    if (opt != nullptr && opt->steps() > 0) {
        binio::put(os, opt->steps());
        binio::put(os, opt->lr);
        binio::put(os, opt->beta1);
        binio::put(os, opt->beta2);
        binio::put(os, opt->eps);
        const auto ps = model.params();
        for (const auto* moments : {&opt->first_moments(), &opt->second_moments()})
            for (std::size_t i = 0; i < ps.size(); ++i) ckpt_detail::put_block(os, (*moments)[i], ps[i]->complex);
    }
}

struct LoadedCheckpoint {
    Model model;
    std::optional<Adam> adam;
};

inline LoadedCheckpoint read_checkpoint(std::istream& is)
{
    binio::expect_magic(is, "CVNN", "checkpoint");
    const auto version = binio::get<std::uint16_t>(is);
    if (version != checkpoint_version) throw FormatError("checkpoint: unsupported version " + std::to_string(version));
    Shape in;
    in.c = binio::get<std::uint32_t>(is);
    in.h = binio::get<std::uint32_t>(is);
    in.w = binio::get<std::uint32_t>(is);
    const auto n_layers = binio::get<std::uint32_t>(is);
    if (n_layers > 4096) throw FormatError("checkpoint: implausible layer count");
    std::vector<LayerSpec> specs(n_layers);
    for (auto& s : specs) {
        const auto kind = binio::get<std::uint16_t>(is);
        if (kind < 1 || kind > 10) throw FormatError("checkpoint: unknown layer kind " + std::to_string(kind));
        s.kind = static_cast<LayerKind>(kind);
        s.out = binio::get<std::uint32_t>(is);
        s.kernel = binio::get<std::uint32_t>(is);
        s.stride = binio::get<std::uint32_t>(is);
        s.padding = binio::get<std::uint32_t>(is);
        s.eps = binio::get<double>(is);
        s.momentum = binio::get<double>(is);
        s.zero_init = binio::get<std::uint8_t>(is) != 0;
    }
    LoadedCheckpoint out;
    try {
        out.model = Model(in, specs, 0);
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("checkpoint: invalid architecture: ") + e.what());
    }
    for (std::size_t i = 0; i < out.model.size(); ++i) {
        auto ps = out.model.layer(i).params();
        if (binio::get<std::uint32_t>(is) != ps.size()) throw FormatError("checkpoint: parameter count mismatch");
        for (Param* p : ps) {
            const bool cplx_flag = binio::get<std::uint8_t>(is) != 0;
            const auto n = binio::get<std::uint32_t>(is);
            if (cplx_flag != p->complex || n != p->value.size()) throw FormatError("checkpoint: parameter shape mismatch");
            ckpt_detail::get_block(is, p->value, p->complex);
        }
        auto bs = out.model.layer(i).buffers();
        if (binio::get<std::uint32_t>(is) != bs.size()) throw FormatError("checkpoint: buffer count mismatch");
        for (auto* b : bs) {
            if (binio::get<std::uint32_t>(is) != b->size()) throw FormatError("checkpoint: buffer shape mismatch");
            ckpt_detail::get_block(is, *b, false);
        }
    }
    if (binio::get<std::uint8_t>(is) != 0) {
        Adam a;
        const auto steps = binio::get<std::uint64_t>(is);
        a.lr = binio::get<double>(is);
        a.beta1 = binio::get<double>(is);
        a.beta2 = binio::get<double>(is);
        a.eps = binio::get<double>(is);
        const auto ps = out.model.params();
        std::vector<std::vector<double>> m, v;
        for (auto* moments : {&m, &v})
            for (const Param* p : ps) {
                moments->emplace_back(p->value.size(), 0.0);
                ckpt_detail::get_block(is, moments->back(), p->complex);
            }
        a.set_state(steps, std::move(m), std::move(v));
        out.adam = std::move(a);
    }
    return out;
}

inline void save_checkpoint(const std::filesystem::path& path, Model& model, const Adam* opt = nullptr)
{
    std::ostringstream buf(std::ios::binary);
    write_checkpoint(buf, model, opt);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open " + path.string() + " for writing");
    const std::string bytes = buf.str();
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + path.string());
}

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& path)
{
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path.string());
    try {
        return read_checkpoint(f);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

} // namespace imnet::cvnn
