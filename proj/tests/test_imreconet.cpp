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


#include "imnet/imreconet.hpp"

#include <catch_amalgamated.hpp>

using namespace imnet;
using namespace imnet::net;
using Catch::Matchers::WithinAbs;

namespace {

const AapdWidths small_aapd{4, 4, 16, 8};
const SeWidths small_se{4};

struct Toy {
    phy::TacTable table = phy::build_tac_table(4, 1);
    phy::QamConstellation qam{4};
    std::vector<ComplexMatrix> y, h, s;
    std::vector<std::size_t> tac;
};

// i.i.d. frames through one fixed channel
Toy make_toy(std::size_t n, double snr_db, std::uint64_t seed, std::size_t n_r = 4)
{
    Toy toy;
    Rng rng(seed);
    phy::ChannelRealization ch;
    ch.h = phy::rayleigh_channel(rng, n_r, 4);
    ch.h_est = ch.h;
    for (std::size_t i = 0; i < n; ++i) {
        const auto bits = phy::random_bits(rng, phy::bits_per_frame(toy.table, toy.qam, 8));
        const auto f = phy::assemble_frame(bits, toy.table, toy.qam, 8);
        toy.y.push_back(phy::apply_channel(f, ch, snr_db, rng));
        toy.h.push_back(ch.h);
        toy.s.push_back(f.s);
        toy.tac.push_back(f.tac_index);
    }
    return toy;
}

FullTrainData view(const Toy& toy, std::size_t from, std::size_t to)
{
    FullTrainData d;
    for (std::size_t i = from; i < to; ++i) {
        d.y.push_back(&toy.y[i]);
        d.h_est.push_back(&toy.h[i]);
        d.s.push_back(&toy.s[i]);
        d.aapd.tac.push_back(toy.tac[i]);
        for (auto g : toy.table.aap(toy.tac[i])) d.aapd.y.push_back(g);
    }
    d.aapd.x = aapd_input(d.y);
    return d;
}

} // namespace

TEST_CASE("predict_tac picks the top antennas", "[imreconet]")
{
    const auto t41 = phy::build_tac_table(4, 1);
    CHECK(predict_tac(std::vector<double>{0.1, 0.7, 0.1, 0.1}, t41) == 1);
    CHECK(predict_tac(std::vector<double>{0.2, 0.2, 0.2, 0.2}, t41) == 0);
    CHECK(t41.tacs[predict_tac(std::vector<double>{0.9, 0.1, 0.8, 0.2}, t41)] == phy::Tac{1});
    const auto ti = phy::preset_4x2();
    CHECK(ti.tacs[predict_tac(std::vector<double>{0.9, 0.1, 0.8, 0.2}, ti)] == phy::Tac{1, 3});
    // {1,2} illegal; sums {1,3}=1.0, {1,4}=0.95, {2,3}=0.95, {2,4}=0.9
    CHECK(ti.tacs[predict_tac(std::vector<double>{0.9, 0.85, 0.1, 0.05}, ti)] == phy::Tac{1, 3});

    const auto t42 = phy::build_tac_table(4, 2); // {1,2},{1,3},{1,4},{2,3}
    CHECK(t42.tacs[predict_tac(std::vector<double>{0.9, 0.1, 0.8, 0.2}, t42)] == phy::Tac{1, 3});
    // {2,4} is not in the lexicographic table
    CHECK(t42.tacs[predict_tac(std::vector<double>{0.1, 0.9, 0.2, 0.8}, t42)] == phy::Tac{2, 3});
}

TEST_CASE("predict_tac legalizes an illegal top set", "[imreconet]")
{
    const auto t = phy::preset_4x2(); // {1,3},{1,4},{2,4},{2,3}
    // top two {1,2} is not in the table; {1,3} has the largest mass
    CHECK(predict_tac(std::vector<double>{0.9, 0.8, 0.3, 0.1}, t) == 0);
    // {2,3} mass 1.3 beats {1,3} mass 1.2
    CHECK(predict_tac(std::vector<double>{0.7, 0.8, 0.5, 0.1}, t) == 3);
    // equal masses resolve in table order
    CHECK(predict_tac(std::vector<double>{0.5, 0.5, 0.5, 0.5}, t) == 0);
    CHECK_THROWS_AS(predict_tac(std::vector<double>{0.5, 0.5}, t), InvalidArgument);
}

TEST_CASE("complex subnets have half the weights of their real twins", "[imreconet]")
{
    for (std::size_t nt : {4u, 8u}) {
        const auto c = build_aapd(4, 16, nt, Variant::complex);
        const auto r = build_aapd(4, 16, nt, Variant::real);
        CHECK(2 * c.count_params() == r.count_params());
    }
    const auto c = build_se(2, 16, Variant::complex);
    const auto r = build_se(2, 16, Variant::real);
    CHECK(2 * c.count_params() == r.count_params());
    CHECK(c.count_flops() > 0);
}

TEST_CASE("AAPD outputs are probabilities, one per antenna", "[imreconet]")
{
    Rng rng(4);
    for (auto v : {Variant::complex, Variant::real}) {
        for (std::size_t nt : {4u, 5u}) {
            auto m = build_aapd(2, 8, nt, v, small_aapd, 3);
            cvnn::Tensor x(6, m.input_shape());
            for (auto& e : x.data) e = 5.0 * rng.normal();
            const auto p = m.forward(x, cvnn::Mode::train);
            REQUIRE(p.sample_size() == nt);
            for (double e : p.data) {
                CHECK(e > 0.0);
                CHECK(e < 1.0);
            }
        }
    }
}

TEST_CASE("SE starts as the identity", "[imreconet]")
{
    Rng rng(5);
    for (auto v : {Variant::complex, Variant::real}) {
        auto se = build_se(2, 8, v, small_se, 9);
        cvnn::Tensor x(3, se.input_shape());
        for (auto& e : x.data) e = rng.normal();
        CHECK(se.forward(x, cvnn::Mode::infer).data == x.data);
    }
}

TEST_CASE("single-sample overfit", "[imreconet]")
{
    const Toy toy = make_toy(1, 10.0, 11);
    const auto d = view(toy, 0, 1);
    TrainConfig cfg;
    cfg.lr = 5e-3;
    cfg.max_epochs = 3000;
    cfg.gamma1 = 1e-3;
    cfg.patience = 0;

    auto aapd = build_aapd(4, 8, 4, Variant::complex, small_aapd, 1);
    const auto ra = train_aapd(aapd, d.aapd, d.aapd, toy.table, cfg);
    CHECK(ra.converged);
    CHECK(ra.best_val_loss < 1e-3);

    const auto se_set = make_se_set(aapd, d, toy.table, toy.qam);
    REQUIRE(identity_mse(se_set) > 1e-4);
    cfg.gamma2_rel = 1e-4 / identity_mse(se_set);
    auto se = build_se(1, 8, Variant::complex, small_se, 2);
    const auto rs = train_se(se, se_set, se_set, cfg);
    CHECK(rs.converged);
    CHECK(rs.best_val_loss < 1e-4);
}

TEST_CASE("AAPD decision ignores the channel estimate", "[imreconet]")
{
    const Toy toy = make_toy(20, 5.0, 12);
    auto aapd = build_aapd(4, 8, 4, Variant::complex, small_aapd, 1);
    Rng rng(3);
    for (std::size_t i = 0; i < toy.y.size(); ++i) {
        const auto other = phy::corrupt_csi(toy.h[i], 0.5, rng);
        const auto a = detect_frame(toy.y[i], toy.h[i], aapd, nullptr, toy.table, toy.qam);
        const auto b = detect_frame(toy.y[i], other, aapd, nullptr, toy.table, toy.qam);
        CHECK(a.tac_index == b.tac_index);
    }
}

TEST_CASE("identity SE reduces the network to AAPD plus zero forcing", "[imreconet]")
{
    const Toy toy = make_toy(30, 15.0, 13);
    auto aapd = build_aapd(4, 8, 4, Variant::complex, small_aapd, 1);
    auto se = build_se(1, 8, Variant::complex, small_se, 2);
    std::vector<FrameInput> frames;
    for (std::size_t i = 0; i < toy.y.size(); ++i) frames.push_back({&toy.y[i], &toy.h[i]});
    const auto det = detect_batch(frames, aapd, &se, toy.table, toy.qam, 7);
    for (std::size_t i = 0; i < det.size(); ++i) {
        const auto zf = detect::zf_estimate(toy.y[i], toy.h[i], toy.table.tacs[det[i].tac_index]);
        CHECK(det[i].s_hat == zf);
        CHECK(det[i].bits == phy::demap_frame(det[i].tac_index, zf, toy.table, toy.qam));
        // batched and single-frame inference agree
        const auto one = detect_frame(toy.y[i], toy.h[i], aapd, &se, toy.table, toy.qam);
        CHECK(one.tac_index == det[i].tac_index);
        CHECK(one.bits == det[i].bits);
    }
}

TEST_CASE("step-by-step training is ordered and reproducible", "[imreconet]")
{
    const Toy toy = make_toy(240, 10.0, 14);
    const auto tr = view(toy, 0, 160), va = view(toy, 160, 240);
    TrainConfig cfg;
    cfg.max_epochs = 3;
    cfg.batch = 32;
    cfg.seed = 21;
    std::vector<nlohmann::json> log;
    const auto a = train_full(tr, va, toy.table, toy.qam, Variant::complex, small_aapd, small_se, cfg,
                              [&](const nlohmann::json& j) { log.push_back(j); });
    const auto b = train_full(tr, va, toy.table, toy.qam, Variant::complex, small_aapd, small_se, cfg);
    CHECK(a.aapd_result.best_val_loss == b.aapd_result.best_val_loss);
    CHECK(a.se_result.best_val_loss == b.se_result.best_val_loss);
    CHECK(a.aapd.state() == b.aapd.state());

    std::vector<std::string> seq;
    std::size_t aapd_epochs = 0, se_epochs = 0;
    for (const auto& j : log) {
        if (j.contains("event")) seq.push_back(j["event"]);
        if (j.contains("stage")) {
            seq.push_back(j["stage"]);
            (j["stage"] == "aapd" ? aapd_epochs : se_epochs)++;
        }
    }
    CHECK(aapd_epochs == a.aapd_result.epochs_run);
    CHECK(se_epochs == a.se_result.epochs_run);
    const auto pos = [&](const std::string& s) { return std::find(seq.begin(), seq.end(), s) - seq.begin(); };
    CHECK(pos("aapd_start") < pos("aapd"));
    CHECK(pos("aapd_frozen") > static_cast<std::ptrdiff_t>(aapd_epochs));
    CHECK(pos("se_data_built") < pos("se"));
    CHECK(seq.back() == "se_frozen");
}

TEST_CASE("training rejects bad configurations", "[imreconet]")
{
    TrainConfig cfg;
    cfg.batch = 1;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    cfg = {};
    cfg.lr = 0;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
    CHECK(parse_variant("real") == Variant::real);
    CHECK_THROWS_AS(parse_variant("quaternion"), InvalidArgument);
}
