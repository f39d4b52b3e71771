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


#include "imnet/harness/experiment.hpp"

#include <catch_amalgamated.hpp>

using namespace imnet;
using namespace imnet::harness;
using Catch::Matchers::WithinRel;

namespace {

ExperimentConfig small_config()
{
    return parse_config_string("n_t = 4\nn_u = 2\nn_r = 4\nt = 4\nm = 16\nsnr_db = 10\nframes = 40\n"
                               "aapd_conv1 = 2\naapd_conv2 = 2\naapd_fc1 = 4\naapd_fc2 = 4\nse_conv = 2\n");
}

std::string bytes_of(const Dataset& d)
{
    std::ostringstream os(std::ios::binary);
    write_dataset(os, d);
    return os.str();
}

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag)
        : path(std::filesystem::temp_directory_path() / ("imnet_" + tag + "_" + std::to_string(::getpid())))
    {
        std::filesystem::remove_all(path);
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

} // namespace

TEST_CASE("config parsing", "[harness]")
{
    const auto c = parse_config_string("# comment\n n_t = 8 \nn_u=2 # trailing\nm = 16\nsnr_db = 0, 5,10\n"
                                       "rho = 0.5\ndetectors = ml, somp\nvariant = real\nchannel_mode = block\n"
                                       "sweep_sigma_c_db = -inf, -20\n");
    CHECK(c.n_t == 8);
    CHECK(c.n_u == 2);
    CHECK(c.m == 16);
    CHECK(c.snr_db == std::vector<double>{0, 5, 10});
    CHECK(c.rho == 0.5);
    CHECK(c.detectors == std::vector<std::string>{"ml", "somp"});
    CHECK(c.variant == net::Variant::real);
    CHECK(c.channel_mode == ChannelMode::block);
    CHECK(std::isinf(c.sweep_sigma_c_db[0]));
    CHECK(c.table().n_l() == 16);

    const auto d = parse_config_string("");
    CHECK(d.n_t == 4);
    CHECK(d.n_u == 1);
    CHECK(d.table().n_l() == 4);
}

TEST_CASE("config errors", "[harness]")
{
    CHECK_THROWS_AS(parse_config_string("colour = blue\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("n_t 4\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("rho = lots\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("n_u = 3\nn_r = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("m = 8\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("rho = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("split = 0.5, 0.5, 0.5\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("detectors = ml, magic\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("tac_preset = preset_4x2\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_string("csi_sigma_z2 = 0.1\n"), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/imnet.cfg"), ConfigError);
    try {
        parse_config_string("n_t = 4\nbogus = 1\n");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
}

TEST_CASE("pilot parameters give the CSI error variance", "[harness]")
{
    const auto c = parse_config_string("csi_sigma_z2 = 0.01\ncsi_n_p = 4\ncsi_e_p = 2\n");
    CHECK_THAT(c.csi_error_var, WithinRel(4 * 0.01 / 8.0, 1e-15));
    const auto t = parse_config_string("n_u = 2\ntac_preset = preset_4x2\n");
    CHECK(t.table().tacs.front() == phy::Tac{1, 3});
}

TEST_CASE("split counts", "[harness]")
{
    auto c = parse_config_string("frames = 100000\n");
    CHECK(c.count_for(0) == 60000);
    CHECK(c.count_for(1) == 20000);
    CHECK(c.count_for(2) == 20000);
    c = parse_config_string("frames = 7\n");
    CHECK(c.count_for(0) + c.count_for(1) + c.count_for(2) == 7);
    c = parse_config_string("frames_train = 20000\nframes_val = 5000\nframes_test = 5000\n");
    CHECK(c.count_for(0) == 20000);
    CHECK(c.count_for(2) == 5000);
}

TEST_CASE("thread resolution", "[harness]")
{
    CHECK(resolve_threads(3) == 3);
    ::setenv("IMNET_THREADS", "5", 1);
    CHECK(resolve_threads(0) == 5);
    ::setenv("IMNET_THREADS", "junk", 1);
    CHECK(resolve_threads(0) >= 1);
    ::unsetenv("IMNET_THREADS");
}

TEST_CASE("dataset round trip is bit exact", "[harness]")
{
    const auto c = small_config();
    const Dataset d = generate_split(c, Split::train, 10.0, 25);
    REQUIRE(d.records.size() == 25);
    std::istringstream in(bytes_of(d), std::ios::binary);
    const Dataset back = read_dataset(in, c.table());
    CHECK(back.header == d.header);
    CHECK(back.records == d.records);
    for (const auto& r : back.records) {
        CHECK(r.g == c.table().aap(r.tac_index));
        CHECK(r.y.rows() == 4);
        CHECK(r.s.rows() == 2);
    }
}

TEST_CASE("dataset corruption is detected", "[harness]")
{
    const auto c = small_config();
    const std::string bytes = bytes_of(generate_split(c, Split::val, 10.0, 5));
    const auto table = c.table();
    auto read = [&](const std::string& b) {
        std::istringstream in(b, std::ios::binary);
        return read_dataset(in, table);
    };
    CHECK_NOTHROW(read(bytes));
    CHECK_THROWS_AS(read(bytes.substr(0, bytes.size() - 3)), FormatError);
    CHECK_THROWS_AS(read(bytes + "x"), FormatError);
    std::string bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(read(bad), FormatError);
    bad = bytes;
    bad[4] = 9; // version
    CHECK_THROWS_AS(read(bad), FormatError);

    auto other = small_config();
    other.n_r = 3;
    std::istringstream in(bytes, std::ios::binary);
    CHECK_THROWS_AS(check_header(read_header(in), other, "test"), ConfigError);
}

TEST_CASE("generation is deterministic and thread independent", "[harness]")
{
    const auto c = small_config();
    const auto a = bytes_of(generate_split(c, Split::test, 10.0, 30, 1));
    const auto b = bytes_of(generate_split(c, Split::test, 10.0, 30, 4));
    CHECK(a == b);
    CHECK(a != bytes_of(generate_split(c, Split::val, 10.0, 30, 1)));
    auto c2 = c;
    c2.seed = 2;
    CHECK(a != bytes_of(generate_split(c2, Split::test, 10.0, 30, 1)));
}

TEST_CASE("fixed channel mode shares one channel", "[harness]")
{
    auto c = small_config();
    const Dataset d = generate_split(c, Split::train, 10.0, 10);
    for (const auto& r : d.records) CHECK(r.h == d.records.front().h);
    const Dataset v = generate_split(c, Split::test, 20.0, 3);
    CHECK(v.records.front().h == d.records.front().h);
    c.channel_mode = ChannelMode::block;
    const Dataset b = generate_split(c, Split::train, 10.0, 10);
    CHECK(b.records[0].h != b.records[1].h);
}

TEST_CASE("CSI sweep points share everything but the error", "[harness]")
{
    const auto c = small_config();
    const Dataset a = generate_split(c, Split::test, 15.0, 8, 1, 0.0);
    const Dataset b = generate_split(c, Split::test, 15.0, 8, 1, 0.01);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        CHECK(a.records[i].y == b.records[i].y);
        CHECK(a.records[i].bits == b.records[i].bits);
        CHECK(a.records[i].h_est == a.records[i].h);
        CHECK(b.records[i].h_est != b.records[i].h);
    }
    CHECK(sigma_c_to_variance(-std::numeric_limits<double>::infinity()) == 0.0);
    CHECK_THAT(sigma_c_to_variance(-20.0), WithinRel(0.01, 1e-12));
}

TEST_CASE("CSV golden headers", "[harness]")
{
    CHECK(eval_csv_header == "schema_version,detector,variant,snr_db,ber,aap_accuracy,frames,bit_errors,bits,wall_time_s");
    CHECK(sweep_csv_header ==
          "schema_version,detector,variant,sigma_c_db,csi_error_var,snr_db,ber,aap_accuracy,frames,bit_errors,bits,"
          "wall_time_s");
    CHECK(bench_csv_header == "schema_version,detector,variant,params,flops_per_frame,median_latency_s,trials");
    EvalRow r{"ml", "none", 10, 0.25, 1, 4, 8, 32, 0.5};
    CHECK(eval_csv({r}) == eval_csv_header + "\n1,ml,none,10,0.25,1,4,8,32,0.5\n");
}

TEST_CASE("eval rows are sorted by detector then SNR", "[harness]")
{
    std::vector<EvalRow> rows{{"somp", "none", 10}, {"ml", "none", 20}, {"ml", "none", 5}, {"imreconet", "complex", 5}};
    sort_rows(rows);
    CHECK(rows[0].detector == "imreconet");
    CHECK(rows[1].snr_db == 5);
    CHECK(rows[2].snr_db == 20);
    CHECK(rows[3].detector == "somp");
}

TEST_CASE("noiseless ML evaluation is error free", "[harness]")
{
    auto c = parse_config_string("snr_db = inf\n");
    const Dataset d = generate_split(c, Split::test, c.snr_db.front(), 50, 2);
    const auto row = evaluate_classical(d, c.table(), c.constellation(), detect::ClassicalMethod::ml, c.snr_db.front(), 2);
    CHECK(row.ber == 0.0);
    CHECK(row.aap_accuracy == 1.0);
    CHECK(row.frames == 50);
    CHECK(row.bits == 50 * phy::bits_per_frame(c.table(), c.constellation(), 16));
    CHECK(row.wall_time_s >= 0.0);
}

TEST_CASE("ML cost grows with the hypothesis count", "[harness]")
{
    const auto s1 = parse_config_string("");
    const auto s2 = parse_config_string("n_t = 16\nn_u = 4\n");
    const double ratio = static_cast<double>(ml_flops(s2.table(), s2.constellation(), 4, 16)) /
                         static_cast<double>(ml_flops(s1.table(), s1.constellation(), 4, 16));
    // hypotheses 1024 * 256 vs 4 * 4, and (N_u + 1) MACs per receive antenna
    CHECK_THAT(ratio, WithinRel(1024.0 * 256.0 / 16.0 * 5.0 / 2.0, 1e-12));
    CHECK(somp_flops(4, 1, 4, 16) > 0);
}

TEST_CASE("bench reports halving and nonnegative latency", "[harness]")
{
    auto c = small_config();
    const auto complex_run = bench(c);
    c.variant = net::Variant::real;
    const auto real_run = bench(c);
    REQUIRE(complex_run.rows.size() == 3);
    for (const auto& r : complex_run.rows) {
        CHECK(r.median_latency_s >= 0.0);
        CHECK(r.trials >= 30);
        CHECK(r.flops > 0);
    }
    CHECK(2 * complex_run.rows[2].params == real_run.rows[2].params);
    CHECK(complex_run.warnings.empty());
}

TEST_CASE("checkpoint lookup", "[harness]")
{
    CHECK(checkpoint_name("aapd", net::Variant::complex, 10.0) == "aapd_complex_snr10.cvnn");
    CHECK(checkpoint_name("se", net::Variant::real, std::nullopt) == "se_real_mixed.cvnn");
    TempDir tmp("ckpt");
    CHECK_THROWS_AS(load_pair(tmp.path, net::Variant::complex, 10.0), ConfigError);
    auto a = net::build_aapd(4, 4, 4, net::Variant::complex, {2, 2, 4, 4}, 1);
    auto s = net::build_se(2, 4, net::Variant::complex, {2}, 2);
    cvnn::save_checkpoint(tmp.path / checkpoint_name("aapd", net::Variant::complex, std::nullopt), a);
    cvnn::save_checkpoint(tmp.path / checkpoint_name("se", net::Variant::complex, std::nullopt), s);
    const auto pair = load_pair(tmp.path, net::Variant::complex, 10.0);
    CHECK(pair.aapd.count_params() == a.count_params());
}

TEST_CASE("train, eval and sweep on disk", "[harness]")
{
    TempDir tmp("flow");
    auto c = small_config();
    c.train.max_epochs = 2;
    c.sweep_frames = 10;
    c.sweep_snr_db = 10;
    c.sweep_sigma_c_db = {-std::numeric_limits<double>::infinity(), -10};
    const auto files = generate_all(c, tmp.path / "data", 2);
    CHECK(files.size() == 3);
    CHECK(load_dataset(files[0], c.table()).records.size() == 24);

    std::size_t records = 0;
    const auto out = train_all(c, tmp.path / "data", tmp.path / "ck", [&](const nlohmann::json&) { ++records; });
    REQUIRE(out.size() == 1);
    CHECK(records > 0);
    CHECK(std::filesystem::exists(tmp.path / "ck" / "aapd_complex_snr10.cvnn"));

    const auto rows = evaluate_all(c, tmp.path / "data", tmp.path / "ck", 2);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].detector == "imreconet");
    for (const auto& r : rows) CHECK(r.frames == 8);

    const auto sweep = sweep_csi_error(c, tmp.path / "ck", 2);
    CHECK(sweep.size() == 6);
    write_results(tmp.path / "res", "sweep", sweep_csv(sweep), nlohmann::json::array());
    CHECK(std::filesystem::exists(tmp.path / "res" / "sweep.csv"));

    auto wrong = c;
    wrong.m = 4;
    CHECK_THROWS_AS(evaluate_all(wrong, tmp.path / "data", tmp.path / "ck", 1), ConfigError);
}
