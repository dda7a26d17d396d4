#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "lpsd/errors.hpp"
#include "lpsd/io.hpp"
#include "lpsd/model.hpp"
#include "lpsd/postproc.hpp"
#include "lpsd/rng.hpp"
#include "test_util.hpp"

using namespace lpsd;

namespace {

struct TempDir {
    std::filesystem::path dir;
    TempDir() {
        dir = std::filesystem::temp_directory_path() /
              ("lpsd_io_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(dir);
    }
    ~TempDir() { std::filesystem::remove_all(dir); }
    std::string path(const std::string& name) const {
        return (dir / name).string();
    }
};

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Dataset sample_dataset(std::int64_t n, std::int64_t m, std::int64_t count) {
    ReflectivitySpec spec;
    spec.n = n;
    spec.m = m;
    spec.min_spikes = 2;
    spec.max_spikes = 5;
    spec.min_gap = 2;
    spec.lateral_coherence = 1;
    spec.seed = 77;
    const ConvOperator op(make_ricker(40.0, 0.002, 6), n);
    return make_dataset(spec, NoiseSpec::at(22.0, 5), count, op);
}

} // namespace

TEST_CASE("dataset files round-trip byte-exactly") {
    TempDir tmp;
    const Dataset ds = sample_dataset(32, 3, 5);
    const std::string p1 = tmp.path("a.lpsd");
    const std::string p2 = tmp.path("b.lpsd");

    io::save_dataset(ds, p1);
    const Dataset loaded = io::load_dataset(p1);
    REQUIRE(loaded.size() == ds.size());
    CHECK(loaded.n() == 32);
    CHECK(loaded.m() == 3);
    for (std::int64_t i = 0; i < ds.size(); ++i) {
        const auto& a = ds.records[static_cast<std::size_t>(i)];
        const auto& b = loaded.records[static_cast<std::size_t>(i)];
        CHECK(b.mag == a.mag); // f64 header fields survive exactly
        REQUIRE(b.snr_db.has_value());
        CHECK(*b.snr_db == 22.0);
        for (std::size_t e = 0; e < a.x.size(); ++e) {
            CHECK(b.x.v[e] == static_cast<double>(static_cast<float>(a.x.v[e])));
            CHECK(b.y.v[e] == static_cast<double>(static_cast<float>(a.y.v[e])));
        }
    }

    io::save_dataset(loaded, p2);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("empty dataset files are valid") {
    TempDir tmp;
    const std::string p = tmp.path("empty.lpsd");
    io::save_dataset(Dataset{}, p);
    const Dataset loaded = io::load_dataset(p);
    CHECK(loaded.empty());
}

TEST_CASE("noiseless metadata survives as NaN") {
    TempDir tmp;
    ReflectivitySpec spec;
    spec.n = 24;
    spec.min_spikes = 2;
    spec.max_spikes = 4;
    spec.min_gap = 1;
    const ConvOperator op(make_ricker(40.0, 0.002, 5), 24);
    const Dataset ds = make_dataset(spec, NoiseSpec::noiseless(), 3, op);
    const std::string p = tmp.path("clean.lpsd");
    io::save_dataset(ds, p);
    const Dataset loaded = io::load_dataset(p);
    for (const auto& rec : loaded.records) CHECK_FALSE(rec.snr_db.has_value());
}

TEST_CASE("malformed dataset files are rejected with offsets") {
    TempDir tmp;
    const Dataset ds = sample_dataset(16, 1, 2);
    const std::string good = tmp.path("good.lpsd");
    io::save_dataset(ds, good);
    auto bytes = slurp(good);

    SUBCASE("truncated payload") {
        std::ofstream out(tmp.path("trunc.lpsd"), std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
        out.close();
        try {
            io::load_dataset(tmp.path("trunc.lpsd"));
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
        }
    }

    SUBCASE("bad magic") {
        bytes[0] = 'X';
        std::ofstream out(tmp.path("magic.lpsd"), std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        CHECK_THROWS_AS(io::load_dataset(tmp.path("magic.lpsd")), FormatError);
    }

    SUBCASE("unsupported version") {
        bytes[4] = 9;
        std::ofstream out(tmp.path("ver.lpsd"), std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        try {
            io::load_dataset(tmp.path("ver.lpsd"));
            FAIL("expected FormatError");
        } catch (const FormatError& e) {
            CHECK(std::string(e.what()).find("version") != std::string::npos);
        }
    }

    SUBCASE("trailing garbage") {
        bytes.push_back('\0');
        std::ofstream out(tmp.path("trail.lpsd"), std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        CHECK_THROWS_AS(io::load_dataset(tmp.path("trail.lpsd")), FormatError);
    }

    SUBCASE("missing file") {
        CHECK_THROWS_AS(io::load_dataset(tmp.path("nope.lpsd")), FormatError);
    }
}

TEST_CASE("checkpoints round-trip bit-identically") {
    TempDir tmp;
    model::ModelConfig cfg;
    cfg.dims = 1;
    cfg.kappa = 5;
    cfg.hidden = 8;
    cfg.unroll = 3;
    auto m = model::UnrolledModel::create(cfg, 123);
    m.eta_raw().data()[0] = 0.37;

    const std::string p1 = tmp.path("m.lpck");
    io::save_model(m, p1);
    auto loaded = io::load_model(p1);
    CHECK_FALSE(loaded.opt_state.has_value());
    CHECK(loaded.model.config().kappa == 5);
    CHECK(loaded.model.eta_raw().values()[0] == 0.37);

    // Forward after the round trip is bit-identical.
    const std::int64_t n = 40;
    const ConvOperator op(make_ricker(40.0, 0.002, 8), n);
    rng::Stream rs(9);
    Grid y(n, 1);
    for (auto& v : y.v) v = rs.normal();
    const Grid a = m.infer(y, op);
    const Grid b = loaded.model.infer(y, op);
    CHECK(a.v == b.v);

    // Second save produces identical bytes.
    const std::string p2 = tmp.path("m2.lpck");
    io::save_model(loaded.model, p2);
    CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("checkpoints carry optimizer state when asked") {
    TempDir tmp;
    model::ModelConfig cfg;
    cfg.dims = 1;
    cfg.kappa = 5;
    cfg.hidden = 4;
    cfg.unroll = 1;
    auto m = model::UnrolledModel::create(cfg, 5);

    io::OptimizerState st;
    st.step_count = 42;
    rng::Stream rs(11);
    for (const auto& [name, t] : m.named_parameters()) {
        (void)name;
        std::vector<double> mom(static_cast<std::size_t>(t.numel()));
        for (auto& v : mom) v = rs.normal();
        st.first_moments.push_back(mom);
        for (auto& v : mom) v = std::fabs(rs.normal());
        st.second_moments.push_back(mom);
    }

    const std::string p = tmp.path("opt.lpck");
    io::save_model(m, p, &st);
    auto loaded = io::load_model(p);
    REQUIRE(loaded.opt_state.has_value());
    CHECK(loaded.opt_state->step_count == 42);
    CHECK(loaded.opt_state->first_moments == st.first_moments);
    CHECK(loaded.opt_state->second_moments == st.second_moments);
}

TEST_CASE("checkpoint config conflicts raise config errors") {
    TempDir tmp;
    model::ModelConfig cfg;
    cfg.dims = 1;
    cfg.kappa = 5;
    cfg.hidden = 4;
    cfg.unroll = 2;
    auto m = model::UnrolledModel::create(cfg, 5);
    const std::string p = tmp.path("m.lpck");
    io::save_model(m, p);

    model::ModelConfig want = cfg;
    want.kappa = 7;
    CHECK_THROWS_AS(io::load_model(p, want), ConfigError);
    want = cfg;
    CHECK_NOTHROW(io::load_model(p, want));
}

TEST_CASE("unknown checkpoint version is rejected") {
    TempDir tmp;
    model::ModelConfig cfg;
    cfg.hidden = 4;
    cfg.unroll = 1;
    auto m = model::UnrolledModel::create(cfg, 5);
    const std::string p = tmp.path("m.lpck");
    io::save_model(m, p);
    auto bytes = slurp(p);
    bytes[4] = 77;
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    try {
        io::load_model(p);
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
}

TEST_CASE("agc flattens amplitude") {
    SUBCASE("constant trace maps to about one") {
        Grid x(64, 1);
        for (auto& v : x.v) v = 3.0;
        AgcConfig cfg;
        cfg.window = 11;
        cfg.epsilon = 1e-12;
        const Grid out = agc(x, cfg);
        for (std::int64_t i = 0; i < 64; ++i)
            CHECK(out.at(i, 0) == doctest::Approx(1.0).epsilon(1e-9));
    }

    SUBCASE("zero trace stays zero") {
        const Grid out = agc(Grid(32, 2), AgcConfig{11, 1e-8});
        for (double v : out.v) CHECK(v == 0.0);
    }

    SUBCASE("matches the naive sliding-window oracle") {
        rng::Stream rs(13);
        const Grid x = testutil::random_grid(48, 2, rs);
        AgcConfig cfg;
        cfg.window = 11;
        const Grid out = agc(x, cfg);
        for (std::int64_t j = 0; j < 2; ++j)
            for (std::int64_t i = 0; i < 48; ++i) {
                double acc = 0.0;
                std::int64_t cnt = 0;
                for (std::int64_t k = i - 5; k <= i + 5; ++k) {
                    if (k < 0 || k >= 48) continue;
                    acc += x.at(k, j) * x.at(k, j);
                    ++cnt;
                }
                const double want =
                    x.at(i, j) /
                    (std::sqrt(acc / static_cast<double>(cnt)) + cfg.epsilon);
                CHECK(out.at(i, j) == doctest::Approx(want).epsilon(1e-12));
            }
    }

    SUBCASE("bad windows are rejected") {
        const Grid x(16, 1);
        CHECK_THROWS_AS(agc(x, AgcConfig{17, 1e-8}), std::invalid_argument);
        CHECK_THROWS_AS(agc(x, AgcConfig{4, 1e-8}), std::invalid_argument);
    }
}

TEST_CASE("tiling pads with zeros and reassembles losslessly") {
    rng::Stream rs(14);

    SUBCASE("grid equal to one patch is the identity") {
        const Grid g = testutil::random_grid(16, 8, rs);
        const Tiling t = mute_and_pad(g, 16, 8);
        REQUIRE(t.patches.size() == 1);
        CHECK(t.patches[0].v == g.v);
        CHECK(reassemble(t).v == g.v);
    }

    SUBCASE("wide grid splits into a padded second patch") {
        const Grid g = testutil::random_grid(16, 25, rs);
        const Tiling t = mute_and_pad(g, 16, 16);
        REQUIRE(t.patches.size() == 2);
        // Second patch: columns 16..24 real, 25..31 muted.
        for (std::int64_t j = 9; j < 16; ++j)
            for (std::int64_t i = 0; i < 16; ++i)
                CHECK(t.patches[1].at(i, j) == 0.0);
        CHECK(reassemble(t).v == g.v);
    }

    SUBCASE("both axes tile and round-trip") {
        const Grid g = testutil::random_grid(23, 11, rs);
        const Tiling t = mute_and_pad(g, 8, 4);
        CHECK(t.layout.tiles_n == 3);
        CHECK(t.layout.tiles_m == 3);
        CHECK(reassemble(t).v == g.v);
    }
}

TEST_CASE("csv round trip") {
    TempDir tmp;
    io::CsvTable t;
    t.header = {"record", "mse", "note"};
    t.rows = {{"0", "0.5", "ok"}, {"1", "inf", "degenerate"}};
    const std::string p = tmp.path("r.csv");
    io::write_csv(t, p);
    const io::CsvTable back = io::read_csv(p);
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);
}
