#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>
#include <vector>

#include "lpsd/forward_model.hpp"
#include "lpsd/io.hpp"
#include "lpsd/model.hpp"
#include "lpsd/synthetic.hpp"

// Drives the installed binary end to end. The path comes from the LPSD_BIN
// environment variable (set by ctest).

using namespace lpsd;

namespace {

std::string binary() {
    const char* p = std::getenv("LPSD_BIN");
    REQUIRE_MESSAGE(p != nullptr, "LPSD_BIN must point at the lpsd binary");
    return p;
}

struct TempDir {
    std::filesystem::path dir;
    TempDir() {
        dir = std::filesystem::temp_directory_path() /
              ("lpsd_cli_test_" + std::to_string(::getpid()));
        std::filesystem::create_directories(dir);
    }
    ~TempDir() { std::filesystem::remove_all(dir); }
    std::string path(const std::string& name) const {
        return (dir / name).string();
    }
};

int run(const std::string& args) {
    const std::string cmd = binary() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::vector<char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string slurp_text(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Last row of a report CSV is the aggregate.
std::vector<std::string> aggregate_row(const std::string& path) {
    const io::CsvTable t = io::read_csv(path);
    REQUIRE(!t.rows.empty());
    REQUIRE(t.rows.back().at(0) == "aggregate");
    return t.rows.back();
}

} // namespace

TEST_CASE("generate is deterministic and loadable") {
    TempDir tmp;
    const std::string a = tmp.path("a.lpsd");
    const std::string b = tmp.path("b.lpsd");
    const std::string flags =
        "generate --n 48 --m 1 --count 6 --snr 20 --sparsity-min 2 "
        "--sparsity-max 5 --min-gap 2 --half-width 8 --seed 3 --out ";
    CHECK(run(flags + a) == 0);
    CHECK(run(flags + b) == 0);
    CHECK(slurp(a) == slurp(b));

    const Dataset ds = io::load_dataset(a);
    CHECK(ds.size() == 6);
    CHECK(ds.n() == 48);
}

TEST_CASE("eval with a passthrough checkpoint scores a crafted dataset as exact") {
    TempDir tmp;
    // K = 0 checkpoint: the network forwards y unchanged.
    model::ModelConfig cfg;
    cfg.dims = 1;
    cfg.hidden = 4;
    cfg.unroll = 0;
    auto identity = model::UnrolledModel::create(cfg, 1);
    const std::string ckpt = tmp.path("identity.lpck");
    io::save_model(identity, ckpt);

    // Records with x == y and mag == 1.
    Dataset ds;
    for (int r = 0; r < 3; ++r) {
        DatasetRecord rec;
        rec.x = Grid(32, 1);
        rec.x.at(6 + 2 * r, 0) = 0.5;
        rec.x.at(20, 0) = -0.25;
        rec.y = rec.x;
        rec.mag = 1.0;
        ds.records.push_back(std::move(rec));
    }
    const std::string data = tmp.path("fixture.lpsd");
    io::save_dataset(ds, data);

    const std::string report = tmp.path("report.csv");
    CHECK(run("eval --data " + data + " --model " + ckpt + " --out " + report) ==
          0);
    const auto agg = aggregate_row(report);
    CHECK(std::stod(agg.at(1)) == 0.0); // mse column
    CHECK(std::stod(agg.at(2)) == doctest::Approx(1.0));
}

TEST_CASE("baseline ista reaches good quality on a noiseless fixture") {
    TempDir tmp;
    const std::string data = tmp.path("clean.lpsd");
    CHECK(run("generate --n 96 --count 5 --snr noiseless --sparsity-min 2 "
              "--sparsity-max 4 --min-gap 8 --half-width 10 --seed 7 --out " +
              data) == 0);
    const std::string report = tmp.path("ista.csv");
    CHECK(run("baseline --data " + data +
              " --solver ista --gamma 0.002 --iters 4000 --half-width 10 --out " +
              report) == 0);
    const auto agg = aggregate_row(report);
    CHECK(std::stod(agg.at(3)) > 10.0); // quality_db column
}

TEST_CASE("train, eval and plot chain together") {
    TempDir tmp;
    const std::string data = tmp.path("train.lpsd");
    CHECK(run("generate --n 32 --count 12 --snr noiseless --sparsity-min 2 "
              "--sparsity-max 4 --min-gap 2 --half-width 6 --seed 11 --out " +
              data) == 0);

    const std::string ckpt = tmp.path("model.lpck");
    const std::string hist = tmp.path("hist.csv");
    CHECK(run("train --data " + data +
              " --k 2 --kappa 5 --dims 1 --hidden 8 --epochs 2 --batch 4 "
              "--half-width 6 --seed 2 --history " +
              hist + " --out " + ckpt) == 0);
    const io::CsvTable h = io::read_csv(hist);
    CHECK(h.header == std::vector<std::string>{"epoch", "loss", "step_size"});
    CHECK(h.rows.size() == 2);

    const std::string report = tmp.path("report.csv");
    const std::string series = tmp.path("series.csv");
    CHECK(run("eval --data " + data + " --model " + ckpt + " --half-width 6 --out " +
              report + " --series " + series) == 0);

    const std::string svg = tmp.path("plot.svg");
    CHECK(run("plot --report " + series + " --out " + svg) == 0);
    const std::string content = slurp_text(svg);
    CHECK(content.find("<svg") != std::string::npos);
    CHECK(content.find("polyline") != std::string::npos);

    const std::string metrics_svg = tmp.path("hist.svg");
    CHECK(run("plot --report " + hist + " --out " + metrics_svg) == 0);
    CHECK(slurp_text(metrics_svg).find("<svg") != std::string::npos);
}

TEST_CASE("deconvolve tiles, infers and reassembles") {
    TempDir tmp;
    const std::string data = tmp.path("field.lpsd");
    CHECK(run("generate --n 40 --m 20 --count 1 --snr 15 --sparsity-min 2 "
              "--sparsity-max 4 --min-gap 3 --half-width 6 --seed 5 --out " +
              data) == 0);

    model::ModelConfig cfg;
    cfg.dims = 2;
    cfg.hidden = 4;
    cfg.unroll = 1;
    auto net = model::UnrolledModel::create(cfg, 9);
    const std::string ckpt = tmp.path("m2d.lpck");
    io::save_model(net, ckpt);

    const std::string out = tmp.path("recon.lpsd");
    CHECK(run("deconvolve --traces " + data + " --model " + ckpt +
              " --patch-n 40 --patch-m 8 --agc-window 9 --half-width 6 --out " +
              out) == 0);
    const Dataset rec = io::load_dataset(out);
    REQUIRE(rec.size() == 1);
    CHECK(rec.records[0].x.n == 40);
    CHECK(rec.records[0].x.m == 20);

    // Without AGC as well.
    const std::string out2 = tmp.path("recon_raw.lpsd");
    CHECK(run("deconvolve --traces " + data + " --model " + ckpt +
              " --patch-n 40 --patch-m 8 --no-agc --half-width 6 --out " + out2) ==
          0);
}

TEST_CASE("exit codes distinguish usage, data and config failures") {
    TempDir tmp;
    CHECK(run("bogus-subcommand") == 2);
    CHECK(run("generate --count 1") == 2); // missing --out
    CHECK(run("eval --data /nonexistent.lpsd --model /nonexistent.lpck --out " +
              tmp.path("r.csv")) == 3);

    // 1D checkpoint against 2D records: config error before compute.
    const std::string data2d = tmp.path("d2.lpsd");
    CHECK(run("generate --n 24 --m 4 --count 2 --sparsity-min 2 --sparsity-max 3 "
              "--min-gap 2 --half-width 5 --seed 1 --out " +
              data2d) == 0);
    model::ModelConfig cfg;
    cfg.dims = 1;
    cfg.hidden = 4;
    cfg.unroll = 1;
    auto net = model::UnrolledModel::create(cfg, 2);
    const std::string ckpt = tmp.path("m1d.lpck");
    io::save_model(net, ckpt);
    CHECK(run("eval --data " + data2d + " --model " + ckpt + " --out " +
              tmp.path("r2.csv")) == 2);
}
