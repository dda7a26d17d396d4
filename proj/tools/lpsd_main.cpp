// lpsd: sparse seismic deconvolution pipeline.
// Subcommands: generate, train, eval, baseline, deconvolve, plot.
// Exit codes: 0 ok, 2 usage/config, 3 data/format, 4 numeric failure.

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lpsd/errors.hpp"
#include "lpsd/io.hpp"
#include "lpsd/kernels.hpp"
#include "lpsd/metrics.hpp"
#include "lpsd/model.hpp"
#include "lpsd/plot.hpp"
#include "lpsd/postproc.hpp"
#include "lpsd/solvers.hpp"
#include "lpsd/synthetic.hpp"

namespace {

using namespace lpsd;

struct WaveletFlags {
    double freq = 40.0;
    double dt = 0.002;
    std::int64_t half_width = 25;

    void attach(CLI::App* cmd) {
        cmd->add_option("--freq", freq, "Ricker peak frequency [Hz]")
            ->capture_default_str();
        cmd->add_option("--dt", dt, "sampling interval [s]")
            ->capture_default_str();
        cmd->add_option("--half-width", half_width,
                        "wavelet half width [samples]")
            ->capture_default_str();
    }

    ConvOperator build(std::int64_t n) const {
        return ConvOperator(make_ricker(freq, dt, half_width), n);
    }
};

std::optional<double> parse_snr(const std::string& s) {
    if (s == "noiseless") return std::nullopt;
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size())
        throw CLI::ValidationError("--snr", "expected a dB value or 'noiseless'");
    return v;
}

io::CsvTable metrics_table(const metrics::MetricsReport& rep) {
    io::CsvTable t;
    t.header = {"record", "mse", "correlation", "quality_db"};
    for (const auto& row : rep.rows)
        t.rows.push_back({std::to_string(row.record),
                          io::format_double(row.mse),
                          io::format_double(row.correlation),
                          io::format_double(row.quality_db)});
    t.rows.push_back({"aggregate", io::format_double(rep.mse),
                      io::format_double(rep.correlation),
                      io::format_double(rep.quality_db)});
    return t;
}

void write_series(const std::string& path, const Dataset& data,
                  const std::vector<Grid>& estimates, std::int64_t record) {
    if (record < 0 || record >= data.size())
        throw ConfigError("--series-record out of range");
    const Grid& x = data.records[static_cast<std::size_t>(record)].x;
    const Grid& xh = estimates[static_cast<std::size_t>(record)];
    io::CsvTable t;
    t.header = {"record", "t", "x_true", "x_hat", "residual"};
    for (std::int64_t i = 0; i < x.n; ++i)
        t.rows.push_back({std::to_string(record), std::to_string(i),
                          io::format_double(x.at(i, 0)),
                          io::format_double(xh.at(i, 0)),
                          io::format_double(xh.at(i, 0) - x.at(i, 0))});
    io::write_csv(t, path);
}

int run_generate(std::int64_t n, std::int64_t m, std::int64_t count,
                 const std::string& snr, std::int64_t smin, std::int64_t smax,
                 double amp_lo, double amp_hi, std::int64_t min_gap,
                 std::int64_t lateral, const WaveletFlags& wf,
                 std::uint64_t seed, const std::string& out) {
    ReflectivitySpec spec;
    spec.n = n;
    spec.m = m;
    spec.min_spikes = smin;
    spec.max_spikes = smax;
    spec.amp_lo = amp_lo;
    spec.amp_hi = amp_hi;
    spec.min_gap = min_gap;
    spec.lateral_coherence = lateral;
    spec.seed = seed;

    NoiseSpec noise;
    noise.snr_db = parse_snr(snr);
    noise.seed = seed + 1;

    const ConvOperator op = wf.build(n);
    const Dataset ds = make_dataset(spec, noise, count, op);
    io::save_dataset(ds, out);
    std::cout << "wrote " << count << " records (" << n << "x" << m << ", "
              << (noise.snr_db ? std::to_string(*noise.snr_db) + " dB"
                               : std::string("noiseless"))
              << ") to " << out << "\n";
    return 0;
}

int run_train(const std::string& data_path, std::int64_t k, std::int64_t kappa,
              int dims, std::int64_t hidden, std::int64_t epochs, double lr,
              std::int64_t batch, double eta_init, const WaveletFlags& wf,
              std::uint64_t seed, const std::string& out,
              std::string history_path) {
    const Dataset data = io::load_dataset(data_path);
    if (data.empty()) throw ConfigError("train: dataset is empty");
    if (dims == 1 && data.m() != 1)
        throw ConfigError("train: 1D model but dataset records are " +
                          std::to_string(data.n()) + "x" +
                          std::to_string(data.m()) +
                          "; use --dims 2 or single-trace data");

    model::ModelConfig cfg;
    cfg.dims = dims;
    cfg.kappa = kappa;
    cfg.hidden = hidden;
    cfg.unroll = k;
    cfg.eta_raw_init = eta_init;
    auto net = model::UnrolledModel::create(cfg, seed);

    model::TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch;
    tc.lr = lr;
    tc.seed = seed;

    const ConvOperator op = wf.build(data.n());
    if (history_path.empty()) history_path = out + ".history.csv";

    std::cout << "training: " << data.size() << " records, K=" << k
              << ", kappa=" << kappa << ", dims=" << dims
              << ", kernels=" << kernels::variant_name(kernels::active_variant())
              << "\n";
    const model::TrainHistory hist = train(net, data, op, tc, &std::cout);

    io::CsvTable t;
    t.header = {"epoch", "loss", "step_size"};
    for (const auto& e : hist.epochs)
        t.rows.push_back({std::to_string(e.epoch), io::format_double(e.loss),
                          io::format_double(e.step_size)});
    io::write_csv(t, history_path);
    io::save_model(net, out);
    std::cout << "saved checkpoint to " << out << ", history to "
              << history_path << "\n";
    return 0;
}

int run_eval(const std::string& data_path, const std::string& model_path,
             const WaveletFlags& wf, const std::string& out,
             const std::string& series, std::int64_t series_record) {
    const Dataset data = io::load_dataset(data_path);
    if (data.empty()) throw ConfigError("eval: dataset is empty");
    auto loaded = io::load_model(model_path);
    if (loaded.model.config().dims == 1 && data.m() != 1)
        throw ConfigError("eval: 1D checkpoint cannot score " +
                          std::to_string(data.n()) + "x" +
                          std::to_string(data.m()) + " records");

    const ConvOperator op = wf.build(data.n());
    const metrics::MetricsReport rep = evaluate(loaded.model, data, op);
    io::write_csv(metrics_table(rep), out);
    std::cout << "aggregate: mse=" << rep.mse << " correlation="
              << rep.correlation << " quality_db=" << rep.quality_db << "\n";

    if (!series.empty()) {
        std::vector<Grid> estimates;
        for (const auto& rec : data.records)
            estimates.push_back(
                denormalize(loaded.model.infer(rec.y, op), rec.mag));
        write_series(series, data, estimates, series_record);
    }
    return 0;
}

int run_baseline(const std::string& data_path, const std::string& method,
                 double gamma, std::int64_t iters, std::optional<double> eta,
                 double tol, const WaveletFlags& wf, const std::string& out,
                 const std::string& series, std::int64_t series_record) {
    const Dataset data = io::load_dataset(data_path);
    if (data.empty()) throw ConfigError("baseline: dataset is empty");

    solvers::SolverConfig cfg;
    if (method == "ista")
        cfg.method = solvers::Method::ista;
    else if (method == "fista")
        cfg.method = solvers::Method::fista;
    else if (method == "gd_l2")
        cfg.method = solvers::Method::gd_l2;
    else
        throw ConfigError("baseline: unknown solver '" + method + "'");
    cfg.gamma = gamma;
    cfg.eta = eta;
    cfg.max_iters = iters;
    cfg.tol = tol;

    const ConvOperator op = wf.build(data.n());
    std::vector<metrics::RecordMetrics> rows;
    std::vector<Grid> estimates;
    for (std::size_t r = 0; r < data.records.size(); ++r) {
        const auto& rec = data.records[r];
        const solvers::SolveReport rep = solvers::solve(rec.y, op, cfg);
        Grid x_hat = denormalize(rep.x_hat, rec.mag);
        metrics::RecordMetrics row;
        row.record = static_cast<std::int64_t>(r);
        row.mse = metrics::mse(x_hat, rec.x);
        row.correlation = metrics::correlation(x_hat, rec.x);
        row.quality_db = metrics::quality_db(x_hat, rec.x);
        rows.push_back(row);
        estimates.push_back(std::move(x_hat));
    }
    const metrics::MetricsReport rep = metrics::aggregate(std::move(rows));
    io::write_csv(metrics_table(rep), out);
    std::cout << method << " gamma=" << gamma << ": mse=" << rep.mse
              << " correlation=" << rep.correlation << " quality_db="
              << rep.quality_db << "\n";
    if (!series.empty()) write_series(series, data, estimates, series_record);
    return 0;
}

int run_deconvolve(const std::string& traces_path,
                   const std::string& model_path, std::int64_t patch_n,
                   std::int64_t patch_m, std::int64_t agc_window, bool no_agc,
                   const WaveletFlags& wf, const std::string& out) {
    const Dataset data = io::load_dataset(traces_path);
    if (data.empty()) throw ConfigError("deconvolve: dataset is empty");
    auto loaded = io::load_model(model_path);

    Dataset result;
    for (const auto& rec : data.records) {
        const std::int64_t pn = patch_n > 0 ? std::min(patch_n, rec.y.n) : rec.y.n;
        const std::int64_t pm = patch_m > 0 ? std::min(patch_m, rec.y.m) : rec.y.m;
        const ConvOperator op = wf.build(pn);

        Tiling tiling = mute_and_pad(rec.y, pn, pm);
        for (Grid& patch : tiling.patches) {
            const double mag =
                kernels::max_abs(patch.v.data(), patch.size());
            if (mag == 0.0) continue; // fully muted patch stays zero
            Grid norm = patch;
            kernels::scale(1.0 / mag, norm.v.data(), norm.size());
            patch = denormalize(loaded.model.infer(norm, op), mag);
        }
        Grid x_hat = reassemble(tiling);
        if (!no_agc) {
            AgcConfig agc_cfg;
            agc_cfg.window = std::min<std::int64_t>(
                agc_window | 1, x_hat.n % 2 == 0 ? x_hat.n - 1 : x_hat.n);
            x_hat = agc(x_hat, agc_cfg);
        }
        DatasetRecord out_rec;
        out_rec.x = std::move(x_hat);
        out_rec.y = rec.y;
        out_rec.mag = 1.0;
        out_rec.snr_db = rec.snr_db;
        result.records.push_back(std::move(out_rec));
    }
    io::save_dataset(result, out);
    std::cout << "deconvolved " << result.size() << " record(s) to " << out
              << (no_agc ? "" : " (AGC applied)") << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"lpsd: sparse seismic deconvolution toolkit"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "synthesize a paired dataset");
    std::int64_t g_n = 352, g_m = 1, g_count = 0, g_smin = 3, g_smax = 40;
    std::int64_t g_gap = 3, g_lateral = 3;
    double g_amp_lo = 0.1, g_amp_hi = 1.0;
    std::string g_snr = "noiseless", g_out;
    std::uint64_t g_seed = 0;
    WaveletFlags g_wf;
    gen->add_option("--n", g_n, "time samples per trace")->capture_default_str();
    gen->add_option("--m", g_m, "traces per record")->capture_default_str();
    gen->add_option("--count", g_count, "number of records")->required();
    gen->add_option("--snr", g_snr, "SNR in dB, or 'noiseless'")
        ->capture_default_str();
    gen->add_option("--sparsity-min", g_smin, "min spikes per trace")
        ->capture_default_str();
    gen->add_option("--sparsity-max", g_smax, "max spikes per trace")
        ->capture_default_str();
    gen->add_option("--amp-lo", g_amp_lo, "min |amplitude|")->capture_default_str();
    gen->add_option("--amp-hi", g_amp_hi, "max |amplitude|")->capture_default_str();
    gen->add_option("--min-gap", g_gap, "min samples between spikes")
        ->capture_default_str();
    gen->add_option("--lateral-coherence", g_lateral,
                    "2D: spike jitter between adjacent traces")
        ->capture_default_str();
    gen->add_option("--seed", g_seed, "RNG seed")->capture_default_str();
    gen->add_option("--out", g_out, "output dataset file")->required();
    g_wf.attach(gen);

    // train
    auto* tr = app.add_subcommand("train", "train the unrolled network");
    std::string t_data, t_out, t_history;
    std::int64_t t_k = 5, t_kappa = 5, t_hidden = 64, t_epochs = 50, t_batch = 32;
    int t_dims = 1;
    double t_lr = 1e-3, t_eta_init = 0.0;
    std::uint64_t t_seed = 0;
    WaveletFlags t_wf;
    tr->add_option("--data", t_data, "training dataset")->required();
    tr->add_option("--k", t_k, "unroll count K")->capture_default_str();
    tr->add_option("--kappa", t_kappa, "conv kernel size")
        ->check(CLI::IsMember({5, 7}))
        ->capture_default_str();
    tr->add_option("--dims", t_dims, "1: per-trace, 2: multi-trace blocks")
        ->check(CLI::IsMember({1, 2}))
        ->capture_default_str();
    tr->add_option("--hidden", t_hidden, "hidden channels")->capture_default_str();
    tr->add_option("--epochs", t_epochs, "training epochs")->capture_default_str();
    tr->add_option("--lr", t_lr, "Adam learning rate")->capture_default_str();
    tr->add_option("--batch", t_batch, "batch size")->capture_default_str();
    tr->add_option("--eta-init", t_eta_init, "initial raw step parameter")
        ->capture_default_str();
    tr->add_option("--seed", t_seed, "RNG seed")->capture_default_str();
    tr->add_option("--out", t_out, "checkpoint path")->required();
    tr->add_option("--history", t_history,
                   "per-epoch CSV (default: <out>.history.csv)");
    t_wf.attach(tr);

    // eval
    auto* ev = app.add_subcommand("eval", "score a checkpoint on a dataset");
    std::string e_data, e_model, e_out, e_series;
    std::int64_t e_series_record = 0;
    WaveletFlags e_wf;
    ev->add_option("--data", e_data, "evaluation dataset")->required();
    ev->add_option("--model", e_model, "checkpoint")->required();
    ev->add_option("--out", e_out, "report CSV")->required();
    ev->add_option("--series", e_series, "dump one record's traces to CSV");
    ev->add_option("--series-record", e_series_record, "record index for --series")
        ->capture_default_str();
    e_wf.attach(ev);

    // baseline
    auto* bl = app.add_subcommand("baseline", "run a classical solver");
    std::string b_data, b_method = "ista", b_out, b_series;
    double b_gamma = 0.0, b_tol = 1e-8;
    std::int64_t b_iters = 1000, b_series_record = 0;
    double b_eta_raw = 0.0;
    WaveletFlags b_wf;
    bl->add_option("--data", b_data, "dataset")->required();
    bl->add_option("--solver", b_method, "ista | fista | gd_l2")
        ->check(CLI::IsMember({"ista", "fista", "gd_l2"}))
        ->capture_default_str();
    bl->add_option("--gamma", b_gamma, "regularization weight")->required();
    bl->add_option("--iters", b_iters, "max iterations")->capture_default_str();
    auto* eta_opt =
        bl->add_option("--eta", b_eta_raw, "step size (default 0.9/L)");
    bl->add_option("--tol", b_tol, "relative-change stop")->capture_default_str();
    bl->add_option("--out", b_out, "report CSV")->required();
    bl->add_option("--series", b_series, "dump one record's traces to CSV");
    bl->add_option("--series-record", b_series_record, "record index for --series")
        ->capture_default_str();
    b_wf.attach(bl);

    // deconvolve
    auto* dc = app.add_subcommand("deconvolve",
                                  "tile, infer and reassemble trace grids");
    std::string d_traces, d_model, d_out;
    std::int64_t d_patch_n = 352, d_patch_m = 352, d_agc_window = 101;
    bool d_no_agc = false;
    WaveletFlags d_wf;
    dc->add_option("--traces", d_traces, "input dataset (y grids are used)")
        ->required();
    dc->add_option("--model", d_model, "checkpoint")->required();
    dc->add_option("--patch-n", d_patch_n, "patch time samples (0: whole grid)")
        ->capture_default_str();
    dc->add_option("--patch-m", d_patch_m, "patch traces (0: whole grid)")
        ->capture_default_str();
    dc->add_option("--agc-window", d_agc_window, "AGC RMS window [samples]")
        ->capture_default_str();
    dc->add_flag("--no-agc", d_no_agc, "skip automatic gain control");
    dc->add_option("--out", d_out, "output dataset (x holds reconstruction)")
        ->required();
    d_wf.attach(dc);

    // plot
    auto* pl = app.add_subcommand("plot", "render a report CSV to SVG or CSV");
    std::string p_report, p_out;
    pl->add_option("--report", p_report, "input CSV")->required();
    pl->add_option("--out", p_out, "output .svg or .csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (gen->parsed())
            return run_generate(g_n, g_m, g_count, g_snr, g_smin, g_smax,
                                g_amp_lo, g_amp_hi, g_gap, g_lateral, g_wf,
                                g_seed, g_out);
        if (tr->parsed())
            return run_train(t_data, t_k, t_kappa, t_dims, t_hidden, t_epochs,
                             t_lr, t_batch, t_eta_init, t_wf, t_seed, t_out,
                             t_history);
        if (ev->parsed())
            return run_eval(e_data, e_model, e_wf, e_out, e_series,
                            e_series_record);
        if (bl->parsed())
            return run_baseline(b_data, b_method, b_gamma, b_iters,
                                eta_opt->count() ? std::optional<double>(b_eta_raw)
                                                 : std::nullopt,
                                b_tol, b_wf, b_out, b_series, b_series_record);
        if (dc->parsed())
            return run_deconvolve(d_traces, d_model, d_patch_n, d_patch_m,
                                  d_agc_window, d_no_agc, d_wf, d_out);
        if (pl->parsed()) {
            lpsd::plot::render(p_report, p_out);
            return 0;
        }
    } catch (const lpsd::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const lpsd::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 4;
    } catch (const lpsd::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
