#include "lpsd/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <ostream>
#include <stdexcept>

#include "lpsd/errors.hpp"
#include "lpsd/kernels.hpp"
#include "lpsd/rng.hpp"

namespace lpsd::model {

namespace {

// (B, 1, n) from a set of single traces, or (1, 1, n, m) from one block.
nn::Tensor batch_from_traces(const std::vector<const Grid*>& grids) {
    const std::int64_t b = static_cast<std::int64_t>(grids.size());
    const std::int64_t n = grids[0]->n;
    nn::Tensor t = nn::Tensor::zeros(nn::Shape{b, 1, n});
    for (std::int64_t i = 0; i < b; ++i)
        std::memcpy(t.data() + i * n, grids[static_cast<std::size_t>(i)]->v.data(),
                    static_cast<std::size_t>(n) * sizeof(double));
    return t;
}

// Grid is trace-major (time fastest); rank-4 tensors are (B, C, time,
// trace) with trace fastest, so 2D batches transpose on the way in and out.
nn::Tensor batch_from_blocks(const std::vector<const Grid*>& grids) {
    const std::int64_t b = static_cast<std::int64_t>(grids.size());
    const std::int64_t n = grids[0]->n;
    const std::int64_t m = grids[0]->m;
    nn::Tensor t = nn::Tensor::zeros(nn::Shape{b, 1, n, m});
    for (std::int64_t r = 0; r < b; ++r) {
        const Grid& g = *grids[static_cast<std::size_t>(r)];
        double* dst = t.data() + r * n * m;
        for (std::int64_t j = 0; j < m; ++j)
            for (std::int64_t i = 0; i < n; ++i) dst[i * m + j] = g.at(i, j);
    }
    return t;
}

Grid block_to_grid(const double* src, std::int64_t n, std::int64_t m) {
    Grid g(n, m);
    for (std::int64_t j = 0; j < m; ++j)
        for (std::int64_t i = 0; i < n; ++i) g.at(i, j) = src[i * m + j];
    return g;
}

std::int64_t largest_divisor_at_most(std::int64_t value, std::int64_t cap) {
    for (std::int64_t g = std::min(cap, value); g > 1; --g)
        if (value % g == 0) return g;
    return 1;
}

} // namespace

void ModelConfig::validate() const {
    if (dims != 1 && dims != 2)
        throw std::invalid_argument("ModelConfig: dims must be 1 or 2");
    if (kappa < 1 || kappa % 2 == 0)
        throw std::invalid_argument("ModelConfig: kappa must be odd");
    if (hidden < 1)
        throw std::invalid_argument("ModelConfig: hidden must be >= 1");
    if (gn_groups < 1)
        throw std::invalid_argument("ModelConfig: gn_groups must be >= 1");
    if (unroll < 0)
        throw std::invalid_argument("ModelConfig: unroll must be >= 0");
}

std::int64_t ModelConfig::effective_groups() const {
    return largest_divisor_at_most(hidden, gn_groups);
}

ProxCNN ProxCNN::create(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    rng::Stream init(seed);
    ProxCNN net;
    net.cfg = cfg;
    const std::int64_t g = cfg.effective_groups();
    net.conv1 = nn::ConvLayer::create(cfg.dims, 2, cfg.hidden, cfg.kappa, init);
    net.gn1 = nn::GroupNormLayer::create(cfg.hidden, g, 1e-5, cfg.gn_affine);
    net.conv2 = nn::ConvLayer::create(cfg.dims, cfg.hidden, cfg.hidden, cfg.kappa, init);
    net.gn2 = nn::GroupNormLayer::create(cfg.hidden, g, 1e-5, cfg.gn_affine);
    net.conv3 = nn::ConvLayer::create(cfg.dims, cfg.hidden, cfg.hidden, cfg.kappa, init);
    net.gn3 = nn::GroupNormLayer::create(cfg.hidden, g, 1e-5, cfg.gn_affine);
    net.conv4 = nn::ConvLayer::create(cfg.dims, cfg.hidden, 1, cfg.kappa, init);
    net.gn4 = nn::GroupNormLayer::create(1, 1, 1e-5, cfg.gn_affine);
    net.conv5 = nn::ConvLayer::create(cfg.dims, 1, 1, 1, init);
    return net;
}

nn::Tensor ProxCNN::forward(const nn::Tensor& in) const {
    nn::Tensor z = nn::relu(nn::groupnorm_forward(gn1, nn::conv_forward(conv1, in)));
    z = nn::relu(nn::groupnorm_forward(gn2, nn::conv_forward(conv2, z)));
    z = nn::relu(nn::groupnorm_forward(gn3, nn::conv_forward(conv3, z)));
    z = nn::relu(nn::groupnorm_forward(gn4, nn::conv_forward(conv4, z)));
    return nn::conv_forward(conv5, z);
}

std::vector<std::pair<std::string, nn::Tensor>> ProxCNN::named_parameters() const {
    std::vector<std::pair<std::string, nn::Tensor>> out;
    auto conv = [&](const char* name, const nn::ConvLayer& l) {
        out.emplace_back(std::string(name) + ".weight", l.weight);
        out.emplace_back(std::string(name) + ".bias", l.bias);
    };
    auto gn = [&](const char* name, const nn::GroupNormLayer& l) {
        out.emplace_back(std::string(name) + ".scale", l.scale);
        out.emplace_back(std::string(name) + ".shift", l.shift);
    };
    conv("cnn.conv1", conv1);
    gn("cnn.gn1", gn1);
    conv("cnn.conv2", conv2);
    gn("cnn.gn2", gn2);
    conv("cnn.conv3", conv3);
    gn("cnn.gn3", gn3);
    conv("cnn.conv4", conv4);
    gn("cnn.gn4", gn4);
    conv("cnn.conv5", conv5);
    return out;
}

UnrolledModel UnrolledModel::create(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    UnrolledModel m;
    m.cfg_ = cfg;
    m.cnn_ = ProxCNN::create(cfg, seed);
    m.eta_raw_ = nn::Tensor::full(nn::Shape{1}, cfg.eta_raw_init, true);
    return m;
}

double UnrolledModel::step_size() const {
    return kStepCap / (1.0 + std::exp(-eta_raw_.values()[0]));
}

nn::Tensor UnrolledModel::step_size_tensor() const {
    return nn::scale(nn::sigmoid(eta_raw_), kStepCap);
}

nn::Tensor UnrolledModel::unroll_once(const nn::Tensor& x, const nn::Tensor& y,
                                      const nn::Tensor& s,
                                      const ConvOperator& op) const {
    nn::Tensor residual = nn::sub(y, nn::operator_apply(op, x));
    nn::Tensor grad_step =
        nn::add(x, nn::mul_scalar(s, nn::operator_apply_adjoint(op, residual)));
    return cnn_.forward(nn::concat_channels(grad_step, y));
}

nn::Tensor UnrolledModel::forward(const nn::Tensor& y,
                                  const ConvOperator& op) const {
    const nn::Shape& s = y.shape();
    const int want_rank = cfg_.dims == 1 ? 3 : 4;
    if (s.rank != want_rank || s[1] != 1)
        throw std::invalid_argument("UnrolledModel::forward: expected shape (B, 1, n" +
                                    std::string(cfg_.dims == 2 ? ", m)" : ")") +
                                    ", got " + s.str());
    nn::Tensor step = step_size_tensor();
    nn::Tensor x = y;
    for (std::int64_t k = 0; k < cfg_.unroll; ++k) {
        try {
            x = unroll_once(x, y, step, op);
        } catch (const NumericError& e) {
            throw NumericError("forward: unroll " + std::to_string(k) + ": " +
                               e.what());
        }
    }
    return x;
}

Grid UnrolledModel::infer(const Grid& y, const ConvOperator& op) const {
    nn::NoGradGuard no_grad;
    if (cfg_.dims == 1) {
        std::vector<const Grid*> traces;
        // Each column goes through the 1D net as a batch item.
        std::vector<Grid> cols;
        cols.reserve(static_cast<std::size_t>(y.m));
        for (std::int64_t j = 0; j < y.m; ++j) {
            Grid c(y.n, 1);
            std::memcpy(c.v.data(), y.trace(j),
                        static_cast<std::size_t>(y.n) * sizeof(double));
            cols.push_back(std::move(c));
        }
        for (const auto& c : cols) traces.push_back(&c);
        nn::Tensor out = forward(batch_from_traces(traces), op);
        Grid res(y.n, y.m);
        for (std::int64_t j = 0; j < y.m; ++j)
            std::memcpy(res.trace(j), out.data() + j * y.n,
                        static_cast<std::size_t>(y.n) * sizeof(double));
        return res;
    }
    std::vector<const Grid*> block{&y};
    nn::Tensor out = forward(batch_from_blocks(block), op);
    return block_to_grid(out.data(), y.n, y.m);
}

std::vector<std::pair<std::string, nn::Tensor>>
UnrolledModel::named_parameters() const {
    auto out = cnn_.named_parameters();
    out.emplace_back("eta_raw", eta_raw_);
    return out;
}

std::vector<nn::Tensor> UnrolledModel::parameters() const {
    std::vector<nn::Tensor> out;
    for (auto& [name, t] : named_parameters()) out.push_back(t);
    return out;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("TrainConfig: epochs must be >= 1");
    if (batch_size < 1)
        throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    if (lr <= 0.0) throw std::invalid_argument("TrainConfig: lr must be > 0");
}

namespace {

void fisher_yates(std::vector<std::int64_t>& idx, rng::Stream& s) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[static_cast<std::size_t>(
                                  s.below(static_cast<std::uint64_t>(i)))]);
}

void check_step_in_range(double step) {
    if (!(step > 0.0) || !(step < UnrolledModel::kStepCap))
        throw NumericError("train: bounded step size left (0, 0.15): s = " +
                           std::to_string(step));
}

} // namespace

TrainHistory train(UnrolledModel& model, const Dataset& data,
                   const ConvOperator& op, const TrainConfig& cfg,
                   std::ostream* log) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("train: empty dataset");
    if (model.config().unroll < 1)
        throw std::invalid_argument("train: model unroll count must be >= 1");
    const std::int64_t n = data.n();
    const std::int64_t m = data.m();
    if (op.n() != n) throw std::invalid_argument("train: operator n mismatch");
    if (model.config().dims == 1 && m != 1)
        throw std::invalid_argument("train: 1D model expects single-trace records");
    for (const auto& rec : data.records)
        if (rec.x.n != n || rec.x.m != m || !rec.y.same_shape(rec.x))
            throw std::invalid_argument("train: inconsistent record shapes");

    // Targets live in the normalized trace domain: x / mag.
    std::vector<Grid> targets;
    targets.reserve(data.records.size());
    for (const auto& rec : data.records) {
        Grid t = rec.x;
        kernels::scale(1.0 / rec.mag, t.v.data(), t.size());
        targets.push_back(std::move(t));
    }

    nn::Adam opt(model.parameters(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps);
    TrainHistory history;
    std::vector<std::int64_t> order(data.records.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = static_cast<std::int64_t>(i);

    for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng::Stream shuffle(rng::mix(cfg.seed, static_cast<std::uint64_t>(epoch)));
        fisher_yates(order, shuffle);

        double epoch_loss = 0.0;
        std::int64_t seen = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const Grid*> ys, xs;
            for (std::size_t i = start; i < stop; ++i) {
                ys.push_back(&data.records[static_cast<std::size_t>(order[i])].y);
                xs.push_back(&targets[static_cast<std::size_t>(order[i])]);
            }
            nn::Tensor yb, xb;
            if (model.config().dims == 1) {
                yb = batch_from_traces(ys);
                xb = batch_from_traces(xs);
            } else {
                yb = batch_from_blocks(ys);
                xb = batch_from_blocks(xs);
            }

            nn::Tensor loss;
            try {
                loss = nn::mse_loss(model.forward(yb, op), xb);
            } catch (const NumericError& e) {
                throw NumericError("train: epoch " + std::to_string(epoch) +
                                   ", batch " + std::to_string(start / static_cast<std::size_t>(cfg.batch_size)) +
                                   ": " + e.what());
            }
            const double batch_loss = loss.item();
            if (!std::isfinite(batch_loss))
                throw NumericError("train: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(start / static_cast<std::size_t>(cfg.batch_size)));

            opt.zero_grad();
            nn::backward(loss);
            opt.step();
            check_step_in_range(model.step_size());

            const auto batch_count = static_cast<std::int64_t>(stop - start);
            epoch_loss += batch_loss * static_cast<double>(batch_count);
            seen += batch_count;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.loss = epoch_loss / static_cast<double>(seen);
        stats.step_size = model.step_size();
        history.epochs.push_back(stats);
        if (log)
            (*log) << epoch << ',' << stats.loss << ',' << stats.step_size
                   << '\n';
    }
    return history;
}

metrics::MetricsReport evaluate(const UnrolledModel& model, const Dataset& data,
                                const ConvOperator& op) {
    if (data.empty()) throw std::invalid_argument("evaluate: empty dataset");
    std::vector<metrics::RecordMetrics> rows;
    rows.reserve(data.records.size());
    for (std::size_t r = 0; r < data.records.size(); ++r) {
        const auto& rec = data.records[r];
        const Grid x_hat = denormalize(model.infer(rec.y, op), rec.mag);
        metrics::RecordMetrics row;
        row.record = static_cast<std::int64_t>(r);
        row.mse = metrics::mse(x_hat, rec.x);
        row.correlation = metrics::correlation(x_hat, rec.x);
        row.quality_db = metrics::quality_db(x_hat, rec.x);
        rows.push_back(row);
    }
    return metrics::aggregate(std::move(rows));
}

} // namespace lpsd::model
