#include "lpsd/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "lpsd/errors.hpp"
#include "lpsd/kernels.hpp"

namespace lpsd::metrics {

namespace {

void check_shapes(const Grid& a, const Grid& b, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

} // namespace

double mse(const Grid& x_hat, const Grid& x) {
    check_shapes(x_hat, x, "mse");
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x_hat.v[i] - x.v[i];
        acc += d * d;
    }
    return acc / static_cast<double>(x.size());
}

double correlation(const Grid& x_hat, const Grid& x) {
    check_shapes(x_hat, x, "correlation");
    const double nh = kernels::sumsq(x_hat.v.data(), x_hat.size());
    const double nx = kernels::sumsq(x.v.data(), x.size());
    if (nh == 0.0 || nx == 0.0)
        throw UndefinedMetricError("correlation: zero vector");
    return kernels::dot(x_hat.v.data(), x.v.data(), x.size()) /
           (std::sqrt(nh) * std::sqrt(nx));
}

double quality_db(const Grid& x_hat, const Grid& x) {
    check_shapes(x_hat, x, "quality_db");
    const double nh = kernels::sumsq(x_hat.v.data(), x_hat.size());
    const double nx = kernels::sumsq(x.v.data(), x.size());
    if (nh == 0.0 || nx == 0.0)
        throw UndefinedMetricError("quality_db: zero vector");
    const double coef = kernels::dot(x_hat.v.data(), x.v.data(), x.size()) / nh;
    double res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x.v[i] - coef * x_hat.v[i];
        res += d * d;
    }
    if (std::sqrt(res) < 1e-15 * std::sqrt(nx))
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(nx / res);
}

double measured_snr_db(const Grid& clean, const Grid& noisy) {
    check_shapes(clean, noisy, "measured_snr_db");
    const double nc = kernels::sumsq(clean.v.data(), clean.size());
    if (nc == 0.0)
        throw UndefinedMetricError("measured_snr_db: zero clean signal");
    double ne = 0.0;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        const double d = noisy.v[i] - clean.v[i];
        ne += d * d;
    }
    if (ne == 0.0)
        throw UndefinedMetricError("measured_snr_db: noisy equals clean");
    return 10.0 * std::log10(nc / ne);
}

MetricsReport aggregate(std::vector<RecordMetrics> rows) {
    if (rows.empty())
        throw std::invalid_argument("aggregate: no records");
    MetricsReport rep;
    rep.n_records = static_cast<std::int64_t>(rows.size());
    for (const auto& r : rows) {
        rep.mse += r.mse;
        rep.correlation += r.correlation;
        rep.quality_db += r.quality_db;
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    rep.mse *= inv;
    rep.correlation *= inv;
    rep.quality_db *= inv;
    rep.rows = std::move(rows);
    return rep;
}

} // namespace lpsd::metrics
