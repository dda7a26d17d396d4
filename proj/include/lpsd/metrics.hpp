#pragma once

#include <cstdint>
#include <vector>

#include "lpsd/grid.hpp"

// Reconstruction metrics: per-element mean-squared error, cosine correlation
// (no mean subtraction), and the projection-based quality score in dB. The
// quality residual removes the best scalar multiple of the estimate, so Q is
// invariant to positive rescaling of x_hat; a vanishing residual is reported
// as +infinity.

namespace lpsd::metrics {

double mse(const Grid& x_hat, const Grid& x);

// x_hat . x / (|x_hat| |x|). Throws lpsd::UndefinedMetricError when either
// vector is all-zero.
double correlation(const Grid& x_hat, const Grid& x);

// 10 log10(|x|^2 / |x - x_hat (x_hat . x) / |x_hat|^2|^2). Returns
// +infinity when the residual norm drops below 1e-15 |x|.
double quality_db(const Grid& x_hat, const Grid& x);

// 10 log10(|clean|^2 / |noisy - clean|^2).
double measured_snr_db(const Grid& clean, const Grid& noisy);

struct RecordMetrics {
    std::int64_t record = 0;
    double mse = 0.0;
    double correlation = 0.0;
    double quality_db = 0.0;
};

struct MetricsReport {
    double mse = 0.0;
    double correlation = 0.0;
    double quality_db = 0.0; // +inf if any record is perfect up to scale
    std::int64_t n_records = 0;
    std::vector<RecordMetrics> rows;
};

// Aggregate = arithmetic mean of the per-record rows.
MetricsReport aggregate(std::vector<RecordMetrics> rows);

} // namespace lpsd::metrics
