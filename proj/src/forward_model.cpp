#include "lpsd/forward_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "lpsd/kernels.hpp"
#include "lpsd/rng.hpp"

namespace lpsd {

Wavelet make_ricker(double peak_frequency_hz, double dt_s,
                    std::int64_t half_width) {
    if (peak_frequency_hz <= 0.0)
        throw std::invalid_argument("make_ricker: peak frequency must be > 0");
    if (dt_s <= 0.0)
        throw std::invalid_argument("make_ricker: dt must be > 0");
    if (half_width < 1)
        throw std::invalid_argument("make_ricker: half_width must be >= 1");

    Wavelet w;
    w.dt = dt_s;
    w.peak_frequency = peak_frequency_hz;
    w.peak_index = half_width;
    w.samples.resize(static_cast<std::size_t>(2 * half_width + 1));
    const double pf = std::numbers::pi * peak_frequency_hz;
    for (std::int64_t k = -half_width; k <= half_width; ++k) {
        const double t = static_cast<double>(k) * dt_s;
        const double a = pf * pf * t * t;
        w.samples[static_cast<std::size_t>(k + half_width)] =
            (1.0 - 2.0 * a) * std::exp(-a);
    }
    return w;
}

ConvOperator::ConvOperator(Wavelet w, std::int64_t n) : w_(std::move(w)), n_(n) {
    const std::int64_t d = w_.length();
    if (d < 1) throw std::invalid_argument("ConvOperator: empty wavelet");
    if (n_ < 1) throw std::invalid_argument("ConvOperator: n must be >= 1");
    if (d > n_)
        throw std::invalid_argument("ConvOperator: wavelet length " +
                                    std::to_string(d) + " exceeds n = " +
                                    std::to_string(n_));
    if (w_.peak_index < 0 || w_.peak_index >= d)
        throw std::invalid_argument("ConvOperator: peak index out of range");
}

// y[i] = sum_k w[k] x[i + c - k]; per tap this is an axpy over the index
// range where both i and i + c - k stay in [0, n).
void ConvOperator::apply(const double* x, double* y) const {
    const std::int64_t d = w_.length();
    const std::int64_t c = w_.peak_index;
    std::fill(y, y + n_, 0.0);
    for (std::int64_t k = 0; k < d; ++k) {
        const std::int64_t shift = c - k; // x index = i + shift
        const std::int64_t i0 = std::max<std::int64_t>(0, k - c);
        const std::int64_t i1 = std::min<std::int64_t>(n_, n_ + k - c);
        if (i0 >= i1) continue;
        kernels::axpy(w_.samples[static_cast<std::size_t>(k)], x + i0 + shift,
                      y + i0, static_cast<std::size_t>(i1 - i0));
    }
}

// (A^T y)[j] = sum_k w[k] y[j + k - c].
void ConvOperator::apply_adjoint(const double* y, double* x) const {
    const std::int64_t d = w_.length();
    const std::int64_t c = w_.peak_index;
    std::fill(x, x + n_, 0.0);
    for (std::int64_t k = 0; k < d; ++k) {
        const std::int64_t shift = k - c;
        const std::int64_t j0 = std::max<std::int64_t>(0, c - k);
        const std::int64_t j1 = std::min<std::int64_t>(n_, n_ + c - k);
        if (j0 >= j1) continue;
        kernels::axpy(w_.samples[static_cast<std::size_t>(k)], y + j0 + shift,
                      x + j0, static_cast<std::size_t>(j1 - j0));
    }
}

Grid ConvOperator::apply(const Grid& x) const {
    if (x.n != n_)
        throw std::invalid_argument("ConvOperator::apply: leading dim " +
                                    std::to_string(x.n) + " != n = " +
                                    std::to_string(n_));
    Grid y(x.n, x.m);
    for (std::int64_t j = 0; j < x.m; ++j) apply(x.trace(j), y.trace(j));
    return y;
}

Grid ConvOperator::apply_adjoint(const Grid& y) const {
    if (y.n != n_)
        throw std::invalid_argument("ConvOperator::apply_adjoint: leading dim " +
                                    std::to_string(y.n) + " != n = " +
                                    std::to_string(n_));
    Grid x(y.n, y.m);
    for (std::int64_t j = 0; j < y.m; ++j) apply_adjoint(y.trace(j), x.trace(j));
    return x;
}

std::vector<double> ConvOperator::dense() const {
    if (n_ > 1024)
        throw std::invalid_argument(
            "ConvOperator::dense: refusing n > 1024 (oracle only)");
    const std::int64_t d = w_.length();
    const std::int64_t c = w_.peak_index;
    std::vector<double> a(static_cast<std::size_t>(n_ * n_), 0.0);
    for (std::int64_t j = 0; j < n_; ++j) {
        for (std::int64_t k = 0; k < d; ++k) {
            const std::int64_t i = j - c + k;
            if (i < 0 || i >= n_) continue;
            a[static_cast<std::size_t>(i * n_ + j)] =
                w_.samples[static_cast<std::size_t>(k)];
        }
    }
    return a;
}

Grid corrupt(const Grid& y_clean, const NoiseSpec& spec) {
    if (!spec.snr_db) return y_clean;
    if (!std::isfinite(*spec.snr_db))
        throw std::invalid_argument("corrupt: snr_db must be finite");

    const double signal_energy = kernels::sumsq(y_clean.v.data(), y_clean.size());
    if (signal_energy == 0.0)
        throw std::invalid_argument("corrupt: all-zero signal has no SNR");

    Grid noise(y_clean.n, y_clean.m);
    rng::Stream stream(spec.seed);
    for (auto& e : noise.v) e = stream.normal();

    // Rescale the realized noise so 10 log10(|y|^2 / |e|^2) hits the target
    // exactly rather than only in expectation.
    const double raw_energy = kernels::sumsq(noise.v.data(), noise.size());
    const double target_energy =
        signal_energy * std::pow(10.0, -*spec.snr_db / 10.0);
    const double s = std::sqrt(target_energy / raw_energy);

    Grid out = y_clean;
    kernels::axpy(s, noise.v.data(), out.v.data(), out.size());
    return out;
}

} // namespace lpsd
