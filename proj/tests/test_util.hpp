#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "lpsd/forward_model.hpp"
#include "lpsd/grid.hpp"
#include "lpsd/rng.hpp"

// Independent oracles for the test suites. Everything here is built straight
// from definitions (dense matrices, nested loops, Gaussian elimination) and
// never calls the implementation paths it checks.

namespace testutil {

// Dense n x n convolution matrix assembled column by column from the
// wavelet: column j holds the wavelet with its peak at row j.
inline std::vector<double> dense_toeplitz(const lpsd::Wavelet& w,
                                          std::int64_t n) {
    std::vector<double> a(static_cast<std::size_t>(n * n), 0.0);
    for (std::int64_t j = 0; j < n; ++j)
        for (std::int64_t k = 0; k < w.length(); ++k) {
            const std::int64_t row = j - w.peak_index + k;
            if (row >= 0 && row < n)
                a[static_cast<std::size_t>(row * n + j)] =
                    w.samples[static_cast<std::size_t>(k)];
        }
    return a;
}

inline std::vector<double> dense_matvec(const std::vector<double>& a,
                                        const std::vector<double>& x,
                                        std::int64_t n, bool transpose) {
    std::vector<double> y(static_cast<std::size_t>(n), 0.0);
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = 0; j < n; ++j) {
            const double aij = transpose
                                   ? a[static_cast<std::size_t>(j * n + i)]
                                   : a[static_cast<std::size_t>(i * n + j)];
            y[static_cast<std::size_t>(i)] +=
                aij * x[static_cast<std::size_t>(j)];
        }
    return y;
}

// Partial-pivot Gaussian elimination; solves a x = b for small dense a.
inline std::vector<double> solve_dense(std::vector<double> a,
                                       std::vector<double> b, std::int64_t n) {
    for (std::int64_t col = 0; col < n; ++col) {
        std::int64_t pivot = col;
        for (std::int64_t r = col + 1; r < n; ++r)
            if (std::fabs(a[static_cast<std::size_t>(r * n + col)]) >
                std::fabs(a[static_cast<std::size_t>(pivot * n + col)]))
                pivot = r;
        if (std::fabs(a[static_cast<std::size_t>(pivot * n + col)]) < 1e-14)
            throw std::runtime_error("solve_dense: singular matrix");
        if (pivot != col) {
            for (std::int64_t c = 0; c < n; ++c)
                std::swap(a[static_cast<std::size_t>(col * n + c)],
                          a[static_cast<std::size_t>(pivot * n + c)]);
            std::swap(b[static_cast<std::size_t>(col)],
                      b[static_cast<std::size_t>(pivot)]);
        }
        const double d = a[static_cast<std::size_t>(col * n + col)];
        for (std::int64_t r = col + 1; r < n; ++r) {
            const double f = a[static_cast<std::size_t>(r * n + col)] / d;
            if (f == 0.0) continue;
            for (std::int64_t c = col; c < n; ++c)
                a[static_cast<std::size_t>(r * n + c)] -=
                    f * a[static_cast<std::size_t>(col * n + c)];
            b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(col)];
        }
    }
    std::vector<double> x(static_cast<std::size_t>(n), 0.0);
    for (std::int64_t r = n - 1; r >= 0; --r) {
        double acc = b[static_cast<std::size_t>(r)];
        for (std::int64_t c = r + 1; c < n; ++c)
            acc -= a[static_cast<std::size_t>(r * n + c)] *
                   x[static_cast<std::size_t>(c)];
        x[static_cast<std::size_t>(r)] = acc / a[static_cast<std::size_t>(r * n + r)];
    }
    return x;
}

inline std::vector<double> random_vector(std::int64_t n, lpsd::rng::Stream& s,
                                         double scale = 1.0) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& e : v) e = scale * s.normal();
    return v;
}

inline lpsd::Grid random_grid(std::int64_t n, std::int64_t m,
                              lpsd::rng::Stream& s, double scale = 1.0) {
    lpsd::Grid g(n, m);
    for (auto& e : g.v) e = scale * s.normal();
    return g;
}

inline double norm(const std::vector<double>& v) {
    double acc = 0.0;
    for (double e : v) acc += e * e;
    return std::sqrt(acc);
}

inline double max_abs_diff(const std::vector<double>& a,
                           const std::vector<double>& b) {
    double best = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        best = std::max(best, std::fabs(a[i] - b[i]));
    return best;
}

inline double rel_err(double got, double want) {
    const double denom = std::max(std::fabs(got), std::fabs(want));
    if (denom < 1e-12) return 0.0;
    return std::fabs(got - want) / denom;
}

} // namespace testutil
