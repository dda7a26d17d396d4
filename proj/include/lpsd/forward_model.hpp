#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "lpsd/grid.hpp"

// Convolutional trace model: a trace is the source wavelet convolved with the
// reflectivity sequence plus additive noise, y = A x + e, where A is the
// Toeplitz matrix whose column j is the wavelet centered at row j. A is
// applied matrix-free in O(n d); a dense materialization exists as a testing
// oracle for small n.

namespace lpsd {

struct Wavelet {
    std::vector<double> samples; // peak-normalized, max |.| == 1
    double dt = 0.0;             // seconds per sample
    double peak_frequency = 0.0; // Hz
    std::int64_t peak_index = 0; // sample treated as time zero

    std::int64_t length() const {
        return static_cast<std::int64_t>(samples.size());
    }
};

// Zero-phase Ricker pulse sampled at t = -half_width*dt .. +half_width*dt,
// w(t) = (1 - 2 pi^2 f^2 t^2) exp(-pi^2 f^2 t^2). Length 2*half_width + 1,
// peak value exactly 1 at the center sample.
Wavelet make_ricker(double peak_frequency_hz, double dt_s,
                    std::int64_t half_width);

class ConvOperator {
public:
    // Requires wavelet length d <= n.
    ConvOperator(Wavelet w, std::int64_t n);

    std::int64_t n() const { return n_; }
    const Wavelet& wavelet() const { return w_; }
    std::int64_t center_offset() const { return w_.peak_index; }

    // Single contiguous trace of length n; y and x must not alias.
    void apply(const double* x, double* y) const;
    void apply_adjoint(const double* y, double* x) const;

    // Column-by-column application to an n x m block.
    Grid apply(const Grid& x) const;
    Grid apply_adjoint(const Grid& y) const;

    // Dense n x n matrix, row-major. Testing oracle; refuses n > 1024.
    std::vector<double> dense() const;

private:
    Wavelet w_;
    std::int64_t n_ = 0;
};

struct NoiseSpec {
    std::optional<double> snr_db; // nullopt: noiseless
    std::uint64_t seed = 0;

    static NoiseSpec noiseless() { return {}; }
    static NoiseSpec at(double snr_db_, std::uint64_t seed_) {
        return {snr_db_, seed_};
    }
};

// Additive white Gaussian noise rescaled after sampling so the realized SNR
// equals spec.snr_db exactly. Noiseless specs return the input unchanged.
// Throws std::invalid_argument for an all-zero clean signal at finite SNR.
Grid corrupt(const Grid& y_clean, const NoiseSpec& spec);

} // namespace lpsd
