#pragma once

#include <cstddef>

// Data-parallel inner loops shared by the Toeplitz operator, the solvers and
// the neural network. Every kernel has a scalar reference implementation plus
// SIMD variants (AVX2 on x86-64, NEON on aarch64) selected once at startup;
// the scalar path is the semantic definition and the SIMD paths are
// equivalence-tested against it. Set LPSD_KERNELS=scalar|avx2|neon to pin a
// variant.

namespace lpsd::kernels {

enum class Variant {
    scalar,
    avx2,
    neon,
};

const char* variant_name(Variant v);

// Variant currently routed through the dispatch table.
Variant active_variant();

// Pin a variant explicitly. Throws lpsd::ConfigError if it was not compiled
// in or the CPU lacks the feature. Not safe to call while kernels are
// executing on other threads.
void force_variant(Variant v);

// Reductions.
double dot(const double* a, const double* b, std::size_t len);
double sum(const double* a, std::size_t len);
double sumsq(const double* a, std::size_t len);
double max_abs(const double* a, std::size_t len);

// y[i] += alpha * x[i]. No-op when alpha == 0 so zero taps never inject
// NaN from uninitialized padding.
void axpy(double alpha, const double* x, double* y, std::size_t len);

// x[i] *= alpha.
void scale(double alpha, double* x, std::size_t len);

// Elementwise binary ops, dst may alias either input.
void add(const double* a, const double* b, double* dst, std::size_t len);
void sub(const double* a, const double* b, double* dst, std::size_t len);
void mul(const double* a, const double* b, double* dst, std::size_t len);

// dst[i] = max(x[i], 0).
void relu(const double* x, double* dst, std::size_t len);

// gin[i] += gout[i] where x[i] > 0 (accumulating, for the backward pass).
void relu_backward(const double* x, const double* gout, double* gin,
                   std::size_t len);

// dst[i] = sign(v[i]) * max(|v[i]| - lambda, 0).
void soft_threshold(const double* v, double lambda, double* dst,
                    std::size_t len);

// dst[i] = (x[i] - mean) * inv_std * gamma + beta. GroupNorm inner loop;
// gamma/beta are constant over one channel's spatial span.
void normalize_affine(const double* x, double mean, double inv_std,
                      double gamma, double beta, double* dst, std::size_t len);

// One Adam update over a contiguous parameter block. bc1/bc2 are the bias
// corrections 1 - beta^t for the current step.
void adam_update(double* p, const double* g, double* m, double* v, double lr,
                 double beta1, double beta2, double eps, double bc1,
                 double bc2, std::size_t len);

// Implementation table; one instance per compiled variant.
struct Table {
    double (*dot)(const double*, const double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*sumsq)(const double*, std::size_t);
    double (*max_abs)(const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*scale)(double, double*, std::size_t);
    void (*add)(const double*, const double*, double*, std::size_t);
    void (*sub)(const double*, const double*, double*, std::size_t);
    void (*mul)(const double*, const double*, double*, std::size_t);
    void (*relu)(const double*, double*, std::size_t);
    void (*relu_backward)(const double*, const double*, double*, std::size_t);
    void (*soft_threshold)(const double*, double, double*, std::size_t);
    void (*normalize_affine)(const double*, double, double, double, double,
                             double*, std::size_t);
    void (*adam_update)(double*, const double*, double*, double*, double,
                        double, double, double, double, double, std::size_t);
};

const Table& scalar_table();

} // namespace lpsd::kernels
