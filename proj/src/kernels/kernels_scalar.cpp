#include "lpsd/kernels.hpp"

#include <cmath>

// Reference kernels. Plain loops, no pragmas: these define the semantics the
// SIMD variants are tested against.

namespace lpsd::kernels::scalar {

namespace {

double dot(const double* a, const double* b, std::size_t len) {
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) acc += a[i] * b[i];
    return acc;
}

double sum(const double* a, std::size_t len) {
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) acc += a[i];
    return acc;
}

double sumsq(const double* a, std::size_t len) {
    double acc = 0.0;
    for (std::size_t i = 0; i < len; ++i) acc += a[i] * a[i];
    return acc;
}

double max_abs(const double* a, std::size_t len) {
    double best = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
        const double v = std::fabs(a[i]);
        if (v > best) best = v;
    }
    return best;
}

void axpy(double alpha, const double* x, double* y, std::size_t len) {
    if (alpha == 0.0) return;
    for (std::size_t i = 0; i < len; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) x[i] *= alpha;
}

void add(const double* a, const double* b, double* dst, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) dst[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* dst, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) dst[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* dst, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) dst[i] = a[i] * b[i];
}

void relu(const double* x, double* dst, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) dst[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* gout, double* gin,
                   std::size_t len) {
    for (std::size_t i = 0; i < len; ++i)
        if (x[i] > 0.0) gin[i] += gout[i];
}

void soft_threshold(const double* v, double lambda, double* dst,
                    std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) {
        const double mag = std::fabs(v[i]) - lambda;
        dst[i] = mag > 0.0 ? std::copysign(mag, v[i]) : 0.0;
    }
}

void normalize_affine(const double* x, double mean, double inv_std,
                      double gamma, double beta, double* dst,
                      std::size_t len) {
    for (std::size_t i = 0; i < len; ++i)
        dst[i] = (x[i] - mean) * inv_std * gamma + beta;
}

void adam_update(double* p, const double* g, double* m, double* v, double lr,
                 double beta1, double beta2, double eps, double bc1,
                 double bc2, std::size_t len) {
    for (std::size_t i = 0; i < len; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace

} // namespace lpsd::kernels::scalar

namespace lpsd::kernels {

const Table& scalar_table() {
    static const Table t = {
        scalar::dot,
        scalar::sum,
        scalar::sumsq,
        scalar::max_abs,
        scalar::axpy,
        scalar::scale,
        scalar::add,
        scalar::sub,
        scalar::mul,
        scalar::relu,
        scalar::relu_backward,
        scalar::soft_threshold,
        scalar::normalize_affine,
        scalar::adam_update,
    };
    return t;
}

} // namespace lpsd::kernels
