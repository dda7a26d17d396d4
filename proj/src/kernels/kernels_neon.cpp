#include "kernels_tables.hpp"

#ifdef LPSD_KERNELS_NEON

#include <arm_neon.h>
#include <cmath>

// NEON kernels for aarch64, 2 doubles per lane. Mirrors the scalar reference
// op for op.

namespace lpsd::kernels::neon {

namespace {

double dot(const double* a, const double* b, std::size_t len) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= len; i += 2)
        acc = vfmaq_f64(acc, vld1q_f64(a + i), vld1q_f64(b + i));
    double r = vaddvq_f64(acc);
    for (; i < len; ++i) r += a[i] * b[i];
    return r;
}

double sum(const double* a, std::size_t len) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= len; i += 2) acc = vaddq_f64(acc, vld1q_f64(a + i));
    double r = vaddvq_f64(acc);
    for (; i < len; ++i) r += a[i];
    return r;
}

double sumsq(const double* a, std::size_t len) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= len; i += 2) {
        const float64x2_t v = vld1q_f64(a + i);
        acc = vfmaq_f64(acc, v, v);
    }
    double r = vaddvq_f64(acc);
    for (; i < len; ++i) r += a[i] * a[i];
    return r;
}

double max_abs(const double* a, std::size_t len) {
    float64x2_t best = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= len; i += 2)
        best = vmaxq_f64(best, vabsq_f64(vld1q_f64(a + i)));
    double r = vmaxvq_f64(best);
    for (; i < len; ++i) {
        const double v = std::fabs(a[i]);
        if (v > r) r = v;
    }
    return r;
}

void axpy(double alpha, const double* x, double* y, std::size_t len) {
    if (alpha == 0.0) return;
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= len; i += 2)
        vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < len; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t len) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= len; i += 2)
        vst1q_f64(x + i, vmulq_f64(va, vld1q_f64(x + i)));
    for (; i < len; ++i) x[i] *= alpha;
}

void add(const double* a, const double* b, double* dst, std::size_t len) {
    std::size_t i = 0;
    for (; i + 2 <= len; i += 2)
        vst1q_f64(dst + i, vaddq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < len; ++i) dst[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* dst, std::size_t len) {
    std::size_t i = 0;
    for (; i + 2 <= len; i += 2)
        vst1q_f64(dst + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < len; ++i) dst[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* dst, std::size_t len) {
    std::size_t i = 0;
    for (; i + 2 <= len; i += 2)
        vst1q_f64(dst + i, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    for (; i < len; ++i) dst[i] = a[i] * b[i];
}

void relu(const double* x, double* dst, std::size_t len) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= len; i += 2)
        vst1q_f64(dst + i, vmaxq_f64(zero, vld1q_f64(x + i)));
    for (; i < len; ++i) dst[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* gout, double* gin,
                   std::size_t len) {
    const float64x2_t zero = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= len; i += 2) {
        const uint64x2_t mask = vcgtq_f64(vld1q_f64(x + i), zero);
        const float64x2_t pass = vbslq_f64(mask, vld1q_f64(gout + i), zero);
        vst1q_f64(gin + i, vaddq_f64(vld1q_f64(gin + i), pass));
    }
    for (; i < len; ++i)
        if (x[i] > 0.0) gin[i] += gout[i];
}

void soft_threshold(const double* v, double lambda, double* dst,
                    std::size_t len) {
    const float64x2_t vl = vdupq_n_f64(lambda);
    const float64x2_t zero = vdupq_n_f64(0.0);
    const uint64x2_t signmask = vdupq_n_u64(0x8000000000000000ULL);
    std::size_t i = 0;
    for (; i + 2 <= len; i += 2) {
        const float64x2_t x = vld1q_f64(v + i);
        const float64x2_t shrunk = vmaxq_f64(zero, vsubq_f64(vabsq_f64(x), vl));
        const uint64x2_t sign = vandq_u64(vreinterpretq_u64_f64(x), signmask);
        vst1q_f64(dst + i, vreinterpretq_f64_u64(
                               vorrq_u64(vreinterpretq_u64_f64(shrunk), sign)));
    }
    for (; i < len; ++i) {
        const double mag = std::fabs(v[i]) - lambda;
        dst[i] = mag > 0.0 ? std::copysign(mag, v[i]) : 0.0;
    }
}

void normalize_affine(const double* x, double mean, double inv_std,
                      double gamma, double beta, double* dst,
                      std::size_t len) {
    const float64x2_t vm = vdupq_n_f64(mean);
    const float64x2_t vs = vdupq_n_f64(inv_std * gamma);
    const float64x2_t vb = vdupq_n_f64(beta);
    std::size_t i = 0;
    for (; i + 2 <= len; i += 2) {
        const float64x2_t centered = vsubq_f64(vld1q_f64(x + i), vm);
        vst1q_f64(dst + i, vfmaq_f64(vb, centered, vs));
    }
    for (; i < len; ++i) dst[i] = (x[i] - mean) * (inv_std * gamma) + beta;
}

void adam_update(double* p, const double* g, double* m, double* v, double lr,
                 double beta1, double beta2, double eps, double bc1,
                 double bc2, std::size_t len) {
    const float64x2_t vb1 = vdupq_n_f64(beta1);
    const float64x2_t vb2 = vdupq_n_f64(beta2);
    const float64x2_t vc1 = vdupq_n_f64(1.0 - beta1);
    const float64x2_t vc2 = vdupq_n_f64(1.0 - beta2);
    const float64x2_t vbc1 = vdupq_n_f64(bc1);
    const float64x2_t vbc2 = vdupq_n_f64(bc2);
    const float64x2_t veps = vdupq_n_f64(eps);
    const float64x2_t vlr = vdupq_n_f64(lr);
    std::size_t i = 0;
    for (; i + 2 <= len; i += 2) {
        const float64x2_t gi = vld1q_f64(g + i);
        const float64x2_t mi = vfmaq_f64(vmulq_f64(vc1, gi), vb1, vld1q_f64(m + i));
        const float64x2_t vi = vfmaq_f64(vmulq_f64(vc2, vmulq_f64(gi, gi)), vb2,
                                         vld1q_f64(v + i));
        vst1q_f64(m + i, mi);
        vst1q_f64(v + i, vi);
        const float64x2_t mhat = vdivq_f64(mi, vbc1);
        const float64x2_t vhat = vdivq_f64(vi, vbc2);
        const float64x2_t denom = vaddq_f64(vsqrtq_f64(vhat), veps);
        const float64x2_t step = vdivq_f64(vmulq_f64(vlr, mhat), denom);
        vst1q_f64(p + i, vsubq_f64(vld1q_f64(p + i), step));
    }
    for (; i < len; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

} // namespace

} // namespace lpsd::kernels::neon

namespace lpsd::kernels {

const Table& neon_table() {
    static const Table t = {
        neon::dot,
        neon::sum,
        neon::sumsq,
        neon::max_abs,
        neon::axpy,
        neon::scale,
        neon::add,
        neon::sub,
        neon::mul,
        neon::relu,
        neon::relu_backward,
        neon::soft_threshold,
        neon::normalize_affine,
        neon::adam_update,
    };
    return t;
}

} // namespace lpsd::kernels

#endif // LPSD_KERNELS_NEON
