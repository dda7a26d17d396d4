#include "kernels_tables.hpp"

#ifdef LPSD_KERNELS_AVX2

#include <cmath>
#include <immintrin.h>

// AVX2/FMA kernels, 4 doubles per lane, unaligned loads (conv spans start at
// arbitrary offsets), scalar tails. Reductions use a single vector
// accumulator, so rounding differs from the scalar path by reassociation
// only.

namespace lpsd::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swap = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swap));
}

inline __m256d abs_pd(__m256d v) {
    const __m256d mask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x7fffffffffffffffLL));
    return _mm256_and_pd(v, mask);
}

double dot(const double* a, const double* b, std::size_t len) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4)
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    double r = hsum(acc);
    for (; i < len; ++i) r += a[i] * b[i];
    return r;
}

double sum(const double* a, std::size_t len) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4)
        acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
    double r = hsum(acc);
    for (; i < len; ++i) r += a[i];
    return r;
}

double sumsq(const double* a, std::size_t len) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4) {
        const __m256d v = _mm256_loadu_pd(a + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double r = hsum(acc);
    for (; i < len; ++i) r += a[i] * a[i];
    return r;
}

double max_abs(const double* a, std::size_t len) {
    __m256d best = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4)
        best = _mm256_max_pd(best, abs_pd(_mm256_loadu_pd(a + i)));
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, best);
    double r = lanes[0];
    for (int k = 1; k < 4; ++k)
        if (lanes[k] > r) r = lanes[k];
    for (; i < len; ++i) {
        const double v = std::fabs(a[i]);
        if (v > r) r = v;
    }
    return r;
}

void axpy(double alpha, const double* x, double* y, std::size_t len) {
    if (alpha == 0.0) return;
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4) {
        const __m256d r = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(y + i, r);
    }
    for (; i < len; ++i) y[i] += alpha * x[i];
}

void scale(double alpha, double* x, std::size_t len) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    for (; i < len; ++i) x[i] *= alpha;
}

void add(const double* a, const double* b, double* dst, std::size_t len) {
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4)
        _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < len; ++i) dst[i] = a[i] + b[i];
}

void sub(const double* a, const double* b, double* dst, std::size_t len) {
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4)
        _mm256_storeu_pd(dst + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < len; ++i) dst[i] = a[i] - b[i];
}

void mul(const double* a, const double* b, double* dst, std::size_t len) {
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4)
        _mm256_storeu_pd(dst + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < len; ++i) dst[i] = a[i] * b[i];
}

void relu(const double* x, double* dst, std::size_t len) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4)
        _mm256_storeu_pd(dst + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
    for (; i < len; ++i) dst[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* gout, double* gin,
                   std::size_t len) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4) {
        const __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        const __m256d pass = _mm256_and_pd(mask, _mm256_loadu_pd(gout + i));
        _mm256_storeu_pd(gin + i, _mm256_add_pd(_mm256_loadu_pd(gin + i), pass));
    }
    for (; i < len; ++i)
        if (x[i] > 0.0) gin[i] += gout[i];
}

void soft_threshold(const double* v, double lambda, double* dst,
                    std::size_t len) {
    const __m256d vl = _mm256_set1_pd(lambda);
    const __m256d zero = _mm256_setzero_pd();
    const __m256d signmask = _mm256_castsi256_pd(_mm256_set1_epi64x(0x8000000000000000ULL));
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4) {
        const __m256d x = _mm256_loadu_pd(v + i);
        const __m256d shrunk = _mm256_max_pd(zero, _mm256_sub_pd(abs_pd(x), vl));
        const __m256d sign = _mm256_and_pd(x, signmask);
        _mm256_storeu_pd(dst + i, _mm256_or_pd(shrunk, sign));
    }
    for (; i < len; ++i) {
        const double mag = std::fabs(v[i]) - lambda;
        dst[i] = mag > 0.0 ? std::copysign(mag, v[i]) : 0.0;
    }
}

void normalize_affine(const double* x, double mean, double inv_std,
                      double gamma, double beta, double* dst,
                      std::size_t len) {
    const __m256d vm = _mm256_set1_pd(mean);
    const __m256d vs = _mm256_set1_pd(inv_std * gamma);
    const __m256d vb = _mm256_set1_pd(beta);
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4) {
        const __m256d centered = _mm256_sub_pd(_mm256_loadu_pd(x + i), vm);
        _mm256_storeu_pd(dst + i, _mm256_fmadd_pd(centered, vs, vb));
    }
    for (; i < len; ++i) dst[i] = (x[i] - mean) * (inv_std * gamma) + beta;
}

void adam_update(double* p, const double* g, double* m, double* v, double lr,
                 double beta1, double beta2, double eps, double bc1,
                 double bc2, std::size_t len) {
    const __m256d vb1 = _mm256_set1_pd(beta1);
    const __m256d vb2 = _mm256_set1_pd(beta2);
    const __m256d vc1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d vc2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d vbc1 = _mm256_set1_pd(bc1);
    const __m256d vbc2 = _mm256_set1_pd(bc2);
    const __m256d veps = _mm256_set1_pd(eps);
    const __m256d vlr = _mm256_set1_pd(lr);
    std::size_t i = 0;
    for (; i + 4 <= len; i += 4) {
        const __m256d gi = _mm256_loadu_pd(g + i);
        const __m256d mi = _mm256_fmadd_pd(vb1, _mm256_loadu_pd(m + i), _mm256_mul_pd(vc1, gi));
        const __m256d vi = _mm256_fmadd_pd(vb2, _mm256_loadu_pd(v + i),
                                           _mm256_mul_pd(vc2, _mm256_mul_pd(gi, gi)));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d mhat = _mm256_div_pd(mi, vbc1);
        const __m256d vhat = _mm256_div_pd(vi, vbc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), veps);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(vlr, mhat), denom);
        _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
    }
    for (; i < len; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
}

} // namespace

} // namespace lpsd::kernels::avx2

namespace lpsd::kernels {

const Table& avx2_table() {
    static const Table t = {
        avx2::dot,
        avx2::sum,
        avx2::sumsq,
        avx2::max_abs,
        avx2::axpy,
        avx2::scale,
        avx2::add,
        avx2::sub,
        avx2::mul,
        avx2::relu,
        avx2::relu_backward,
        avx2::soft_threshold,
        avx2::normalize_affine,
        avx2::adam_update,
    };
    return t;
}

} // namespace lpsd::kernels

#endif // LPSD_KERNELS_AVX2
