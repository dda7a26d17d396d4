#include "lpsd/kernels.hpp"

#include <cstdlib>
#include <string>

#include "kernels_tables.hpp"
#include "lpsd/errors.hpp"

namespace lpsd::kernels {

namespace {

bool variant_available(Variant v) {
    switch (v) {
    case Variant::scalar:
        return true;
    case Variant::avx2:
#if defined(LPSD_KERNELS_AVX2) && (defined(__GNUC__) || defined(__clang__))
        return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
        return false;
#endif
    case Variant::neon:
#ifdef LPSD_KERNELS_NEON
        return true; // baseline on aarch64
#else
        return false;
#endif
    }
    return false;
}

const Table& table_for(Variant v) {
    switch (v) {
#ifdef LPSD_KERNELS_AVX2
    case Variant::avx2:
        return avx2_table();
#endif
#ifdef LPSD_KERNELS_NEON
    case Variant::neon:
        return neon_table();
#endif
    default:
        return scalar_table();
    }
}

struct Dispatch {
    Variant variant;
    const Table* table;

    Dispatch() {
        variant = Variant::scalar;
        if (variant_available(Variant::neon)) variant = Variant::neon;
        if (variant_available(Variant::avx2)) variant = Variant::avx2;
        if (const char* env = std::getenv("LPSD_KERNELS")) {
            const std::string want(env);
            Variant v;
            if (want == "scalar")
                v = Variant::scalar;
            else if (want == "avx2")
                v = Variant::avx2;
            else if (want == "neon")
                v = Variant::neon;
            else
                throw ConfigError("LPSD_KERNELS: unknown variant '" + want + "'");
            if (!variant_available(v))
                throw ConfigError("LPSD_KERNELS: variant '" + want +
                                  "' not available on this host");
            variant = v;
        }
        table = &table_for(variant);
    }
};

Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

} // namespace

const char* variant_name(Variant v) {
    switch (v) {
    case Variant::scalar:
        return "scalar";
    case Variant::avx2:
        return "avx2";
    case Variant::neon:
        return "neon";
    }
    return "?";
}

Variant active_variant() { return dispatch().variant; }

void force_variant(Variant v) {
    if (!variant_available(v))
        throw ConfigError(std::string("kernel variant '") + variant_name(v) +
                          "' not available on this host");
    dispatch().variant = v;
    dispatch().table = &table_for(v);
}

double dot(const double* a, const double* b, std::size_t len) {
    return dispatch().table->dot(a, b, len);
}
double sum(const double* a, std::size_t len) {
    return dispatch().table->sum(a, len);
}
double sumsq(const double* a, std::size_t len) {
    return dispatch().table->sumsq(a, len);
}
double max_abs(const double* a, std::size_t len) {
    return dispatch().table->max_abs(a, len);
}
void axpy(double alpha, const double* x, double* y, std::size_t len) {
    dispatch().table->axpy(alpha, x, y, len);
}
void scale(double alpha, double* x, std::size_t len) {
    dispatch().table->scale(alpha, x, len);
}
void add(const double* a, const double* b, double* dst, std::size_t len) {
    dispatch().table->add(a, b, dst, len);
}
void sub(const double* a, const double* b, double* dst, std::size_t len) {
    dispatch().table->sub(a, b, dst, len);
}
void mul(const double* a, const double* b, double* dst, std::size_t len) {
    dispatch().table->mul(a, b, dst, len);
}
void relu(const double* x, double* dst, std::size_t len) {
    dispatch().table->relu(x, dst, len);
}
void relu_backward(const double* x, const double* gout, double* gin,
                   std::size_t len) {
    dispatch().table->relu_backward(x, gout, gin, len);
}
void soft_threshold(const double* v, double lambda, double* dst,
                    std::size_t len) {
    dispatch().table->soft_threshold(v, lambda, dst, len);
}
void normalize_affine(const double* x, double mean, double inv_std,
                      double gamma, double beta, double* dst,
                      std::size_t len) {
    dispatch().table->normalize_affine(x, mean, inv_std, gamma, beta, dst, len);
}
void adam_update(double* p, const double* g, double* m, double* v, double lr,
                 double beta1, double beta2, double eps, double bc1,
                 double bc2, std::size_t len) {
    dispatch().table->adam_update(p, g, m, v, lr, beta1, beta2, eps, bc1, bc2,
                                  len);
}

} // namespace lpsd::kernels
