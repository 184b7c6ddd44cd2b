#include "ari/kernels.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>

#include "ari/log.hpp"

namespace ari::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scale(double* x, std::size_t n, double alpha) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

}  // namespace scalar

bool avx2_compiled() {
#if defined(ARI_HAVE_AVX2_TU)
    return true;
#else
    return false;
#endif
}

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2") != 0;
#else
    return false;
#endif
}

namespace {

Backend resolve_backend() {
    const char* env = std::getenv("ARI_SIMD");
    if (env != nullptr && std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (env != nullptr && std::strcmp(env, "avx2") == 0) {
        if (avx2_compiled() && avx2_supported()) return Backend::Avx2;
        log::error("ARI_SIMD=avx2 requested but AVX2 is unavailable; using scalar");
        return Backend::Scalar;
    }
    return (avx2_compiled() && avx2_supported()) ? Backend::Avx2 : Backend::Scalar;
}

const Backend g_backend = resolve_backend();

}  // namespace

Backend active_backend() { return g_backend; }

const char* backend_name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

double dot(const double* a, const double* b, std::size_t n) {
#if defined(ARI_HAVE_AVX2_TU)
    if (g_backend == Backend::Avx2) return avx2::dot(a, b, n);
#endif
    return scalar::dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
#if defined(ARI_HAVE_AVX2_TU)
    if (g_backend == Backend::Avx2) return avx2::axpy(alpha, x, y, n);
#endif
    scalar::axpy(alpha, x, y, n);
}

void scale(double* x, std::size_t n, double alpha) {
#if defined(ARI_HAVE_AVX2_TU)
    if (g_backend == Backend::Avx2) return avx2::scale(x, n, alpha);
#endif
    scalar::scale(x, n, alpha);
}

double sum(const double* x, std::size_t n) {
#if defined(ARI_HAVE_AVX2_TU)
    if (g_backend == Backend::Avx2) return avx2::sum(x, n);
#endif
    return scalar::sum(x, n);
}

double norm2(const double* x, std::size_t n) { return std::sqrt(dot(x, x, n)); }

void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot(a + r * cols, x, cols);
}

void matvec_t(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t c = 0; c < cols; ++c) y[c] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) axpy(x[r], a + r * cols, y, cols);
}

}  // namespace ari::kernels
