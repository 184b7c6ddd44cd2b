#pragma once

#include <cstddef>

// Dense double-precision primitives behind the trainers, the power iteration
// and the cosine filter. Scalar versions are the reference semantics; AVX2
// variants are selected at runtime when the CPU supports them (override with
// ARI_SIMD=scalar|avx2|auto). Equivalence of the two paths is covered by
// tests/test_kernels.cpp.
namespace ari::kernels {

enum class Backend { Scalar, Avx2 };

Backend active_backend();
const char* backend_name(Backend b);
bool avx2_supported();   // CPU capability
bool avx2_compiled();    // build carries the AVX2 TU

// Dispatched entry points.
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);  // y += alpha*x
void scale(double* x, std::size_t n, double alpha);
double sum(const double* x, std::size_t n);
double norm2(const double* x, std::size_t n);

// y = A x with A row-major (rows x cols); y has length rows.
void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
// y = A^T x; y has length cols.
void matvec_t(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double* x, std::size_t n, double alpha);
double sum(const double* x, std::size_t n);
}  // namespace scalar

#if defined(ARI_HAVE_AVX2_TU)
namespace avx2 {
// Callable only when avx2_supported().
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scale(double* x, std::size_t n, double alpha);
double sum(const double* x, std::size_t n);
}  // namespace avx2
#endif

}  // namespace ari::kernels
