#pragma once

#include <cstddef>
#include <string>

// Dense inner loops for the masked networks. Each kernel has a scalar
// reference implementation and a SIMD variant (AVX2 on x86_64, NEON on
// aarch64); the active backend is chosen at runtime from CPU features and
// can be forced for equivalence testing.

namespace nsmc::kern {

enum class Backend { Auto, Scalar, Simd };

// Forces a backend. Backend::Simd throws if unsupported on this CPU.
void select_backend(Backend b);
Backend active_backend();
std::string backend_name();
bool simd_available();

// y[i] = sum_j A[i*cols+j] * x[j], A row-major (rows x cols)
void matvec(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y);

// out[j] = sum_i A[i*cols+j] * d[i]  (out = A^T d)
void matvec_t(const double* A, std::size_t rows, std::size_t cols, const double* d, double* out);

// A[i*cols+j] += d[i] * x[j]  (rank-1 accumulate)
void ger(double* A, std::size_t rows, std::size_t cols, const double* d, const double* x);

double dot(const double* a, const double* b, std::size_t n);

// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n);

namespace scalar {
void matvec(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y);
void matvec_t(const double* A, std::size_t rows, std::size_t cols, const double* d, double* out);
void ger(double* A, std::size_t rows, std::size_t cols, const double* d, const double* x);
double dot(const double* a, const double* b, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
}  // namespace scalar

namespace simd {
// Present only when the target architecture has a SIMD variant; guarded by
// simd_available() at runtime.
void matvec(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y);
void matvec_t(const double* A, std::size_t rows, std::size_t cols, const double* d, double* out);
void ger(double* A, std::size_t rows, std::size_t cols, const double* d, const double* x);
double dot(const double* a, const double* b, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
}  // namespace simd

}  // namespace nsmc::kern
