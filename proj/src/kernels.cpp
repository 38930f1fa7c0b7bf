#include "nsmc/kernels.hpp"

#include <stdexcept>

namespace nsmc::kern {

namespace {

bool detect_simd() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#elif defined(__ARM_NEON) || defined(__aarch64__)
    return true;
#else
    return false;
#endif
}

struct Dispatch {
    Backend mode = Backend::Auto;
    bool use_simd = detect_simd();
};

Dispatch& dispatch() {
    static Dispatch d;
    return d;
}

}  // namespace

bool simd_available() {
    static const bool avail = detect_simd();
    return avail;
}

void select_backend(Backend b) {
    if (b == Backend::Simd && !simd_available())
        throw std::runtime_error("SIMD backend unavailable on this CPU");
    dispatch().mode = b;
    dispatch().use_simd = (b == Backend::Auto) ? simd_available() : (b == Backend::Simd);
}

Backend active_backend() { return dispatch().mode; }

std::string backend_name() { return dispatch().use_simd ? "simd" : "scalar"; }

void matvec(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y) {
    if (dispatch().use_simd)
        simd::matvec(A, rows, cols, x, y);
    else
        scalar::matvec(A, rows, cols, x, y);
}

void matvec_t(const double* A, std::size_t rows, std::size_t cols, const double* d, double* out) {
    if (dispatch().use_simd)
        simd::matvec_t(A, rows, cols, d, out);
    else
        scalar::matvec_t(A, rows, cols, d, out);
}

void ger(double* A, std::size_t rows, std::size_t cols, const double* d, const double* x) {
    if (dispatch().use_simd)
        simd::ger(A, rows, cols, d, x);
    else
        scalar::ger(A, rows, cols, d, x);
}

double dot(const double* a, const double* b, std::size_t n) {
    return dispatch().use_simd ? simd::dot(a, b, n) : scalar::dot(a, b, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    if (dispatch().use_simd)
        simd::axpy(a, x, y, n);
    else
        scalar::axpy(a, x, y, n);
}

}  // namespace nsmc::kern
