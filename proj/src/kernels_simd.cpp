// SIMD kernel variants. AVX2+FMA on x86_64 via target attributes so the rest
// of the translation unit stays baseline; NEON on aarch64. Callers must gate
// on simd_available().

#include "nsmc/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define NSMC_SIMD_AVX2 1
#include <immintrin.h>
#elif defined(__ARM_NEON) || defined(__aarch64__)
#define NSMC_SIMD_NEON 1
#include <arm_neon.h>
#endif

namespace nsmc::kern::simd {

#ifdef NSMC_SIMD_AVX2

#define NSMC_TARGET __attribute__((target("avx2,fma")))

NSMC_TARGET
static inline double hsum256(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

NSMC_TARGET
double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + j + 4), _mm256_loadu_pd(b + j + 4), acc1);
    }
    for (; j + 4 <= n; j += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + j), _mm256_loadu_pd(b + j), acc0);
    double acc = hsum256(_mm256_add_pd(acc0, acc1));
    for (; j < n; ++j) acc += a[j] * b[j];
    return acc;
}

NSMC_TARGET
void matvec(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t i = 0; i < rows; ++i) y[i] = dot(A + i * cols, x, cols);
}

NSMC_TARGET
void matvec_t(const double* A, std::size_t rows, std::size_t cols, const double* d, double* out) {
    for (std::size_t j = 0; j < cols; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = A + i * cols;
        const __m256d di = _mm256_set1_pd(d[i]);
        std::size_t j = 0;
        for (; j + 4 <= cols; j += 4) {
            __m256d o = _mm256_loadu_pd(out + j);
            o = _mm256_fmadd_pd(di, _mm256_loadu_pd(row + j), o);
            _mm256_storeu_pd(out + j, o);
        }
        for (; j < cols; ++j) out[j] += d[i] * row[j];
    }
}

NSMC_TARGET
void ger(double* A, std::size_t rows, std::size_t cols, const double* d, const double* x) {
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = A + i * cols;
        const __m256d di = _mm256_set1_pd(d[i]);
        std::size_t j = 0;
        for (; j + 4 <= cols; j += 4) {
            __m256d r = _mm256_loadu_pd(row + j);
            r = _mm256_fmadd_pd(di, _mm256_loadu_pd(x + j), r);
            _mm256_storeu_pd(row + j, r);
        }
        for (; j < cols; ++j) row[j] += d[i] * x[j];
    }
}

NSMC_TARGET
void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d av = _mm256_set1_pd(a);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        __m256d yv = _mm256_loadu_pd(y + j);
        yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + j), yv);
        _mm256_storeu_pd(y + j, yv);
    }
    for (; j < n; ++j) y[j] += a * x[j];
}

#undef NSMC_TARGET

#elif defined(NSMC_SIMD_NEON)

double dot(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + j), vld1q_f64(b + j));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + j + 2), vld1q_f64(b + j + 2));
    }
    double acc = vaddvq_f64(acc0) + vaddvq_f64(acc1);
    for (; j < n; ++j) acc += a[j] * b[j];
    return acc;
}

void matvec(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t i = 0; i < rows; ++i) y[i] = dot(A + i * cols, x, cols);
}

void matvec_t(const double* A, std::size_t rows, std::size_t cols, const double* d, double* out) {
    for (std::size_t j = 0; j < cols; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = A + i * cols;
        const float64x2_t di = vdupq_n_f64(d[i]);
        std::size_t j = 0;
        for (; j + 2 <= cols; j += 2)
            vst1q_f64(out + j, vfmaq_f64(vld1q_f64(out + j), di, vld1q_f64(row + j)));
        for (; j < cols; ++j) out[j] += d[i] * row[j];
    }
}

void ger(double* A, std::size_t rows, std::size_t cols, const double* d, const double* x) {
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = A + i * cols;
        const float64x2_t di = vdupq_n_f64(d[i]);
        std::size_t j = 0;
        for (; j + 2 <= cols; j += 2)
            vst1q_f64(row + j, vfmaq_f64(vld1q_f64(row + j), di, vld1q_f64(x + j)));
        for (; j < cols; ++j) row[j] += d[i] * x[j];
    }
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t av = vdupq_n_f64(a);
    std::size_t j = 0;
    for (; j + 2 <= n; j += 2)
        vst1q_f64(y + j, vfmaq_f64(vld1q_f64(y + j), av, vld1q_f64(x + j)));
    for (; j < n; ++j) y[j] += a * x[j];
}

#else

// No SIMD variant on this architecture; never dispatched to.
double dot(const double* a, const double* b, std::size_t n) { return scalar::dot(a, b, n); }
void matvec(const double* A, std::size_t r, std::size_t c, const double* x, double* y) {
    scalar::matvec(A, r, c, x, y);
}
void matvec_t(const double* A, std::size_t r, std::size_t c, const double* d, double* o) {
    scalar::matvec_t(A, r, c, d, o);
}
void ger(double* A, std::size_t r, std::size_t c, const double* d, const double* x) {
    scalar::ger(A, r, c, d, x);
}
void axpy(double a, const double* x, double* y, std::size_t n) { scalar::axpy(a, x, y, n); }

#endif

}  // namespace nsmc::kern::simd
