#include "nsmc/kernels.hpp"

namespace nsmc::kern::scalar {

void matvec(const double* A, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = A + i * cols;
        double acc = 0.0;
        for (std::size_t j = 0; j < cols; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
}

void matvec_t(const double* A, std::size_t rows, std::size_t cols, const double* d, double* out) {
    for (std::size_t j = 0; j < cols; ++j) out[j] = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = A + i * cols;
        const double di = d[i];
        for (std::size_t j = 0; j < cols; ++j) out[j] += di * row[j];
    }
}

void ger(double* A, std::size_t rows, std::size_t cols, const double* d, const double* x) {
    for (std::size_t i = 0; i < rows; ++i) {
        double* row = A + i * cols;
        const double di = d[i];
        for (std::size_t j = 0; j < cols; ++j) row[j] += di * x[j];
    }
}

double dot(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace nsmc::kern::scalar
