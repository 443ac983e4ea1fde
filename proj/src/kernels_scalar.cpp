#include "kbqa/kernels.hpp"

namespace kbqa::kern {

namespace {

void add_scalar(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_scalar(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_scalar(const double* a, const double* b, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_scalar(const double* a, double c, double* out, size_t n) {
    for (size_t i = 0; i < n; ++i) out[i] = c * a[i];
}

void axpy_scalar(double c, const double* x, double* y, size_t n) {
    for (size_t i = 0; i < n; ++i) y[i] += c * x[i];
}

// Blocked with 4 independent accumulators; the AVX2 variant reproduces this
// exact reduction tree, so results match bitwise.
double dot_scalar(const double* a, const double* b, size_t n) {
    double acc0 = 0.0, acc1 = 0.0, acc2 = 0.0, acc3 = 0.0;
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 += a[i] * b[i];
        acc1 += a[i + 1] * b[i + 1];
        acc2 += a[i + 2] * b[i + 2];
        acc3 += a[i + 3] * b[i + 3];
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return ((acc0 + acc1) + (acc2 + acc3)) + tail;
}

} // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table = {
        "scalar", add_scalar, sub_scalar, mul_scalar, scale_scalar, axpy_scalar, dot_scalar,
    };
    return table;
}

} // namespace kbqa::kern
