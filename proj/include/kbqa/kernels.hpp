#pragma once

#include <cstddef>
#include <string>

namespace kbqa::kern {

// Double-precision inner loops behind the tensor engine. Every entry has a
// scalar reference implementation and, on x86-64 with AVX2, a vectorized
// variant selected at runtime. Variants are bit-exact equivalents: identical
// per-element operation order, dot uses the same 4-lane blocked accumulation
// in both, and the kernels TU is built with -ffp-contract=off.
struct KernelTable {
    const char* name;
    // out[i] = a[i] + b[i]
    void (*add)(const double* a, const double* b, double* out, size_t n);
    // out[i] = a[i] - b[i]
    void (*sub)(const double* a, const double* b, double* out, size_t n);
    // out[i] = a[i] * b[i]
    void (*mul)(const double* a, const double* b, double* out, size_t n);
    // out[i] = c * a[i]
    void (*scale)(const double* a, double c, double* out, size_t n);
    // y[i] += c * x[i]
    void (*axpy)(double c, const double* x, double* y, size_t n);
    // sum_i a[i] * b[i], 4-lane blocked accumulation
    double (*dot)(const double* a, const double* b, size_t n);
};

const KernelTable& scalar_kernels();

// AVX2 table, or nullptr when the build has no AVX2 support compiled in.
const KernelTable* avx2_kernels();

// Runtime-selected table: AVX2 when the CPU supports it, scalar otherwise.
// KBQA_KERNELS=scalar|avx2 forces a choice (avx2 falls back with a warning
// if unsupported). Selection happens once, on first call.
const KernelTable& kernels();

} // namespace kbqa::kern
