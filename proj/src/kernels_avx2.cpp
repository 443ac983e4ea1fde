// AVX2 variants. This TU is compiled with -mavx2 and must only be entered
// after the dispatcher has confirmed CPU support.

#include "kbqa/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define KBQA_HAVE_AVX2_BUILD 1
#include <immintrin.h>
#else
#define KBQA_HAVE_AVX2_BUILD 0
#endif

namespace kbqa::kern {

#if KBQA_HAVE_AVX2_BUILD

namespace {

void add_avx2(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void sub_avx2(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] - b[i];
}

void mul_avx2(const double* a, const double* b, double* out, size_t n) {
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale_avx2(const double* a, double c, double* out, size_t n) {
    const __m256d vc = _mm256_set1_pd(c);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(vc, _mm256_loadu_pd(a + i)));
    }
    for (; i < n; ++i) out[i] = c * a[i];
}

// mul then add, not FMA: keeps rounding identical to the scalar reference.
void axpy_avx2(double c, const double* x, double* y, size_t n) {
    const __m256d vc = _mm256_set1_pd(c);
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d prod = _mm256_mul_pd(vc, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) y[i] += c * x[i];
}

double dot_avx2(const double* a, const double* b, size_t n) {
    __m256d acc = _mm256_setzero_pd();
    size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    // Same reduction tree as the scalar reference.
    return ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + tail;
}

} // namespace

const KernelTable* avx2_kernels() {
    static const KernelTable table = {
        "avx2", add_avx2, sub_avx2, mul_avx2, scale_avx2, axpy_avx2, dot_avx2,
    };
    return &table;
}

#else

const KernelTable* avx2_kernels() { return nullptr; }

#endif

} // namespace kbqa::kern
