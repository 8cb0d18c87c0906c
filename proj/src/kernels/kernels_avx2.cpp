// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// AVX2 + FMA kernels, 4 doubles per 256-bit register. This translation unit is
// the only one built with -mavx2 -mfma; nothing here may run before the
// dispatcher has confirmed CPU support.

#include <immintrin.h>

#include "kernel_tables.hpp"

namespace sdpo::kernels::detail {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d pair = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double squared_distance_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double out = hsum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        out += d * d;
    }
    return out;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_avx2(const double* w, std::size_t rows, std::size_t cols, const double* x, const double* bias,
               double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double base = bias ? bias[r] : 0.0;
        y[r] = base + dot_avx2(w + r * cols, x, cols);
    }
}

void gemv_transposed_acc_avx2(const double* w, std::size_t rows, std::size_t cols, const double* g,
                              double* y) {
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(g[r], w + r * cols, y, cols);
}

void rank1_update_avx2(double alpha, const double* u, std::size_t rows, const double* v, std::size_t cols,
                       double* w) {
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(alpha * u[r], v, w + r * cols, cols);
}

}  // namespace

const KernelTable avx2_table{
    dot_avx2,  squared_distance_avx2,    axpy_avx2,
    gemv_avx2, gemv_transposed_acc_avx2, rank1_update_avx2,
};

}  // namespace sdpo::kernels::detail
