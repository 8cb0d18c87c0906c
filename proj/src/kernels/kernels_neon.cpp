// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// NEON kernels for aarch64, 2 doubles per 128-bit register. NEON is mandatory
// on aarch64 so no runtime probe is needed.

#include <arm_neon.h>

#include "kernel_tables.hpp"

namespace sdpo::kernels::detail {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vfmaq_f64(acc0, vld1q_f64(a + i), vld1q_f64(b + i));
        acc1 = vfmaq_f64(acc1, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
    }
    double acc = vaddvq_f64(vaddq_f64(acc0, acc1));
    for (; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double squared_distance_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        const float64x2_t d = vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i));
        acc = vfmaq_f64(acc, d, d);
    }
    double out = vaddvq_f64(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        out += d * d;
    }
    return out;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(y + i, vfmaq_f64(vld1q_f64(y + i), va, vld1q_f64(x + i)));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_neon(const double* w, std::size_t rows, std::size_t cols, const double* x, const double* bias,
               double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = (bias ? bias[r] : 0.0) + dot_neon(w + r * cols, x, cols);
}

void gemv_transposed_acc_neon(const double* w, std::size_t rows, std::size_t cols, const double* g,
                              double* y) {
    for (std::size_t r = 0; r < rows; ++r) axpy_neon(g[r], w + r * cols, y, cols);
}

void rank1_update_neon(double alpha, const double* u, std::size_t rows, const double* v, std::size_t cols,
                       double* w) {
    for (std::size_t r = 0; r < rows; ++r) axpy_neon(alpha * u[r], v, w + r * cols, cols);
}

}  // namespace

const KernelTable neon_table{
    dot_neon,  squared_distance_neon,    axpy_neon,
    gemv_neon, gemv_transposed_acc_neon, rank1_update_neon,
};

}  // namespace sdpo::kernels::detail
