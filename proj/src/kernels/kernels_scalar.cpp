// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference kernels. Plain left-to-right loops; the vector variants are
// checked against these.

#include "kernel_tables.hpp"

namespace sdpo::kernels::detail {
namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double squared_distance_scalar(const double* a, const double* b, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void gemv_scalar(const double* w, std::size_t rows, std::size_t cols, const double* x,
                 const double* bias, double* y) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double base = bias ? bias[r] : 0.0;
        y[r] = base + dot_scalar(w + r * cols, x, cols);
    }
}

void gemv_transposed_acc_scalar(const double* w, std::size_t rows, std::size_t cols, const double* g,
                                double* y) {
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(g[r], w + r * cols, y, cols);
}

void rank1_update_scalar(double alpha, const double* u, std::size_t rows, const double* v,
                         std::size_t cols, double* w) {
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(alpha * u[r], v, w + r * cols, cols);
}

}  // namespace

const KernelTable scalar_table{
    dot_scalar,  squared_distance_scalar,    axpy_scalar,
    gemv_scalar, gemv_transposed_acc_scalar, rank1_update_scalar,
};

}  // namespace sdpo::kernels::detail
