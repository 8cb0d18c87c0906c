// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense double-precision inner loops used by the denoiser and the reward
// code. Every kernel has a scalar reference implementation and, where the
// CPU supports it, an AVX2/FMA (x86-64) or NEON (aarch64) variant. The active
// backend is chosen once at startup and can be forced with the environment
// variable SDPO_KERNELS=scalar|avx2|neon or with set_backend().
//
// Vector variants reassociate reductions and fuse multiply-adds, so they agree
// with the scalar path to rounding, not bit-for-bit. Within one backend every
// kernel is deterministic.

#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace sdpo::kernels {

enum class Backend { scalar, avx2, neon };

std::string_view backend_name(Backend b);

// True when the binary carries the variant and the running CPU supports it.
bool backend_available(Backend b);

Backend active_backend();

// Throws std::invalid_argument when the backend is not available.
void set_backend(Backend b);

// sum_i a[i] * b[i]
double dot(std::span<const double> a, std::span<const double> b);

// sum_i (a[i] - b[i])^2
double squared_distance(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// y = W x + bias, W row-major with shape (y.size(), x.size()). bias may be empty.
void gemv(std::span<const double> w, std::span<const double> x, std::span<const double> bias,
          std::span<double> y);

// y += W^T g, W row-major with shape (g.size(), y.size()).
void gemv_transposed_acc(std::span<const double> w, std::span<const double> g, std::span<double> y);

// W += alpha * u v^T, W row-major with shape (u.size(), v.size()).
void rank1_update(double alpha, std::span<const double> u, std::span<const double> v,
                  std::span<double> w);

// Raw per-backend entry points. Used by the equivalence tests; everything else
// goes through the dispatched functions above.
struct KernelTable {
    double (*dot)(const double*, const double*, std::size_t);
    double (*squared_distance)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*gemv)(const double*, std::size_t, std::size_t, const double*, const double*, double*);
    void (*gemv_transposed_acc)(const double*, std::size_t, std::size_t, const double*, double*);
    void (*rank1_update)(double, const double*, std::size_t, const double*, std::size_t, double*);
};

// nullptr when the backend is not available.
const KernelTable* table_for(Backend b);

}  // namespace sdpo::kernels
