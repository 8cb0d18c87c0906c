// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "kernel_tables.hpp"

namespace sdpo::kernels {
namespace {

bool cpu_has_avx2_fma() {
#if defined(SDPO_HAVE_AVX2_KERNELS) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend pick_default() {
    if (const char* forced = std::getenv("SDPO_KERNELS")) {
        const std::string name(forced);
        if (name == "scalar") return Backend::scalar;
        if (name == "avx2" && backend_available(Backend::avx2)) return Backend::avx2;
        if (name == "neon" && backend_available(Backend::neon)) return Backend::neon;
    }
    if (backend_available(Backend::avx2)) return Backend::avx2;
    if (backend_available(Backend::neon)) return Backend::neon;
    return Backend::scalar;
}

std::atomic<const KernelTable*>& active_table() {
    static std::atomic<const KernelTable*> table{table_for(pick_default())};
    return table;
}

std::atomic<Backend>& active_tag() {
    static std::atomic<Backend> tag{pick_default()};
    return tag;
}

void check_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(std::string("kernel size mismatch in ") + what);
}

const KernelTable& current() { return *active_table().load(std::memory_order_relaxed); }

}  // namespace

std::string_view backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "unknown";
}

bool backend_available(Backend b) {
    switch (b) {
        case Backend::scalar: return true;
        case Backend::avx2: return cpu_has_avx2_fma();
        case Backend::neon:
#if defined(SDPO_HAVE_NEON_KERNELS)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const KernelTable* table_for(Backend b) {
    if (!backend_available(b)) return nullptr;
    switch (b) {
        case Backend::scalar: return &detail::scalar_table;
        case Backend::avx2:
#if defined(SDPO_HAVE_AVX2_KERNELS)
            return &detail::avx2_table;
#else
            return nullptr;
#endif
        case Backend::neon:
#if defined(SDPO_HAVE_NEON_KERNELS)
            return &detail::neon_table;
#else
            return nullptr;
#endif
    }
    return nullptr;
}

Backend active_backend() { return active_tag().load(std::memory_order_relaxed); }

void set_backend(Backend b) {
    const KernelTable* table = table_for(b);
    if (!table) throw std::invalid_argument("kernel backend not available: " + std::string(backend_name(b)));
    active_table().store(table, std::memory_order_relaxed);
    active_tag().store(b, std::memory_order_relaxed);
}

double dot(std::span<const double> a, std::span<const double> b) {
    check_same_size(a.size(), b.size(), "dot");
    return current().dot(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
    check_same_size(a.size(), b.size(), "squared_distance");
    return current().squared_distance(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
    check_same_size(x.size(), y.size(), "axpy");
    current().axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> w, std::span<const double> x, std::span<const double> bias,
          std::span<double> y) {
    check_same_size(w.size(), y.size() * x.size(), "gemv");
    if (!bias.empty()) check_same_size(bias.size(), y.size(), "gemv bias");
    current().gemv(w.data(), y.size(), x.size(), x.data(), bias.empty() ? nullptr : bias.data(), y.data());
}

void gemv_transposed_acc(std::span<const double> w, std::span<const double> g, std::span<double> y) {
    check_same_size(w.size(), g.size() * y.size(), "gemv_transposed_acc");
    current().gemv_transposed_acc(w.data(), g.size(), y.size(), g.data(), y.data());
}

void rank1_update(double alpha, std::span<const double> u, std::span<const double> v, std::span<double> w) {
    check_same_size(w.size(), u.size() * v.size(), "rank1_update");
    current().rank1_update(alpha, u.data(), u.size(), v.data(), v.size(), w.data());
}

}  // namespace sdpo::kernels
