// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "sdpo/denoiser.hpp"

namespace sdpo {

struct AdamWOptions {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-4;
    double max_grad_norm = 1.0;  // <= 0 disables clipping
};

/// Decoupled-weight-decay Adam with global gradient-norm clipping.
class AdamW {
public:
    AdamW() = default;
    AdamW(std::size_t num_params, AdamWOptions options);

    /// Clips `grad` in place, then updates `params`. Returns the pre-clip norm.
    double step(DenoiserParams& params, ParamGradient& grad);

    [[nodiscard]] const AdamWOptions& options() const { return options_; }
    void set_lr(double lr) { options_.lr = lr; }
    [[nodiscard]] std::uint64_t step_count() const { return t_; }

    // Checkpoint access.
    [[nodiscard]] const std::vector<double>& first_moment() const { return m_; }
    [[nodiscard]] const std::vector<double>& second_moment() const { return v_; }
    void restore(std::vector<double> m, std::vector<double> v, std::uint64_t t);

private:
    AdamWOptions options_;
    std::vector<double> m_;
    std::vector<double> v_;
    std::uint64_t t_ = 0;
};

}  // namespace sdpo
