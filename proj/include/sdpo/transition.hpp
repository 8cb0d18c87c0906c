// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sdpo/schedule.hpp"

namespace sdpo {

using PromptId = std::size_t;

/// One reverse step x_t -> x_prev together with the coefficients it was
/// sampled under, so the density can be re-evaluated under other parameters.
struct Transition {
    SamplerStep step;
    PromptId c = 0;
    std::vector<double> x_t;
    std::vector<double> x_prev;
    std::vector<double> mean;  // posterior mean under the sampling-time parameters
    double logprob = 0.0;      // log N(x_prev; mean, sigma^2 I) at sampling time

    [[nodiscard]] std::size_t t() const { return step.t; }
};

/// mean = (x_t - beta / sqrt(1 - abar) * eps) / sqrt(alpha)
std::vector<double> posterior_mean(std::span<const double> x_t, std::span<const double> eps,
                                   const SamplerStep& step);

/// d mean / d eps, the same scalar for every coordinate.
double posterior_mean_eps_coefficient(const SamplerStep& step);

/// log N(x; mean, sigma^2 I). Throws DensityError when sigma == 0.
double gaussian_logpdf(std::span<const double> x, std::span<const double> mean, double sigma);

}  // namespace sdpo
