// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// Discrete noise schedules, the forward noising process, predicted original
// samples and strided sub-schedules for few-step sampling.
//
// Step indices run 0..T-1. Index T-1 is the noisiest state and is visited
// first when sampling; index 0 is the last denoising step, whose output is the
// clean sample.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sdpo {

enum class ScheduleKind { linear, cosine };

struct ScheduleOptions {
    /// Sampling-only mode: the final transition becomes deterministic. Its
    /// log-density is then undefined and training must skip it.
    bool deterministic_last_step = false;
};

struct NoiseSchedule {
    std::size_t num_steps = 0;
    std::vector<double> betas;
    std::vector<double> alphas;
    std::vector<double> alpha_bars;
    std::vector<double> sigmas;
    bool deterministic_last_step = false;

    [[nodiscard]] std::size_t size() const { return num_steps; }
};

NoiseSchedule build_schedule(std::size_t num_steps, double beta_min, double beta_max, ScheduleKind kind,
                             ScheduleOptions options = {});

/// Defaults used by the toy experiments.
inline constexpr double kDefaultBetaMin = 1e-4;
inline constexpr double kDefaultBetaMax = 0.2;

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise
std::vector<double> forward_noise(std::span<const double> x0, std::size_t t, std::span<const double> noise,
                                  const NoiseSchedule& schedule);

/// x0_hat = (x_t - sqrt(1 - abar) eps_hat) / sqrt(abar)
std::vector<double> predict_original(std::span<const double> x_t, std::span<const double> eps_hat,
                                     double alpha_bar);
std::vector<double> predict_original(std::span<const double> x_t, std::span<const double> eps_hat, std::size_t t,
                                     const NoiseSchedule& schedule);

struct StridedSchedule {
    NoiseSchedule base;
    /// Strictly increasing base-step indices.
    std::vector<std::size_t> selected_steps;

    [[nodiscard]] std::size_t size() const { return selected_steps.size(); }
};

/// Evenly spaced selection of K steps counted down from the noisiest one:
/// step_i = (T-1) - ceil(i (T-1) / (K-1)) for i = 0..K-1. K = 1 keeps only
/// step T-1; K = T is the identity.
StridedSchedule stride(const NoiseSchedule& schedule, std::size_t k);

/// Coefficients of one reverse transition from a state at base step `t` to the
/// next visited state (base step `t_next`, or the clean sample).
struct SamplerStep {
    std::size_t t = 0;
    double alpha_bar = 1.0;       // at t
    double alpha_bar_next = 1.0;  // at the next visited state; 1 for the clean sample
    double alpha = 1.0;           // alpha_bar / alpha_bar_next
    double beta = 0.0;            // 1 - alpha
    double sigma = 0.0;
};

/// Reverse transitions in sampling order (noisiest first). Adjacent steps reuse
/// the base coefficients verbatim so K = T matches the base schedule bit for
/// bit. A skip from t to t' uses the DDPM posterior with alpha = abar_t/abar_t'.
/// The transition into the clean sample always uses the base schedule's sigma_0.
std::vector<SamplerStep> sampler_steps(const StridedSchedule& schedule);
std::vector<SamplerStep> sampler_steps(const NoiseSchedule& schedule);

}  // namespace sdpo
