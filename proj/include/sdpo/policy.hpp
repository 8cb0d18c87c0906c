// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// Denoising as an MDP: sampling trajectories under the Gaussian reverse
// policy, paired trajectories that share prompt and initial noise, and exact
// per-transition log-densities.
//
// Per-step arrays in a Trajectory are ordered by ascending step index
// (position 0 is the last denoising step). Sampling visits them in reverse.
// For a full schedule, position == step index t.

#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "sdpo/denoiser.hpp"
#include "sdpo/rng.hpp"
#include "sdpo/schedule.hpp"
#include "sdpo/transition.hpp"

namespace sdpo {

struct Trajectory {
    PromptId c = 0;
    std::vector<double> x_init;
    std::vector<Transition> transitions;    // ascending step
    std::vector<std::vector<double>> denoised;  // x0_hat per step, ascending step

    [[nodiscard]] std::size_t size() const { return transitions.size(); }
    /// The clean sample produced by the last denoising step.
    [[nodiscard]] const std::vector<double>& final_sample() const { return transitions.front().x_prev; }
};

struct TrajectoryPair {
    Trajectory a;
    Trajectory b;
};

/// Reverse-noise streams are derived from `key` per step as
/// key.child(reverse_noise).child(t).
Trajectory sample_trajectory(const DenoiserParams& params, PromptId c, std::span<const double> x_init,
                             const StridedSchedule& schedule, const StreamKey& key);
Trajectory sample_trajectory(const DenoiserParams& params, PromptId c, std::span<const double> x_init,
                             const NoiseSchedule& schedule, const StreamKey& key);

/// Draws x_init ~ N(0, I) from key.child(init_noise) and runs both sides with
/// the disjoint substreams key.child(0) and key.child(1).
TrajectoryPair sample_pair(const DenoiserParams& params, PromptId c, const StridedSchedule& schedule,
                           const StreamKey& key);
TrajectoryPair sample_pair(const DenoiserParams& params, PromptId c, const NoiseSchedule& schedule,
                           const StreamKey& key);

std::vector<double> draw_initial_noise(std::size_t dim, const StreamKey& key);

/// log N(x_prev; mean_params(x_t, t, c), sigma_t^2 I)
double logprob_under(const DenoiserParams& params, const Transition& transition);

/// logprob_under(params) - logprob_under(ref_params)
double log_ratio(const DenoiserParams& params, const DenoiserParams& ref_params, const Transition& transition);

/// Line-delimited JSON, one record per transition, in sampling order:
/// {"epoch","batch","pair","side","t","c","x_t","x_prev","logprob"}
void dump_trajectory(std::ostream& out, const Trajectory& traj, std::size_t epoch, std::size_t batch,
                     std::size_t pair, char side);

}  // namespace sdpo
