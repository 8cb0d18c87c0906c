// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reward functions and dense per-step reward prediction from a small number
// of true reward queries on the predicted originals x0_hat_t.
//
// Step-indexed arrays (DenseRewards::values, denoised inputs) use ascending
// step order: element t belongs to step t, element T-1 to the first
// (noisiest) denoising step.

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sdpo/policy.hpp"
#include "sdpo/rng.hpp"

namespace sdpo {

enum class RewardKind { target_distance, norm_penalty };

/// target_distance: R(x, c) = exp(-||x - target_c||^2 / scale)   (max 1)
/// norm_penalty:    R(x, c) = -||x||^2 / scale                   (max 0)
struct RewardFn {
    RewardKind kind = RewardKind::target_distance;
    std::vector<std::vector<double>> targets;
    double scale = 1.0;

    double operator()(std::span<const double> x, PromptId c) const;
    /// Least upper bound over x.
    [[nodiscard]] double supremum() const { return kind == RewardKind::target_distance ? 1.0 : 0.0; }
    void validate() const;
};

/// Callable used for every true reward query; tests wrap it to count calls.
using RewardQuery = std::function<double(std::span<const double>, PromptId)>;

enum class DenseStrategy { adaptive3, random3, fixed3, sim2, interp2, copy1, full };

std::string_view to_string(DenseStrategy s);
DenseStrategy dense_strategy_from_string(std::string_view name);
inline constexpr DenseStrategy kAllDenseStrategies[] = {
    DenseStrategy::adaptive3, DenseStrategy::random3, DenseStrategy::fixed3, DenseStrategy::sim2,
    DenseStrategy::interp2,   DenseStrategy::copy1,   DenseStrategy::full};

/// Number of reward queries a strategy spends on a T-step trajectory.
std::size_t query_count(DenseStrategy s, std::size_t num_steps);

/// Smallest T a strategy accepts.
std::size_t min_steps(DenseStrategy s);

struct DenseRewards {
    std::vector<double> values;               // ascending step
    std::vector<std::size_t> queried_steps;   // ascending
    std::optional<std::size_t> anchor;
    DenseStrategy strategy = DenseStrategy::adaptive3;
};

/// Similarities below this floor are raised to it before they are used as
/// interpolation weights.
inline constexpr double kSimilarityFloor = 1e-6;

/// <u, v> / (||u|| ||v||); 0 when either vector is zero.
double cosine_sim(std::span<const double> u, std::span<const double> v);

/// argmin over interior steps 1..T-2 of sim(x_t, x_{T-1}) + sim(x_t, x_0);
/// ties go to the smaller index. Throws ConfigError when T < 3.
std::size_t select_anchor(std::span<const std::vector<double>> denoised);

/// `rng` is only consulted by random3 and may be null otherwise.
DenseRewards predict_dense(const Trajectory& traj, const RewardQuery& reward, DenseStrategy strategy,
                           RngStream* rng = nullptr);

/// Same, on raw step-ordered predicted originals.
DenseRewards predict_dense(std::span<const std::vector<double>> denoised, PromptId c, const RewardQuery& reward,
                           DenseStrategy strategy, RngStream* rng = nullptr);

struct SimilarityMetrics {
    double cosine = 0.0;
    double l1 = 0.0;
    double l2 = 0.0;
};

/// Each value array is standardized on its own (zero mean, unit variance,
/// +1e-8 in the denominator) so a constant prediction maps to the zero
/// vector; cosine of a zero vector is 0. The target must not be constant.
SimilarityMetrics similarity_to_target(const DenseRewards& predicted, const DenseRewards& target);

/// Corpus version: trajectories are standardized one by one and the metrics
/// are taken over the concatenation of all standardized arrays.
SimilarityMetrics similarity_to_target(std::span<const DenseRewards> predicted, std::span<const DenseRewards> target);

}  // namespace sdpo
