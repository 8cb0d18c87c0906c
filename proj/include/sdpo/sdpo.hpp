// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// Stepwise diffusion policy optimization: a per-step squared regression of
// weighted log-ratio differences onto advantage differences, with a clipped
// twin objective and the larger of the two being minimized. Training epochs
// sample trajectory pairs under frozen reference parameters, turn a few
// reward queries into dense per-step advantages and take one optimizer step
// per (shuffled) step index.

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "sdpo/adamw.hpp"
#include "sdpo/credit.hpp"
#include "sdpo/dense_reward.hpp"
#include "sdpo/policy.hpp"

namespace sdpo {

enum class WeightingOrder { forward, reverse };
enum class UpdateMode { step_shuffled, step_accumulated, stepwise_no_shuffle };

std::string_view to_string(WeightingOrder o);
std::string_view to_string(UpdateMode m);
WeightingOrder weighting_order_from_string(std::string_view name);
UpdateMode update_mode_from_string(std::string_view name);

struct SdpoConfig {
    double eta = 1.0;
    double clip_eps = 1e-4;
    double gamma = 0.99;
    bool use_returns = true;  // false: regress on normalized per-step rewards directly
    double lambda_decay = 0.99;
    double lr = 5e-5;
    std::size_t batches_per_epoch = 4;
    std::size_t pairs_per_batch = 8;
    WeightingOrder weighting_order = WeightingOrder::forward;
    UpdateMode update_mode = UpdateMode::step_shuffled;

    void validate() const;
};

/// Normalized advantages of both sides of a pair, ascending step order.
struct PairAdvantages {
    std::vector<double> a;
    std::vector<double> b;
};

struct StepLoss {
    double rho_a = 0.0;
    double rho_b = 0.0;
    double delta_rho = 0.0;
    double delta_rho_clipped = 0.0;
    double delta_adv = 0.0;
    double weight = 0.0;
    double unclipped = 0.0;
    double clipped = 0.0;
    double chosen = 0.0;
    bool clipped_branch = false;  // true only when the clipped value is strictly larger
};

/// lambda^(T-t-1) / eta for the forward order, lambda^t / eta for the reverse
/// order, with t the position of the step in a T-step trajectory.
double step_weight(std::size_t t, std::size_t num_steps, const SdpoConfig& config);

StepLoss step_loss(const TrajectoryPair& pair, std::size_t t, const DenoiserParams& params,
                   const DenoiserParams& ref_params, const PairAdvantages& adv, const SdpoConfig& config);

/// Gradient of the chosen branch of step_loss.
ParamGradient step_loss_gradient(const TrajectoryPair& pair, std::size_t t, const DenoiserParams& params,
                                 const DenoiserParams& ref_params, const PairAdvantages& adv,
                                 const SdpoConfig& config);

/// grad += scale * step_loss_gradient(...); returns the loss terms.
StepLoss accumulate_step_loss_gradient(const TrajectoryPair& pair, std::size_t t, const DenoiserParams& params,
                                       const DenoiserParams& ref_params, const PairAdvantages& adv,
                                       const SdpoConfig& config, double scale, ParamGradient& grad);

/// One uniform permutation of {0..T-1} per batch.
std::vector<std::vector<std::size_t>> shuffle_steps(std::size_t num_steps, std::size_t num_batches, RngStream& rng);

/// Everything an epoch of any algorithm needs besides parameters and
/// optimizer state. With several schedules, every trajectory (or pair) slot
/// draws one uniformly; otherwise schedules.front() is used throughout.
struct EpochContext {
    std::vector<StridedSchedule> schedules;
    const RewardFn* reward = nullptr;
    std::size_t num_prompts = 1;
    std::size_t epoch = 0;
    std::uint64_t seed = 0;
    std::ostream* trajectory_dump = nullptr;

    [[nodiscard]] StreamKey epoch_key() const;
    [[nodiscard]] const StridedSchedule& schedule_for(std::size_t batch, std::size_t slot) const;
    void validate() const;
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double mean_reward_train = 0.0;
    double mean_abs_delta_rho = 0.0;
    double clip_fraction = 0.0;
    double loss = 0.0;
    std::size_t updates = 0;
    std::size_t samples = 0;       // trajectories generated this epoch
    std::size_t reward_queries = 0;
};

struct SdpoState {
    SdpoConfig config;
    DenseStrategy dense_strategy = DenseStrategy::adaptive3;
    RunningStatTable stats;
    AdamW optimizer;

    SdpoState(const SdpoConfig& config, DenseStrategy strategy, NormalizationMode mode, std::size_t num_params);
};

/// Mean over pairs of the chosen step loss, pair i evaluated at position
/// steps[i]. When `grad` is non-null the matching gradient is added to it.
double sdpo_batch_objective(const std::vector<TrajectoryPair>& pairs, const std::vector<PairAdvantages>& adv,
                            const std::vector<std::size_t>& steps, const DenoiserParams& params,
                            const DenoiserParams& ref_params, const SdpoConfig& config, ParamGradient* grad);

/// One training epoch. On a non-finite loss or gradient the parameters are
/// restored to their epoch-start values and TrainingError is thrown.
EpochMetrics sdpo_epoch(DenoiserParams& params, SdpoState& state, const EpochContext& ctx);

/// Samples the prompt of every pair or trajectory slot of one batch.
std::vector<PromptId> draw_prompts(const StreamKey& epoch_key, std::size_t batch, std::size_t count,
                                   std::size_t num_prompts);

}  // namespace sdpo
