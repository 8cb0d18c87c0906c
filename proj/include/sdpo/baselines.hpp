// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// Sparse-reward baselines. DDPO is plain REINFORCE on the final reward with
// per-prompt advantage normalization. REBEL regresses per-step log-ratio
// differences of a trajectory pair onto the difference of their normalized
// final rewards. Both spend the same number of trajectories per epoch as SDPO.

#pragma once

#include <cstddef>
#include <vector>

#include "sdpo/adamw.hpp"
#include "sdpo/credit.hpp"
#include "sdpo/policy.hpp"
#include "sdpo/sdpo.hpp"

namespace sdpo {

struct BaselineConfig {
    double lr = 1e-4;
    double eta = 1.0;  // REBEL only
    std::size_t batches_per_epoch = 4;
    std::size_t trajectories_per_batch = 16;  // REBEL samples half as many pairs

    void validate() const;
};

struct BaselineState {
    BaselineConfig config;
    RunningStatTable stats;
    AdamW optimizer;

    BaselineState(const BaselineConfig& config, std::size_t num_params);
};

/// -(1/n) sum_i adv_i sum_t log p_params(transition_it). Deterministic
/// transitions (sigma = 0) carry no density and are skipped.
double ddpo_objective(const std::vector<Trajectory>& trajectories, const std::vector<double>& advantages,
                      const DenoiserParams& params, ParamGradient* grad);

/// (1/n) sum_i sum_t (delta_rho_it / eta - delta_adv_i)^2 with
/// delta_rho_it = rho(a_it) - rho(b_it) against ref_params.
double rebel_objective(const std::vector<TrajectoryPair>& pairs, const std::vector<double>& delta_adv,
                       const DenoiserParams& params, const DenoiserParams& ref_params, double eta,
                       ParamGradient* grad);

/// One optimizer update per sampling batch; each batch is sampled with the
/// current parameters.
EpochMetrics ddpo_epoch(DenoiserParams& params, BaselineState& state, const EpochContext& ctx);

/// All batches are sampled under the epoch-start parameters, which serve as
/// the reference; one optimizer update per batch follows.
EpochMetrics rebel_epoch(DenoiserParams& params, BaselineState& state, const EpochContext& ctx);

}  // namespace sdpo
