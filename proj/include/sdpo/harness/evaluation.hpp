// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "sdpo/harness/config.hpp"

namespace sdpo {

/// Objects derived from a config that every pipeline shares.
struct Environment {
    ExperimentConfig config;
    DenoiserDims dims;
    SyntheticDataset dataset;
    NoiseSchedule schedule;
    RewardFn reward;
};

/// The dataset depends on data_seed only, so runs with different seeds
/// solve the same task.
Environment make_environment(const ExperimentConfig& config);

struct EvalRow {
    std::size_t steps = 0;
    double mean_reward = 0.0;
    double std_error = 0.0;
};

/// Mean final-sample reward per step count under strided sampling. Sample i
/// uses prompt i mod P and the same initial noise and per-step reverse noise
/// for every step count.
std::vector<EvalRow> evaluate(const DenoiserParams& params, const Environment& env,
                              const std::vector<std::size_t>& step_counts, std::size_t num_samples,
                              std::uint64_t seed);

/// Looks up the row for `steps`; throws LookupError when absent.
const EvalRow& eval_row(const std::vector<EvalRow>& rows, std::size_t steps);

}  // namespace sdpo
