// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration: one JSON document with a default for every field.
// Unknown keys are rejected so typos do not silently fall back to defaults.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "sdpo/baselines.hpp"
#include "sdpo/credit.hpp"
#include "sdpo/denoiser.hpp"
#include "sdpo/dense_reward.hpp"
#include "sdpo/schedule.hpp"
#include "sdpo/sdpo.hpp"

namespace sdpo {

enum class Algo { sdpo, ddpo, rebel };

std::string_view to_string(Algo a);
Algo algo_from_string(std::string_view name);

struct ScheduleSpec {
    std::size_t num_steps = 10;
    ScheduleKind kind = ScheduleKind::linear;
    double beta_min = kDefaultBetaMin;
    double beta_max = kDefaultBetaMax;
};

struct ModelSpec {
    std::size_t embed_dim = 8;
    std::size_t hidden = 64;
    double init_scale = 1.0;
};

struct RewardSpec {
    RewardKind kind = RewardKind::target_distance;
    double scale = 0.5;
};

struct EvalSpec {
    std::vector<std::size_t> step_counts{1, 2, 4, 8, 16, 10};
    std::size_t every = 5;
    std::size_t num_samples = 256;
};

/// A named training regime for the instability study: which algorithm and
/// which sampling step counts (several means one is drawn per batch).
struct Regime {
    std::string name;
    Algo algo = Algo::ddpo;
    std::vector<std::size_t> step_counts;
};

struct InstabilitySpec {
    std::size_t num_seeds = 5;
    std::size_t final_window = 20;    // epochs averaged into the final reward
    std::size_t running_window = 10;  // epochs in the running mean for collapse detection
    std::vector<Regime> regimes;
};

struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::uint64_t data_seed = 1234;
    DatasetSpec data;
    ScheduleSpec schedule;
    ModelSpec model;
    PretrainOptions pretrain;
    RewardSpec reward;
    Algo algo = Algo::sdpo;
    SdpoConfig sdpo;
    BaselineConfig baseline;
    DenseStrategy dense_strategy = DenseStrategy::adaptive3;
    NormalizationMode normalization_mode = NormalizationMode::per_step_prompt;
    std::size_t epochs = 200;
    std::vector<std::size_t> train_step_counts;  // empty: full schedule
    EvalSpec eval;
    std::vector<std::uint64_t> ablation_seeds{0, 1, 2, 3, 4};
    InstabilitySpec instability;
    std::size_t similarity_trajectories = 64;
    std::filesystem::path output_dir = "runs/default";

    /// Throws ConfigError on any inconsistency. Eval step counts above T are
    /// dropped rather than rejected.
    void validate();
};

ExperimentConfig default_config();
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& path);

/// FNV-1a over the canonical (sorted-key, compact) JSON form.
std::string config_digest(const ExperimentConfig& config);

/// Config path resolution: explicit flag, then $SDPO_CONFIG, then none.
inline constexpr const char* kConfigEnvVar = "SDPO_CONFIG";
std::filesystem::path resolve_config_path(const std::string& flag_value);

std::string code_version();

}  // namespace sdpo
