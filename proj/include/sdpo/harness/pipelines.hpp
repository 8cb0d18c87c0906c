// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// Library entry points behind the command-line subcommands. Each function
// runs in-process and returns its results; a RunWriter, when given, persists
// them under the run's output directory.

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "sdpo/harness/evaluation.hpp"

namespace sdpo {

class RunWriter;

struct TrainRecord {
    EpochMetrics metrics;
    Algo algo = Algo::sdpo;
    std::size_t samples_consumed = 0;
    double wall_ms = 0.0;  // not part of the deterministic payload
};

struct EvalRecord {
    std::size_t epoch = 0;
    std::size_t samples_consumed = 0;
    std::vector<EvalRow> rows;
};

struct FinetuneResult {
    DenoiserParams params;
    std::vector<TrainRecord> train;
    std::vector<EvalRecord> evals;
    bool diverged = false;
    std::string error;
};

/// Fresh initialization followed by noise-prediction pretraining, both seeded
/// by config.seed.
PretrainResult run_pretrain(const Environment& env);

/// Pretrained parameters for (config, seed), memoized per process.
const DenoiserParams& pretrained_for_seed(const Environment& env, std::uint64_t seed);

/// Runs config.epochs epochs of config.algo from `init`. Evaluates before the
/// first epoch and every eval.every epochs (and after the last one). A
/// divergence stops the run and is reported in the result, with params left at
/// the last good state.
FinetuneResult run_finetune(const Environment& env, const DenoiserParams& init, RunWriter* writer = nullptr);

/// Training epochs of any algorithm driven from one place.
class Trainer {
public:
    Trainer(const Environment& env, std::size_t num_params);

    EpochMetrics epoch(DenoiserParams& params, std::size_t epoch_index, std::ostream* dump = nullptr);

    void save(Checkpoint& ckpt) const;
    void load(const Checkpoint& ckpt);

private:
    const Environment& env_;
    std::vector<StridedSchedule> schedules_;
    std::optional<SdpoState> sdpo_;
    std::optional<BaselineState> baseline_;
};

/// Named config variants for one ablation axis.
struct AblationVariant {
    std::string name;
    ExperimentConfig config;
};

std::vector<AblationVariant> ablation_variants(const ExperimentConfig& base, const std::string& axis);
inline const std::vector<std::string> kAblationAxes = {"dense_strategy", "gamma", "normalization", "lambda_order",
                                                       "update_mode"};

struct AblationRun {
    std::string variant;
    std::uint64_t seed = 0;
    FinetuneResult result;
};

std::vector<AblationRun> run_ablation(const ExperimentConfig& base, const std::string& axis,
                                      const std::filesystem::path& out_dir = {});

/// Number of times the trailing-window mean of `rewards` falls to half its
/// running peak or less (relative to |peak|); the peak resets after each event.
std::size_t count_collapse_events(const std::vector<double>& rewards, std::size_t window);

/// Unbiased sample variance; 0 for fewer than two values.
double sample_variance(const std::vector<double>& values);

struct RegimeSeedResult {
    std::uint64_t seed = 0;
    double final_reward = 0.0;
    std::size_t collapse_events = 0;
    bool diverged = false;
    std::vector<double> reward_trace;
};

struct RegimeResult {
    Regime regime;
    std::vector<RegimeSeedResult> seeds;
    double mean_final = 0.0;
    double variance_final = 0.0;
    std::size_t collapse_events = 0;
};

std::vector<RegimeResult> run_instability(const ExperimentConfig& config, const std::filesystem::path& out_dir = {});

struct SimilarityRow {
    DenseStrategy strategy = DenseStrategy::full;
    SimilarityMetrics metrics;
    std::size_t queries_per_trajectory = 0;
};

/// Samples num_trajectories full-length trajectories (prompts cycled) and
/// compares every strategy's dense rewards with the fully queried ones.
std::vector<SimilarityRow> run_reward_similarity(const Environment& env, const DenoiserParams& params,
                                                 std::size_t num_trajectories, std::uint64_t seed);

/// Checkpoint with parameters, optimizer/statistics state and run position.
void save_training_checkpoint(const std::filesystem::path& path, const DenoiserParams& params,
                              const Trainer* trainer, std::size_t epoch, std::size_t samples_consumed);

}  // namespace sdpo
