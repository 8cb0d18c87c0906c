// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "sdpo/harness/config.hpp"

namespace testing_support {

// Seconds-scale experiment: short pretraining, a few epochs, small evals.
inline sdpo::ExperimentConfig small_config() {
    sdpo::ExperimentConfig c = sdpo::default_config();
    c.data.data_dim = 2;
    c.data.num_prompts = 2;
    c.schedule.num_steps = 5;
    c.model.hidden = 16;
    c.pretrain.steps = 150;
    c.pretrain.batch_size = 32;
    c.pretrain.heldout_size = 64;
    c.epochs = 4;
    c.eval.step_counts = {1, 2, 5};
    c.eval.every = 2;
    c.eval.num_samples = 32;
    c.sdpo.batches_per_epoch = 2;
    c.sdpo.pairs_per_batch = 4;
    c.baseline.batches_per_epoch = 2;
    c.baseline.trajectories_per_batch = 8;
    c.instability.regimes = {{"short", sdpo::Algo::ddpo, {1}}, {"mixed", sdpo::Algo::ddpo, {1, 5}}};
    c.instability.num_seeds = 2;
    c.instability.final_window = 2;
    c.instability.running_window = 2;
    c.ablation_seeds = {0};
    c.validate();
    return c;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    const char* base = std::getenv("SDPO_TEST_TMP");
    auto dir = std::filesystem::path(base ? base : std::filesystem::temp_directory_path().string()) / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing_support
