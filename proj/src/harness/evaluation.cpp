// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdpo/harness/evaluation.hpp"

#include <cmath>

#include "sdpo/errors.hpp"

namespace sdpo {

Environment make_environment(const ExperimentConfig& config) {
    Environment env;
    env.config = config;
    env.config.validate();
    const auto& c = env.config;
    env.dims = {c.data.data_dim, c.schedule.num_steps, c.data.num_prompts, c.model.embed_dim, c.model.hidden};
    env.dataset = make_dataset(c.data, StreamKey(c.data_seed).child(StreamTag::dataset));
    env.schedule = build_schedule(c.schedule.num_steps, c.schedule.beta_min, c.schedule.beta_max, c.schedule.kind);
    env.reward.kind = c.reward.kind;
    env.reward.scale = c.reward.scale;
    for (PromptId p = 0; p < c.data.num_prompts; ++p) env.reward.targets.push_back(env.dataset.preferred_mode(p));
    env.reward.validate();
    return env;
}

std::vector<EvalRow> evaluate(const DenoiserParams& params, const Environment& env,
                              const std::vector<std::size_t>& step_counts, std::size_t num_samples,
                              std::uint64_t seed) {
    if (num_samples == 0) throw ConfigError("evaluate: need at least one sample");
    const StreamKey root = StreamKey(seed).child(StreamTag::eval);
    const std::size_t P = env.dims.num_prompts;

    std::vector<std::vector<double>> inits(num_samples);
    for (std::size_t i = 0; i < num_samples; ++i) inits[i] = draw_initial_noise(env.dims.data_dim, root.child(i));

    std::vector<EvalRow> rows;
    for (auto k : step_counts) {
        if (k == 0 || k > env.schedule.num_steps) {
            throw ConfigError("evaluate: step count " + std::to_string(k) + " outside [1, T]");
        }
        const StridedSchedule sched = stride(env.schedule, k);
        double sum = 0.0;
        double sum_sq = 0.0;
        for (std::size_t i = 0; i < num_samples; ++i) {
            const PromptId c = i % P;
            const Trajectory traj = sample_trajectory(params, c, inits[i], sched, root.child(i));
            const double r = env.reward(traj.final_sample(), c);
            sum += r;
            sum_sq += r * r;
        }
        const double n = static_cast<double>(num_samples);
        const double mean = sum / n;
        const double var = num_samples > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
        rows.push_back({k, mean, std::sqrt(var / n)});
    }
    return rows;
}

const EvalRow& eval_row(const std::vector<EvalRow>& rows, std::size_t steps) {
    for (const auto& r : rows) {
        if (r.steps == steps) return r;
    }
    throw LookupError("no eval row for " + std::to_string(steps) + " steps");
}

}  // namespace sdpo
