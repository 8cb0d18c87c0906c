// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// sdpo <subcommand> [--config PATH] [--seed N] [--algo NAME] [--out DIR]
//                   [--epochs N] [--steps LIST]

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sdpo/checkpoint.hpp"
#include "sdpo/errors.hpp"
#include "sdpo/harness/metrics_io.hpp"
#include "sdpo/harness/pipelines.hpp"

namespace fs = std::filesystem;
using namespace sdpo;

namespace {

struct CommonFlags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string algo;
    std::string out;
    std::optional<std::size_t> epochs;
    std::vector<std::size_t> steps;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config, "JSON experiment config (default: $SDPO_CONFIG, else built-in defaults)");
    cmd->add_option("--seed", f.seed, "Random seed");
    cmd->add_option("--algo", f.algo, "sdpo, ddpo or rebel");
    cmd->add_option("--out", f.out, "Output directory");
    cmd->add_option("--epochs", f.epochs, "Training epochs");
    cmd->add_option("--steps", f.steps, "Comma-separated step counts to evaluate")->delimiter(',');
}

ExperimentConfig resolve(const CommonFlags& f) {
    const fs::path path = resolve_config_path(f.config);
    ExperimentConfig c = path.empty() ? default_config() : load_config(path);
    if (f.seed) c.seed = *f.seed;
    if (!f.algo.empty()) c.algo = algo_from_string(f.algo);
    if (!f.out.empty()) c.output_dir = f.out;
    if (f.epochs) c.epochs = *f.epochs;
    if (!f.steps.empty()) c.eval.step_counts = f.steps;
    c.validate();
    return c;
}

DenoiserParams pretrain_and_save(const Environment& env, const fs::path& dir) {
    const PretrainResult r = run_pretrain(env);
    Checkpoint ckpt;
    put_params(ckpt, r.params);
    save_checkpoint(dir / "pretrained.ckpt", ckpt);
    std::vector<std::vector<std::string>> rows;
    for (std::size_t i = 0; i < r.loss_trace.size(); ++i) rows.push_back({std::to_string(i), format_double(r.loss_trace[i])});
    write_csv(dir / "pretrain_loss.csv", {"step", "mse"}, rows);
    std::printf("pretrain: heldout mse %.6f -> %.6f\n", r.heldout_initial, r.heldout_final);
    return r.params;
}

void print_eval(const std::vector<EvalRow>& rows) {
    std::printf("%6s %14s %12s\n", "steps", "mean_reward", "std_error");
    for (const auto& r : rows) std::printf("%6zu %14.6f %12.6f\n", r.steps, r.mean_reward, r.std_error);
}

int cmd_pretrain(const CommonFlags& f) {
    const auto c = resolve(f);
    const auto env = make_environment(c);
    write_manifest(c.output_dir, c, "pretrain");
    const DenoiserParams params = pretrain_and_save(env, c.output_dir);
    std::printf("checkpoint digest %s\n", fnv1a_hex(serialize([&] {
                                              Checkpoint k;
                                              put_params(k, params);
                                              return k;
                                          }()))
                                              .c_str());
    return 0;
}

int cmd_finetune(const CommonFlags& f, const std::string& checkpoint) {
    const auto c = resolve(f);
    const auto env = make_environment(c);
    write_manifest(c.output_dir, c, "finetune", {{"checkpoint", checkpoint}});
    DenoiserParams init;
    if (!checkpoint.empty()) {
        init = get_params(load_checkpoint(checkpoint));
    } else if (fs::exists(c.output_dir / "pretrained.ckpt")) {
        init = get_params(load_checkpoint(c.output_dir / "pretrained.ckpt"));
    } else {
        init = pretrain_and_save(env, c.output_dir);
    }
    RunWriter writer(c.output_dir);
    const FinetuneResult res = run_finetune(env, init, &writer);
    print_eval(res.evals.front().rows);
    print_eval(res.evals.back().rows);
    if (res.diverged) {
        std::fprintf(stderr, "finetune stopped: %s (last good state in %s)\n", res.error.c_str(),
                     (c.output_dir / "last_good.ckpt").c_str());
        return 3;
    }
    return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& checkpoint, std::size_t samples) {
    const auto c = resolve(f);
    const auto env = make_environment(c);
    const fs::path path = checkpoint.empty() ? c.output_dir / "finetuned.ckpt" : fs::path(checkpoint);
    const DenoiserParams params = get_params(load_checkpoint(path));
    const auto rows = evaluate(params, env, c.eval.step_counts, samples ? samples : c.eval.num_samples, c.seed);
    print_eval(rows);
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) cells.push_back({std::to_string(r.steps), format_double(r.mean_reward), format_double(r.std_error)});
    write_csv(c.output_dir / "eval_table.csv", {"steps", "mean_reward", "std_error"}, cells);
    write_manifest(c.output_dir, c, "eval", {{"checkpoint", path.string()}});
    return 0;
}

int cmd_ablate(const CommonFlags& f, const std::string& axis) {
    const auto c = resolve(f);
    write_manifest(c.output_dir, c, "ablate", {{"axis", axis}});
    const auto runs = run_ablation(c, axis, c.output_dir);
    std::vector<std::vector<std::string>> cells;
    for (const auto& run : runs) {
        for (const auto& e : run.result.evals) {
            for (const auto& r : e.rows) {
                cells.push_back({run.variant, std::to_string(run.seed), std::to_string(e.epoch),
                                 std::to_string(e.samples_consumed), std::to_string(r.steps),
                                 format_double(r.mean_reward)});
            }
        }
        const auto& last = run.result.evals.back();
        std::printf("%-20s seed %3llu", run.variant.c_str(), static_cast<unsigned long long>(run.seed));
        for (const auto& r : last.rows) std::printf("  %zu-step %.4f", r.steps, r.mean_reward);
        std::printf("%s\n", run.result.diverged ? "  (diverged)" : "");
    }
    write_csv(c.output_dir / ("ablate_" + axis + ".csv"),
              {"variant", "seed", "epoch", "samples_consumed", "steps", "mean_reward"}, cells);
    return 0;
}

int cmd_instability(const CommonFlags& f) {
    const auto c = resolve(f);
    write_manifest(c.output_dir, c, "instability");
    const auto results = run_instability(c, c.output_dir);
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : results) {
        for (const auto& s : r.seeds) {
            cells.push_back({r.regime.name, std::to_string(s.seed), format_double(s.final_reward),
                             std::to_string(s.collapse_events), s.diverged ? "1" : "0"});
        }
        std::printf("%-12s mean %.4f  variance %.3e  collapses %zu\n", r.regime.name.c_str(), r.mean_final,
                    r.variance_final, r.collapse_events);
    }
    write_csv(c.output_dir / "instability.csv", {"regime", "seed", "final_reward", "collapse_events", "diverged"},
              cells);
    return 0;
}

int cmd_reward_sim(const CommonFlags& f, const std::string& checkpoint, std::size_t trajectories) {
    const auto c = resolve(f);
    const auto env = make_environment(c);
    const DenoiserParams params =
        checkpoint.empty() ? pretrained_for_seed(env, c.seed) : get_params(load_checkpoint(checkpoint));
    const auto rows = run_reward_similarity(env, params, trajectories ? trajectories : c.similarity_trajectories, c.seed);
    std::vector<std::vector<std::string>> cells;
    std::printf("%-10s %8s %12s %12s %12s\n", "strategy", "queries", "cosine", "l1", "l2");
    for (const auto& r : rows) {
        std::printf("%-10s %8zu %12.4g %12.4g %12.4g\n", std::string(to_string(r.strategy)).c_str(),
                    r.queries_per_trajectory, r.metrics.cosine, r.metrics.l1, r.metrics.l2);
        cells.push_back({std::string(to_string(r.strategy)), std::to_string(r.queries_per_trajectory),
                         format_double(r.metrics.cosine), format_double(r.metrics.l1), format_double(r.metrics.l2)});
    }
    write_csv(c.output_dir / "reward_similarity.csv", {"strategy", "queries", "cosine", "l1", "l2"}, cells);
    write_manifest(c.output_dir, c, "reward-sim");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stepwise diffusion policy optimization on a toy diffusion model"};
    app.require_subcommand(1);

    CommonFlags pre_f, ft_f, ev_f, ab_f, in_f, rs_f;
    std::string ft_ckpt, ev_ckpt, rs_ckpt, axis;
    std::size_t ev_samples = 0, rs_traj = 0;

    auto* pre = app.add_subcommand("pretrain", "Pretrain the noise-prediction model");
    add_common(pre, pre_f);
    auto* ft = app.add_subcommand("finetune", "Reward finetuning with sdpo, ddpo or rebel");
    add_common(ft, ft_f);
    ft->add_option("--checkpoint", ft_ckpt, "Pretrained checkpoint (default: OUT/pretrained.ckpt, created if absent)");
    auto* ev = app.add_subcommand("eval", "Mean reward per sampling step count");
    add_common(ev, ev_f);
    ev->add_option("--checkpoint", ev_ckpt, "Checkpoint to evaluate (default: OUT/finetuned.ckpt)");
    ev->add_option("--samples", ev_samples, "Samples per step count");
    auto* ab = app.add_subcommand("ablate", "Finetune every variant of one ablation axis");
    add_common(ab, ab_f);
    ab->add_option("--axis", axis, "dense_strategy, gamma, normalization, lambda_order or update_mode")->required();
    auto* in = app.add_subcommand("instability", "Baseline stability across trajectory lengths and seeds");
    add_common(in, in_f);
    auto* rs = app.add_subcommand("reward-sim", "Similarity of predicted dense rewards to fully queried ones");
    add_common(rs, rs_f);
    rs->add_option("--checkpoint", rs_ckpt, "Model checkpoint (default: pretrain in-process)");
    rs->add_option("--trajectories", rs_traj, "Number of trajectories");

    CLI11_PARSE(app, argc, argv);

    try {
        if (pre->parsed()) return cmd_pretrain(pre_f);
        if (ft->parsed()) return cmd_finetune(ft_f, ft_ckpt);
        if (ev->parsed()) return cmd_eval(ev_f, ev_ckpt, ev_samples);
        if (ab->parsed()) return cmd_ablate(ab_f, axis);
        if (in->parsed()) return cmd_instability(in_f);
        if (rs->parsed()) return cmd_reward_sim(rs_f, rs_ckpt, rs_traj);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
