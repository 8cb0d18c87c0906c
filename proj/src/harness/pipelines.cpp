// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdpo/harness/pipelines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <mutex>

#include "sdpo/checkpoint.hpp"
#include "sdpo/errors.hpp"
#include "sdpo/harness/metrics_io.hpp"

namespace sdpo {

PretrainResult run_pretrain(const Environment& env) {
    const auto& c = env.config;
    const DenoiserParams init = init_params(env.dims, StreamKey(c.seed).child(StreamTag::params_init), c.model.init_scale);
    return pretrain(init, env.dataset, env.schedule, c.pretrain, c.seed);
}

const DenoiserParams& pretrained_for_seed(const Environment& env, std::uint64_t seed) {
    static std::mutex mu;
    static std::map<std::string, DenoiserParams> cache;
    const auto j = to_json(env.config);
    const nlohmann::json key_json = {{"data", j["data"]},         {"data_seed", j["data_seed"]},
                                     {"schedule", j["schedule"]}, {"model", j["model"]},
                                     {"pretrain", j["pretrain"]}, {"seed", seed}};
    const std::string key = fnv1a_hex(key_json.dump());
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
    Environment seeded = env;
    seeded.config.seed = seed;
    return cache.emplace(key, run_pretrain(seeded).params).first->second;
}

Trainer::Trainer(const Environment& env, std::size_t num_params) : env_(env) {
    const auto& c = env.config;
    if (c.train_step_counts.empty()) {
        schedules_.push_back(stride(env.schedule, env.schedule.num_steps));
    } else {
        for (auto k : c.train_step_counts) schedules_.push_back(stride(env.schedule, k));
    }
    if (c.algo == Algo::sdpo) {
        sdpo_.emplace(c.sdpo, c.dense_strategy, c.normalization_mode, num_params);
    } else {
        baseline_.emplace(c.baseline, num_params);
    }
}

EpochMetrics Trainer::epoch(DenoiserParams& params, std::size_t epoch_index, std::ostream* dump) {
    EpochContext ctx;
    ctx.schedules = schedules_;
    ctx.reward = &env_.reward;
    ctx.num_prompts = env_.dims.num_prompts;
    ctx.epoch = epoch_index;
    ctx.seed = env_.config.seed;
    ctx.trajectory_dump = dump;
    switch (env_.config.algo) {
        case Algo::sdpo: return sdpo_epoch(params, *sdpo_, ctx);
        case Algo::ddpo: return ddpo_epoch(params, *baseline_, ctx);
        case Algo::rebel: return rebel_epoch(params, *baseline_, ctx);
    }
    throw ConfigError("unknown algorithm");
}

namespace {

template <class S, class B>
auto& optimizer_of(S& s, B& b) {
    return s ? s->optimizer : b->optimizer;
}

template <class S, class B>
auto& stats_of(S& s, B& b) {
    return s ? s->stats : b->stats;
}

}  // namespace

void Trainer::save(Checkpoint& ckpt) const {
    const AdamW& opt = optimizer_of(sdpo_, baseline_);
    ckpt.put("optim/m", opt.first_moment());
    ckpt.put("optim/v", opt.second_moment());
    ckpt.put("optim/t", {static_cast<double>(opt.step_count())});
    stats_of(sdpo_, baseline_).save(ckpt, "stats/");
}

void Trainer::load(const Checkpoint& ckpt) {
    optimizer_of(sdpo_, baseline_)
        .restore(ckpt.at("optim/m"), ckpt.at("optim/v"), static_cast<std::uint64_t>(ckpt.at("optim/t").at(0)));
    stats_of(sdpo_, baseline_) = RunningStatTable::load(ckpt, "stats/");
}

void save_training_checkpoint(const std::filesystem::path& path, const DenoiserParams& params,
                              const Trainer* trainer, std::size_t epoch, std::size_t samples_consumed) {
    Checkpoint ckpt;
    put_params(ckpt, params);
    if (trainer) trainer->save(ckpt);
    ckpt.put("run/position", {static_cast<double>(epoch), static_cast<double>(samples_consumed)});
    save_checkpoint(path, ckpt);
}

FinetuneResult run_finetune(const Environment& env, const DenoiserParams& init, RunWriter* writer) {
    const auto& c = env.config;
    if (init.dims() != env.dims) throw ShapeError("finetune: checkpoint dimensions differ from the config");
    FinetuneResult res;
    res.params = init;
    Trainer trainer(env, init.size());
    std::size_t samples = 0;

    auto do_eval = [&](std::size_t epoch) {
        EvalRecord rec{epoch, samples, evaluate(res.params, env, c.eval.step_counts, c.eval.num_samples, c.seed)};
        if (writer) {
            writer->eval(rec, c.algo);
            save_training_checkpoint(writer->dir() / "finetuned.ckpt", res.params, &trainer, epoch, samples);
        }
        res.evals.push_back(std::move(rec));
    };

    do_eval(0);
    for (std::size_t e = 0; e < c.epochs; ++e) {
        const auto t0 = std::chrono::steady_clock::now();
        TrainRecord rec;
        try {
            rec.metrics = trainer.epoch(res.params, e);
        } catch (const TrainingError& err) {
            res.diverged = true;
            res.error = err.what();
            if (writer) save_training_checkpoint(writer->dir() / "last_good.ckpt", res.params, &trainer, e, samples);
            break;
        }
        samples += rec.metrics.samples;
        rec.algo = c.algo;
        rec.samples_consumed = samples;
        rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        if (writer) writer->train(rec);
        res.train.push_back(rec);
        if ((e + 1) % c.eval.every == 0 || e + 1 == c.epochs) do_eval(e + 1);
    }
    return res;
}

std::vector<AblationVariant> ablation_variants(const ExperimentConfig& base, const std::string& axis) {
    std::vector<AblationVariant> out;
    auto add = [&](std::string name, auto&& mutate) {
        ExperimentConfig c = base;
        c.algo = Algo::sdpo;
        mutate(c);
        c.validate();
        out.push_back({std::move(name), std::move(c)});
    };
    if (axis == "dense_strategy") {
        for (auto s : kAllDenseStrategies) add(std::string(to_string(s)), [&](ExperimentConfig& c) { c.dense_strategy = s; });
    } else if (axis == "gamma") {
        for (double g : {0.99, 0.9, 1.0}) {
            add("gamma_" + format_double(g), [&](ExperimentConfig& c) {
                c.sdpo.gamma = g;
                c.sdpo.use_returns = true;
            });
        }
        add("no_return", [](ExperimentConfig& c) { c.sdpo.use_returns = false; });
    } else if (axis == "normalization") {
        for (auto m : {NormalizationMode::per_step_prompt, NormalizationMode::per_prompt, NormalizationMode::global}) {
            add(std::string(to_string(m)), [&](ExperimentConfig& c) { c.normalization_mode = m; });
        }
    } else if (axis == "lambda_order") {
        for (double l : {0.99, 0.9, 1.0}) {
            add("lambda_" + format_double(l), [&](ExperimentConfig& c) {
                c.sdpo.lambda_decay = l;
                c.sdpo.weighting_order = WeightingOrder::forward;
            });
        }
        add("reverse_" + format_double(base.sdpo.lambda_decay),
            [](ExperimentConfig& c) { c.sdpo.weighting_order = WeightingOrder::reverse; });
    } else if (axis == "update_mode") {
        for (auto m : {UpdateMode::step_shuffled, UpdateMode::step_accumulated, UpdateMode::stepwise_no_shuffle}) {
            add(std::string(to_string(m)), [&](ExperimentConfig& c) { c.sdpo.update_mode = m; });
        }
    } else {
        throw ConfigError("unknown ablation axis '" + axis + "'");
    }
    return out;
}

std::vector<AblationRun> run_ablation(const ExperimentConfig& base, const std::string& axis,
                                      const std::filesystem::path& out_dir) {
    const auto variants = ablation_variants(base, axis);
    std::vector<AblationRun> runs;
    for (const auto& v : variants) {
        for (auto seed : base.ablation_seeds) {
            ExperimentConfig c = v.config;
            c.seed = seed;
            const Environment env = make_environment(c);
            const DenoiserParams& init = pretrained_for_seed(env, seed);
            std::optional<RunWriter> writer;
            if (!out_dir.empty()) writer.emplace(out_dir / v.name / ("seed_" + std::to_string(seed)));
            runs.push_back({v.name, seed, run_finetune(env, init, writer ? &*writer : nullptr)});
        }
    }
    return runs;
}

std::size_t count_collapse_events(const std::vector<double>& rewards, std::size_t window) {
    if (window == 0) throw ConfigError("collapse window must be positive");
    std::size_t events = 0;
    bool have_peak = false;
    double peak = 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < rewards.size(); ++i) {
        sum += rewards[i];
        if (i >= window) sum -= rewards[i - window];
        if (i + 1 < window) continue;
        const double mean = sum / static_cast<double>(window);
        if (!have_peak || mean > peak) {
            peak = mean;
            have_peak = true;
        } else if (mean <= peak - 0.5 * std::abs(peak) && peak != 0.0) {
            ++events;
            peak = mean;
        }
    }
    return events;
}

double sample_variance(const std::vector<double>& values) {
    if (values.size() < 2) return 0.0;
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return ss / static_cast<double>(values.size() - 1);
}

std::vector<RegimeResult> run_instability(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
    std::vector<RegimeResult> out;
    for (const auto& regime : config.instability.regimes) {
        RegimeResult rr;
        rr.regime = regime;
        std::vector<double> finals;
        for (std::size_t i = 0; i < config.instability.num_seeds; ++i) {
            ExperimentConfig c = config;
            c.seed = config.seed + i;
            c.algo = regime.algo;
            c.train_step_counts = regime.step_counts;
            c.eval.every = std::max<std::size_t>(c.epochs, 1);
            const Environment env = make_environment(c);
            std::optional<RunWriter> writer;
            if (!out_dir.empty()) writer.emplace(out_dir / regime.name / ("seed_" + std::to_string(c.seed)));
            const FinetuneResult res = run_finetune(env, pretrained_for_seed(env, c.seed), writer ? &*writer : nullptr);

            RegimeSeedResult sr;
            sr.seed = c.seed;
            sr.diverged = res.diverged;
            for (const auto& r : res.train) sr.reward_trace.push_back(r.metrics.mean_reward_train);
            const std::size_t n = sr.reward_trace.size();
            const std::size_t w = std::min(config.instability.final_window, n);
            double tail = 0.0;
            for (std::size_t k = n - w; k < n; ++k) tail += sr.reward_trace[k];
            sr.final_reward = w ? tail / static_cast<double>(w) : 0.0;
            sr.collapse_events = count_collapse_events(sr.reward_trace, config.instability.running_window);
            rr.collapse_events += sr.collapse_events;
            finals.push_back(sr.final_reward);
            rr.seeds.push_back(std::move(sr));
        }
        for (double f : finals) rr.mean_final += f;
        if (!finals.empty()) rr.mean_final /= static_cast<double>(finals.size());
        rr.variance_final = sample_variance(finals);
        out.push_back(std::move(rr));
    }
    return out;
}

std::vector<SimilarityRow> run_reward_similarity(const Environment& env, const DenoiserParams& params,
                                                 std::size_t num_trajectories, std::uint64_t seed) {
    if (num_trajectories == 0) throw ConfigError("reward similarity needs at least one trajectory");
    const StreamKey root = StreamKey(seed).child(StreamTag::trajectory);
    const RewardQuery query = [&](std::span<const double> x, PromptId c) { return env.reward(x, c); };
    const StridedSchedule full = stride(env.schedule, env.schedule.num_steps);

    std::vector<Trajectory> trajs;
    std::vector<DenseRewards> target;
    for (std::size_t i = 0; i < num_trajectories; ++i) {
        const PromptId c = i % env.dims.num_prompts;
        const StreamKey k = root.child(i);
        trajs.push_back(sample_trajectory(params, c, draw_initial_noise(env.dims.data_dim, k), full, k));
        target.push_back(predict_dense(trajs.back(), query, DenseStrategy::full));
    }

    std::vector<SimilarityRow> rows;
    for (auto s : kAllDenseStrategies) {
        std::vector<DenseRewards> predicted;
        for (std::size_t i = 0; i < trajs.size(); ++i) {
            RngStream rng(StreamKey(seed).child(StreamTag::anchor).child(i));
            predicted.push_back(predict_dense(trajs[i], query, s, &rng));
        }
        rows.push_back({s, similarity_to_target(predicted, target), query_count(s, env.schedule.num_steps)});
    }
    return rows;
}

}  // namespace sdpo
