// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdpo/harness/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>

#include "sdpo/checkpoint.hpp"
#include "sdpo/errors.hpp"

#ifndef SDPO_VERSION
#define SDPO_VERSION "unknown"
#endif

namespace sdpo {

using nlohmann::json;

std::string_view to_string(Algo a) {
    switch (a) {
        case Algo::sdpo: return "sdpo";
        case Algo::ddpo: return "ddpo";
        case Algo::rebel: return "rebel";
    }
    return "?";
}

Algo algo_from_string(std::string_view name) {
    for (auto a : {Algo::sdpo, Algo::ddpo, Algo::rebel}) {
        if (to_string(a) == name) return a;
    }
    throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

namespace {

std::string_view to_string(ScheduleKind k) { return k == ScheduleKind::linear ? "linear" : "cosine"; }

ScheduleKind schedule_kind_from_string(std::string_view s) {
    if (s == "linear") return ScheduleKind::linear;
    if (s == "cosine") return ScheduleKind::cosine;
    throw ConfigError("unknown schedule kind '" + std::string(s) + "'");
}

std::string_view to_string(RewardKind k) { return k == RewardKind::target_distance ? "target_distance" : "norm_penalty"; }

RewardKind reward_kind_from_string(std::string_view s) {
    if (s == "target_distance") return RewardKind::target_distance;
    if (s == "norm_penalty") return RewardKind::norm_penalty;
    throw ConfigError("unknown reward kind '" + std::string(s) + "'");
}

// Reads fields of one JSON object and complains about keys nobody asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError("config section '" + path_ + "' must be an object");
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& e) {
            throw ConfigError("config field '" + path_ + key + "': " + e.what());
        }
    }

    template <typename F>
    void read_with(const char* key, F&& parse) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            parse(j_.at(key));
        } catch (const json::exception& e) {
            throw ConfigError("config field '" + path_ + key + "': " + e.what());
        }
    }

    Section sub(const char* key) {
        seen_.insert(key);
        static const json empty = json::object();
        return Section(j_.contains(key) ? j_.at(key) : empty, path_ + key + ".");
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) throw ConfigError("unknown config field '" + path_ + k + "'");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig default_config() {
    ExperimentConfig c;
    c.instability.regimes = {
        {"ddpo_T1", Algo::ddpo, {1}},
        {"ddpo_T2", Algo::ddpo, {2}},
        {"ddpo_T10", Algo::ddpo, {10}},
        {"ddpo_mixed", Algo::ddpo, {1, 2, 4, 10}},
        {"sdpo_T10", Algo::sdpo, {10}},
    };
    return c;
}

void ExperimentConfig::validate() {
    if (schedule.num_steps == 0) throw ConfigError("schedule.num_steps must be positive");
    if (!(schedule.beta_min > 0.0 && schedule.beta_min <= schedule.beta_max && schedule.beta_max < 1.0)) {
        throw ConfigError("schedule betas must satisfy 0 < beta_min <= beta_max < 1");
    }
    if (data.num_prompts == 0 || data.data_dim == 0) throw ConfigError("data dimensions must be positive");
    if (!(data.spread > 0.0)) throw ConfigError("data.spread must be positive");
    if (model.hidden == 0 || model.embed_dim == 0) throw ConfigError("model dimensions must be positive");
    if (!(reward.scale > 0.0)) throw ConfigError("reward.scale must be positive");
    sdpo.validate();
    baseline.validate();
    if (eval.every == 0) throw ConfigError("eval.every must be positive");
    if (eval.num_samples == 0) throw ConfigError("eval.num_samples must be positive");

    const std::size_t T = schedule.num_steps;
    std::vector<std::size_t> counts;
    for (auto k : eval.step_counts) {
        if (k == 0) throw ConfigError("eval step counts must be positive");
        if (k <= T) counts.push_back(k);
    }
    std::sort(counts.begin(), counts.end());
    counts.erase(std::unique(counts.begin(), counts.end()), counts.end());
    if (counts.empty()) throw ConfigError("no eval step count fits within the schedule length");
    eval.step_counts = counts;

    for (auto k : train_step_counts) {
        if (k == 0 || k > T) throw ConfigError("train step counts must lie in [1, num_steps]");
    }
    const std::size_t train_len = train_step_counts.empty()
                                      ? T
                                      : *std::min_element(train_step_counts.begin(), train_step_counts.end());
    if (algo == Algo::sdpo) {
        if (train_step_counts.size() > 1) throw ConfigError("sdpo trains on a single step count");
        if (train_len < min_steps(dense_strategy)) {
            throw ConfigError("dense strategy " + std::string(to_string(dense_strategy)) + " needs at least " +
                              std::to_string(min_steps(dense_strategy)) + " steps");
        }
    }
    for (const auto& r : instability.regimes) {
        if (r.step_counts.empty()) throw ConfigError("instability regime '" + r.name + "' has no step counts");
        for (auto k : r.step_counts) {
            if (k == 0 || k > T) throw ConfigError("instability regime '" + r.name + "' has a bad step count");
        }
    }
    if (instability.final_window == 0 || instability.running_window == 0) {
        throw ConfigError("instability windows must be positive");
    }
    if (similarity_trajectories == 0) throw ConfigError("similarity_trajectories must be positive");
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c = default_config();
    Section root(j, "");
    root.read("seed", c.seed);
    root.read("data_seed", c.data_seed);
    root.read_with("output_dir", [&](const json& v) { c.output_dir = v.get<std::string>(); });

    auto data = root.sub("data");
    data.read("num_prompts", c.data.num_prompts);
    data.read("data_dim", c.data.data_dim);
    data.read("mean_radius", c.data.mean_radius);
    data.read("mode_separation", c.data.mode_separation);
    data.read("spread", c.data.spread);
    data.finish();

    auto sched = root.sub("schedule");
    sched.read("num_steps", c.schedule.num_steps);
    sched.read_with("kind", [&](const json& v) { c.schedule.kind = schedule_kind_from_string(v.get<std::string>()); });
    sched.read("beta_min", c.schedule.beta_min);
    sched.read("beta_max", c.schedule.beta_max);
    sched.finish();

    auto model = root.sub("model");
    model.read("embed_dim", c.model.embed_dim);
    model.read("hidden", c.model.hidden);
    model.read("init_scale", c.model.init_scale);
    model.finish();

    auto pre = root.sub("pretrain");
    pre.read("steps", c.pretrain.steps);
    pre.read("batch_size", c.pretrain.batch_size);
    pre.read("lr", c.pretrain.lr);
    pre.read("heldout_size", c.pretrain.heldout_size);
    pre.finish();

    auto rew = root.sub("reward");
    rew.read_with("kind", [&](const json& v) { c.reward.kind = reward_kind_from_string(v.get<std::string>()); });
    rew.read("scale", c.reward.scale);
    rew.finish();

    root.read_with("algo", [&](const json& v) { c.algo = algo_from_string(v.get<std::string>()); });

    auto s = root.sub("sdpo");
    s.read("eta", c.sdpo.eta);
    s.read("clip_eps", c.sdpo.clip_eps);
    s.read("gamma", c.sdpo.gamma);
    s.read("use_returns", c.sdpo.use_returns);
    s.read("lambda_decay", c.sdpo.lambda_decay);
    s.read("lr", c.sdpo.lr);
    s.read("batches_per_epoch", c.sdpo.batches_per_epoch);
    s.read("pairs_per_batch", c.sdpo.pairs_per_batch);
    s.read_with("weighting_order",
                [&](const json& v) { c.sdpo.weighting_order = weighting_order_from_string(v.get<std::string>()); });
    s.read_with("update_mode", [&](const json& v) { c.sdpo.update_mode = update_mode_from_string(v.get<std::string>()); });
    s.finish();

    auto b = root.sub("baseline");
    b.read("lr", c.baseline.lr);
    b.read("eta", c.baseline.eta);
    b.read("batches_per_epoch", c.baseline.batches_per_epoch);
    b.read("trajectories_per_batch", c.baseline.trajectories_per_batch);
    b.finish();

    root.read_with("dense_strategy",
                   [&](const json& v) { c.dense_strategy = dense_strategy_from_string(v.get<std::string>()); });
    root.read_with("normalization_mode",
                   [&](const json& v) { c.normalization_mode = normalization_mode_from_string(v.get<std::string>()); });
    root.read("epochs", c.epochs);
    root.read("train_step_counts", c.train_step_counts);

    auto ev = root.sub("eval");
    ev.read("step_counts", c.eval.step_counts);
    ev.read("every", c.eval.every);
    ev.read("num_samples", c.eval.num_samples);
    ev.finish();

    root.read("ablation_seeds", c.ablation_seeds);

    auto inst = root.sub("instability");
    inst.read("num_seeds", c.instability.num_seeds);
    inst.read("final_window", c.instability.final_window);
    inst.read("running_window", c.instability.running_window);
    inst.read_with("regimes", [&](const json& v) {
        c.instability.regimes.clear();
        for (const auto& r : v) {
            Section rs(r, "instability.regimes[].");
            Regime reg;
            rs.read("name", reg.name);
            rs.read_with("algo", [&](const json& a) { reg.algo = algo_from_string(a.get<std::string>()); });
            rs.read("step_counts", reg.step_counts);
            rs.finish();
            c.instability.regimes.push_back(std::move(reg));
        }
    });
    inst.finish();

    root.read("similarity_trajectories", c.similarity_trajectories);
    root.finish();
    c.validate();
    return c;
}

json to_json(const ExperimentConfig& c) {
    json regimes = json::array();
    for (const auto& r : c.instability.regimes) {
        regimes.push_back({{"name", r.name}, {"algo", to_string(r.algo)}, {"step_counts", r.step_counts}});
    }
    return {
        {"seed", c.seed},
        {"data_seed", c.data_seed},
        {"output_dir", c.output_dir.string()},
        {"data",
         {{"num_prompts", c.data.num_prompts},
          {"data_dim", c.data.data_dim},
          {"mean_radius", c.data.mean_radius},
          {"mode_separation", c.data.mode_separation},
          {"spread", c.data.spread}}},
        {"schedule",
         {{"num_steps", c.schedule.num_steps},
          {"kind", to_string(c.schedule.kind)},
          {"beta_min", c.schedule.beta_min},
          {"beta_max", c.schedule.beta_max}}},
        {"model", {{"embed_dim", c.model.embed_dim}, {"hidden", c.model.hidden}, {"init_scale", c.model.init_scale}}},
        {"pretrain",
         {{"steps", c.pretrain.steps},
          {"batch_size", c.pretrain.batch_size},
          {"lr", c.pretrain.lr},
          {"heldout_size", c.pretrain.heldout_size}}},
        {"reward", {{"kind", to_string(c.reward.kind)}, {"scale", c.reward.scale}}},
        {"algo", to_string(c.algo)},
        {"sdpo",
         {{"eta", c.sdpo.eta},
          {"clip_eps", c.sdpo.clip_eps},
          {"gamma", c.sdpo.gamma},
          {"use_returns", c.sdpo.use_returns},
          {"lambda_decay", c.sdpo.lambda_decay},
          {"lr", c.sdpo.lr},
          {"batches_per_epoch", c.sdpo.batches_per_epoch},
          {"pairs_per_batch", c.sdpo.pairs_per_batch},
          {"weighting_order", to_string(c.sdpo.weighting_order)},
          {"update_mode", to_string(c.sdpo.update_mode)}}},
        {"baseline",
         {{"lr", c.baseline.lr},
          {"eta", c.baseline.eta},
          {"batches_per_epoch", c.baseline.batches_per_epoch},
          {"trajectories_per_batch", c.baseline.trajectories_per_batch}}},
        {"dense_strategy", to_string(c.dense_strategy)},
        {"normalization_mode", to_string(c.normalization_mode)},
        {"epochs", c.epochs},
        {"train_step_counts", c.train_step_counts},
        {"eval", {{"step_counts", c.eval.step_counts}, {"every", c.eval.every}, {"num_samples", c.eval.num_samples}}},
        {"ablation_seeds", c.ablation_seeds},
        {"instability",
         {{"num_seeds", c.instability.num_seeds},
          {"final_window", c.instability.final_window},
          {"running_window", c.instability.running_window},
          {"regimes", regimes}}},
        {"similarity_trajectories", c.similarity_trajectories},
    };
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(f);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

std::string config_digest(const ExperimentConfig& config) { return fnv1a_hex(to_json(config).dump()); }

std::filesystem::path resolve_config_path(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv(kConfigEnvVar); env && *env) return env;
    return {};
}

std::string code_version() { return SDPO_VERSION; }

}  // namespace sdpo
