// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "small_config.hpp"
#include "sdpo/errors.hpp"
#include "sdpo/harness/evaluation.hpp"
#include "sdpo/harness/metrics_io.hpp"
#include "sdpo/harness/pipelines.hpp"

using namespace sdpo;
using nlohmann::json;

namespace {

std::size_t count_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) ++n;
    return n;
}

json strip_wall(const TrainRecord& r) {
    json j = to_json(r);
    j.erase("wall_ms");
    return j;
}

}  // namespace

TEST_CASE("shipped config loads and round-trips") {
    const auto c = load_config(std::filesystem::path(SDPO_SOURCE_DIR) / "configs" / "toy_default.json");
    CHECK(c.schedule.num_steps == 10);
    CHECK(c.eval.step_counts == std::vector<std::size_t>{1, 2, 4, 8, 10});
    CHECK(c.instability.regimes.size() == 5);
    auto again = config_from_json(to_json(c));
    again.validate();
    CHECK(to_json(again) == to_json(c));
    CHECK(config_digest(again) == config_digest(c));
    auto other = c;
    other.seed = 1;
    CHECK(config_digest(other) != config_digest(c));
}

TEST_CASE("config parsing is strict") {
    json j = to_json(default_config());
    j["surprise"] = 1;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = to_json(default_config());
    j["sdpo"]["lamda_decay"] = 0.9;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = to_json(default_config());
    j["epochs"] = "many";
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = to_json(default_config());
    j["algo"] = "ppo";
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = to_json(default_config());
    j["sdpo"]["clip_eps"] = -1.0;
    CHECK_THROWS_AS(config_from_json(j), ConfigError);

    const auto dir = testing_support::scratch_dir("cfg");
    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK_THROWS_AS(load_config(dir / "broken.json"), ConfigError);
}

TEST_CASE("partial configs fill in defaults") {
    auto c = config_from_json(json{{"seed", 9}, {"sdpo", {{"lr", 0.001}}}});
    c.validate();
    CHECK(c.seed == 9);
    CHECK(c.sdpo.lr == 0.001);
    CHECK(c.sdpo.clip_eps == SdpoConfig{}.clip_eps);
}

TEST_CASE("eval step counts above the schedule are dropped") {
    auto c = default_config();
    c.eval.step_counts = {16, 4, 1, 4, 10};
    c.validate();
    CHECK(c.eval.step_counts == std::vector<std::size_t>{1, 4, 10});
    c.eval.step_counts = {32};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    auto d = default_config();
    d.train_step_counts = {1, 2};
    CHECK_THROWS_AS(d.validate(), ConfigError);  // sdpo trains on one length
    d.algo = Algo::ddpo;
    CHECK_NOTHROW(d.validate());
}

TEST_CASE("config path precedence") {
    ::unsetenv(kConfigEnvVar);
    CHECK(resolve_config_path("").empty());
    ::setenv(kConfigEnvVar, "/tmp/from_env.json", 1);
    CHECK(resolve_config_path("") == "/tmp/from_env.json");
    CHECK(resolve_config_path("mine.json") == "mine.json");
    ::unsetenv(kConfigEnvVar);
    CHECK(!code_version().empty());
}

TEST_CASE("finetuning is deterministic and budgets agree across algorithms") {
    std::vector<std::vector<std::size_t>> budgets;
    for (auto algo : {Algo::sdpo, Algo::ddpo, Algo::rebel}) {
        auto cfg = testing_support::small_config();
        cfg.algo = algo;
        const auto env = make_environment(cfg);
        const auto& init = pretrained_for_seed(env, cfg.seed);
        const auto a = run_finetune(env, init);
        const auto b = run_finetune(env, init);
        REQUIRE_FALSE(a.diverged);
        CHECK(a.params == b.params);
        REQUIRE(a.train.size() == 4);
        std::vector<std::size_t> seq;
        for (std::size_t i = 0; i < a.train.size(); ++i) {
            CHECK(strip_wall(a.train[i]) == strip_wall(b.train[i]));
            seq.push_back(a.train[i].samples_consumed);
        }
        budgets.push_back(seq);
        REQUIRE(a.evals.size() == 3);
        CHECK(a.evals[0].epoch == 0);
        CHECK(a.evals[2].epoch == 4);
        for (std::size_t i = 0; i < a.evals.size(); ++i) CHECK(to_json(a.evals[i], algo) == to_json(b.evals[i], algo));
    }
    CHECK(budgets[0] == budgets[1]);
    CHECK(budgets[0] == budgets[2]);
    CHECK(budgets[0] == std::vector<std::size_t>{16, 32, 48, 64});
}

TEST_CASE("zero epochs only evaluates the starting point") {
    auto cfg = testing_support::small_config();
    cfg.epochs = 0;
    const auto env = make_environment(cfg);
    const auto& init = pretrained_for_seed(env, cfg.seed);
    const auto r = run_finetune(env, init);
    CHECK(r.params == init);
    CHECK(r.train.empty());
    REQUIRE(r.evals.size() == 1);
    CHECK(r.evals[0].samples_consumed == 0);
}

TEST_CASE("run outputs") {
    auto cfg = testing_support::small_config();
    const auto dir = testing_support::scratch_dir("run_outputs");
    cfg.output_dir = dir;
    const auto env = make_environment(cfg);
    write_manifest(dir, cfg, "finetune");
    {
        RunWriter w(dir);
        run_finetune(env, pretrained_for_seed(env, cfg.seed), &w);
    }
    CHECK(count_lines(dir / "metrics.jsonl") == 4);
    CHECK(count_lines(dir / "eval.jsonl") == 3);
    CHECK(count_lines(dir / "eval.csv") == 1 + 3 * 3);
    CHECK(std::filesystem::exists(dir / "finetuned.ckpt"));
    std::ifstream m(dir / "manifest.json");
    const json manifest = json::parse(m);
    CHECK(manifest["config_digest"] == config_digest(cfg));
    CHECK(manifest["code_version"] == code_version());
    CHECK(manifest["command"] == "finetune");
    std::ifstream e(dir / "eval.jsonl");
    std::string first;
    std::getline(e, first);
    const json rec = json::parse(first);
    CHECK(rec["epoch"] == 0);
    CHECK(rec["mean_reward"].contains("5"));
}

TEST_CASE("divergence keeps the last good state") {
    auto cfg = testing_support::small_config();
    const auto dir = testing_support::scratch_dir("diverge");
    auto env = make_environment(cfg);
    for (auto& t : env.reward.targets) t[0] = std::nan("");
    RunWriter w(dir);
    const auto& init = pretrained_for_seed(env, cfg.seed);
    const auto r = run_finetune(env, init, &w);
    CHECK(r.diverged);
    CHECK(r.params == init);
    CHECK(std::filesystem::exists(dir / "last_good.ckpt"));
}

TEST_CASE("evaluation") {
    auto cfg = testing_support::small_config();
    const auto env = make_environment(cfg);
    const auto& p = pretrained_for_seed(env, 0);
    const auto rows = evaluate(p, env, {1, 5}, 64, 2);
    REQUIRE(rows.size() == 2);
    for (const auto& r : rows) {
        CHECK(r.mean_reward > 0.0);
        CHECK(r.mean_reward <= 1.0);
        CHECK(r.std_error > 0.0);
    }
    CHECK(evaluate(p, env, {1, 5}, 64, 2)[1].mean_reward == rows[1].mean_reward);
    CHECK(eval_row(rows, 5).steps == 5);
    CHECK_THROWS(eval_row(rows, 3));
}

TEST_CASE("collapse counting and variance") {
    CHECK(count_collapse_events({1, 1, 1, 1}, 2) == 0);
    CHECK(count_collapse_events({1, 1, 0.2, 0.2, 0.2}, 2) == 1);
    CHECK(count_collapse_events({1, 1, 0.2, 0.2, 1, 1, 0.1, 0.1}, 2) == 2);
    CHECK_THROWS_AS(count_collapse_events({1.0}, 0), ConfigError);
    CHECK(sample_variance({1, 2, 3, 4}) == doctest::Approx(5.0 / 3.0));
    CHECK(sample_variance({2.0}) == 0.0);
}

TEST_CASE("ablation variants") {
    const auto base = default_config();
    CHECK(ablation_variants(base, "dense_strategy").size() == 7);
    CHECK(ablation_variants(base, "gamma").size() == 4);
    CHECK(ablation_variants(base, "normalization").size() == 3);
    CHECK(ablation_variants(base, "lambda_order").size() == 4);
    const auto modes = ablation_variants(base, "update_mode");
    REQUIRE(modes.size() == 3);
    for (const auto& v : modes) CHECK(v.config.algo == Algo::sdpo);
    CHECK_THROWS_AS(ablation_variants(base, "colour"), ConfigError);
}

TEST_CASE("small instability study and similarity table") {
    auto cfg = testing_support::small_config();
    const auto res = run_instability(cfg);
    REQUIRE(res.size() == 2);
    for (const auto& r : res) {
        CHECK(r.seeds.size() == 2);
        CHECK(r.variance_final >= 0.0);
    }
    const auto env = make_environment(cfg);
    const auto rows = run_reward_similarity(env, pretrained_for_seed(env, 0), 8, 1);
    CHECK(rows.size() == 7);
    for (const auto& r : rows) {
        if (r.strategy == DenseStrategy::full) CHECK(r.metrics.cosine == doctest::Approx(1.0));
        if (r.strategy == DenseStrategy::copy1) {
            CHECK(std::abs(r.metrics.cosine) < 1e-6);
            CHECK(r.queries_per_trajectory == 1);
        }
    }
}
