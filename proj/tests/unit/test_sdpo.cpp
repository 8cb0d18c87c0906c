// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "instances.hpp"
#include "sdpo/errors.hpp"
#include "sdpo/sdpo.hpp"

using namespace sdpo;

namespace {

// One-dimensional, one-step model where params and ref differ only in the
// output bias; x_prev is solved so that the log-ratio hits `rho` exactly.
struct HandPair {
    DenoiserParams ref, params;
    TrajectoryPair pair;
};

HandPair hand_pair(double rho_a, double rho_b) {
    const DenoiserDims dims{.data_dim = 1, .num_steps = 1, .num_prompts = 1, .embed_dim = 1, .hidden = 1};
    HandPair h{DenoiserParams(dims), DenoiserParams(dims), {}};
    h.params.b2()[0] = 0.01;
    const auto s = build_schedule(1, 0.1, 0.1, ScheduleKind::linear);
    const SamplerStep st = sampler_steps(s)[0];
    const double x_t = 0.7;
    const double m_ref = posterior_mean(std::vector<double>{x_t}, std::vector<double>{0.0}, st)[0];
    const double m_p = posterior_mean(std::vector<double>{x_t}, std::vector<double>{0.01}, st)[0];
    auto make = [&](double rho) {
        Trajectory t;
        Transition tr;
        tr.step = st;
        tr.x_t = {x_t};
        tr.x_prev = {0.5 * (m_ref + m_p) + rho * st.sigma * st.sigma / (m_p - m_ref)};
        tr.mean = {m_ref};
        tr.logprob = gaussian_logpdf(tr.x_prev, tr.mean, st.sigma);
        t.x_init = tr.x_t;
        t.transitions.push_back(tr);
        t.denoised.push_back({0.0});
        return t;
    };
    h.pair = {make(rho_a), make(rho_b)};
    return h;
}

struct Setup {
    NoiseSchedule schedule = build_schedule(5, kDefaultBetaMin, kDefaultBetaMax, ScheduleKind::linear);
    DenoiserDims dims{.data_dim = 2, .num_steps = 5, .num_prompts = 3, .embed_dim = 2, .hidden = 8};
    RewardFn reward{RewardKind::target_distance, {{1, 1}, {-1, 0}, {0, 2}}, 0.5};
    DenoiserParams params = init_params(dims, StreamKey(42), 0.5);

    EpochContext ctx(std::size_t epoch, std::uint64_t seed = 7) const {
        EpochContext c;
        c.schedules = {stride(schedule, schedule.num_steps)};
        c.reward = &reward;
        c.num_prompts = 3;
        c.epoch = epoch;
        c.seed = seed;
        return c;
    }
};

SdpoConfig small_config(UpdateMode mode, double lr = 1e-3) {
    SdpoConfig c;
    c.batches_per_epoch = 2;
    c.pairs_per_batch = 3;
    c.update_mode = mode;
    c.lr = lr;
    return c;
}

}  // namespace

TEST_CASE("step weights") {
    SdpoConfig c;
    CHECK(step_weight(49, 50, c) == 1.0);
    CHECK(step_weight(0, 50, c) == doctest::Approx(0.6111).epsilon(1e-4));
    CHECK(step_weight(0, 50, c) == doctest::Approx(std::pow(0.99, 49)).epsilon(1e-15));
    c.eta = 2.0;
    CHECK(step_weight(49, 50, c) == 0.5);
    SdpoConfig r;
    r.weighting_order = WeightingOrder::reverse;
    CHECK(step_weight(0, 50, r) == 1.0);
    CHECK(step_weight(49, 50, r) == step_weight(0, 50, SdpoConfig{}));
    CHECK_THROWS_AS(step_weight(50, 50, c), LookupError);
}

TEST_CASE("clip algebra") {
    SdpoConfig c;
    c.eta = 1.0;
    const double eps = c.clip_eps;
    const PairAdvantages zero{{0.0}, {0.0}};

    const auto h = hand_pair(2 * eps, -2 * eps);
    const auto s = step_loss(h.pair, 0, h.params, h.ref, zero, c);
    CHECK(s.rho_a == doctest::Approx(2 * eps).epsilon(1e-8));
    CHECK(s.rho_b == doctest::Approx(-2 * eps).epsilon(1e-8));
    CHECK(s.delta_rho_clipped == doctest::Approx(2 * eps).epsilon(1e-12));
    CHECK(s.delta_rho == doctest::Approx(4 * eps).epsilon(1e-8));
    CHECK(s.chosen == s.unclipped);

    const auto same = hand_pair(10 * eps, 10 * eps);
    const auto t = step_loss(same.pair, 0, same.params, same.ref, PairAdvantages{{0.3}, {0.1}}, c);
    CHECK(t.delta_rho_clipped == 0.0);
    CHECK(t.clipped == doctest::Approx(0.04));
    CHECK(std::abs(t.delta_rho) < 1e-10);
}

TEST_CASE("identical parameters") {
    const auto h = hand_pair(2e-4, -3e-4);
    const PairAdvantages adv{{0.8}, {0.2}};
    const auto s = step_loss(h.pair, 0, h.ref, h.ref, adv, SdpoConfig{});
    CHECK(s.delta_rho == 0.0);
    CHECK(s.unclipped == doctest::Approx(0.36));
    CHECK(s.clipped == s.unclipped);
    CHECK_FALSE(s.clipped_branch);
    const auto g = step_loss_gradient(h.pair, 0, h.ref, h.ref, PairAdvantages{{0.5}, {0.5}}, SdpoConfig{});
    for (double v : g.values()) CHECK(v == 0.0);
}

TEST_CASE("clipped branch with both ratios outside gives no gradient") {
    SdpoConfig c;
    const auto h = hand_pair(2 * c.clip_eps, -2 * c.clip_eps);
    const PairAdvantages adv{{1.0}, {0.0}};
    const auto s = step_loss(h.pair, 0, h.params, h.ref, adv, c);
    CHECK(s.clipped_branch);
    CHECK(s.chosen == s.clipped);
    const auto zero = step_loss_gradient(h.pair, 0, h.params, h.ref, adv, c);
    for (double v : zero.values()) CHECK(v == 0.0);
    const auto g = step_loss_gradient(h.pair, 0, h.params, h.ref, PairAdvantages{{0.0}, {0.0}}, c);
    CHECK(g.l2_norm() > 0.0);
}

TEST_CASE("chosen is the max and the clipped gap never exceeds the raw one") {
    Setup s;
    const auto other = oracle::perturbed(s.params, StreamKey(3), 0.01);
    RngStream rng(StreamKey(4));
    for (std::uint64_t i = 0; i < 30; ++i) {
        const auto pair = sample_pair(s.params, i % 3, s.schedule, StreamKey(i));
        PairAdvantages adv{std::vector<double>(5), std::vector<double>(5)};
        for (auto& v : adv.a) v = rng.normal();
        for (auto& v : adv.b) v = rng.normal();
        SdpoConfig c;
        c.clip_eps = 0.01 * rng.uniform() + 1e-5;
        for (std::size_t t = 0; t < 5; ++t) {
            const auto l = step_loss(pair, t, other, s.params, adv, c);
            CHECK(l.chosen == std::max(l.clipped, l.unclipped));
            CHECK(std::abs(l.delta_rho_clipped) <= std::min(std::abs(l.delta_rho), 2 * c.clip_eps) + 1e-18);
        }
    }
}

TEST_CASE("batch objective gradient matches finite differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto r = oracle::check_sdpo(seed);
        CAPTURE(seed);
        CHECK(r.num_params < 200);
        CHECK(r.rel_error < 1e-4);
        CHECK(r.value_error < 1e-10);
    }
}

TEST_CASE("shuffles are uniform permutations") {
    RngStream rng(StreamKey(9));
    const auto perms = shuffle_steps(4, 10000, rng);
    std::map<std::vector<std::size_t>, int> freq;
    for (const auto& p : perms) ++freq[p];
    CHECK(freq.size() == 24);
    const double n = 10000.0, p = 1.0 / 24.0;
    const double expected = n * p, sd = std::sqrt(n * p * (1.0 - p));
    double chi2 = 0.0;
    for (const auto& [perm, count] : freq) {
        CHECK(std::abs(count - expected) < 5.0 * sd);
        chi2 += (count - expected) * (count - expected) / expected;
    }
    CHECK(chi2 < 60.0);  // 23 dof

    RngStream one(StreamKey(1));
    for (const auto& q : shuffle_steps(1, 5, one)) CHECK(q == std::vector<std::size_t>{0});
    RngStream a(StreamKey(2)), b(StreamKey(2));
    CHECK(shuffle_steps(6, 3, a) == shuffle_steps(6, 3, b));
    CHECK_THROWS_AS(shuffle_steps(0, 1, a), ConfigError);
}

TEST_CASE("update counts per mode") {
    Setup s;
    const std::pair<UpdateMode, std::size_t> cases[] = {
        {UpdateMode::step_shuffled, 5}, {UpdateMode::step_accumulated, 1}, {UpdateMode::stepwise_no_shuffle, 5}};
    for (auto [mode, updates] : cases) {
        auto p = s.params;
        SdpoState st(small_config(mode), DenseStrategy::adaptive3, NormalizationMode::per_step_prompt, p.size());
        const auto m = sdpo_epoch(p, st, s.ctx(0));
        CHECK(m.updates == updates);
        CHECK(st.optimizer.step_count() == updates);
        CHECK(m.samples == 12);
        CHECK(m.reward_queries == 12 * 3);
        CHECK_FALSE(p == s.params);
    }
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    Setup s;
    auto p = s.params;
    SdpoState st(small_config(UpdateMode::step_shuffled, 0.0), DenseStrategy::adaptive3,
                 NormalizationMode::per_step_prompt, p.size());
    const auto m = sdpo_epoch(p, st, s.ctx(0));
    CHECK(p == s.params);
    CHECK(m.updates == 5);
    CHECK(m.mean_reward_train > 0.0);
    CHECK(m.mean_abs_delta_rho == 0.0);
}

TEST_CASE("epochs repeat exactly under a fixed seed") {
    Setup s;
    for (auto mode : {UpdateMode::step_shuffled, UpdateMode::step_accumulated, UpdateMode::stepwise_no_shuffle}) {
        DenoiserParams a = s.params, b = s.params;
        SdpoState sa(small_config(mode), DenseStrategy::adaptive3, NormalizationMode::per_step_prompt, a.size());
        SdpoState sb(small_config(mode), DenseStrategy::adaptive3, NormalizationMode::per_step_prompt, b.size());
        for (std::size_t e = 0; e < 3; ++e) {
            const auto ma = sdpo_epoch(a, sa, s.ctx(e));
            const auto mb = sdpo_epoch(b, sb, s.ctx(e));
            CHECK(ma.loss == mb.loss);
            CHECK(ma.clip_fraction == mb.clip_fraction);
        }
        CHECK(a == b);
        DenoiserParams c = s.params;
        SdpoState sc(small_config(mode), DenseStrategy::adaptive3, NormalizationMode::per_step_prompt, c.size());
        sdpo_epoch(c, sc, s.ctx(0, 8));
        CHECK_FALSE(c == a);
    }
}

TEST_CASE("non-finite loss restores the epoch start") {
    Setup s;
    s.reward.targets[0][0] = std::nan("");
    s.reward.targets[1][0] = std::nan("");
    s.reward.targets[2][0] = std::nan("");
    auto p = s.params;
    SdpoState st(small_config(UpdateMode::step_shuffled), DenseStrategy::adaptive3, NormalizationMode::per_step_prompt,
                 p.size());
    CHECK_THROWS_AS(sdpo_epoch(p, st, s.ctx(0)), TrainingError);
    CHECK(p == s.params);
}

TEST_CASE("configuration checks") {
    Setup s;
    auto p = s.params;
    SdpoState st(small_config(UpdateMode::step_shuffled), DenseStrategy::adaptive3, NormalizationMode::per_step_prompt,
                 p.size());
    auto ctx = s.ctx(0);
    ctx.schedules.push_back(stride(s.schedule, 2));
    CHECK_THROWS_AS(sdpo_epoch(p, st, ctx), ConfigError);
    ctx = s.ctx(0);
    ctx.schedules = {stride(s.schedule, 2)};
    CHECK_THROWS_AS(sdpo_epoch(p, st, ctx), ConfigError);  // adaptive3 needs three steps
    SdpoConfig bad;
    bad.gamma = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK(update_mode_from_string("step_accumulated") == UpdateMode::step_accumulated);
    CHECK_THROWS_AS(update_mode_from_string("x"), ConfigError);
}
