// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "instances.hpp"
#include "sdpo/errors.hpp"
#include "sdpo/policy.hpp"

using namespace sdpo;

namespace {

const NoiseSchedule& sched10() {
    static const auto s = build_schedule(10, kDefaultBetaMin, kDefaultBetaMax, ScheduleKind::linear);
    return s;
}

}  // namespace

TEST_CASE("trajectories chain and store exact densities") {
    const auto p = init_params(DenoiserDims{}, StreamKey(1));
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto pair = sample_pair(p, seed % 4, sched10(), StreamKey(seed));
        for (const Trajectory* tr : {&pair.a, &pair.b}) {
            REQUIRE(tr->size() == 10);
            CHECK(tr->transitions.back().x_t == tr->x_init);
            for (std::size_t t = 1; t < tr->size(); ++t) CHECK(tr->transitions[t].x_prev == tr->transitions[t - 1].x_t);
            for (std::size_t t = 0; t < tr->size(); ++t) {
                const auto& x = tr->transitions[t];
                CHECK(x.t() == t);
                CHECK(x.logprob == doctest::Approx(static_cast<double>(oracle::logprob(oracle::Net(p), x))).epsilon(1e-10));
                CHECK(logprob_under(p, x) == doctest::Approx(x.logprob).epsilon(1e-12));
                const auto x0 = predict_original(x.x_t, eps_predict(p, x.x_t, t, x.c), x.step.alpha_bar);
                CHECK(tr->denoised[t] == x0);
            }
        }
    }
}

TEST_CASE("pairs share prompt and start, differ otherwise") {
    const auto p = init_params(DenoiserDims{}, StreamKey(2));
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto pair = sample_pair(p, 1, sched10(), StreamKey(seed));
        CHECK(pair.a.x_init == pair.b.x_init);
        CHECK(pair.a.c == pair.b.c);
        CHECK(pair.a.final_sample() != pair.b.final_sample());
    }
    const auto again1 = sample_pair(p, 1, sched10(), StreamKey(5));
    const auto again2 = sample_pair(p, 1, sched10(), StreamKey(5));
    CHECK(again1.a.final_sample() == again2.a.final_sample());
    CHECK(again1.b.final_sample() == again2.b.final_sample());
}

TEST_CASE("without noise both sides coincide") {
    auto s = sched10();
    for (auto& v : s.sigmas) v = 0.0;
    const auto p = init_params(DenoiserDims{}, StreamKey(3));
    const auto pair = sample_pair(p, 0, s, StreamKey(4));
    for (std::size_t t = 0; t < 10; ++t) {
        CHECK(pair.a.transitions[t].x_prev == pair.b.transitions[t].x_prev);
        CHECK(pair.a.transitions[t].x_prev == pair.a.transitions[t].mean);
    }
}

TEST_CASE("hand-set model, three steps, one dimension") {
    const DenoiserDims dims{.data_dim = 1, .num_steps = 3, .num_prompts = 1, .embed_dim = 1, .hidden = 2};
    DenoiserParams p(dims);
    p.b2()[0] = 0.5;  // eps_hat = 0.5 everywhere
    const auto s = build_schedule(3, 0.1, 0.3, ScheduleKind::linear);
    const auto tr = sample_trajectory(p, 0, std::vector<double>{1.0}, s, StreamKey(6));
    for (std::size_t t = 0; t < 3; ++t) {
        const auto& x = tr.transitions[t];
        const double want = (x.x_t[0] - s.betas[t] / std::sqrt(1.0 - s.alpha_bars[t]) * 0.5) / std::sqrt(s.alphas[t]);
        CHECK(x.mean[0] == doctest::Approx(want).epsilon(1e-14));
    }
    // step 2 starts from x_init = 1: (1 - 0.3/sqrt(0.496)*0.5)/sqrt(0.7)
    CHECK(tr.transitions[2].mean[0] == doctest::Approx(0.94063).epsilon(1e-4));
}

TEST_CASE("standard normal mode density") {
    CHECK(gaussian_logpdf(std::vector<double>{0.3}, std::vector<double>{0.3}, 1.0) ==
          doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)));
    CHECK_THROWS_AS(gaussian_logpdf(std::vector<double>{0.0}, std::vector<double>{0.0}, 0.0), DensityError);
}

TEST_CASE("log ratios") {
    const auto p = init_params(DenoiserDims{}, StreamKey(7));
    const auto q = oracle::perturbed(p, StreamKey(8), 0.05);
    const auto traj = sample_trajectory(p, 3, draw_initial_noise(8, StreamKey(9)), sched10(), StreamKey(9));
    for (const auto& x : traj.transitions) {
        CHECK(log_ratio(p, p, x) == 0.0);
        CHECK(log_ratio(p, q, x) == -log_ratio(q, p, x));
        const double want = static_cast<double>(oracle::logprob(oracle::Net(q), x) - oracle::logprob(oracle::Net(p), x));
        CHECK(log_ratio(q, p, x) == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("strided trajectories") {
    const auto p = init_params(DenoiserDims{}, StreamKey(10));
    const auto x = draw_initial_noise(8, StreamKey(11));
    const auto tr = sample_trajectory(p, 0, x, stride(sched10(), 4), StreamKey(11));
    REQUIRE(tr.size() == 4);
    CHECK(tr.transitions[0].t() == 0);
    CHECK(tr.transitions[3].t() == 9);
    const auto one = sample_trajectory(p, 0, x, stride(sched10(), 1), StreamKey(11));
    REQUIRE(one.size() == 1);
    CHECK(one.transitions[0].step.alpha_bar_next == 1.0);
}

TEST_CASE("non-finite model output is reported with its step") {
    auto p = init_params(DenoiserDims{}, StreamKey(12));
    p.b2()[0] = std::nan("");
    CHECK_THROWS_AS(sample_trajectory(p, 0, draw_initial_noise(8, StreamKey(1)), sched10(), StreamKey(1)), SamplingError);
    CHECK_THROWS(sample_trajectory(p, 0, std::vector<double>(8, INFINITY), sched10(), StreamKey(1)));
}

TEST_CASE("trajectory dump has one line per step") {
    const auto p = init_params(DenoiserDims{}, StreamKey(13));
    const auto tr = sample_trajectory(p, 0, draw_initial_noise(8, StreamKey(2)), sched10(), StreamKey(2));
    std::ostringstream out;
    dump_trajectory(out, tr, 3, 1, 2, 'b');
    std::istringstream in(out.str());
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        CHECK(line.find("\"side\":\"b\"") != std::string::npos);
        ++n;
    }
    CHECK(n == 10);
}
