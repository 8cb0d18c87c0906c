// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// Random small instances for gradient checks (T <= 3, D <= 2, < 200 params).

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "oracle.hpp"
#include "sdpo/schedule.hpp"

namespace oracle {

struct GradCheck {
    double rel_error = 0.0;    // analytic gradient vs central differences
    double value_error = 0.0;  // library objective vs oracle objective
    std::size_t num_params = 0;
};

inline sdpo::DenoiserDims small_dims(std::size_t T) {
    return sdpo::DenoiserDims{.data_dim = 2, .num_steps = T, .num_prompts = 2, .embed_dim = 2, .hidden = 6};
}

inline sdpo::DenoiserParams perturbed(const sdpo::DenoiserParams& p, const sdpo::StreamKey& key, double scale) {
    sdpo::DenoiserParams out = p;
    sdpo::RngStream rng(key);
    for (double& v : out.values()) v += scale * rng.normal();
    return out;
}

struct Instance {
    std::size_t T;
    sdpo::DenoiserParams ref;
    sdpo::DenoiserParams params;
    sdpo::NoiseSchedule schedule;
};

inline Instance make_instance(std::uint64_t seed, double perturb) {
    const sdpo::StreamKey key(seed);
    sdpo::RngStream pick(key.child(1));
    const std::size_t T = 1 + pick.uniform_index(3);
    Instance in{T, sdpo::init_params(small_dims(T), key.child(2)), {}, sdpo::build_schedule(T, 1e-4, 0.2,
                                                                                               sdpo::ScheduleKind::linear)};
    in.params = perturbed(in.ref, key.child(3), perturb);
    return in;
}

inline double rel(long double a, long double b) {
    return static_cast<double>(std::abs(a - b) / (std::abs(b) + 1e-8L));
}

// Rejects instances whose ratios sit within `margin` of a clip edge or whose
// branches nearly tie, so the finite differences see one smooth branch.
inline bool away_from_kinks(const Net& n, const Net& ref, const std::vector<sdpo::TrajectoryPair>& pairs,
                            const std::vector<sdpo::PairAdvantages>& adv, const std::vector<std::size_t>& steps,
                            const sdpo::SdpoConfig& cfg, double margin) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto s = sdpo_step(n, ref, pairs[i], steps[i], adv[i], cfg);
        for (ld r : {s.rho_a, s.rho_b}) {
            if (std::abs(std::abs(r) - static_cast<ld>(cfg.clip_eps)) < margin) return false;
        }
        const bool both_inside = std::abs(s.rho_a) < cfg.clip_eps && std::abs(s.rho_b) < cfg.clip_eps;
        if (!both_inside && std::abs(s.unclipped - s.clipped) < margin) return false;
    }
    return true;
}

inline GradCheck check_sdpo(std::uint64_t seed) {
    for (std::uint64_t attempt = 0;; ++attempt) {
        const std::uint64_t s = seed * 1000 + attempt;
        sdpo::RngStream rng(sdpo::StreamKey(s).child(9));
        const Instance in = make_instance(s, 0.02 + 0.1 * rng.uniform());
        sdpo::SdpoConfig cfg;
        cfg.clip_eps = rng.uniform() < 0.5 ? 0.05 : 0.3;
        cfg.eta = 0.5 + 1.5 * rng.uniform();
        cfg.lambda_decay = 0.8 + 0.2 * rng.uniform();
        cfg.weighting_order = rng.uniform() < 0.5 ? sdpo::WeightingOrder::forward : sdpo::WeightingOrder::reverse;

        std::vector<sdpo::TrajectoryPair> pairs;
        std::vector<sdpo::PairAdvantages> adv;
        std::vector<std::size_t> steps;
        for (std::size_t i = 0; i < 3; ++i) {
            pairs.push_back(sdpo::sample_pair(in.ref, i % 2, in.schedule, sdpo::StreamKey(s).child({4, i})));
            sdpo::PairAdvantages a{std::vector<double>(in.T), std::vector<double>(in.T)};
            for (auto& v : a.a) v = rng.normal();
            for (auto& v : a.b) v = rng.normal();
            adv.push_back(a);
            steps.push_back(rng.uniform_index(in.T));
        }
        const Net n(in.params), ref(in.ref);
        if (!away_from_kinks(n, ref, pairs, adv, steps, cfg, 1e-3)) continue;

        sdpo::ParamGradient grad(in.params);
        const double value = sdpo::sdpo_batch_objective(pairs, adv, steps, in.params, in.ref, cfg, &grad);
        const Vec fd = central_diff(n, [&](const Net& m) { return sdpo_batch(m, ref, pairs, adv, steps, cfg); });
        return {max_rel_error(grad, fd), rel(value, sdpo_batch(n, ref, pairs, adv, steps, cfg)), grad.size()};
    }
}

inline GradCheck check_ddpo(std::uint64_t seed) {
    const Instance in = make_instance(seed, 0.0);
    sdpo::RngStream rng(sdpo::StreamKey(seed).child(9));
    std::vector<sdpo::Trajectory> trajs;
    std::vector<double> adv;
    for (std::size_t i = 0; i < 4; ++i) {
        const sdpo::StreamKey k = sdpo::StreamKey(seed).child({5, i});
        const auto x = sdpo::draw_initial_noise(2, k);
        trajs.push_back(sdpo::sample_trajectory(in.params, i % 2, x, in.schedule, k));
        adv.push_back(rng.normal());
    }
    const Net n(in.params);
    sdpo::ParamGradient grad(in.params);
    const double value = sdpo::ddpo_objective(trajs, adv, in.params, &grad);
    const Vec fd = central_diff(n, [&](const Net& m) { return ddpo(m, trajs, adv); });
    return {max_rel_error(grad, fd), rel(value, ddpo(n, trajs, adv)), grad.size()};
}

inline GradCheck check_rebel(std::uint64_t seed) {
    const Instance in = make_instance(seed, 0.05);
    sdpo::RngStream rng(sdpo::StreamKey(seed).child(9));
    const double eta = 0.5 + rng.uniform();
    std::vector<sdpo::TrajectoryPair> pairs;
    std::vector<double> delta;
    for (std::size_t i = 0; i < 3; ++i) {
        pairs.push_back(sdpo::sample_pair(in.ref, i % 2, in.schedule, sdpo::StreamKey(seed).child({6, i})));
        delta.push_back(rng.normal());
    }
    const Net n(in.params), ref(in.ref);
    sdpo::ParamGradient grad(in.params);
    const double value = sdpo::rebel_objective(pairs, delta, in.params, in.ref, eta, &grad);
    const Vec fd = central_diff(n, [&](const Net& m) { return rebel(m, ref, pairs, delta, eta); });
    return {max_rel_error(grad, fd), rel(value, rebel(n, ref, pairs, delta, eta)), grad.size()};
}

}  // namespace oracle
