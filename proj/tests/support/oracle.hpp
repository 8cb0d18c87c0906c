// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// Long-double reference implementations, written from the model and
// objective definitions only. Nothing here calls into the library's math.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numbers>
#include <vector>

#include "sdpo/baselines.hpp"
#include "sdpo/sdpo.hpp"

namespace oracle {

using ld = long double;
using Vec = std::vector<ld>;

struct Net {
    sdpo::DenoiserDims d;
    Vec p;

    explicit Net(const sdpo::DenoiserParams& params) : d(params.dims()) {
        for (double v : params.values()) p.push_back(v);
    }

    std::size_t in() const { return d.data_dim + d.num_steps + d.embed_dim; }
    std::size_t w1(std::size_t j, std::size_t i) const { return j * in() + i; }
    std::size_t b1(std::size_t j) const { return d.hidden * in() + j; }
    std::size_t w2(std::size_t k, std::size_t j) const { return d.hidden * in() + d.hidden + k * d.hidden + j; }
    std::size_t b2(std::size_t k) const { return d.hidden * in() + d.hidden + d.data_dim * d.hidden + k; }
    std::size_t emb(std::size_t c, std::size_t e) const {
        return d.hidden * in() + d.hidden + d.data_dim * d.hidden + d.data_dim + c * d.embed_dim + e;
    }
};

inline Vec eps(const Net& n, const std::vector<double>& x, std::size_t t, std::size_t c) {
    Vec input(n.in(), 0.0L);
    for (std::size_t i = 0; i < n.d.data_dim; ++i) input[i] = x[i];
    input[n.d.data_dim + t] = 1.0L;
    for (std::size_t e = 0; e < n.d.embed_dim; ++e) input[n.d.data_dim + n.d.num_steps + e] = n.p[n.emb(c, e)];
    Vec h(n.d.hidden);
    for (std::size_t j = 0; j < n.d.hidden; ++j) {
        ld a = n.p[n.b1(j)];
        for (std::size_t i = 0; i < n.in(); ++i) a += n.p[n.w1(j, i)] * input[i];
        h[j] = std::tanh(a);
    }
    Vec out(n.d.data_dim);
    for (std::size_t k = 0; k < n.d.data_dim; ++k) {
        ld a = n.p[n.b2(k)];
        for (std::size_t j = 0; j < n.d.hidden; ++j) a += n.p[n.w2(k, j)] * h[j];
        out[k] = a;
    }
    return out;
}

// log N(x_prev; (x_t - beta/sqrt(1-abar) eps)/sqrt(alpha), sigma^2 I)
inline ld logprob(const Net& n, const sdpo::Transition& tr) {
    const auto& s = tr.step;
    const Vec e = eps(n, tr.x_t, tr.t(), tr.c);
    const ld k = static_cast<ld>(s.beta) / std::sqrt(1.0L - static_cast<ld>(s.alpha_bar));
    const ld inv = 1.0L / std::sqrt(static_cast<ld>(s.alpha));
    const ld sigma = s.sigma;
    ld sq = 0.0L;
    for (std::size_t i = 0; i < e.size(); ++i) {
        const ld m = (static_cast<ld>(tr.x_t[i]) - k * e[i]) * inv;
        const ld r = static_cast<ld>(tr.x_prev[i]) - m;
        sq += r * r;
    }
    const ld dim = static_cast<ld>(e.size());
    return -0.5L * sq / (sigma * sigma) - dim * std::log(sigma) - 0.5L * dim * std::log(2.0L * std::numbers::pi_v<ld>);
}

struct StepTerms {
    ld rho_a, rho_b, unclipped, clipped, chosen;
};

inline StepTerms sdpo_step(const Net& n, const Net& ref, const sdpo::TrajectoryPair& pair, std::size_t t,
                           const sdpo::PairAdvantages& adv, const sdpo::SdpoConfig& cfg) {
    const std::size_t T = pair.a.size();
    const std::size_t expo = cfg.weighting_order == sdpo::WeightingOrder::forward ? T - 1 - t : t;
    ld w = 1.0L;
    for (std::size_t i = 0; i < expo; ++i) w *= cfg.lambda_decay;
    w /= cfg.eta;
    const ld eps_c = cfg.clip_eps;
    StepTerms s{};
    s.rho_a = logprob(n, pair.a.transitions[t]) - logprob(ref, pair.a.transitions[t]);
    s.rho_b = logprob(n, pair.b.transitions[t]) - logprob(ref, pair.b.transitions[t]);
    const ld dadv = static_cast<ld>(adv.a[t]) - static_cast<ld>(adv.b[t]);
    const ld du = s.rho_a - s.rho_b;
    const ld dc = std::clamp(s.rho_a, -eps_c, eps_c) - std::clamp(s.rho_b, -eps_c, eps_c);
    s.unclipped = (du * w - dadv) * (du * w - dadv);
    s.clipped = (dc * w - dadv) * (dc * w - dadv);
    s.chosen = std::max(s.unclipped, s.clipped);
    return s;
}

inline ld sdpo_batch(const Net& n, const Net& ref, const std::vector<sdpo::TrajectoryPair>& pairs,
                     const std::vector<sdpo::PairAdvantages>& adv, const std::vector<std::size_t>& steps,
                     const sdpo::SdpoConfig& cfg) {
    ld total = 0.0L;
    for (std::size_t i = 0; i < pairs.size(); ++i) total += sdpo_step(n, ref, pairs[i], steps[i], adv[i], cfg).chosen;
    return total / static_cast<ld>(pairs.size());
}

inline ld ddpo(const Net& n, const std::vector<sdpo::Trajectory>& trajs, const std::vector<double>& adv) {
    ld total = 0.0L;
    for (std::size_t i = 0; i < trajs.size(); ++i) {
        ld lp = 0.0L;
        for (const auto& tr : trajs[i].transitions) {
            if (tr.step.sigma > 0.0) lp += logprob(n, tr);
        }
        total -= static_cast<ld>(adv[i]) * lp;
    }
    return total / static_cast<ld>(trajs.size());
}

inline ld rebel(const Net& n, const Net& ref, const std::vector<sdpo::TrajectoryPair>& pairs,
                const std::vector<double>& delta_adv, double eta) {
    ld total = 0.0L;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        for (std::size_t t = 0; t < pairs[i].a.size(); ++t) {
            const auto& ta = pairs[i].a.transitions[t];
            const auto& tb = pairs[i].b.transitions[t];
            if (!(ta.step.sigma > 0.0)) continue;
            const ld d = (logprob(n, ta) - logprob(ref, ta) - logprob(n, tb) + logprob(ref, tb)) / eta;
            const ld r = d - static_cast<ld>(delta_adv[i]);
            total += r * r;
        }
    }
    return total / static_cast<ld>(pairs.size());
}

inline ld cosine(const std::vector<double>& u, const std::vector<double>& v) {
    ld uv = 0, uu = 0, vv = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        uv += static_cast<ld>(u[i]) * v[i];
        uu += static_cast<ld>(u[i]) * u[i];
        vv += static_cast<ld>(v[i]) * v[i];
    }
    return uv / std::sqrt(uu * vv);
}

// Exhaustive scan of interior steps; first is the noisiest (last index).
inline std::size_t brute_anchor(const std::vector<std::vector<double>>& d) {
    std::size_t best = 0;
    ld score = 1e300L;
    for (std::size_t t = 1; t + 1 < d.size(); ++t) {
        const ld s = cosine(d[t], d.front()) + cosine(d[t], d.back());
        if (s < score) {
            score = s;
            best = t;
        }
    }
    return best;
}

// Central differences of f over every entry of n.p.
inline Vec central_diff(Net n, const std::function<ld(const Net&)>& f, ld h = 1e-5L) {
    Vec g(n.p.size());
    for (std::size_t i = 0; i < n.p.size(); ++i) {
        const ld keep = n.p[i];
        n.p[i] = keep + h;
        const ld up = f(n);
        n.p[i] = keep - h;
        const ld down = f(n);
        n.p[i] = keep;
        g[i] = (up - down) / (2.0L * h);
    }
    return g;
}

inline double max_rel_error(const sdpo::ParamBuffer& analytic, const Vec& numeric) {
    double worst = 0.0;
    const auto a = analytic.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double err = static_cast<double>(std::abs(static_cast<ld>(a[i]) - numeric[i]) /
                                               (std::abs(static_cast<ld>(a[i])) + 1e-8L));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace oracle
