// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdpo/dense_reward.hpp"

#include <algorithm>
#include <cmath>

#include "sdpo/errors.hpp"
#include "sdpo/kernels.hpp"

namespace sdpo {

double RewardFn::operator()(std::span<const double> x, PromptId c) const {
    switch (kind) {
        case RewardKind::target_distance: {
            if (c >= targets.size()) throw LookupError("reward: unknown prompt id " + std::to_string(c));
            if (targets[c].size() != x.size()) throw ShapeError("reward: target dimension mismatch");
            return std::exp(-kernels::squared_distance(x, targets[c]) / scale);
        }
        case RewardKind::norm_penalty:
            return -kernels::dot(x, x) / scale;
    }
    return 0.0;
}

void RewardFn::validate() const {
    if (!(scale > 0.0)) throw ConfigError("reward scale must be positive");
    if (kind == RewardKind::target_distance && targets.empty()) {
        throw ConfigError("target_distance reward needs per-prompt targets");
    }
}

std::string_view to_string(DenseStrategy s) {
    switch (s) {
        case DenseStrategy::adaptive3: return "adaptive3";
        case DenseStrategy::random3: return "random3";
        case DenseStrategy::fixed3: return "fixed3";
        case DenseStrategy::sim2: return "sim2";
        case DenseStrategy::interp2: return "interp2";
        case DenseStrategy::copy1: return "copy1";
        case DenseStrategy::full: return "full";
    }
    return "?";
}

DenseStrategy dense_strategy_from_string(std::string_view name) {
    for (auto s : kAllDenseStrategies) {
        if (to_string(s) == name) return s;
    }
    throw ConfigError("unknown dense strategy '" + std::string(name) + "'");
}

std::size_t query_count(DenseStrategy s, std::size_t num_steps) {
    switch (s) {
        case DenseStrategy::adaptive3:
        case DenseStrategy::random3:
        case DenseStrategy::fixed3: return 3;
        case DenseStrategy::sim2:
        case DenseStrategy::interp2: return 2;
        case DenseStrategy::copy1: return 1;
        case DenseStrategy::full: return num_steps;
    }
    return 0;
}

std::size_t min_steps(DenseStrategy s) {
    switch (s) {
        case DenseStrategy::adaptive3:
        case DenseStrategy::random3:
        case DenseStrategy::fixed3: return 3;
        case DenseStrategy::sim2:
        case DenseStrategy::interp2: return 2;
        case DenseStrategy::copy1:
        case DenseStrategy::full: return 1;
    }
    return 1;
}

double cosine_sim(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) throw ShapeError("cosine_sim: dimension mismatch");
    const double nu = std::sqrt(kernels::dot(u, u));
    const double nv = std::sqrt(kernels::dot(v, v));
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return std::clamp(kernels::dot(u, v) / (nu * nv), -1.0, 1.0);
}

std::size_t select_anchor(std::span<const std::vector<double>> denoised) {
    const std::size_t n = denoised.size();
    if (n < 3) throw ConfigError("anchor selection needs at least 3 steps");
    const auto& first = denoised[n - 1];
    const auto& last = denoised[0];
    std::size_t best = 1;
    double best_score = cosine_sim(denoised[1], first) + cosine_sim(denoised[1], last);
    for (std::size_t t = 2; t + 1 < n; ++t) {
        const double score = cosine_sim(denoised[t], first) + cosine_sim(denoised[t], last);
        if (score < best_score) {
            best_score = score;
            best = t;
        }
    }
    return best;
}

namespace {

double floored(double sim) { return std::max(sim, kSimilarityFloor); }

}  // namespace

DenseRewards predict_dense(std::span<const std::vector<double>> denoised, PromptId c, const RewardQuery& reward,
                           DenseStrategy strategy, RngStream* rng) {
    const std::size_t n = denoised.size();
    if (n < min_steps(strategy)) {
        throw ConfigError("strategy " + std::string(to_string(strategy)) + " needs at least " +
                          std::to_string(min_steps(strategy)) + " steps, got " + std::to_string(n));
    }
    DenseRewards out;
    out.strategy = strategy;
    out.values.assign(n, 0.0);

    auto query = [&](std::size_t t) {
        const double r = reward(denoised[t], c);
        out.values[t] = r;
        out.queried_steps.push_back(t);
        return r;
    };

    switch (strategy) {
        case DenseStrategy::full:
            for (std::size_t t = 0; t < n; ++t) query(t);
            break;

        case DenseStrategy::copy1: {
            const double r0 = query(0);
            std::fill(out.values.begin(), out.values.end(), r0);
            break;
        }

        case DenseStrategy::interp2: {
            const double r0 = query(0);
            const double rf = query(n - 1);
            for (std::size_t t = 1; t + 1 < n; ++t) {
                const double w = static_cast<double>(t) / static_cast<double>(n - 1);
                out.values[t] = r0 + (rf - r0) * w;
            }
            break;
        }

        case DenseStrategy::sim2: {
            const double r0 = query(0);
            const double rf = query(n - 1);
            for (std::size_t t = 1; t + 1 < n; ++t) {
                const double wf = floored(cosine_sim(denoised[t], denoised[n - 1]));
                const double wl = floored(cosine_sim(denoised[t], denoised[0]));
                out.values[t] = (rf * wf + r0 * wl) / (wf + wl);
            }
            break;
        }

        case DenseStrategy::adaptive3:
        case DenseStrategy::random3:
        case DenseStrategy::fixed3: {
            std::size_t anchor = 0;
            if (strategy == DenseStrategy::adaptive3) {
                anchor = select_anchor(denoised);
            } else if (strategy == DenseStrategy::fixed3) {
                anchor = n / 2;
            } else {
                if (!rng) throw ConfigError("random3 needs a random stream");
                anchor = 1 + rng->uniform_index(n - 2);
            }
            out.anchor = anchor;
            const double r0 = query(0);
            const double ra = query(anchor);
            const double rf = query(n - 1);
            for (std::size_t t = 1; t + 1 < n; ++t) {
                if (t == anchor) continue;
                const double wf = floored(cosine_sim(denoised[t], denoised[n - 1]));
                const double wa = floored(cosine_sim(denoised[t], denoised[anchor]));
                const double wl = floored(cosine_sim(denoised[t], denoised[0]));
                out.values[t] = (rf * wf + ra * wa + r0 * wl) / (wf + wa + wl);
            }
            break;
        }
    }
    std::sort(out.queried_steps.begin(), out.queried_steps.end());
    return out;
}

DenseRewards predict_dense(const Trajectory& traj, const RewardQuery& reward, DenseStrategy strategy,
                           RngStream* rng) {
    return predict_dense(traj.denoised, traj.c, reward, strategy, rng);
}

namespace {

std::vector<double> standardized(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / n);
    std::vector<double> z(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) z[i] = (v[i] - mean) / (sd + 1e-8);
    return z;
}

bool constant(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
}

}  // namespace

SimilarityMetrics similarity_to_target(std::span<const DenseRewards> predicted, std::span<const DenseRewards> target) {
    if (predicted.size() != target.size() || predicted.empty()) {
        throw ShapeError("similarity_to_target: corpora must be non-empty and of equal size");
    }
    std::vector<double> p;
    std::vector<double> q;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (target[i].strategy != DenseStrategy::full) {
            throw ConfigError("similarity_to_target: target must come from the full strategy");
        }
        if (predicted[i].values.size() != target[i].values.size()) {
            throw ShapeError("similarity_to_target: trajectories differ in length");
        }
        if (constant(target[i].values)) throw DegenerateInputError("similarity_to_target: constant target rewards");
        const auto zp = standardized(predicted[i].values);
        const auto zq = standardized(target[i].values);
        p.insert(p.end(), zp.begin(), zp.end());
        q.insert(q.end(), zq.begin(), zq.end());
    }
    SimilarityMetrics m;
    m.cosine = cosine_sim(p, q);
    for (std::size_t i = 0; i < p.size(); ++i) m.l1 += std::abs(p[i] - q[i]);
    m.l2 = std::sqrt(kernels::squared_distance(p, q));
    return m;
}

SimilarityMetrics similarity_to_target(const DenseRewards& predicted, const DenseRewards& target) {
    return similarity_to_target(std::span<const DenseRewards>(&predicted, 1), std::span<const DenseRewards>(&target, 1));
}

}  // namespace sdpo
