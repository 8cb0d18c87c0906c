// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdpo/baselines.hpp"

#include <cmath>
#include <string>

#include "sdpo/errors.hpp"

namespace sdpo {

void BaselineConfig::validate() const {
    if (!(lr >= 0.0)) throw ConfigError("baseline lr must be non-negative");
    if (!(eta > 0.0)) throw ConfigError("baseline eta must be positive");
    if (batches_per_epoch == 0) throw ConfigError("baseline needs at least one batch per epoch");
    if (trajectories_per_batch < 2 || trajectories_per_batch % 2 != 0) {
        throw ConfigError("trajectories_per_batch must be a positive even number");
    }
}

BaselineState::BaselineState(const BaselineConfig& cfg, std::size_t num_params)
    : config(cfg), stats(NormalizationMode::per_prompt), optimizer(num_params, AdamWOptions{.lr = cfg.lr}) {
    config.validate();
}

double ddpo_objective(const std::vector<Trajectory>& trajectories, const std::vector<double>& advantages,
                      const DenoiserParams& params, ParamGradient* grad) {
    if (trajectories.size() != advantages.size() || trajectories.empty()) {
        throw ShapeError("ddpo: trajectories and advantages must be non-empty and aligned");
    }
    const double scale = 1.0 / static_cast<double>(trajectories.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < trajectories.size(); ++i) {
        const double w = -scale * advantages[i];
        for (const auto& tr : trajectories[i].transitions) {
            if (tr.step.sigma == 0.0) continue;
            const double lp = grad && w != 0.0 ? accumulate_grad_logprob(params, tr, w, *grad) : logprob_under(params, tr);
            loss += w * lp;
        }
    }
    return loss;
}

double rebel_objective(const std::vector<TrajectoryPair>& pairs, const std::vector<double>& delta_adv,
                       const DenoiserParams& params, const DenoiserParams& ref_params, double eta,
                       ParamGradient* grad) {
    if (pairs.size() != delta_adv.size() || pairs.empty()) {
        throw ShapeError("rebel: pairs and advantage differences must be non-empty and aligned");
    }
    const double scale = 1.0 / static_cast<double>(pairs.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const auto& pa = pairs[i].a.transitions;
        const auto& pb = pairs[i].b.transitions;
        if (pa.size() != pb.size()) throw ShapeError("rebel: pair sides differ in length");
        for (std::size_t t = 0; t < pa.size(); ++t) {
            if (pa[t].step.sigma == 0.0) continue;
            const double d = (log_ratio(params, ref_params, pa[t]) - log_ratio(params, ref_params, pb[t])) / eta;
            const double r = d - delta_adv[i];
            loss += scale * r * r;
            if (grad && r != 0.0) {
                const double g = scale * 2.0 * r / eta;
                accumulate_grad_logprob(params, pa[t], g, *grad);
                accumulate_grad_logprob(params, pb[t], -g, *grad);
            }
        }
    }
    return loss;
}

namespace {

void apply_update(DenoiserParams& params, const DenoiserParams& restore, AdamW& optimizer, ParamGradient& grad,
                  double loss, std::size_t epoch, const char* algo) {
    if (!std::isfinite(loss)) {
        params = restore;
        throw TrainingError(std::string(algo) + ": non-finite loss in epoch " + std::to_string(epoch));
    }
    try {
        optimizer.step(params, grad);
    } catch (const TrainingError&) {
        params = restore;
        throw;
    }
}

}  // namespace

EpochMetrics ddpo_epoch(DenoiserParams& params, BaselineState& state, const EpochContext& ctx) {
    ctx.validate();
    const BaselineConfig& cfg = state.config;
    cfg.validate();
    const StreamKey key = ctx.epoch_key();
    const DenoiserParams start = params;
    state.optimizer.set_lr(cfg.lr);

    EpochMetrics m;
    m.epoch = ctx.epoch;
    double reward_sum = 0.0;
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
        const auto prompts = draw_prompts(key, b, cfg.trajectories_per_batch, ctx.num_prompts);
        std::vector<Trajectory> trajs;
        std::vector<ReturnRow> rows;
        for (std::size_t i = 0; i < cfg.trajectories_per_batch; ++i) {
            const StreamKey k = key.child(StreamTag::trajectory).child({b, i});
            const auto x_init = draw_initial_noise(params.dims().data_dim, k);
            trajs.push_back(sample_trajectory(params, prompts[i], x_init, ctx.schedule_for(b, i), k));
            const double r = (*ctx.reward)(trajs.back().final_sample(), prompts[i]);
            ++m.reward_queries;
            reward_sum += r;
            rows.push_back({prompts[i], {r}});
            if (ctx.trajectory_dump) dump_trajectory(*ctx.trajectory_dump, trajs.back(), ctx.epoch, b, i, 'a');
        }
        const auto normalized = normalize_batch(rows, state.stats);
        std::vector<double> adv(normalized.size());
        for (std::size_t i = 0; i < adv.size(); ++i) adv[i] = normalized[i][0];

        ParamGradient grad(params);
        const double loss = ddpo_objective(trajs, adv, params, &grad);
        apply_update(params, start, state.optimizer, grad, loss, ctx.epoch, "ddpo");
        loss_sum += loss;
        ++m.updates;
        m.samples += trajs.size();
    }
    m.mean_reward_train = reward_sum / static_cast<double>(m.samples);
    m.loss = loss_sum / static_cast<double>(cfg.batches_per_epoch);
    return m;
}

EpochMetrics rebel_epoch(DenoiserParams& params, BaselineState& state, const EpochContext& ctx) {
    ctx.validate();
    const BaselineConfig& cfg = state.config;
    cfg.validate();
    const StreamKey key = ctx.epoch_key();
    const DenoiserParams ref = params;
    state.optimizer.set_lr(cfg.lr);
    const std::size_t pairs_per_batch = cfg.trajectories_per_batch / 2;

    EpochMetrics m;
    m.epoch = ctx.epoch;
    double reward_sum = 0.0;
    std::vector<std::vector<TrajectoryPair>> batches(cfg.batches_per_epoch);
    std::vector<std::vector<double>> deltas(cfg.batches_per_epoch);
    for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
        const auto prompts = draw_prompts(key, b, pairs_per_batch, ctx.num_prompts);
        std::vector<ReturnRow> rows;
        for (std::size_t p = 0; p < pairs_per_batch; ++p) {
            TrajectoryPair pair =
                sample_pair(params, prompts[p], ctx.schedule_for(b, p), key.child(StreamTag::trajectory).child({b, p}));
            for (const Trajectory* traj : {&pair.a, &pair.b}) {
                const double r = (*ctx.reward)(traj->final_sample(), traj->c);
                ++m.reward_queries;
                reward_sum += r;
                rows.push_back({traj->c, {r}});
            }
            if (ctx.trajectory_dump) {
                dump_trajectory(*ctx.trajectory_dump, pair.a, ctx.epoch, b, p, 'a');
                dump_trajectory(*ctx.trajectory_dump, pair.b, ctx.epoch, b, p, 'b');
            }
            batches[b].push_back(std::move(pair));
        }
        const auto normalized = normalize_batch(rows, state.stats);
        for (std::size_t p = 0; p < pairs_per_batch; ++p) {
            deltas[b].push_back(normalized[2 * p][0] - normalized[2 * p + 1][0]);
        }
        m.samples += 2 * pairs_per_batch;
    }
    m.mean_reward_train = reward_sum / static_cast<double>(m.samples);

    double loss_sum = 0.0;
    double abs_rho = 0.0;
    std::size_t terms = 0;
    for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
        for (const auto& pair : batches[b]) {
            for (std::size_t t = 0; t < pair.a.size(); ++t) {
                if (pair.a.transitions[t].step.sigma == 0.0) continue;
                abs_rho += std::abs(log_ratio(params, ref, pair.a.transitions[t]) -
                                    log_ratio(params, ref, pair.b.transitions[t]));
                ++terms;
            }
        }
        ParamGradient grad(params);
        const double loss = rebel_objective(batches[b], deltas[b], params, ref, cfg.eta, &grad);
        apply_update(params, ref, state.optimizer, grad, loss, ctx.epoch, "rebel");
        loss_sum += loss;
        ++m.updates;
    }
    m.loss = loss_sum / static_cast<double>(cfg.batches_per_epoch);
    m.mean_abs_delta_rho = terms ? abs_rho / static_cast<double>(terms) : 0.0;
    return m;
}

}  // namespace sdpo
