// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdpo/sdpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "sdpo/errors.hpp"

namespace sdpo {

std::string_view to_string(WeightingOrder o) { return o == WeightingOrder::forward ? "forward" : "reverse"; }

std::string_view to_string(UpdateMode m) {
    switch (m) {
        case UpdateMode::step_shuffled: return "step_shuffled";
        case UpdateMode::step_accumulated: return "step_accumulated";
        case UpdateMode::stepwise_no_shuffle: return "stepwise_no_shuffle";
    }
    return "?";
}

WeightingOrder weighting_order_from_string(std::string_view name) {
    if (name == "forward") return WeightingOrder::forward;
    if (name == "reverse") return WeightingOrder::reverse;
    throw ConfigError("unknown weighting order '" + std::string(name) + "'");
}

UpdateMode update_mode_from_string(std::string_view name) {
    for (auto m : {UpdateMode::step_shuffled, UpdateMode::step_accumulated, UpdateMode::stepwise_no_shuffle}) {
        if (to_string(m) == name) return m;
    }
    throw ConfigError("unknown update mode '" + std::string(name) + "'");
}

void SdpoConfig::validate() const {
    if (!(eta > 0.0)) throw ConfigError("eta must be positive");
    if (!(clip_eps > 0.0)) throw ConfigError("clip_eps must be positive");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
    if (!(lambda_decay > 0.0 && lambda_decay <= 1.0)) throw ConfigError("lambda_decay must lie in (0, 1]");
    if (!(lr >= 0.0)) throw ConfigError("lr must be non-negative");
    if (batches_per_epoch == 0 || pairs_per_batch == 0) throw ConfigError("batch sizes must be positive");
}

double step_weight(std::size_t t, std::size_t num_steps, const SdpoConfig& config) {
    if (t >= num_steps) throw LookupError("step_weight: step out of range");
    const std::size_t exponent = config.weighting_order == WeightingOrder::forward ? num_steps - t - 1 : t;
    return std::pow(config.lambda_decay, static_cast<double>(exponent)) / config.eta;
}

namespace {

void check_pair(const TrajectoryPair& pair, std::size_t t, const PairAdvantages& adv) {
    if (pair.a.size() != pair.b.size()) throw ShapeError("trajectory pair sides differ in length");
    if (t >= pair.a.size()) throw LookupError("step index " + std::to_string(t) + " out of range");
    if (adv.a.size() != pair.a.size() || adv.b.size() != pair.b.size()) {
        throw ShapeError("advantages do not match trajectory length");
    }
}

StepLoss evaluate(double rho_a, double rho_b, double delta_adv, double weight, double eps) {
    StepLoss s;
    s.rho_a = rho_a;
    s.rho_b = rho_b;
    s.delta_rho = rho_a - rho_b;
    s.delta_rho_clipped = std::clamp(rho_a, -eps, eps) - std::clamp(rho_b, -eps, eps);
    s.delta_adv = delta_adv;
    s.weight = weight;
    const double ru = s.delta_rho * weight - delta_adv;
    const double rc = s.delta_rho_clipped * weight - delta_adv;
    s.unclipped = ru * ru;
    s.clipped = rc * rc;
    s.clipped_branch = s.clipped > s.unclipped;
    s.chosen = s.clipped_branch ? s.clipped : s.unclipped;
    return s;
}

StepLoss loss_terms(const TrajectoryPair& pair, std::size_t t, const DenoiserParams& params,
                    const DenoiserParams& ref_params, const PairAdvantages& adv, const SdpoConfig& config) {
    check_pair(pair, t, adv);
    const double rho_a = log_ratio(params, ref_params, pair.a.transitions[t]);
    const double rho_b = log_ratio(params, ref_params, pair.b.transitions[t]);
    return evaluate(rho_a, rho_b, adv.a[t] - adv.b[t], step_weight(t, pair.a.size(), config), config.clip_eps);
}

}  // namespace

StepLoss step_loss(const TrajectoryPair& pair, std::size_t t, const DenoiserParams& params,
                   const DenoiserParams& ref_params, const PairAdvantages& adv, const SdpoConfig& config) {
    return loss_terms(pair, t, params, ref_params, adv, config);
}

StepLoss accumulate_step_loss_gradient(const TrajectoryPair& pair, std::size_t t, const DenoiserParams& params,
                                       const DenoiserParams& ref_params, const PairAdvantages& adv,
                                       const SdpoConfig& config, double scale, ParamGradient& grad) {
    const StepLoss s = loss_terms(pair, t, params, ref_params, adv, config);
    double coef_a = 0.0;
    double coef_b = 0.0;
    if (s.clipped_branch) {
        const double g = 2.0 * (s.delta_rho_clipped * s.weight - s.delta_adv) * s.weight;
        if (std::abs(s.rho_a) < config.clip_eps) coef_a = g;
        if (std::abs(s.rho_b) < config.clip_eps) coef_b = -g;
    } else {
        const double g = 2.0 * (s.delta_rho * s.weight - s.delta_adv) * s.weight;
        coef_a = g;
        coef_b = -g;
    }
    if (coef_a != 0.0) accumulate_grad_logprob(params, pair.a.transitions[t], scale * coef_a, grad);
    if (coef_b != 0.0) accumulate_grad_logprob(params, pair.b.transitions[t], scale * coef_b, grad);
    return s;
}

ParamGradient step_loss_gradient(const TrajectoryPair& pair, std::size_t t, const DenoiserParams& params,
                                 const DenoiserParams& ref_params, const PairAdvantages& adv,
                                 const SdpoConfig& config) {
    ParamGradient grad(params);
    accumulate_step_loss_gradient(pair, t, params, ref_params, adv, config, 1.0, grad);
    return grad;
}

std::vector<std::vector<std::size_t>> shuffle_steps(std::size_t num_steps, std::size_t num_batches, RngStream& rng) {
    if (num_steps == 0) throw ConfigError("shuffle_steps: need at least one step");
    std::vector<std::vector<std::size_t>> perms(num_batches, std::vector<std::size_t>(num_steps));
    for (auto& perm : perms) {
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = num_steps - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_index(i + 1)]);
    }
    return perms;
}

StreamKey EpochContext::epoch_key() const { return StreamKey(seed).child(StreamTag::finetune).child(epoch); }

const StridedSchedule& EpochContext::schedule_for(std::size_t batch, std::size_t slot) const {
    if (schedules.size() == 1) return schedules.front();
    RngStream rng(epoch_key().child(StreamTag::step_count).child({batch, slot}));
    return schedules[rng.uniform_index(schedules.size())];
}

void EpochContext::validate() const {
    if (schedules.empty()) throw ConfigError("epoch context needs at least one schedule");
    if (!reward) throw ConfigError("epoch context needs a reward function");
    if (num_prompts == 0) throw ConfigError("epoch context needs at least one prompt");
}

SdpoState::SdpoState(const SdpoConfig& cfg, DenseStrategy strategy, NormalizationMode mode, std::size_t num_params)
    : config(cfg), dense_strategy(strategy), stats(mode), optimizer(num_params, AdamWOptions{.lr = cfg.lr}) {
    config.validate();
}

std::vector<PromptId> draw_prompts(const StreamKey& epoch_key, std::size_t batch, std::size_t count,
                                   std::size_t num_prompts) {
    RngStream rng(epoch_key.child(StreamTag::prompt).child(batch));
    std::vector<PromptId> out(count);
    for (auto& c : out) c = rng.uniform_index(num_prompts);
    return out;
}

namespace {

struct PassStats {
    double loss = 0.0;
    double abs_delta_rho = 0.0;
    std::size_t clipped = 0;
    std::size_t ratios = 0;
    std::size_t terms = 0;
};

PassStats batch_pass(const std::vector<TrajectoryPair>& pairs, const std::vector<PairAdvantages>& adv,
                     const std::vector<std::size_t>& steps, const DenoiserParams& params,
                     const DenoiserParams& ref_params, const SdpoConfig& config, ParamGradient* grad) {
    if (pairs.size() != adv.size() || pairs.size() != steps.size() || pairs.empty()) {
        throw ShapeError("sdpo batch: pairs, advantages and steps must be non-empty and aligned");
    }
    const double scale = 1.0 / static_cast<double>(pairs.size());
    PassStats out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        const StepLoss s = grad ? accumulate_step_loss_gradient(pairs[i], steps[i], params, ref_params, adv[i],
                                                                config, scale, *grad)
                                : step_loss(pairs[i], steps[i], params, ref_params, adv[i], config);
        out.loss += scale * s.chosen;
        out.abs_delta_rho += std::abs(s.delta_rho);
        out.clipped += (std::abs(s.rho_a) >= config.clip_eps) + (std::abs(s.rho_b) >= config.clip_eps);
        out.ratios += 2;
        ++out.terms;
    }
    return out;
}

}  // namespace

double sdpo_batch_objective(const std::vector<TrajectoryPair>& pairs, const std::vector<PairAdvantages>& adv,
                            const std::vector<std::size_t>& steps, const DenoiserParams& params,
                            const DenoiserParams& ref_params, const SdpoConfig& config, ParamGradient* grad) {
    return batch_pass(pairs, adv, steps, params, ref_params, config, grad).loss;
}

EpochMetrics sdpo_epoch(DenoiserParams& params, SdpoState& state, const EpochContext& ctx) {
    ctx.validate();
    const SdpoConfig& cfg = state.config;
    cfg.validate();
    if (ctx.schedules.size() != 1) throw ConfigError("sdpo trains on a single fixed schedule");
    const StridedSchedule& schedule = ctx.schedules.front();
    const std::size_t T = schedule.size();
    if (T < min_steps(state.dense_strategy)) {
        throw ConfigError("dense strategy " + std::string(to_string(state.dense_strategy)) + " needs more steps");
    }

    const StreamKey key = ctx.epoch_key();
    const DenoiserParams ref = params;
    EpochMetrics m;
    m.epoch = ctx.epoch;

    RewardQuery query = [&](std::span<const double> x, PromptId c) {
        ++m.reward_queries;
        return (*ctx.reward)(x, c);
    };

    std::vector<TrajectoryPair> pairs;
    std::vector<ReturnRow> rows;
    double reward_sum = 0.0;
    for (std::size_t b = 0; b < cfg.batches_per_epoch; ++b) {
        const auto prompts = draw_prompts(key, b, cfg.pairs_per_batch, ctx.num_prompts);
        for (std::size_t p = 0; p < cfg.pairs_per_batch; ++p) {
            TrajectoryPair pair = sample_pair(params, prompts[p], schedule, key.child(StreamTag::trajectory).child({b, p}));
            std::size_t side = 0;
            for (const Trajectory* traj : {&pair.a, &pair.b}) {
                RngStream anchor_rng(key.child(StreamTag::anchor).child({b, p, side}));
                const DenseRewards dense = predict_dense(*traj, query, state.dense_strategy, &anchor_rng);
                rows.push_back({traj->c, cfg.use_returns ? discounted_returns(dense.values, cfg.gamma) : dense.values});
                reward_sum += (*ctx.reward)(traj->final_sample(), traj->c);
                if (ctx.trajectory_dump) dump_trajectory(*ctx.trajectory_dump, *traj, ctx.epoch, b, p, side ? 'b' : 'a');
                ++side;
            }
            pairs.push_back(std::move(pair));
        }
    }
    m.samples = 2 * pairs.size();
    m.mean_reward_train = reward_sum / static_cast<double>(m.samples);

    const auto normalized = normalize_batch(rows, state.stats);
    std::vector<PairAdvantages> adv(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) adv[i] = {normalized[2 * i], normalized[2 * i + 1]};

    std::vector<std::vector<std::size_t>> perms;
    if (cfg.update_mode == UpdateMode::step_shuffled) {
        RngStream rng(key.child(StreamTag::shuffle));
        perms = shuffle_steps(T, pairs.size(), rng);
    } else {
        std::vector<std::size_t> order(T);
        for (std::size_t u = 0; u < T; ++u) order[u] = T - 1 - u;
        perms.assign(pairs.size(), order);
    }

    state.optimizer.set_lr(cfg.lr);
    PassStats total;
    auto guard = [&](double loss) {
        if (!std::isfinite(loss)) {
            params = ref;
            throw TrainingError("sdpo: non-finite loss in epoch " + std::to_string(ctx.epoch));
        }
    };
    auto optimizer_step = [&](ParamGradient& grad) {
        try {
            state.optimizer.step(params, grad);
        } catch (const TrainingError&) {
            params = ref;
            throw;
        }
        ++m.updates;
    };
    auto add = [&](const PassStats& s) {
        total.loss += s.loss;
        total.abs_delta_rho += s.abs_delta_rho;
        total.clipped += s.clipped;
        total.ratios += s.ratios;
        total.terms += s.terms;
    };

    std::vector<std::size_t> steps(pairs.size());
    if (cfg.update_mode == UpdateMode::step_accumulated) {
        ParamGradient grad(params);
        for (std::size_t u = 0; u < T; ++u) {
            for (std::size_t i = 0; i < pairs.size(); ++i) steps[i] = perms[i][u];
            const PassStats s = batch_pass(pairs, adv, steps, params, ref, cfg, &grad);
            guard(s.loss);
            add(s);
        }
        optimizer_step(grad);
        m.loss = total.loss;
    } else {
        for (std::size_t u = 0; u < T; ++u) {
            for (std::size_t i = 0; i < pairs.size(); ++i) steps[i] = perms[i][u];
            ParamGradient grad(params);
            const PassStats s = batch_pass(pairs, adv, steps, params, ref, cfg, &grad);
            guard(s.loss);
            add(s);
            optimizer_step(grad);
        }
        m.loss = total.loss / static_cast<double>(T);
    }
    m.mean_abs_delta_rho = total.abs_delta_rho / static_cast<double>(total.terms);
    m.clip_fraction = static_cast<double>(total.clipped) / static_cast<double>(total.ratios);
    return m;
}

}  // namespace sdpo
