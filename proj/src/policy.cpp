// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdpo/policy.hpp"

#include <cmath>
#include <ostream>

#include "json.hpp"
#include "sdpo/errors.hpp"

namespace sdpo {
namespace {

bool finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace

std::vector<double> draw_initial_noise(std::size_t dim, const StreamKey& key) {
    RngStream rng(key.child(StreamTag::init_noise));
    std::vector<double> x(dim);
    rng.fill_normal(x);
    return x;
}

Trajectory sample_trajectory(const DenoiserParams& params, PromptId c, std::span<const double> x_init,
                             const StridedSchedule& schedule, const StreamKey& key) {
    const std::size_t dim = params.dims().data_dim;
    if (x_init.size() != dim) throw ShapeError("sample_trajectory: x_init has wrong dimension");
    if (!finite(x_init)) throw SamplingError("sample_trajectory: non-finite initial noise", schedule.base.num_steps);
    if (schedule.base.num_steps != params.dims().num_steps) {
        throw ShapeError("sample_trajectory: schedule length differs from the model's step encoding");
    }

    const auto steps = sampler_steps(schedule);
    Trajectory traj;
    traj.c = c;
    traj.x_init.assign(x_init.begin(), x_init.end());
    traj.transitions.resize(steps.size());
    traj.denoised.resize(steps.size());

    std::vector<double> x(x_init.begin(), x_init.end());
    std::vector<double> z(dim);
    for (std::size_t k = 0; k < steps.size(); ++k) {
        const SamplerStep& st = steps[k];
        const std::size_t pos = steps.size() - 1 - k;
        const auto eps = eps_predict(params, x, st.t, c);
        if (!finite(eps)) throw SamplingError("model produced non-finite noise prediction", st.t);

        Transition& tr = traj.transitions[pos];
        tr.step = st;
        tr.c = c;
        tr.x_t = x;
        tr.mean = posterior_mean(x, eps, st);
        RngStream rng(key.child(StreamTag::reverse_noise).child(st.t));
        rng.fill_normal(z);
        tr.x_prev.resize(dim);
        for (std::size_t i = 0; i < dim; ++i) tr.x_prev[i] = tr.mean[i] + st.sigma * z[i];
        tr.logprob = st.sigma > 0.0 ? gaussian_logpdf(tr.x_prev, tr.mean, st.sigma) : 0.0;
        traj.denoised[pos] = predict_original(x, eps, st.alpha_bar);
        x = tr.x_prev;
    }
    return traj;
}

Trajectory sample_trajectory(const DenoiserParams& params, PromptId c, std::span<const double> x_init,
                             const NoiseSchedule& schedule, const StreamKey& key) {
    return sample_trajectory(params, c, x_init, stride(schedule, schedule.num_steps), key);
}

TrajectoryPair sample_pair(const DenoiserParams& params, PromptId c, const StridedSchedule& schedule,
                           const StreamKey& key) {
    const auto x_init = draw_initial_noise(params.dims().data_dim, key);
    return {sample_trajectory(params, c, x_init, schedule, key.child(0)),
            sample_trajectory(params, c, x_init, schedule, key.child(1))};
}

TrajectoryPair sample_pair(const DenoiserParams& params, PromptId c, const NoiseSchedule& schedule,
                           const StreamKey& key) {
    return sample_pair(params, c, stride(schedule, schedule.num_steps), key);
}

double logprob_under(const DenoiserParams& params, const Transition& transition) {
    if (!(transition.step.sigma > 0.0)) {
        throw DensityError("logprob_under: sigma = 0 at step " + std::to_string(transition.t()));
    }
    const auto eps = eps_predict(params, transition.x_t, transition.t(), transition.c);
    const auto mean = posterior_mean(transition.x_t, eps, transition.step);
    return gaussian_logpdf(transition.x_prev, mean, transition.step.sigma);
}

double log_ratio(const DenoiserParams& params, const DenoiserParams& ref_params, const Transition& transition) {
    return logprob_under(params, transition) - logprob_under(ref_params, transition);
}

void dump_trajectory(std::ostream& out, const Trajectory& traj, std::size_t epoch, std::size_t batch,
                     std::size_t pair, char side) {
    for (std::size_t pos = traj.transitions.size(); pos-- > 0;) {
        const auto& tr = traj.transitions[pos];
        nlohmann::json rec{{"epoch", epoch},    {"batch", batch},     {"pair", pair},
                           {"side", std::string(1, side)},         {"t", tr.t()},
                           {"c", tr.c},         {"x_t", tr.x_t},      {"x_prev", tr.x_prev},
                           {"logprob", tr.logprob}};
        out << rec.dump() << '\n';
    }
}

}  // namespace sdpo
