// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdpo/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sdpo/errors.hpp"

namespace sdpo {
namespace {

std::vector<double> linear_betas(std::size_t n, double lo, double hi) {
    std::vector<double> b(n);
    if (n == 1) {
        b[0] = lo;
        return b;
    }
    for (std::size_t i = 0; i < n; ++i) {
        b[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    }
    return b;
}

// Cosine alpha-bar curve with offset s = 0.008, turned into per-step betas and
// clipped to [lo, hi].
std::vector<double> cosine_betas(std::size_t n, double lo, double hi) {
    constexpr double s = 0.008;
    auto f = [&](double u) {
        const double c = std::cos((u / static_cast<double>(n) + s) / (1.0 + s) * std::numbers::pi / 2.0);
        return c * c;
    };
    std::vector<double> b(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double raw = 1.0 - f(static_cast<double>(i + 1)) / f(static_cast<double>(i));
        b[i] = std::clamp(raw, lo, hi);
    }
    return b;
}

void check_step(std::size_t t, const NoiseSchedule& s) {
    if (t >= s.num_steps) {
        throw LookupError("step index " + std::to_string(t) + " outside schedule of " +
                          std::to_string(s.num_steps) + " steps");
    }
}

}  // namespace

NoiseSchedule build_schedule(std::size_t num_steps, double beta_min, double beta_max, ScheduleKind kind,
                             ScheduleOptions options) {
    if (num_steps == 0) throw ConfigError("schedule needs at least one step");
    if (!(beta_min > 0.0) || !(beta_min <= beta_max) || !(beta_max < 1.0)) {
        throw ConfigError("beta range must satisfy 0 < beta_min <= beta_max < 1");
    }

    NoiseSchedule s;
    s.num_steps = num_steps;
    s.deterministic_last_step = options.deterministic_last_step;
    s.betas = kind == ScheduleKind::linear ? linear_betas(num_steps, beta_min, beta_max)
                                           : cosine_betas(num_steps, beta_min, beta_max);
    s.alphas.resize(num_steps);
    s.alpha_bars.resize(num_steps);
    s.sigmas.resize(num_steps);

    double running = 1.0;
    for (std::size_t t = 0; t < num_steps; ++t) {
        s.alphas[t] = 1.0 - s.betas[t];
        running *= s.alphas[t];
        s.alpha_bars[t] = running;
    }

    // DDPM posterior std for t >= 1. The posterior variance vanishes at t = 0,
    // so the last step borrows sigma_1 (or sqrt(beta_0) for a one-step
    // schedule) to keep every transition a proper Gaussian.
    for (std::size_t t = 1; t < num_steps; ++t) {
        const double var = (1.0 - s.alpha_bars[t - 1]) / (1.0 - s.alpha_bars[t]) * s.betas[t];
        s.sigmas[t] = std::sqrt(var);
    }
    s.sigmas[0] = num_steps >= 2 ? s.sigmas[1] : std::sqrt(s.betas[0]);
    if (options.deterministic_last_step) s.sigmas[0] = 0.0;
    return s;
}

std::vector<double> forward_noise(std::span<const double> x0, std::size_t t, std::span<const double> noise,
                                  const NoiseSchedule& schedule) {
    check_step(t, schedule);
    if (x0.size() != noise.size()) throw ShapeError("forward_noise: x0 and noise differ in length");
    const double a = std::sqrt(schedule.alpha_bars[t]);
    const double b = std::sqrt(1.0 - schedule.alpha_bars[t]);
    std::vector<double> out(x0.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + b * noise[i];
    return out;
}

std::vector<double> predict_original(std::span<const double> x_t, std::span<const double> eps_hat,
                                     double alpha_bar) {
    if (x_t.size() != eps_hat.size()) throw ShapeError("predict_original: x_t and eps differ in length");
    if (!(alpha_bar > 0.0)) throw DegenerateInputError("predict_original: alpha_bar must be positive");
    const double inv = 1.0 / std::sqrt(alpha_bar);
    const double b = std::sqrt(1.0 - alpha_bar);
    std::vector<double> out(x_t.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (x_t[i] - b * eps_hat[i]) * inv;
    return out;
}

std::vector<double> predict_original(std::span<const double> x_t, std::span<const double> eps_hat, std::size_t t,
                                     const NoiseSchedule& schedule) {
    check_step(t, schedule);
    return predict_original(x_t, eps_hat, schedule.alpha_bars[t]);
}

StridedSchedule stride(const NoiseSchedule& schedule, std::size_t k) {
    const std::size_t n = schedule.num_steps;
    if (k == 0 || k > n) {
        throw ConfigError("stride: K=" + std::to_string(k) + " outside [1, " + std::to_string(n) + "]");
    }
    StridedSchedule out{schedule, {}};
    out.selected_steps.reserve(k);
    if (k == 1) {
        out.selected_steps.push_back(n - 1);
        return out;
    }
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t offset = (i * (n - 1) + (k - 2)) / (k - 1);  // ceil(i (n-1) / (k-1))
        out.selected_steps.push_back(n - 1 - offset);
    }
    std::reverse(out.selected_steps.begin(), out.selected_steps.end());
    return out;
}

std::vector<SamplerStep> sampler_steps(const StridedSchedule& schedule) {
    const NoiseSchedule& base = schedule.base;
    const auto& sel = schedule.selected_steps;
    std::vector<SamplerStep> steps;
    steps.reserve(sel.size());
    for (std::size_t pos = sel.size(); pos-- > 0;) {
        const std::size_t t = sel[pos];
        SamplerStep st;
        st.t = t;
        st.alpha_bar = base.alpha_bars[t];
        if (pos == 0) {
            // Into the clean sample.
            st.alpha_bar_next = 1.0;
            if (t == 0) {
                st.alpha = base.alphas[0];
                st.beta = base.betas[0];
            } else {
                st.alpha = base.alpha_bars[t];
                st.beta = 1.0 - base.alpha_bars[t];
            }
            st.sigma = base.sigmas[0];
        } else {
            const std::size_t next = sel[pos - 1];
            st.alpha_bar_next = base.alpha_bars[next];
            if (next + 1 == t) {
                st.alpha = base.alphas[t];
                st.beta = base.betas[t];
                st.sigma = base.sigmas[t];
            } else {
                st.alpha = base.alpha_bars[t] / base.alpha_bars[next];
                st.beta = 1.0 - st.alpha;
                st.sigma = std::sqrt((1.0 - base.alpha_bars[next]) / (1.0 - base.alpha_bars[t]) * st.beta);
            }
        }
        steps.push_back(st);
    }
    return steps;
}

std::vector<SamplerStep> sampler_steps(const NoiseSchedule& schedule) {
    return sampler_steps(stride(schedule, schedule.num_steps));
}

}  // namespace sdpo
