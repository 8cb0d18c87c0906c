// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdpo/denoiser.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sdpo/adamw.hpp"
#include "sdpo/errors.hpp"
#include "sdpo/kernels.hpp"

namespace sdpo {

// ---------------------------------------------------------------------------
// Layout and buffer helpers

ParamLayout::ParamLayout(const DenoiserDims& d) : dims(d) {
    w1 = 0;
    b1 = w1 + d.hidden * d.input_dim();
    w2 = b1 + d.hidden;
    b2 = w2 + d.data_dim * d.hidden;
    embed = b2 + d.data_dim;
    total = embed + d.num_prompts * d.embed_dim;
}

std::span<double> ParamBuffer::embedding(PromptId c) {
    if (c >= dims().num_prompts) throw LookupError("unknown prompt id " + std::to_string(c));
    return embed().subspan(c * dims().embed_dim, dims().embed_dim);
}

std::span<const double> ParamBuffer::embedding(PromptId c) const {
    if (c >= dims().num_prompts) throw LookupError("unknown prompt id " + std::to_string(c));
    return embed().subspan(c * dims().embed_dim, dims().embed_dim);
}

bool ParamBuffer::all_finite() const {
    for (double v : values_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void ParamBuffer::set_zero() { std::fill(values_.begin(), values_.end(), 0.0); }

void ParamBuffer::add_scaled(const ParamBuffer& other, double alpha) {
    if (!same_shape(other)) throw ShapeError("parameter buffers differ in shape");
    kernels::axpy(alpha, other.values(), values());
}

void ParamBuffer::scale(double alpha) {
    for (double& v : values_) v *= alpha;
}

double ParamBuffer::l2_norm() const { return std::sqrt(kernels::dot(values_, values_)); }

DenoiserParams init_params(const DenoiserDims& dims, const StreamKey& key, double scale) {
    DenoiserParams p(dims);
    RngStream rng(key);
    const double s1 = scale / std::sqrt(static_cast<double>(dims.input_dim()));
    const double s2 = scale / std::sqrt(static_cast<double>(dims.hidden));
    for (double& v : p.w1()) v = s1 * rng.normal();
    for (double& v : p.w2()) v = s2 * rng.normal();
    for (double& v : p.embed()) v = rng.normal();
    return p;
}

// ---------------------------------------------------------------------------
// Network

std::vector<double> eps_predict(const DenoiserParams& params, std::span<const double> x_t, std::size_t t,
                                PromptId c, ForwardCache& cache) {
    const DenoiserDims& d = params.dims();
    if (x_t.size() != d.data_dim) throw ShapeError("eps_predict: x_t has wrong dimension");
    if (t >= d.num_steps) throw LookupError("eps_predict: step index " + std::to_string(t) + " out of range");
    const auto emb = params.embedding(c);

    cache.c = c;
    cache.input.assign(d.input_dim(), 0.0);
    std::copy(x_t.begin(), x_t.end(), cache.input.begin());
    cache.input[d.data_dim + t] = 1.0;
    std::copy(emb.begin(), emb.end(), cache.input.begin() + static_cast<std::ptrdiff_t>(d.data_dim + d.num_steps));

    cache.hidden.resize(d.hidden);
    kernels::gemv(params.w1(), cache.input, params.b1(), cache.hidden);
    for (double& h : cache.hidden) h = std::tanh(h);

    std::vector<double> eps(d.data_dim);
    kernels::gemv(params.w2(), cache.hidden, params.b2(), eps);
    return eps;
}

std::vector<double> eps_predict(const DenoiserParams& params, std::span<const double> x_t, std::size_t t,
                                PromptId c) {
    ForwardCache cache;
    return eps_predict(params, x_t, t, c, cache);
}

void backprop_eps(const DenoiserParams& params, const ForwardCache& cache, std::span<const double> g_eps,
                  double scale, ParamGradient& grad) {
    const DenoiserDims& d = params.dims();
    if (!grad.same_shape(params)) throw ShapeError("backprop_eps: gradient shape mismatch");
    if (g_eps.size() != d.data_dim) throw ShapeError("backprop_eps: output gradient has wrong dimension");

    kernels::axpy(scale, g_eps, grad.b2());
    kernels::rank1_update(scale, g_eps, cache.hidden, grad.w2());

    std::vector<double> g_hidden(d.hidden, 0.0);
    kernels::gemv_transposed_acc(params.w2(), g_eps, g_hidden);
    for (std::size_t j = 0; j < d.hidden; ++j) g_hidden[j] *= 1.0 - cache.hidden[j] * cache.hidden[j];

    kernels::axpy(scale, g_hidden, grad.b1());
    kernels::rank1_update(scale, g_hidden, cache.input, grad.w1());

    // Only the embedding slice of the input is a parameter.
    const std::size_t in = d.input_dim();
    const std::size_t off = d.data_dim + d.num_steps;
    auto g_emb = grad.embedding(cache.c);
    const auto w1 = params.w1();
    for (std::size_t j = 0; j < d.hidden; ++j) {
        kernels::axpy(scale * g_hidden[j], w1.subspan(j * in + off, d.embed_dim), g_emb);
    }
}

// ---------------------------------------------------------------------------
// Gaussian transitions

std::vector<double> posterior_mean(std::span<const double> x_t, std::span<const double> eps,
                                   const SamplerStep& step) {
    if (x_t.size() != eps.size()) throw ShapeError("posterior_mean: x_t and eps differ in length");
    if (!(step.alpha > 0.0) || !(step.alpha_bar < 1.0)) {
        throw DegenerateInputError("posterior_mean: singular step coefficients");
    }
    const double inv_sqrt_alpha = 1.0 / std::sqrt(step.alpha);
    const double k = step.beta / std::sqrt(1.0 - step.alpha_bar);
    std::vector<double> m(x_t.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = (x_t[i] - k * eps[i]) * inv_sqrt_alpha;
    return m;
}

double posterior_mean_eps_coefficient(const SamplerStep& step) {
    return -step.beta / (std::sqrt(1.0 - step.alpha_bar) * std::sqrt(step.alpha));
}

double gaussian_logpdf(std::span<const double> x, std::span<const double> mean, double sigma) {
    if (!(sigma > 0.0)) throw DensityError("transition density undefined for sigma = 0");
    if (x.size() != mean.size()) throw ShapeError("gaussian_logpdf: dimension mismatch");
    const double dim = static_cast<double>(x.size());
    const double sq = kernels::squared_distance(x, mean);
    return -0.5 * sq / (sigma * sigma) - dim * std::log(sigma) - 0.5 * dim * std::log(2.0 * std::numbers::pi);
}

double accumulate_grad_logprob(const DenoiserParams& params, const Transition& tr, double scale,
                               ParamGradient& grad) {
    const double sigma = tr.step.sigma;
    if (!(sigma > 0.0)) throw DensityError("grad_logprob: sigma = 0 at step " + std::to_string(tr.t()));
    ForwardCache cache;
    const auto eps = eps_predict(params, tr.x_t, tr.t(), tr.c, cache);
    const auto mean = posterior_mean(tr.x_t, eps, tr.step);
    const double coef = posterior_mean_eps_coefficient(tr.step) / (sigma * sigma);
    std::vector<double> g_eps(mean.size());
    for (std::size_t i = 0; i < mean.size(); ++i) g_eps[i] = coef * (tr.x_prev[i] - mean[i]);
    if (scale != 0.0) backprop_eps(params, cache, g_eps, scale, grad);
    return gaussian_logpdf(tr.x_prev, mean, sigma);
}

ParamGradient grad_logprob(const DenoiserParams& params, const Transition& transition) {
    ParamGradient g(params);
    accumulate_grad_logprob(params, transition, 1.0, g);
    return g;
}

// ---------------------------------------------------------------------------
// Synthetic data and pretraining

void SyntheticDataset::validate() const {
    if (num_prompts == 0 || data_dim == 0) throw ConfigError("dataset needs at least one prompt and dimension");
    if (!(spread > 0.0)) throw ConfigError("dataset spread must be positive");
    if (means.size() != num_prompts || mode_offsets.size() != num_prompts) {
        throw ShapeError("dataset tables do not match num_prompts");
    }
    for (std::size_t c = 0; c < num_prompts; ++c) {
        if (means[c].size() != data_dim || mode_offsets[c].size() != data_dim) {
            throw ShapeError("dataset vectors do not match data_dim");
        }
    }
}

std::vector<double> SyntheticDataset::sample(PromptId c, RngStream& rng) const {
    if (c >= num_prompts) throw LookupError("dataset: unknown prompt id " + std::to_string(c));
    const double sign = rng.uniform() < 0.5 ? 1.0 : -1.0;
    std::vector<double> x(data_dim);
    for (std::size_t i = 0; i < data_dim; ++i) x[i] = means[c][i] + sign * mode_offsets[c][i] + spread * rng.normal();
    return x;
}

std::vector<double> SyntheticDataset::preferred_mode(PromptId c) const {
    if (c >= num_prompts) throw LookupError("dataset: unknown prompt id " + std::to_string(c));
    std::vector<double> x(data_dim);
    for (std::size_t i = 0; i < data_dim; ++i) x[i] = means[c][i] + mode_offsets[c][i];
    return x;
}

namespace {

std::vector<double> random_direction(std::size_t dim, RngStream& rng, double length) {
    std::vector<double> v(dim);
    rng.fill_normal(v);
    const double n = std::sqrt(kernels::dot(v, v));
    for (double& x : v) x *= length / n;
    return v;
}

}  // namespace

SyntheticDataset make_dataset(const DatasetSpec& spec, const StreamKey& key) {
    if (spec.num_prompts == 0 || spec.data_dim == 0) throw ConfigError("dataset spec needs prompts and dimension");
    SyntheticDataset ds;
    ds.num_prompts = spec.num_prompts;
    ds.data_dim = spec.data_dim;
    ds.spread = spec.spread;
    RngStream rng(key);
    for (std::size_t c = 0; c < spec.num_prompts; ++c) {
        ds.means.push_back(random_direction(spec.data_dim, rng, spec.mean_radius));
        ds.mode_offsets.push_back(random_direction(spec.data_dim, rng, spec.mode_separation));
    }
    ds.validate();
    return ds;
}

namespace {

struct NoisedExample {
    PromptId c;
    std::size_t t;
    std::vector<double> x_t;
    std::vector<double> noise;
};

NoisedExample draw_example(const SyntheticDataset& ds, const NoiseSchedule& schedule, RngStream& rng) {
    NoisedExample ex;
    ex.c = rng.uniform_index(ds.num_prompts);
    ex.t = rng.uniform_index(schedule.num_steps);
    const auto x0 = ds.sample(ex.c, rng);
    ex.noise.resize(ds.data_dim);
    rng.fill_normal(ex.noise);
    ex.x_t = forward_noise(x0, ex.t, ex.noise, schedule);
    return ex;
}

void check_compatible(const DenoiserParams& params, const SyntheticDataset& ds, const NoiseSchedule& schedule) {
    ds.validate();
    const auto& d = params.dims();
    if (d.data_dim != ds.data_dim || d.num_prompts != ds.num_prompts || d.num_steps != schedule.num_steps) {
        throw ShapeError("denoiser dimensions do not match dataset/schedule");
    }
}

}  // namespace

double denoising_mse(const DenoiserParams& params, const SyntheticDataset& dataset, const NoiseSchedule& schedule,
                     std::size_t count, const StreamKey& key) {
    check_compatible(params, dataset, schedule);
    RngStream rng(key);
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const auto ex = draw_example(dataset, schedule, rng);
        const auto eps = eps_predict(params, ex.x_t, ex.t, ex.c);
        total += kernels::squared_distance(eps, ex.noise) / static_cast<double>(dataset.data_dim);
    }
    return count ? total / static_cast<double>(count) : 0.0;
}

PretrainResult pretrain(const DenoiserParams& params, const SyntheticDataset& dataset, const NoiseSchedule& schedule,
                        const PretrainOptions& options, std::uint64_t seed) {
    check_compatible(params, dataset, schedule);
    if (!(options.lr > 0.0)) throw ConfigError("pretrain: learning rate must be positive");
    if (options.batch_size == 0) throw ConfigError("pretrain: batch size must be positive");

    const StreamKey root(seed);
    const StreamKey heldout = root.child(StreamTag::heldout);

    PretrainResult out{params, {}, 0.0, 0.0};
    out.heldout_initial = denoising_mse(params, dataset, schedule, options.heldout_size, heldout);

    AdamWOptions adam;
    adam.lr = options.lr;
    AdamW opt(params.size(), adam);
    ParamGradient grad(params);
    ForwardCache cache;
    const double d = static_cast<double>(dataset.data_dim);
    const double nb = static_cast<double>(options.batch_size);
    std::vector<double> g_eps(dataset.data_dim);

    out.loss_trace.reserve(options.steps);
    for (std::size_t step = 0; step < options.steps; ++step) {
        RngStream rng(root.child(StreamTag::pretrain).child(step));
        grad.set_zero();
        double loss = 0.0;
        for (std::size_t i = 0; i < options.batch_size; ++i) {
            const auto ex = draw_example(dataset, schedule, rng);
            const auto eps = eps_predict(out.params, ex.x_t, ex.t, ex.c, cache);
            for (std::size_t k = 0; k < g_eps.size(); ++k) {
                const double r = eps[k] - ex.noise[k];
                loss += r * r / d;
                g_eps[k] = 2.0 * r / (d * nb);
            }
            backprop_eps(out.params, cache, g_eps, 1.0, grad);
        }
        loss /= nb;
        if (!std::isfinite(loss)) {
            throw TrainingError("pretrain diverged at step " + std::to_string(step) + ": loss is not finite");
        }
        out.loss_trace.push_back(loss);
        opt.step(out.params, grad);
    }
    out.heldout_final = denoising_mse(out.params, dataset, schedule, options.heldout_size, heldout);
    return out;
}

}  // namespace sdpo
