// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// The noise-prediction network eps(x_t, t, c): a two-layer tanh perceptron
// over [x_t, one_hot(t), embed(c)]. All parameters live in one flat buffer so
// the optimizer, checkpointing and finite-difference tests can treat them as
// a single vector.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sdpo/rng.hpp"
#include "sdpo/schedule.hpp"
#include "sdpo/transition.hpp"

namespace sdpo {

struct DenoiserDims {
    std::size_t data_dim = 8;
    std::size_t num_steps = 10;
    std::size_t num_prompts = 4;
    std::size_t embed_dim = 8;
    std::size_t hidden = 64;

    [[nodiscard]] std::size_t input_dim() const { return data_dim + num_steps + embed_dim; }
    friend bool operator==(const DenoiserDims&, const DenoiserDims&) = default;
};

/// Offsets of each tensor inside the flat buffer.
struct ParamLayout {
    explicit ParamLayout(const DenoiserDims& d);

    DenoiserDims dims;
    std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0, embed = 0, total = 0;
};

/// Flat parameter storage with named views. ParamGradient shares the layout.
class ParamBuffer {
public:
    ParamBuffer() : layout_(DenoiserDims{}) {}
    explicit ParamBuffer(const DenoiserDims& dims) : layout_(dims), values_(layout_.total, 0.0) {}

    [[nodiscard]] const DenoiserDims& dims() const { return layout_.dims; }
    [[nodiscard]] const ParamLayout& layout() const { return layout_; }
    [[nodiscard]] std::size_t size() const { return values_.size(); }

    std::span<double> values() { return values_; }
    [[nodiscard]] std::span<const double> values() const { return values_; }

    std::span<double> w1() { return slice(layout_.w1, layout_.b1); }
    std::span<double> b1() { return slice(layout_.b1, layout_.w2); }
    std::span<double> w2() { return slice(layout_.w2, layout_.b2); }
    std::span<double> b2() { return slice(layout_.b2, layout_.embed); }
    std::span<double> embed() { return slice(layout_.embed, layout_.total); }
    std::span<double> embedding(PromptId c);
    [[nodiscard]] std::span<const double> w1() const { return slice(layout_.w1, layout_.b1); }
    [[nodiscard]] std::span<const double> b1() const { return slice(layout_.b1, layout_.w2); }
    [[nodiscard]] std::span<const double> w2() const { return slice(layout_.w2, layout_.b2); }
    [[nodiscard]] std::span<const double> b2() const { return slice(layout_.b2, layout_.embed); }
    [[nodiscard]] std::span<const double> embed() const { return slice(layout_.embed, layout_.total); }
    [[nodiscard]] std::span<const double> embedding(PromptId c) const;

    [[nodiscard]] bool all_finite() const;
    void set_zero();
    [[nodiscard]] bool same_shape(const ParamBuffer& other) const { return dims() == other.dims(); }

    /// this += alpha * other
    void add_scaled(const ParamBuffer& other, double alpha);
    void scale(double alpha);
    [[nodiscard]] double l2_norm() const;

    friend bool operator==(const ParamBuffer& a, const ParamBuffer& b) {
        return a.dims() == b.dims() && a.values_ == b.values_;
    }

private:
    std::span<double> slice(std::size_t a, std::size_t b) { return {values_.data() + a, b - a}; }
    [[nodiscard]] std::span<const double> slice(std::size_t a, std::size_t b) const {
        return {values_.data() + a, b - a};
    }

    ParamLayout layout_;
    std::vector<double> values_;
};

struct DenoiserParams : ParamBuffer {
    using ParamBuffer::ParamBuffer;
};

struct ParamGradient : ParamBuffer {
    using ParamBuffer::ParamBuffer;
    explicit ParamGradient(const DenoiserParams& like) : ParamBuffer(like.dims()) {}
};

/// Small random initialisation: weights ~ N(0, scale^2 / fan_in), biases 0,
/// embeddings ~ N(0, 1).
DenoiserParams init_params(const DenoiserDims& dims, const StreamKey& key, double scale = 1.0);

/// Activations kept from the forward pass for backpropagation.
struct ForwardCache {
    std::vector<double> input;
    std::vector<double> hidden;
    PromptId c = 0;
};

std::vector<double> eps_predict(const DenoiserParams& params, std::span<const double> x_t, std::size_t t,
                                PromptId c);
std::vector<double> eps_predict(const DenoiserParams& params, std::span<const double> x_t, std::size_t t,
                                PromptId c, ForwardCache& cache);

/// grad += scale * d(<g_eps, eps>)/d(params), using the cache of the matching
/// forward call.
void backprop_eps(const DenoiserParams& params, const ForwardCache& cache, std::span<const double> g_eps,
                  double scale, ParamGradient& grad);

/// Gradient of log N(x_prev; mean_params(x_t, t, c), sigma^2 I).
ParamGradient grad_logprob(const DenoiserParams& params, const Transition& transition);

/// grad += scale * grad_logprob(...); returns the log-density under params.
double accumulate_grad_logprob(const DenoiserParams& params, const Transition& transition, double scale,
                               ParamGradient& grad);

/// Per-prompt two-mode Gaussian data: x0 = mean_c +- mode_offset_c + spread * n,
/// each mode with probability 1/2.
struct SyntheticDataset {
    std::size_t num_prompts = 0;
    std::size_t data_dim = 0;
    std::vector<std::vector<double>> means;
    std::vector<std::vector<double>> mode_offsets;
    double spread = 0.1;

    void validate() const;
    std::vector<double> sample(PromptId c, RngStream& rng) const;
    /// The "+" mode centre, mean_c + mode_offset_c.
    [[nodiscard]] std::vector<double> preferred_mode(PromptId c) const;
};

struct DatasetSpec {
    std::size_t num_prompts = 4;
    std::size_t data_dim = 8;
    double mean_radius = 1.5;
    double mode_separation = 1.0;  // distance from the prompt mean to each mode
    double spread = 0.1;
};

SyntheticDataset make_dataset(const DatasetSpec& spec, const StreamKey& key);

struct PretrainOptions {
    std::size_t steps = 3000;
    std::size_t batch_size = 128;
    double lr = 3e-3;
    std::size_t heldout_size = 512;
};

struct PretrainResult {
    DenoiserParams params;
    std::vector<double> loss_trace;  // training-batch MSE per step
    double heldout_initial = 0.0;
    double heldout_final = 0.0;
};

/// Standard epsilon-matching regression with AdamW. Deterministic in the seed.
PretrainResult pretrain(const DenoiserParams& params, const SyntheticDataset& dataset,
                        const NoiseSchedule& schedule, const PretrainOptions& options, std::uint64_t seed);

/// Mean ||eps - noise||^2 / D over a fixed held-out set drawn from `key`.
double denoising_mse(const DenoiserParams& params, const SyntheticDataset& dataset, const NoiseSchedule& schedule,
                     std::size_t count, const StreamKey& key);

}  // namespace sdpo
