// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdpo/adamw.hpp"

#include <cmath>

#include "sdpo/errors.hpp"

namespace sdpo {

AdamW::AdamW(std::size_t num_params, AdamWOptions options)
    : options_(options), m_(num_params, 0.0), v_(num_params, 0.0) {
    if (!(options.lr >= 0.0)) throw ConfigError("AdamW: learning rate must be non-negative");
}

double AdamW::step(DenoiserParams& params, ParamGradient& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) throw ShapeError("AdamW: parameter count mismatch");

    const double norm = grad.l2_norm();
    if (!std::isfinite(norm)) throw TrainingError("AdamW: non-finite gradient");
    if (options_.max_grad_norm > 0.0 && norm > options_.max_grad_norm) {
        grad.scale(options_.max_grad_norm / (norm + 1e-6));
    }

    ++t_;
    const double b1 = options_.beta1;
    const double b2 = options_.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double lr = options_.lr;
    const double decay = 1.0 - lr * options_.weight_decay;

    auto p = params.values();
    auto g = grad.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        m_[i] = b1 * m_[i] + (1.0 - b1) * g[i];
        v_[i] = b2 * v_[i] + (1.0 - b2) * g[i] * g[i];
        const double m_hat = m_[i] / bc1;
        const double v_hat = v_[i] / bc2;
        p[i] = p[i] * decay - lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
    return norm;
}

void AdamW::restore(std::vector<double> m, std::vector<double> v, std::uint64_t t) {
    if (m.size() != m_.size() || v.size() != v_.size()) throw ShapeError("AdamW: restored moments have wrong size");
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
}

}  // namespace sdpo
