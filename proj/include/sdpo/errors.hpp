// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace sdpo {

/// Invalid hyperparameters, ranges or incompatible option combinations.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Vector or parameter dimensions that do not line up.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Unknown prompt id, step index, or named entry.
struct LookupError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

/// A Gaussian transition with zero standard deviation has no density.
struct DensityError : std::domain_error {
    using std::domain_error::domain_error;
};

/// A value that makes a formula singular (zero alpha-bar, zero variance, ...).
struct DegenerateInputError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Non-finite model output while sampling; carries the step index.
struct SamplingError : std::runtime_error {
    SamplingError(const std::string& what, std::size_t step_index)
        : std::runtime_error(what + " (step " + std::to_string(step_index) + ")"), step(step_index) {}
    std::size_t step;
};

/// Loss or parameters became non-finite during training.
struct TrainingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace sdpo
