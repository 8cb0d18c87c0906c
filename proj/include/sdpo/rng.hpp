// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// Counter-style random streams. A stream is identified by a path of integers
// (seed, purpose tag, epoch, batch, index, ...) which is hashed into a 64-bit
// key; the key seeds an independent Mersenne Twister. Two streams with
// different paths never share state, so sampling order does not change any
// draw.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace sdpo {

/// Purpose tags keep streams for different jobs apart even when the numeric
/// coordinates coincide.
enum class StreamTag : std::uint64_t {
    init_noise = 1,
    reverse_noise = 2,
    prompt = 3,
    shuffle = 4,
    anchor = 5,
    pretrain = 6,
    heldout = 7,
    params_init = 8,
    eval = 9,
    dataset = 10,
    step_count = 11,
    trajectory = 12,
    finetune = 13,
};

class StreamKey {
public:
    explicit StreamKey(std::uint64_t seed);

    /// Derive a child key by appending one coordinate to the path.
    [[nodiscard]] StreamKey child(std::uint64_t coordinate) const;
    [[nodiscard]] StreamKey child(StreamTag tag) const { return child(static_cast<std::uint64_t>(tag)); }
    [[nodiscard]] StreamKey child(std::initializer_list<std::uint64_t> path) const;

    [[nodiscard]] std::uint64_t value() const { return key_; }

    friend bool operator==(const StreamKey&, const StreamKey&) = default;

private:
    struct Raw {};
    StreamKey(Raw, std::uint64_t key) : key_(key) {}
    std::uint64_t key_;
};

class RngStream {
public:
    explicit RngStream(const StreamKey& key) : engine_(key.value()) {}

    double normal() { return normal_(engine_); }
    void fill_normal(std::vector<double>& out);

    /// Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n);

    /// Uniform real in [0, 1).
    double uniform() { return uniform_(engine_); }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace sdpo
