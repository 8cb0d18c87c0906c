// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// Discounted returns over dense rewards and advantage normalization with
// running statistics keyed per (step, prompt), per prompt, or globally.

#pragma once

#include <compare>
#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sdpo/checkpoint.hpp"
#include "sdpo/transition.hpp"

namespace sdpo {

/// G_t = sum_{k=0..t} gamma^k R_{t-k}, i.e. G_0 = R_0 and G_t = R_t + gamma G_{t-1}.
/// Input and output are in ascending step order.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

enum class NormalizationMode { per_step_prompt, per_prompt, global };

std::string_view to_string(NormalizationMode m);
NormalizationMode normalization_mode_from_string(std::string_view name);

/// Unused coordinates are set to kNone so every mode shares one key type.
struct StatKey {
    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
    std::size_t step = kNone;
    std::size_t prompt = kNone;
    auto operator<=>(const StatKey&) const = default;
};

struct RunningStats {
    double mean = 0.0;
    double std = 0.0;  // population convention
    bool constant = false;
};

/// Population mean/std of a set of values; `constant` when all are equal.
RunningStats compute_stats(std::span<const double> values);

inline constexpr std::size_t kDefaultStatBufferSize = 32;
inline constexpr std::size_t kDefaultStatMinCount = 16;

class RunningStatTable {
public:
    struct Entry {
        std::deque<double> buffer;
        std::size_t count = 0;  // observations ever seen
    };

    explicit RunningStatTable(NormalizationMode mode = NormalizationMode::per_step_prompt,
                              std::size_t capacity = kDefaultStatBufferSize,
                              std::size_t min_count = kDefaultStatMinCount);

    [[nodiscard]] NormalizationMode mode() const { return mode_; }
    [[nodiscard]] std::size_t capacity() const { return capacity_; }
    [[nodiscard]] std::size_t min_count() const { return min_count_; }

    [[nodiscard]] StatKey key(std::size_t step, PromptId c) const;

    void push(const StatKey& key, double value);

    /// Buffer statistics when the key has at least min_count observations.
    [[nodiscard]] std::optional<RunningStats> saturated_stats(const StatKey& key) const;

    [[nodiscard]] const Entry* entry(const StatKey& key) const;
    [[nodiscard]] const std::map<StatKey, Entry>& entries() const { return entries_; }

    void save(Checkpoint& ckpt, const std::string& prefix = "stats/") const;
    static RunningStatTable load(const Checkpoint& ckpt, const std::string& prefix = "stats/");

    friend bool operator==(const RunningStatTable& a, const RunningStatTable& b);

private:
    NormalizationMode mode_;
    std::size_t capacity_;
    std::size_t min_count_;
    std::map<StatKey, Entry> entries_;
};

inline constexpr double kAdvantageEps = 1e-8;

/// One trajectory's returns to be normalized, ascending step order.
struct ReturnRow {
    PromptId c = 0;
    std::vector<double> returns;
};

/// Normalizes every row against the table as it stood before the batch, using
/// the batch's own same-key values as the fallback for keys below min_count,
/// then appends all observations. Zero-variance statistics yield advantage 0.
std::vector<std::vector<double>> normalize_batch(std::span<const ReturnRow> rows, RunningStatTable& table);

/// Single-trajectory form with an explicit fallback set for every key.
std::vector<double> normalize(std::span<const double> returns, PromptId c, RunningStatTable& table,
                              std::span<const double> batch_fallback);

}  // namespace sdpo
