// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdpo/credit.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "sdpo/errors.hpp"

namespace sdpo {

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("discount factor must lie in (0, 1]");
    std::vector<double> g(rewards.size());
    double acc = 0.0;
    for (std::size_t t = 0; t < rewards.size(); ++t) {
        acc = t == 0 ? rewards[0] : rewards[t] + gamma * acc;
        g[t] = acc;
    }
    return g;
}

std::string_view to_string(NormalizationMode m) {
    switch (m) {
        case NormalizationMode::per_step_prompt: return "per_step_prompt";
        case NormalizationMode::per_prompt: return "per_prompt";
        case NormalizationMode::global: return "global";
    }
    return "?";
}

NormalizationMode normalization_mode_from_string(std::string_view name) {
    for (auto m : {NormalizationMode::per_step_prompt, NormalizationMode::per_prompt, NormalizationMode::global}) {
        if (to_string(m) == name) return m;
    }
    throw ConfigError("unknown normalization mode '" + std::string(name) + "'");
}

RunningStats compute_stats(std::span<const double> values) {
    if (values.empty()) throw DegenerateInputError("statistics of an empty set");
    RunningStats s;
    const double n = static_cast<double>(values.size());
    for (double v : values) s.mean += v;
    s.mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(var / n);
    s.constant = std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); });
    return s;
}

RunningStatTable::RunningStatTable(NormalizationMode mode, std::size_t capacity, std::size_t min_count)
    : mode_(mode), capacity_(capacity), min_count_(min_count) {
    if (capacity == 0) throw ConfigError("running statistics buffer needs positive capacity");
}

StatKey RunningStatTable::key(std::size_t step, PromptId c) const {
    switch (mode_) {
        case NormalizationMode::per_step_prompt: return {step, c};
        case NormalizationMode::per_prompt: return {StatKey::kNone, c};
        case NormalizationMode::global: return {};
    }
    return {};
}

void RunningStatTable::push(const StatKey& key, double value) {
    Entry& e = entries_[key];
    e.buffer.push_back(value);
    if (e.buffer.size() > capacity_) e.buffer.pop_front();
    ++e.count;
}

std::optional<RunningStats> RunningStatTable::saturated_stats(const StatKey& key) const {
    const Entry* e = entry(key);
    if (!e || e->count < min_count_ || e->buffer.empty()) return std::nullopt;
    const std::vector<double> values(e->buffer.begin(), e->buffer.end());
    return compute_stats(values);
}

const RunningStatTable::Entry* RunningStatTable::entry(const StatKey& key) const {
    const auto it = entries_.find(key);
    return it == entries_.end() ? nullptr : &it->second;
}

namespace {

double as_double(std::size_t v) { return v == StatKey::kNone ? -1.0 : static_cast<double>(v); }
std::size_t as_index(double v) { return v < 0.0 ? StatKey::kNone : static_cast<std::size_t>(v); }

double advantage(double value, const RunningStats& s) {
    if (s.constant || s.std == 0.0) return 0.0;
    return (value - s.mean) / (s.std + kAdvantageEps);
}

}  // namespace

void RunningStatTable::save(Checkpoint& ckpt, const std::string& prefix) const {
    ckpt.put(prefix + "config", {static_cast<double>(static_cast<int>(mode_)), static_cast<double>(capacity_),
                                 static_cast<double>(min_count_)});
    for (const auto& [k, e] : entries_) {
        std::vector<double> row{as_double(k.step), as_double(k.prompt), static_cast<double>(e.count)};
        row.insert(row.end(), e.buffer.begin(), e.buffer.end());
        ckpt.put(prefix + "entry/" + std::to_string(static_cast<long long>(as_double(k.step))) + "/" +
                     std::to_string(static_cast<long long>(as_double(k.prompt))),
                 std::move(row));
    }
}

RunningStatTable RunningStatTable::load(const Checkpoint& ckpt, const std::string& prefix) {
    const auto& cfg = ckpt.at(prefix + "config");
    if (cfg.size() != 3) throw IoError("stats config array must have 3 entries");
    RunningStatTable table(static_cast<NormalizationMode>(static_cast<int>(cfg[0])), static_cast<std::size_t>(cfg[1]),
                           static_cast<std::size_t>(cfg[2]));
    for (const auto& name : ckpt.names_with_prefix(prefix + "entry/")) {
        const auto& row = ckpt.at(name);
        if (row.size() < 3) throw IoError("malformed stats entry " + name);
        Entry e;
        e.count = static_cast<std::size_t>(row[2]);
        e.buffer.assign(row.begin() + 3, row.end());
        table.entries_[{as_index(row[0]), as_index(row[1])}] = std::move(e);
    }
    return table;
}

bool operator==(const RunningStatTable& a, const RunningStatTable& b) {
    if (a.mode_ != b.mode_ || a.capacity_ != b.capacity_ || a.min_count_ != b.min_count_) return false;
    if (a.entries_.size() != b.entries_.size()) return false;
    for (auto ia = a.entries_.begin(), ib = b.entries_.begin(); ia != a.entries_.end(); ++ia, ++ib) {
        if (ia->first != ib->first || ia->second.count != ib->second.count ||
            ia->second.buffer != ib->second.buffer) {
            return false;
        }
    }
    return true;
}

std::vector<std::vector<double>> normalize_batch(std::span<const ReturnRow> rows, RunningStatTable& table) {
    std::map<StatKey, std::vector<double>> fallback;
    for (const auto& row : rows) {
        for (std::size_t t = 0; t < row.returns.size(); ++t) fallback[table.key(t, row.c)].push_back(row.returns[t]);
    }
    std::map<StatKey, RunningStats> stats;
    for (const auto& [key, values] : fallback) {
        const auto saturated = table.saturated_stats(key);
        stats[key] = saturated ? *saturated : compute_stats(values);
    }

    std::vector<std::vector<double>> out;
    out.reserve(rows.size());
    for (const auto& row : rows) {
        std::vector<double> adv(row.returns.size());
        for (std::size_t t = 0; t < row.returns.size(); ++t) {
            adv[t] = advantage(row.returns[t], stats.at(table.key(t, row.c)));
        }
        out.push_back(std::move(adv));
    }
    for (const auto& row : rows) {
        for (std::size_t t = 0; t < row.returns.size(); ++t) table.push(table.key(t, row.c), row.returns[t]);
    }
    return out;
}

std::vector<double> normalize(std::span<const double> returns, PromptId c, RunningStatTable& table,
                              std::span<const double> batch_fallback) {
    if (batch_fallback.empty()) throw ConfigError("normalize: batch fallback must be non-empty");
    const RunningStats fallback = compute_stats(batch_fallback);
    std::vector<double> adv(returns.size());
    for (std::size_t t = 0; t < returns.size(); ++t) {
        const auto saturated = table.saturated_stats(table.key(t, c));
        adv[t] = advantage(returns[t], saturated ? *saturated : fallback);
    }
    for (std::size_t t = 0; t < returns.size(); ++t) table.push(table.key(t, c), returns[t]);
    return adv;
}

}  // namespace sdpo
