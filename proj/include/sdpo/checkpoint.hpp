// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint container: a version header followed by a flat list of named
// double arrays, stored as raw little-endian IEEE-754 so that save/load is
// bit-exact.
//
//   "SDPOCKPT" | u32 version | u32 count |
//   count x ( u32 name_len | name bytes | u64 n | n x f64 )

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sdpo/denoiser.hpp"

namespace sdpo {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedArray {
    std::string name;
    std::vector<double> data;
    friend bool operator==(const NamedArray&, const NamedArray&) = default;
};

struct Checkpoint {
    std::uint32_t version = kCheckpointVersion;
    std::vector<NamedArray> arrays;

    void put(std::string name, std::vector<double> data);
    [[nodiscard]] const std::vector<double>* find(const std::string& name) const;
    /// Throws LookupError when missing.
    [[nodiscard]] const std::vector<double>& at(const std::string& name) const;
    [[nodiscard]] std::vector<std::string> names_with_prefix(const std::string& prefix) const;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt);
Checkpoint deserialize(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// 64-bit FNV-1a, printed as 16 hex digits.
std::string fnv1a_hex(const std::vector<std::uint8_t>& bytes);
std::string fnv1a_hex(const std::string& text);

/// Params go under "<prefix>dims", "<prefix>w1", ... "<prefix>embed".
void put_params(Checkpoint& ckpt, const DenoiserParams& params, const std::string& prefix = "model/");
DenoiserParams get_params(const Checkpoint& ckpt, const std::string& prefix = "model/");

}  // namespace sdpo
