// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdpo/rng.hpp"

#include <stdexcept>

namespace sdpo {
namespace {

// splitmix64 finalizer; a bijection on 64-bit words with good avalanche.
std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

StreamKey::StreamKey(std::uint64_t seed) : key_(mix(seed ^ 0x5d90'5d90'5d90'5d90ULL)) {}

StreamKey StreamKey::child(std::uint64_t coordinate) const {
    return StreamKey(Raw{}, mix(key_ ^ mix(coordinate + 0x632be59bd9b4e019ULL)));
}

StreamKey StreamKey::child(std::initializer_list<std::uint64_t> path) const {
    StreamKey k = *this;
    for (auto c : path) k = k.child(c);
    return k;
}

void RngStream::fill_normal(std::vector<double>& out) {
    for (auto& v : out) v = normal();
}

std::size_t RngStream::uniform_index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index over an empty range");
    std::uniform_int_distribution<std::size_t> dist(0, n - 1);
    return dist(engine_);
}

}  // namespace sdpo
