// Copyright 2026 The SDPO Toy Authors
// SPDX-License-Identifier: Apache-2.0

#include "sdpo/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sdpo/errors.hpp"

namespace sdpo {
namespace {

constexpr char kMagic[8] = {'S', 'D', 'P', 'O', 'C', 'K', 'P', 'T'};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    std::uint8_t raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
    out.insert(out.end(), raw, raw + sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        std::uint8_t raw[sizeof(T)];
        std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(raw, raw + sizeof(T));
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }

    std::string string(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    [[nodiscard]] bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw IoError("checkpoint truncated");
    }
    const std::vector<std::uint8_t>& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

void Checkpoint::put(std::string name, std::vector<double> data) {
    for (auto& a : arrays) {
        if (a.name == name) {
            a.data = std::move(data);
            return;
        }
    }
    arrays.push_back({std::move(name), std::move(data)});
}

const std::vector<double>* Checkpoint::find(const std::string& name) const {
    for (const auto& a : arrays) {
        if (a.name == name) return &a.data;
    }
    return nullptr;
}

const std::vector<double>& Checkpoint::at(const std::string& name) const {
    if (const auto* p = find(name)) return *p;
    throw LookupError("checkpoint has no array named '" + name + "'");
}

std::vector<std::string> Checkpoint::names_with_prefix(const std::string& prefix) const {
    std::vector<std::string> out;
    for (const auto& a : arrays) {
        if (a.name.starts_with(prefix)) out.push_back(a.name);
    }
    return out;
}

std::vector<std::uint8_t> serialize(const Checkpoint& ckpt) {
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_le<std::uint32_t>(out, ckpt.version);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.arrays.size()));
    for (const auto& a : ckpt.arrays) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(a.name.size()));
        out.insert(out.end(), a.name.begin(), a.name.end());
        put_le<std::uint64_t>(out, a.data.size());
        for (double v : a.data) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

Checkpoint deserialize(const std::vector<std::uint8_t>& bytes) {
    Reader r(bytes);
    if (r.string(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) throw IoError("not a checkpoint file");
    Checkpoint ckpt;
    ckpt.version = r.get<std::uint32_t>();
    if (ckpt.version != kCheckpointVersion) {
        throw IoError("unsupported checkpoint version " + std::to_string(ckpt.version));
    }
    const auto count = r.get<std::uint32_t>();
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedArray a;
        a.name = r.string(r.get<std::uint32_t>());
        const auto n = r.get<std::uint64_t>();
        a.data.reserve(n);
        for (std::uint64_t k = 0; k < n; ++k) a.data.push_back(std::bit_cast<double>(r.get<std::uint64_t>()));
        ckpt.arrays.push_back(std::move(a));
    }
    if (!r.done()) throw IoError("trailing bytes after checkpoint payload");
    return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto bytes = serialize(ckpt);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoError("cannot open " + tmp + " for writing");
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!f) throw IoError("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return deserialize(bytes);
}

std::string fnv1a_hex(const std::vector<std::uint8_t>& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto b : bytes) {
        h ^= b;
        h *= 0x100000001b3ULL;
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i, h >>= 4) s[static_cast<std::size_t>(i)] = hex[h & 0xf];
    return s;
}

std::string fnv1a_hex(const std::string& text) { return fnv1a_hex(std::vector<std::uint8_t>(text.begin(), text.end())); }

void put_params(Checkpoint& ckpt, const DenoiserParams& params, const std::string& prefix) {
    const auto& d = params.dims();
    ckpt.put(prefix + "dims", {static_cast<double>(d.data_dim), static_cast<double>(d.num_steps),
                               static_cast<double>(d.num_prompts), static_cast<double>(d.embed_dim),
                               static_cast<double>(d.hidden)});
    auto copy = [](std::span<const double> s) { return std::vector<double>(s.begin(), s.end()); };
    ckpt.put(prefix + "w1", copy(params.w1()));
    ckpt.put(prefix + "b1", copy(params.b1()));
    ckpt.put(prefix + "w2", copy(params.w2()));
    ckpt.put(prefix + "b2", copy(params.b2()));
    ckpt.put(prefix + "embed", copy(params.embed()));
}

DenoiserParams get_params(const Checkpoint& ckpt, const std::string& prefix) {
    const auto& dv = ckpt.at(prefix + "dims");
    if (dv.size() != 5) throw IoError("checkpoint dims array must have 5 entries");
    DenoiserDims d;
    d.data_dim = static_cast<std::size_t>(dv[0]);
    d.num_steps = static_cast<std::size_t>(dv[1]);
    d.num_prompts = static_cast<std::size_t>(dv[2]);
    d.embed_dim = static_cast<std::size_t>(dv[3]);
    d.hidden = static_cast<std::size_t>(dv[4]);
    DenoiserParams p(d);
    auto fill = [&](const std::string& name, std::span<double> dst) {
        const auto& src = ckpt.at(prefix + name);
        if (src.size() != dst.size()) throw IoError("checkpoint array '" + prefix + name + "' has wrong length");
        std::copy(src.begin(), src.end(), dst.begin());
    };
    fill("w1", p.w1());
    fill("b1", p.b1());
    fill("w2", p.w2());
    fill("b2", p.b2());
    fill("embed", p.embed());
    return p;
}

}  // namespace sdpo
