// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace chainlens {

using Hash256 = std::array<std::uint8_t, 32>;
using Hash160 = std::array<std::uint8_t, 20>;
using Bytes = std::vector<std::uint8_t>;

// All on-disk integers are little-endian.
static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
inline T byteswap_if_big(T v) noexcept
{
    if constexpr (std::endian::native == std::endian::big) {
        T out{};
        auto* src = reinterpret_cast<const unsigned char*>(&v);
        auto* dst = reinterpret_cast<unsigned char*>(&out);
        for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = src[sizeof(T) - 1 - i];
        return out;
    } else {
        return v;
    }
}

template <typename T>
inline T read_le(const std::uint8_t* p) noexcept
{
    T v;
    std::memcpy(&v, p, sizeof(T));
    return byteswap_if_big(v);
}

template <typename T>
inline void write_le(std::uint8_t* p, T v) noexcept
{
    v = byteswap_if_big(v);
    std::memcpy(p, &v, sizeof(T));
}

template <typename T>
inline void append_le(Bytes& out, T v)
{
    std::uint8_t buf[sizeof(T)];
    write_le(buf, v);
    out.insert(out.end(), buf, buf + sizeof(T));
}

std::string to_hex(std::span<const std::uint8_t> bytes);
std::optional<Bytes> from_hex(std::string_view hex);

template <std::size_t N>
std::optional<std::array<std::uint8_t, N>> fixed_from_hex(std::string_view hex)
{
    if (hex.size() != 2 * N) return std::nullopt;
    auto bytes = from_hex(hex);
    if (!bytes) return std::nullopt;
    std::array<std::uint8_t, N> out{};
    std::memcpy(out.data(), bytes->data(), N);
    return out;
}

struct Hash256Hasher {
    std::size_t operator()(const Hash256& h) const noexcept
    {
        std::uint64_t a = read_le<std::uint64_t>(h.data());
        std::uint64_t b = read_le<std::uint64_t>(h.data() + 8);
        return static_cast<std::size_t>(a ^ (b * 0x9E3779B97F4A7C15ull));
    }
};

/// Stable 64-bit hash of a byte string (FNV-1a folded through a splitmix
/// finalizer). Stable across platforms, so filters built from it can be
/// persisted.
std::uint64_t stable_hash64(std::span<const std::uint8_t> bytes, std::uint64_t seed = 0) noexcept;

inline std::span<const std::uint8_t> as_bytes(std::string_view s) noexcept
{
    return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

} // namespace chainlens
