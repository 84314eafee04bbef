// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/bytes.hpp>
#include <chainlens/errors.hpp>

namespace chainlens {

std::string_view to_string(ErrorKind kind) noexcept
{
    switch (kind) {
    case ErrorKind::range: return "range";
    case ErrorKind::consistency: return "consistency";
    case ErrorKind::parse: return "parse";
    case ErrorKind::structure: return "structure";
    case ErrorKind::storage: return "storage";
    case ErrorKind::dangling_reference: return "dangling-reference";
    case ErrorKind::double_spend: return "double-spend";
    case ErrorKind::continuity: return "continuity";
    case ErrorKind::reorg: return "reorg";
    case ErrorKind::generation: return "generation";
    case ErrorKind::usage: return "usage";
    }
    return "unknown";
}

std::string to_hex(std::span<const std::uint8_t> bytes)
{
    static constexpr char digits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

static int hex_digit(char c) noexcept
{
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::optional<Bytes> from_hex(std::string_view hex)
{
    if (hex.size() % 2 != 0) return std::nullopt;
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = hex_digit(hex[2 * i]);
        int lo = hex_digit(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

std::uint64_t stable_hash64(std::span<const std::uint8_t> bytes, std::uint64_t seed) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ull ^ seed;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 0x100000001b3ull;
    }
    h ^= h >> 30;
    h *= 0xbf58476d1ce4e5b9ull;
    h ^= h >> 27;
    h *= 0x94d049bb133111ebull;
    h ^= h >> 31;
    return h;
}

} // namespace chainlens
