// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <chainlens/bytes.hpp>

#include <cstdint>
#include <list>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace chainlens {

/// Standard Bloom filter with double hashing. No false negatives.
class BloomFilter {
public:
    /// Sized for `expected` keys at false-positive rate `fpr`.
    explicit BloomFilter(std::uint64_t expected = 1024, double fpr = 0.01);

    void insert(std::span<const std::uint8_t> key);
    bool possibly_contains(std::span<const std::uint8_t> key) const;

    std::uint64_t bit_count() const noexcept { return m_bits; }
    std::uint32_t hash_count() const noexcept { return m_k; }
    std::uint64_t inserted() const noexcept { return m_inserted; }
    std::uint64_t design_capacity() const noexcept { return m_expected; }
    double design_fpr() const noexcept { return m_fpr; }
    /// (1 - e^{-kn/m})^k for the current inserted count.
    double theoretical_fpr() const noexcept;
    bool over_capacity() const noexcept { return m_inserted > m_expected; }

    Bytes serialize() const;
    static BloomFilter deserialize(std::span<const std::uint8_t> bytes);

private:
    std::uint64_t m_expected;
    double m_fpr;
    std::uint64_t m_bits;
    std::uint32_t m_k;
    std::uint64_t m_inserted = 0;
    std::vector<std::uint64_t> m_words;
};

/// Address key -> ID cache: a bounded LRU plus an unbounded pinned set for
/// keys that have been resolved at least twice.
class AddressCache {
public:
    /// Rough per-entry memory cost used to turn a byte budget into a capacity.
    static constexpr std::size_t kEntryCost = 96;

    explicit AddressCache(std::size_t capacity);
    static AddressCache with_budget(std::uint64_t bytes);

    /// A hit on an LRU entry pins it (second sighting).
    std::optional<std::uint32_t> lookup(std::string_view key);
    void insert(std::string_view key, std::uint32_t id, bool pinned);
    void clear();

    std::size_t capacity() const noexcept { return m_capacity; }
    std::size_t lru_size() const noexcept { return m_lru.size(); }
    std::size_t pinned_size() const noexcept { return m_pinned.size(); }
    bool is_pinned(std::string_view key) const { return m_pinned.count(std::string(key)) != 0; }
    std::uint64_t evictions() const noexcept { return m_evictions; }

private:
    using LruList = std::list<std::pair<std::string, std::uint32_t>>;

    std::size_t m_capacity;
    LruList m_lru;
    std::unordered_map<std::string, LruList::iterator> m_index;
    std::unordered_map<std::string, std::uint32_t> m_pinned;
    std::uint64_t m_evictions = 0;
};

} // namespace chainlens
