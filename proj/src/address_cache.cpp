// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/address_cache.hpp>
#include <chainlens/errors.hpp>

#include <algorithm>
#include <cmath>

namespace chainlens {

namespace {
constexpr std::uint64_t kSeedA = 0x51ed270b7a3c1f5dull;
constexpr std::uint64_t kSeedB = 0x2545f4914f6cdd1dull;
} // namespace

BloomFilter::BloomFilter(std::uint64_t expected, double fpr)
    : m_expected(std::max<std::uint64_t>(expected, 1)), m_fpr(fpr)
{
    if (!(fpr > 0 && fpr < 1)) throw Error(ErrorKind::range, "Bloom filter false-positive rate must be in (0,1)");
    const double ln2 = std::log(2.0);
    double m = std::ceil(-static_cast<double>(m_expected) * std::log(fpr) / (ln2 * ln2));
    m_bits = std::max<std::uint64_t>(64, static_cast<std::uint64_t>(m));
    m_k = std::max<std::uint32_t>(1, static_cast<std::uint32_t>(std::lround(static_cast<double>(m_bits) / m_expected * ln2)));
    m_words.assign((m_bits + 63) / 64, 0);
}

void BloomFilter::insert(std::span<const std::uint8_t> key)
{
    std::uint64_t h1 = stable_hash64(key, kSeedA);
    std::uint64_t h2 = stable_hash64(key, kSeedB) | 1;
    for (std::uint32_t i = 0; i < m_k; ++i) {
        std::uint64_t bit = (h1 + i * h2) % m_bits;
        m_words[bit >> 6] |= std::uint64_t{1} << (bit & 63);
    }
    ++m_inserted;
}

bool BloomFilter::possibly_contains(std::span<const std::uint8_t> key) const
{
    std::uint64_t h1 = stable_hash64(key, kSeedA);
    std::uint64_t h2 = stable_hash64(key, kSeedB) | 1;
    for (std::uint32_t i = 0; i < m_k; ++i) {
        std::uint64_t bit = (h1 + i * h2) % m_bits;
        if (!(m_words[bit >> 6] & (std::uint64_t{1} << (bit & 63)))) return false;
    }
    return true;
}

double BloomFilter::theoretical_fpr() const noexcept
{
    double k = m_k;
    return std::pow(1.0 - std::exp(-k * static_cast<double>(m_inserted) / static_cast<double>(m_bits)), k);
}

Bytes BloomFilter::serialize() const
{
    Bytes out;
    append_le<std::uint64_t>(out, m_expected);
    std::uint64_t fpr_bits;
    std::memcpy(&fpr_bits, &m_fpr, sizeof(fpr_bits));
    append_le<std::uint64_t>(out, fpr_bits);
    append_le<std::uint64_t>(out, m_inserted);
    for (auto w : m_words) append_le<std::uint64_t>(out, w);
    return out;
}

BloomFilter BloomFilter::deserialize(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 24) throw Error(ErrorKind::storage, "truncated Bloom filter");
    std::uint64_t expected = read_le<std::uint64_t>(bytes.data());
    std::uint64_t fpr_bits = read_le<std::uint64_t>(bytes.data() + 8);
    double fpr;
    std::memcpy(&fpr, &fpr_bits, sizeof(fpr));
    BloomFilter f(expected, fpr);
    f.m_inserted = read_le<std::uint64_t>(bytes.data() + 16);
    if (bytes.size() != 24 + 8 * f.m_words.size()) throw Error(ErrorKind::storage, "Bloom filter size mismatch");
    for (std::size_t i = 0; i < f.m_words.size(); ++i) f.m_words[i] = read_le<std::uint64_t>(bytes.data() + 24 + 8 * i);
    return f;
}

AddressCache::AddressCache(std::size_t capacity) : m_capacity(capacity) {}

AddressCache AddressCache::with_budget(std::uint64_t bytes)
{
    return AddressCache(static_cast<std::size_t>(bytes / kEntryCost));
}

std::optional<std::uint32_t> AddressCache::lookup(std::string_view key)
{
    std::string k(key);
    if (auto it = m_pinned.find(k); it != m_pinned.end()) return it->second;
    auto it = m_index.find(k);
    if (it == m_index.end()) return std::nullopt;
    std::uint32_t id = it->second->second;
    m_lru.erase(it->second);
    m_index.erase(it);
    m_pinned.emplace(std::move(k), id);
    return id;
}

void AddressCache::insert(std::string_view key, std::uint32_t id, bool pinned)
{
    std::string k(key);
    if (pinned) {
        if (auto it = m_index.find(k); it != m_index.end()) {
            m_lru.erase(it->second);
            m_index.erase(it);
        }
        m_pinned[k] = id;
        return;
    }
    if (m_pinned.count(k)) return;
    if (m_capacity == 0) return;
    if (auto it = m_index.find(k); it != m_index.end()) {
        it->second->second = id;
        m_lru.splice(m_lru.begin(), m_lru, it->second);
        return;
    }
    m_lru.emplace_front(k, id);
    m_index.emplace(std::move(k), m_lru.begin());
    while (m_lru.size() > m_capacity) {
        m_index.erase(m_lru.back().first);
        m_lru.pop_back();
        ++m_evictions;
    }
}

void AddressCache::clear()
{
    m_lru.clear();
    m_index.clear();
    m_pinned.clear();
}

} // namespace chainlens
