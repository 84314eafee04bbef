// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <chainlens/bytes.hpp>
#include <chainlens/chain_view.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

namespace chainlens {

enum class MempoolMode { minimal, full };

std::optional<MempoolMode> parse_mempool_mode(std::string_view text) noexcept;

/// One feed observation. The payload (optional third column, hex) is kept
/// only in full mode.
struct FeedEntry {
    Hash256 hash{};
    std::int64_t millis = 0;
    Bytes payload;

    bool operator==(const FeedEntry&) const = default;
};

/// Reads "txhash_hex,unix_millis[,payload_hex]" lines. Timestamps must not
/// decrease; a repeated hash keeps its first timestamp.
std::vector<FeedEntry> read_feed(const std::filesystem::path& path);
std::vector<FeedEntry> parse_feed(std::string_view text);

struct RecordSummary {
    std::uint64_t feed_entries = 0;
    /// Entries matched to a tx ID in this call (including earlier pending ones).
    std::uint64_t matched = 0;
    /// Entries still waiting for their tx to be parsed.
    std::uint64_t pending = 0;
    /// Full-mode payload blobs written.
    std::uint64_t stored = 0;
};

/// Records a feed into data_dir/mempool. Both modes align first-seen times
/// to tx IDs in timestamps.dat (8-byte LE per tx, 0 = unseen). Unmatched
/// entries stay pending and are matched by later calls (or align_mempool)
/// once their tx is parsed. Full mode also persists every entry under
/// mempool/full/, mined or not.
RecordSummary record_feed(const std::filesystem::path& data_dir, const std::vector<FeedEntry>& feed, MempoolMode mode);

/// Re-runs alignment of pending entries against the current chain.
RecordSummary align_mempool(const std::filesystem::path& data_dir);

/// Every entry stored in full mode, ordered by timestamp then hash.
std::vector<FeedEntry> load_full_entries(const std::filesystem::path& data_dir);

/// Read side of timestamps.dat.
class MempoolLog {
public:
    static MempoolLog load(const std::filesystem::path& data_dir);

    std::uint64_t size() const noexcept { return m_millis.size(); }
    std::uint64_t seen_count() const noexcept;
    std::optional<std::int64_t> first_seen_millis(std::uint32_t tx_id) const noexcept;

    /// Seconds added to every first-seen time before computing waits.
    void set_lag_correction(double seconds) noexcept { m_correction = seconds; }
    double lag_correction() const noexcept { return m_correction; }

    /// Block time minus corrected first-seen time, in seconds; nullopt when
    /// the tx was never seen or lies outside the view.
    std::optional<double> wait_time(const ChainView& view, std::uint32_t tx_id) const;

private:
    std::vector<std::int64_t> m_millis;
    double m_correction = 0;
};

} // namespace chainlens
