// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <chainlens/address_cache.hpp>
#include <chainlens/chain_model.hpp>
#include <chainlens/files.hpp>
#include <chainlens/importer.hpp>
#include <chainlens/index_store.hpp>
#include <chainlens/tables.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <unordered_map>
#include <vector>

namespace chainlens {

inline constexpr std::uint32_t kDefaultReorgMargin = 6;
inline constexpr std::uint32_t kDefaultUndoRetention = 32;

struct ParserOptions {
    std::uint64_t cache_bytes = 64ull << 20;
    std::uint64_t index_cache_bytes = IndexStore::kDefaultCacheBytes;
    /// Undo logs are kept for the most recent reorg_margin + undo_retention blocks.
    std::uint32_t reorg_margin = kDefaultReorgMargin;
    std::uint32_t undo_retention = kDefaultUndoRetention;
    /// Initial Bloom filter design size; doubled on demand.
    std::uint64_t bloom_expected = 1 << 16;
    /// Run the block source on its own thread.
    bool pipelined = true;
};

struct ResolvedAddress {
    AddressRef ref;
    bool first_seen = false;
};

struct LinkedOutput {
    std::uint32_t tx_id = 0;
    std::uint32_t address_id = 0;
    AddressType address_type = AddressType::nonstandard;
    std::uint64_t value = 0;
};

/// Unspent bookkeeping for one transaction that still has unspent outputs.
struct UtxoEntry {
    std::uint32_t tx_id = 0;
    std::uint32_t output_count = 0;
    std::uint32_t unspent = 0;
    std::vector<std::uint64_t> spent_bits;

    bool is_spent(std::uint32_t index) const noexcept { return spent_bits[index >> 6] >> (index & 63) & 1; }
    void set_spent(std::uint32_t index, bool spent) noexcept
    {
        std::uint64_t mask = std::uint64_t{1} << (index & 63);
        if (spent) {
            spent_bits[index >> 6] |= mask;
        } else {
            spent_bits[index >> 6] &= ~mask;
        }
    }
};

/// Sequential, stateful converter from a block stream to the on-disk chain.
/// Holds the data directory's writer lock for its lifetime.
class Parser {
public:
    static Parser open(const std::filesystem::path& data_dir, ParserOptions options = {});
    ~Parser();
    Parser(Parser&&) noexcept;
    Parser& operator=(Parser&&) noexcept;

    /// Appends the stream. A stream starting at or below the current tip
    /// inside the undo window first reverts to the fork point; any other gap
    /// is a continuity error. On error, the failing block is rolled back and
    /// everything before it is kept.
    ChainStats apply(BlockSource& source);
    void apply_block(const ImportBlock& block);

    /// Removes the newest n blocks.
    void revert(std::uint32_t n);

    /// Flushes tables, commits the index and writes parser_state.dat.
    void save();

    ResolvedAddress resolve_address(const ScriptDescriptor& script);
    LinkedOutput link_input(const Hash256& prev_tx, std::uint32_t prev_index, std::uint32_t spender_tx_id);

    ChainStats stats() const noexcept { return m_stats; }
    std::int64_t last_height() const noexcept { return m_last_height; }
    std::uint32_t next_tx_id() const noexcept { return static_cast<std::uint32_t>(m_stats.n_tx); }
    const AddressCounts& address_counts() const noexcept { return m_counts; }
    std::size_t utxo_size() const noexcept { return m_utxo.size(); }
    const UtxoEntry* utxo(const Hash256& tx_hash) const;
    std::uint32_t undo_window() const noexcept;

    const AddressCache& cache() const noexcept { return m_cache; }
    const BloomFilter& bloom() const noexcept { return m_bloom; }
    const DataLayout& layout() const noexcept { return m_layout; }
    IndexStore& index() noexcept { return m_index; }

    /// Bloom negatives that skipped the store, and store probes made.
    std::uint64_t bloom_skips() const noexcept { return m_bloom_skips; }
    std::uint64_t store_probes() const noexcept { return m_store_probes; }

private:
    struct SpentRecord {
        std::uint32_t tx_id;
        std::uint32_t index;
        std::uint32_t output_count;
        Hash256 hash;
    };
    struct UndoRecord {
        std::uint32_t height = 0;
        ChainStats stats;
        AddressCounts counts{};
        std::vector<SpentRecord> spent;
        std::vector<Hash256> created;
    };

    Parser(const std::filesystem::path& data_dir, ParserOptions options);
    void load_state();
    void undo(const UndoRecord& record);
    void write_undo(const UndoRecord& record) const;
    UndoRecord read_undo(std::uint32_t height) const;
    void prune_undo_logs() const;
    void grow_bloom();

    ParserOptions m_options;
    DataLayout m_layout;
    std::unique_ptr<DirectoryLock> m_lock;
    TxTable m_txs;
    BlockTable m_blocks;
    std::vector<ScriptTable> m_scripts;
    IndexStore m_index;
    BloomFilter m_bloom;
    AddressCache m_cache;

    ChainStats m_stats;
    AddressCounts m_counts{};
    std::int64_t m_last_height = -1;
    std::unordered_map<Hash256, UtxoEntry, Hash256Hasher> m_utxo;
    UndoRecord* m_current_undo = nullptr;
    bool m_dirty = false;

    std::uint64_t m_bloom_skips = 0;
    std::uint64_t m_store_probes = 0;
};

/// Full parse into an empty (or compatible) data directory.
ChainStats parse_chain(BlockSource& source, const std::filesystem::path& data_dir, ParserOptions options = {});
/// Resumes from parser_state.dat; storage error if there is none.
ChainStats update_chain(BlockSource& source, const std::filesystem::path& data_dir, ParserOptions options = {});
void revert_blocks(const std::filesystem::path& data_dir, std::uint32_t n, ParserOptions options = {});

/// True when every core file in both directories is byte-identical.
bool core_files_equal(const DataLayout& a, const DataLayout& b, std::string* first_difference = nullptr);

} // namespace chainlens
