// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <chainlens/chain_model.hpp>
#include <chainlens/files.hpp>

#include <array>
#include <cstdint>

namespace chainlens {

/// Writer side of the transaction table (txdata.dat) and its offsets array
/// (txoffsets.dat). The offsets file always ends with a sentinel equal to the
/// table length, so record i spans [offset[i], offset[i+1]).
class TxTable {
public:
    static TxTable open(const DataLayout& layout);

    std::uint32_t tx_count() const noexcept { return m_count; }
    std::uint64_t offset(std::uint32_t tx_id) const;
    std::uint64_t data_size() const noexcept { return m_data.size(); }

    /// Appends a record and its offset entry; returns the new tx ID.
    std::uint32_t append(const TxRecord& tx);
    TxRecord read(std::uint32_t tx_id) const;
    TxHeader header(std::uint32_t tx_id) const;
    InOutRecord read_output(std::uint32_t tx_id, std::uint32_t out_index) const;

    /// Length-preserving edit: only the output's 4 linked-tx bytes change.
    void mark_output_spent(std::uint32_t tx_id, std::uint32_t out_index, std::uint32_t spender_tx_id);
    void unmark_output_spent(std::uint32_t tx_id, std::uint32_t out_index);

    void truncate(std::uint32_t tx_count);
    void flush();

private:
    std::uint64_t output_position(std::uint32_t tx_id, std::uint32_t out_index) const;

    AppendFile m_data;
    AppendFile m_offsets;
    std::uint32_t m_count = 0;
};

/// blocks.dat (48-byte records) plus addrcounts.dat, which stores the
/// per-type address counters after each block so views and reverts can
/// recover them.
class BlockTable {
public:
    static BlockTable open(const DataLayout& layout);

    std::uint32_t block_count() const noexcept { return m_count; }
    void append(const BlockRecord& block, const AddressCounts& counts_after);
    BlockRecord read(std::uint32_t height) const;
    AddressCounts counts_after(std::uint32_t height) const;
    void truncate(std::uint32_t block_count);
    void flush();

private:
    AppendFile m_blocks;
    AppendFile m_counts;
    std::uint32_t m_count = 0;
};

inline constexpr std::size_t kAddressCountsRecordSize = 4 * kAddressTypeCount;

/// Variable-length script payload table for one address type, indexed by
/// address ID through a sibling offsets file.
class ScriptTable {
public:
    static ScriptTable open(const DataLayout& layout, AddressType type);

    std::uint32_t count() const noexcept { return m_count; }
    std::uint32_t append(std::span<const std::uint8_t> payload);
    Bytes read(std::uint32_t id) const;
    void truncate(std::uint32_t count);
    void flush();

private:
    AppendFile m_data;
    AppendFile m_offsets;
    std::uint32_t m_count = 0;
};

} // namespace chainlens
