// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <chainlens/bytes.hpp>
#include <chainlens/chain_model.hpp>
#include <chainlens/parser.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace chainlens {

struct ViewOptions {
    /// The newest reorg_margin blocks on disk stay hidden.
    std::uint32_t reorg_margin = kDefaultReorgMargin;
};

/// Zero-copy view of one transaction record inside a ChainView. Outputs
/// spent by a tx outside the view read as unspent.
class TxView {
public:
    TxView(const std::uint8_t* record, std::uint32_t id, std::uint32_t max_tx_id) noexcept
        : m_p(record), m_id(id), m_max_tx_id(max_tx_id) {}

    std::uint32_t id() const noexcept { return m_id; }
    std::uint32_t size() const noexcept { return read_le<std::uint32_t>(m_p); }
    std::uint32_t locktime() const noexcept { return read_le<std::uint32_t>(m_p + 4); }
    std::uint16_t input_count() const noexcept { return read_le<std::uint16_t>(m_p + 8); }
    std::uint16_t output_count() const noexcept { return read_le<std::uint16_t>(m_p + 10); }
    bool is_coinbase() const noexcept { return input_count() == 0; }

    InOutRecord output(std::uint32_t i) const;
    InOutRecord input(std::uint32_t i) const;
    std::uint64_t output_value(std::uint32_t i) const noexcept { return packed_value(kTxHeaderSize + kInOutSize * i); }
    std::uint64_t input_value(std::uint32_t i) const noexcept
    {
        return packed_value(kTxHeaderSize + kInOutSize * (std::uint64_t{output_count()} + i));
    }

    std::uint64_t total_out() const noexcept;
    std::uint64_t total_in() const noexcept;
    /// Inputs minus outputs; 0 for a coinbase.
    std::uint64_t fee() const noexcept;

    TxRecord record() const;

private:
    std::uint64_t packed_value(std::uint64_t at) const noexcept
    {
        return read_le<std::uint64_t>(m_p + at + 8) & (kValueLimit - 1);
    }

    const std::uint8_t* m_p;
    std::uint32_t m_id;
    std::uint32_t m_max_tx_id;
};

/// Location of one output.
struct OutPoint {
    std::uint32_t tx_id = 0;
    std::uint32_t index = 0;
    auto operator<=>(const OutPoint&) const = default;
};

/// Immutable snapshot of the parsed chain, max_height = on-disk tip minus the
/// reorg margin. Cheap to copy; copies share the mappings. Safe to use from
/// many threads.
class ChainView {
public:
    static ChainView open(const std::filesystem::path& data_dir, ViewOptions options = {});

    /// Opens the current on-disk state as a superset of this view. Throws
    /// ReorgError when a block inside this view was replaced or removed.
    ChainView reopen() const;

    const DataLayout& layout() const noexcept;
    std::uint32_t reorg_margin() const noexcept;
    /// -1 for an empty view.
    std::int64_t max_height() const noexcept;
    /// Exclusive upper bound on visible tx IDs.
    std::uint32_t max_tx_id() const noexcept;
    std::uint32_t block_count() const noexcept { return static_cast<std::uint32_t>(max_height() + 1); }
    std::uint32_t tx_count() const noexcept { return max_tx_id(); }
    /// Tip height on disk when the view was opened.
    std::int64_t disk_height() const noexcept;

    BlockRecord block(std::uint32_t height) const;
    /// [first, end) tx IDs of a block.
    std::pair<std::uint32_t, std::uint32_t> block_txs(std::uint32_t height) const;
    std::uint32_t height_of(std::uint32_t tx_id) const;
    /// [first, end) heights whose timestamps fall in [from, to), assuming
    /// timestamps ascend.
    std::pair<std::uint32_t, std::uint32_t> heights_between(std::int64_t from, std::int64_t to) const;

    TxView tx(std::uint32_t tx_id) const;
    TxRecord read_tx(std::uint32_t tx_id) const { return tx(tx_id).record(); }
    std::uint64_t tx_offset(std::uint32_t tx_id) const;

    std::optional<std::uint32_t> spending_tx(std::uint32_t tx_id, std::uint32_t out_index) const;
    OutPoint spent_output(std::uint32_t tx_id, std::uint32_t in_index) const;

    std::uint64_t block_total_out(std::uint32_t height) const;
    std::uint64_t block_fees(std::uint32_t height) const;

    AddressCounts address_counts() const noexcept;
    ScriptPayload script_payload(AddressRef ref) const;

    /// Hash lookups through the index store; misses and IDs outside the view
    /// are nullopt.
    std::optional<std::uint32_t> tx_id(const Hash256& hash) const;
    std::optional<Hash256> tx_hash(std::uint32_t tx_id) const;
    std::optional<AddressRef> address_ref(std::span<const std::uint8_t> canonical_key) const;

private:
    struct Impl;
    explicit ChainView(std::shared_ptr<const Impl> impl) : m_impl(std::move(impl)) {}
    static ChainView open_at_least(const std::filesystem::path& data_dir, ViewOptions options, std::int64_t min_height);
    void check_tx(std::uint32_t tx_id) const;

    std::shared_ptr<const Impl> m_impl;
};

inline ChainView open_view(const std::filesystem::path& data_dir, ViewOptions options = {})
{
    return ChainView::open(data_dir, options);
}

} // namespace chainlens
