// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <chainlens/bytes.hpp>

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace chainlens {

/// Linked-tx value of an output nobody has spent yet.
inline constexpr std::uint32_t kUnspent = 0xFFFFFFFFu;
inline constexpr std::uint64_t kValueLimit = std::uint64_t{1} << 60;
inline constexpr std::uint64_t kCoin = 100'000'000;

inline constexpr std::size_t kInOutSize = 16;
inline constexpr std::size_t kTxHeaderSize = 12;
inline constexpr std::size_t kBlockRecordSize = 48;
inline constexpr std::size_t kOffsetSize = 8;

/// Every data file starts with this magic + version word.
inline constexpr std::array<std::uint8_t, 8> kFileMagic = {'C', 'L', 'N', 'S', 0, 0, 0, 1};
inline constexpr std::size_t kFileHeaderSize = kFileMagic.size();

enum class AddressType : std::uint8_t {
    nonstandard = 0,
    pubkey = 1,
    pubkeyhash = 2,
    scripthash = 3,
    multisig = 4,
    nulldata = 5,
};

inline constexpr std::size_t kAddressTypeCount = 6;
inline constexpr std::array<AddressType, kAddressTypeCount> kAllAddressTypes = {
    AddressType::nonstandard, AddressType::pubkey,   AddressType::pubkeyhash,
    AddressType::scripthash,  AddressType::multisig, AddressType::nulldata,
};

constexpr std::uint8_t code(AddressType t) noexcept { return static_cast<std::uint8_t>(t); }
std::string_view type_name(AddressType t) noexcept;
std::optional<AddressType> parse_type_name(std::string_view name) noexcept;

/// Address identity: IDs are dense per type, so the pair is the full key.
struct AddressRef {
    AddressType type = AddressType::nonstandard;
    std::uint32_t id = 0;

    auto operator<=>(const AddressRef&) const = default;
};

using AddressCounts = std::array<std::uint32_t, kAddressTypeCount>;

/// One 128-bit edge of the transaction graph. For an output the linked tx is
/// the spender (kUnspent if none); for an input it is the tx being spent.
struct InOutRecord {
    std::uint32_t linked_tx_id = 0;
    std::uint32_t address_id = 0;
    std::uint64_t value = 0;
    AddressType address_type = AddressType::nonstandard;

    AddressRef address() const noexcept { return {address_type, address_id}; }
    bool operator==(const InOutRecord&) const = default;
};

using InOutBytes = std::array<std::uint8_t, kInOutSize>;

InOutBytes encode_inout(const InOutRecord& record);
void encode_inout(const InOutRecord& record, std::span<std::uint8_t, kInOutSize> out);
InOutRecord decode_inout(std::span<const std::uint8_t, kInOutSize> bytes) noexcept;

struct TxHeader {
    std::uint32_t size = 0;
    std::uint32_t locktime = 0;
    std::uint16_t input_count = 0;
    std::uint16_t output_count = 0;
};

TxHeader decode_tx_header(const std::uint8_t* p) noexcept;

struct TxRecord {
    std::uint32_t size = 0;
    std::uint32_t locktime = 0;
    std::vector<InOutRecord> outputs;
    std::vector<InOutRecord> inputs;

    bool is_coinbase() const noexcept { return inputs.empty(); }
    bool operator==(const TxRecord&) const = default;
};

constexpr std::uint64_t tx_record_length(std::uint64_t inputs, std::uint64_t outputs) noexcept
{
    return kTxHeaderSize + kInOutSize * (inputs + outputs);
}

/// Appends the 12-byte header, then outputs, then inputs.
void append_tx_record(const TxRecord& tx, Bytes& out);
/// Decodes one record; throws range error if the span is too short.
TxRecord decode_tx_record(std::span<const std::uint8_t> bytes);

struct BlockRecord {
    Hash256 header_hash{};
    std::int64_t timestamp = 0;
    std::uint32_t first_tx_id = 0;
    std::uint32_t tx_count = 0;

    bool operator==(const BlockRecord&) const = default;
};

std::array<std::uint8_t, kBlockRecordSize> encode_block(const BlockRecord& block);
BlockRecord decode_block(std::span<const std::uint8_t, kBlockRecordSize> bytes) noexcept;

struct ChainStats {
    std::uint64_t n_tx = 0;
    std::uint64_t n_in = 0;
    std::uint64_t n_out = 0;

    bool operator==(const ChainStats&) const = default;
};

struct LayoutSizes {
    std::uint64_t current = 0;
    std::uint64_t normalized = 0;
    std::uint64_t wide_ids = 0;
    std::uint64_t fee_cached = 0;
};

/// Byte sizes of the transaction graph under the stored layout and three
/// alternatives that are only predicted, never written.
constexpr LayoutSizes predict_layout_sizes(const ChainStats& s) noexcept
{
    return {
        20 * s.n_tx + 16 * s.n_in + 16 * s.n_out,
        20 * s.n_tx + 8 * s.n_in + 16 * s.n_out,
        20 * s.n_tx + 24 * s.n_in + 24 * s.n_out,
        30 * s.n_tx + 16 * s.n_in + 16 * s.n_out,
    };
}

// ---------------------------------------------------------------------------
// Script payloads

/// pubkey and pubkeyhash both record the key hash, plus the key when known.
struct PubkeyPayload {
    Hash160 hash{};
    Bytes pubkey;
    bool operator==(const PubkeyPayload&) const = default;
};

struct ScriptHashPayload {
    Hash160 hash{};
    std::optional<AddressRef> nested;
    bool operator==(const ScriptHashPayload&) const = default;
};

/// key_ids are pubkey-type address IDs, in script order.
struct MultisigPayload {
    std::uint8_t required = 1;
    std::vector<std::uint32_t> key_ids;

    std::size_t total() const noexcept { return key_ids.size(); }
    bool operator==(const MultisigPayload&) const = default;
};

/// nulldata carries the pushed data, nonstandard the whole script.
struct RawPayload {
    Bytes bytes;
    bool operator==(const RawPayload&) const = default;
};

struct ScriptPayload {
    AddressType type = AddressType::nonstandard;
    std::variant<PubkeyPayload, ScriptHashPayload, MultisigPayload, RawPayload> data;

    bool operator==(const ScriptPayload&) const = default;
};

Bytes encode_payload(const ScriptPayload& payload);
ScriptPayload decode_payload(AddressType type, std::span<const std::uint8_t> bytes);

// ---------------------------------------------------------------------------
// Data directory layout

class DataLayout {
public:
    explicit DataLayout(std::filesystem::path root) : m_root(std::move(root)) {}

    const std::filesystem::path& root() const noexcept { return m_root; }
    std::filesystem::path txdata() const { return m_root / "txdata.dat"; }
    std::filesystem::path txoffsets() const { return m_root / "txoffsets.dat"; }
    std::filesystem::path blocks() const { return m_root / "blocks.dat"; }
    std::filesystem::path address_counts() const { return m_root / "addrcounts.dat"; }
    std::filesystem::path scripts_dir() const { return m_root / "scripts"; }
    std::filesystem::path script_table(AddressType t) const;
    std::filesystem::path script_offsets(AddressType t) const;
    std::filesystem::path index_dir() const { return m_root / "indexes"; }
    std::filesystem::path parser_state() const { return m_root / "parser_state.dat"; }
    std::filesystem::path undo_dir() const { return m_root / "undo"; }
    std::filesystem::path undo_log(std::uint32_t height) const;
    std::filesystem::path mempool_dir() const { return m_root / "mempool"; }
    std::filesystem::path timestamps() const { return mempool_dir() / "timestamps.dat"; }
    std::filesystem::path full_mempool_dir() const { return mempool_dir() / "full"; }
    std::filesystem::path clusters() const { return m_root / "clusters.dat"; }
    std::filesystem::path lock_file() const { return m_root / ".lock"; }

    /// Files making up the Core Blockchain Data (tx graph, blocks, scripts).
    std::vector<std::filesystem::path> core_files() const;

private:
    std::filesystem::path m_root;
};

/// Sum of tx-table payload and offset entries, excluding the file headers and
/// the trailing sentinel offset. Equals predict_layout_sizes().current.
std::uint64_t measure_tx_graph_bytes(const DataLayout& layout);

} // namespace chainlens
