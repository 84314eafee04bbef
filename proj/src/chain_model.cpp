// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/chain_model.hpp>
#include <chainlens/errors.hpp>

#include <algorithm>

namespace chainlens {

namespace {
constexpr std::array<std::string_view, kAddressTypeCount> kTypeNames = {
    "nonstandard", "pubkey", "pubkeyhash", "scripthash", "multisig", "nulldata",
};
}

std::string_view type_name(AddressType t) noexcept
{
    auto c = code(t);
    return c < kTypeNames.size() ? kTypeNames[c] : std::string_view{"unknown"};
}

std::optional<AddressType> parse_type_name(std::string_view name) noexcept
{
    for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
        if (kTypeNames[i] == name) return static_cast<AddressType>(i);
    }
    return std::nullopt;
}

void encode_inout(const InOutRecord& record, std::span<std::uint8_t, kInOutSize> out)
{
    if (record.value >= kValueLimit) {
        throw Error(ErrorKind::range, "value " + std::to_string(record.value) + " does not fit in 60 bits");
    }
    if (code(record.address_type) >= 16) {
        throw Error(ErrorKind::range, "address type code " + std::to_string(code(record.address_type)) + " does not fit in 4 bits");
    }
    write_le<std::uint32_t>(out.data(), record.linked_tx_id);
    write_le<std::uint32_t>(out.data() + 4, record.address_id);
    std::uint64_t packed = record.value | (std::uint64_t{code(record.address_type)} << 60);
    write_le<std::uint64_t>(out.data() + 8, packed);
}

InOutBytes encode_inout(const InOutRecord& record)
{
    InOutBytes out{};
    encode_inout(record, out);
    return out;
}

InOutRecord decode_inout(std::span<const std::uint8_t, kInOutSize> bytes) noexcept
{
    InOutRecord r;
    r.linked_tx_id = read_le<std::uint32_t>(bytes.data());
    r.address_id = read_le<std::uint32_t>(bytes.data() + 4);
    std::uint64_t packed = read_le<std::uint64_t>(bytes.data() + 8);
    r.value = packed & (kValueLimit - 1);
    r.address_type = static_cast<AddressType>(packed >> 60);
    return r;
}

TxHeader decode_tx_header(const std::uint8_t* p) noexcept
{
    return {
        read_le<std::uint32_t>(p),
        read_le<std::uint32_t>(p + 4),
        read_le<std::uint16_t>(p + 8),
        read_le<std::uint16_t>(p + 10),
    };
}

void append_tx_record(const TxRecord& tx, Bytes& out)
{
    if (tx.inputs.size() > 0xFFFF || tx.outputs.size() > 0xFFFF) {
        throw Error(ErrorKind::range, "transaction has more than 65535 inputs or outputs");
    }
    std::size_t start = out.size();
    out.resize(start + tx_record_length(tx.inputs.size(), tx.outputs.size()));
    std::uint8_t* p = out.data() + start;
    write_le<std::uint32_t>(p, tx.size);
    write_le<std::uint32_t>(p + 4, tx.locktime);
    write_le<std::uint16_t>(p + 8, static_cast<std::uint16_t>(tx.inputs.size()));
    write_le<std::uint16_t>(p + 10, static_cast<std::uint16_t>(tx.outputs.size()));
    p += kTxHeaderSize;
    for (const auto& o : tx.outputs) {
        encode_inout(o, std::span<std::uint8_t, kInOutSize>(p, kInOutSize));
        p += kInOutSize;
    }
    for (const auto& i : tx.inputs) {
        encode_inout(i, std::span<std::uint8_t, kInOutSize>(p, kInOutSize));
        p += kInOutSize;
    }
}

TxRecord decode_tx_record(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < kTxHeaderSize) throw Error(ErrorKind::range, "truncated transaction header");
    TxHeader h = decode_tx_header(bytes.data());
    if (bytes.size() < tx_record_length(h.input_count, h.output_count)) {
        throw Error(ErrorKind::range, "truncated transaction record");
    }
    TxRecord tx;
    tx.size = h.size;
    tx.locktime = h.locktime;
    const std::uint8_t* p = bytes.data() + kTxHeaderSize;
    tx.outputs.reserve(h.output_count);
    tx.inputs.reserve(h.input_count);
    for (std::uint16_t i = 0; i < h.output_count; ++i, p += kInOutSize) {
        tx.outputs.push_back(decode_inout(std::span<const std::uint8_t, kInOutSize>(p, kInOutSize)));
    }
    for (std::uint16_t i = 0; i < h.input_count; ++i, p += kInOutSize) {
        tx.inputs.push_back(decode_inout(std::span<const std::uint8_t, kInOutSize>(p, kInOutSize)));
    }
    return tx;
}

std::array<std::uint8_t, kBlockRecordSize> encode_block(const BlockRecord& block)
{
    std::array<std::uint8_t, kBlockRecordSize> out{};
    std::copy(block.header_hash.begin(), block.header_hash.end(), out.begin());
    write_le<std::int64_t>(out.data() + 32, block.timestamp);
    write_le<std::uint32_t>(out.data() + 40, block.first_tx_id);
    write_le<std::uint32_t>(out.data() + 44, block.tx_count);
    return out;
}

BlockRecord decode_block(std::span<const std::uint8_t, kBlockRecordSize> bytes) noexcept
{
    BlockRecord b;
    std::copy(bytes.begin(), bytes.begin() + 32, b.header_hash.begin());
    b.timestamp = read_le<std::int64_t>(bytes.data() + 32);
    b.first_tx_id = read_le<std::uint32_t>(bytes.data() + 40);
    b.tx_count = read_le<std::uint32_t>(bytes.data() + 44);
    return b;
}

// Payload encodings:
//   pubkey/pubkeyhash: hash[20] keylen[1] key[keylen]
//   scripthash:        hash[20] has_nested[1] (type[1] id[4])?
//   multisig:          m[1] n[1] key_id[4]*n
//   nulldata/nonstd:   raw bytes (length comes from the offsets table)
Bytes encode_payload(const ScriptPayload& payload)
{
    Bytes out;
    switch (payload.type) {
    case AddressType::pubkey:
    case AddressType::pubkeyhash: {
        const auto& p = std::get<PubkeyPayload>(payload.data);
        if (p.pubkey.size() > 0xFF) throw Error(ErrorKind::range, "public key longer than 255 bytes");
        out.insert(out.end(), p.hash.begin(), p.hash.end());
        out.push_back(static_cast<std::uint8_t>(p.pubkey.size()));
        out.insert(out.end(), p.pubkey.begin(), p.pubkey.end());
        break;
    }
    case AddressType::scripthash: {
        const auto& p = std::get<ScriptHashPayload>(payload.data);
        out.insert(out.end(), p.hash.begin(), p.hash.end());
        out.push_back(p.nested ? 1 : 0);
        if (p.nested) {
            out.push_back(code(p.nested->type));
            append_le<std::uint32_t>(out, p.nested->id);
        }
        break;
    }
    case AddressType::multisig: {
        const auto& p = std::get<MultisigPayload>(payload.data);
        if (p.key_ids.empty() || p.key_ids.size() > 0xFF || p.required < 1 || p.required > p.key_ids.size()) {
            throw Error(ErrorKind::range, "multisig requires 1 <= m <= n <= 255");
        }
        out.push_back(p.required);
        out.push_back(static_cast<std::uint8_t>(p.key_ids.size()));
        for (auto id : p.key_ids) append_le<std::uint32_t>(out, id);
        break;
    }
    case AddressType::nulldata:
    case AddressType::nonstandard:
        out = std::get<RawPayload>(payload.data).bytes;
        break;
    }
    return out;
}

ScriptPayload decode_payload(AddressType type, std::span<const std::uint8_t> bytes)
{
    auto need = [&](std::size_t n) {
        if (bytes.size() < n) throw Error(ErrorKind::storage, "truncated script payload");
    };
    ScriptPayload out;
    out.type = type;
    switch (type) {
    case AddressType::pubkey:
    case AddressType::pubkeyhash: {
        need(21);
        PubkeyPayload p;
        std::copy_n(bytes.begin(), 20, p.hash.begin());
        std::size_t len = bytes[20];
        need(21 + len);
        p.pubkey.assign(bytes.begin() + 21, bytes.begin() + 21 + static_cast<std::ptrdiff_t>(len));
        out.data = std::move(p);
        break;
    }
    case AddressType::scripthash: {
        need(21);
        ScriptHashPayload p;
        std::copy_n(bytes.begin(), 20, p.hash.begin());
        if (bytes[20]) {
            need(26);
            p.nested = AddressRef{static_cast<AddressType>(bytes[21]), read_le<std::uint32_t>(bytes.data() + 22)};
        }
        out.data = std::move(p);
        break;
    }
    case AddressType::multisig: {
        need(2);
        MultisigPayload p;
        p.required = bytes[0];
        std::size_t n = bytes[1];
        need(2 + 4 * n);
        p.key_ids.reserve(n);
        for (std::size_t i = 0; i < n; ++i) p.key_ids.push_back(read_le<std::uint32_t>(bytes.data() + 2 + 4 * i));
        out.data = std::move(p);
        break;
    }
    case AddressType::nulldata:
    case AddressType::nonstandard:
        out.data = RawPayload{Bytes(bytes.begin(), bytes.end())};
        break;
    default:
        throw Error(ErrorKind::range, "unknown address type code " + std::to_string(code(type)));
    }
    return out;
}

std::filesystem::path DataLayout::script_table(AddressType t) const
{
    return scripts_dir() / (std::string(type_name(t)) + ".dat");
}

std::filesystem::path DataLayout::script_offsets(AddressType t) const
{
    return scripts_dir() / (std::string(type_name(t)) + ".off");
}

std::filesystem::path DataLayout::undo_log(std::uint32_t height) const
{
    return undo_dir() / (std::to_string(height) + ".log");
}

std::vector<std::filesystem::path> DataLayout::core_files() const
{
    std::vector<std::filesystem::path> files = {txdata(), txoffsets(), blocks(), address_counts()};
    for (auto t : kAllAddressTypes) {
        files.push_back(script_table(t));
        files.push_back(script_offsets(t));
    }
    return files;
}

std::uint64_t measure_tx_graph_bytes(const DataLayout& layout)
{
    namespace fs = std::filesystem;
    auto payload = [](const fs::path& p) -> std::uint64_t {
        if (!fs::exists(p)) return 0;
        auto size = fs::file_size(p);
        return size > kFileHeaderSize ? size - kFileHeaderSize : 0;
    };
    std::uint64_t table = payload(layout.txdata());
    std::uint64_t offsets = payload(layout.txoffsets());
    // drop the trailing sentinel entry
    offsets = offsets >= kOffsetSize ? offsets - kOffsetSize : 0;
    return table + offsets;
}

} // namespace chainlens
