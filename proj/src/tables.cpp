// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/errors.hpp>
#include <chainlens/tables.hpp>

namespace chainlens {

namespace {

std::uint32_t init_offsets(AppendFile& offsets, const std::filesystem::path& path)
{
    if (offsets.size() == 0) offsets.append_value<std::uint64_t>(0);
    if (offsets.size() % kOffsetSize != 0) throw Error(ErrorKind::storage, "misaligned offsets file " + path.string());
    return static_cast<std::uint32_t>(offsets.size() / kOffsetSize - 1);
}

} // namespace

TxTable TxTable::open(const DataLayout& layout)
{
    TxTable t;
    t.m_data = AppendFile::open(layout.txdata());
    t.m_offsets = AppendFile::open(layout.txoffsets());
    t.m_count = init_offsets(t.m_offsets, layout.txoffsets());
    if (t.m_offsets.read_value<std::uint64_t>(std::uint64_t{t.m_count} * kOffsetSize) != t.m_data.size()) {
        throw Error(ErrorKind::storage, "tx offsets sentinel does not match table length");
    }
    return t;
}

std::uint64_t TxTable::offset(std::uint32_t tx_id) const
{
    if (tx_id > m_count) throw Error(ErrorKind::range, "tx id " + std::to_string(tx_id) + " out of range");
    return m_offsets.read_value<std::uint64_t>(std::uint64_t{tx_id} * kOffsetSize);
}

std::uint32_t TxTable::append(const TxRecord& tx)
{
    if (m_count == kUnspent - 1) throw Error(ErrorKind::range, "tx id space exhausted");
    Bytes buf;
    append_tx_record(tx, buf);
    m_data.append(buf);
    m_offsets.append_value<std::uint64_t>(m_data.size());
    return m_count++;
}

TxRecord TxTable::read(std::uint32_t tx_id) const
{
    if (tx_id >= m_count) throw Error(ErrorKind::range, "tx id " + std::to_string(tx_id) + " out of range");
    std::uint64_t begin = offset(tx_id);
    std::uint64_t end = offset(tx_id + 1);
    Bytes buf(static_cast<std::size_t>(end - begin));
    m_data.read(begin, buf);
    return decode_tx_record(buf);
}

TxHeader TxTable::header(std::uint32_t tx_id) const
{
    if (tx_id >= m_count) throw Error(ErrorKind::range, "tx id " + std::to_string(tx_id) + " out of range");
    std::uint8_t buf[kTxHeaderSize];
    m_data.read(offset(tx_id), buf);
    return decode_tx_header(buf);
}

std::uint64_t TxTable::output_position(std::uint32_t tx_id, std::uint32_t out_index) const
{
    TxHeader h = header(tx_id);
    if (out_index >= h.output_count) {
        throw Error(ErrorKind::range, "output index " + std::to_string(out_index) + " out of range for tx " + std::to_string(tx_id));
    }
    return offset(tx_id) + kTxHeaderSize + kInOutSize * std::uint64_t{out_index};
}

InOutRecord TxTable::read_output(std::uint32_t tx_id, std::uint32_t out_index) const
{
    InOutBytes buf;
    m_data.read(output_position(tx_id, out_index), buf);
    return decode_inout(buf);
}

void TxTable::mark_output_spent(std::uint32_t tx_id, std::uint32_t out_index, std::uint32_t spender_tx_id)
{
    std::uint64_t pos = output_position(tx_id, out_index);
    if (spender_tx_id <= tx_id || spender_tx_id == kUnspent) {
        throw Error(ErrorKind::consistency, "spender " + std::to_string(spender_tx_id) + " must come after tx " + std::to_string(tx_id));
    }
    std::uint32_t current = m_data.read_value<std::uint32_t>(pos);
    if (current != kUnspent) {
        throw Error(ErrorKind::consistency, "output " + std::to_string(tx_id) + ":" + std::to_string(out_index) +
                                                " already spent by tx " + std::to_string(current));
    }
    std::uint8_t buf[4];
    write_le<std::uint32_t>(buf, spender_tx_id);
    m_data.write_at(pos, buf);
}

void TxTable::unmark_output_spent(std::uint32_t tx_id, std::uint32_t out_index)
{
    std::uint8_t buf[4];
    write_le<std::uint32_t>(buf, kUnspent);
    m_data.write_at(output_position(tx_id, out_index), buf);
}

void TxTable::truncate(std::uint32_t tx_count)
{
    if (tx_count > m_count) throw Error(ErrorKind::range, "cannot truncate tx table upwards");
    std::uint64_t end = offset(tx_count);
    m_data.truncate(end);
    m_offsets.truncate((std::uint64_t{tx_count} + 1) * kOffsetSize);
    m_count = tx_count;
}

void TxTable::flush()
{
    m_data.flush();
    m_offsets.flush();
}

BlockTable BlockTable::open(const DataLayout& layout)
{
    BlockTable t;
    t.m_blocks = AppendFile::open(layout.blocks());
    t.m_counts = AppendFile::open(layout.address_counts());
    if (t.m_blocks.size() % kBlockRecordSize != 0 || t.m_counts.size() % kAddressCountsRecordSize != 0 ||
        t.m_blocks.size() / kBlockRecordSize != t.m_counts.size() / kAddressCountsRecordSize) {
        throw Error(ErrorKind::storage, "block table and address counters disagree");
    }
    t.m_count = static_cast<std::uint32_t>(t.m_blocks.size() / kBlockRecordSize);
    return t;
}

void BlockTable::append(const BlockRecord& block, const AddressCounts& counts_after)
{
    m_blocks.append(encode_block(block));
    std::array<std::uint8_t, kAddressCountsRecordSize> buf{};
    for (std::size_t i = 0; i < kAddressTypeCount; ++i) write_le<std::uint32_t>(buf.data() + 4 * i, counts_after[i]);
    m_counts.append(buf);
    ++m_count;
}

BlockRecord BlockTable::read(std::uint32_t height) const
{
    if (height >= m_count) throw Error(ErrorKind::range, "block height " + std::to_string(height) + " out of range");
    std::array<std::uint8_t, kBlockRecordSize> buf{};
    m_blocks.read(std::uint64_t{height} * kBlockRecordSize, buf);
    return decode_block(buf);
}

AddressCounts BlockTable::counts_after(std::uint32_t height) const
{
    if (height >= m_count) throw Error(ErrorKind::range, "block height " + std::to_string(height) + " out of range");
    std::array<std::uint8_t, kAddressCountsRecordSize> buf{};
    m_counts.read(std::uint64_t{height} * kAddressCountsRecordSize, buf);
    AddressCounts out{};
    for (std::size_t i = 0; i < kAddressTypeCount; ++i) out[i] = read_le<std::uint32_t>(buf.data() + 4 * i);
    return out;
}

void BlockTable::truncate(std::uint32_t block_count)
{
    if (block_count > m_count) throw Error(ErrorKind::range, "cannot truncate block table upwards");
    m_blocks.truncate(std::uint64_t{block_count} * kBlockRecordSize);
    m_counts.truncate(std::uint64_t{block_count} * kAddressCountsRecordSize);
    m_count = block_count;
}

void BlockTable::flush()
{
    m_blocks.flush();
    m_counts.flush();
}

ScriptTable ScriptTable::open(const DataLayout& layout, AddressType type)
{
    ScriptTable t;
    t.m_data = AppendFile::open(layout.script_table(type));
    t.m_offsets = AppendFile::open(layout.script_offsets(type));
    t.m_count = init_offsets(t.m_offsets, layout.script_offsets(type));
    return t;
}

std::uint32_t ScriptTable::append(std::span<const std::uint8_t> payload)
{
    m_data.append(payload);
    m_offsets.append_value<std::uint64_t>(m_data.size());
    return m_count++;
}

Bytes ScriptTable::read(std::uint32_t id) const
{
    if (id >= m_count) throw Error(ErrorKind::range, "script id " + std::to_string(id) + " out of range");
    std::uint64_t begin = m_offsets.read_value<std::uint64_t>(std::uint64_t{id} * kOffsetSize);
    std::uint64_t end = m_offsets.read_value<std::uint64_t>((std::uint64_t{id} + 1) * kOffsetSize);
    Bytes out(static_cast<std::size_t>(end - begin));
    m_data.read(begin, out);
    return out;
}

void ScriptTable::truncate(std::uint32_t count)
{
    if (count > m_count) throw Error(ErrorKind::range, "cannot truncate script table upwards");
    std::uint64_t end = m_offsets.read_value<std::uint64_t>(std::uint64_t{count} * kOffsetSize);
    m_data.truncate(end);
    m_offsets.truncate((std::uint64_t{count} + 1) * kOffsetSize);
    m_count = count;
}

void ScriptTable::flush()
{
    m_data.flush();
    m_offsets.flush();
}

} // namespace chainlens
