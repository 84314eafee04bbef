// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/chain_view.hpp>
#include <chainlens/map_reduce.hpp>
#include <chainlens/errors.hpp>
#include <chainlens/files.hpp>
#include <chainlens/index_store.hpp>
#include <chainlens/tables.hpp>

#include <algorithm>
#include <limits>
#include <mutex>

namespace chainlens {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kWholeFile = std::numeric_limits<std::uint64_t>::max();

std::uint64_t offset_at(const MappedFile& offsets, std::uint64_t i)
{
    return read_le<std::uint64_t>(offsets.data() + i * kOffsetSize);
}

bool offsets_cover(const MappedFile& offsets, const MappedFile& data, std::uint64_t count)
{
    if (offsets.size() < (count + 1) * kOffsetSize) return false;
    return data.size() >= offset_at(offsets, count);
}

InOutRecord decode_at(const std::uint8_t* p)
{
    return decode_inout(std::span<const std::uint8_t, kInOutSize>(p, kInOutSize));
}

} // namespace

InOutRecord TxView::output(std::uint32_t i) const
{
    if (i >= output_count()) throw Error(ErrorKind::range, "output index out of range");
    InOutRecord r = decode_at(m_p + kTxHeaderSize + kInOutSize * i);
    if (r.linked_tx_id != kUnspent && r.linked_tx_id >= m_max_tx_id) r.linked_tx_id = kUnspent;
    return r;
}

InOutRecord TxView::input(std::uint32_t i) const
{
    if (i >= input_count()) throw Error(ErrorKind::range, "input index out of range");
    return decode_at(m_p + kTxHeaderSize + kInOutSize * (std::uint64_t{output_count()} + i));
}

std::uint64_t TxView::total_out() const noexcept
{
    std::uint64_t sum = 0;
    for (std::uint32_t i = 0, n = output_count(); i < n; ++i) sum += output_value(i);
    return sum;
}

std::uint64_t TxView::total_in() const noexcept
{
    std::uint64_t sum = 0;
    for (std::uint32_t i = 0, n = input_count(); i < n; ++i) sum += input_value(i);
    return sum;
}

std::uint64_t TxView::fee() const noexcept
{
    if (is_coinbase()) return 0;
    std::uint64_t in = total_in();
    std::uint64_t out = total_out();
    return in > out ? in - out : 0;
}

TxRecord TxView::record() const
{
    TxRecord tx;
    tx.size = size();
    tx.locktime = locktime();
    std::uint32_t outs = output_count();
    std::uint32_t ins = input_count();
    tx.outputs.reserve(outs);
    tx.inputs.reserve(ins);
    for (std::uint32_t i = 0; i < outs; ++i) tx.outputs.push_back(output(i));
    for (std::uint32_t i = 0; i < ins; ++i) tx.inputs.push_back(input(i));
    return tx;
}

struct ChainView::Impl {
    DataLayout layout{fs::path{}};
    ViewOptions options;
    std::int64_t disk_height = -1;
    std::int64_t max_height = -1;
    std::uint32_t max_tx_id = 0;
    Hash256 tip_hash{};
    AddressCounts counts{};

    MappedFile blocks;
    MappedFile tx_offsets;
    MappedFile tx_data;
    std::vector<MappedFile> script_data;
    std::vector<MappedFile> script_offsets;

    mutable std::mutex index_mutex;
    mutable std::optional<IndexStore> index;
    mutable bool index_tried = false;

    BlockRecord block(std::uint32_t h) const
    {
        return decode_block(std::span<const std::uint8_t, kBlockRecordSize>(blocks.data() + std::uint64_t{h} * kBlockRecordSize,
                                                                           kBlockRecordSize));
    }

    IndexStore* index_store() const
    {
        if (!index_tried) {
            index_tried = true;
            if (fs::exists(layout.index_dir() / "index.sqlite")) {
                index.emplace(IndexStore::open(layout.index_dir(), 8ull << 20, true));
            }
        }
        return index ? &*index : nullptr;
    }
};

ChainView ChainView::open(const fs::path& data_dir, ViewOptions options)
{
    return open_at_least(data_dir, options, -1);
}

ChainView ChainView::open_at_least(const fs::path& data_dir, ViewOptions options, std::int64_t min_height)
{
    auto impl = std::make_shared<Impl>();
    impl->layout = DataLayout(data_dir);
    impl->options = options;
    const DataLayout& l = impl->layout;
    if (!fs::exists(l.parser_state())) {
        throw Error(ErrorKind::storage, "not a parsed data directory: " + data_dir.string());
    }

    impl->blocks = MappedFile(l.blocks(), kWholeFile);
    MappedFile counts(l.address_counts(), kWholeFile);
    impl->tx_offsets = MappedFile(l.txoffsets(), kWholeFile);
    impl->tx_data = MappedFile(l.txdata(), kWholeFile);
    for (AddressType t : kAllAddressTypes) {
        impl->script_data.emplace_back(l.script_table(t), kWholeFile);
        impl->script_offsets.emplace_back(l.script_offsets(t), kWholeFile);
    }

    std::uint64_t disk_blocks = impl->blocks.size() / kBlockRecordSize;
    impl->disk_height = static_cast<std::int64_t>(disk_blocks) - 1;
    std::int64_t h = impl->disk_height - static_cast<std::int64_t>(options.reorg_margin);
    if (h < min_height) h = std::min(min_height, impl->disk_height);

    // A writer flushes blocks.dat last, but its buffers can spill in any
    // order; step back until every table covers the candidate height.
    for (; h >= 0; --h) {
        BlockRecord b = impl->block(static_cast<std::uint32_t>(h));
        std::uint64_t end_tx = std::uint64_t{b.first_tx_id} + b.tx_count;
        if (!offsets_cover(impl->tx_offsets, impl->tx_data, end_tx)) continue;
        if (counts.size() < static_cast<std::uint64_t>(h + 1) * kAddressCountsRecordSize) continue;
        const std::uint8_t* row = counts.data() + static_cast<std::uint64_t>(h) * kAddressCountsRecordSize;
        bool scripts_ok = true;
        for (std::size_t t = 0; t < kAddressTypeCount; ++t) {
            impl->counts[t] = read_le<std::uint32_t>(row + 4 * t);
            scripts_ok = scripts_ok && offsets_cover(impl->script_offsets[t], impl->script_data[t], impl->counts[t]);
        }
        if (!scripts_ok) continue;
        impl->max_tx_id = static_cast<std::uint32_t>(end_tx);
        impl->tip_hash = b.header_hash;
        break;
    }
    if (h < min_height) {
        throw Error(ErrorKind::storage, "data directory is incomplete below the previous view height");
    }
    impl->max_height = h;
    if (h < 0) impl->counts = {};
    return ChainView(std::move(impl));
}

ChainView ChainView::reopen() const
{
    const Impl& old = *m_impl;
    std::uint64_t disk_blocks = MappedFile::payload_size_on_disk(old.layout.blocks()) / kBlockRecordSize;
    if (static_cast<std::int64_t>(disk_blocks) - 1 < old.max_height) {
        throw ReorgError("chain on disk is shorter than the open view; reorg deeper than the margin");
    }
    ChainView next = open_at_least(old.layout.root(), old.options, old.max_height);
    if (old.max_height >= 0 &&
        next.m_impl->block(static_cast<std::uint32_t>(old.max_height)).header_hash != old.tip_hash) {
        throw ReorgError("block " + std::to_string(old.max_height) + " changed; reorg deeper than the margin");
    }
    return next;
}

const DataLayout& ChainView::layout() const noexcept { return m_impl->layout; }
std::uint32_t ChainView::reorg_margin() const noexcept { return m_impl->options.reorg_margin; }
std::int64_t ChainView::max_height() const noexcept { return m_impl->max_height; }
std::uint32_t ChainView::max_tx_id() const noexcept { return m_impl->max_tx_id; }
std::int64_t ChainView::disk_height() const noexcept { return m_impl->disk_height; }
AddressCounts ChainView::address_counts() const noexcept { return m_impl->counts; }

BlockRecord ChainView::block(std::uint32_t height) const
{
    if (static_cast<std::int64_t>(height) > m_impl->max_height) {
        throw Error(ErrorKind::range, "height " + std::to_string(height) + " is outside the view");
    }
    return m_impl->block(height);
}

std::pair<std::uint32_t, std::uint32_t> ChainView::block_txs(std::uint32_t height) const
{
    BlockRecord b = block(height);
    return {b.first_tx_id, b.first_tx_id + b.tx_count};
}

std::uint32_t ChainView::height_of(std::uint32_t tx_id) const
{
    check_tx(tx_id);
    // first_tx_id strictly increases because every block has a coinbase
    std::uint32_t lo = 0;
    std::uint32_t hi = block_count();
    while (hi - lo > 1) {
        std::uint32_t mid = lo + (hi - lo) / 2;
        if (m_impl->block(mid).first_tx_id <= tx_id) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return lo;
}

std::pair<std::uint32_t, std::uint32_t> ChainView::heights_between(std::int64_t from, std::int64_t to) const
{
    auto first_at_or_after = [&](std::int64_t t) {
        std::uint32_t lo = 0;
        std::uint32_t hi = block_count();
        while (lo < hi) {
            std::uint32_t mid = lo + (hi - lo) / 2;
            if (m_impl->block(mid).timestamp < t) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        return lo;
    };
    std::uint32_t first = first_at_or_after(from);
    std::uint32_t end = std::max(first, first_at_or_after(to));
    return {first, end};
}

void ChainView::check_tx(std::uint32_t tx_id) const
{
    if (tx_id >= m_impl->max_tx_id) {
        throw Error(ErrorKind::range, "tx " + std::to_string(tx_id) + " is outside the view");
    }
}

std::uint64_t ChainView::tx_offset(std::uint32_t tx_id) const
{
    if (tx_id > m_impl->max_tx_id) throw Error(ErrorKind::range, "tx offset outside the view");
    return offset_at(m_impl->tx_offsets, tx_id);
}

TxView ChainView::tx(std::uint32_t tx_id) const
{
    check_tx(tx_id);
    return TxView(m_impl->tx_data.data() + offset_at(m_impl->tx_offsets, tx_id), tx_id, m_impl->max_tx_id);
}

std::optional<std::uint32_t> ChainView::spending_tx(std::uint32_t tx_id, std::uint32_t out_index) const
{
    InOutRecord out = tx(tx_id).output(out_index);
    if (out.linked_tx_id == kUnspent) return std::nullopt;
    return out.linked_tx_id;
}

OutPoint ChainView::spent_output(std::uint32_t tx_id, std::uint32_t in_index) const
{
    TxView spender = tx(tx_id);
    InOutRecord in = spender.input(in_index);
    // Inputs do not store the output index. Among the source's outputs linked
    // to this spender with the same address and value, the k-th such input
    // maps to the k-th such output.
    auto same = [&](const InOutRecord& r) {
        return r.linked_tx_id == in.linked_tx_id && r.address() == in.address() && r.value == in.value;
    };
    std::uint32_t rank = 0;
    for (std::uint32_t i = 0; i < in_index; ++i) rank += same(spender.input(i));

    TxView source = tx(in.linked_tx_id);
    for (std::uint32_t o = 0, n = source.output_count(); o < n; ++o) {
        InOutRecord r = source.output(o);
        if (r.linked_tx_id == tx_id && r.address() == in.address() && r.value == in.value) {
            if (rank == 0) return {in.linked_tx_id, o};
            --rank;
        }
    }
    throw Error(ErrorKind::consistency, "input " + std::to_string(tx_id) + ":" + std::to_string(in_index) +
                                            " has no matching output");
}

std::uint64_t ChainView::block_total_out(std::uint32_t height) const
{
    auto [first, end] = block_txs(height);
    std::uint64_t sum = 0;
    for (std::uint32_t id = first; id < end; ++id) sum += tx(id).total_out();
    return sum;
}

std::uint64_t ChainView::block_fees(std::uint32_t height) const
{
    auto [first, end] = block_txs(height);
    std::uint64_t sum = 0;
    for (std::uint32_t id = first; id < end; ++id) sum += tx(id).fee();
    return sum;
}

ScriptPayload ChainView::script_payload(AddressRef ref) const
{
    std::size_t t = code(ref.type);
    if (t >= kAddressTypeCount || ref.id >= m_impl->counts[t]) {
        throw Error(ErrorKind::range, "address " + std::string(type_name(ref.type)) + ":" + std::to_string(ref.id) +
                                          " is outside the view");
    }
    const MappedFile& off = m_impl->script_offsets[t];
    std::uint64_t begin = offset_at(off, ref.id);
    std::uint64_t end = offset_at(off, std::uint64_t{ref.id} + 1);
    return decode_payload(ref.type, std::span<const std::uint8_t>(m_impl->script_data[t].data() + begin, end - begin));
}

std::optional<std::uint32_t> ChainView::tx_id(const Hash256& hash) const
{
    std::lock_guard lock(m_impl->index_mutex);
    IndexStore* index = m_impl->index_store();
    if (!index) return std::nullopt;
    auto id = index->tx_id(hash);
    if (!id || *id >= m_impl->max_tx_id) return std::nullopt;
    return id;
}

std::optional<Hash256> ChainView::tx_hash(std::uint32_t tx_id) const
{
    if (tx_id >= m_impl->max_tx_id) return std::nullopt;
    std::lock_guard lock(m_impl->index_mutex);
    IndexStore* index = m_impl->index_store();
    if (!index) return std::nullopt;
    return index->tx_hash(tx_id);
}

std::optional<AddressRef> ChainView::address_ref(std::span<const std::uint8_t> canonical_key) const
{
    std::lock_guard lock(m_impl->index_mutex);
    IndexStore* index = m_impl->index_store();
    if (!index) return std::nullopt;
    auto ref = index->address_ref(canonical_key);
    if (!ref || ref->id >= m_impl->counts[code(ref->type)]) return std::nullopt;
    return ref;
}

} // namespace chainlens

namespace chainlens::detail {

unsigned resolve_threads(unsigned requested) noexcept
{
    if (requested > 0) return requested;
    return std::max(1u, std::thread::hardware_concurrency());
}

} // namespace chainlens::detail
