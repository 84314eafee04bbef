// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/errors.hpp>
#include <chainlens/parser.hpp>

#include <algorithm>
#include <cstring>

namespace chainlens {

namespace fs = std::filesystem;

namespace {

constexpr std::uint32_t kStateVersion = 1;
constexpr std::uint32_t kCommitEvery = 2000;

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, const fs::path& path) : m_bytes(bytes), m_path(path) {}

    template <typename T>
    T get()
    {
        need(sizeof(T));
        T v = read_le<T>(m_bytes.data() + m_pos);
        m_pos += sizeof(T);
        return v;
    }

    template <std::size_t N>
    std::array<std::uint8_t, N> fixed()
    {
        need(N);
        std::array<std::uint8_t, N> out;
        std::memcpy(out.data(), m_bytes.data() + m_pos, N);
        m_pos += N;
        return out;
    }

    std::span<const std::uint8_t> take(std::size_t n)
    {
        need(n);
        auto s = m_bytes.subspan(m_pos, n);
        m_pos += n;
        return s;
    }

    bool done() const noexcept { return m_pos == m_bytes.size(); }

private:
    void need(std::size_t n) const
    {
        if (m_pos + n > m_bytes.size()) throw Error(ErrorKind::storage, "truncated file " + m_path.string());
    }

    std::span<const std::uint8_t> m_bytes;
    const fs::path& m_path;
    std::size_t m_pos = 0;
};


std::string_view key_view(const Bytes& key)
{
    return {reinterpret_cast<const char*>(key.data()), key.size()};
}

} // namespace

Parser::Parser(const fs::path& data_dir, ParserOptions options)
    : m_options(options),
      m_layout(data_dir),
      m_lock((fs::create_directories(data_dir), std::make_unique<DirectoryLock>(m_layout.lock_file()))),
      m_txs(TxTable::open(m_layout)),
      m_blocks(BlockTable::open(m_layout)),
      m_index(IndexStore::open(m_layout.index_dir(), options.index_cache_bytes)),
      m_bloom(options.bloom_expected),
      m_cache(AddressCache::with_budget(options.cache_bytes))
{
    for (auto t : kAllAddressTypes) m_scripts.push_back(ScriptTable::open(m_layout, t));
    load_state();
}

Parser Parser::open(const fs::path& data_dir, ParserOptions options)
{
    return Parser(data_dir, options);
}

Parser::~Parser() = default;
Parser::Parser(Parser&&) noexcept = default;
Parser& Parser::operator=(Parser&&) noexcept = default;

void Parser::load_state()
{
    const fs::path path = m_layout.parser_state();
    if (!fs::exists(path)) {
        bool empty = m_txs.tx_count() == 0 && m_blocks.block_count() == 0;
        for (const auto& s : m_scripts) empty = empty && s.count() == 0;
        if (!empty) throw Error(ErrorKind::storage, "data directory has tables but no parser state");
        return;
    }
    Bytes bytes = read_file(path);
    Reader r(strip_magic(bytes, path), path);
    if (r.get<std::uint32_t>() != kStateVersion) throw Error(ErrorKind::storage, "unsupported parser state version");
    m_stats.n_tx = r.get<std::uint64_t>();
    m_stats.n_in = r.get<std::uint64_t>();
    m_stats.n_out = r.get<std::uint64_t>();
    for (auto& c : m_counts) c = r.get<std::uint32_t>();
    m_last_height = r.get<std::int64_t>();
    auto bloom_len = r.get<std::uint64_t>();
    m_bloom = BloomFilter::deserialize(r.take(static_cast<std::size_t>(bloom_len)));
    auto n_utxo = r.get<std::uint64_t>();
    m_utxo.reserve(static_cast<std::size_t>(n_utxo));
    for (std::uint64_t i = 0; i < n_utxo; ++i) {
        Hash256 hash = r.fixed<32>();
        UtxoEntry e;
        e.tx_id = r.get<std::uint32_t>();
        e.output_count = r.get<std::uint32_t>();
        e.unspent = r.get<std::uint32_t>();
        e.spent_bits.resize((e.output_count + 63) / 64);
        for (auto& w : e.spent_bits) w = r.get<std::uint64_t>();
        m_utxo.emplace(hash, std::move(e));
    }
    if (!r.done()) throw Error(ErrorKind::storage, "trailing bytes in " + path.string());

    bool consistent = m_txs.tx_count() == m_stats.n_tx &&
                      static_cast<std::int64_t>(m_blocks.block_count()) == m_last_height + 1;
    for (auto t : kAllAddressTypes) consistent = consistent && m_scripts[code(t)].count() == m_counts[code(t)];
    if (!consistent) throw Error(ErrorKind::storage, "data directory tables disagree with the parser state");
}

void Parser::save()
{
    // blocks last: a reader trusts blocks.dat to bound everything else
    m_txs.flush();
    for (auto& s : m_scripts) s.flush();
    m_blocks.flush();
    m_index.commit();

    Bytes out = with_magic();
    append_le<std::uint32_t>(out, kStateVersion);
    append_le<std::uint64_t>(out, m_stats.n_tx);
    append_le<std::uint64_t>(out, m_stats.n_in);
    append_le<std::uint64_t>(out, m_stats.n_out);
    for (auto c : m_counts) append_le<std::uint32_t>(out, c);
    append_le<std::int64_t>(out, m_last_height);
    Bytes bloom = m_bloom.serialize();
    append_le<std::uint64_t>(out, bloom.size());
    out.insert(out.end(), bloom.begin(), bloom.end());

    // sorted by tx ID so the file does not depend on hash-map iteration order
    std::vector<std::pair<const Hash256*, const UtxoEntry*>> entries;
    entries.reserve(m_utxo.size());
    for (const auto& [hash, e] : m_utxo) entries.emplace_back(&hash, &e);
    std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) { return a.second->tx_id < b.second->tx_id; });
    append_le<std::uint64_t>(out, entries.size());
    for (const auto& [hash, e] : entries) {
        out.insert(out.end(), hash->begin(), hash->end());
        append_le<std::uint32_t>(out, e->tx_id);
        append_le<std::uint32_t>(out, e->output_count);
        append_le<std::uint32_t>(out, e->unspent);
        for (auto w : e->spent_bits) append_le<std::uint64_t>(out, w);
    }
    write_file_atomic(m_layout.parser_state(), out);
    m_dirty = false;
}

const UtxoEntry* Parser::utxo(const Hash256& tx_hash) const
{
    auto it = m_utxo.find(tx_hash);
    return it == m_utxo.end() ? nullptr : &it->second;
}

std::uint32_t Parser::undo_window() const noexcept
{
    std::uint32_t limit = m_options.reorg_margin + m_options.undo_retention;
    std::uint32_t k = 0;
    while (k < limit && m_last_height - static_cast<std::int64_t>(k) >= 0) {
        std::error_code ec;
        if (!fs::exists(m_layout.undo_log(static_cast<std::uint32_t>(m_last_height - k)), ec)) break;
        ++k;
    }
    return k;
}

void Parser::grow_bloom()
{
    BloomFilter bigger(m_bloom.design_capacity() * 2, m_bloom.design_fpr());
    m_index.for_each_address_key([&](std::span<const std::uint8_t> key) { bigger.insert(key); });
    m_bloom = std::move(bigger);
}

ResolvedAddress Parser::resolve_address(const ScriptDescriptor& script)
{
    Bytes key = canonical_address_key(script);
    if (auto id = m_cache.lookup(key_view(key))) return {{script.type, *id}, false};
    if (m_bloom.possibly_contains(key)) {
        ++m_store_probes;
        if (auto ref = m_index.address_ref(key)) {
            m_cache.insert(key_view(key), ref->id, true);
            return {*ref, false};
        }
    } else {
        ++m_bloom_skips;
    }

    ScriptPayload payload;
    payload.type = script.type;
    switch (script.type) {
    case AddressType::pubkey:
    case AddressType::pubkeyhash:
        payload.data = PubkeyPayload{script.hash, script.pubkey};
        break;
    case AddressType::scripthash: {
        ScriptHashPayload p{script.hash, std::nullopt};
        if (!script.redeem.empty()) p.nested = resolve_address(script.redeem.front()).ref;
        payload.data = std::move(p);
        break;
    }
    case AddressType::multisig: {
        MultisigPayload p;
        p.required = script.required;
        for (const auto& k : script.keys) {
            ScriptDescriptor key_script;
            key_script.type = AddressType::pubkey;
            key_script.hash = k;
            p.key_ids.push_back(resolve_address(key_script).ref.id);
        }
        payload.data = std::move(p);
        break;
    }
    case AddressType::nulldata:
    case AddressType::nonstandard:
        payload.data = RawPayload{script.raw};
        break;
    }

    auto c = code(script.type);
    if (m_counts[c] == kUnspent) throw Error(ErrorKind::range, "address ID space exhausted");
    std::uint32_t id = m_scripts[c].append(encode_payload(payload));
    if (id != m_counts[c]) throw Error(ErrorKind::storage, "script table out of step with address counter");
    ++m_counts[c];
    m_index.put_address({script.type, id}, key);
    m_bloom.insert(key);
    if (m_bloom.over_capacity()) grow_bloom();
    m_cache.insert(key_view(key), id, false);
    return {{script.type, id}, true};
}

LinkedOutput Parser::link_input(const Hash256& prev_tx, std::uint32_t prev_index, std::uint32_t spender_tx_id)
{
    auto it = m_utxo.find(prev_tx);
    if (it == m_utxo.end()) {
        if (m_index.tx_id(prev_tx)) {
            throw Error(ErrorKind::double_spend, "output " + to_hex(prev_tx) + ":" + std::to_string(prev_index) + " already spent");
        }
        throw Error(ErrorKind::dangling_reference, "input references unknown transaction " + to_hex(prev_tx));
    }
    UtxoEntry& e = it->second;
    if (prev_index >= e.output_count) {
        throw Error(ErrorKind::dangling_reference, "input references missing output " + to_hex(prev_tx) + ":" + std::to_string(prev_index));
    }
    if (e.is_spent(prev_index)) {
        throw Error(ErrorKind::double_spend, "output " + to_hex(prev_tx) + ":" + std::to_string(prev_index) + " already spent");
    }
    InOutRecord out = m_txs.read_output(e.tx_id, prev_index);
    m_txs.mark_output_spent(e.tx_id, prev_index, spender_tx_id);
    e.set_spent(prev_index, true);
    --e.unspent;
    if (m_current_undo) m_current_undo->spent.push_back({e.tx_id, prev_index, e.output_count, prev_tx});
    LinkedOutput linked{e.tx_id, out.address_id, out.address_type, out.value};
    if (e.unspent == 0) m_utxo.erase(it);
    return linked;
}

void Parser::apply_block(const ImportBlock& block)
{
    if (static_cast<std::int64_t>(block.height) != m_last_height + 1) {
        throw Error(ErrorKind::continuity, "block height " + std::to_string(block.height) + " does not extend tip " +
                                               std::to_string(m_last_height));
    }
    if (block.txs.empty() || !block.txs.front().is_coinbase()) {
        throw Error(ErrorKind::structure, "block " + std::to_string(block.height) + " must start with a coinbase");
    }
    UndoRecord rec;
    rec.height = block.height;
    rec.stats = m_stats;
    rec.counts = m_counts;
    m_current_undo = &rec;
    try {
        for (std::size_t t = 0; t < block.txs.size(); ++t) {
            const ImportTx& itx = block.txs[t];
            if (m_stats.n_tx >= kUnspent) throw Error(ErrorKind::range, "transaction ID space exhausted");
            auto tx_id = static_cast<std::uint32_t>(m_stats.n_tx);
            if (t > 0 && itx.is_coinbase()) throw Error(ErrorKind::structure, "coinbase after the first transaction");
            m_index.put_tx(tx_id, itx.hash);

            TxRecord rec_tx;
            rec_tx.size = itx.size;
            rec_tx.locktime = itx.locktime;
            if (!itx.is_coinbase()) {
                rec_tx.inputs.reserve(itx.inputs.size());
                for (const auto& in : itx.inputs) {
                    if (in.is_coinbase_marker()) throw Error(ErrorKind::structure, "coinbase marker in a regular transaction");
                    LinkedOutput l = link_input(in.tx, in.index, tx_id);
                    rec_tx.inputs.push_back({l.tx_id, l.address_id, l.value, l.address_type});
                }
            }
            rec_tx.outputs.reserve(itx.outputs.size());
            for (const auto& out : itx.outputs) {
                if (out.value >= kValueLimit) throw Error(ErrorKind::range, "output value does not fit in 60 bits");
                ResolvedAddress a = resolve_address(out.script);
                rec_tx.outputs.push_back({kUnspent, a.ref.id, out.value, a.ref.type});
            }
            m_txs.append(rec_tx);
            if (!itx.outputs.empty()) {
                UtxoEntry e;
                e.tx_id = tx_id;
                e.output_count = static_cast<std::uint32_t>(itx.outputs.size());
                e.unspent = e.output_count;
                e.spent_bits.assign((e.output_count + 63) / 64, 0);
                m_utxo.emplace(itx.hash, std::move(e));
                rec.created.push_back(itx.hash);
            }
            ++m_stats.n_tx;
            m_stats.n_in += rec_tx.inputs.size();
            m_stats.n_out += rec_tx.outputs.size();
        }
        BlockRecord b{block.hash, block.time, static_cast<std::uint32_t>(rec.stats.n_tx),
                      static_cast<std::uint32_t>(m_stats.n_tx - rec.stats.n_tx)};
        m_blocks.append(b, m_counts);
        m_last_height = block.height;
        m_current_undo = nullptr;
    } catch (...) {
        m_current_undo = nullptr;
        undo(rec);
        throw;
    }
    write_undo(rec);
    prune_undo_logs();
    m_dirty = true;
}

ChainStats Parser::apply(BlockSource& source)
{
    std::optional<PipelinedSource> pipe;
    BlockSource* src = &source;
    if (m_options.pipelined) src = &pipe.emplace(source);

    m_index.begin();
    try {
        bool first = true;
        std::uint32_t since_commit = 0;
        while (auto block = src->next()) {
            if (first) {
                first = false;
                if (static_cast<std::int64_t>(block->height) <= m_last_height) {
                    auto depth = static_cast<std::uint32_t>(m_last_height - block->height + 1);
                    if (depth > undo_window()) {
                        throw Error(ErrorKind::continuity, "stream starts at height " + std::to_string(block->height) +
                                                               ", below the undo window of tip " + std::to_string(m_last_height));
                    }
                    revert(depth);
                    m_index.begin();
                }
            }
            apply_block(*block);
            if (++since_commit == kCommitEvery) {
                since_commit = 0;
                m_index.commit();
                m_index.begin();
            }
        }
    } catch (...) {
        if (m_dirty) save();
        m_index.commit();
        throw;
    }
    if (m_dirty) save();
    m_index.commit();
    return m_stats;
}

void Parser::revert(std::uint32_t n)
{
    if (n == 0) return;
    if (static_cast<std::int64_t>(n) > m_last_height + 1) {
        throw Error(ErrorKind::range, "cannot revert " + std::to_string(n) + " blocks from a chain of " +
                                          std::to_string(m_last_height + 1));
    }
    if (n > undo_window()) {
        throw Error(ErrorKind::range, "cannot revert " + std::to_string(n) + " blocks: only " +
                                          std::to_string(undo_window()) + " undo logs are kept");
    }
    m_index.begin();
    for (std::uint32_t i = 0; i < n; ++i) {
        auto height = static_cast<std::uint32_t>(m_last_height);
        UndoRecord rec = read_undo(height);
        undo(rec);
        fs::remove(m_layout.undo_log(height));
    }
    m_dirty = true;
    save();
}

void Parser::undo(const UndoRecord& rec)
{
    for (auto it = rec.spent.rbegin(); it != rec.spent.rend(); ++it) {
        auto [pos, inserted] = m_utxo.try_emplace(it->hash);
        UtxoEntry& e = pos->second;
        if (inserted) {
            // the entry was pruned when its last output got spent
            e.tx_id = it->tx_id;
            e.output_count = it->output_count;
            e.unspent = 0;
            e.spent_bits.assign((e.output_count + 63) / 64, 0);
            for (std::uint32_t i = 0; i < e.output_count; ++i) e.set_spent(i, true);
        }
        e.set_spent(it->index, false);
        ++e.unspent;
        if (it->tx_id < m_txs.tx_count()) m_txs.unmark_output_spent(it->tx_id, it->index);
    }
    for (const auto& h : rec.created) m_utxo.erase(h);

    m_txs.truncate(static_cast<std::uint32_t>(rec.stats.n_tx));
    for (auto t : kAllAddressTypes) m_scripts[code(t)].truncate(rec.counts[code(t)]);
    if (m_blocks.block_count() > rec.height) m_blocks.truncate(rec.height);
    m_index.erase_from(static_cast<std::uint32_t>(rec.stats.n_tx), rec.counts);
    m_stats = rec.stats;
    m_counts = rec.counts;
    m_last_height = static_cast<std::int64_t>(rec.height) - 1;
    m_cache.clear();
}

void Parser::write_undo(const UndoRecord& rec) const
{
    Bytes out = with_magic();
    append_le<std::uint32_t>(out, rec.height);
    append_le<std::uint64_t>(out, rec.stats.n_tx);
    append_le<std::uint64_t>(out, rec.stats.n_in);
    append_le<std::uint64_t>(out, rec.stats.n_out);
    for (auto c : rec.counts) append_le<std::uint32_t>(out, c);
    append_le<std::uint64_t>(out, rec.spent.size());
    for (const auto& s : rec.spent) {
        append_le<std::uint32_t>(out, s.tx_id);
        append_le<std::uint32_t>(out, s.index);
        append_le<std::uint32_t>(out, s.output_count);
        out.insert(out.end(), s.hash.begin(), s.hash.end());
    }
    append_le<std::uint64_t>(out, rec.created.size());
    for (const auto& h : rec.created) out.insert(out.end(), h.begin(), h.end());
    write_file_atomic(m_layout.undo_log(rec.height), out);
}

Parser::UndoRecord Parser::read_undo(std::uint32_t height) const
{
    fs::path path = m_layout.undo_log(height);
    if (!fs::exists(path)) throw Error(ErrorKind::range, "no undo log for height " + std::to_string(height));
    Bytes bytes = read_file(path);
    Reader r(strip_magic(bytes, path), path);
    UndoRecord rec;
    rec.height = r.get<std::uint32_t>();
    if (rec.height != height) throw Error(ErrorKind::storage, "undo log " + path.string() + " names the wrong height");
    rec.stats.n_tx = r.get<std::uint64_t>();
    rec.stats.n_in = r.get<std::uint64_t>();
    rec.stats.n_out = r.get<std::uint64_t>();
    for (auto& c : rec.counts) c = r.get<std::uint32_t>();
    auto n_spent = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_spent; ++i) {
        SpentRecord s;
        s.tx_id = r.get<std::uint32_t>();
        s.index = r.get<std::uint32_t>();
        s.output_count = r.get<std::uint32_t>();
        s.hash = r.fixed<32>();
        rec.spent.push_back(s);
    }
    auto n_created = r.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < n_created; ++i) rec.created.push_back(r.fixed<32>());
    if (!r.done()) throw Error(ErrorKind::storage, "trailing bytes in " + path.string());
    return rec;
}

void Parser::prune_undo_logs() const
{
    std::int64_t keep = static_cast<std::int64_t>(m_options.reorg_margin) + m_options.undo_retention;
    std::int64_t drop = m_last_height - keep;
    if (drop >= 0) {
        std::error_code ec;
        fs::remove(m_layout.undo_log(static_cast<std::uint32_t>(drop)), ec);
    }
}

ChainStats parse_chain(BlockSource& source, const fs::path& data_dir, ParserOptions options)
{
    Parser p = Parser::open(data_dir, options);
    ChainStats stats = p.apply(source);
    // an empty parse still leaves a resumable state behind
    if (!fs::exists(p.layout().parser_state())) p.save();
    return stats;
}

ChainStats update_chain(BlockSource& source, const fs::path& data_dir, ParserOptions options)
{
    if (!fs::exists(DataLayout(data_dir).parser_state())) {
        throw Error(ErrorKind::storage, "no parser state in " + data_dir.string() + "; run a full parse first");
    }
    Parser p = Parser::open(data_dir, options);
    return p.apply(source);
}

void revert_blocks(const fs::path& data_dir, std::uint32_t n, ParserOptions options)
{
    Parser p = Parser::open(data_dir, options);
    p.revert(n);
}

bool core_files_equal(const DataLayout& a, const DataLayout& b, std::string* first_difference)
{
    auto fa = a.core_files();
    auto fb = b.core_files();
    for (std::size_t i = 0; i < fa.size(); ++i) {
        bool ea = fs::exists(fa[i]);
        bool eb = fs::exists(fb[i]);
        bool same = ea == eb && (!ea || read_file(fa[i]) == read_file(fb[i]));
        if (!same) {
            if (first_difference) *first_difference = fa[i].filename().string();
            return false;
        }
    }
    return true;
}

} // namespace chainlens
