// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/errors.hpp>
#include <chainlens/files.hpp>
#include <chainlens/index_store.hpp>
#include <chainlens/mempool.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_set>

namespace chainlens {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kPendingRecord = 32 + 8;

fs::path pending_path(const DataLayout& l) { return l.mempool_dir() / "pending.dat"; }
fs::path blob_path(const DataLayout& l, const Hash256& h) { return l.full_mempool_dir() / (to_hex(h) + ".bin"); }

std::vector<FeedEntry> read_pending(const DataLayout& l)
{
    std::vector<FeedEntry> out;
    if (!fs::exists(pending_path(l))) return out;
    Bytes raw = read_file(pending_path(l));
    auto body = strip_magic(raw, pending_path(l));
    if (body.size() % kPendingRecord != 0) throw Error(ErrorKind::storage, "corrupt " + pending_path(l).string());
    for (std::size_t at = 0; at < body.size(); at += kPendingRecord) {
        FeedEntry e;
        std::copy_n(body.begin() + static_cast<std::ptrdiff_t>(at), 32, e.hash.begin());
        e.millis = read_le<std::int64_t>(body.data() + at + 32);
        out.push_back(std::move(e));
    }
    return out;
}

void write_pending(const DataLayout& l, const std::vector<FeedEntry>& entries)
{
    Bytes out = with_magic();
    for (const auto& e : entries) {
        out.insert(out.end(), e.hash.begin(), e.hash.end());
        append_le<std::int64_t>(out, e.millis);
    }
    write_file_atomic(pending_path(l), out);
}

std::vector<std::int64_t> read_timestamps(const DataLayout& l)
{
    std::vector<std::int64_t> out;
    if (!fs::exists(l.timestamps())) return out;
    Bytes raw = read_file(l.timestamps());
    auto body = strip_magic(raw, l.timestamps());
    if (body.size() % 8 != 0) throw Error(ErrorKind::storage, "corrupt " + l.timestamps().string());
    out.resize(body.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = read_le<std::int64_t>(body.data() + 8 * i);
    return out;
}

void write_timestamps(const DataLayout& l, const std::vector<std::int64_t>& ts)
{
    Bytes out = with_magic();
    out.reserve(out.size() + 8 * ts.size());
    for (auto t : ts) append_le<std::int64_t>(out, t);
    write_file_atomic(l.timestamps(), out);
}

/// Matches pending entries against the chain and rewrites both files.
RecordSummary align(const DataLayout& l, std::vector<FeedEntry> pending)
{
    RecordSummary s;
    std::uint64_t offsets = MappedFile::payload_size_on_disk(l.txoffsets()) / kOffsetSize;
    std::uint64_t n_tx = offsets > 0 ? offsets - 1 : 0;
    std::vector<std::int64_t> ts = read_timestamps(l);
    if (ts.size() < n_tx) ts.resize(n_tx, 0);

    std::vector<FeedEntry> still;
    std::optional<IndexStore> index;
    if (fs::exists(l.index_dir() / "index.sqlite")) index.emplace(IndexStore::open(l.index_dir(), 8ull << 20, true));
    for (auto& e : pending) {
        std::optional<std::uint32_t> id;
        if (index) id = index->tx_id(e.hash);
        if (id && *id < n_tx) {
            if (ts[*id] == 0) ts[*id] = e.millis;
            ++s.matched;
        } else {
            still.push_back(std::move(e));
        }
    }
    s.pending = still.size();
    fs::create_directories(l.mempool_dir());
    write_timestamps(l, ts);
    write_pending(l, still);
    return s;
}

} // namespace

std::optional<MempoolMode> parse_mempool_mode(std::string_view text) noexcept
{
    if (text == "minimal") return MempoolMode::minimal;
    if (text == "full") return MempoolMode::full;
    return std::nullopt;
}

std::vector<FeedEntry> parse_feed(std::string_view text)
{
    std::vector<FeedEntry> out;
    std::unordered_set<Hash256, Hash256Hasher> seen;
    std::int64_t last = 0;
    std::uint64_t line_no = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;

        auto c1 = line.find(',');
        if (c1 == std::string_view::npos) throw ParseError("expected txhash,unix_millis", line_no);
        auto c2 = line.find(',', c1 + 1);
        std::string_view hash_text = line.substr(0, c1);
        std::string_view millis_text = line.substr(c1 + 1, c2 == std::string_view::npos ? std::string_view::npos : c2 - c1 - 1);

        FeedEntry e;
        auto hash = fixed_from_hex<32>(hash_text);
        if (!hash) throw ParseError("bad tx hash", line_no);
        e.hash = *hash;
        auto [ptr, ec] = std::from_chars(millis_text.data(), millis_text.data() + millis_text.size(), e.millis);
        if (ec != std::errc{} || ptr != millis_text.data() + millis_text.size() || millis_text.empty()) {
            throw ParseError("bad timestamp", line_no);
        }
        if (e.millis <= 0) throw ParseError("timestamp must be positive", line_no);
        if (e.millis < last) throw ParseError("timestamp decreases", line_no);
        last = e.millis;
        if (c2 != std::string_view::npos) {
            auto payload = from_hex(line.substr(c2 + 1));
            if (!payload) throw ParseError("bad payload hex", line_no);
            e.payload = std::move(*payload);
        }
        if (seen.insert(e.hash).second) out.push_back(std::move(e));
    }
    return out;
}

std::vector<FeedEntry> read_feed(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::storage, "cannot open feed " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_feed(buf.str());
}

RecordSummary record_feed(const fs::path& data_dir, const std::vector<FeedEntry>& feed, MempoolMode mode)
{
    DataLayout l(data_dir);
    fs::create_directories(l.mempool_dir());
    DirectoryLock lock(l.mempool_dir() / ".lock");

    std::uint64_t stored = 0;
    if (mode == MempoolMode::full) {
        fs::create_directories(l.full_mempool_dir());
        for (const auto& e : feed) {
            fs::path p = blob_path(l, e.hash);
            if (fs::exists(p)) continue;
            Bytes blob = with_magic();
            append_le<std::int64_t>(blob, e.millis);
            blob.insert(blob.end(), e.payload.begin(), e.payload.end());
            write_file_atomic(p, blob);
            ++stored;
        }
    }

    std::vector<FeedEntry> pending = read_pending(l);
    std::unordered_set<Hash256, Hash256Hasher> known;
    for (const auto& e : pending) known.insert(e.hash);
    for (const auto& e : feed) {
        if (known.insert(e.hash).second) pending.push_back({e.hash, e.millis, {}});
    }
    RecordSummary s = align(l, std::move(pending));
    s.feed_entries = feed.size();
    s.stored = stored;
    return s;
}

RecordSummary align_mempool(const fs::path& data_dir)
{
    DataLayout l(data_dir);
    fs::create_directories(l.mempool_dir());
    DirectoryLock lock(l.mempool_dir() / ".lock");
    return align(l, read_pending(l));
}

std::vector<FeedEntry> load_full_entries(const fs::path& data_dir)
{
    DataLayout l(data_dir);
    std::vector<FeedEntry> out;
    if (!fs::exists(l.full_mempool_dir())) return out;
    for (const auto& f : fs::directory_iterator(l.full_mempool_dir())) {
        if (f.path().extension() != ".bin") continue;
        auto hash = fixed_from_hex<32>(f.path().stem().string());
        if (!hash) continue;
        Bytes raw = read_file(f.path());
        auto body = strip_magic(raw, f.path());
        if (body.size() < 8) throw Error(ErrorKind::storage, "truncated " + f.path().string());
        FeedEntry e;
        e.hash = *hash;
        e.millis = read_le<std::int64_t>(body.data());
        e.payload.assign(body.begin() + 8, body.end());
        out.push_back(std::move(e));
    }
    std::sort(out.begin(), out.end(), [](const FeedEntry& a, const FeedEntry& b) {
        return a.millis != b.millis ? a.millis < b.millis : a.hash < b.hash;
    });
    return out;
}

MempoolLog MempoolLog::load(const fs::path& data_dir)
{
    MempoolLog log;
    log.m_millis = read_timestamps(DataLayout(data_dir));
    return log;
}

std::uint64_t MempoolLog::seen_count() const noexcept
{
    return static_cast<std::uint64_t>(std::count_if(m_millis.begin(), m_millis.end(), [](std::int64_t t) { return t != 0; }));
}

std::optional<std::int64_t> MempoolLog::first_seen_millis(std::uint32_t tx_id) const noexcept
{
    if (tx_id >= m_millis.size() || m_millis[tx_id] == 0) return std::nullopt;
    return m_millis[tx_id];
}

std::optional<double> MempoolLog::wait_time(const ChainView& view, std::uint32_t tx_id) const
{
    if (tx_id >= view.tx_count()) return std::nullopt;
    auto seen = first_seen_millis(tx_id);
    if (!seen) return std::nullopt;
    double block_time = static_cast<double>(view.block(view.height_of(tx_id)).timestamp);
    return block_time - (static_cast<double>(*seen) / 1000.0 + m_correction);
}

} // namespace chainlens
