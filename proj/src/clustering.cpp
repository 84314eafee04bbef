// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/clustering.hpp>
#include <chainlens/errors.hpp>
#include <chainlens/files.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace chainlens {

namespace {

constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

std::string_view trim(std::string_view s)
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

} // namespace

UnionFind::UnionFind(std::size_t n) : m_parent(n), m_size(n, 1), m_components(n)
{
    std::iota(m_parent.begin(), m_parent.end(), 0u);
}

std::uint32_t UnionFind::find(std::uint32_t x) noexcept
{
    while (m_parent[x] != x) {
        m_parent[x] = m_parent[m_parent[x]];
        x = m_parent[x];
    }
    return x;
}

bool UnionFind::unite(std::uint32_t a, std::uint32_t b) noexcept
{
    a = find(a);
    b = find(b);
    if (a == b) return false;
    if (m_size[a] < m_size[b]) std::swap(a, b);
    m_parent[b] = a;
    m_size[a] += m_size[b];
    --m_components;
    return true;
}

AddressSpace::AddressSpace(const AddressCounts& counts) : m_counts(counts)
{
    for (std::size_t t = 0; t < kAddressTypeCount; ++t) m_base[t + 1] = m_base[t] + counts[t];
    m_total = m_base[kAddressTypeCount];
    if (m_total > kNone) throw Error(ErrorKind::range, "too many addresses for 32-bit cluster keys");
}

std::uint32_t AddressSpace::flat(AddressRef ref) const
{
    std::size_t t = code(ref.type);
    if (t >= kAddressTypeCount || ref.id >= m_counts[t]) throw Error(ErrorKind::range, "address outside the address space");
    return static_cast<std::uint32_t>(m_base[t] + ref.id);
}

AddressRef AddressSpace::ref(std::uint32_t flat) const
{
    if (flat >= m_total) throw Error(ErrorKind::range, "flat address outside the address space");
    std::size_t t = static_cast<std::size_t>(std::upper_bound(m_base.begin(), m_base.end(), std::uint64_t{flat}) - m_base.begin()) - 1;
    return {static_cast<AddressType>(t), static_cast<std::uint32_t>(flat - m_base[t])};
}

std::string format_address(AddressRef ref)
{
    return std::string(type_name(ref.type)) + ":" + std::to_string(ref.id);
}

std::optional<AddressRef> parse_address(std::string_view text)
{
    auto colon = text.find(':');
    if (colon == std::string_view::npos) return std::nullopt;
    auto type = parse_type_name(text.substr(0, colon));
    if (!type) return std::nullopt;
    std::string_view digits = text.substr(colon + 1);
    std::uint32_t id = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), id);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || digits.empty()) return std::nullopt;
    return AddressRef{*type, id};
}

bool detect_coinjoin(const TxView& tx)
{
    std::uint32_t ins = tx.input_count();
    std::uint32_t outs = tx.output_count();
    if (ins < 2 || outs < 3) return false;
    std::unordered_map<std::uint64_t, std::uint32_t> freq;
    std::uint32_t k = 0;
    for (std::uint32_t i = 0; i < outs; ++i) k = std::max(k, ++freq[tx.output_value(i)]);
    return k >= 2 && ins >= k && outs >= 2 * k - 1;
}

HeuristicConfig parse_heuristics(std::string_view list)
{
    HeuristicConfig c;
    c.multi_input = false;
    std::string_view rest = list;
    while (!rest.empty()) {
        auto comma = rest.find(',');
        std::string_view item = trim(rest.substr(0, comma));
        rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        if (item == "multi_input") {
            c.multi_input = true;
        } else if (item == "change_fresh") {
            c.change_fresh = true;
        } else if (item == "change_multisig") {
            c.change_multisig = true;
        } else if (item == "all") {
            c.multi_input = c.change_fresh = c.change_multisig = true;
        } else if (item == "none" || item.empty()) {
        } else {
            throw Error(ErrorKind::usage, "unknown heuristic '" + std::string(item) + "'");
        }
    }
    return c;
}

std::string format_heuristics(const HeuristicConfig& c)
{
    std::string out;
    auto add = [&](bool on, const char* name) {
        if (!on) return;
        if (!out.empty()) out += ',';
        out += name;
    };
    add(c.multi_input, "multi_input");
    add(c.change_fresh, "change_fresh");
    add(c.change_multisig, "change_multisig");
    return out.empty() ? "none" : out;
}

AccessStructure access_structure(const ChainView& view, AddressRef ref)
{
    AccessStructure s;
    s.type = ref.type;
    if (ref.type == AddressType::multisig) {
        auto p = std::get<MultisigPayload>(view.script_payload(ref).data);
        s.m = p.required;
        s.n = static_cast<std::uint8_t>(p.total());
    } else if (ref.type == AddressType::scripthash) {
        auto p = std::get<ScriptHashPayload>(view.script_payload(ref).data);
        if (p.nested) {
            s.has_nested = true;
            s.nested = p.nested->type;
            if (p.nested->type == AddressType::multisig) {
                auto inner = std::get<MultisigPayload>(view.script_payload(*p.nested).data);
                s.m = inner.required;
                s.n = static_cast<std::uint8_t>(inner.total());
            }
        }
    }
    return s;
}

AddressHistory AddressHistory::build(const ChainView& view, const AddressSpace& space)
{
    AddressHistory h;
    h.m_first.assign(space.size(), kNone);
    for (std::uint32_t id = 0; id < view.tx_count(); ++id) {
        TxView tx = view.tx(id);
        for (std::uint32_t o = 0, n = tx.output_count(); o < n; ++o) {
            std::uint32_t f = space.flat(tx.output(o).address());
            if (h.m_first[f] == kNone) h.m_first[f] = id;
        }
    }
    return h;
}

std::vector<ChangeOutput> identify_change_outputs(const ChainView& view, const TxView& tx, const AddressSpace& space,
                                                  const AddressHistory& history, const HeuristicConfig& config)
{
    std::vector<ChangeOutput> result;
    if (tx.is_coinbase()) return result;
    std::vector<std::uint32_t> candidates;
    for (std::uint32_t o = 0, n = tx.output_count(); o < n; ++o) {
        if (tx.output(o).address_type != AddressType::nulldata) candidates.push_back(o);
    }
    if (candidates.size() < 2) return result;

    std::vector<bool> fresh_hit(tx.output_count(), false);
    std::vector<bool> multisig_hit(tx.output_count(), false);

    if (config.change_fresh) {
        std::optional<std::uint32_t> fresh_flat;
        bool ambiguous = false;
        for (std::uint32_t o : candidates) {
            std::uint32_t f = space.flat(tx.output(o).address());
            if (history.seen_before(f, tx.id())) continue;
            if (fresh_flat && *fresh_flat != f) ambiguous = true;
            fresh_flat = f;
        }
        if (fresh_flat && !ambiguous) {
            for (std::uint32_t o : candidates) {
                if (space.flat(tx.output(o).address()) == *fresh_flat) fresh_hit[o] = true;
            }
        }
    }

    if (config.change_multisig) {
        AccessStructure in0 = access_structure(view, tx.input(0).address());
        bool uniform = true;
        for (std::uint32_t i = 1, n = tx.input_count(); i < n && uniform; ++i) {
            uniform = access_structure(view, tx.input(i).address()) == in0;
        }
        if (uniform) {
            std::optional<std::uint32_t> match;
            bool ambiguous = false;
            for (std::uint32_t o : candidates) {
                if (access_structure(view, tx.output(o).address()) != in0) continue;
                if (match) ambiguous = true;
                match = o;
            }
            if (match && !ambiguous) multisig_hit[*match] = true;
        }
    }

    for (std::uint32_t o : candidates) {
        if (fresh_hit[o] || multisig_hit[o]) result.push_back({o, fresh_hit[o], multisig_hit[o]});
    }
    return result;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> cluster_edges(const ChainView& view, const HeuristicConfig& config)
{
    AddressSpace space(view.address_counts());
    bool change = config.change_fresh || config.change_multisig;
    AddressHistory history;
    if (change) history = AddressHistory::build(view, space);

    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    for (std::uint32_t id = 0; id < view.tx_count(); ++id) {
        TxView tx = view.tx(id);
        if (tx.is_coinbase()) continue;
        if (config.coinjoin_exclusion && detect_coinjoin(tx)) continue;
        std::uint32_t anchor = space.flat(tx.input(0).address());
        if (config.multi_input) {
            for (std::uint32_t i = 1, n = tx.input_count(); i < n; ++i) {
                std::uint32_t other = space.flat(tx.input(i).address());
                if (other != anchor) edges.emplace_back(anchor, other);
            }
        }
        if (change) {
            for (const auto& c : identify_change_outputs(view, tx, space, history, config)) {
                std::uint32_t out = space.flat(tx.output(c.index).address());
                if (out != anchor) edges.emplace_back(anchor, out);
            }
        }
    }
    return edges;
}

ClusterSet ClusterSet::from_union_find(const AddressSpace& space, UnionFind& uf)
{
    if (uf.size() != space.size()) throw Error(ErrorKind::consistency, "union-find size does not match the address space");
    ClusterSet c;
    c.m_space = space;
    c.m_cluster_of.resize(uf.size());
    std::vector<std::uint32_t> id_of_root(uf.size(), kNone);
    std::uint32_t next = 0;
    for (std::uint32_t a = 0; a < uf.size(); ++a) {
        std::uint32_t r = uf.find(a);
        if (id_of_root[r] == kNone) id_of_root[r] = next++;
        c.m_cluster_of[a] = id_of_root[r];
    }
    c.index_members();
    return c;
}

ClusterSet ClusterSet::from_edges(const AddressSpace& space, std::span<const std::pair<std::uint32_t, std::uint32_t>> edges)
{
    UnionFind uf(space.size());
    for (auto [a, b] : edges) uf.unite(a, b);
    return from_union_find(space, uf);
}

void ClusterSet::index_members()
{
    std::uint32_t clusters = 0;
    for (auto c : m_cluster_of) clusters = std::max(clusters, c + 1);
    m_offsets.assign(std::size_t{clusters} + 1, 0);
    for (auto c : m_cluster_of) ++m_offsets[c + 1];
    for (std::size_t i = 1; i < m_offsets.size(); ++i) m_offsets[i] += m_offsets[i - 1];
    m_members.resize(m_cluster_of.size());
    std::vector<std::uint32_t> cursor(m_offsets.begin(), m_offsets.end() - 1);
    for (std::uint32_t a = 0; a < m_cluster_of.size(); ++a) m_members[cursor[m_cluster_of[a]]++] = a;
    m_tags.clear();
}

std::span<const std::uint32_t> ClusterSet::members(std::uint32_t cluster) const
{
    if (cluster >= cluster_count()) throw Error(ErrorKind::range, "cluster ID out of range");
    return std::span<const std::uint32_t>(m_members).subspan(m_offsets[cluster], m_offsets[cluster + 1] - m_offsets[cluster]);
}

std::optional<std::uint32_t> ClusterSet::largest() const
{
    std::optional<std::uint32_t> best;
    for (std::uint32_t c = 0; c < cluster_count(); ++c) {
        if (!best || cluster_size(c) > cluster_size(*best)) best = c;
    }
    return best;
}

const std::set<std::string>& ClusterSet::tags(std::uint32_t cluster) const
{
    static const std::set<std::string> kEmpty;
    if (cluster >= cluster_count()) throw Error(ErrorKind::range, "cluster ID out of range");
    return cluster < m_tags.size() ? m_tags[cluster] : kEmpty;
}

void ClusterSet::save(const std::filesystem::path& path) const
{
    Bytes out = with_magic();
    out.reserve(out.size() + 4 * kAddressTypeCount + 4 * m_cluster_of.size());
    for (auto c : m_space.counts()) append_le<std::uint32_t>(out, c);
    for (auto c : m_cluster_of) append_le<std::uint32_t>(out, c);
    write_file_atomic(path, out);
}

ClusterSet ClusterSet::load(const std::filesystem::path& path)
{
    Bytes raw = read_file(path);
    auto body = strip_magic(raw, path);
    if (body.size() < 4 * kAddressTypeCount) throw Error(ErrorKind::storage, "truncated cluster file " + path.string());
    AddressCounts counts{};
    for (std::size_t t = 0; t < kAddressTypeCount; ++t) counts[t] = read_le<std::uint32_t>(body.data() + 4 * t);
    ClusterSet c;
    c.m_space = AddressSpace(counts);
    body = body.subspan(4 * kAddressTypeCount);
    if (body.size() != 4 * c.m_space.size()) throw Error(ErrorKind::storage, "cluster file size mismatch " + path.string());
    c.m_cluster_of.resize(c.m_space.size());
    for (std::size_t i = 0; i < c.m_cluster_of.size(); ++i) {
        c.m_cluster_of[i] = read_le<std::uint32_t>(body.data() + 4 * i);
        if (c.m_cluster_of[i] >= c.m_cluster_of.size()) throw Error(ErrorKind::storage, "cluster ID out of range in " + path.string());
    }
    c.index_members();
    return c;
}

ClusterSet build_clusters(const ChainView& view, const HeuristicConfig& config)
{
    AddressSpace space(view.address_counts());
    auto edges = cluster_edges(view, config);
    return ClusterSet::from_edges(space, edges);
}

void propagate_tags(ClusterSet& clusters, const std::map<AddressRef, std::set<std::string>>& seeds)
{
    std::vector<std::set<std::string>> tags(clusters.cluster_count());
    for (const auto& [ref, labels] : seeds) {
        std::uint32_t c = clusters.cluster_of(ref);
        tags[c].insert(labels.begin(), labels.end());
    }
    clusters.set_tags(std::move(tags));
}

std::map<AddressRef, std::set<std::string>> load_tag_seeds(const std::filesystem::path& csv)
{
    std::ifstream in(csv);
    if (!in) throw Error(ErrorKind::storage, "cannot open " + csv.string());
    std::map<AddressRef, std::set<std::string>> seeds;
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view l = trim(line);
        if (l.empty() || l.front() == '#') continue;
        auto comma = l.find(',');
        if (comma == std::string_view::npos) throw ParseError("expected address,label", line_no);
        auto ref = parse_address(trim(l.substr(0, comma)));
        std::string_view label = trim(l.substr(comma + 1));
        if (!ref) {
            // a header row is allowed on the first line
            if (line_no == 1) continue;
            throw ParseError("bad address '" + std::string(l.substr(0, comma)) + "'", line_no);
        }
        if (label.empty()) throw ParseError("empty label", line_no);
        seeds[*ref].insert(std::string(label));
    }
    return seeds;
}

std::map<std::uint32_t, std::uint64_t> cluster_size_histogram(const ClusterSet& clusters)
{
    std::map<std::uint32_t, std::uint64_t> h;
    for (std::uint32_t c = 0; c < clusters.cluster_count(); ++c) ++h[clusters.cluster_size(c)];
    return h;
}

std::string histogram_csv(const std::map<std::uint32_t, std::uint64_t>& histogram)
{
    std::ostringstream out;
    out << "size,count\n";
    for (const auto& [size, count] : histogram) out << size << ',' << count << '\n';
    return out.str();
}

} // namespace chainlens
