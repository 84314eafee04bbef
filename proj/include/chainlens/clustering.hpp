// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <chainlens/chain_view.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace chainlens {

/// Path-halving find, union by size.
class UnionFind {
public:
    explicit UnionFind(std::size_t n = 0);

    std::uint32_t find(std::uint32_t x) noexcept;
    /// True if a and b were in different components.
    bool unite(std::uint32_t a, std::uint32_t b) noexcept;
    std::size_t size() const noexcept { return m_parent.size(); }
    std::size_t components() const noexcept { return m_components; }
    std::uint32_t component_size(std::uint32_t x) noexcept { return m_size[find(x)]; }

private:
    std::vector<std::uint32_t> m_parent;
    std::vector<std::uint32_t> m_size;
    std::size_t m_components = 0;
};

/// Maps (type, id) onto one dense integer range: types in code order.
class AddressSpace {
public:
    AddressSpace() = default;
    explicit AddressSpace(const AddressCounts& counts);

    std::uint64_t size() const noexcept { return m_total; }
    const AddressCounts& counts() const noexcept { return m_counts; }
    std::uint32_t flat(AddressRef ref) const;
    AddressRef ref(std::uint32_t flat) const;

private:
    AddressCounts m_counts{};
    std::array<std::uint64_t, kAddressTypeCount + 1> m_base{};
    std::uint64_t m_total = 0;
};

std::string format_address(AddressRef ref);
/// Accepts "type:id", e.g. "pubkeyhash:17".
std::optional<AddressRef> parse_address(std::string_view text);

/// Thresholds of the CoinJoin rule: >= 2 inputs, >= 3 outputs, and the most
/// frequent output value occurs k >= 2 times with inputs >= k and outputs
/// >= 2k - 1.
bool detect_coinjoin(const TxView& tx);

struct HeuristicConfig {
    bool multi_input = true;
    bool change_fresh = false;
    bool change_multisig = false;
    bool coinjoin_exclusion = true;

    bool operator==(const HeuristicConfig&) const = default;
};

/// "multi_input,change_fresh" style list; "all" and "none" accepted.
HeuristicConfig parse_heuristics(std::string_view list);
std::string format_heuristics(const HeuristicConfig& config);

/// Access structure of an address: its type, plus (m, n) for multisig, and
/// the wrapped structure for a scripthash whose redeem script is known.
struct AccessStructure {
    AddressType type = AddressType::nonstandard;
    std::uint8_t m = 0;
    std::uint8_t n = 0;
    AddressType nested = AddressType::nonstandard;
    bool has_nested = false;

    bool operator==(const AccessStructure&) const = default;
};

AccessStructure access_structure(const ChainView& view, AddressRef ref);

/// First tx ID whose outputs pay each flat address; UINT32_MAX if none.
class AddressHistory {
public:
    static AddressHistory build(const ChainView& view, const AddressSpace& space);

    std::uint32_t first_output_tx(std::uint32_t flat) const noexcept { return m_first[flat]; }
    /// Seen in an output of a tx before tx_id.
    bool seen_before(std::uint32_t flat, std::uint32_t tx_id) const noexcept { return m_first[flat] < tx_id; }

private:
    std::vector<std::uint32_t> m_first;
};

struct ChangeOutput {
    std::uint32_t index = 0;
    bool fresh_heuristic = false;
    bool multisig_heuristic = false;

    bool operator==(const ChangeOutput&) const = default;
};

/// Nulldata outputs are ignored and a tx needs two or more other outputs;
/// coinbases never have change. Conservative: no clear candidate, no result.
std::vector<ChangeOutput> identify_change_outputs(const ChainView& view, const TxView& tx, const AddressSpace& space,
                                                  const AddressHistory& history, const HeuristicConfig& config);

/// Edges (flat address pairs) implied by the enabled heuristics.
std::vector<std::pair<std::uint32_t, std::uint32_t>> cluster_edges(const ChainView& view, const HeuristicConfig& config);

class ClusterSet {
public:
    ClusterSet() = default;
    /// Cluster IDs are numbered in order of each cluster's smallest flat
    /// address, so the result depends only on the partition.
    static ClusterSet from_union_find(const AddressSpace& space, UnionFind& uf);
    static ClusterSet from_edges(const AddressSpace& space, std::span<const std::pair<std::uint32_t, std::uint32_t>> edges);

    const AddressSpace& space() const noexcept { return m_space; }
    std::uint64_t address_count() const noexcept { return m_cluster_of.size(); }
    std::uint32_t cluster_count() const noexcept { return static_cast<std::uint32_t>(m_offsets.empty() ? 0 : m_offsets.size() - 1); }
    std::uint32_t cluster_of_flat(std::uint32_t flat) const { return m_cluster_of.at(flat); }
    std::uint32_t cluster_of(AddressRef ref) const { return cluster_of_flat(m_space.flat(ref)); }
    std::span<const std::uint32_t> members(std::uint32_t cluster) const;
    std::uint32_t cluster_size(std::uint32_t cluster) const { return static_cast<std::uint32_t>(members(cluster).size()); }
    /// The cluster with the most members, lowest ID on ties.
    std::optional<std::uint32_t> largest() const;
    const std::vector<std::uint32_t>& assignment() const noexcept { return m_cluster_of; }

    /// Per-cluster label sets; empty until propagate_tags.
    const std::set<std::string>& tags(std::uint32_t cluster) const;
    void set_tags(std::vector<std::set<std::string>> tags) { m_tags = std::move(tags); }

    void save(const std::filesystem::path& path) const;
    static ClusterSet load(const std::filesystem::path& path);

    bool operator==(const ClusterSet& other) const { return m_cluster_of == other.m_cluster_of; }

private:
    void index_members();

    AddressSpace m_space;
    std::vector<std::uint32_t> m_cluster_of;
    std::vector<std::uint32_t> m_offsets;
    std::vector<std::uint32_t> m_members;
    std::vector<std::set<std::string>> m_tags;
};

ClusterSet build_clusters(const ChainView& view, const HeuristicConfig& config);

/// Each cluster's tags become the union of its members' seed labels.
void propagate_tags(ClusterSet& clusters, const std::map<AddressRef, std::set<std::string>>& seeds);
/// tags.csv: "address,label" lines, address as "type:id".
std::map<AddressRef, std::set<std::string>> load_tag_seeds(const std::filesystem::path& csv);

std::map<std::uint32_t, std::uint64_t> cluster_size_histogram(const ClusterSet& clusters);
std::string histogram_csv(const std::map<std::uint32_t, std::uint64_t>& histogram);

} // namespace chainlens
