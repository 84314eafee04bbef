// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <chainlens/chain_view.hpp>
#include <chainlens/clustering.hpp>
#include <chainlens/importer.hpp>
#include <chainlens/map_reduce.hpp>
#include <chainlens/mempool.hpp>

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace chainlens {

// ---------------------------------------------------------------------------
// Multisig leaks

struct MonthlyPoint {
    std::string month; // YYYY-MM
    std::uint64_t count = 0;
    std::uint64_t value = 0;

    bool operator==(const MonthlyPoint&) const = default;
};

/// Multisig (m, key IDs) behind an address: the address itself or the
/// redeem script of a scripthash. nullopt for anything else.
std::optional<MultisigPayload> multisig_behind(const ChainView& view, AddressRef ref);

/// 1-in-1-out txs between multisig addresses whose key sets overlap but differ.
bool is_access_structure_change(const ChainView& view, const TxView& tx);
/// All inputs multisig with one (m, n); a single non-multisig output whose
/// spender pays some multisig address.
bool is_multisig_insecure_churn(const ChainView& view, const TxView& tx);

/// Flagged tx IDs, ascending.
std::vector<std::uint32_t> multisig_access_change_txs(const ChainView& view, MapReduceOptions opt = {});
std::vector<std::uint32_t> multisig_insecurity_txs(const ChainView& view, MapReduceOptions opt = {});

/// Monthly count and total output value of the flagged txs.
std::vector<MonthlyPoint> multisig_access_change_scan(const ChainView& view, MapReduceOptions opt = {});
std::vector<MonthlyPoint> multisig_insecurity_scan(const ChainView& view, MapReduceOptions opt = {});
std::vector<MonthlyPoint> monthly_totals(const ChainView& view, std::span<const std::uint32_t> tx_ids);

// ---------------------------------------------------------------------------
// PrivateSend

inline constexpr std::array<std::uint64_t, 4> kPsDenominations = {1'000'010, 10'000'100, 100'001'000, 1'000'010'000};

bool is_ps_denomination(std::uint64_t value) noexcept;

struct WalletCoin {
    Hash256 tx_hash{};
    std::uint32_t index = 0;
    std::uint64_t value = 0;

    bool operator==(const WalletCoin&) const = default;
};

/// Unspent denominated outputs, grouped by the mix tx that created them.
class DenominatedWallet {
public:
    /// Throws a consistency error for a value that is not a denomination or
    /// a repeated outpoint.
    void add(const WalletCoin& coin);

    /// Owned outputs of each tx, by output index.
    const std::map<Hash256, std::vector<WalletCoin>>& by_tx() const noexcept { return m_by_tx; }
    std::size_t size() const noexcept { return m_size; }
    std::uint64_t total() const noexcept { return m_total; }

private:
    std::map<Hash256, std::vector<WalletCoin>> m_by_tx;
    std::size_t m_size = 0;
    std::uint64_t m_total = 0;
};

/// Wallet input selection for a PrivateSend of exactly send_amount. Txs are
/// visited by (smallest owned denomination, tx hash); nullopt means
/// insufficient funds.
std::optional<std::vector<WalletCoin>> select_ps_inputs(const DenominatedWallet& wallet, std::uint64_t send_amount);

/// Candidate pre-mix clusters of each mixed output.
using MixGraph = std::map<std::uint64_t, std::set<std::uint32_t>>;

/// Intersection of the inputs' candidate sets. A singleton names the
/// spender. Range error for an input missing from the graph.
std::set<std::uint32_t> cluster_intersection_attack(std::span<const std::uint64_t> input_coins, const MixGraph& graph);

struct MixSimParams {
    std::uint32_t wallets = 100;
    std::uint32_t participants = 3;
    CountRange coins_per_participant{5, 9};
    std::uint32_t rounds = 2;
    std::uint32_t trials = 1000;
    std::uint32_t max_inputs = 40;
    std::uint64_t seed = 1;
};

struct AttackPoint {
    std::uint32_t inputs = 0;
    double success_rate = 0;
    double mean_candidates = 0;
};

/// Monte-Carlo run of the attack. Each trial mixes max_inputs coins of one
/// wallet and attacks every prefix, so one trial feeds every input count.
std::vector<AttackPoint> simulate_intersection_attack(const MixSimParams& params);

// ---------------------------------------------------------------------------
// Block space

struct BlockGap {
    std::uint32_t height = 0;
    double seconds = 0;
};

/// Block time minus the latest corrected first-seen time among its txs.
/// Blocks without a seen tx, or rejected by the filter, are skipped.
std::vector<BlockGap> block_update_gap(const ChainView& view, const MempoolLog& log,
                                       const std::function<bool(std::uint32_t height)>& filter = {});
/// One bucket per whole second (floor).
std::map<std::int64_t, std::uint64_t> gap_histogram(std::span<const BlockGap> gaps);

/// One-sample Kolmogorov-Smirnov test against U[lo, hi]; returns the p-value.
double ks_uniform_pvalue(std::vector<double> samples, double lo, double hi);

struct TraceTx {
    std::int64_t arrival_millis = 0;
    std::uint64_t fee = 0;
    std::uint32_t size = 1;
};

struct FeeTrace {
    std::vector<TraceTx> txs;
    std::vector<std::int64_t> block_millis;
    std::uint64_t block_size = 1'000'000;
};

/// Seen txs with their fee and size, plus block times, from a parsed chain.
FeeTrace fee_trace_from_chain(const ChainView& view, const MempoolLog& log, std::uint64_t block_size = 1'000'000);

struct FeeLossOptions {
    std::uint32_t bootstrap = 1000;
    double confidence = 0.95;
    std::uint64_t seed = 1;
};

struct FeeLoss {
    double interval = 0;
    double loss = 0;
    double ci_low = 0;
    double ci_high = 0;
    std::uint64_t blocks = 0;
};

/// Replays the trace. At each block the miner's template is between 0 and
/// `interval` seconds old (a per-block uniform draw shared by all intervals);
/// loss is 1 - stale/fresh template fees, averaged over blocks with a
/// percentile bootstrap interval.
FeeLoss fee_loss_estimate(const FeeTrace& trace, double interval, const FeeLossOptions& options = {});

struct SnapshotTx {
    std::uint32_t id = 0; // caller's identifier, e.g. a tx ID
    std::uint64_t fee = 0;
    std::uint32_t size = 1;
    /// Indexes into the snapshot.
    std::vector<std::uint32_t> parents;

    double feerate() const noexcept { return static_cast<double>(fee) / size; }
};

struct MempoolSnapshot {
    std::vector<SnapshotTx> txs;

    /// Structure error for a bad parent index, a zero size or a cycle.
    void validate() const;
};

struct GreedyBlock {
    /// Snapshot indexes in inclusion order; each package is parents first.
    std::vector<std::uint32_t> txs;
    std::vector<std::vector<std::uint32_t>> packages;
    std::uint64_t fees = 0;
    std::uint64_t size = 0;
    /// Lowest package feerate taken; 0 when the block is empty.
    double min_feerate = 0;

    bool contains(std::uint32_t index) const;
};

/// Repeatedly takes the ancestor package with the best feerate that still
/// fits, lowest index on ties.
GreedyBlock build_greedy_block(const MempoolSnapshot& snapshot, std::uint64_t size_limit);

inline constexpr double kHighPriority = 57'600'000.0;
inline constexpr double kSuspiciousMargin = 5.0;

struct BlockTxInfo {
    std::optional<std::uint32_t> snapshot_index;
    std::uint64_t fee = 0;
    std::uint32_t size = 1;
    std::uint32_t inputs = 0;
    std::uint32_t outputs = 0;
    double priority = 0;
    bool seen = false;
};

enum class LowFeeCategory { high_priority, zero_fee_unseen, sweep, unexplained };
std::string_view category_name(LowFeeCategory c) noexcept;

struct LowFeeVerdict {
    std::size_t position = 0; // index into the block's tx list
    double feerate = 0;
    std::set<LowFeeCategory> categories;
};

/// Suspicious txs of an actual block, with their (non-exclusive) categories.
std::vector<LowFeeVerdict> classify_low_fee(std::span<const BlockTxInfo> block, const GreedyBlock& greedy);

/// Sum of input value times input age in blocks, over size.
double tx_priority(const ChainView& view, std::uint32_t tx_id);

/// Txs of blocks >= height seen before the block's time, with parent links
/// between them. ids are tx IDs.
MempoolSnapshot snapshot_at_block(const ChainView& view, const MempoolLog& log, std::uint32_t height);
std::vector<BlockTxInfo> block_tx_info(const ChainView& view, const MempoolLog& log, std::uint32_t height,
                                       const MempoolSnapshot& snapshot);

// ---------------------------------------------------------------------------
// Velocity

struct VelocityParams {
    std::int64_t window_seconds = 30 * 86400;
    std::uint32_t k = 4;
    /// Matches through these clusters do not count as self-churn.
    std::set<std::uint32_t> excluded_clusters;
};

struct VelocityPoint {
    std::int64_t window_start = 0;
    std::uint64_t naive_value = 0;
    std::uint64_t refined_value = 0;
    std::uint64_t supply = 0;
    double naive = 0;
    double refined = 0;
};

/// Output value moved per window over the money supply (cumulative coinbase
/// subsidy at window end). Windows are aligned to multiples of the window
/// length since the epoch.
std::vector<VelocityPoint> velocity(const ChainView& view, const ClusterSet& clusters, const VelocityParams& params,
                                    MapReduceOptions opt = {});

/// Output value counted by the refined measure for one tx.
std::uint64_t refined_tx_value(const ChainView& view, const ClusterSet& clusters, const VelocityParams& params,
                               std::uint32_t tx_id);

inline constexpr std::int64_t kDormancySeconds = 30 * 86400;

struct DormancyPoint {
    std::int64_t day = 0; // days since the epoch
    std::uint64_t utxo_value = 0;
    std::uint64_t dormant_value = 0;
    double fraction = 0;
};

/// For each day, the value-weighted share of the end-of-day UTXO set that
/// is at least 30 days old.
std::vector<DormancyPoint> dormancy_fraction(const ChainView& view);

// ---------------------------------------------------------------------------
// CSV

std::string to_csv(std::span<const MonthlyPoint> series);
std::string to_csv(std::span<const AttackPoint> series);
std::string to_csv(std::span<const BlockGap> gaps);
std::string to_csv(const std::map<std::int64_t, std::uint64_t>& histogram);
std::string to_csv(std::span<const FeeLoss> series);
std::string to_csv(std::span<const VelocityPoint> series);
std::string to_csv(std::span<const DormancyPoint> series);

} // namespace chainlens
