// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/analyses.hpp>
#include <chainlens/errors.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <unordered_map>

namespace chainlens {

namespace {

constexpr std::int64_t kDay = 86400;

std::int64_t floor_div(std::int64_t a, std::int64_t b) noexcept
{
    std::int64_t q = a / b;
    return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

using Ids = std::vector<std::uint32_t>;

Ids concat(Ids a, Ids b)
{
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

template <typename Pred>
Ids flag_txs(const ChainView& view, MapReduceOptions opt, Pred pred)
{
    std::uint32_t end = detail::range_end(opt, view.tx_count());
    return detail::run_chunks<Ids>(
        opt.first, end, opt,
        [&](std::uint32_t lo, std::uint32_t hi) {
            Ids out;
            for (std::uint32_t id = lo; id < hi; ++id) {
                if (pred(view.tx(id))) out.push_back(id);
            }
            return out;
        },
        concat, Ids{});
}

std::vector<std::uint32_t> sorted_keys(const MultisigPayload& p)
{
    std::vector<std::uint32_t> k = p.key_ids;
    std::sort(k.begin(), k.end());
    k.erase(std::unique(k.begin(), k.end()), k.end());
    return k;
}

} // namespace

// ---------------------------------------------------------------------------
// Multisig leaks

std::optional<MultisigPayload> multisig_behind(const ChainView& view, AddressRef ref)
{
    if (ref.type == AddressType::multisig) return std::get<MultisigPayload>(view.script_payload(ref).data);
    if (ref.type == AddressType::scripthash) {
        auto p = std::get<ScriptHashPayload>(view.script_payload(ref).data);
        if (p.nested && p.nested->type == AddressType::multisig) {
            return std::get<MultisigPayload>(view.script_payload(*p.nested).data);
        }
    }
    return std::nullopt;
}

bool is_access_structure_change(const ChainView& view, const TxView& tx)
{
    if (tx.input_count() != 1 || tx.output_count() != 1) return false;
    auto in = multisig_behind(view, tx.input(0).address());
    if (!in) return false;
    auto out = multisig_behind(view, tx.output(0).address());
    if (!out) return false;
    auto a = sorted_keys(*in);
    auto b = sorted_keys(*out);
    if (a == b) return false;
    std::vector<std::uint32_t> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    return !common.empty();
}

bool is_multisig_insecure_churn(const ChainView& view, const TxView& tx)
{
    if (tx.is_coinbase() || tx.output_count() != 1) return false;
    std::optional<std::pair<std::uint8_t, std::size_t>> shape;
    for (std::uint32_t i = 0, n = tx.input_count(); i < n; ++i) {
        auto ms = multisig_behind(view, tx.input(i).address());
        if (!ms) return false;
        std::pair<std::uint8_t, std::size_t> s{ms->required, ms->total()};
        if (shape && *shape != s) return false;
        shape = s;
    }
    InOutRecord out = tx.output(0);
    if (out.address_type == AddressType::nulldata || multisig_behind(view, out.address())) return false;
    auto spender = view.spending_tx(tx.id(), 0);
    if (!spender) return false;
    TxView next = view.tx(*spender);
    for (std::uint32_t o = 0, n = next.output_count(); o < n; ++o) {
        if (multisig_behind(view, next.output(o).address())) return true;
    }
    return false;
}

std::vector<std::uint32_t> multisig_access_change_txs(const ChainView& view, MapReduceOptions opt)
{
    return flag_txs(view, opt, [&](const TxView& tx) { return is_access_structure_change(view, tx); });
}

std::vector<std::uint32_t> multisig_insecurity_txs(const ChainView& view, MapReduceOptions opt)
{
    return flag_txs(view, opt, [&](const TxView& tx) { return is_multisig_insecure_churn(view, tx); });
}

std::vector<MonthlyPoint> monthly_totals(const ChainView& view, std::span<const std::uint32_t> tx_ids)
{
    std::map<std::string, MonthlyPoint> months;
    for (auto id : tx_ids) {
        std::string m = format_month(view.block(view.height_of(id)).timestamp);
        auto& p = months[m];
        p.month = m;
        ++p.count;
        p.value += view.tx(id).total_out();
    }
    std::vector<MonthlyPoint> out;
    for (auto& [_, p] : months) out.push_back(p);
    return out;
}

std::vector<MonthlyPoint> multisig_access_change_scan(const ChainView& view, MapReduceOptions opt)
{
    return monthly_totals(view, multisig_access_change_txs(view, opt));
}

std::vector<MonthlyPoint> multisig_insecurity_scan(const ChainView& view, MapReduceOptions opt)
{
    return monthly_totals(view, multisig_insecurity_txs(view, opt));
}

// ---------------------------------------------------------------------------
// PrivateSend

bool is_ps_denomination(std::uint64_t value) noexcept
{
    return std::find(kPsDenominations.begin(), kPsDenominations.end(), value) != kPsDenominations.end();
}

void DenominatedWallet::add(const WalletCoin& coin)
{
    if (!is_ps_denomination(coin.value)) {
        throw Error(ErrorKind::consistency, std::to_string(coin.value) + " is not a mixing denomination");
    }
    auto& outs = m_by_tx[coin.tx_hash];
    auto at = std::lower_bound(outs.begin(), outs.end(), coin.index,
                               [](const WalletCoin& c, std::uint32_t i) { return c.index < i; });
    if (at != outs.end() && at->index == coin.index) throw Error(ErrorKind::consistency, "coin added twice");
    outs.insert(at, coin);
    ++m_size;
    m_total += coin.value;
}

std::optional<std::vector<WalletCoin>> select_ps_inputs(const DenominatedWallet& wallet, std::uint64_t send_amount)
{
    std::vector<WalletCoin> selected;
    if (send_amount == 0) return selected;

    struct Group {
        std::uint64_t denomination;
        const Hash256* hash;
        const std::vector<WalletCoin>* coins;
    };
    std::vector<Group> groups;
    for (const auto& [hash, coins] : wallet.by_tx()) {
        std::uint64_t d = std::min_element(coins.begin(), coins.end(), [](const auto& a, const auto& b) {
                              return a.value < b.value;
                          })->value;
        groups.push_back({d, &hash, &coins});
    }
    std::sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
        return a.denomination != b.denomination ? a.denomination < b.denomination : *a.hash < *b.hash;
    });

    std::uint64_t value = 0;
    for (const auto& g : groups) {
        for (const auto& coin : *g.coins) {
            if (value + coin.value > send_amount) break;
            selected.push_back(coin);
            value += coin.value;
            if (value == send_amount) return selected;
        }
    }
    return std::nullopt;
}

std::set<std::uint32_t> cluster_intersection_attack(std::span<const std::uint64_t> input_coins, const MixGraph& graph)
{
    std::set<std::uint32_t> acc;
    bool first = true;
    for (auto coin : input_coins) {
        auto it = graph.find(coin);
        if (it == graph.end()) throw Error(ErrorKind::range, "coin " + std::to_string(coin) + " is not in the mix graph");
        if (first) {
            acc = it->second;
            first = false;
            continue;
        }
        std::set<std::uint32_t> next;
        std::set_intersection(acc.begin(), acc.end(), it->second.begin(), it->second.end(),
                              std::inserter(next, next.end()));
        acc = std::move(next);
    }
    return acc;
}

namespace {

class MixSimulator {
public:
    explicit MixSimulator(const MixSimParams& p) : m_p(p), m_rng(p.seed) {}

    /// Marks every wallet that could have funded a coin owned by `owner`
    /// after `round` mixes.
    void trace(std::uint32_t owner, std::uint32_t round, std::vector<std::uint8_t>& mark)
    {
        if (round == 0) {
            mark[owner] = 1;
            return;
        }
        std::vector<std::uint32_t> mix{owner};
        while (mix.size() < m_p.participants) {
            auto w = static_cast<std::uint32_t>(m_rng.below(m_p.wallets));
            if (std::find(mix.begin(), mix.end(), w) == mix.end()) mix.push_back(w);
        }
        for (auto p : mix) {
            std::uint32_t coins = m_rng.in_range(m_p.coins_per_participant);
            for (std::uint32_t c = 0; c < coins; ++c) trace(p, round - 1, mark);
        }
    }

    DeterministicRng& rng() { return m_rng; }

private:
    const MixSimParams& m_p;
    DeterministicRng m_rng;
};

} // namespace

std::vector<AttackPoint> simulate_intersection_attack(const MixSimParams& params)
{
    if (params.participants < 1 || params.wallets < params.participants) {
        throw Error(ErrorKind::range, "mix simulation needs at least as many wallets as participants");
    }
    if (params.coins_per_participant.min < 1 || params.coins_per_participant.min > params.coins_per_participant.max) {
        throw Error(ErrorKind::range, "bad coins-per-participant range");
    }
    if (params.trials == 0 || params.max_inputs == 0) throw Error(ErrorKind::range, "trials and max_inputs must be positive");

    std::vector<std::uint64_t> successes(params.max_inputs, 0);
    std::vector<std::uint64_t> candidates(params.max_inputs, 0);
    MixSimulator sim(params);
    std::vector<std::uint8_t> alive(params.wallets), mark(params.wallets);
    for (std::uint32_t t = 0; t < params.trials; ++t) {
        auto target = static_cast<std::uint32_t>(sim.rng().below(params.wallets));
        std::fill(alive.begin(), alive.end(), 1);
        for (std::uint32_t n = 0; n < params.max_inputs; ++n) {
            std::fill(mark.begin(), mark.end(), 0);
            sim.trace(target, params.rounds, mark);
            std::uint64_t left = 0;
            for (std::uint32_t w = 0; w < params.wallets; ++w) {
                alive[w] &= mark[w];
                left += alive[w];
            }
            candidates[n] += left;
            if (left == 1) ++successes[n];
        }
    }
    std::vector<AttackPoint> out;
    for (std::uint32_t n = 0; n < params.max_inputs; ++n) {
        out.push_back({n + 1, static_cast<double>(successes[n]) / params.trials,
                       static_cast<double>(candidates[n]) / params.trials});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Block space

std::vector<BlockGap> block_update_gap(const ChainView& view, const MempoolLog& log,
                                       const std::function<bool(std::uint32_t)>& filter)
{
    std::vector<BlockGap> out;
    for (std::uint32_t h = 0; h < view.block_count(); ++h) {
        if (filter && !filter(h)) continue;
        auto [lo, hi] = view.block_txs(h);
        std::optional<std::int64_t> latest;
        for (std::uint32_t id = lo; id < hi; ++id) {
            auto seen = log.first_seen_millis(id);
            if (seen && (!latest || *seen > *latest)) latest = seen;
        }
        if (!latest) continue;
        double gap = static_cast<double>(view.block(h).timestamp) -
                     (static_cast<double>(*latest) / 1000.0 + log.lag_correction());
        out.push_back({h, gap});
    }
    return out;
}

std::map<std::int64_t, std::uint64_t> gap_histogram(std::span<const BlockGap> gaps)
{
    std::map<std::int64_t, std::uint64_t> h;
    for (const auto& g : gaps) ++h[static_cast<std::int64_t>(std::floor(g.seconds))];
    return h;
}

double ks_uniform_pvalue(std::vector<double> samples, double lo, double hi)
{
    if (samples.empty()) throw Error(ErrorKind::range, "KS test needs at least one sample");
    if (!(hi > lo)) throw Error(ErrorKind::range, "KS test needs hi > lo");
    std::sort(samples.begin(), samples.end());
    double n = static_cast<double>(samples.size());
    double d = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        double f = std::clamp((samples[i] - lo) / (hi - lo), 0.0, 1.0);
        d = std::max({d, (i + 1) / n - f, f - i / n});
    }
    double en = std::sqrt(n);
    double lambda = (en + 0.12 + 0.11 / en) * d;
    // Kolmogorov tail series
    double sum = 0, sign = 2, prev = 0;
    for (int j = 1; j <= 100; ++j) {
        double term = sign * std::exp(-2.0 * j * j * lambda * lambda);
        sum += term;
        if (std::fabs(term) <= 0.001 * prev || std::fabs(term) <= 1e-8 * sum) return std::clamp(sum, 0.0, 1.0);
        prev = std::fabs(term);
        sign = -sign;
    }
    return 1.0;
}

FeeTrace fee_trace_from_chain(const ChainView& view, const MempoolLog& log, std::uint64_t block_size)
{
    FeeTrace trace;
    trace.block_size = block_size;
    for (std::uint32_t h = 0; h < view.block_count(); ++h) trace.block_millis.push_back(view.block(h).timestamp * 1000);
    auto correction = static_cast<std::int64_t>(std::llround(log.lag_correction() * 1000.0));
    for (std::uint32_t id = 0; id < view.tx_count(); ++id) {
        auto seen = log.first_seen_millis(id);
        if (!seen) continue;
        TxView tx = view.tx(id);
        if (tx.is_coinbase()) continue;
        trace.txs.push_back({*seen + correction, tx.fee(), std::max<std::uint32_t>(1, tx.size())});
    }
    std::stable_sort(trace.txs.begin(), trace.txs.end(),
                     [](const TraceTx& a, const TraceTx& b) { return a.arrival_millis < b.arrival_millis; });
    return trace;
}

FeeLoss fee_loss_estimate(const FeeTrace& trace, double interval, const FeeLossOptions& options)
{
    if (!(interval >= 0)) throw Error(ErrorKind::range, "interval must be >= 0");
    if (trace.block_size == 0) throw Error(ErrorKind::range, "block size must be positive");
    if (!(options.confidence > 0 && options.confidence < 1)) throw Error(ErrorKind::range, "confidence must be in (0,1)");
    for (const auto& t : trace.txs) {
        if (t.size == 0) throw Error(ErrorKind::range, "trace tx with zero size");
    }

    std::vector<std::uint32_t> order(trace.txs.size());
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        return trace.txs[a].arrival_millis < trace.txs[b].arrival_millis;
    });
    std::vector<std::int64_t> blocks = trace.block_millis;
    std::sort(blocks.begin(), blocks.end());

    // feerate descending, index ascending; fees compared exactly
    auto better = [&](std::uint32_t a, std::uint32_t b) {
        const auto& x = trace.txs[a];
        const auto& y = trace.txs[b];
        unsigned __int128 l = static_cast<unsigned __int128>(x.fee) * y.size;
        unsigned __int128 r = static_cast<unsigned __int128>(y.fee) * x.size;
        return l != r ? l > r : a < b;
    };

    DeterministicRng rng(options.seed);
    std::vector<std::uint32_t> pool;
    std::vector<double> losses;
    std::size_t next = 0;
    for (std::int64_t b : blocks) {
        double u = rng.unit();
        while (next < order.size() && trace.txs[order[next]].arrival_millis <= b) pool.push_back(order[next++]);
        std::sort(pool.begin(), pool.end(), better);
        double cutoff = static_cast<double>(b) - u * interval * 1000.0;

        double fresh = 0, stale = 0;
        std::uint64_t room = trace.block_size;
        std::vector<std::uint8_t> mined(pool.size(), 0);
        for (std::size_t i = 0; i < pool.size() && room > 0; ++i) {
            const auto& t = trace.txs[pool[i]];
            if (t.size <= room) {
                fresh += static_cast<double>(t.fee);
                room -= t.size;
                mined[i] = 1;
            } else {
                fresh += static_cast<double>(t.fee) * room / t.size;
                room = 0;
            }
        }
        room = trace.block_size;
        for (std::size_t i = 0; i < pool.size() && room > 0; ++i) {
            const auto& t = trace.txs[pool[i]];
            if (static_cast<double>(t.arrival_millis) > cutoff) continue;
            if (t.size <= room) {
                stale += static_cast<double>(t.fee);
                room -= t.size;
            } else {
                stale += static_cast<double>(t.fee) * room / t.size;
                room = 0;
            }
        }
        if (fresh > 0) losses.push_back(1.0 - std::min(stale, fresh) / fresh);

        std::size_t keep = 0;
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (!mined[i]) pool[keep++] = pool[i];
        }
        pool.resize(keep);
    }

    FeeLoss r;
    r.interval = interval;
    r.blocks = losses.size();
    if (losses.empty()) return r;
    double n = static_cast<double>(losses.size());
    r.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / n;
    r.ci_low = r.ci_high = r.loss;
    if (options.bootstrap > 0) {
        DeterministicRng boot(options.seed ^ 0x9E3779B97F4A7C15ull);
        std::vector<double> means(options.bootstrap);
        for (auto& m : means) {
            double s = 0;
            for (std::size_t i = 0; i < losses.size(); ++i) s += losses[boot.below(losses.size())];
            m = s / n;
        }
        std::sort(means.begin(), means.end());
        double tail = (1.0 - options.confidence) / 2.0;
        auto at = [&](double q) {
            auto i = static_cast<std::size_t>(std::floor(q * (means.size() - 1) + 0.5));
            return means[std::min(i, means.size() - 1)];
        };
        r.ci_low = at(tail);
        r.ci_high = at(1.0 - tail);
    }
    return r;
}

void MempoolSnapshot::validate() const
{
    std::vector<std::uint8_t> state(txs.size(), 0); // 0 new, 1 on stack, 2 done
    for (std::size_t i = 0; i < txs.size(); ++i) {
        if (txs[i].size == 0) throw Error(ErrorKind::structure, "snapshot tx with zero size");
        for (auto p : txs[i].parents) {
            if (p >= txs.size() || p == i) throw Error(ErrorKind::structure, "bad parent link in snapshot");
        }
    }
    for (std::size_t root = 0; root < txs.size(); ++root) {
        if (state[root]) continue;
        std::vector<std::pair<std::uint32_t, std::size_t>> stack{{static_cast<std::uint32_t>(root), 0}};
        state[root] = 1;
        while (!stack.empty()) {
            auto& [node, child] = stack.back();
            if (child == txs[node].parents.size()) {
                state[node] = 2;
                stack.pop_back();
                continue;
            }
            std::uint32_t p = txs[node].parents[child++];
            if (state[p] == 1) throw Error(ErrorKind::structure, "cycle in snapshot parent links");
            if (state[p] == 0) {
                state[p] = 1;
                stack.push_back({p, 0});
            }
        }
    }
}

bool GreedyBlock::contains(std::uint32_t index) const
{
    return std::find(txs.begin(), txs.end(), index) != txs.end();
}

GreedyBlock build_greedy_block(const MempoolSnapshot& snapshot, std::uint64_t size_limit)
{
    snapshot.validate();
    const auto& txs = snapshot.txs;
    std::vector<std::uint8_t> taken(txs.size(), 0);
    std::vector<std::uint32_t> seen_at(txs.size(), std::numeric_limits<std::uint32_t>::max());

    // unselected ancestors of i plus i, parents before children
    std::uint32_t epoch = 0;
    auto package = [&](std::uint32_t i) {
        ++epoch;
        std::vector<std::uint32_t> out;
        std::vector<std::pair<std::uint32_t, std::size_t>> stack{{i, 0}};
        seen_at[i] = epoch;
        while (!stack.empty()) {
            auto& [node, child] = stack.back();
            if (child == txs[node].parents.size()) {
                out.push_back(node);
                stack.pop_back();
                continue;
            }
            std::uint32_t p = txs[node].parents[child++];
            if (taken[p] || seen_at[p] == epoch) continue;
            seen_at[p] = epoch;
            stack.push_back({p, 0});
        }
        return out;
    };

    GreedyBlock block;
    std::uint64_t room = size_limit;
    for (;;) {
        std::optional<std::uint32_t> best;
        std::uint64_t best_fee = 0, best_size = 1;
        std::vector<std::uint32_t> best_pkg;
        for (std::uint32_t i = 0; i < txs.size(); ++i) {
            if (taken[i]) continue;
            auto pkg = package(i);
            std::uint64_t fee = 0, size = 0;
            for (auto j : pkg) {
                fee += txs[j].fee;
                size += txs[j].size;
            }
            if (size > room) continue;
            if (!best || static_cast<unsigned __int128>(fee) * best_size > static_cast<unsigned __int128>(best_fee) * size) {
                best = i;
                best_fee = fee;
                best_size = size;
                best_pkg = std::move(pkg);
            }
        }
        if (!best) break;
        for (auto j : best_pkg) {
            taken[j] = 1;
            block.txs.push_back(j);
        }
        double rate = static_cast<double>(best_fee) / static_cast<double>(best_size);
        block.min_feerate = block.packages.empty() ? rate : std::min(block.min_feerate, rate);
        block.packages.push_back(std::move(best_pkg));
        block.fees += best_fee;
        block.size += best_size;
        room -= best_size;
    }
    return block;
}

std::string_view category_name(LowFeeCategory c) noexcept
{
    switch (c) {
    case LowFeeCategory::high_priority: return "high_priority";
    case LowFeeCategory::zero_fee_unseen: return "zero_fee_unseen";
    case LowFeeCategory::sweep: return "sweep";
    case LowFeeCategory::unexplained: return "unexplained";
    }
    return "?";
}

std::vector<LowFeeVerdict> classify_low_fee(std::span<const BlockTxInfo> block, const GreedyBlock& greedy)
{
    std::vector<std::uint32_t> chosen = greedy.txs;
    std::sort(chosen.begin(), chosen.end());
    double threshold = greedy.min_feerate - kSuspiciousMargin;

    std::vector<LowFeeVerdict> out;
    for (std::size_t i = 0; i < block.size(); ++i) {
        const auto& tx = block[i];
        if (tx.size == 0) throw Error(ErrorKind::range, "block tx with zero size");
        double rate = static_cast<double>(tx.fee) / tx.size;
        if (greedy.txs.empty() || rate > threshold) continue;
        if (tx.snapshot_index && std::binary_search(chosen.begin(), chosen.end(), *tx.snapshot_index)) continue;
        LowFeeVerdict v{i, rate, {}};
        if (tx.priority >= kHighPriority) v.categories.insert(LowFeeCategory::high_priority);
        if (tx.fee == 0 && !tx.seen) v.categories.insert(LowFeeCategory::zero_fee_unseen);
        if (tx.inputs > 10 && tx.outputs == 1) v.categories.insert(LowFeeCategory::sweep);
        if (v.categories.empty()) v.categories.insert(LowFeeCategory::unexplained);
        out.push_back(std::move(v));
    }
    return out;
}

double tx_priority(const ChainView& view, std::uint32_t tx_id)
{
    TxView tx = view.tx(tx_id);
    if (tx.is_coinbase() || tx.size() == 0) return 0;
    std::uint32_t h = view.height_of(tx_id);
    long double sum = 0;
    for (std::uint32_t i = 0, n = tx.input_count(); i < n; ++i) {
        InOutRecord in = tx.input(i);
        std::uint32_t age = h - view.height_of(in.linked_tx_id);
        sum += static_cast<long double>(in.value) * age;
    }
    return static_cast<double>(sum / tx.size());
}

MempoolSnapshot snapshot_at_block(const ChainView& view, const MempoolLog& log, std::uint32_t height)
{
    std::int64_t cutoff = view.block(height).timestamp * 1000 -
                          static_cast<std::int64_t>(std::llround(log.lag_correction() * 1000.0));
    MempoolSnapshot snap;
    std::unordered_map<std::uint32_t, std::uint32_t> index;
    for (std::uint32_t id = view.block_txs(height).first; id < view.tx_count(); ++id) {
        auto seen = log.first_seen_millis(id);
        if (!seen || *seen > cutoff) continue;
        TxView tx = view.tx(id);
        if (tx.is_coinbase()) continue;
        SnapshotTx s;
        s.id = id;
        s.fee = tx.fee();
        s.size = std::max<std::uint32_t>(1, tx.size());
        for (std::uint32_t i = 0, n = tx.input_count(); i < n; ++i) {
            auto it = index.find(tx.input(i).linked_tx_id);
            if (it != index.end() && std::find(s.parents.begin(), s.parents.end(), it->second) == s.parents.end()) {
                s.parents.push_back(it->second);
            }
        }
        index.emplace(id, static_cast<std::uint32_t>(snap.txs.size()));
        snap.txs.push_back(std::move(s));
    }
    return snap;
}

std::vector<BlockTxInfo> block_tx_info(const ChainView& view, const MempoolLog& log, std::uint32_t height,
                                       const MempoolSnapshot& snapshot)
{
    std::unordered_map<std::uint32_t, std::uint32_t> index;
    for (std::uint32_t i = 0; i < snapshot.txs.size(); ++i) index.emplace(snapshot.txs[i].id, i);
    std::vector<BlockTxInfo> out;
    auto [lo, hi] = view.block_txs(height);
    for (std::uint32_t id = lo; id < hi; ++id) {
        TxView tx = view.tx(id);
        if (tx.is_coinbase()) continue;
        BlockTxInfo info;
        if (auto it = index.find(id); it != index.end()) info.snapshot_index = it->second;
        info.fee = tx.fee();
        info.size = std::max<std::uint32_t>(1, tx.size());
        info.inputs = tx.input_count();
        info.outputs = tx.output_count();
        info.priority = tx_priority(view, id);
        info.seen = log.first_seen_millis(id).has_value();
        out.push_back(info);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Velocity

std::uint64_t refined_tx_value(const ChainView& view, const ClusterSet& clusters, const VelocityParams& params,
                               std::uint32_t tx_id)
{
    TxView tx = view.tx(tx_id);
    if (tx.is_coinbase()) return 0;
    std::vector<std::uint32_t> inputs;
    for (std::uint32_t i = 0, n = tx.input_count(); i < n; ++i) {
        std::uint32_t c = clusters.cluster_of(tx.input(i).address());
        if (!params.excluded_clusters.count(c)) inputs.push_back(c);
    }
    std::sort(inputs.begin(), inputs.end());
    std::uint32_t h = view.height_of(tx_id);
    std::uint64_t sum = 0;
    for (std::uint32_t o = 0, n = tx.output_count(); o < n; ++o) {
        InOutRecord out = tx.output(o);
        if (std::binary_search(inputs.begin(), inputs.end(), clusters.cluster_of(out.address()))) continue;
        if (out.linked_tx_id != kUnspent && view.height_of(out.linked_tx_id) - h < params.k) continue;
        sum += out.value;
    }
    return sum;
}

std::vector<VelocityPoint> velocity(const ChainView& view, const ClusterSet& clusters, const VelocityParams& params,
                                    MapReduceOptions opt)
{
    if (params.k < 1) throw Error(ErrorKind::range, "k must be at least 1");
    if (params.window_seconds <= 0) throw Error(ErrorKind::range, "window must be positive");
    if (view.block_count() == 0) return {};
    std::int64_t w = params.window_seconds;

    struct Acc {
        std::uint64_t naive = 0;
        std::uint64_t refined = 0;
        std::uint64_t subsidy = 0;
    };
    using Buckets = std::map<std::int64_t, Acc>;
    auto merge = [](Buckets a, Buckets b) {
        for (auto& [k, v] : b) {
            auto& t = a[k];
            t.naive += v.naive;
            t.refined += v.refined;
            t.subsidy += v.subsidy;
        }
        return a;
    };

    MapReduceOptions tx_opt = opt;
    tx_opt.first = 0;
    tx_opt.end.reset();
    Buckets buckets = detail::run_chunks<Buckets>(
        0, view.tx_count(), tx_opt,
        [&](std::uint32_t lo, std::uint32_t hi) {
            Buckets out;
            std::uint32_t height = view.height_of(lo);
            std::uint32_t next_block = view.block_txs(height).second;
            std::int64_t window = floor_div(view.block(height).timestamp, w);
            for (std::uint32_t id = lo; id < hi; ++id) {
                while (id >= next_block) {
                    next_block = view.block_txs(++height).second;
                    window = floor_div(view.block(height).timestamp, w);
                }
                TxView tx = view.tx(id);
                if (tx.is_coinbase()) continue;
                auto& a = out[window];
                a.naive += tx.total_out();
                a.refined += refined_tx_value(view, clusters, params, id);
            }
            return out;
        },
        merge, Buckets{});

    std::int64_t lo_w = std::numeric_limits<std::int64_t>::max(), hi_w = std::numeric_limits<std::int64_t>::min();
    for (std::uint32_t h = 0; h < view.block_count(); ++h) {
        std::int64_t win = floor_div(view.block(h).timestamp, w);
        lo_w = std::min(lo_w, win);
        hi_w = std::max(hi_w, win);
        auto [first, end] = view.block_txs(h);
        if (first == end) continue;
        std::uint64_t cb = view.tx(first).total_out();
        std::uint64_t fees = view.block_fees(h);
        buckets[win].subsidy += cb > fees ? cb - fees : 0;
    }

    std::vector<VelocityPoint> out;
    std::uint64_t supply = 0;
    for (std::int64_t win = lo_w; win <= hi_w; ++win) {
        Acc a;
        if (auto it = buckets.find(win); it != buckets.end()) a = it->second;
        supply += a.subsidy;
        VelocityPoint p;
        p.window_start = win * w;
        p.naive_value = a.naive;
        p.refined_value = a.refined;
        p.supply = supply;
        if (supply > 0) {
            p.naive = static_cast<double>(a.naive) / static_cast<double>(supply);
            p.refined = static_cast<double>(a.refined) / static_cast<double>(supply);
        }
        out.push_back(p);
    }
    return out;
}

std::vector<DormancyPoint> dormancy_fraction(const ChainView& view)
{
    if (view.block_count() == 0) return {};
    std::int64_t first_day = std::numeric_limits<std::int64_t>::max(), last_day = std::numeric_limits<std::int64_t>::min();
    for (std::uint32_t h = 0; h < view.block_count(); ++h) {
        std::int64_t d = floor_div(view.block(h).timestamp, kDay);
        first_day = std::min(first_day, d);
        last_day = std::max(last_day, d);
    }
    auto days = static_cast<std::size_t>(last_day - first_day + 1);

    // difference arrays over days: [utxo, dormant]
    using Diff = std::vector<std::int64_t>;
    auto add_range = [&](Diff& diff, std::size_t lane, std::int64_t from, std::int64_t to, std::int64_t v) {
        from = std::max(from, first_day);
        to = std::min(to, last_day + 1);
        if (from >= to) return;
        diff[2 * static_cast<std::size_t>(from - first_day) + lane] += v;
        diff[2 * static_cast<std::size_t>(to - first_day) + lane] -= v;
    };
    Diff diff = detail::run_chunks<Diff>(
        0, view.tx_count(), MapReduceOptions{},
        [&](std::uint32_t lo, std::uint32_t hi) {
            Diff d(2 * (days + 1), 0);
            std::uint32_t height = view.height_of(lo);
            std::uint32_t next_block = view.block_txs(height).second;
            for (std::uint32_t id = lo; id < hi; ++id) {
                while (id >= next_block) next_block = view.block_txs(++height).second;
                std::int64_t created = view.block(height).timestamp;
                TxView tx = view.tx(id);
                for (std::uint32_t o = 0, n = tx.output_count(); o < n; ++o) {
                    InOutRecord out = tx.output(o);
                    if (out.value == 0) continue;
                    std::int64_t end_day = last_day + 1;
                    if (out.linked_tx_id != kUnspent) {
                        std::int64_t spent = std::max(created, view.block(view.height_of(out.linked_tx_id)).timestamp);
                        end_day = floor_div(spent, kDay);
                    }
                    auto v = static_cast<std::int64_t>(out.value);
                    add_range(d, 0, floor_div(created, kDay), end_day, v);
                    add_range(d, 1, floor_div(created + kDormancySeconds + kDay, kDay) - 1, end_day, v);
                }
            }
            return d;
        },
        [](Diff a, Diff b) {
            if (a.empty()) return b;
            for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
            return a;
        },
        Diff{});
    if (diff.empty()) diff.assign(2 * (days + 1), 0);

    std::vector<DormancyPoint> out;
    std::int64_t utxo = 0, dormant = 0;
    for (std::size_t i = 0; i < days; ++i) {
        utxo += diff[2 * i];
        dormant += diff[2 * i + 1];
        DormancyPoint p;
        p.day = first_day + static_cast<std::int64_t>(i);
        p.utxo_value = static_cast<std::uint64_t>(utxo);
        p.dormant_value = static_cast<std::uint64_t>(dormant);
        p.fraction = utxo > 0 ? static_cast<double>(dormant) / static_cast<double>(utxo) : 0.0;
        out.push_back(p);
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

std::string to_csv(std::span<const MonthlyPoint> series)
{
    std::string s = "month,count,value\n";
    for (const auto& p : series) s += p.month + "," + std::to_string(p.count) + "," + std::to_string(p.value) + "\n";
    return s;
}

std::string to_csv(std::span<const AttackPoint> series)
{
    std::string s = "inputs,success_rate,mean_candidates\n";
    for (const auto& p : series) s += std::to_string(p.inputs) + "," + fmt(p.success_rate) + "," + fmt(p.mean_candidates) + "\n";
    return s;
}

std::string to_csv(std::span<const BlockGap> gaps)
{
    std::string s = "height,gap_seconds\n";
    for (const auto& g : gaps) s += std::to_string(g.height) + "," + fmt(g.seconds) + "\n";
    return s;
}

std::string to_csv(const std::map<std::int64_t, std::uint64_t>& histogram)
{
    std::string s = "seconds,blocks\n";
    for (const auto& [k, v] : histogram) s += std::to_string(k) + "," + std::to_string(v) + "\n";
    return s;
}

std::string to_csv(std::span<const FeeLoss> series)
{
    std::string s = "interval,loss,ci_low,ci_high,blocks\n";
    for (const auto& p : series) {
        s += fmt(p.interval) + "," + fmt(p.loss) + "," + fmt(p.ci_low) + "," + fmt(p.ci_high) + "," + std::to_string(p.blocks) + "\n";
    }
    return s;
}

std::string to_csv(std::span<const VelocityPoint> series)
{
    std::string s = "window_start,naive,refined,naive_value,refined_value,supply\n";
    for (const auto& p : series) {
        s += format_date(floor_div(p.window_start, kDay)) + "," + fmt(p.naive) + "," + fmt(p.refined) + "," +
             std::to_string(p.naive_value) + "," + std::to_string(p.refined_value) + "," + std::to_string(p.supply) + "\n";
    }
    return s;
}

std::string to_csv(std::span<const DormancyPoint> series)
{
    std::string s = "date,fraction,dormant_value,utxo_value\n";
    for (const auto& p : series) {
        s += format_date(p.day) + "," + fmt(p.fraction) + "," + std::to_string(p.dormant_value) + "," +
             std::to_string(p.utxo_value) + "\n";
    }
    return s;
}

} // namespace chainlens
