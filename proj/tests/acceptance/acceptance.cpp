// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any failed. Arguments select criteria by name (P1 P7 ...).

#include <chainlens/analyses.hpp>
#include <chainlens/chain_view.hpp>
#include <chainlens/clustering.hpp>
#include <chainlens/errors.hpp>
#include <chainlens/map_reduce.hpp>
#include <chainlens/mempool.hpp>
#include <chainlens/parser.hpp>
#include <chainlens/tables.hpp>

#include "../support/oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <deque>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

using namespace chainlens;
using namespace chainlens::test;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0)
{
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
    std::vector<std::string> failures;

    void require(bool ok, const std::string& what)
    {
        if (!ok) {
            pass = false;
            if (failures.size() < 5) failures.push_back(what);
        }
    }
};

ParserOptions direct()
{
    ParserOptions o;
    o.pipelined = false;
    return o;
}

ChainStats parse_into(std::vector<ImportBlock> blocks, const std::filesystem::path& dir)
{
    VectorSource src(std::move(blocks));
    return parse_chain(src, dir, direct());
}

std::vector<ImportBlock> slice(const std::vector<ImportBlock>& v, std::size_t from, std::size_t to)
{
    return {v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(to)};
}

Bytes read_all(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return Bytes(std::istreambuf_iterator<char>(in), {});
}

bool same_parse(const std::filesystem::path& a, const std::filesystem::path& b, std::string* diff, bool with_bloom = true)
{
    if (!core_files_equal(DataLayout(a), DataLayout(b), diff)) return false;
    bool state_equal = with_bloom ? read_all(DataLayout(a).parser_state()) == read_all(DataLayout(b).parser_state())
                                  : parser_state_without_bloom(a) == parser_state_without_bloom(b);
    if (!state_equal) {
        *diff = "parser_state.dat";
        return false;
    }
    return true;
}

// ---------------------------------------------------------------------------

void codec_exactness(Outcome& o)
{
    InOutRecord worked{7, 3, 50000, AddressType::pubkeyhash};
    auto bytes = encode_inout(worked);
    o.require(to_hex(bytes) == "070000000300000050c3000000000020", "worked vector hex");
    o.require(bytes == oracle_pack(7, 3, 50000, 2), "worked vector vs bit oracle");

    std::mt19937_64 rng(20260101);
    auto random_inout = [&] {
        InOutRecord r;
        r.linked_tx_id = static_cast<std::uint32_t>(rng());
        r.address_id = static_cast<std::uint32_t>(rng());
        r.value = rng() & (kValueLimit - 1);
        r.address_type = static_cast<AddressType>(rng() % 16);
        return r;
    };
    std::uint64_t mismatches = 0;
    const int n = 100'000;
    for (int i = 0; i < n; ++i) {
        InOutRecord r = random_inout();
        auto b = encode_inout(r);
        if (decode_inout(b) != r || b != oracle_pack(r.linked_tx_id, r.address_id, r.value, code(r.address_type))) {
            ++mismatches;
        }
    }
    Bytes buf;
    for (int i = 0; i < n; ++i) {
        TxRecord tx;
        tx.size = static_cast<std::uint32_t>(rng());
        tx.locktime = static_cast<std::uint32_t>(rng());
        tx.inputs.resize(rng() % 6);
        tx.outputs.resize(1 + rng() % 6);
        for (auto& r : tx.inputs) r = random_inout();
        for (auto& r : tx.outputs) r = random_inout();
        buf.clear();
        append_tx_record(tx, buf);
        if (buf.size() != tx_record_length(tx.inputs.size(), tx.outputs.size()) || decode_tx_record(buf) != tx) ++mismatches;
    }
    o.require(mismatches == 0, std::to_string(mismatches) + " round-trip mismatches");
    o.detail << n << " InOutRecord + " << n << " TxRecord round-trips, " << mismatches << " mismatches; worked vector ok";
}

void size_law(Outcome& o)
{
    for (std::uint64_t target : {1'000u, 10'000u, 100'000u}) {
        SynthParams p;
        p.seed = target;
        p.blocks = static_cast<std::uint32_t>(target / 4);
        auto blocks = generate_synthetic_chain(p);
        // counted from the import blocks, not from the parser
        std::uint64_t n_tx = 0, n_in = 0, n_out = 0;
        for (const auto& b : blocks) {
            for (const auto& tx : b.txs) {
                ++n_tx;
                n_in += tx.is_coinbase() ? 0 : tx.inputs.size();
                n_out += tx.outputs.size();
            }
        }
        TempDir dir;
        parse_into(std::move(blocks), dir.path());
        std::uint64_t measured = measure_tx_graph_bytes(DataLayout(dir.path()));
        std::uint64_t law = 20 * n_tx + 16 * (n_in + n_out);
        o.require(measured == law, "chain of " + std::to_string(n_tx) + " txs: " + std::to_string(measured) +
                                       " bytes, law " + std::to_string(law));
        o.detail << "N_tx=" << n_tx << " bytes=" << measured << (measured == law ? " exact; " : " MISMATCH; ");
    }
    // N_in is recovered from the published layout totals
    ChainStats btc{243'000'000, 609'000'000, 663'000'000};
    double gb = static_cast<double>(predict_layout_sizes(btc).current) / 1e9;
    o.require(std::abs(gb - 25.21) < 0.005, "bitcoin-scale prediction " + std::to_string(gb));
    char line[64];
    std::snprintf(line, sizeof line, "bitcoin-scale prediction %.2f GB", gb);
    o.detail << line;
}

void parse_correctness(Outcome& o)
{
    std::uint64_t txs = 0, links = 0;
    for (std::uint64_t seed : {3u, 17u, 91u}) {
        SynthParams p;
        p.seed = seed;
        p.blocks = 600;
        p.fan_in = {1, 5};
        p.address_reuse_rate = 0.3;
        std::vector<SynthLedgerEntry> ledger;
        auto blocks = generate_synthetic_chain(p, &ledger);
        TempDir dir;
        parse_into(std::move(blocks), dir.path());
        ChainView v = ChainView::open(dir.path(), ViewOptions{0});
        o.require(v.tx_count() == ledger.size(), "tx count");
        for (std::uint32_t id = 0; id < v.tx_count() && id < ledger.size(); ++id) {
            const auto& e = ledger[id];
            TxView tx = v.tx(id);
            o.require(v.tx_hash(id) == e.hash && v.height_of(id) == e.height, "tx " + std::to_string(id) + " identity");
            o.require(tx.fee() == e.fee, "tx " + std::to_string(id) + " fee");
            o.require(tx.output_count() == e.output_values.size(), "tx " + std::to_string(id) + " outputs");
            for (std::uint32_t i = 0; i < tx.output_count() && i < e.output_values.size(); ++i) {
                o.require(tx.output_value(i) == e.output_values[i], "output value");
            }
            if (e.coinbase) {
                o.require(tx.is_coinbase(), "coinbase flag");
                continue;
            }
            o.require(tx.input_count() == e.inputs.size(), "tx " + std::to_string(id) + " inputs");
            for (std::uint32_t i = 0; i < tx.input_count() && i < e.inputs.size(); ++i) {
                OutPoint src = v.spent_output(id, i);
                bool ok = v.tx_hash(src.tx_id) == e.inputs[i].tx && src.index == e.inputs[i].index &&
                          tx.input_value(i) == e.input_values[i] && v.spending_tx(src.tx_id, src.index) == id;
                o.require(ok, "tx " + std::to_string(id) + " input " + std::to_string(i) + " linkage");
                ++links;
            }
        }
        txs += v.tx_count();
    }
    o.detail << txs << " txs, " << links << " input links and all fees checked against the generator ledger";
}

void incremental_equals_batch(Outcome& o)
{
    auto t0 = Clock::now();
    SynthParams p;
    p.seed = 4242;
    p.blocks = 5000;
    p.txs_per_block = {1, 5};
    auto blocks = generate_synthetic_chain(p);
    TempDir full;
    parse_into(blocks, full.path());
    std::mt19937_64 rng(7);
    std::set<std::uint32_t> splits;
    while (splits.size() < 10) splits.insert(1 + static_cast<std::uint32_t>(rng() % (p.blocks - 1)));
    for (auto split : splits) {
        TempDir part;
        parse_into(slice(blocks, 0, split), part.path());
        VectorSource rest(slice(blocks, split, blocks.size()));
        update_chain(rest, part.path(), direct());
        std::string diff;
        bool same = same_parse(full.path(), part.path(), &diff);
        o.require(same, "split " + std::to_string(split) + ": " + diff);
    }
    double secs = seconds_since(t0);
    o.require(secs < 120, "took " + std::to_string(secs) + " s");
    o.detail << "10 split points on 5000 blocks byte-identical, " << std::fixed << std::setprecision(1) << secs << " s";
}

void reorg(Outcome& o)
{
    auto base = small_params(31, 100);
    auto fork_params = base;
    fork_params.blocks = 101;
    fork_params.fork = ForkSpec{97, 777};
    auto blocks = generate_synthetic_chain(base);
    auto forked = generate_synthetic_chain(fork_params);
    TempDir work, reference;
    parse_into(blocks, work.path());
    revert_blocks(work.path(), 3, direct());
    VectorSource branch(slice(forked, 97, 101));
    update_chain(branch, work.path(), direct());
    parse_into(forked, reference.path());
    std::string diff;
    bool same = same_parse(reference.path(), work.path(), &diff, false);
    o.require(same, "revert+apply differs: " + diff);

    // a view over the default margin survives a reorg inside the margin ...
    auto shallow_params = base;
    shallow_params.blocks = 101;
    shallow_params.fork = ForkSpec{96, 5};
    auto shallow = generate_synthetic_chain(shallow_params);
    TempDir s;
    parse_into(blocks, s.path());
    ChainView sv = ChainView::open(s.path());
    VectorSource sb(slice(shallow, 96, 101));
    update_chain(sb, s.path(), direct());
    bool shallow_ok = true;
    try {
        (void)sv.reopen();
    } catch (const ReorgError&) {
        shallow_ok = false;
    }
    o.require(shallow_ok, "reorg inside the margin raised");

    // ... but not one that replaces a block it exposed
    auto deep_params = base;
    deep_params.blocks = 102;
    deep_params.fork = ForkSpec{90, 5};
    auto deep = generate_synthetic_chain(deep_params);
    TempDir d;
    parse_into(blocks, d.path());
    ChainView dv = ChainView::open(d.path());
    VectorSource db(slice(deep, 90, 102));
    update_chain(db, d.path(), direct());
    bool raised = false;
    try {
        (void)dv.reopen();
    } catch (const ReorgError&) {
        raised = true;
    }
    o.require(raised, "deep reorg did not raise");
    o.detail << "revert(3)+fork(4) byte-identical (parser state compared without its Bloom filter); margin " << kDefaultReorgMargin
             << " reorg tolerated; 10-block reorg raises ReorgError";
}

void compare_views(Outcome& o, const ChainView& a, const ChainView& b, std::uint32_t h)
{
    std::string at = "height " + std::to_string(h) + ": ";
    if (a.max_height() != b.max_height() || a.max_tx_id() != b.max_tx_id()) {
        o.require(false, at + "extent");
        return;
    }
    o.require(a.address_counts() == b.address_counts(), at + "address counts");
    for (std::uint32_t bh = 0; bh < a.block_count(); ++bh) {
        o.require(a.block(bh) == b.block(bh) && a.block_txs(bh) == b.block_txs(bh), at + "block record");
        o.require(a.block_fees(bh) == b.block_fees(bh) && a.block_total_out(bh) == b.block_total_out(bh), at + "block sums");
    }
    for (std::uint32_t id = 0; id < a.tx_count(); ++id) {
        TxView x = a.tx(id), y = b.tx(id);
        bool ok = x.record() == y.record() && x.fee() == y.fee() && x.total_in() == y.total_in() &&
                  x.total_out() == y.total_out() && a.tx_hash(id) == b.tx_hash(id) && a.height_of(id) == b.height_of(id);
        for (std::uint32_t i = 0; i < x.output_count(); ++i) ok = ok && a.spending_tx(id, i) == b.spending_tx(id, i);
        for (std::uint32_t i = 0; i < x.input_count(); ++i) ok = ok && a.spent_output(id, i) == b.spent_output(id, i);
        if (auto hash = a.tx_hash(id)) ok = ok && a.tx_id(*hash) == b.tx_id(*hash);
        o.require(ok, at + "tx " + std::to_string(id));
    }
    for (AddressType t : kAllAddressTypes) {
        for (std::uint32_t i = 0; i < a.address_counts()[code(t)]; ++i) {
            o.require(a.script_payload({t, i}) == b.script_payload({t, i}), at + "script payload");
        }
    }
}

void snapshot_illusion(Outcome& o)
{
    const std::uint32_t n = 200;
    auto blocks = generate_synthetic_chain(small_params(808, n));
    TempDir full;
    parse_into(blocks, full.path());
    for (std::uint32_t h = 0; h < n; ++h) {
        TempDir cut;
        parse_into(slice(blocks, 0, h + 1), cut.path());
        compare_views(o, ChainView::open(full.path(), ViewOptions{n - 1 - h}), ChainView::open(cut.path(), ViewOptions{0}), h);
    }
    o.detail << "view(h) equals a truncated parse for all " << n << " heights";
}

void clustering_oracle(Outcome& o)
{
    std::uint64_t max_txs = 0, mismatches = 0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        auto p = small_params(1000 + seed, 60 + static_cast<std::uint32_t>(seed % 5) * 30);
        p.address_reuse_rate = 0.1 + 0.05 * static_cast<double>(seed % 6);
        p.coinjoin_rate = 0.15;
        p.fan_in = {1, 4};
        TempDir dir;
        ChainStats s = parse_into(generate_synthetic_chain(p), dir.path());
        max_txs = std::max(max_txs, s.n_tx);
        o.require(s.n_tx <= 1000, "chain too large");
        ChainView v = ChainView::open(dir.path(), ViewOptions{0});
        for (const auto& cfg : all_configs()) {
            bool ok = partition_of(build_clusters(v, cfg)) == reference_partition(v, cfg);
            mismatches += !ok;
            o.require(ok, "seed " + std::to_string(seed) + " " + format_heuristics(cfg));
        }
    }
    o.detail << "50 chains (<= " << max_txs << " txs) x 16 heuristic configs, " << mismatches << " mismatches";
}

void wallet_selection_oracle(Outcome& o)
{
    // Every wallet of <= 6 coins up to relabelling: an ordered list of funding
    // txs (hash order), each a sequence of denominations in output order.
    std::uint64_t wallets = 0, cases = 0;
    for (std::uint32_t n = 1; n <= 6; ++n) {
        std::uint32_t denom_codes = 1u << (2 * n);
        for (std::uint32_t cuts = 0; cuts < (1u << (n - 1)); ++cuts) {
            for (std::uint32_t dc = 0; dc < denom_codes; ++dc) {
                std::vector<WalletCoin> coins;
                DenominatedWallet w;
                std::uint64_t tx = 1;
                std::uint32_t index = 0;
                for (std::uint32_t i = 0; i < n; ++i) {
                    if (i > 0 && (cuts >> (i - 1) & 1)) {
                        ++tx;
                        index = 0;
                    }
                    WalletCoin c{hash_of(tx << 8), index++, kPsDenominations[dc >> (2 * i) & 3]};
                    coins.push_back(c);
                    w.add(c);
                }
                ++wallets;
                std::set<std::uint64_t> targets{0, 1, w.total() + 1};
                for (std::uint32_t mask = 1; mask < (1u << n); ++mask) {
                    std::uint64_t s = 0;
                    for (std::uint32_t i = 0; i < n; ++i) s += (mask >> i & 1) ? coins[i].value : 0;
                    targets.insert(s);
                    targets.insert(s - 1);
                }
                for (auto t : targets) {
                    auto got = select_ps_inputs(w, t);
                    auto want = oracle_select(coins, t);
                    bool ok = got.has_value() == want.has_value();
                    if (ok && got) {
                        ok = got->size() == want->size();
                        for (std::size_t i = 0; ok && i < got->size(); ++i) {
                            ok = (*got)[i].tx_hash == (*want)[i].first && (*got)[i].index == (*want)[i].second;
                        }
                    }
                    o.require(ok, "wallet " + std::to_string(wallets) + " target " + std::to_string(t));
                    ++cases;
                }
            }
        }
    }
    o.detail << wallets << " wallets, " << cases << " (wallet, amount) cases exact";
}

void intersection_attack(Outcome& o)
{
    MixSimParams p;
    p.trials = 1000;
    auto curve = simulate_intersection_attack(p);
    o.require(!curve.empty(), "empty curve");
    for (std::size_t i = 1; i < curve.size(); ++i) {
        o.require(curve[i].success_rate >= curve[i - 1].success_rate, "drop at " + std::to_string(curve[i].inputs));
    }
    if (!curve.empty()) {
        o.require(curve.back().success_rate == 1.0, "not certain at the high end");
        char line[160];
        std::snprintf(line, sizeof line, "%u trials/point, success %.3f at %u input(s) -> %.3f at %u inputs, nondecreasing",
                      p.trials, curve.front().success_rate, curve.front().inputs, curve.back().success_rate,
                      curve.back().inputs);
        o.detail << line;
    }
}

void velocity_check(Outcome& o)
{
    {
        TempDir dir;
        parse_into(velocity_chain(), dir.path());
        ChainView v = ChainView::open(dir.path(), ViewOptions{0});
        auto series = velocity(v, build_clusters(v, HeuristicConfig{}), VelocityParams{});
        bool ok = series.size() == 1 && series[0].naive_value == 1260 && series[0].refined_value == 560 &&
                  series[0].supply == 1000;
        o.require(v.tx_count() == 20 && ok, "hand-built ledger");
    }
    std::uint64_t windows = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        TempDir dir;
        auto p = small_params(seed, 200);
        p.block_interval = 4 * 3600;
        p.address_reuse_rate = 0.35;
        parse_into(generate_synthetic_chain(p), dir.path());
        ChainView v = ChainView::open(dir.path(), ViewOptions{0});
        ClusterSet c = build_clusters(v, parse_heuristics("all"));
        for (std::uint32_t k : {1u, 4u}) {
            for (std::int64_t days : {3, 7, 30}) {
                VelocityParams vp;
                vp.k = k;
                vp.window_seconds = days * 86400;
                for (const auto& pt : velocity(v, c, vp)) {
                    o.require(pt.refined_value <= pt.naive_value && pt.refined <= pt.naive, "refined above naive");
                    ++windows;
                }
            }
        }
    }
    o.detail << "20-tx ledger exact (naive 1260, refined 560, supply 1000); refined <= naive on " << windows
             << " windows";
}

// Uniform-gap simulation: each block's miner refreshes its template every
// 60 s at a random phase and includes everything seen up to the last
// refresh, so block time minus newest included arrival is close to U[0, 60).
struct GapSim {
    std::vector<ImportBlock> blocks;
    std::string feed;
};

GapSim simulate_template_miner(std::uint64_t seed, std::uint32_t n_blocks)
{
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> arrival_gap(1.0); // one tx per second
    std::exponential_distribution<double> block_gap(1.0 / 540);
    std::uniform_real_distribution<double> phase(0, 60);
    GapSim sim;
    const std::int64_t t0 = 1'600'000'000;

    ImportTx genesis = coinbase_tx(1, 1'000'000, pkh(1));
    for (int i = 1; i < 3000; ++i) genesis.outputs.push_back({1'000'000, pkh(1 + i)});
    sim.blocks.push_back(make_block(0, {genesis}, t0));
    struct Coin {
        Hash256 tx;
        std::uint32_t index;
        std::uint64_t value;
    };
    std::deque<Coin> spendable;
    for (std::uint32_t i = 0; i < 3000; ++i) spendable.push_back({genesis.hash, i, 1'000'000});
    std::deque<std::pair<Hash256, std::int64_t>> pending; // (hash, arrival millis)

    std::uint64_t next_hash = 10;
    double clock = static_cast<double>(t0);
    std::int64_t block_time = t0;
    for (std::uint32_t h = 1; h < n_blocks; ++h) {
        block_time += 60 + static_cast<std::int64_t>(block_gap(rng));
        while (clock + 1 < static_cast<double>(block_time)) {
            clock += arrival_gap(rng);
            auto millis = static_cast<std::int64_t>(clock * 1000);
            Hash256 hash = hash_of(next_hash++);
            pending.push_back({hash, millis});
            sim.feed += to_hex(hash) + "," + std::to_string(millis) + "\n";
        }
        double phi = phase(rng);
        double refresh = phi + 60 * std::floor((static_cast<double>(block_time) - phi) / 60);
        auto cutoff = static_cast<std::int64_t>(refresh * 1000);

        std::vector<ImportTx> txs{coinbase_tx(0xC0000000ull + h, 1'000'000, pkh(1))};
        std::vector<Coin> created;
        while (!pending.empty() && pending.front().second <= cutoff && !spendable.empty()) {
            Coin c = spendable.front();
            spendable.pop_front();
            std::uint64_t fee = 200 + rng() % 2000;
            ImportTx tx = spend_tx(0, {{c.tx, c.index}}, {{c.value - fee, pkh(next_hash + txs.size())}});
            tx.hash = pending.front().first;
            pending.pop_front();
            created.push_back({tx.hash, 0, c.value - fee});
            txs.push_back(std::move(tx));
        }
        sim.blocks.push_back(make_block(h, std::move(txs), block_time));
        for (const auto& c : created) spendable.push_back(c);
    }
    return sim;
}

void block_space(Outcome& o)
{
    // CPFP fixture: the parent's own rate is far below the block minimum
    MempoolSnapshot cpfp;
    cpfp.txs = {{0, 100, 1000, {}}, {1, 40000, 200, {0}}, {2, 10000, 500, {}}, {3, 10000, 500, {}}, {4, 0, 400, {}}};
    GreedyBlock g = build_greedy_block(cpfp, 2000);
    std::uint32_t mask = 0;
    std::uint64_t optimum = best_closed_subset(cpfp, 2000, &mask);
    o.require(g.fees >= cpfp.txs[2].fee + cpfp.txs[3].fee + cpfp.txs[4].fee, "cpfp fixture: greedy below actual");
    o.require(g.fees == optimum, "cpfp fixture: greedy below the exhaustive optimum");
    std::vector<BlockTxInfo> mined = {
        {0u, 100, 1000, 1, 1, 0, true},
        {1u, 40000, 200, 1, 1, 0, true},
        {std::nullopt, 300, 300, 15, 1, 0, true},
    };
    bool parent_flagged = false;
    for (const auto& verdict : classify_low_fee(mined, g)) parent_flagged |= verdict.position == 0;
    o.require(!parent_flagged, "cpfp parent classified as suspicious");

    // the simulated chain: every block against the greedy block from its mempool
    GapSim sim = simulate_template_miner(99, 180);
    TempDir dir;
    parse_into(sim.blocks, dir.path());
    record_feed(dir.path(), parse_feed(sim.feed), MempoolMode::minimal);
    ChainView v = ChainView::open(dir.path(), ViewOptions{0});
    MempoolLog log = MempoolLog::load(dir.path());
    std::uint32_t fixtures = 1;
    for (std::uint32_t h = 1; h < v.block_count(); h += 7) {
        MempoolSnapshot snap = snapshot_at_block(v, log, h);
        GreedyBlock gb = build_greedy_block(snap, 1'000'000);
        o.require(gb.fees >= v.block_fees(h), "block " + std::to_string(h) + ": greedy below actual");
        ++fixtures;
    }

    std::vector<double> gaps;
    for (const auto& gap : block_update_gap(v, log)) gaps.push_back(gap.seconds);
    double p = ks_uniform_pvalue(gaps, 0, 60);
    // independent statistic against the asymptotic 1% critical value
    std::vector<double> s = gaps;
    std::sort(s.begin(), s.end());
    double d = 0;
    double n = static_cast<double>(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        double f = std::clamp(s[i] / 60, 0.0, 1.0);
        d = std::max({d, (static_cast<double>(i) + 1) / n - f, f - static_cast<double>(i) / n});
    }
    double critical = 1.6276 / std::sqrt(n);
    o.require(gaps.size() > 100, "too few gaps");
    o.require(p > 0.01, "KS p-value " + std::to_string(p));
    o.require(d < critical, "KS statistic above the 1% critical value");
    char line[200];
    std::snprintf(line, sizeof line,
                  "greedy >= actual on %u fixtures; cpfp parent not suspicious; %zu gaps vs U[0,60]: D=%.4f (crit %.4f), p=%.3f",
                  fixtures, gaps.size(), d, critical, p);
    o.detail << line;
}

void relative_performance(Outcome& o)
{
    auto t0 = Clock::now();
    const std::uint32_t n = 5'000'000;
    const std::uint32_t per_block = 1000;
    TempDir dir;
    DataLayout layout(dir.path());
    std::filesystem::create_directories(layout.scripts_dir());
    {
        TxTable txs = TxTable::open(layout);
        BlockTable blocks = BlockTable::open(layout);
        for (AddressType t : kAllAddressTypes) ScriptTable::open(layout, t).flush();
        std::mt19937_64 rng(12);
        TxRecord tx;
        for (std::uint32_t id = 0; id < n; ++id) {
            tx.size = 200 + static_cast<std::uint32_t>(rng() % 300);
            tx.outputs.assign(1 + rng() % 2, InOutRecord{kUnspent, 0, 1000 + rng() % 100000, AddressType::pubkeyhash});
            tx.inputs.clear();
            if (id % per_block != 0) tx.inputs.push_back({id - 1, 0, 2000000, AddressType::pubkeyhash});
            txs.append(tx);
            if ((id + 1) % per_block == 0) {
                BlockRecord b;
                b.header_hash = hash_of(id / per_block);
                b.timestamp = 1'500'000'000 + id / per_block * 600;
                b.first_tx_id = id + 1 - per_block;
                b.tx_count = per_block;
                blocks.append(b, AddressCounts{});
            }
            if ((id + 1) % 200'000 == 0) txs.flush();
        }
        txs.flush();
        blocks.flush();
        std::ofstream(layout.parser_state(), std::ios::binary) << "";
    }
    ChainView v = ChainView::open(dir.path(), ViewOptions{0});
    o.require(v.tx_count() == n, "view does not cover the table");

    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    auto header_pass = [&](bool shuffled) {
        std::uint64_t acc = 0;
        auto start = Clock::now();
        for (std::uint32_t i = 0; i < n; ++i) {
            TxView tx = v.tx(shuffled ? order[i] : i);
            acc += tx.size() + tx.input_count() + tx.output_count();
        }
        return std::make_pair(seconds_since(start), acc);
    };
    // median of three passes each, after one warm-up pass
    auto median_pass = [&](bool shuffled, std::uint64_t* acc) {
        std::vector<double> t;
        for (int i = 0; i < 3; ++i) {
            auto [secs, sum] = header_pass(shuffled);
            t.push_back(secs);
            *acc = sum;
        }
        std::sort(t.begin(), t.end());
        return t[1];
    };
    std::uint64_t warm_acc = header_pass(false).second, seq_acc = 0, rnd_acc = 0;
    double seq = median_pass(false, &seq_acc);
    std::shuffle(order.begin(), order.end(), std::mt19937_64(3));
    double rnd = median_pass(true, &rnd_acc);
    o.require(seq_acc == rnd_acc && warm_acc == seq_acc, "header passes disagree");
    double slowdown = rnd / seq;
    o.require(slowdown >= 5, "random order only " + std::to_string(slowdown) + "x slower");

    auto value_sum = [&](unsigned threads, double* secs) {
        MapReduceOptions opt;
        opt.threads = threads;
        auto start = Clock::now();
        std::uint64_t total = map_reduce_txs<std::uint64_t>(
            v, [](const TxView& tx) { return tx.total_out() + tx.fee(); }, std::plus<>{}, 0, opt);
        *secs = seconds_since(start);
        return total;
    };
    double one = 0, four = 0;
    std::vector<double> t1, t4;
    std::uint64_t r1 = 0, r4 = 0;
    value_sum(1, &one);
    for (int i = 0; i < 3; ++i) {
        r1 = value_sum(1, &one);
        r4 = value_sum(4, &four);
        t1.push_back(one);
        t4.push_back(four);
    }
    std::sort(t1.begin(), t1.end());
    std::sort(t4.begin(), t4.end());
    one = t1[1];
    four = t4[1];
    o.require(r1 == r4, "thread counts disagree");
    double speedup = one / four;
    o.require(speedup >= 1.5, "4 threads only " + std::to_string(speedup) + "x faster on " +
                                  std::to_string(std::thread::hardware_concurrency()) + " hardware thread(s)");
    double total = seconds_since(t0);
    o.require(total < 300, "took " + std::to_string(total) + " s");
    char line[220];
    std::snprintf(line, sizeof line,
                  "%u txs: random headers %.2fx slower than sequential (%.3f vs %.3f s); 4 threads %.2fx faster than 1 "
                  "(%.3f vs %.3f s, %u hw threads), identical sums; %.0f s",
                  n, slowdown, rnd, seq, speedup, four, one, std::thread::hardware_concurrency(), total);
    o.detail << line;
}

void map_reduce_determinism(Outcome& o)
{
    auto p = small_params(5, 1500);
    p.txs_per_block = {1, 20};
    TempDir dir;
    parse_into(generate_synthetic_chain(p), dir.path());
    ChainView v = ChainView::open(dir.path(), ViewOptions{0});

    std::uint64_t sum = 0, lo = UINT64_MAX, hi = 0;
    for (std::uint32_t id = 0; id < v.tx_count(); ++id) {
        TxView tx = v.tx(id);
        for (std::uint32_t i = 0; i < tx.output_count(); ++i) {
            sum += tx.output_value(i);
            lo = std::min(lo, tx.output_value(i));
            hi = std::max(hi, tx.output_value(i));
        }
    }
    auto value = [](const InOutItem& item) { return item.record.value; };
    auto min_fn = [](std::uint64_t a, std::uint64_t b) { return std::min(a, b); };
    auto max_fn = [](std::uint64_t a, std::uint64_t b) { return std::max(a, b); };
    // floating point: parallel runs must equal the single-threaded fold bit for bit
    auto rate = [](const TxView& tx) { return tx.size() ? static_cast<double>(tx.fee()) / tx.size() : 0.0; };
    MapReduceOptions seq_opt;
    seq_opt.threads = 1;
    seq_opt.grain = 97;
    double seq_rate = map_reduce_txs<double>(v, rate, std::plus<>{}, 0.0, seq_opt);

    for (int run = 0; run < 20; ++run) {
        MapReduceOptions opt;
        opt.threads = 4;
        opt.grain = 97;
        bool ok = map_reduce_outputs<std::uint64_t>(v, value, std::plus<>{}, 0, opt) == sum &&
                  map_reduce_outputs<std::uint64_t>(v, value, min_fn, UINT64_MAX, opt) == lo &&
                  map_reduce_outputs<std::uint64_t>(v, value, max_fn, 0, opt) == hi;
        double par_rate = map_reduce_txs<double>(v, rate, std::plus<>{}, 0.0, opt);
        ok = ok && std::memcmp(&par_rate, &seq_rate, sizeof(double)) == 0;
        o.require(ok, "run " + std::to_string(run));
    }
    o.detail << "20 runs x 4 threads over " << v.tx_count() << " txs: sum/min/max and a double sum bit-identical";
}

struct Criterion {
    const char* id;
    const char* name;
    std::function<void(Outcome&)> run;
};

} // namespace

int main(int argc, char** argv)
{
    std::vector<Criterion> all = {
        {"P1", "codec exactness", codec_exactness},
        {"P2", "size law", size_law},
        {"P3", "parse correctness", parse_correctness},
        {"P4", "incremental equals batch", incremental_equals_batch},
        {"P5", "reorg", reorg},
        {"P6", "snapshot views", snapshot_illusion},
        {"P7", "clustering oracle", clustering_oracle},
        {"P8", "wallet selection oracle", wallet_selection_oracle},
        {"P9", "intersection attack", intersection_attack},
        {"P10", "velocity", velocity_check},
        {"P11", "block space", block_space},
        {"P12", "relative performance", relative_performance},
        {"P13", "map_reduce determinism", map_reduce_determinism},
    };
    std::set<std::string> only(argv + 1, argv + argc);
    int failed = 0;
    for (const auto& c : all) {
        if (!only.empty() && !only.count(c.id)) continue;
        Outcome o;
        auto t0 = Clock::now();
        try {
            c.run(o);
        } catch (const Error& e) {
            o.require(false, "error: " + std::string(to_string(e.kind())) + ": " + e.what());
        } catch (const std::exception& e) {
            o.require(false, std::string("exception: ") + e.what());
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << c.id << " " << c.name << ": " << o.detail.str();
        for (const auto& f : o.failures) std::cout << " [" << f << "]";
        char secs[32];
        std::snprintf(secs, sizeof secs, " (%.1f s)", seconds_since(t0));
        std::cout << secs << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
