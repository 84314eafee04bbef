// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/errors.hpp>
#include <chainlens/parser.hpp>

#include "../support/test_support.hpp"

#include <gtest/gtest.h>

#include <map>
#include <random>
#include <set>

using namespace chainlens;
using namespace chainlens::test;

namespace {

ParserOptions quiet_options()
{
    ParserOptions o;
    o.pipelined = false;
    return o;
}

ChainStats parse_blocks(const std::vector<ImportBlock>& blocks, const std::filesystem::path& dir,
                        ParserOptions options = quiet_options())
{
    VectorSource src(blocks);
    return parse_chain(src, dir, options);
}

std::vector<ImportBlock> slice(const std::vector<ImportBlock>& v, std::size_t from, std::size_t to)
{
    return {v.begin() + static_cast<std::ptrdiff_t>(from), v.begin() + static_cast<std::ptrdiff_t>(to)};
}

ErrorKind kind_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorKind::usage;
}

} // namespace

TEST(Parser, EmptyStream)
{
    TempDir dir;
    ChainStats s = parse_blocks({}, dir.path());
    EXPECT_EQ(s, (ChainStats{0, 0, 0}));
    DataLayout layout(dir.path());
    EXPECT_EQ(measure_tx_graph_bytes(layout), 0u);
    auto txs = TxTable::open(layout);
    EXPECT_EQ(txs.tx_count(), 0u);
}

TEST(Parser, HandTracedTwoBlocks)
{
    TempDir dir;
    // block 1 also carries its own coinbase, so the spender is tx 2
    std::vector<ImportBlock> blocks = {
        make_block(0, {coinbase_tx(100, 5000, pkh(1))}),
        make_block(1, {coinbase_tx(101, 5000, pkh(2)),
                       spend_tx(102, {{hash_of(100), 0}}, {{3000, pkh(3)}, {1500, pkh(4)}})}),
    };
    ChainStats s = parse_blocks(blocks, dir.path());
    EXPECT_EQ(s, (ChainStats{3, 1, 4}));

    DataLayout layout(dir.path());
    auto txs = TxTable::open(layout);
    TxRecord tx0 = txs.read(0);
    TxRecord tx2 = txs.read(2);
    EXPECT_TRUE(tx0.is_coinbase());
    EXPECT_EQ(tx0.outputs[0].linked_tx_id, 2u);
    ASSERT_EQ(tx2.inputs.size(), 1u);
    EXPECT_EQ(tx2.inputs[0].linked_tx_id, 0u);
    EXPECT_EQ(tx2.inputs[0].address_id, tx0.outputs[0].address_id);
    EXPECT_EQ(tx2.inputs[0].address_type, AddressType::pubkeyhash);
    EXPECT_EQ(tx2.inputs[0].value, 5000u);
    EXPECT_EQ(tx2.outputs[0].linked_tx_id, kUnspent);
    // distinct addresses got dense ids 0..3
    std::set<std::uint32_t> ids = {tx0.outputs[0].address_id, txs.read(1).outputs[0].address_id,
                                   tx2.outputs[0].address_id, tx2.outputs[1].address_id};
    EXPECT_EQ(ids, (std::set<std::uint32_t>{0, 1, 2, 3}));

    auto blocks_table = BlockTable::open(layout);
    EXPECT_EQ(blocks_table.read(1).first_tx_id, 1u);
    EXPECT_EQ(blocks_table.read(1).tx_count, 2u);
    EXPECT_EQ(blocks_table.counts_after(1)[code(AddressType::pubkeyhash)], 4u);
}

TEST(Parser, SizeLawHoldsOnDisk)
{
    TempDir dir;
    ChainStats s = parse_blocks(generate_synthetic_chain(small_params(4, 120)), dir.path());
    EXPECT_EQ(measure_tx_graph_bytes(DataLayout(dir.path())), predict_layout_sizes(s).current);
}

TEST(Parser, DanglingReference)
{
    TempDir dir;
    std::vector<ImportBlock> blocks = {
        make_block(0, {coinbase_tx(1, 50, pkh(1))}),
        make_block(1, {coinbase_tx(2, 50, pkh(1)), spend_tx(3, {{hash_of(77), 0}}, {{10, pkh(2)}})}),
    };
    EXPECT_EQ(kind_of([&] { parse_blocks(blocks, dir.path()); }), ErrorKind::dangling_reference);
    // the failing block is rolled back, block 0 is kept
    Parser p = Parser::open(dir.path(), quiet_options());
    EXPECT_EQ(p.last_height(), 0);
    EXPECT_EQ(p.stats(), (ChainStats{1, 0, 1}));
}

TEST(Parser, MissingOutputIndexIsDangling)
{
    TempDir dir;
    std::vector<ImportBlock> blocks = {
        make_block(0, {coinbase_tx(1, 50, pkh(1))}),
        make_block(1, {coinbase_tx(2, 50, pkh(1)), spend_tx(3, {{hash_of(1), 1}}, {{10, pkh(2)}})}),
    };
    EXPECT_EQ(kind_of([&] { parse_blocks(blocks, dir.path()); }), ErrorKind::dangling_reference);
}

TEST(Parser, DoubleSpendRejected)
{
    TempDir dir;
    std::vector<ImportBlock> blocks = {
        make_block(0, {coinbase_tx(1, 50, pkh(1))}),
        make_block(1, {coinbase_tx(2, 50, pkh(1)), spend_tx(3, {{hash_of(1), 0}}, {{10, pkh(2)}}),
                       spend_tx(4, {{hash_of(1), 0}}, {{10, pkh(3)}})}),
    };
    EXPECT_EQ(kind_of([&] { parse_blocks(blocks, dir.path()); }), ErrorKind::double_spend);
}

TEST(Parser, SpendWithinOneTxTwiceRejected)
{
    TempDir dir;
    std::vector<ImportBlock> blocks = {
        make_block(0, {coinbase_tx(1, 50, pkh(1))}),
        make_block(1, {coinbase_tx(2, 50, pkh(1)), spend_tx(3, {{hash_of(1), 0}, {hash_of(1), 0}}, {{10, pkh(2)}})}),
    };
    EXPECT_EQ(kind_of([&] { parse_blocks(blocks, dir.path()); }), ErrorKind::double_spend);
}

TEST(Parser, DuplicateTxHashRejected)
{
    TempDir dir;
    std::vector<ImportBlock> blocks = {
        make_block(0, {coinbase_tx(1, 50, pkh(1))}),
        make_block(1, {coinbase_tx(1, 50, pkh(1))}),
    };
    EXPECT_EQ(kind_of([&] { parse_blocks(blocks, dir.path()); }), ErrorKind::consistency);
}

TEST(Parser, ContinuityEnforced)
{
    TempDir dir;
    EXPECT_EQ(kind_of([&] { parse_blocks({make_block(3, {coinbase_tx(1, 50, pkh(1))})}, dir.path()); }),
              ErrorKind::continuity);
    auto blocks = generate_synthetic_chain(small_params(2, 10));
    parse_blocks(slice(blocks, 0, 5), dir.path());
    VectorSource gap(slice(blocks, 6, 10));
    EXPECT_EQ(kind_of([&] { update_chain(gap, dir.path(), quiet_options()); }), ErrorKind::continuity);
}

TEST(Parser, UpdateRequiresState)
{
    TempDir dir;
    VectorSource src({});
    EXPECT_EQ(kind_of([&] { update_chain(src, dir.path(), quiet_options()); }), ErrorKind::storage);
}

TEST(Parser, LinkInputPrunesSpentTransactions)
{
    TempDir dir;
    Parser p = Parser::open(dir.path(), quiet_options());
    p.apply_block(make_block(0, {coinbase_tx(1, 50, pkh(1))}));
    ImportTx two_out = coinbase_tx(2, 50, pkh(2));
    two_out.outputs.push_back({7, pkh(3)});
    p.apply_block(make_block(1, {two_out}));
    ASSERT_NE(p.utxo(hash_of(1)), nullptr);

    // spending the only output removes the hash
    p.apply_block(make_block(2, {coinbase_tx(3, 50, pkh(4)), spend_tx(4, {{hash_of(1), 0}}, {{50, pkh(5)}})}));
    EXPECT_EQ(p.utxo(hash_of(1)), nullptr);

    // spending 1 of 2 keeps it
    p.apply_block(make_block(3, {coinbase_tx(5, 50, pkh(4)), spend_tx(6, {{hash_of(2), 1}}, {{7, pkh(5)}})}));
    ASSERT_NE(p.utxo(hash_of(2)), nullptr);
    EXPECT_EQ(p.utxo(hash_of(2))->unspent, 1u);
    p.save();
}

TEST(Parser, UtxoMapTracksReplayAtEveryStep)
{
    TempDir dir;
    auto blocks = generate_synthetic_chain(small_params(21, 80));
    Parser p = Parser::open(dir.path(), quiet_options());
    // reference: tx hash -> set of unspent output indexes
    std::map<Hash256, std::set<std::uint32_t>> ref;
    for (const auto& b : blocks) {
        p.apply_block(b);
        for (const auto& tx : b.txs) {
            if (!tx.is_coinbase()) {
                for (const auto& in : tx.inputs) {
                    ref[in.tx].erase(in.index);
                    if (ref[in.tx].empty()) ref.erase(in.tx);
                }
            }
            for (std::uint32_t i = 0; i < tx.outputs.size(); ++i) ref[tx.hash].insert(i);
        }
        ASSERT_EQ(p.utxo_size(), ref.size()) << "height " << b.height;
    }
    for (const auto& [hash, outs] : ref) {
        const UtxoEntry* e = p.utxo(hash);
        ASSERT_NE(e, nullptr);
        EXPECT_EQ(e->unspent, outs.size());
    }
    p.save();
}

TEST(Parser, ResolveAddressDeduplicates)
{
    TempDir dir;
    Parser p = Parser::open(dir.path(), quiet_options());
    auto a = p.resolve_address(pkh(1));
    auto b = p.resolve_address(pkh(1));
    auto c = p.resolve_address(pkh(2));
    EXPECT_TRUE(a.first_seen);
    EXPECT_FALSE(b.first_seen);
    EXPECT_EQ(a.ref, b.ref);
    EXPECT_NE(a.ref, c.ref);
    EXPECT_TRUE(p.cache().is_pinned(std::string_view(reinterpret_cast<const char*>(canonical_address_key(pkh(1)).data()), 21)));
}

TEST(Parser, TinyCacheAssignsSameIdsAsUnbounded)
{
    std::mt19937_64 rng(99);
    std::vector<ScriptDescriptor> keys;
    for (int i = 0; i < 10000; ++i) keys.push_back(pkh(rng() % 4000));

    auto run = [&](std::uint64_t cache_bytes) {
        TempDir dir;
        ParserOptions o = quiet_options();
        o.cache_bytes = cache_bytes;
        o.bloom_expected = 256;
        Parser p = Parser::open(dir.path(), o);
        p.index().begin();
        std::vector<std::uint32_t> ids;
        for (const auto& k : keys) ids.push_back(p.resolve_address(k).ref.id);
        p.index().commit();
        return ids;
    };
    auto tiny = run(10 * AddressCache::kEntryCost);
    auto unbounded = run(1ull << 30);
    EXPECT_EQ(tiny, unbounded);

    // and both equal a plain first-appearance numbering
    std::map<Hash160, std::uint32_t> oracle;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        auto [it, fresh] = oracle.emplace(keys[i].hash, static_cast<std::uint32_t>(oracle.size()));
        ASSERT_EQ(tiny[i], it->second);
    }
}

TEST(Parser, BloomNegativesSkipTheStore)
{
    TempDir dir;
    ParserOptions o = quiet_options();
    o.cache_bytes = 0;
    Parser p = Parser::open(dir.path(), o);
    p.index().begin();
    for (int i = 0; i < 500; ++i) p.resolve_address(pkh(i));
    EXPECT_GE(p.bloom_skips(), 480u);
    for (int i = 0; i < 500; ++i) EXPECT_FALSE(p.resolve_address(pkh(i)).first_seen);
    p.index().commit();
}

TEST(Parser, NestedAndMultisigPayloadsRecorded)
{
    TempDir dir;
    {
        Parser p = Parser::open(dir.path(), quiet_options());
        ImportTx cb = coinbase_tx(1, 50, p2sh(1, pkh(9)));
        cb.outputs.push_back({1, multisig(2, {1, 2, 3})});
        p.apply_block(make_block(0, {cb}));
        p.save();
    }
    DataLayout layout(dir.path());
    auto sh = ScriptTable::open(layout, AddressType::scripthash);
    auto payload = decode_payload(AddressType::scripthash, sh.read(0));
    const auto& shp = std::get<ScriptHashPayload>(payload.data);
    ASSERT_TRUE(shp.nested.has_value());
    EXPECT_EQ(shp.nested->type, AddressType::pubkeyhash);
    auto pk = ScriptTable::open(layout, AddressType::pubkeyhash);
    EXPECT_EQ(std::get<PubkeyPayload>(decode_payload(AddressType::pubkeyhash, pk.read(shp.nested->id)).data).hash, key_of(9));

    auto ms = ScriptTable::open(layout, AddressType::multisig);
    auto msp = std::get<MultisigPayload>(decode_payload(AddressType::multisig, ms.read(0)).data);
    EXPECT_EQ(msp.required, 2);
    EXPECT_EQ(msp.key_ids, (std::vector<std::uint32_t>{0, 1, 2}));
    auto keys = ScriptTable::open(layout, AddressType::pubkey);
    EXPECT_EQ(keys.count(), 3u);
}

TEST(Parser, IncrementalEqualsBatch)
{
    auto blocks = generate_synthetic_chain(small_params(12, 100));
    TempDir full, split;
    parse_blocks(blocks, full.path());
    parse_blocks(slice(blocks, 0, 50), split.path());
    VectorSource rest(slice(blocks, 50, 100));
    update_chain(rest, split.path(), quiet_options());
    std::string diff;
    EXPECT_TRUE(core_files_equal(DataLayout(full.path()), DataLayout(split.path()), &diff)) << diff;
    EXPECT_EQ(read_file(DataLayout(full.path()).parser_state()), read_file(DataLayout(split.path()).parser_state()));
}

TEST(Parser, EmptyUpdateChangesNothing)
{
    TempDir dir;
    parse_blocks(generate_synthetic_chain(small_params(12, 20)), dir.path());
    DataLayout layout(dir.path());
    std::vector<Bytes> before;
    for (const auto& f : layout.core_files()) before.push_back(read_file(f));
    Bytes state = read_file(layout.parser_state());
    VectorSource none({});
    update_chain(none, dir.path(), quiet_options());
    auto files = layout.core_files();
    for (std::size_t i = 0; i < files.size(); ++i) EXPECT_EQ(read_file(files[i]), before[i]) << files[i];
    EXPECT_EQ(read_file(layout.parser_state()), state);
}

TEST(Parser, UpdateOnlyTouchesLinkedIdsOfOldOutputs)
{
    TempDir dir;
    std::vector<ImportBlock> blocks = {
        make_block(0, {coinbase_tx(1, 50, pkh(1))}),
        make_block(1, {coinbase_tx(2, 50, pkh(2))}),
    };
    parse_blocks(blocks, dir.path());
    DataLayout layout(dir.path());
    Bytes before = read_file(layout.txdata());
    VectorSource more({make_block(2, {coinbase_tx(3, 50, pkh(3)), spend_tx(4, {{hash_of(1), 0}}, {{40, pkh(4)}})})});
    update_chain(more, dir.path(), quiet_options());
    Bytes after = read_file(layout.txdata());
    ASSERT_GT(after.size(), before.size());
    std::vector<std::size_t> changed;
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (before[i] != after[i]) changed.push_back(i);
    }
    // tx 0's only output starts right after its 12-byte header
    std::size_t linked = kFileHeaderSize + kTxHeaderSize;
    EXPECT_EQ(changed, (std::vector<std::size_t>{linked, linked + 1, linked + 2, linked + 3}));
}

TEST(Parser, RevertZeroIsNoOp)
{
    TempDir dir;
    parse_blocks(generate_synthetic_chain(small_params(3, 10)), dir.path());
    DataLayout layout(dir.path());
    Bytes data = read_file(layout.txdata());
    revert_blocks(dir.path(), 0, quiet_options());
    EXPECT_EQ(read_file(layout.txdata()), data);
}

TEST(Parser, RevertThenReapplyIsIdentical)
{
    auto blocks = generate_synthetic_chain(small_params(31, 100));
    TempDir full, work;
    parse_blocks(blocks, full.path());
    parse_blocks(blocks, work.path());
    revert_blocks(work.path(), 3, quiet_options());
    TempDir truncated;
    parse_blocks(slice(blocks, 0, 97), truncated.path());
    std::string diff;
    EXPECT_TRUE(core_files_equal(DataLayout(truncated.path()), DataLayout(work.path()), &diff)) << diff;

    VectorSource again(slice(blocks, 97, 100));
    update_chain(again, work.path(), quiet_options());
    EXPECT_TRUE(core_files_equal(DataLayout(full.path()), DataLayout(work.path()), &diff)) << diff;
    // restored utxo entries must not carry stray bits past their outputs
    EXPECT_EQ(parser_state_without_bloom(full.path()), parser_state_without_bloom(work.path()));
}

TEST(Parser, ForkReplacesTip)
{
    auto base = small_params(31, 100);
    auto forked_params = base;
    forked_params.blocks = 101;
    forked_params.fork = ForkSpec{97, 777};
    auto blocks = generate_synthetic_chain(base);
    auto forked = generate_synthetic_chain(forked_params);

    TempDir work, reference;
    parse_blocks(blocks, work.path());
    // explicit revert then apply the 4-block branch
    revert_blocks(work.path(), 3, quiet_options());
    VectorSource branch(slice(forked, 97, 101));
    update_chain(branch, work.path(), quiet_options());
    parse_blocks(forked, reference.path());
    std::string diff;
    EXPECT_TRUE(core_files_equal(DataLayout(reference.path()), DataLayout(work.path()), &diff)) << diff;
    EXPECT_EQ(parser_state_without_bloom(reference.path()), parser_state_without_bloom(work.path()));

    // a stream that starts below the tip reverts automatically
    TempDir autowork;
    parse_blocks(blocks, autowork.path());
    VectorSource branch2(slice(forked, 97, 101));
    update_chain(branch2, autowork.path(), quiet_options());
    EXPECT_TRUE(core_files_equal(DataLayout(reference.path()), DataLayout(autowork.path()), &diff)) << diff;

    // the index follows: the orphaned tip's hashes are gone
    Parser p = Parser::open(autowork.path(), quiet_options());
    EXPECT_FALSE(p.index().tx_id(blocks[98].txs[0].hash).has_value());
    EXPECT_TRUE(p.index().tx_id(forked[98].txs[0].hash).has_value());
}

TEST(Parser, RevertBoundsChecked)
{
    TempDir dir;
    parse_blocks(generate_synthetic_chain(small_params(3, 10)), dir.path());
    EXPECT_EQ(kind_of([&] { revert_blocks(dir.path(), 11, quiet_options()); }), ErrorKind::range);
    TempDir deep;
    parse_blocks(generate_synthetic_chain(small_params(3, 60)), deep.path());
    // only reorg_margin + retention = 38 undo logs are kept
    EXPECT_EQ(kind_of([&] { revert_blocks(deep.path(), 39, quiet_options()); }), ErrorKind::range);
    revert_blocks(deep.path(), 38, quiet_options());
}

TEST(Parser, RevertWholeShortChain)
{
    auto blocks = generate_synthetic_chain(small_params(3, 10));
    TempDir dir;
    parse_blocks(blocks, dir.path());
    revert_blocks(dir.path(), 10, quiet_options());
    Parser p = Parser::open(dir.path(), quiet_options());
    EXPECT_EQ(p.last_height(), -1);
    EXPECT_EQ(p.stats(), ChainStats{});
    EXPECT_EQ(p.utxo_size(), 0u);
}

TEST(Parser, CacheBudgetDoesNotChangeOutput)
{
    auto blocks = generate_synthetic_chain(small_params(17, 150));
    TempDir big, none;
    ParserOptions a = quiet_options();
    a.cache_bytes = 1ull << 28;
    ParserOptions b = quiet_options();
    b.cache_bytes = 0;
    b.bloom_expected = 8;
    parse_blocks(blocks, big.path(), a);
    parse_blocks(blocks, none.path(), b);
    std::string diff;
    EXPECT_TRUE(core_files_equal(DataLayout(big.path()), DataLayout(none.path()), &diff)) << diff;
}

TEST(Parser, PipelinedEqualsDirect)
{
    auto blocks = generate_synthetic_chain(small_params(5, 60));
    TempDir direct, piped;
    parse_blocks(blocks, direct.path());
    ParserOptions o = quiet_options();
    o.pipelined = true;
    parse_blocks(blocks, piped.path(), o);
    EXPECT_TRUE(core_files_equal(DataLayout(direct.path()), DataLayout(piped.path())));
}

TEST(Parser, SecondWriterLockedOut)
{
    TempDir dir;
    Parser p = Parser::open(dir.path(), quiet_options());
    EXPECT_EQ(kind_of([&] { Parser::open(dir.path(), quiet_options()); }), ErrorKind::storage);
}

TEST(IndexStore, HashIdRoundTripOnSyntheticChain)
{
    auto blocks = generate_synthetic_chain(small_params(8, 300));
    TempDir dir;
    ChainStats s = parse_blocks(blocks, dir.path());
    ASSERT_GE(s.n_tx, 1000u);
    auto index = IndexStore::open(DataLayout(dir.path()).index_dir(), 1 << 20, true);
    std::uint32_t id = 0;
    for (const auto& b : blocks) {
        for (const auto& tx : b.txs) {
            auto found = index.tx_id(tx.hash);
            ASSERT_TRUE(found.has_value());
            EXPECT_EQ(*found, id);
            EXPECT_EQ(index.tx_hash(id), tx.hash);
            ++id;
        }
    }
    EXPECT_FALSE(index.tx_id(hash_of(0xDEAD)).has_value());
    EXPECT_FALSE(index.tx_hash(id).has_value());
}

TEST(IndexStore, AddressRoundTripAfterReopen)
{
    TempDir dir;
    Bytes key = canonical_address_key(multisig(2, {1, 2, 3}));
    {
        auto index = IndexStore::open(dir.path());
        index.put_address({AddressType::multisig, 0}, key);
    }
    auto index = IndexStore::open(dir.path(), 1 << 20, true);
    auto ref = index.address_ref(key);
    ASSERT_TRUE(ref.has_value());
    EXPECT_EQ(*ref, (AddressRef{AddressType::multisig, 0}));
    EXPECT_EQ(index.address_key(*ref), key);
    EXPECT_FALSE(index.address_key({AddressType::multisig, 1}).has_value());
}

TEST(BloomFilter, NoFalseNegativesAndDesignFpr)
{
    BloomFilter f(10000, 0.01);
    for (std::uint64_t i = 0; i < 10000; ++i) f.insert(canonical_address_key(pkh(i)));
    for (std::uint64_t i = 0; i < 10000; ++i) ASSERT_TRUE(f.possibly_contains(canonical_address_key(pkh(i))));
    std::size_t fp = 0;
    const std::size_t probes = 100000;
    for (std::uint64_t i = 0; i < probes; ++i) fp += f.possibly_contains(canonical_address_key(pkh(1'000'000 + i)));
    double observed = static_cast<double>(fp) / probes;
    EXPECT_LE(observed, 2 * f.theoretical_fpr());
    EXPECT_NEAR(f.theoretical_fpr(), 0.01, 0.002);
}

TEST(BloomFilter, SerializeRoundTrip)
{
    BloomFilter f(100, 0.01);
    f.insert(canonical_address_key(pkh(1)));
    BloomFilter g = BloomFilter::deserialize(f.serialize());
    EXPECT_TRUE(g.possibly_contains(canonical_address_key(pkh(1))));
    EXPECT_EQ(g.inserted(), 1u);
    EXPECT_EQ(g.bit_count(), f.bit_count());
}

TEST(AddressCache, LruBoundAndPinning)
{
    AddressCache c(2);
    c.insert("a", 1, false);
    c.insert("b", 2, false);
    EXPECT_EQ(c.lookup("a"), 1u); // second sighting pins "a"
    EXPECT_TRUE(c.is_pinned("a"));
    c.insert("c", 3, false);
    c.insert("d", 4, false);
    EXPECT_LE(c.lru_size(), 2u);
    EXPECT_FALSE(c.lookup("b").has_value());
    EXPECT_EQ(c.lookup("a"), 1u);
    EXPECT_EQ(c.evictions(), 1u);
}
