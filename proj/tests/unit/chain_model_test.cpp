// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/chain_model.hpp>
#include <chainlens/errors.hpp>
#include <chainlens/tables.hpp>

#include "../support/oracles.hpp"

#include <gtest/gtest.h>

#include <bitset>
#include <random>

using namespace chainlens;
using namespace chainlens::test;

namespace {

InOutRecord random_record(std::mt19937_64& rng)
{
    InOutRecord r;
    r.linked_tx_id = static_cast<std::uint32_t>(rng());
    r.address_id = static_cast<std::uint32_t>(rng());
    r.value = rng() & (kValueLimit - 1);
    r.address_type = static_cast<AddressType>(rng() % kAddressTypeCount);
    return r;
}

} // namespace

TEST(InOutCodec, ZeroRecordIsSixteenZeroBytes)
{
    InOutRecord r;
    auto bytes = encode_inout(r);
    for (auto b : bytes) EXPECT_EQ(b, 0);
}

TEST(InOutCodec, WorkedVector)
{
    InOutRecord r{7, 3, 50000, AddressType::pubkeyhash};
    auto bytes = encode_inout(r);
    EXPECT_EQ(to_hex(bytes), "070000000300000050c3000000000020");
    EXPECT_EQ(bytes, oracle_pack(7, 3, 50000, 2));
}

TEST(InOutCodec, MatchesBitOracleOnRandomFields)
{
    std::mt19937_64 rng(11);
    for (int i = 0; i < 5000; ++i) {
        InOutRecord r = random_record(rng);
        EXPECT_EQ(encode_inout(r), oracle_pack(r.linked_tx_id, r.address_id, r.value, code(r.address_type)));
    }
}

TEST(InOutCodec, ExtremeFieldsRoundTrip)
{
    InOutRecord r{kUnspent, 0xFFFFFFFFu, kValueLimit - 1, static_cast<AddressType>(15)};
    EXPECT_EQ(decode_inout(encode_inout(r)), r);
}

TEST(InOutCodec, RejectsOutOfRangeFields)
{
    InOutRecord r;
    r.value = kValueLimit;
    try {
        encode_inout(r);
        FAIL() << "expected range error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::range);
    }
    r.value = 0;
    r.address_type = static_cast<AddressType>(16);
    EXPECT_THROW(encode_inout(r), Error);
}

TEST(TxCodec, RecordLengths)
{
    EXPECT_EQ(tx_record_length(1, 2), 60u);
    EXPECT_EQ(tx_record_length(0, 1), 28u);
    TxRecord tx;
    tx.inputs.resize(1);
    tx.outputs.resize(2);
    Bytes buf;
    append_tx_record(tx, buf);
    EXPECT_EQ(buf.size(), 60u);
}

TEST(TxCodec, OutputsPrecedeInputs)
{
    TxRecord tx;
    tx.size = 250;
    tx.locktime = 9;
    tx.outputs.push_back({kUnspent, 1, 100, AddressType::pubkey});
    tx.inputs.push_back({4, 2, 300, AddressType::multisig});
    Bytes buf;
    append_tx_record(tx, buf);
    EXPECT_EQ(read_le<std::uint16_t>(buf.data() + 8), 1);
    EXPECT_EQ(read_le<std::uint16_t>(buf.data() + 10), 1);
    EXPECT_EQ(read_le<std::uint32_t>(buf.data() + 12), kUnspent);
    EXPECT_EQ(read_le<std::uint32_t>(buf.data() + 28), 4u);
    EXPECT_EQ(decode_tx_record(buf), tx);
}

TEST(TxCodec, RejectsTooManyInputs)
{
    TxRecord tx;
    tx.inputs.resize(65536);
    Bytes buf;
    EXPECT_THROW(append_tx_record(tx, buf), Error);
}

TEST(TxCodec, RandomRoundTrips)
{
    std::mt19937_64 rng(5);
    for (int i = 0; i < 2000; ++i) {
        TxRecord tx;
        tx.size = static_cast<std::uint32_t>(rng());
        tx.locktime = static_cast<std::uint32_t>(rng());
        auto n_in = rng() % 5;
        auto n_out = 1 + rng() % 5;
        for (std::uint64_t k = 0; k < n_in; ++k) tx.inputs.push_back(random_record(rng));
        for (std::uint64_t k = 0; k < n_out; ++k) tx.outputs.push_back(random_record(rng));
        Bytes buf;
        append_tx_record(tx, buf);
        ASSERT_EQ(buf.size(), tx_record_length(n_in, n_out));
        ASSERT_EQ(decode_tx_record(buf), tx);
    }
}

TEST(BlockCodec, FixedSizeRoundTrip)
{
    BlockRecord b{chainlens::test::hash_of(3), -5, 17, 4};
    auto bytes = encode_block(b);
    static_assert(std::tuple_size_v<decltype(bytes)> == 48);
    EXPECT_EQ(decode_block(bytes), b);
}

TEST(LayoutSizes, ZeroStats)
{
    auto s = predict_layout_sizes({});
    EXPECT_EQ(s.current, 0u);
    EXPECT_EQ(s.normalized, 0u);
    EXPECT_EQ(s.wide_ids, 0u);
    EXPECT_EQ(s.fee_cached, 0u);
}

TEST(LayoutSizes, SmallChainFormula)
{
    auto s = predict_layout_sizes({1000, 1500, 2500});
    EXPECT_EQ(s.current, 84000u);
}

TEST(LayoutSizes, BitcoinScaleTotals)
{
    // N_tx and N_out as published; N_in recovered from the published totals.
    ChainStats btc{243'000'000, 609'000'000, 663'000'000};
    auto s = predict_layout_sizes(btc);
    auto gb = [](std::uint64_t bytes) { return static_cast<double>(bytes) / 1e9; };
    EXPECT_NEAR(gb(s.current), 25.21, 0.005);
    EXPECT_NEAR(gb(s.normalized), 20.34, 0.005);
    EXPECT_NEAR(gb(s.wide_ids), 35.39, 0.005);
    EXPECT_NEAR(gb(s.fee_cached), 27.6, 0.05);
}

TEST(Payload, MultisigRoundTrip)
{
    ScriptPayload p{AddressType::multisig, MultisigPayload{2, {10, 11, 12}}};
    EXPECT_EQ(decode_payload(AddressType::multisig, encode_payload(p)), p);
}

TEST(Payload, NestedScripthashRoundTrip)
{
    ScriptPayload p{AddressType::scripthash, ScriptHashPayload{chainlens::test::key_of(4), AddressRef{AddressType::pubkeyhash, 77}}};
    EXPECT_EQ(decode_payload(AddressType::scripthash, encode_payload(p)), p);
}

TEST(Payload, NulldataFortyBytes)
{
    Bytes data(40);
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<std::uint8_t>(i * 37 + 1);
    ScriptPayload p{AddressType::nulldata, RawPayload{data}};
    EXPECT_EQ(decode_payload(AddressType::nulldata, encode_payload(p)), p);
}

TEST(Payload, MultisigBoundsChecked)
{
    ScriptPayload p{AddressType::multisig, MultisigPayload{3, {1, 2}}};
    EXPECT_THROW(encode_payload(p), Error);
    p.data = MultisigPayload{0, {1}};
    EXPECT_THROW(encode_payload(p), Error);
}

TEST(TxTable, AppendReadAndOffsets)
{
    TempDir dir;
    DataLayout layout(dir.path());
    auto table = TxTable::open(layout);
    std::vector<TxRecord> txs;
    std::mt19937_64 rng(8);
    for (int i = 0; i < 3; ++i) {
        TxRecord tx;
        tx.size = 100 + i;
        for (int k = 0; k <= i; ++k) tx.outputs.push_back({kUnspent, static_cast<std::uint32_t>(k), 5, AddressType::pubkeyhash});
        if (i > 0) tx.inputs.push_back({0, 0, 5, AddressType::pubkeyhash});
        EXPECT_EQ(table.append(tx), static_cast<std::uint32_t>(i));
        txs.push_back(tx);
    }
    EXPECT_EQ(table.read(1), txs[1]);
    for (std::uint32_t i = 0; i < 3; ++i) {
        EXPECT_EQ(table.offset(i + 1) - table.offset(i), tx_record_length(txs[i].inputs.size(), txs[i].outputs.size()));
    }
    table.flush();
    auto reopened = TxTable::open(layout);
    EXPECT_EQ(reopened.tx_count(), 3u);
    EXPECT_EQ(reopened.read(2), txs[2]);
}

TEST(TxTable, MarkOutputSpentIsLengthPreserving)
{
    TempDir dir;
    DataLayout layout(dir.path());
    {
        auto table = TxTable::open(layout);
        TxRecord tx;
        tx.outputs.push_back({kUnspent, 0, 5, AddressType::pubkeyhash});
        table.append(tx);
        for (int i = 0; i < 5; ++i) table.append(tx);
        table.flush();
    }
    Bytes before = read_file(layout.txdata());
    {
        auto table = TxTable::open(layout);
        table.mark_output_spent(0, 0, 5);
        EXPECT_EQ(table.read_output(0, 0).linked_tx_id, 5u);
        try {
            table.mark_output_spent(0, 0, 4);
            FAIL() << "expected consistency error";
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::consistency);
        }
        try {
            table.mark_output_spent(0, 1, 4);
            FAIL() << "expected range error";
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::range);
        }
        table.flush();
    }
    Bytes after = read_file(layout.txdata());
    ASSERT_EQ(before.size(), after.size());
    std::size_t differing = 0;
    for (std::size_t i = 0; i < before.size(); ++i) differing += before[i] != after[i];
    // 0xFFFFFFFF -> 5: all four bytes of the linked id change, nothing else
    EXPECT_EQ(differing, 4u);
    for (std::size_t i = 0; i < before.size(); ++i) {
        if (before[i] != after[i]) {
            EXPECT_GE(i, kFileHeaderSize + kTxHeaderSize);
            EXPECT_LT(i, kFileHeaderSize + kTxHeaderSize + 4);
        }
    }
}

TEST(TxTable, TruncateRestoresPrefix)
{
    TempDir dir;
    DataLayout layout(dir.path());
    auto table = TxTable::open(layout);
    TxRecord tx;
    tx.outputs.push_back({kUnspent, 0, 5, AddressType::pubkeyhash});
    table.append(tx);
    table.flush();
    Bytes data = read_file(layout.txdata());
    Bytes offs = read_file(layout.txoffsets());
    table.append(tx);
    table.append(tx);
    table.flush();
    table.truncate(1);
    table.flush();
    EXPECT_EQ(read_file(layout.txdata()), data);
    EXPECT_EQ(read_file(layout.txoffsets()), offs);
}

TEST(DataFiles, RejectsForeignMagic)
{
    TempDir dir;
    DataLayout layout(dir.path());
    Bytes junk = {'N', 'O', 'T', 'C', 'L', 'N', 'S', '!', 0, 0};
    write_file_atomic(layout.txdata(), junk);
    EXPECT_THROW(TxTable::open(layout), Error);
}

TEST(DirectoryLock, SecondWriterIsRefused)
{
    TempDir dir;
    DirectoryLock first(dir / ".lock");
    try {
        DirectoryLock second(dir / ".lock");
        FAIL() << "expected storage error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::storage);
    }
}
