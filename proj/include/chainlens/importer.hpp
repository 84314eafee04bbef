// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <chainlens/bytes.hpp>
#include <chainlens/chain_model.hpp>

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace chainlens {

/// Portable script description carried by the import format. Only the fields
/// relevant to `type` are meaningful.
struct ScriptDescriptor {
    AddressType type = AddressType::pubkeyhash;
    Hash160 hash{};                 // pubkey, pubkeyhash, scripthash
    Bytes pubkey;                   // pubkey, pubkeyhash (optional)
    std::uint8_t required = 0;      // multisig m
    std::vector<Hash160> keys;      // multisig key hashes, in script order
    std::vector<ScriptDescriptor> redeem;  // scripthash: zero or one nested script
    Bytes raw;                      // nulldata data / nonstandard script

    bool operator==(const ScriptDescriptor&) const = default;
};

/// Dedup key: type code byte followed by type-specific canonical bytes.
Bytes canonical_address_key(const ScriptDescriptor& script);

struct ImportInput {
    Hash256 tx{};
    std::uint32_t index = 0;

    bool is_coinbase_marker() const noexcept;
    bool operator==(const ImportInput&) const = default;
};

inline constexpr std::uint32_t kCoinbaseIndex = 0xFFFFFFFFu;

struct ImportOutput {
    std::uint64_t value = 0;
    ScriptDescriptor script;
    bool operator==(const ImportOutput&) const = default;
};

struct ImportTx {
    Hash256 hash{};
    std::uint32_t size = 0;
    std::uint32_t locktime = 0;
    std::vector<ImportInput> inputs;
    std::vector<ImportOutput> outputs;

    bool is_coinbase() const noexcept { return inputs.size() == 1 && inputs.front().is_coinbase_marker(); }
    bool operator==(const ImportTx&) const = default;
};

struct ImportBlock {
    Hash256 hash{};
    std::uint32_t height = 0;
    std::int64_t time = 0;
    std::vector<ImportTx> txs;

    bool operator==(const ImportBlock&) const = default;
};

/// One JSON object per line, keys in schema order.
std::string to_jsonl(const ImportBlock& block);
/// Throws ParseError naming `line` on any schema violation.
ImportBlock block_from_json(std::string_view text, std::uint64_t line);

/// Pull-based block stream feeding the parser.
class BlockSource {
public:
    virtual ~BlockSource() = default;
    virtual std::optional<ImportBlock> next() = 0;
};

class VectorSource : public BlockSource {
public:
    explicit VectorSource(std::vector<ImportBlock> blocks) : m_blocks(std::move(blocks)) {}
    std::optional<ImportBlock> next() override;

private:
    std::vector<ImportBlock> m_blocks;
    std::size_t m_pos = 0;
};

/// Streams a JSONL file line by line; never holds more than one block.
class JsonlBlockReader : public BlockSource {
public:
    explicit JsonlBlockReader(const std::filesystem::path& path);
    std::optional<ImportBlock> next() override;

private:
    std::ifstream m_in;
    std::filesystem::path m_path;
    std::uint64_t m_line = 0;
    std::optional<std::uint32_t> m_last_height;
};

std::vector<ImportBlock> read_import_blocks(const std::filesystem::path& path);
void write_import_blocks(const std::filesystem::path& path, BlockSource& source);

/// Runs `upstream` on a producer thread, handing blocks over through a
/// bounded queue. Producer errors resurface from next().
class PipelinedSource : public BlockSource {
public:
    PipelinedSource(BlockSource& upstream, std::size_t capacity = 64);
    ~PipelinedSource() override;
    std::optional<ImportBlock> next() override;

private:
    void produce();

    BlockSource& m_upstream;
    std::size_t m_capacity;
    std::mutex m_mutex;
    std::condition_variable m_not_empty;
    std::condition_variable m_not_full;
    std::deque<ImportBlock> m_queue;
    bool m_done = false;
    bool m_stop = false;
    std::exception_ptr m_error;
    std::thread m_thread;
};

// ---------------------------------------------------------------------------
// Deterministic synthetic chains

struct CountRange {
    std::uint32_t min = 1;
    std::uint32_t max = 1;
};

/// Relative weights for the script type of a freshly created output address.
struct ScriptMix {
    double pubkeyhash = 0.70;
    double scripthash_multisig = 0.08;
    double scripthash = 0.04;
    double multisig = 0.08;
    double pubkey = 0.05;
    double nulldata = 0.03;
    double nonstandard = 0.02;
};

struct ForkSpec {
    std::uint32_t height = 0;
    std::uint64_t seed = 0;
};

struct SynthParams {
    std::uint64_t seed = 1;
    std::uint32_t blocks = 0;
    CountRange txs_per_block{1, 8};
    CountRange fan_in{1, 3};
    CountRange fan_out{1, 3};
    double address_reuse_rate = 0.1;
    /// Share of multi-input payments shaped like a CoinJoin: k equal
    /// outputs to fresh addresses plus k - 1 change outputs.
    double coinjoin_rate = 0.0;
    std::uint64_t coinbase_value = 50 * kCoin;
    std::int64_t start_time = 1'483'228'800; // 2017-01-01
    std::int64_t block_interval = 600;
    ScriptMix script_mix;
    /// From this height on, the RNG is reseeded: a competing branch that
    /// shares every earlier block with the unforked chain.
    std::optional<ForkSpec> fork;
    bool keep_ledger = false;
};

/// Ground truth recorded by the generator for every transaction it emits.
struct SynthLedgerEntry {
    Hash256 hash{};
    std::uint32_t height = 0;
    bool coinbase = false;
    std::uint64_t fee = 0;
    std::vector<ImportInput> inputs;
    std::vector<std::uint64_t> input_values;
    std::vector<std::uint64_t> output_values;
};

/// Small deterministic RNG wrapper: mt19937_64 with our own range mapping so
/// streams are identical across standard library implementations.
class DeterministicRng {
public:
    explicit DeterministicRng(std::uint64_t seed) : m_engine(seed) {}
    std::uint64_t next() { return m_engine(); }
    /// Uniform in [0, bound).
    std::uint64_t below(std::uint64_t bound);
    std::uint32_t in_range(CountRange r);
    /// Uniform in [0, 1).
    double unit();
    template <std::size_t N>
    std::array<std::uint8_t, N> bytes()
    {
        std::array<std::uint8_t, N> out{};
        for (std::size_t i = 0; i < N; i += 8) {
            std::uint64_t v = next();
            for (std::size_t j = 0; j < 8 && i + j < N; ++j) out[i + j] = static_cast<std::uint8_t>(v >> (8 * j));
        }
        return out;
    }

private:
    std::mt19937_64 m_engine;
};

class SyntheticChain : public BlockSource {
public:
    explicit SyntheticChain(SynthParams params);
    std::optional<ImportBlock> next() override;

    const std::vector<SynthLedgerEntry>& ledger() const noexcept { return m_ledger; }

private:
    struct Coin {
        Hash256 tx{};
        std::uint32_t index = 0;
        std::uint64_t value = 0;
    };

    ScriptDescriptor fresh_script();
    ScriptDescriptor pick_output_script();
    Hash160 pick_key();
    ImportTx make_coinbase(std::uint32_t height, std::uint64_t fees);
    std::optional<ImportTx> make_payment(std::uint32_t height, std::uint64_t& fees);
    void add_outputs(const ImportTx& tx);

    SynthParams m_params;
    DeterministicRng m_rng;
    std::uint32_t m_height = 0;
    std::vector<Coin> m_utxos;
    std::vector<ScriptDescriptor> m_used_scripts;
    std::vector<Hash160> m_keys;
    std::vector<SynthLedgerEntry> m_ledger;
};

std::vector<ImportBlock> generate_synthetic_chain(const SynthParams& params,
                                                  std::vector<SynthLedgerEntry>* ledger = nullptr);

// ---------------------------------------------------------------------------
// Exchange rates

/// Days since 1970-01-01 for a YYYY-MM-DD string; nullopt if malformed.
std::optional<std::int64_t> parse_date(std::string_view text);
std::string format_date(std::int64_t days);
std::string format_month(std::int64_t unix_seconds);

class RateSeries {
public:
    struct Entry {
        std::int64_t day = 0;
        double rate = 0;
    };

    void add(std::int64_t day, const std::string& currency, double rate);
    /// Most recent rate at or before `day`; range error if none.
    double rate_at(std::int64_t day, const std::string& currency) const;
    /// value (base units) * rate / 1e8.
    double convert(std::uint64_t value, std::int64_t day, const std::string& currency) const;
    bool has_currency(const std::string& currency) const { return m_series.count(currency) != 0; }

private:
    std::map<std::string, std::vector<Entry>> m_series;
};

/// CSV with header date,currency,rate.
RateSeries load_exchange_rates(const std::filesystem::path& path);

} // namespace chainlens
