// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/errors.hpp>
#include <chainlens/importer.hpp>

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

namespace chainlens {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

Bytes canonical_address_key(const ScriptDescriptor& script)
{
    Bytes key;
    key.reserve(2 + 20 * std::max<std::size_t>(1, script.keys.size()) + script.raw.size());
    key.push_back(code(script.type));
    switch (script.type) {
    case AddressType::pubkey:
    case AddressType::pubkeyhash:
    case AddressType::scripthash:
        key.insert(key.end(), script.hash.begin(), script.hash.end());
        break;
    case AddressType::multisig:
        key.push_back(script.required);
        key.push_back(static_cast<std::uint8_t>(script.keys.size()));
        for (const auto& k : script.keys) key.insert(key.end(), k.begin(), k.end());
        break;
    case AddressType::nulldata:
    case AddressType::nonstandard:
        key.insert(key.end(), script.raw.begin(), script.raw.end());
        break;
    }
    return key;
}

bool ImportInput::is_coinbase_marker() const noexcept
{
    return index == kCoinbaseIndex && std::all_of(tx.begin(), tx.end(), [](std::uint8_t b) { return b == 0; });
}

// ---------------------------------------------------------------------------
// JSON codec

namespace {

ordered_json script_to_json(const ScriptDescriptor& s)
{
    ordered_json j;
    j["type"] = std::string(type_name(s.type));
    switch (s.type) {
    case AddressType::pubkey:
    case AddressType::pubkeyhash:
        j["hash"] = to_hex(s.hash);
        if (!s.pubkey.empty()) j["pubkey"] = to_hex(s.pubkey);
        break;
    case AddressType::scripthash:
        j["hash"] = to_hex(s.hash);
        if (!s.redeem.empty()) j["redeem"] = script_to_json(s.redeem.front());
        break;
    case AddressType::multisig: {
        j["m"] = s.required;
        auto keys = ordered_json::array();
        for (const auto& k : s.keys) keys.push_back(to_hex(k));
        j["keys"] = std::move(keys);
        break;
    }
    case AddressType::nulldata:
    case AddressType::nonstandard:
        j["hex"] = to_hex(s.raw);
        break;
    }
    return j;
}

class JsonReader {
public:
    explicit JsonReader(std::uint64_t line) : m_line(line) {}

    [[noreturn]] void fail(const std::string& what) const
    {
        throw ParseError("line " + std::to_string(m_line) + ": " + what, m_line);
    }

    const json& field(const json& obj, const char* name) const
    {
        if (!obj.is_object()) fail(std::string("expected object holding '") + name + "'");
        auto it = obj.find(name);
        if (it == obj.end()) fail(std::string("missing field '") + name + "'");
        return *it;
    }

    std::uint64_t unsigned_field(const json& obj, const char* name, std::uint64_t limit) const
    {
        const json& v = field(obj, name);
        if (!v.is_number_integer()) fail(std::string("field '") + name + "' must be an integer");
        if (!v.is_number_unsigned() && v.get<std::int64_t>() < 0) fail(std::string("field '") + name + "' must be nonnegative");
        auto out = v.get<std::uint64_t>();
        if (out > limit) fail(std::string("field '") + name + "' out of range");
        return out;
    }

    std::int64_t signed_field(const json& obj, const char* name) const
    {
        const json& v = field(obj, name);
        if (!v.is_number_integer()) fail(std::string("field '") + name + "' must be an integer");
        if (v.is_number_unsigned() && v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) {
            fail(std::string("field '") + name + "' out of range");
        }
        return v.get<std::int64_t>();
    }

    const std::string& string_field(const json& obj, const char* name) const
    {
        const json& v = field(obj, name);
        if (!v.is_string()) fail(std::string("field '") + name + "' must be a string");
        return v.get_ref<const std::string&>();
    }

    template <std::size_t N>
    std::array<std::uint8_t, N> fixed_hex(const std::string& text, const char* name) const
    {
        auto v = fixed_from_hex<N>(text);
        if (!v) fail(std::string("field '") + name + "' must be " + std::to_string(2 * N) + " hex characters");
        return *v;
    }

    Bytes hex(const std::string& text, const char* name) const
    {
        auto v = from_hex(text);
        if (!v) fail(std::string("field '") + name + "' is not valid hex");
        return *v;
    }

    ScriptDescriptor script(const json& j, int depth = 0) const
    {
        ScriptDescriptor s;
        const std::string& tname = string_field(j, "type");
        auto type = parse_type_name(tname);
        if (!type) fail("unknown script type '" + tname + "'");
        s.type = *type;
        switch (s.type) {
        case AddressType::pubkey:
        case AddressType::pubkeyhash:
            s.hash = fixed_hex<20>(string_field(j, "hash"), "hash");
            if (j.contains("pubkey")) s.pubkey = hex(string_field(j, "pubkey"), "pubkey");
            if (s.pubkey.size() > 0xFF) fail("public key longer than 255 bytes");
            break;
        case AddressType::scripthash:
            s.hash = fixed_hex<20>(string_field(j, "hash"), "hash");
            if (j.contains("redeem")) {
                if (depth > 0) fail("nested scripthash redeem scripts are not supported");
                s.redeem.push_back(script(j["redeem"], depth + 1));
                if (s.redeem.front().type == AddressType::scripthash) fail("redeem script cannot be scripthash");
            }
            break;
        case AddressType::multisig: {
            const json& keys = field(j, "keys");
            if (!keys.is_array()) fail("field 'keys' must be an array");
            for (const auto& k : keys) {
                if (!k.is_string()) fail("multisig keys must be hex strings");
                s.keys.push_back(fixed_hex<20>(k.get<std::string>(), "keys"));
            }
            std::uint64_t m = unsigned_field(j, "m", 255);
            if (s.keys.empty() || s.keys.size() > 255 || m < 1 || m > s.keys.size()) {
                fail("multisig requires 1 <= m <= n <= 255");
            }
            s.required = static_cast<std::uint8_t>(m);
            break;
        }
        case AddressType::nulldata:
        case AddressType::nonstandard:
            s.raw = hex(string_field(j, "hex"), "hex");
            break;
        }
        return s;
    }

private:
    std::uint64_t m_line;
};

} // namespace

std::string to_jsonl(const ImportBlock& block)
{
    ordered_json j;
    j["hash"] = to_hex(block.hash);
    j["height"] = block.height;
    j["time"] = block.time;
    auto txs = ordered_json::array();
    for (const auto& tx : block.txs) {
        ordered_json t;
        t["hash"] = to_hex(tx.hash);
        t["size"] = tx.size;
        t["locktime"] = tx.locktime;
        auto ins = ordered_json::array();
        for (const auto& in : tx.inputs) {
            ordered_json i;
            i["tx"] = to_hex(in.tx);
            i["idx"] = in.index;
            ins.push_back(std::move(i));
        }
        t["inputs"] = std::move(ins);
        auto outs = ordered_json::array();
        for (const auto& out : tx.outputs) {
            ordered_json o;
            o["value"] = out.value;
            o["script"] = script_to_json(out.script);
            outs.push_back(std::move(o));
        }
        t["outputs"] = std::move(outs);
        txs.push_back(std::move(t));
    }
    j["txs"] = std::move(txs);
    return j.dump();
}

ImportBlock block_from_json(std::string_view text, std::uint64_t line)
{
    JsonReader r(line);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError("line " + std::to_string(line) + ": malformed JSON: " + e.what(), line, e.byte);
    }
    ImportBlock b;
    b.hash = r.fixed_hex<32>(r.string_field(j, "hash"), "hash");
    b.height = static_cast<std::uint32_t>(r.unsigned_field(j, "height", 0xFFFFFFFEu));
    b.time = r.signed_field(j, "time");
    const json& txs = r.field(j, "txs");
    if (!txs.is_array()) r.fail("field 'txs' must be an array");
    if (txs.empty()) r.fail("block has no transactions");
    for (const auto& tj : txs) {
        ImportTx tx;
        tx.hash = r.fixed_hex<32>(r.string_field(tj, "hash"), "hash");
        tx.size = static_cast<std::uint32_t>(r.unsigned_field(tj, "size", 0xFFFFFFFFu));
        tx.locktime = static_cast<std::uint32_t>(r.unsigned_field(tj, "locktime", 0xFFFFFFFFu));
        const json& ins = r.field(tj, "inputs");
        if (!ins.is_array()) r.fail("field 'inputs' must be an array");
        for (const auto& ij : ins) {
            ImportInput in;
            in.tx = r.fixed_hex<32>(r.string_field(ij, "tx"), "tx");
            in.index = static_cast<std::uint32_t>(r.unsigned_field(ij, "idx", 0xFFFFFFFFu));
            tx.inputs.push_back(in);
        }
        const json& outs = r.field(tj, "outputs");
        if (!outs.is_array()) r.fail("field 'outputs' must be an array");
        for (const auto& oj : outs) {
            ImportOutput out;
            out.value = r.unsigned_field(oj, "value", kValueLimit - 1);
            out.script = r.script(r.field(oj, "script"));
            tx.outputs.push_back(std::move(out));
        }
        if (tx.inputs.empty()) r.fail("transaction has no inputs");
        if (tx.inputs.size() > 0xFFFF || tx.outputs.size() > 0xFFFF) r.fail("transaction has more than 65535 inputs or outputs");
        bool marker = std::any_of(tx.inputs.begin(), tx.inputs.end(), [](const ImportInput& i) { return i.is_coinbase_marker(); });
        if (marker && !tx.is_coinbase()) r.fail("coinbase marker mixed with regular inputs");
        b.txs.push_back(std::move(tx));
    }
    if (!b.txs.front().is_coinbase()) r.fail("first transaction of a block must be the coinbase");
    for (std::size_t i = 1; i < b.txs.size(); ++i) {
        if (b.txs[i].is_coinbase()) r.fail("coinbase transaction after the first position");
    }
    return b;
}

std::optional<ImportBlock> VectorSource::next()
{
    if (m_pos >= m_blocks.size()) return std::nullopt;
    return std::move(m_blocks[m_pos++]);
}

JsonlBlockReader::JsonlBlockReader(const fs::path& path) : m_in(path), m_path(path)
{
    if (!m_in) throw Error(ErrorKind::storage, "cannot open import file " + path.string());
}

std::optional<ImportBlock> JsonlBlockReader::next()
{
    std::string line;
    while (std::getline(m_in, line)) {
        ++m_line;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ImportBlock b = block_from_json(line, m_line);
        if (m_last_height && b.height != *m_last_height + 1) {
            throw Error(ErrorKind::structure, "line " + std::to_string(m_line) + ": height " + std::to_string(b.height) +
                                                  " does not follow " + std::to_string(*m_last_height));
        }
        m_last_height = b.height;
        return b;
    }
    if (m_in.bad()) throw Error(ErrorKind::storage, "read failed on " + m_path.string());
    return std::nullopt;
}

std::vector<ImportBlock> read_import_blocks(const fs::path& path)
{
    JsonlBlockReader reader(path);
    std::vector<ImportBlock> out;
    while (auto b = reader.next()) out.push_back(std::move(*b));
    return out;
}

void write_import_blocks(const fs::path& path, BlockSource& source)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::storage, "cannot create " + path.string());
    while (auto b = source.next()) out << to_jsonl(*b) << '\n';
    if (!out) throw Error(ErrorKind::storage, "write failed on " + path.string());
}

// ---------------------------------------------------------------------------
// Pipeline

PipelinedSource::PipelinedSource(BlockSource& upstream, std::size_t capacity)
    : m_upstream(upstream), m_capacity(std::max<std::size_t>(1, capacity))
{
    m_thread = std::thread([this] { produce(); });
}

PipelinedSource::~PipelinedSource()
{
    {
        std::lock_guard lock(m_mutex);
        m_stop = true;
    }
    m_not_full.notify_all();
    if (m_thread.joinable()) m_thread.join();
}

void PipelinedSource::produce()
{
    try {
        while (true) {
            auto b = m_upstream.next();
            std::unique_lock lock(m_mutex);
            if (!b) break;
            m_not_full.wait(lock, [&] { return m_stop || m_queue.size() < m_capacity; });
            if (m_stop) return;
            m_queue.push_back(std::move(*b));
            lock.unlock();
            m_not_empty.notify_one();
        }
    } catch (...) {
        std::lock_guard lock(m_mutex);
        m_error = std::current_exception();
    }
    {
        std::lock_guard lock(m_mutex);
        m_done = true;
    }
    m_not_empty.notify_all();
}

std::optional<ImportBlock> PipelinedSource::next()
{
    std::unique_lock lock(m_mutex);
    m_not_empty.wait(lock, [&] { return !m_queue.empty() || m_done; });
    if (!m_queue.empty()) {
        ImportBlock b = std::move(m_queue.front());
        m_queue.pop_front();
        lock.unlock();
        m_not_full.notify_one();
        return b;
    }
    if (m_error) std::rethrow_exception(m_error);
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Synthetic chains

std::uint64_t DeterministicRng::below(std::uint64_t bound)
{
    if (bound <= 1) return 0;
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
        v = next();
    } while (v >= limit);
    return v % bound;
}

std::uint32_t DeterministicRng::in_range(CountRange r)
{
    if (r.max <= r.min) return r.min;
    return r.min + static_cast<std::uint32_t>(below(std::uint64_t{r.max} - r.min + 1));
}

double DeterministicRng::unit()
{
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

namespace {
constexpr std::size_t kMaxRememberedScripts = 1 << 16;
constexpr std::size_t kMaxRememberedKeys = 1 << 12;
constexpr std::uint64_t kMaxFee = 200'000;
} // namespace

SyntheticChain::SyntheticChain(SynthParams params) : m_params(std::move(params)), m_rng(m_params.seed)
{
    auto bad = [](const std::string& what) { throw Error(ErrorKind::generation, what); };
    if (m_params.address_reuse_rate < 0 || m_params.address_reuse_rate > 1) bad("address_reuse_rate must be in [0,1]");
    if (m_params.coinjoin_rate < 0 || m_params.coinjoin_rate > 1) bad("coinjoin_rate must be in [0,1]");
    if (m_params.txs_per_block.min < 1 || m_params.txs_per_block.max < m_params.txs_per_block.min) bad("invalid txs_per_block range");
    if (m_params.fan_in.min < 1 || m_params.fan_in.max < m_params.fan_in.min) bad("invalid fan_in range");
    if (m_params.fan_out.min < 1 || m_params.fan_out.max < m_params.fan_out.min) bad("invalid fan_out range");
    if (m_params.fan_in.max > 0xFFFF || m_params.fan_out.max > 0xFFFF) bad("fan-in and fan-out are limited to 65535");
    if (m_params.coinbase_value == 0 || m_params.coinbase_value >= kValueLimit / 2) bad("invalid coinbase_value");
    const auto& mix = m_params.script_mix;
    double weights[] = {mix.pubkeyhash, mix.scripthash_multisig, mix.scripthash, mix.multisig, mix.pubkey, mix.nulldata, mix.nonstandard};
    double total = 0;
    for (double w : weights) {
        if (w < 0) bad("script mix weights must be nonnegative");
        total += w;
    }
    if (total <= 0) bad("script mix weights sum to zero");
}

Hash160 SyntheticChain::pick_key()
{
    if (!m_keys.empty() && m_rng.unit() < 0.5) return m_keys[m_rng.below(m_keys.size())];
    Hash160 k = m_rng.bytes<20>();
    if (m_keys.size() < kMaxRememberedKeys) {
        m_keys.push_back(k);
    } else {
        m_keys[m_rng.below(m_keys.size())] = k;
    }
    return k;
}

ScriptDescriptor SyntheticChain::fresh_script()
{
    const auto& mix = m_params.script_mix;
    double weights[] = {mix.pubkeyhash, mix.scripthash_multisig, mix.scripthash, mix.multisig, mix.pubkey, mix.nulldata, mix.nonstandard};
    double total = 0;
    for (double w : weights) total += w;
    double roll = m_rng.unit() * total;
    std::size_t pick = 0;
    for (; pick + 1 < std::size(weights); ++pick) {
        if (roll < weights[pick]) break;
        roll -= weights[pick];
    }

    auto multisig = [&] {
        ScriptDescriptor s;
        s.type = AddressType::multisig;
        std::uint32_t n = m_rng.in_range({1, 3});
        s.required = static_cast<std::uint8_t>(m_rng.in_range({1, n}));
        for (std::uint32_t i = 0; i < n; ++i) s.keys.push_back(pick_key());
        return s;
    };

    ScriptDescriptor s;
    switch (pick) {
    case 0:
        s.type = AddressType::pubkeyhash;
        s.hash = m_rng.bytes<20>();
        break;
    case 1:
        s.type = AddressType::scripthash;
        s.hash = m_rng.bytes<20>();
        s.redeem.push_back(multisig());
        break;
    case 2:
        s.type = AddressType::scripthash;
        s.hash = m_rng.bytes<20>();
        break;
    case 3:
        s = multisig();
        break;
    case 4: {
        s.type = AddressType::pubkey;
        s.hash = m_rng.bytes<20>();
        if (m_keys.size() < kMaxRememberedKeys) m_keys.push_back(s.hash);
        auto key = m_rng.bytes<33>();
        s.pubkey.assign(key.begin(), key.end());
        break;
    }
    case 5: {
        s.type = AddressType::nulldata;
        auto len = m_rng.below(41);
        for (std::uint64_t i = 0; i < len; ++i) s.raw.push_back(static_cast<std::uint8_t>(m_rng.next()));
        break;
    }
    default: {
        s.type = AddressType::nonstandard;
        auto len = 1 + m_rng.below(30);
        for (std::uint64_t i = 0; i < len; ++i) s.raw.push_back(static_cast<std::uint8_t>(m_rng.next()));
        break;
    }
    }
    return s;
}

ScriptDescriptor SyntheticChain::pick_output_script()
{
    if (!m_used_scripts.empty() && m_rng.unit() < m_params.address_reuse_rate) {
        return m_used_scripts[m_rng.below(m_used_scripts.size())];
    }
    ScriptDescriptor s = fresh_script();
    if (s.type != AddressType::nulldata) {
        if (m_used_scripts.size() < kMaxRememberedScripts) {
            m_used_scripts.push_back(s);
        } else {
            m_used_scripts[m_rng.below(m_used_scripts.size())] = s;
        }
    }
    return s;
}

void SyntheticChain::add_outputs(const ImportTx& tx)
{
    for (std::uint32_t i = 0; i < tx.outputs.size(); ++i) {
        if (tx.outputs[i].script.type == AddressType::nulldata) continue;
        m_utxos.push_back({tx.hash, i, tx.outputs[i].value});
    }
}

ImportTx SyntheticChain::make_coinbase(std::uint32_t height, std::uint64_t fees)
{
    ImportTx tx;
    tx.hash = m_rng.bytes<32>();
    tx.inputs.push_back({Hash256{}, kCoinbaseIndex});
    ScriptDescriptor script;
    do {
        script = pick_output_script();
    } while (script.type == AddressType::nulldata);
    tx.outputs.push_back({m_params.coinbase_value + fees, std::move(script)});
    tx.size = 100 + 34;
    tx.locktime = 0;
    if (m_params.keep_ledger) {
        SynthLedgerEntry e;
        e.hash = tx.hash;
        e.height = height;
        e.coinbase = true;
        e.inputs = tx.inputs;
        e.output_values = {tx.outputs.front().value};
        m_ledger.push_back(std::move(e));
    }
    return tx;
}

std::optional<ImportTx> SyntheticChain::make_payment(std::uint32_t height, std::uint64_t& fees)
{
    if (m_utxos.size() < m_params.fan_in.min) {
        throw Error(ErrorKind::generation, "height " + std::to_string(height) + ": fan-in demand of " +
                                               std::to_string(m_params.fan_in.min) + " exceeds " +
                                               std::to_string(m_utxos.size()) + " available outputs");
    }
    std::uint32_t n_in = std::min<std::uint64_t>(m_rng.in_range(m_params.fan_in), m_utxos.size());
    ImportTx tx;
    std::vector<std::uint64_t> in_values;
    std::uint64_t total_in = 0;
    for (std::uint32_t i = 0; i < n_in; ++i) {
        std::size_t pick = m_rng.below(m_utxos.size());
        Coin c = m_utxos[pick];
        m_utxos[pick] = m_utxos.back();
        m_utxos.pop_back();
        tx.inputs.push_back({c.tx, c.index});
        in_values.push_back(c.value);
        total_in += c.value;
    }

    std::uint64_t fee = m_rng.below(std::min<std::uint64_t>(total_in / 50, kMaxFee) + 1);
    std::uint64_t remaining = total_in - fee;
    std::vector<ScriptDescriptor> scripts;
    std::size_t spendable = 0;
    std::vector<std::uint64_t> out_values;
    bool coinjoin = m_params.coinjoin_rate > 0 && n_in >= 2 && m_rng.unit() < m_params.coinjoin_rate;
    if (coinjoin) {
        std::uint64_t denom = remaining / (2 * n_in);
        std::uint64_t rest = remaining - denom * n_in;
        for (std::uint32_t i = 0; i < n_in; ++i) {
            ScriptDescriptor s = fresh_script();
            while (s.type == AddressType::nulldata) s = fresh_script();
            out_values.push_back(denom);
            tx.outputs.push_back({denom, std::move(s)});
        }
        for (std::uint32_t i = 0; i + 1 < n_in; ++i) {
            std::uint64_t v = i + 2 == n_in ? rest : m_rng.below(rest + 1);
            rest -= v;
            ScriptDescriptor s = fresh_script();
            while (s.type == AddressType::nulldata) s = fresh_script();
            out_values.push_back(v);
            tx.outputs.push_back({v, std::move(s)});
        }
        remaining = 0;
    }
    std::uint32_t n_out = coinjoin ? 0 : m_rng.in_range(m_params.fan_out);
    for (std::uint32_t i = 0; i < n_out; ++i) {
        scripts.push_back(pick_output_script());
        if (scripts.back().type != AddressType::nulldata) ++spendable;
    }
    if (spendable == 0 && !coinjoin) {
        // keep the value somewhere spendable
        scripts.back() = fresh_script();
        while (scripts.back().type == AddressType::nulldata) scripts.back() = fresh_script();
        spendable = 1;
    }
    // Split `remaining` over the spendable outputs at random cut points.
    std::vector<std::uint64_t> cuts;
    for (std::size_t i = 0; i + 1 < spendable; ++i) cuts.push_back(m_rng.below(remaining + 1));
    cuts.push_back(0);
    cuts.push_back(remaining);
    std::sort(cuts.begin(), cuts.end());
    std::size_t k = 0;
    for (auto& s : scripts) {
        std::uint64_t v = 0;
        if (s.type != AddressType::nulldata) {
            v = cuts[k + 1] - cuts[k];
            ++k;
        }
        out_values.push_back(v);
        tx.outputs.push_back({v, std::move(s)});
    }

    tx.hash = m_rng.bytes<32>();
    tx.size = static_cast<std::uint32_t>(10 + 148 * tx.inputs.size() + 34 * tx.outputs.size());
    tx.locktime = m_rng.unit() < 0.1 ? height : 0;
    fees += fee;
    if (m_params.keep_ledger) {
        SynthLedgerEntry e;
        e.hash = tx.hash;
        e.height = height;
        e.fee = fee;
        e.inputs = tx.inputs;
        e.input_values = std::move(in_values);
        e.output_values = std::move(out_values);
        m_ledger.push_back(std::move(e));
    }
    return tx;
}

std::optional<ImportBlock> SyntheticChain::next()
{
    if (m_height >= m_params.blocks) return std::nullopt;
    std::uint32_t height = m_height++;
    if (m_params.fork && m_params.fork->height == height) m_rng = DeterministicRng(m_params.fork->seed);

    ImportBlock block;
    block.height = height;
    block.time = m_params.start_time + static_cast<std::int64_t>(height) * m_params.block_interval;
    block.hash = m_rng.bytes<32>();
    std::uint32_t n_tx = m_rng.in_range(m_params.txs_per_block);

    // The coinbase is emitted first but its value depends on the fees, and
    // its output only becomes spendable in the next block.
    std::size_t ledger_mark = m_ledger.size();
    std::vector<ImportTx> payments;
    std::uint64_t fees = 0;
    if (height > 0) {
        for (std::uint32_t i = 1; i < n_tx; ++i) {
            auto tx = make_payment(height, fees);
            if (!tx) break;
            add_outputs(*tx);
            payments.push_back(std::move(*tx));
        }
    }
    ImportTx coinbase = make_coinbase(height, fees);
    add_outputs(coinbase);
    if (m_params.keep_ledger) {
        // keep ledger order equal to block order
        std::rotate(m_ledger.begin() + static_cast<std::ptrdiff_t>(ledger_mark), m_ledger.end() - 1, m_ledger.end());
    }
    block.txs.push_back(std::move(coinbase));
    for (auto& tx : payments) block.txs.push_back(std::move(tx));
    return block;
}

std::vector<ImportBlock> generate_synthetic_chain(const SynthParams& params, std::vector<SynthLedgerEntry>* ledger)
{
    SynthParams p = params;
    if (ledger) p.keep_ledger = true;
    SyntheticChain chain(p);
    std::vector<ImportBlock> out;
    while (auto b = chain.next()) out.push_back(std::move(*b));
    if (ledger) *ledger = chain.ledger();
    return out;
}

// ---------------------------------------------------------------------------
// Dates and exchange rates

std::optional<std::int64_t> parse_date(std::string_view text)
{
    using namespace std::chrono;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    auto num = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
        int v = 0;
        for (std::size_t i = pos; i < pos + len; ++i) {
            if (text[i] < '0' || text[i] > '9') return std::nullopt;
            v = v * 10 + (text[i] - '0');
        }
        return v;
    };
    auto y = num(0, 4), m = num(5, 2), d = num(8, 2);
    if (!y || !m || !d) return std::nullopt;
    year_month_day ymd{year{*y}, month{static_cast<unsigned>(*m)}, day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) return std::nullopt;
    return sys_days{ymd}.time_since_epoch().count();
}

std::string format_date(std::int64_t days)
{
    using namespace std::chrono;
    year_month_day ymd{sys_days{std::chrono::days{days}}};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string format_month(std::int64_t unix_seconds)
{
    std::int64_t days = unix_seconds >= 0 ? unix_seconds / 86400 : -((-unix_seconds + 86399) / 86400);
    return format_date(days).substr(0, 7);
}

void RateSeries::add(std::int64_t day, const std::string& currency, double rate)
{
    if (!(rate > 0)) throw Error(ErrorKind::range, "exchange rate must be positive");
    auto& series = m_series[currency];
    if (!series.empty() && series.back().day >= day) {
        throw Error(ErrorKind::consistency, "exchange rate dates for " + currency + " must be strictly increasing");
    }
    series.push_back({day, rate});
}

double RateSeries::rate_at(std::int64_t day, const std::string& currency) const
{
    auto it = m_series.find(currency);
    if (it == m_series.end()) throw Error(ErrorKind::range, "no exchange rates for currency " + currency);
    const auto& series = it->second;
    auto pos = std::upper_bound(series.begin(), series.end(), day, [](std::int64_t d, const Entry& e) { return d < e.day; });
    if (pos == series.begin()) {
        throw Error(ErrorKind::range, "date " + format_date(day) + " precedes the first " + currency + " rate");
    }
    return std::prev(pos)->rate;
}

double RateSeries::convert(std::uint64_t value, std::int64_t day, const std::string& currency) const
{
    return static_cast<double>(value) * rate_at(day, currency) / static_cast<double>(kCoin);
}

RateSeries load_exchange_rates(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::storage, "cannot open exchange rate file " + path.string());
    RateSeries series;
    std::string line;
    std::uint64_t line_no = 0;
    bool header = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line != "date,currency,rate") throw ParseError("line 1: expected header date,currency,rate", line_no);
            continue;
        }
        std::stringstream ss(line);
        std::string date, currency, rate_text;
        if (!std::getline(ss, date, ',') || !std::getline(ss, currency, ',') || !std::getline(ss, rate_text)) {
            throw ParseError("line " + std::to_string(line_no) + ": expected three columns", line_no);
        }
        auto day = parse_date(date);
        if (!day) throw ParseError("line " + std::to_string(line_no) + ": bad date '" + date + "'", line_no);
        double rate = 0;
        try {
            std::size_t used = 0;
            rate = std::stod(rate_text, &used);
            if (used != rate_text.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw ParseError("line " + std::to_string(line_no) + ": bad rate '" + rate_text + "'", line_no);
        }
        if (currency.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty currency", line_no);
        try {
            series.add(*day, currency, rate);
        } catch (const Error& e) {
            throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), line_no);
        }
    }
    return series;
}

} // namespace chainlens
