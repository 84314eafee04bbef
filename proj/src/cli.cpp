// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/analyses.hpp>
#include <chainlens/cli.hpp>
#include <chainlens/clustering.hpp>
#include <chainlens/errors.hpp>
#include <chainlens/files.hpp>
#include <chainlens/mempool.hpp>
#include <chainlens/parser.hpp>
#include <chainlens/selector.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

namespace chainlens {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kReports = {
    "multisig-access", "multisig-insecure", "attack-sim", "ps-select", "block-gap", "gap-histogram", "fee-loss",
    "low-fee",         "wait-times",        "velocity",   "dormancy",  "cluster-sizes", "mean-fee",
};

struct Flags {
    std::string data_dir = ".";
    std::string input;
    std::string out;
    std::uint64_t cache_mb = 64;
    std::uint64_t index_cache_mb = IndexStore::kDefaultCacheBytes >> 20;
    std::uint32_t reorg_margin = kDefaultReorgMargin;
    unsigned threads = 0;
    std::uint64_t seed = 1;

    // verb specific
    std::string feed;
    std::string mempool_mode = "minimal";
    std::uint32_t blocks = 0;
    std::string expr;
    std::string heuristics;
    std::string tags;
    std::string report;
    std::string what = "txs";
    std::string wallet;
    std::uint64_t amount = 0;
    double lag_correction = 0;
    std::string miners;
    std::string miner;
    std::string intervals = "0,15,30,60,120";
    std::uint64_t block_size = 1'000'000;
    std::uint32_t bootstrap = 1000;
    std::int64_t from_height = 0;
    std::int64_t to_height = -1;
    std::string from_date;
    std::string to_date;
    std::uint32_t window_days = 30;
    std::uint32_t k = 4;
    std::vector<std::uint32_t> exclude;
    bool exclude_largest = false;
    MixSimParams sim;
};

void add_store_flags(CLI::App* cmd, Flags& f)
{
    cmd->add_option("--data-dir", f.data_dir, "Data directory")->capture_default_str();
    cmd->add_option("--out", f.out, "Write results to this file instead of stdout");
    cmd->add_option("--reorg-margin", f.reorg_margin, "Blocks hidden from views (d)")->capture_default_str();
    cmd->add_option("--threads", f.threads, "Worker threads, 0 = all cores")->capture_default_str();
    cmd->add_option("--index-cache-mb", f.index_cache_mb, "Index store cache")->capture_default_str();
}

void add_writer_flags(CLI::App* cmd, Flags& f)
{
    cmd->add_option("--cache-mb", f.cache_mb, "Parser address cache budget")->capture_default_str();
    cmd->add_option("--feed", f.feed, "Mempool feed to record after the blocks (txhash,unix_millis[,payload])");
    cmd->add_option("--mempool-mode", f.mempool_mode, "minimal or full")
        ->check(CLI::IsMember({"minimal", "full"}))
        ->capture_default_str();
}

ParserOptions parser_options(const Flags& f)
{
    ParserOptions o;
    o.cache_bytes = f.cache_mb << 20;
    o.index_cache_bytes = f.index_cache_mb << 20;
    o.reorg_margin = f.reorg_margin;
    return o;
}

MapReduceOptions mr_options(const Flags& f)
{
    MapReduceOptions o;
    o.threads = f.threads;
    return o;
}

ChainView open(const Flags& f) { return ChainView::open(f.data_dir, ViewOptions{f.reorg_margin}); }

MempoolLog load_log(const Flags& f)
{
    MempoolLog log = MempoolLog::load(f.data_dir);
    log.set_lag_correction(f.lag_correction);
    return log;
}

std::vector<std::string> split(std::string_view text, char sep)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::storage, "cannot open " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void record_if_requested(const Flags& f, std::ostream& out)
{
    if (f.feed.empty()) return;
    auto mode = parse_mempool_mode(f.mempool_mode);
    RecordSummary s = record_feed(f.data_dir, read_feed(f.feed), *mode);
    out << "feed_entries=" << s.feed_entries << "\nmatched=" << s.matched << "\npending=" << s.pending
        << "\nstored=" << s.stored << "\n";
}

void print_stats(const ChainStats& s, std::ostream& out)
{
    out << "n_tx=" << s.n_tx << "\nn_in=" << s.n_in << "\nn_out=" << s.n_out << "\n";
}

int cmd_parse(const Flags& f, std::ostream& out)
{
    JsonlBlockReader src(f.input);
    print_stats(parse_chain(src, f.data_dir, parser_options(f)), out);
    record_if_requested(f, out);
    return kExitOk;
}

int cmd_update(const Flags& f, std::ostream& out)
{
    if (f.input.empty() && f.feed.empty()) throw Error(ErrorKind::usage, "update needs --input, --feed or both");
    if (!f.input.empty()) {
        JsonlBlockReader src(f.input);
        print_stats(update_chain(src, f.data_dir, parser_options(f)), out);
    }
    record_if_requested(f, out);
    return kExitOk;
}

int cmd_revert(const Flags& f, std::ostream& out)
{
    revert_blocks(f.data_dir, f.blocks, parser_options(f));
    Parser p = Parser::open(f.data_dir, parser_options(f));
    out << "height=" << p.last_height() << "\n";
    return kExitOk;
}

int cmd_query(const Flags& f, std::ostream& out)
{
    SelectorExpr expr = SelectorExpr::parse(f.expr);
    ChainView view = open(f);
    std::string text;
    for (auto id : filter_expr(view, expr, mr_options(f))) text += std::to_string(id) + "\n";
    out << text;
    return kExitOk;
}

HeuristicConfig heuristics(const Flags& f)
{
    return f.heuristics.empty() ? HeuristicConfig{} : parse_heuristics(f.heuristics);
}

int cmd_cluster(const Flags& f, std::ostream& out)
{
    HeuristicConfig config = heuristics(f);
    std::map<AddressRef, std::set<std::string>> seeds;
    if (!f.tags.empty()) seeds = load_tag_seeds(f.tags);
    ChainView view = open(f);
    ClusterSet clusters = build_clusters(view, config);
    {
        DirectoryLock lock(DataLayout(f.data_dir).lock_file());
        clusters.save(DataLayout(f.data_dir).clusters());
    }
    out << "heuristics=" << format_heuristics(config) << "\naddresses=" << clusters.address_count()
        << "\nclusters=" << clusters.cluster_count() << "\n";
    if (auto big = clusters.largest()) out << "largest=" << *big << "\nlargest_size=" << clusters.cluster_size(*big) << "\n";
    if (!seeds.empty()) {
        propagate_tags(clusters, seeds);
        out << "cluster,size,tags\n";
        for (std::uint32_t c = 0; c < clusters.cluster_count(); ++c) {
            const auto& t = clusters.tags(c);
            if (t.empty()) continue;
            std::string joined;
            for (const auto& s : t) joined += (joined.empty() ? "" : "|") + s;
            out << c << "," << clusters.cluster_size(c) << "," << joined << "\n";
        }
    }
    return kExitOk;
}

ClusterSet clusters_for(const Flags& f, const ChainView& view)
{
    fs::path saved = DataLayout(f.data_dir).clusters();
    if (f.heuristics.empty() && fs::exists(saved)) return ClusterSet::load(saved);
    return build_clusters(view, heuristics(f));
}

std::function<bool(std::uint32_t)> miner_filter(const Flags& f)
{
    if (f.miner.empty()) return {};
    if (f.miners.empty()) throw Error(ErrorKind::usage, "--miner needs --miners");
    std::set<std::uint32_t> heights;
    std::uint64_t line = 0;
    for (const auto& row : split(read_text(f.miners), '\n')) {
        ++line;
        if (row.empty()) continue;
        auto cols = split(row, ',');
        if (cols.size() != 2) throw ParseError("expected height,miner", line);
        std::uint32_t h = 0;
        try {
            h = static_cast<std::uint32_t>(std::stoul(cols[0]));
        } catch (const std::exception&) {
            if (line == 1) continue; // header
            throw ParseError("bad height", line);
        }
        if (cols[1] == f.miner) heights.insert(h);
    }
    return [heights = std::move(heights)](std::uint32_t h) { return heights.count(h) != 0; };
}

std::string report_csv(const Flags& f)
{
    const std::string& name = f.report;
    if (name == "attack-sim") {
        MixSimParams p = f.sim;
        p.seed = f.seed;
        auto curve = simulate_intersection_attack(p);
        return to_csv(std::span<const AttackPoint>(curve));
    }
    if (name == "ps-select") {
        if (f.wallet.empty()) throw Error(ErrorKind::usage, "ps-select needs --wallet");
        DenominatedWallet w;
        std::uint64_t line = 0;
        for (const auto& row : split(read_text(f.wallet), '\n')) {
            ++line;
            if (row.empty()) continue;
            auto cols = split(row, ',');
            if (cols.size() != 3) throw ParseError("expected tx_hash,index,value", line);
            auto hash = fixed_from_hex<32>(cols[0]);
            if (!hash) {
                if (line == 1) continue; // header
                throw ParseError("bad tx hash", line);
            }
            try {
                w.add({*hash, static_cast<std::uint32_t>(std::stoul(cols[1])), std::stoull(cols[2])});
            } catch (const std::logic_error&) {
                throw ParseError("bad number", line);
            }
        }
        auto picked = select_ps_inputs(w, f.amount);
        if (!picked) return "insufficient funds\n";
        std::string s = "tx_hash,index,value\n";
        for (const auto& c : *picked) s += to_hex(c.tx_hash) + "," + std::to_string(c.index) + "," + std::to_string(c.value) + "\n";
        return s;
    }

    ChainView view = open(f);
    MapReduceOptions mr = mr_options(f);
    if (name == "multisig-access") {
        auto s = multisig_access_change_scan(view, mr);
        return to_csv(std::span<const MonthlyPoint>(s));
    }
    if (name == "multisig-insecure") {
        auto s = multisig_insecurity_scan(view, mr);
        return to_csv(std::span<const MonthlyPoint>(s));
    }
    if (name == "block-gap" || name == "gap-histogram") {
        auto gaps = block_update_gap(view, load_log(f), miner_filter(f));
        if (name == "block-gap") return to_csv(std::span<const BlockGap>(gaps));
        return to_csv(gap_histogram(gaps));
    }
    if (name == "fee-loss") {
        FeeTrace trace = fee_trace_from_chain(view, load_log(f), f.block_size);
        FeeLossOptions o;
        o.bootstrap = f.bootstrap;
        o.seed = f.seed;
        std::vector<FeeLoss> series;
        for (const auto& tok : split(f.intervals, ',')) {
            double interval = 0;
            try {
                interval = std::stod(tok);
            } catch (const std::exception&) {
                throw Error(ErrorKind::usage, "bad interval '" + tok + "'");
            }
            series.push_back(fee_loss_estimate(trace, interval, o));
        }
        return to_csv(std::span<const FeeLoss>(series));
    }
    if (name == "low-fee") {
        MempoolLog log = load_log(f);
        std::string s = "height,tx_id,feerate,categories\n";
        std::int64_t to = f.to_height < 0 ? view.max_height() : std::min<std::int64_t>(f.to_height, view.max_height());
        for (std::int64_t h = std::max<std::int64_t>(0, f.from_height); h <= to; ++h) {
            auto height = static_cast<std::uint32_t>(h);
            MempoolSnapshot snap = snapshot_at_block(view, log, height);
            GreedyBlock greedy = build_greedy_block(snap, f.block_size);
            auto info = block_tx_info(view, log, height, snap);
            std::uint32_t first = view.block_txs(height).first + 1; // skip the coinbase
            for (const auto& v : classify_low_fee(info, greedy)) {
                std::string cats;
                for (auto c : v.categories) cats += (cats.empty() ? "" : "|") + std::string(category_name(c));
                char rate[32];
                std::snprintf(rate, sizeof(rate), "%.9g", v.feerate);
                s += std::to_string(height) + "," + std::to_string(first + v.position) + "," + rate + "," + cats + "\n";
            }
        }
        return s;
    }
    if (name == "wait-times") {
        MempoolLog log = load_log(f);
        std::string s = "tx_id,wait_seconds\n";
        for (std::uint32_t id = 0; id < view.tx_count(); ++id) {
            if (auto w = log.wait_time(view, id)) {
                char buf[32];
                std::snprintf(buf, sizeof(buf), "%.9g", *w);
                s += std::to_string(id) + "," + buf + "\n";
            }
        }
        return s;
    }
    if (name == "velocity") {
        ClusterSet clusters = clusters_for(f, view);
        VelocityParams p;
        p.window_seconds = std::int64_t{f.window_days} * 86400;
        p.k = f.k;
        p.excluded_clusters.insert(f.exclude.begin(), f.exclude.end());
        if (f.exclude_largest) {
            if (auto big = clusters.largest()) p.excluded_clusters.insert(*big);
        }
        auto s = velocity(view, clusters, p, mr);
        return to_csv(std::span<const VelocityPoint>(s));
    }
    if (name == "dormancy") {
        auto s = dormancy_fraction(view);
        return to_csv(std::span<const DormancyPoint>(s));
    }
    if (name == "cluster-sizes") return histogram_csv(cluster_size_histogram(clusters_for(f, view)));
    if (name == "mean-fee") {
        std::int64_t from = std::numeric_limits<std::int64_t>::min(), to = std::numeric_limits<std::int64_t>::max();
        if (!f.from_date.empty()) {
            auto d = parse_date(f.from_date);
            if (!d) throw Error(ErrorKind::usage, "bad --from date");
            from = *d * 86400;
        }
        if (!f.to_date.empty()) {
            auto d = parse_date(f.to_date);
            if (!d) throw Error(ErrorKind::usage, "bad --to date");
            to = *d * 86400;
        }
        auto [lo, hi] = view.heights_between(from, to);
        std::string s = "height,txs,mean_fee\n";
        for (std::uint32_t h = lo; h < hi; ++h) {
            auto [first, end] = view.block_txs(h);
            std::uint32_t n = end - first > 0 ? end - first - 1 : 0;
            double mean = n ? static_cast<double>(view.block_fees(h)) / n : 0.0;
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.9g", mean);
            s += std::to_string(h) + "," + std::to_string(n) + "," + buf + "\n";
        }
        return s;
    }
    throw Error(ErrorKind::usage, "unknown report " + name);
}

std::string export_csv(const Flags& f)
{
    ChainView view = open(f);
    std::string s;
    if (f.what == "blocks") {
        s = "height,hash,timestamp,first_tx_id,tx_count,total_out,fees\n";
        for (std::uint32_t h = 0; h < view.block_count(); ++h) {
            BlockRecord b = view.block(h);
            s += std::to_string(h) + "," + to_hex(b.header_hash) + "," + std::to_string(b.timestamp) + "," +
                 std::to_string(b.first_tx_id) + "," + std::to_string(b.tx_count) + "," +
                 std::to_string(view.block_total_out(h)) + "," + std::to_string(view.block_fees(h)) + "\n";
        }
        return s;
    }
    s = "tx_id,hash,height,inputs,outputs,size,locktime,total_in,total_out,fee\n";
    for (std::uint32_t h = 0; h < view.block_count(); ++h) {
        auto [lo, hi] = view.block_txs(h);
        for (std::uint32_t id = lo; id < hi; ++id) {
            TxView tx = view.tx(id);
            auto hash = view.tx_hash(id);
            s += std::to_string(id) + "," + (hash ? to_hex(*hash) : std::string()) + "," + std::to_string(h) + "," +
                 std::to_string(tx.input_count()) + "," + std::to_string(tx.output_count()) + "," +
                 std::to_string(tx.size()) + "," + std::to_string(tx.locktime()) + "," + std::to_string(tx.total_in()) +
                 "," + std::to_string(tx.total_out()) + "," + std::to_string(tx.fee()) + "\n";
        }
    }
    return s;
}

int cmd_stats(const Flags& f, std::ostream& out)
{
    DataLayout layout(f.data_dir);
    ChainStats s;
    std::int64_t height = -1, view_height = -1;
    if (fs::exists(layout.parser_state())) {
        ChainView all = ChainView::open(f.data_dir, ViewOptions{0});
        height = all.max_height();
        s.n_tx = all.tx_count();
        using Counts = std::pair<std::uint64_t, std::uint64_t>;
        auto c = map_reduce_txs<Counts>(
            all, [](const TxView& tx) { return Counts{tx.input_count(), tx.output_count()}; },
            [](Counts a, Counts b) { return Counts{a.first + b.first, a.second + b.second}; }, Counts{0, 0}, mr_options(f));
        s.n_in = c.first;
        s.n_out = c.second;
        view_height = open(f).max_height();
    }
    LayoutSizes p = predict_layout_sizes(s);
    print_stats(s, out);
    out << "height=" << height << "\nview_height=" << view_height << "\ncurrent_bytes=" << p.current
        << "\nnormalized_bytes=" << p.normalized << "\nwide_ids_bytes=" << p.wide_ids << "\nfee_cached_bytes=" << p.fee_cached
        << "\n";
    return kExitOk;
}

std::string one_line(std::string s)
{
    for (auto& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    Flags f;
    CLI::App app{"chainlens: parse a block stream into a compact transaction graph and analyse it"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every verb");

    auto* parse = app.add_subcommand("parse", "Parse a JSONL block stream into a fresh data directory");
    add_store_flags(parse, f);
    add_writer_flags(parse, f);
    parse->add_option("--input", f.input, "JSONL blocks")->required();

    auto* update = app.add_subcommand("update", "Append blocks (reorgs are handled) and/or record a mempool feed");
    add_store_flags(update, f);
    add_writer_flags(update, f);
    update->add_option("--input", f.input, "JSONL blocks");

    auto* revert = app.add_subcommand("revert", "Undo the most recent blocks");
    add_store_flags(revert, f);
    add_writer_flags(revert, f);
    revert->add_option("--blocks", f.blocks, "How many blocks")->required();

    auto* query = app.add_subcommand("query", "Print IDs of txs matching a selector expression");
    add_store_flags(query, f);
    query->add_option("--expr", f.expr, "e.g. \"fee > 10000000 and output_count == 1\"")->required();

    auto* cluster = app.add_subcommand("cluster", "Cluster addresses and save clusters.dat");
    add_store_flags(cluster, f);
    cluster->add_option("--heuristics", f.heuristics,
                        "multi_input,change_fresh,change_multisig,coinjoin_exclusion | all | none "
                        "(default multi_input,coinjoin_exclusion)");
    cluster->add_option("--tags", f.tags, "CSV of address,label seeds");

    auto* report = app.add_subcommand("report", "Write an analysis CSV");
    add_store_flags(report, f);
    report->add_option("name", f.report, "Report name")->required()->check(CLI::IsMember(kReports));
    report->add_option("--seed", f.seed, "Simulation and bootstrap seed")->capture_default_str();
    report->add_option("--heuristics", f.heuristics, "Cluster with these heuristics instead of clusters.dat");
    report->add_option("--lag-correction", f.lag_correction, "Seconds added to first-seen times")->capture_default_str();
    report->add_option("--miners", f.miners, "CSV of height,miner");
    report->add_option("--miner", f.miner, "Only blocks of this miner");
    report->add_option("--intervals", f.intervals, "Template refresh intervals, seconds")->capture_default_str();
    report->add_option("--block-size", f.block_size, "Block size limit, bytes")->capture_default_str();
    report->add_option("--bootstrap", f.bootstrap, "Bootstrap resamples")->capture_default_str();
    report->add_option("--from-height", f.from_height, "First block")->capture_default_str();
    report->add_option("--to-height", f.to_height, "Last block, -1 = tip")->capture_default_str();
    report->add_option("--from", f.from_date, "YYYY-MM-DD");
    report->add_option("--to", f.to_date, "YYYY-MM-DD (exclusive)");
    report->add_option("--window-days", f.window_days, "Velocity window")->capture_default_str();
    report->add_option("--k", f.k, "Blocks before a spend stops counting as churn")->capture_default_str();
    report->add_option("--exclude-cluster", f.exclude, "Cluster IDs never counted as self-churn");
    report->add_flag("--exclude-largest", f.exclude_largest, "Also exclude the largest cluster");
    report->add_option("--wallet", f.wallet, "CSV of tx_hash,index,value");
    report->add_option("--amount", f.amount, "Send amount, base units");
    report->add_option("--wallets", f.sim.wallets, "Simulated wallets")->capture_default_str();
    report->add_option("--participants", f.sim.participants, "Participants per mix")->capture_default_str();
    report->add_option("--rounds", f.sim.rounds, "Mixing rounds")->capture_default_str();
    report->add_option("--trials", f.sim.trials, "Trials")->capture_default_str();
    report->add_option("--max-inputs", f.sim.max_inputs, "Largest input count")->capture_default_str();

    auto* exp = app.add_subcommand("export", "Dump txs or blocks of the view as CSV");
    add_store_flags(exp, f);
    exp->add_option("--what", f.what, "txs or blocks")->check(CLI::IsMember({"txs", "blocks"}))->capture_default_str();

    auto* stats = app.add_subcommand("stats", "Counts and predicted layout sizes");
    add_store_flags(stats, f);

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << to_string(ErrorKind::usage) << ": " << one_line(e.what()) << "\n";
        return kExitUsage;
    }

    try {
        std::ostringstream buffer;
        int rc = kExitOk;
        if (parse->parsed()) rc = cmd_parse(f, buffer);
        else if (update->parsed()) rc = cmd_update(f, buffer);
        else if (revert->parsed()) rc = cmd_revert(f, buffer);
        else if (query->parsed()) rc = cmd_query(f, buffer);
        else if (cluster->parsed()) rc = cmd_cluster(f, buffer);
        else if (report->parsed()) buffer << report_csv(f);
        else if (exp->parsed()) buffer << export_csv(f);
        else if (stats->parsed()) rc = cmd_stats(f, buffer);

        if (f.out.empty()) {
            out << buffer.str();
        } else {
            std::string text = buffer.str();
            write_file_atomic(f.out, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
        }
        return rc;
    } catch (const Error& e) {
        err << "error: " << to_string(e.kind()) << ": " << one_line(e.what()) << "\n";
        return e.kind() == ErrorKind::usage ? kExitUsage : kExitFailure;
    } catch (const std::exception& e) {
        err << "error: internal: " << one_line(e.what()) << "\n";
        return kExitFailure;
    }
}

} // namespace chainlens
