// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <chainlens/chain_view.hpp>
#include <chainlens/errors.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <optional>
#include <thread>
#include <vector>

namespace chainlens {

enum class ItemKind { blocks, txs, inputs, outputs };

struct MapReduceOptions {
    /// 0 = hardware concurrency.
    unsigned threads = 0;
    /// Units (txs, or blocks for ItemKind::blocks) per work chunk. Chunk
    /// boundaries do not depend on the thread count, so results do not either.
    std::uint32_t grain = 8192;
    /// Unit range [first, end); end defaults to the whole view.
    std::uint32_t first = 0;
    std::optional<std::uint32_t> end;
};

struct BlockItem {
    std::uint32_t height;
    BlockRecord record;
};

struct InOutItem {
    const TxView& tx;
    std::uint32_t index;
    InOutRecord record;
};

namespace detail {

unsigned resolve_threads(unsigned requested) noexcept;

/// Folds chunks [c*grain, min((c+1)*grain, end)) on a private pool and
/// combines the chunk results in chunk order. The first failing chunk's
/// exception is rethrown.
template <typename T, typename ChunkFn, typename Combine>
T run_chunks(std::uint32_t first, std::uint32_t end, const MapReduceOptions& opt, ChunkFn&& chunk_fn, Combine&& combine,
             const T& identity)
{
    if (end <= first) return identity;
    std::uint32_t grain = std::max<std::uint32_t>(1, opt.grain);
    std::uint64_t chunks = (std::uint64_t{end} - first + grain - 1) / grain;
    std::vector<std::optional<T>> results(chunks);
    std::vector<std::exception_ptr> errors(chunks);
    std::atomic<std::uint64_t> next{0};
    std::atomic<bool> failed{false};

    auto worker = [&] {
        for (;;) {
            std::uint64_t c = next.fetch_add(1, std::memory_order_relaxed);
            if (c >= chunks || failed.load(std::memory_order_relaxed)) return;
            std::uint32_t lo = static_cast<std::uint32_t>(first + c * grain);
            std::uint32_t hi = static_cast<std::uint32_t>(std::min<std::uint64_t>(std::uint64_t{lo} + grain, end));
            try {
                results[c].emplace(chunk_fn(lo, hi));
            } catch (...) {
                errors[c] = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
            }
        }
    };

    unsigned threads = static_cast<unsigned>(std::min<std::uint64_t>(resolve_threads(opt.threads), chunks));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(threads);
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    T acc = identity;
    for (auto& r : results) acc = combine(std::move(acc), std::move(*r));
    return acc;
}

inline std::uint32_t range_end(const MapReduceOptions& opt, std::uint32_t limit)
{
    std::uint32_t end = opt.end.value_or(limit);
    if (end > limit || opt.first > end) throw Error(ErrorKind::range, "map_reduce range is outside the view");
    return end;
}

} // namespace detail

/// map: TxView -> T, combine: (T, T) -> T, associative and commutative with
/// identity. Equals the sequential left fold for conforming combine.
template <typename T, typename Map, typename Combine>
T map_reduce_txs(const ChainView& view, Map map, Combine combine, T identity, MapReduceOptions opt = {})
{
    std::uint32_t end = detail::range_end(opt, view.tx_count());
    return detail::run_chunks<T>(
        opt.first, end, opt,
        [&](std::uint32_t lo, std::uint32_t hi) {
            T acc = identity;
            for (std::uint32_t id = lo; id < hi; ++id) acc = combine(std::move(acc), map(view.tx(id)));
            return acc;
        },
        combine, identity);
}

template <typename T, typename Map, typename Combine>
T map_reduce_blocks(const ChainView& view, Map map, Combine combine, T identity, MapReduceOptions opt = {})
{
    std::uint32_t end = detail::range_end(opt, view.block_count());
    return detail::run_chunks<T>(
        opt.first, end, opt,
        [&](std::uint32_t lo, std::uint32_t hi) {
            T acc = identity;
            for (std::uint32_t h = lo; h < hi; ++h) acc = combine(std::move(acc), map(BlockItem{h, view.block(h)}));
            return acc;
        },
        combine, identity);
}

template <typename T, typename Map, typename Combine>
T map_reduce_outputs(const ChainView& view, Map map, Combine combine, T identity, MapReduceOptions opt = {})
{
    std::uint32_t end = detail::range_end(opt, view.tx_count());
    return detail::run_chunks<T>(
        opt.first, end, opt,
        [&](std::uint32_t lo, std::uint32_t hi) {
            T acc = identity;
            for (std::uint32_t id = lo; id < hi; ++id) {
                TxView tx = view.tx(id);
                for (std::uint32_t i = 0, n = tx.output_count(); i < n; ++i) {
                    acc = combine(std::move(acc), map(InOutItem{tx, i, tx.output(i)}));
                }
            }
            return acc;
        },
        combine, identity);
}

template <typename T, typename Map, typename Combine>
T map_reduce_inputs(const ChainView& view, Map map, Combine combine, T identity, MapReduceOptions opt = {})
{
    std::uint32_t end = detail::range_end(opt, view.tx_count());
    return detail::run_chunks<T>(
        opt.first, end, opt,
        [&](std::uint32_t lo, std::uint32_t hi) {
            T acc = identity;
            for (std::uint32_t id = lo; id < hi; ++id) {
                TxView tx = view.tx(id);
                for (std::uint32_t i = 0, n = tx.input_count(); i < n; ++i) {
                    acc = combine(std::move(acc), map(InOutItem{tx, i, tx.input(i)}));
                }
            }
            return acc;
        },
        combine, identity);
}

/// Runtime-dispatched form. The map function receives the item as the
/// matching type: BlockItem, TxView or InOutItem.
template <typename T, typename Map, typename Combine>
T map_reduce(const ChainView& view, ItemKind kind, Map map, Combine combine, T identity, MapReduceOptions opt = {})
{
    switch (kind) {
    case ItemKind::blocks:
        return map_reduce_blocks<T>(view, map, combine, identity, opt);
    case ItemKind::txs:
        return map_reduce_txs<T>(view, map, combine, identity, opt);
    case ItemKind::inputs:
        return map_reduce_inputs<T>(view, map, combine, identity, opt);
    case ItemKind::outputs:
        return map_reduce_outputs<T>(view, map, combine, identity, opt);
    }
    return identity;
}

} // namespace chainlens
