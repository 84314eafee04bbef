// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <chainlens/bytes.hpp>
#include <chainlens/chain_model.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

struct sqlite3;
struct sqlite3_stmt;

namespace chainlens {

/// Persistent hash <-> tx ID and address key <-> (type, id) maps, stored in
/// an embedded SQLite database under indexes/. Misses are values, not errors.
class IndexStore {
public:
    static constexpr std::uint64_t kDefaultCacheBytes = 64ull << 20;

    static IndexStore open(const std::filesystem::path& dir, std::uint64_t cache_bytes = kDefaultCacheBytes,
                           bool read_only = false);
    ~IndexStore();
    IndexStore(IndexStore&& other) noexcept;
    IndexStore& operator=(IndexStore&& other) noexcept;
    IndexStore(const IndexStore&) = delete;
    IndexStore& operator=(const IndexStore&) = delete;

    /// Group writes; commit() makes them durable.
    void begin();
    void commit();
    void rollback();
    bool in_transaction() const noexcept { return m_in_tx; }

    void put_tx(std::uint32_t id, const Hash256& hash);
    std::optional<std::uint32_t> tx_id(const Hash256& hash) const;
    std::optional<Hash256> tx_hash(std::uint32_t id) const;

    void put_address(AddressRef ref, std::span<const std::uint8_t> key);
    std::optional<AddressRef> address_ref(std::span<const std::uint8_t> key) const;
    std::optional<Bytes> address_key(AddressRef ref) const;
    void for_each_address_key(const std::function<void(std::span<const std::uint8_t>)>& fn) const;

    /// Removes every tx with id >= first_tx and every address with
    /// id >= counts[type]. Used to rewind after a revert.
    void erase_from(std::uint32_t first_tx, const AddressCounts& counts);

    std::uint64_t tx_count() const;
    std::uint64_t address_count() const;

private:
    IndexStore() = default;
    sqlite3_stmt* prepare(const char* sql) const;
    void exec(const char* sql) const;
    void close() noexcept;

    sqlite3* m_db = nullptr;
    std::filesystem::path m_path;
    bool m_in_tx = false;
    sqlite3_stmt* m_put_tx = nullptr;
    sqlite3_stmt* m_get_tx_id = nullptr;
    sqlite3_stmt* m_get_tx_hash = nullptr;
    sqlite3_stmt* m_put_addr = nullptr;
    sqlite3_stmt* m_get_addr_ref = nullptr;
    sqlite3_stmt* m_get_addr_key = nullptr;
};

} // namespace chainlens
