// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/errors.hpp>
#include <chainlens/index_store.hpp>

#include <sqlite3.h>

#include <algorithm>
#include <utility>

namespace chainlens {

namespace fs = std::filesystem;

namespace {

class Statement {
public:
    explicit Statement(sqlite3_stmt* stmt) : m_stmt(stmt) {}
    ~Statement()
    {
        sqlite3_reset(m_stmt);
        sqlite3_clear_bindings(m_stmt);
    }
    sqlite3_stmt* get() const noexcept { return m_stmt; }

private:
    sqlite3_stmt* m_stmt;
};

[[noreturn]] void fail(sqlite3* db, const std::string& what)
{
    throw Error(ErrorKind::storage, what + ": " + (db ? sqlite3_errmsg(db) : "unknown error"));
}

void check(sqlite3* db, int rc, const char* what)
{
    if (rc != SQLITE_OK && rc != SQLITE_DONE && rc != SQLITE_ROW) fail(db, what);
}

} // namespace

IndexStore IndexStore::open(const fs::path& dir, std::uint64_t cache_bytes, bool read_only)
{
    IndexStore s;
    if (!read_only) fs::create_directories(dir);
    s.m_path = dir / "index.sqlite";
    if (read_only && !fs::exists(s.m_path)) throw Error(ErrorKind::storage, "no index at " + s.m_path.string());
    int flags = read_only ? SQLITE_OPEN_READONLY : (SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE);
    flags |= SQLITE_OPEN_NOMUTEX;
    if (sqlite3_open_v2(s.m_path.c_str(), &s.m_db, flags, nullptr) != SQLITE_OK) {
        std::string msg = s.m_db ? sqlite3_errmsg(s.m_db) : "out of memory";
        s.close();
        throw Error(ErrorKind::storage, "cannot open index " + s.m_path.string() + ": " + msg);
    }
    // negative cache_size is in KiB
    std::string pragma = "PRAGMA cache_size=-" + std::to_string(std::max<std::uint64_t>(cache_bytes / 1024, 64));
    s.exec(pragma.c_str());
    if (!read_only) {
        s.exec("PRAGMA journal_mode=WAL");
        s.exec("PRAGMA synchronous=NORMAL");
        s.exec("CREATE TABLE IF NOT EXISTS tx (id INTEGER PRIMARY KEY, hash BLOB NOT NULL UNIQUE)");
        s.exec("CREATE TABLE IF NOT EXISTS address (type INTEGER NOT NULL, id INTEGER NOT NULL, key BLOB NOT NULL UNIQUE,"
               " PRIMARY KEY (type, id)) WITHOUT ROWID");
        s.m_put_tx = s.prepare("INSERT INTO tx (id, hash) VALUES (?1, ?2)");
        s.m_put_addr = s.prepare("INSERT INTO address (type, id, key) VALUES (?1, ?2, ?3)");
    }
    try {
        s.m_get_tx_id = s.prepare("SELECT id FROM tx WHERE hash = ?1");
        s.m_get_tx_hash = s.prepare("SELECT hash FROM tx WHERE id = ?1");
        s.m_get_addr_ref = s.prepare("SELECT type, id FROM address WHERE key = ?1");
        s.m_get_addr_key = s.prepare("SELECT key FROM address WHERE type = ?1 AND id = ?2");
    } catch (const Error&) {
        throw Error(ErrorKind::storage, "corrupted or incompatible index at " + s.m_path.string());
    }
    return s;
}

IndexStore::~IndexStore()
{
    close();
}

void IndexStore::close() noexcept
{
    if (!m_db) return;
    if (m_in_tx) sqlite3_exec(m_db, "ROLLBACK", nullptr, nullptr, nullptr);
    for (auto* st : {m_put_tx, m_get_tx_id, m_get_tx_hash, m_put_addr, m_get_addr_ref, m_get_addr_key}) {
        if (st) sqlite3_finalize(st);
    }
    sqlite3_close(m_db);
    m_db = nullptr;
}

IndexStore::IndexStore(IndexStore&& other) noexcept
    : m_db(std::exchange(other.m_db, nullptr)),
      m_path(std::move(other.m_path)),
      m_in_tx(std::exchange(other.m_in_tx, false)),
      m_put_tx(std::exchange(other.m_put_tx, nullptr)),
      m_get_tx_id(std::exchange(other.m_get_tx_id, nullptr)),
      m_get_tx_hash(std::exchange(other.m_get_tx_hash, nullptr)),
      m_put_addr(std::exchange(other.m_put_addr, nullptr)),
      m_get_addr_ref(std::exchange(other.m_get_addr_ref, nullptr)),
      m_get_addr_key(std::exchange(other.m_get_addr_key, nullptr))
{
}

IndexStore& IndexStore::operator=(IndexStore&& other) noexcept
{
    if (this != &other) {
        close();
        m_db = std::exchange(other.m_db, nullptr);
        m_path = std::move(other.m_path);
        m_in_tx = std::exchange(other.m_in_tx, false);
        m_put_tx = std::exchange(other.m_put_tx, nullptr);
        m_get_tx_id = std::exchange(other.m_get_tx_id, nullptr);
        m_get_tx_hash = std::exchange(other.m_get_tx_hash, nullptr);
        m_put_addr = std::exchange(other.m_put_addr, nullptr);
        m_get_addr_ref = std::exchange(other.m_get_addr_ref, nullptr);
        m_get_addr_key = std::exchange(other.m_get_addr_key, nullptr);
    }
    return *this;
}

sqlite3_stmt* IndexStore::prepare(const char* sql) const
{
    sqlite3_stmt* st = nullptr;
    if (sqlite3_prepare_v2(m_db, sql, -1, &st, nullptr) != SQLITE_OK) fail(m_db, std::string("cannot prepare ") + sql);
    return st;
}

void IndexStore::exec(const char* sql) const
{
    char* err = nullptr;
    if (sqlite3_exec(m_db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
        std::string msg = err ? err : "unknown error";
        sqlite3_free(err);
        throw Error(ErrorKind::storage, std::string("index statement failed (") + sql + "): " + msg);
    }
}

void IndexStore::begin()
{
    if (m_in_tx) return;
    exec("BEGIN");
    m_in_tx = true;
}

void IndexStore::commit()
{
    if (!m_in_tx) return;
    exec("COMMIT");
    m_in_tx = false;
}

void IndexStore::rollback()
{
    if (!m_in_tx) return;
    exec("ROLLBACK");
    m_in_tx = false;
}

void IndexStore::put_tx(std::uint32_t id, const Hash256& hash)
{
    if (!m_put_tx) throw Error(ErrorKind::storage, "index opened read-only");
    Statement st(m_put_tx);
    sqlite3_bind_int64(st.get(), 1, id);
    sqlite3_bind_blob(st.get(), 2, hash.data(), static_cast<int>(hash.size()), SQLITE_STATIC);
    int rc = sqlite3_step(st.get());
    if (rc == SQLITE_CONSTRAINT) {
        throw Error(ErrorKind::consistency, "duplicate transaction " + to_hex(hash) + " or id " + std::to_string(id));
    }
    check(m_db, rc, "cannot insert transaction");
}

std::optional<std::uint32_t> IndexStore::tx_id(const Hash256& hash) const
{
    Statement st(m_get_tx_id);
    sqlite3_bind_blob(st.get(), 1, hash.data(), static_cast<int>(hash.size()), SQLITE_STATIC);
    int rc = sqlite3_step(st.get());
    check(m_db, rc, "transaction lookup failed");
    if (rc != SQLITE_ROW) return std::nullopt;
    return static_cast<std::uint32_t>(sqlite3_column_int64(st.get(), 0));
}

std::optional<Hash256> IndexStore::tx_hash(std::uint32_t id) const
{
    Statement st(m_get_tx_hash);
    sqlite3_bind_int64(st.get(), 1, id);
    int rc = sqlite3_step(st.get());
    check(m_db, rc, "transaction lookup failed");
    if (rc != SQLITE_ROW) return std::nullopt;
    if (sqlite3_column_bytes(st.get(), 0) != 32) throw Error(ErrorKind::storage, "corrupted transaction index entry");
    Hash256 h;
    std::memcpy(h.data(), sqlite3_column_blob(st.get(), 0), 32);
    return h;
}

void IndexStore::put_address(AddressRef ref, std::span<const std::uint8_t> key)
{
    if (!m_put_addr) throw Error(ErrorKind::storage, "index opened read-only");
    Statement st(m_put_addr);
    sqlite3_bind_int(st.get(), 1, code(ref.type));
    sqlite3_bind_int64(st.get(), 2, ref.id);
    sqlite3_bind_blob(st.get(), 3, key.data(), static_cast<int>(key.size()), SQLITE_STATIC);
    int rc = sqlite3_step(st.get());
    if (rc == SQLITE_CONSTRAINT) throw Error(ErrorKind::consistency, "duplicate address key or id");
    check(m_db, rc, "cannot insert address");
}

std::optional<AddressRef> IndexStore::address_ref(std::span<const std::uint8_t> key) const
{
    Statement st(m_get_addr_ref);
    sqlite3_bind_blob(st.get(), 1, key.data(), static_cast<int>(key.size()), SQLITE_STATIC);
    int rc = sqlite3_step(st.get());
    check(m_db, rc, "address lookup failed");
    if (rc != SQLITE_ROW) return std::nullopt;
    return AddressRef{static_cast<AddressType>(sqlite3_column_int(st.get(), 0)),
                      static_cast<std::uint32_t>(sqlite3_column_int64(st.get(), 1))};
}

std::optional<Bytes> IndexStore::address_key(AddressRef ref) const
{
    Statement st(m_get_addr_key);
    sqlite3_bind_int(st.get(), 1, code(ref.type));
    sqlite3_bind_int64(st.get(), 2, ref.id);
    int rc = sqlite3_step(st.get());
    check(m_db, rc, "address lookup failed");
    if (rc != SQLITE_ROW) return std::nullopt;
    auto* p = static_cast<const std::uint8_t*>(sqlite3_column_blob(st.get(), 0));
    return Bytes(p, p + sqlite3_column_bytes(st.get(), 0));
}

void IndexStore::for_each_address_key(const std::function<void(std::span<const std::uint8_t>)>& fn) const
{
    sqlite3_stmt* raw = prepare("SELECT key FROM address");
    try {
        int rc;
        while ((rc = sqlite3_step(raw)) == SQLITE_ROW) {
            auto* p = static_cast<const std::uint8_t*>(sqlite3_column_blob(raw, 0));
            fn({p, static_cast<std::size_t>(sqlite3_column_bytes(raw, 0))});
        }
        check(m_db, rc, "address scan failed");
    } catch (...) {
        sqlite3_finalize(raw);
        throw;
    }
    sqlite3_finalize(raw);
}

void IndexStore::erase_from(std::uint32_t first_tx, const AddressCounts& counts)
{
    sqlite3_stmt* del_tx = prepare("DELETE FROM tx WHERE id >= ?1");
    sqlite3_bind_int64(del_tx, 1, first_tx);
    int rc = sqlite3_step(del_tx);
    sqlite3_finalize(del_tx);
    check(m_db, rc, "cannot rewind transaction index");
    sqlite3_stmt* del_addr = prepare("DELETE FROM address WHERE type = ?1 AND id >= ?2");
    for (auto t : kAllAddressTypes) {
        sqlite3_reset(del_addr);
        sqlite3_bind_int(del_addr, 1, code(t));
        sqlite3_bind_int64(del_addr, 2, counts[code(t)]);
        rc = sqlite3_step(del_addr);
        if (rc != SQLITE_DONE) {
            sqlite3_finalize(del_addr);
            fail(m_db, "cannot rewind address index");
        }
    }
    sqlite3_finalize(del_addr);
}

std::uint64_t IndexStore::tx_count() const
{
    sqlite3_stmt* st = prepare("SELECT COUNT(*) FROM tx");
    sqlite3_step(st);
    auto n = static_cast<std::uint64_t>(sqlite3_column_int64(st, 0));
    sqlite3_finalize(st);
    return n;
}

std::uint64_t IndexStore::address_count() const
{
    sqlite3_stmt* st = prepare("SELECT COUNT(*) FROM address");
    sqlite3_step(st);
    auto n = static_cast<std::uint64_t>(sqlite3_column_int64(st, 0));
    sqlite3_finalize(st);
    return n;
}

} // namespace chainlens
