// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <chainlens/bytes.hpp>

#include <cstdint>
#include <filesystem>
#include <span>

namespace chainlens {

/// Read-only shared mapping of a data file, header stripped. Only the first
/// `payload_limit` payload bytes are mapped, so later appends by the writer
/// stay invisible.
class MappedFile {
public:
    MappedFile() = default;
    /// Maps min(payload_limit, on-disk payload) bytes; validates the magic.
    MappedFile(const std::filesystem::path& path, std::uint64_t payload_limit);
    ~MappedFile();

    MappedFile(MappedFile&& other) noexcept;
    MappedFile& operator=(MappedFile&& other) noexcept;
    MappedFile(const MappedFile&) = delete;
    MappedFile& operator=(const MappedFile&) = delete;

    const std::uint8_t* data() const noexcept { return m_base ? m_base + kHeader : nullptr; }
    std::uint64_t size() const noexcept { return m_payload; }
    std::span<const std::uint8_t> bytes() const noexcept { return {data(), static_cast<std::size_t>(m_payload)}; }

    /// Payload size currently on disk (0 if the file is missing).
    static std::uint64_t payload_size_on_disk(const std::filesystem::path& path);

private:
    static constexpr std::size_t kHeader = 8;
    const std::uint8_t* m_base = nullptr;
    std::uint64_t m_mapped = 0;
    std::uint64_t m_payload = 0;
};

/// Single-writer file with a magic header: appends are buffered in memory,
/// reads and length-preserving patches work across the buffered tail.
/// Positions are payload-relative.
class AppendFile {
public:
    AppendFile() = default;
    static AppendFile open(const std::filesystem::path& path);
    ~AppendFile();

    AppendFile(AppendFile&& other) noexcept;
    AppendFile& operator=(AppendFile&& other) noexcept;
    AppendFile(const AppendFile&) = delete;
    AppendFile& operator=(const AppendFile&) = delete;

    std::uint64_t size() const noexcept { return m_disk_size + m_pending.size(); }
    void append(std::span<const std::uint8_t> bytes);
    void read(std::uint64_t pos, std::span<std::uint8_t> out) const;
    void write_at(std::uint64_t pos, std::span<const std::uint8_t> bytes);
    void truncate(std::uint64_t new_size);
    void flush();

    template <typename T>
    T read_value(std::uint64_t pos) const
    {
        std::uint8_t buf[sizeof(T)];
        read(pos, buf);
        return read_le<T>(buf);
    }

    template <typename T>
    void append_value(T v)
    {
        std::uint8_t buf[sizeof(T)];
        write_le(buf, v);
        append(buf);
    }

private:
    static constexpr std::size_t kFlushThreshold = 8u << 20;
    int m_fd = -1;
    std::filesystem::path m_path;
    std::uint64_t m_disk_size = 0;
    Bytes m_pending;
};

/// Reads a whole file into memory (for small binary files).
Bytes read_file(const std::filesystem::path& path);
/// Writes atomically via a temporary sibling and rename.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// A buffer holding just the file magic, for small whole-file formats.
Bytes with_magic();
/// The payload after the magic; storage error if the magic is wrong.
std::span<const std::uint8_t> strip_magic(const Bytes& bytes, const std::filesystem::path& path);

/// Exclusive advisory lock held for the lifetime of the object.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::filesystem::path& lock_path);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    int m_fd = -1;
};

} // namespace chainlens
