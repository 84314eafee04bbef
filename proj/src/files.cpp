// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/chain_model.hpp>
#include <chainlens/errors.hpp>
#include <chainlens/files.hpp>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fcntl.h>
#include <sys/file.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>
#include <utility>

namespace chainlens {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void throw_io(const std::string& what, const fs::path& path)
{
    throw Error(ErrorKind::storage, what + " " + path.string() + ": " + std::strerror(errno));
}

void pread_all(int fd, std::uint8_t* out, std::size_t len, std::uint64_t pos, const fs::path& path)
{
    while (len > 0) {
        ssize_t n = ::pread(fd, out, len, static_cast<off_t>(pos));
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_io("read failed on", path);
        }
        if (n == 0) throw Error(ErrorKind::storage, "unexpected end of file in " + path.string());
        out += n;
        len -= static_cast<std::size_t>(n);
        pos += static_cast<std::uint64_t>(n);
    }
}

void pwrite_all(int fd, const std::uint8_t* in, std::size_t len, std::uint64_t pos, const fs::path& path)
{
    while (len > 0) {
        ssize_t n = ::pwrite(fd, in, len, static_cast<off_t>(pos));
        if (n < 0) {
            if (errno == EINTR) continue;
            throw_io("write failed on", path);
        }
        in += n;
        len -= static_cast<std::size_t>(n);
        pos += static_cast<std::uint64_t>(n);
    }
}

void check_magic(int fd, const fs::path& path)
{
    std::uint8_t header[kFileHeaderSize];
    pread_all(fd, header, sizeof(header), 0, path);
    if (!std::equal(std::begin(header), std::end(header), kFileMagic.begin())) {
        throw Error(ErrorKind::storage, "bad magic or version in " + path.string());
    }
}

} // namespace

MappedFile::MappedFile(const fs::path& path, std::uint64_t payload_limit)
{
    std::uint64_t on_disk = payload_size_on_disk(path);
    m_payload = std::min(payload_limit, on_disk);
    if (!fs::exists(path)) return;
    int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) throw_io("cannot open", path);
    try {
        check_magic(fd, path);
    } catch (...) {
        ::close(fd);
        throw;
    }
    m_mapped = kHeader + m_payload;
    void* p = ::mmap(nullptr, m_mapped, PROT_READ, MAP_SHARED, fd, 0);
    ::close(fd);
    if (p == MAP_FAILED) throw_io("cannot map", path);
    m_base = static_cast<const std::uint8_t*>(p);
}

MappedFile::~MappedFile()
{
    if (m_base) ::munmap(const_cast<std::uint8_t*>(m_base), m_mapped);
}

MappedFile::MappedFile(MappedFile&& other) noexcept
    : m_base(std::exchange(other.m_base, nullptr)),
      m_mapped(std::exchange(other.m_mapped, 0)),
      m_payload(std::exchange(other.m_payload, 0))
{
}

MappedFile& MappedFile::operator=(MappedFile&& other) noexcept
{
    if (this != &other) {
        if (m_base) ::munmap(const_cast<std::uint8_t*>(m_base), m_mapped);
        m_base = std::exchange(other.m_base, nullptr);
        m_mapped = std::exchange(other.m_mapped, 0);
        m_payload = std::exchange(other.m_payload, 0);
    }
    return *this;
}

std::uint64_t MappedFile::payload_size_on_disk(const fs::path& path)
{
    std::error_code ec;
    auto size = fs::file_size(path, ec);
    if (ec || size < kHeader) return 0;
    return size - kHeader;
}

AppendFile AppendFile::open(const fs::path& path)
{
    AppendFile f;
    f.m_path = path;
    bool existed = fs::exists(path);
    if (!existed && path.has_parent_path()) fs::create_directories(path.parent_path());
    f.m_fd = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (f.m_fd < 0) throw_io("cannot open", path);
    struct stat st{};
    if (::fstat(f.m_fd, &st) != 0) throw_io("cannot stat", path);
    if (st.st_size == 0) {
        pwrite_all(f.m_fd, kFileMagic.data(), kFileMagic.size(), 0, path);
        f.m_disk_size = 0;
    } else {
        if (static_cast<std::uint64_t>(st.st_size) < kFileHeaderSize) {
            throw Error(ErrorKind::storage, "truncated header in " + path.string());
        }
        check_magic(f.m_fd, path);
        f.m_disk_size = static_cast<std::uint64_t>(st.st_size) - kFileHeaderSize;
    }
    return f;
}

AppendFile::~AppendFile()
{
    if (m_fd >= 0) {
        try {
            flush();
        } catch (...) {
        }
        ::close(m_fd);
    }
}

AppendFile::AppendFile(AppendFile&& other) noexcept
    : m_fd(std::exchange(other.m_fd, -1)),
      m_path(std::move(other.m_path)),
      m_disk_size(std::exchange(other.m_disk_size, 0)),
      m_pending(std::move(other.m_pending))
{
}

AppendFile& AppendFile::operator=(AppendFile&& other) noexcept
{
    if (this != &other) {
        if (m_fd >= 0) {
            try {
                flush();
            } catch (...) {
            }
            ::close(m_fd);
        }
        m_fd = std::exchange(other.m_fd, -1);
        m_path = std::move(other.m_path);
        m_disk_size = std::exchange(other.m_disk_size, 0);
        m_pending = std::move(other.m_pending);
    }
    return *this;
}

void AppendFile::append(std::span<const std::uint8_t> bytes)
{
    m_pending.insert(m_pending.end(), bytes.begin(), bytes.end());
    if (m_pending.size() >= kFlushThreshold) flush();
}

void AppendFile::read(std::uint64_t pos, std::span<std::uint8_t> out) const
{
    if (pos + out.size() > size()) {
        throw Error(ErrorKind::range, "read past end of " + m_path.string());
    }
    std::uint8_t* dst = out.data();
    std::size_t len = out.size();
    if (pos < m_disk_size) {
        std::size_t from_disk = static_cast<std::size_t>(std::min<std::uint64_t>(len, m_disk_size - pos));
        pread_all(m_fd, dst, from_disk, kFileHeaderSize + pos, m_path);
        dst += from_disk;
        len -= from_disk;
        pos += from_disk;
    }
    if (len > 0) std::memcpy(dst, m_pending.data() + (pos - m_disk_size), len);
}

void AppendFile::write_at(std::uint64_t pos, std::span<const std::uint8_t> bytes)
{
    if (pos + bytes.size() > size()) {
        throw Error(ErrorKind::range, "write past end of " + m_path.string());
    }
    const std::uint8_t* src = bytes.data();
    std::size_t len = bytes.size();
    if (pos < m_disk_size) {
        std::size_t to_disk = static_cast<std::size_t>(std::min<std::uint64_t>(len, m_disk_size - pos));
        pwrite_all(m_fd, src, to_disk, kFileHeaderSize + pos, m_path);
        src += to_disk;
        len -= to_disk;
        pos += to_disk;
    }
    if (len > 0) std::memcpy(m_pending.data() + (pos - m_disk_size), src, len);
}

void AppendFile::truncate(std::uint64_t new_size)
{
    if (new_size > size()) throw Error(ErrorKind::range, "cannot grow " + m_path.string() + " by truncation");
    if (new_size >= m_disk_size) {
        m_pending.resize(static_cast<std::size_t>(new_size - m_disk_size));
        return;
    }
    m_pending.clear();
    if (::ftruncate(m_fd, static_cast<off_t>(kFileHeaderSize + new_size)) != 0) throw_io("cannot truncate", m_path);
    m_disk_size = new_size;
}

void AppendFile::flush()
{
    if (m_pending.empty()) return;
    pwrite_all(m_fd, m_pending.data(), m_pending.size(), kFileHeaderSize + m_disk_size, m_path);
    m_disk_size += m_pending.size();
    m_pending.clear();
}

Bytes read_file(const fs::path& path)
{
    int fd = ::open(path.c_str(), O_RDONLY | O_CLOEXEC);
    if (fd < 0) throw_io("cannot open", path);
    struct stat st{};
    if (::fstat(fd, &st) != 0) {
        ::close(fd);
        throw_io("cannot stat", path);
    }
    Bytes out(static_cast<std::size_t>(st.st_size));
    try {
        if (!out.empty()) pread_all(fd, out.data(), out.size(), 0, path);
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    return out;
}

void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
    if (fd < 0) throw_io("cannot create", tmp);
    try {
        pwrite_all(fd, bytes.data(), bytes.size(), 0, tmp);
    } catch (...) {
        ::close(fd);
        throw;
    }
    ::close(fd);
    fs::rename(tmp, path);
}

DirectoryLock::DirectoryLock(const fs::path& lock_path)
{
    if (lock_path.has_parent_path()) fs::create_directories(lock_path.parent_path());
    m_fd = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (m_fd < 0) throw_io("cannot open lock", lock_path);
    if (::flock(m_fd, LOCK_EX | LOCK_NB) != 0) {
        ::close(m_fd);
        m_fd = -1;
        throw Error(ErrorKind::storage, "data directory is locked by another writer: " + lock_path.string());
    }
}

DirectoryLock::~DirectoryLock()
{
    if (m_fd >= 0) {
        ::flock(m_fd, LOCK_UN);
        ::close(m_fd);
    }
}

Bytes with_magic()
{
    return Bytes(kFileMagic.begin(), kFileMagic.end());
}

std::span<const std::uint8_t> strip_magic(const Bytes& bytes, const fs::path& path)
{
    if (bytes.size() < kFileHeaderSize || !std::equal(kFileMagic.begin(), kFileMagic.end(), bytes.begin())) {
        throw Error(ErrorKind::storage, "bad magic or version in " + path.string());
    }
    return std::span<const std::uint8_t>(bytes).subspan(kFileHeaderSize);
}

} // namespace chainlens
