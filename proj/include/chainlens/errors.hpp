// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace chainlens {

enum class ErrorKind {
    range,
    consistency,
    parse,
    structure,
    storage,
    dangling_reference,
    double_spend,
    continuity,
    reorg,
    generation,
    usage,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base for every error raised by the library. The kind is stable and is
/// what the CLI prints on its machine-readable error line.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), m_kind(kind) {}

    ErrorKind kind() const noexcept { return m_kind; }

private:
    ErrorKind m_kind;
};

/// Parse failures carry a 1-based line (for line-oriented inputs) or a
/// 0-based character position (for selector expressions); unused is 0 / npos.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::uint64_t line, std::size_t position = std::string::npos)
        : Error(ErrorKind::parse, message), m_line(line), m_position(position) {}

    std::uint64_t line() const noexcept { return m_line; }
    std::size_t position() const noexcept { return m_position; }

private:
    std::uint64_t m_line;
    std::size_t m_position;
};

class ReorgError : public Error {
public:
    explicit ReorgError(const std::string& message) : Error(ErrorKind::reorg, message) {}
};

} // namespace chainlens
