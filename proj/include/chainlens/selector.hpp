// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#pragma once

#include <chainlens/chain_view.hpp>
#include <chainlens/map_reduce.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chainlens {

enum class SelectorField : std::uint8_t { fee, input_count, output_count, total_out, total_in, locktime, size, height };

inline constexpr std::size_t kSelectorFieldCount = 8;

std::string_view field_name(SelectorField f) noexcept;
std::optional<SelectorField> parse_field_name(std::string_view name) noexcept;

/// Field values of one tx, indexed by SelectorField.
using TxFields = std::array<long double, kSelectorFieldCount>;

TxFields tx_fields(const TxView& tx, std::uint32_t height) noexcept;

enum class SelectorOp : std::uint8_t {
    number, field, negate_not, add, sub, mul, div, lt, gt, le, ge, eq, ne, and_, or_,
};

struct SelectorNode {
    SelectorOp op = SelectorOp::number;
    long double number = 0;
    SelectorField field = SelectorField::fee;
    std::vector<SelectorNode> children;

    bool operator==(const SelectorNode&) const = default;
};

/// Compiled predicate over tx fields. Arithmetic is carried out in long
/// double; comparisons and boolean operators yield 1 or 0 and any non-zero
/// value is true. Division by zero yields 0.
///
///   expr := or
///   or   := and ("or" and)*
///   and  := cmp ("and" cmp)*
///   cmp  := sum (("<"|">"|"<="|">="|"=="|"!=") sum)?
///   sum  := term (("+"|"-") term)*
///   term := atom (("*"|"/") atom)*
///   atom := number | field | "(" expr ")" | "not" atom
class SelectorExpr {
public:
    /// Throws ParseError carrying the 0-based character position.
    static SelectorExpr parse(std::string_view text);

    const SelectorNode& root() const noexcept { return m_root; }
    /// Canonical text; parse(print()) yields an equal tree.
    std::string print() const;

    long double evaluate(const TxFields& fields) const noexcept;
    bool matches(const TxFields& fields) const noexcept { return evaluate(fields) != 0; }
    bool uses(SelectorField f) const noexcept { return m_uses[static_cast<std::size_t>(f)]; }

    bool operator==(const SelectorExpr& other) const { return m_root == other.m_root; }

private:
    struct Instr {
        SelectorOp op;
        SelectorField field;
        long double number;
    };

    explicit SelectorExpr(SelectorNode root);
    void compile(const SelectorNode& node, std::size_t depth);

    SelectorNode m_root;
    std::vector<Instr> m_code;
    std::size_t m_stack = 0;
    std::array<bool, kSelectorFieldCount> m_uses{};
};

std::string print_selector(const SelectorNode& node);

/// IDs of every tx in the view (coinbases included) matching the predicate,
/// ascending.
std::vector<std::uint32_t> filter_expr(const ChainView& view, const SelectorExpr& expr, MapReduceOptions options = {});
inline std::vector<std::uint32_t> filter_expr(const ChainView& view, std::string_view expr, MapReduceOptions options = {})
{
    return filter_expr(view, SelectorExpr::parse(expr), options);
}

} // namespace chainlens
