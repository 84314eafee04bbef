// Copyright (c) 2026 The chainlens developers
// Distributed under the MIT software license, see the accompanying
// file COPYING or http://www.opensource.org/licenses/mit-license.php.

#include <chainlens/errors.hpp>
#include <chainlens/selector.hpp>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>

namespace chainlens {

namespace {

constexpr std::array<std::string_view, kSelectorFieldCount> kFieldNames = {
    "fee", "input_count", "output_count", "total_out", "total_in", "locktime", "size", "height",
};

enum class Tok { number, ident, op, lparen, rparen, end };

struct Token {
    Tok kind;
    std::string text;
    std::size_t pos;
};

std::vector<Token> tokenize(std::string_view s)
{
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (std::isdigit(static_cast<unsigned char>(c))) {
            while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
            if (i < s.size() && s[i] == '.') {
                ++i;
                if (i == s.size() || !std::isdigit(static_cast<unsigned char>(s[i]))) {
                    throw ParseError("digit expected after '.'", 0, i);
                }
                while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
            }
            if (i < s.size() && (s[i] == 'e' || s[i] == 'E')) {
                std::size_t j = i + 1;
                if (j < s.size() && (s[j] == '+' || s[j] == '-')) ++j;
                if (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) {
                    i = j;
                    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
                }
            }
            out.push_back({Tok::number, std::string(s.substr(start, i - start)), start});
        } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_')) ++i;
            out.push_back({Tok::ident, std::string(s.substr(start, i - start)), start});
        } else if (c == '(') {
            out.push_back({Tok::lparen, "(", i++});
        } else if (c == ')') {
            out.push_back({Tok::rparen, ")", i++});
        } else if (c == '<' || c == '>' || c == '=' || c == '!') {
            if (i + 1 < s.size() && s[i + 1] == '=') {
                out.push_back({Tok::op, std::string(s.substr(i, 2)), start});
                i += 2;
            } else if (c == '<' || c == '>') {
                out.push_back({Tok::op, std::string(1, c), i++});
            } else {
                throw ParseError(std::string("unexpected '") + c + "'", 0, i);
            }
        } else if (c == '+' || c == '-' || c == '*' || c == '/') {
            out.push_back({Tok::op, std::string(1, c), i++});
        } else {
            throw ParseError(std::string("unexpected character '") + c + "'", 0, i);
        }
    }
    out.push_back({Tok::end, "", s.size()});
    return out;
}

class ExprParser {
public:
    explicit ExprParser(std::vector<Token> tokens) : m_toks(std::move(tokens)) {}

    SelectorNode parse()
    {
        SelectorNode n = parse_or();
        if (peek().kind != Tok::end) throw ParseError("unexpected '" + peek().text + "'", 0, peek().pos);
        return n;
    }

private:
    const Token& peek() const { return m_toks[m_i]; }
    bool is_op(std::string_view op) const { return peek().kind == Tok::op && peek().text == op; }
    bool is_word(std::string_view w) const { return peek().kind == Tok::ident && peek().text == w; }

    static SelectorNode binary(SelectorOp op, SelectorNode a, SelectorNode b)
    {
        SelectorNode n;
        n.op = op;
        n.children.push_back(std::move(a));
        n.children.push_back(std::move(b));
        return n;
    }

    SelectorNode parse_or()
    {
        SelectorNode n = parse_and();
        while (is_word("or")) {
            ++m_i;
            n = binary(SelectorOp::or_, std::move(n), parse_and());
        }
        return n;
    }

    SelectorNode parse_and()
    {
        SelectorNode n = parse_cmp();
        while (is_word("and")) {
            ++m_i;
            n = binary(SelectorOp::and_, std::move(n), parse_cmp());
        }
        return n;
    }

    SelectorNode parse_cmp()
    {
        static const std::pair<std::string_view, SelectorOp> ops[] = {
            {"<", SelectorOp::lt}, {">", SelectorOp::gt}, {"<=", SelectorOp::le},
            {">=", SelectorOp::ge}, {"==", SelectorOp::eq}, {"!=", SelectorOp::ne},
        };
        SelectorNode n = parse_sum();
        for (const auto& [text, op] : ops) {
            if (is_op(text)) {
                ++m_i;
                n = binary(op, std::move(n), parse_sum());
                break;
            }
        }
        return n;
    }

    SelectorNode parse_sum()
    {
        SelectorNode n = parse_term();
        while (is_op("+") || is_op("-")) {
            SelectorOp op = peek().text == "+" ? SelectorOp::add : SelectorOp::sub;
            ++m_i;
            n = binary(op, std::move(n), parse_term());
        }
        return n;
    }

    SelectorNode parse_term()
    {
        SelectorNode n = parse_atom();
        while (is_op("*") || is_op("/")) {
            SelectorOp op = peek().text == "*" ? SelectorOp::mul : SelectorOp::div;
            ++m_i;
            n = binary(op, std::move(n), parse_atom());
        }
        return n;
    }

    SelectorNode parse_atom()
    {
        const Token& t = peek();
        SelectorNode n;
        switch (t.kind) {
        case Tok::number:
            n.number = std::strtold(t.text.c_str(), nullptr);
            ++m_i;
            return n;
        case Tok::op:
            // a leading minus is part of a numeric literal
            if (t.text == "-" && m_toks[m_i + 1].kind == Tok::number && m_toks[m_i + 1].pos == t.pos + 1) {
                n.number = -std::strtold(m_toks[m_i + 1].text.c_str(), nullptr);
                m_i += 2;
                return n;
            }
            break;
        case Tok::lparen: {
            ++m_i;
            n = parse_or();
            if (peek().kind != Tok::rparen) throw ParseError("')' expected", 0, peek().pos);
            ++m_i;
            return n;
        }
        case Tok::ident: {
            if (t.text == "not") {
                ++m_i;
                n.op = SelectorOp::negate_not;
                n.children.push_back(parse_atom());
                return n;
            }
            auto f = parse_field_name(t.text);
            if (!f) throw ParseError("unknown field '" + t.text + "'", 0, t.pos);
            n.op = SelectorOp::field;
            n.field = *f;
            ++m_i;
            return n;
        }
        default:
            break;
        }
        if (t.kind == Tok::end) throw ParseError("unexpected end of expression", 0, t.pos);
        throw ParseError("unexpected '" + t.text + "'", 0, t.pos);
    }

    std::vector<Token> m_toks;
    std::size_t m_i = 0;
};

std::string_view op_text(SelectorOp op)
{
    switch (op) {
    case SelectorOp::add: return "+";
    case SelectorOp::sub: return "-";
    case SelectorOp::mul: return "*";
    case SelectorOp::div: return "/";
    case SelectorOp::lt: return "<";
    case SelectorOp::gt: return ">";
    case SelectorOp::le: return "<=";
    case SelectorOp::ge: return ">=";
    case SelectorOp::eq: return "==";
    case SelectorOp::ne: return "!=";
    case SelectorOp::and_: return "and";
    case SelectorOp::or_: return "or";
    default: return "?";
    }
}

std::string print_number(long double v)
{
    char buf[64];
    if (v == std::floor(v) && std::fabs(v) < 1e19L) {
        std::snprintf(buf, sizeof(buf), "%.0Lf", v);
    } else {
        // 21 significant digits round-trip the 64-bit mantissa
        std::snprintf(buf, sizeof(buf), "%.21Lg", v);
    }
    return buf;
}

} // namespace

std::string_view field_name(SelectorField f) noexcept { return kFieldNames[static_cast<std::size_t>(f)]; }

std::optional<SelectorField> parse_field_name(std::string_view name) noexcept
{
    for (std::size_t i = 0; i < kFieldNames.size(); ++i) {
        if (kFieldNames[i] == name) return static_cast<SelectorField>(i);
    }
    return std::nullopt;
}

TxFields tx_fields(const TxView& tx, std::uint32_t height) noexcept
{
    TxFields f{};
    f[static_cast<std::size_t>(SelectorField::fee)] = static_cast<long double>(tx.fee());
    f[static_cast<std::size_t>(SelectorField::input_count)] = tx.input_count();
    f[static_cast<std::size_t>(SelectorField::output_count)] = tx.output_count();
    f[static_cast<std::size_t>(SelectorField::total_out)] = static_cast<long double>(tx.total_out());
    f[static_cast<std::size_t>(SelectorField::total_in)] = static_cast<long double>(tx.total_in());
    f[static_cast<std::size_t>(SelectorField::locktime)] = tx.locktime();
    f[static_cast<std::size_t>(SelectorField::size)] = tx.size();
    f[static_cast<std::size_t>(SelectorField::height)] = height;
    return f;
}

std::string print_selector(const SelectorNode& n)
{
    switch (n.op) {
    case SelectorOp::number:
        return print_number(n.number);
    case SelectorOp::field:
        return std::string(field_name(n.field));
    case SelectorOp::negate_not:
        return "not " + print_selector(n.children[0]);
    default:
        return "(" + print_selector(n.children[0]) + " " + std::string(op_text(n.op)) + " " +
               print_selector(n.children[1]) + ")";
    }
}

SelectorExpr SelectorExpr::parse(std::string_view text)
{
    return SelectorExpr(ExprParser(tokenize(text)).parse());
}

SelectorExpr::SelectorExpr(SelectorNode root) : m_root(std::move(root))
{
    compile(m_root, 1);
}

// Postfix code for a stack machine; depth tracks the peak stack height.
void SelectorExpr::compile(const SelectorNode& node, std::size_t depth)
{
    m_stack = std::max(m_stack, depth);
    for (std::size_t i = 0; i < node.children.size(); ++i) compile(node.children[i], depth + i);
    if (node.op == SelectorOp::field) m_uses[static_cast<std::size_t>(node.field)] = true;
    m_code.push_back({node.op, node.field, node.number});
}

std::string SelectorExpr::print() const { return print_selector(m_root); }

long double SelectorExpr::evaluate(const TxFields& fields) const noexcept
{
    // expressions are tiny; a fixed array avoids allocation per tx
    constexpr std::size_t kInline = 64;
    long double small[kInline];
    std::vector<long double> big;
    long double* st = small;
    if (m_stack > kInline) {
        big.resize(m_stack);
        st = big.data();
    }
    std::size_t sp = 0;
    for (const Instr& in : m_code) {
        switch (in.op) {
        case SelectorOp::number:
            st[sp++] = in.number;
            continue;
        case SelectorOp::field:
            st[sp++] = fields[static_cast<std::size_t>(in.field)];
            continue;
        case SelectorOp::negate_not:
            st[sp - 1] = st[sp - 1] == 0 ? 1 : 0;
            continue;
        default:
            break;
        }
        long double b = st[--sp];
        long double a = st[sp - 1];
        long double r = 0;
        switch (in.op) {
        case SelectorOp::add: r = a + b; break;
        case SelectorOp::sub: r = a - b; break;
        case SelectorOp::mul: r = a * b; break;
        case SelectorOp::div: r = b == 0 ? 0 : a / b; break;
        case SelectorOp::lt: r = a < b; break;
        case SelectorOp::gt: r = a > b; break;
        case SelectorOp::le: r = a <= b; break;
        case SelectorOp::ge: r = a >= b; break;
        case SelectorOp::eq: r = a == b; break;
        case SelectorOp::ne: r = a != b; break;
        case SelectorOp::and_: r = (a != 0 && b != 0); break;
        case SelectorOp::or_: r = (a != 0 || b != 0); break;
        default: break;
        }
        st[sp - 1] = r;
    }
    return sp ? st[0] : 0;
}

std::vector<std::uint32_t> filter_expr(const ChainView& view, const SelectorExpr& expr, MapReduceOptions options)
{
    using Ids = std::vector<std::uint32_t>;
    std::uint32_t end = detail::range_end(options, view.tx_count());
    return detail::run_chunks<Ids>(
        options.first, end, options,
        [&](std::uint32_t lo, std::uint32_t hi) {
            Ids out;
            std::uint32_t height = view.height_of(lo);
            std::uint32_t next_block = view.block_txs(height).second;
            for (std::uint32_t id = lo; id < hi; ++id) {
                while (id >= next_block) next_block = view.block_txs(++height).second;
                if (expr.matches(tx_fields(view.tx(id), height))) out.push_back(id);
            }
            return out;
        },
        [](Ids a, Ids b) {
            a.insert(a.end(), b.begin(), b.end());
            return a;
        },
        Ids{});
}

} // namespace chainlens
