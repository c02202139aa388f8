#pragma once

// A small arithmetic expression language used for user-defined plants, named
// basis terms and input dictionaries. Grammar:
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := '-' unary | '+' unary | power
//   power   := primary ('^' unary)?
//   primary := number | 'pi' | var | func '(' expr ')' | '(' expr ')'
//   var     := 'x' index | 'x_' index | 'u' index | 'u_' index      (1-based)
//   func    := sin | cos | tan | exp | log | sqrt | abs | tanh | sinc

#include <algorithm>
#include <cctype>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dstab::expr {

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t column)
        : std::runtime_error("parse error at column " + std::to_string(column) + ": " + msg), column_(column) {}
    /// 1-based column of the offending character (length+1 for end of input).
    std::size_t column() const { return column_; }

private:
    std::size_t column_;
};

inline double sinc(double v) { return v == 0.0 ? 1.0 : std::sin(v) / v; }

enum class Op { Const, StateVar, InputVar, Neg, Add, Sub, Mul, Div, Pow, Call };
enum class Func { Sin, Cos, Tan, Exp, Log, Sqrt, Abs, Tanh, Sinc };

struct Node {
    Op op{Op::Const};
    double value{0.0};
    int index{0};
    Func func{Func::Sin};
    std::shared_ptr<const Node> lhs;
    std::shared_ptr<const Node> rhs;
};

using NodePtr = std::shared_ptr<const Node>;

inline double evaluate(const Node& n, std::span<const double> x, std::span<const double> u) {
    switch (n.op) {
    case Op::Const: return n.value;
    case Op::StateVar: return x[static_cast<std::size_t>(n.index)];
    case Op::InputVar: return u[static_cast<std::size_t>(n.index)];
    case Op::Neg: return -evaluate(*n.lhs, x, u);
    case Op::Add: return evaluate(*n.lhs, x, u) + evaluate(*n.rhs, x, u);
    case Op::Sub: return evaluate(*n.lhs, x, u) - evaluate(*n.rhs, x, u);
    case Op::Mul: return evaluate(*n.lhs, x, u) * evaluate(*n.rhs, x, u);
    case Op::Div: return evaluate(*n.lhs, x, u) / evaluate(*n.rhs, x, u);
    case Op::Pow: {
        const double base = evaluate(*n.lhs, x, u);
        const double ex = evaluate(*n.rhs, x, u);
        // integer powers by repeated multiplication keep results exact for monomials
        if (ex == std::floor(ex) && std::abs(ex) <= 64) {
            double r = 1.0;
            for (int k = 0; k < static_cast<int>(std::abs(ex)); ++k) r *= base;
            return ex < 0 ? 1.0 / r : r;
        }
        return std::pow(base, ex);
    }
    case Op::Call: {
        const double a = evaluate(*n.lhs, x, u);
        switch (n.func) {
        case Func::Sin: return std::sin(a);
        case Func::Cos: return std::cos(a);
        case Func::Tan: return std::tan(a);
        case Func::Exp: return std::exp(a);
        case Func::Log: return std::log(a);
        case Func::Sqrt: return std::sqrt(a);
        case Func::Abs: return std::abs(a);
        case Func::Tanh: return std::tanh(a);
        case Func::Sinc: return sinc(a);
        }
    }
    }
    return 0.0;
}

/// A parsed, immutable expression. Copies share the tree.
class Expression {
public:
    Expression() = default;
    Expression(std::string source, NodePtr root, int max_state, int max_input)
        : source_(std::move(source)), root_(std::move(root)), max_state_(max_state), max_input_(max_input) {}

    double operator()(std::span<const double> x, std::span<const double> u = {}) const {
        return evaluate(*root_, x, u);
    }

    const std::string& source() const { return source_; }
    /// Number of state coordinates referenced (largest 1-based index), 0 if none.
    int state_arity() const { return max_state_; }
    int input_arity() const { return max_input_; }
    bool valid() const { return static_cast<bool>(root_); }

private:
    std::string source_;
    NodePtr root_;
    int max_state_{0};
    int max_input_{0};
};

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view s) : s_(s) {}

    Expression parse() {
        skip_ws();
        if (pos_ >= s_.size()) fail("empty expression");
        NodePtr root = parse_expr();
        skip_ws();
        if (pos_ < s_.size()) fail(std::string("unexpected '") + s_[pos_] + "'");
        return Expression(std::string(s_), root, max_state_, max_input_);
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_ + 1); }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    static NodePtr make(Op op, NodePtr l = nullptr, NodePtr r = nullptr) {
        auto n = std::make_shared<Node>();
        n->op = op;
        n->lhs = std::move(l);
        n->rhs = std::move(r);
        return n;
    }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        for (;;) {
            if (accept('+')) lhs = make(Op::Add, lhs, parse_term());
            else if (accept('-')) lhs = make(Op::Sub, lhs, parse_term());
            else return lhs;
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (accept('*')) lhs = make(Op::Mul, lhs, parse_unary());
            else if (accept('/')) lhs = make(Op::Div, lhs, parse_unary());
            else return lhs;
        }
    }

    NodePtr parse_unary() {
        if (accept('-')) return make(Op::Neg, parse_unary());
        if (accept('+')) return parse_unary();
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_primary();
        if (accept('^')) return make(Op::Pow, base, parse_unary());
        return base;
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos_ >= s_.size()) fail("unexpected end of input");
        const char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr inner = parse_expr();
            if (!accept(')')) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_identifier();
        fail(std::string("unexpected '") + c + "'");
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        char* end = nullptr;
        std::string tmp(s_.substr(pos_));
        const double v = std::strtod(tmp.c_str(), &end);
        const auto used = static_cast<std::size_t>(end - tmp.c_str());
        if (used == 0) {
            pos_ = start;
            fail("malformed number");
        }
        pos_ += used;
        auto n = std::make_shared<Node>();
        n->op = Op::Const;
        n->value = v;
        return n;
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
        const std::string id(s_.substr(start, pos_ - start));

        if (id == "pi") {
            auto n = std::make_shared<Node>();
            n->value = std::numbers::pi;
            return n;
        }
        if ((id[0] == 'x' || id[0] == 'u') && id.size() > 1) {
            std::string digits = id.substr(1);
            if (!digits.empty() && digits[0] == '_') digits = digits.substr(1);
            if (!digits.empty() && std::all_of(digits.begin(), digits.end(), [](char d) { return std::isdigit(static_cast<unsigned char>(d)); })) {
                const int idx = std::stoi(digits);
                if (idx < 1) {
                    pos_ = start;
                    fail("variable indices are 1-based");
                }
                auto n = std::make_shared<Node>();
                n->op = id[0] == 'x' ? Op::StateVar : Op::InputVar;
                n->index = idx - 1;
                if (id[0] == 'x') max_state_ = std::max(max_state_, idx);
                else max_input_ = std::max(max_input_, idx);
                return n;
            }
        }

        static const std::pair<const char*, Func> funcs[] = {
            {"sin", Func::Sin}, {"cos", Func::Cos}, {"tan", Func::Tan}, {"exp", Func::Exp}, {"log", Func::Log},
            {"sqrt", Func::Sqrt}, {"abs", Func::Abs}, {"tanh", Func::Tanh}, {"sinc", Func::Sinc}};
        for (const auto& [name, f] : funcs) {
            if (id == name) {
                if (!accept('(')) fail("expected '(' after " + id);
                NodePtr arg = parse_expr();
                if (!accept(')')) fail("expected ')'");
                auto n = std::make_shared<Node>();
                n->op = Op::Call;
                n->func = f;
                n->lhs = arg;
                return n;
            }
        }
        pos_ = start;
        fail("unknown identifier '" + id + "'");
    }

    std::string_view s_;
    std::size_t pos_{0};
    int max_state_{0};
    int max_input_{0};
};

} // namespace detail

inline Expression parse(std::string_view source) { return detail::Parser(source).parse(); }

} // namespace dstab::expr
