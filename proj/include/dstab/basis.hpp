#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "expression.hpp"
#include "linalg.hpp"

namespace dstab {

/// Dictionary element types. Coordinates are the state entries themselves.
struct Coordinate {
    int index{0};
};

struct Monomial {
    std::vector<int> exponents;

    int degree() const {
        int d = 0;
        for (int e : exponents) d += e;
        return d;
    }
};

/// A named scalar nonlinearity such as "sin(x1)". The stored shift is
/// subtracted on evaluation so that the term vanishes at the origin.
struct ScalarTerm {
    std::string name;
    expr::Expression fn;
    double shift{0.0};
};

using BasisTerm = std::variant<Coordinate, Monomial, ScalarTerm>;

/// Records how a monomial of degree >= 2 factors as x_var * terms[quotient].
struct Factorization {
    int var{0};
    int quotient{0};
};

inline std::string monomial_name(const std::vector<int>& e) {
    std::string out;
    for (std::size_t j = 0; j < e.size(); ++j) {
        if (e[j] == 0) continue;
        if (!out.empty()) out += "*";
        out += "x" + std::to_string(j + 1);
        if (e[j] > 1) out += "^" + std::to_string(e[j]);
    }
    return out;
}

inline std::string term_name(const BasisTerm& t) {
    if (const auto* c = std::get_if<Coordinate>(&t)) return "x" + std::to_string(c->index + 1);
    if (const auto* m = std::get_if<Monomial>(&t)) return monomial_name(m->exponents);
    return std::get<ScalarTerm>(t).name;
}

/// Ordered basis dictionary Z(x) = [x; Z_(x)]. Immutable after construction.
class BasisSpec {
public:
    BasisSpec() = default;

    /// Validates the layout and records monomial factorizations when the
    /// dictionary is factor-closed.
    BasisSpec(int n, std::vector<BasisTerm> terms) : n_(n), terms_(std::move(terms)) {
        if (n_ < 1) throw std::invalid_argument("basis: state dimension must be >= 1");
        if (static_cast<int>(terms_.size()) < n_) throw std::invalid_argument("basis: S must be >= n");
        for (int i = 0; i < n_; ++i) {
            const auto* c = std::get_if<Coordinate>(&terms_[static_cast<std::size_t>(i)]);
            if (c == nullptr || c->index != i)
                throw std::invalid_argument("basis: the first n terms must be the coordinates x1..xn in order");
        }
        std::vector<std::string> seen;
        for (std::size_t k = 0; k < terms_.size(); ++k) {
            auto& t = terms_[k];
            if (auto* m = std::get_if<Monomial>(&t)) {
                if (static_cast<int>(m->exponents.size()) != n_)
                    throw std::invalid_argument("basis: monomial exponent vector length != n");
                if (std::any_of(m->exponents.begin(), m->exponents.end(), [](int e) { return e < 0; }))
                    throw std::invalid_argument("basis: negative exponent");
                if (m->degree() < 1) throw std::invalid_argument("basis: monomials must have degree >= 1");
                if (m->degree() == 1 && k >= static_cast<std::size_t>(n_))
                    throw std::invalid_argument("basis: degree-1 monomial duplicates a coordinate");
            }
            if (auto* s = std::get_if<ScalarTerm>(&t)) {
                if (s->fn.state_arity() > n_ || s->fn.input_arity() > 0)
                    throw std::invalid_argument("basis: term '" + s->name + "' references unknown variables");
                std::vector<double> zero(static_cast<std::size_t>(n_), 0.0);
                const double at_zero = s->fn(zero) - s->shift;
                if (!std::isfinite(at_zero)) throw std::invalid_argument("basis: term '" + s->name + "' not finite at 0");
                if (std::abs(at_zero) > 1e-12)
                    throw std::invalid_argument("basis: term '" + s->name + "' does not vanish at the origin");
            }
            const std::string id = term_name(t);
            if (std::find(seen.begin(), seen.end(), id) != seen.end())
                throw std::invalid_argument("basis: duplicate term '" + id + "'");
            seen.push_back(id);
        }
        compute_factorizations();
    }

    int n() const { return n_; }
    int S() const { return static_cast<int>(terms_.size()); }
    const std::vector<BasisTerm>& terms() const { return terms_; }
    const BasisTerm& term(int k) const { return terms_[static_cast<std::size_t>(k)]; }
    std::string name(int k) const { return term_name(term(k)); }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& t : terms_) out.push_back(term_name(t));
        return out;
    }

    bool all_monomial() const {
        return std::all_of(terms_.begin(), terms_.end(),
                           [](const BasisTerm& t) { return !std::holds_alternative<ScalarTerm>(t); });
    }

    /// True when every degree >= 2 term has a recorded factorization into an earlier term.
    bool factor_closed() const { return factor_closed_; }

    /// Factorization of term k (k >= n); empty for coordinates and non-monomials.
    const std::optional<Factorization>& factorization(int k) const {
        return factorizations_[static_cast<std::size_t>(k)];
    }

    /// Exponent vector of term k (coordinates map to unit vectors).
    std::optional<std::vector<int>> exponents(int k) const {
        const auto& t = term(k);
        if (const auto* c = std::get_if<Coordinate>(&t)) {
            std::vector<int> e(static_cast<std::size_t>(n_), 0);
            e[static_cast<std::size_t>(c->index)] = 1;
            return e;
        }
        if (const auto* m = std::get_if<Monomial>(&t)) return m->exponents;
        return std::nullopt;
    }

    int degree(int k) const {
        auto e = exponents(k);
        if (!e) return -1;
        int d = 0;
        for (int v : *e) d += v;
        return d;
    }

private:
    void compute_factorizations() {
        factorizations_.assign(terms_.size(), std::nullopt);
        factor_closed_ = true;
        for (int k = n_; k < S(); ++k) {
            auto e = exponents(k);
            if (!e) {
                factor_closed_ = false;
                continue;
            }
            // candidate divisors: largest exponent first, ties to the larger index
            std::vector<int> vars;
            for (int j = 0; j < n_; ++j)
                if ((*e)[static_cast<std::size_t>(j)] > 0) vars.push_back(j);
            std::stable_sort(vars.begin(), vars.end(), [&](int a, int b) {
                const int ea = (*e)[static_cast<std::size_t>(a)];
                const int eb = (*e)[static_cast<std::size_t>(b)];
                if (ea != eb) return ea > eb;
                return a > b;
            });
            bool found = false;
            for (int j : vars) {
                std::vector<int> q = *e;
                q[static_cast<std::size_t>(j)] -= 1;
                for (int p = 0; p < k; ++p) {
                    auto ep = exponents(p);
                    if (ep && *ep == q) {
                        factorizations_[static_cast<std::size_t>(k)] = Factorization{j, p};
                        found = true;
                        break;
                    }
                }
                if (found) break;
            }
            if (!found) factor_closed_ = false;
        }
    }

    int n_{0};
    std::vector<BasisTerm> terms_;
    std::vector<std::optional<Factorization>> factorizations_;
    bool factor_closed_{false};
};

namespace basis {

enum class Ordering { GradedLex, ExplicitList };

/// Parses "x1^2*x2" style monomials. Returns nullopt for anything else.
inline std::optional<std::vector<int>> parse_monomial(const std::string& text, int n) {
    static const std::regex factor_re(R"(\s*x_?(\d+)\s*(?:\^\s*(\d+))?\s*)");
    std::vector<int> e(static_cast<std::size_t>(n), 0);
    std::stringstream ss(text);
    std::string factor;
    int count = 0;
    while (std::getline(ss, factor, '*')) {
        std::smatch m;
        if (!std::regex_match(factor, m, factor_re)) return std::nullopt;
        const int idx = std::stoi(m[1].str());
        if (idx < 1 || idx > n) return std::nullopt;
        const int p = m[2].matched ? std::stoi(m[2].str()) : 1;
        if (p < 1) return std::nullopt;
        e[static_cast<std::size_t>(idx - 1)] += p;
        ++count;
    }
    if (count == 0) return std::nullopt;
    return e;
}

/// Builds a term from its textual form: monomial strings become monomials,
/// anything else is a scalar nonlinearity shifted to vanish at the origin.
inline BasisTerm parse_term(const std::string& text, int n) {
    if (auto e = parse_monomial(text, n)) {
        int deg = 0;
        int last = 0;
        for (int j = 0; j < n; ++j) {
            deg += (*e)[static_cast<std::size_t>(j)];
            if ((*e)[static_cast<std::size_t>(j)] > 0) last = j;
        }
        if (deg == 1) return Coordinate{last};
        return Monomial{*e};
    }
    ScalarTerm s;
    s.name.reserve(text.size());
    for (char c : text)
        if (!std::isspace(static_cast<unsigned char>(c))) s.name.push_back(c);
    s.fn = expr::parse(s.name);
    if (s.fn.state_arity() > n) throw std::invalid_argument("basis: term '" + text + "' references x beyond n");
    std::vector<double> zero(static_cast<std::size_t>(n), 0.0);
    const double at_zero = s.fn(zero);
    if (!std::isfinite(at_zero)) throw std::invalid_argument("basis: term '" + text + "' not finite at the origin");
    s.shift = at_zero;
    return s;
}

inline BasisSpec from_terms(int n, const std::vector<std::string>& texts) {
    std::vector<BasisTerm> terms;
    for (const auto& t : texts) terms.push_back(parse_term(t, n));
    return BasisSpec(n, std::move(terms));
}

namespace detail {
inline void enumerate_degree(int n, int d, std::vector<int>& cur, int pos, std::vector<std::vector<int>>& out) {
    if (pos == n - 1) {
        cur[static_cast<std::size_t>(pos)] = d;
        out.push_back(cur);
        return;
    }
    for (int e = d; e >= 0; --e) {
        cur[static_cast<std::size_t>(pos)] = e;
        enumerate_degree(n, d - e, cur, pos + 1, out);
    }
}
} // namespace detail

/// All monomials of total degree 1..d. Graded-lex: degree ascending, ties by
/// descending lexicographic exponent vector. With an explicit list the order
/// is preserved and the list must be degree-ascending and factor-closed.
inline BasisSpec monomials_up_to_degree(int n, int d, Ordering ordering = Ordering::GradedLex,
                                        const std::vector<std::string>& explicit_list = {}) {
    if (n < 1 || d < 1) throw std::invalid_argument("monomials_up_to_degree: need n >= 1 and d >= 1");
    if (ordering == Ordering::GradedLex) {
        std::vector<BasisTerm> terms;
        for (int j = 0; j < n; ++j) terms.push_back(Coordinate{j});
        for (int deg = 2; deg <= d; ++deg) {
            std::vector<std::vector<int>> exps;
            std::vector<int> cur(static_cast<std::size_t>(n), 0);
            detail::enumerate_degree(n, deg, cur, 0, exps); // already descending lex
            for (auto& e : exps) terms.push_back(Monomial{e});
        }
        return BasisSpec(n, std::move(terms));
    }

    BasisSpec spec = from_terms(n, explicit_list);
    if (!spec.all_monomial()) throw std::invalid_argument("monomials_up_to_degree: explicit list contains non-monomials");
    int prev = 0;
    for (int k = 0; k < spec.S(); ++k) {
        const int deg = spec.degree(k);
        if (deg > d) throw std::invalid_argument("monomials_up_to_degree: term '" + spec.name(k) + "' exceeds degree d");
        if (deg < prev) throw std::invalid_argument("monomials_up_to_degree: explicit list is not degree-ascending");
        prev = deg;
    }
    if (!spec.factor_closed()) throw std::invalid_argument("monomials_up_to_degree: explicit list is not factor-closed");
    return spec;
}

} // namespace basis

/// Evaluates Z(x). The first n entries are copied from x unchanged.
inline Vec eval_basis(const BasisSpec& spec, const Vec& x) {
    linalg::require_dims(x.size() == spec.n(), "eval_basis expects x of length n=" + std::to_string(spec.n()));
    Vec z(spec.S());
    std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
    for (int k = 0; k < spec.S(); ++k) {
        const auto& t = spec.term(k);
        double v = 0.0;
        if (const auto* c = std::get_if<Coordinate>(&t)) {
            v = x(c->index);
        } else if (const auto* m = std::get_if<Monomial>(&t)) {
            v = 1.0;
            for (int j = 0; j < spec.n(); ++j)
                for (int p = 0; p < m->exponents[static_cast<std::size_t>(j)]; ++p) v *= x(j);
        } else {
            const auto& s = std::get<ScalarTerm>(t);
            v = s.fn(xs) - s.shift;
        }
        if (!std::isfinite(v))
            throw std::domain_error("eval_basis: non-finite value for term " + std::to_string(k) + " (" + spec.name(k) + ")");
        z(k) = v;
    }
    return z;
}

/// One affine scalar entry: constant + linear' x.
struct AffineEntry {
    double constant{0.0};
    Vec linear;

    double operator()(const Vec& x) const { return constant + linear.dot(x); }
};

/// Input dictionary W(x) (q x m) with affine entries, g(x) = B W(x).
class InputBasisSpec {
public:
    InputBasisSpec() = default;
    InputBasisSpec(int n, int m, int q, std::vector<AffineEntry> entries)
        : n_(n), m_(m), q_(q), entries_(std::move(entries)) {
        if (n_ < 1 || m_ < 1 || q_ < 1) throw std::invalid_argument("input basis: dimensions must be positive");
        if (static_cast<int>(entries_.size()) != q_ * m_) throw std::invalid_argument("input basis: need q*m entries");
        for (const auto& e : entries_)
            if (e.linear.size() != n_) throw std::invalid_argument("input basis: linear part must have length n");
    }

    /// W(x) = I_m, the constant-B case.
    static InputBasisSpec identity(int n, int m) {
        std::vector<AffineEntry> e;
        for (int c = 0; c < m; ++c)
            for (int r = 0; r < m; ++r) e.push_back({r == c ? 1.0 : 0.0, Vec::Zero(n)});
        return InputBasisSpec(n, m, m, std::move(e));
    }

    /// Parses entries given row-major as expressions in x, verifying that each is affine.
    static InputBasisSpec from_expressions(int n, const std::vector<std::vector<std::string>>& rows) {
        const int q = static_cast<int>(rows.size());
        if (q == 0) throw std::invalid_argument("input basis: no rows");
        const int m = static_cast<int>(rows[0].size());
        std::vector<AffineEntry> col_major(static_cast<std::size_t>(q * m));
        for (int r = 0; r < q; ++r) {
            if (static_cast<int>(rows[static_cast<std::size_t>(r)].size()) != m)
                throw std::invalid_argument("input basis: ragged rows");
            for (int c = 0; c < m; ++c) {
                const auto& src = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
                auto f = expr::parse(src);
                if (f.state_arity() > n || f.input_arity() > 0)
                    throw std::invalid_argument("input basis: entry '" + src + "' references unknown variables");
                auto at = [&](const Vec& x) { return f(std::span<const double>(x.data(), static_cast<std::size_t>(n))); };
                AffineEntry e;
                e.constant = at(Vec::Zero(n));
                e.linear = Vec::Zero(n);
                for (int j = 0; j < n; ++j) e.linear(j) = at(Vec::Unit(n, j)) - e.constant;
                // probe a few fixed points for affinity
                const double probes[3][3] = {{0.37, -1.3, 2.1}, {-2.5, 0.8, -0.45}, {1.9, 1.1, -3.3}};
                for (const auto& p : probes) {
                    Vec x(n);
                    for (int j = 0; j < n; ++j) x(j) = p[j % 3] * (1.0 + 0.1 * j);
                    const double want = e(x);
                    if (std::abs(at(x) - want) > 1e-9 * (1.0 + std::abs(want)))
                        throw std::invalid_argument("input basis: entry '" + src + "' is not affine in x");
                }
                col_major[static_cast<std::size_t>(c * q + r)] = e;
            }
        }
        return InputBasisSpec(n, m, q, std::move(col_major));
    }

    int n() const { return n_; }
    int m() const { return m_; }
    int q() const { return q_; }
    const AffineEntry& entry(int r, int c) const { return entries_[static_cast<std::size_t>(c * q_ + r)]; }

    /// Constant part W0 and linear parts W_j such that W(x) = W0 + sum_j x_j W_j.
    Mat constant_part() const {
        Mat w(q_, m_);
        for (int r = 0; r < q_; ++r)
            for (int c = 0; c < m_; ++c) w(r, c) = entry(r, c).constant;
        return w;
    }
    Mat linear_part(int j) const {
        Mat w(q_, m_);
        for (int r = 0; r < q_; ++r)
            for (int c = 0; c < m_; ++c) w(r, c) = entry(r, c).linear(j);
        return w;
    }

private:
    int n_{0}, m_{0}, q_{0};
    std::vector<AffineEntry> entries_;
};

inline Mat eval_input_basis(const InputBasisSpec& spec, const Vec& x) {
    linalg::require_dims(x.size() == spec.n(), "eval_input_basis expects x of length n=" + std::to_string(spec.n()));
    if (!x.allFinite()) throw std::domain_error("eval_input_basis: non-finite state");
    Mat w(spec.q(), spec.m());
    for (int r = 0; r < spec.q(); ++r)
        for (int c = 0; c < spec.m(); ++c) w(r, c) = spec.entry(r, c)(x);
    return w;
}

} // namespace dstab
