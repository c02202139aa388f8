#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "expression.hpp"
#include "linalg.hpp"

namespace dstab {

/// Discrete-time plant x+ = f(x, u).
struct Plant {
    std::string id;
    int n{0};
    int m{0};
    std::map<std::string, double> params;
    std::function<Vec(const Vec&, const Vec&)> step_fn;
    std::vector<std::string> warnings;

    Vec step(const Vec& x, const Vec& u) const {
        linalg::require_dims(x.size() == n && u.size() == m,
                             "plant '" + id + "' expects x in R^" + std::to_string(n) + ", u in R^" + std::to_string(m));
        return step_fn(x, u);
    }
};

namespace systems {

inline double param_or(const std::map<std::string, double>& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

/// Euler-discretized damped pendulum.
inline Plant pendulum(const std::map<std::string, double>& overrides = {}) {
    const double Ts = param_or(overrides, "Ts", 0.1);
    const double mass = param_or(overrides, "m", 1.0);
    const double ell = param_or(overrides, "l", 1.0);
    const double mu = param_or(overrides, "mu", 0.01);
    const double g = param_or(overrides, "g", 9.81);
    for (const auto& [k, v] : overrides)
        if (k != "Ts" && k != "m" && k != "l" && k != "mu" && k != "g")
            throw std::invalid_argument("pendulum: unknown parameter '" + k + "'");
    if (!(Ts > 0 && mass > 0 && ell > 0 && mu >= 0 && g > 0))
        throw std::invalid_argument("pendulum: parameters must be positive");
    Plant p;
    p.id = "pendulum";
    p.n = 2;
    p.m = 1;
    p.params = {{"Ts", Ts}, {"m", mass}, {"l", ell}, {"mu", mu}, {"g", g}};
    const double inertia = mass * ell * ell;
    p.step_fn = [=](const Vec& x, const Vec& u) {
        Vec xp(2);
        xp(0) = x(0) + Ts * x(1);
        xp(1) = (1.0 - Ts * mu / inertia) * x(1) + (Ts * g / ell) * std::sin(x(0)) + (Ts / inertia) * u(0);
        return xp;
    };
    return p;
}

/// x1+ = 0.8 x2 + 0.2 x1^3, x2+ = -0.6 x1 + x2^2 - u.
inline Plant poly2() {
    Plant p;
    p.id = "poly2";
    p.n = 2;
    p.m = 1;
    p.step_fn = [](const Vec& x, const Vec& u) {
        Vec xp(2);
        xp(0) = 0.8 * x(1) + 0.2 * x(0) * x(0) * x(0);
        xp(1) = -0.6 * x(0) + x(1) * x(1) - u(0);
        return xp;
    };
    return p;
}

/// x1+ = 0.5 x2, x2+ = x1 + x2^3 + (1 + x2) u.
inline Plant affine2() {
    Plant p;
    p.id = "affine2";
    p.n = 2;
    p.m = 1;
    p.step_fn = [](const Vec& x, const Vec& u) {
        Vec xp(2);
        xp(0) = 0.5 * x(1);
        xp(1) = x(0) + x(1) * x(1) * x(1) + (1.0 + x(1)) * u(0);
        return xp;
    };
    return p;
}

inline Plant linear(const Mat& A, const Mat& B) {
    linalg::require_dims(A.rows() == A.cols() && B.rows() == A.rows(), "linear plant needs square A and matching B");
    Plant p;
    p.id = "linear";
    p.n = static_cast<int>(A.rows());
    p.m = static_cast<int>(B.cols());
    p.step_fn = [A, B](const Vec& x, const Vec& u) { return Vec(A * x + B * u); };
    return p;
}

/// One expression per state coordinate, in x1..xn and u1..um.
inline Plant from_expressions(const std::vector<std::string>& exprs, int m = -1) {
    if (exprs.empty()) throw std::invalid_argument("plant: no expressions");
    const int n = static_cast<int>(exprs.size());
    std::vector<expr::Expression> fs;
    int max_u = 0;
    for (const auto& e : exprs) {
        fs.push_back(expr::parse(e));
        if (fs.back().state_arity() > n)
            throw DimensionError("dimension mismatch: expression '" + e + "' references x" +
                                 std::to_string(fs.back().state_arity()) + " but n=" + std::to_string(n));
        max_u = std::max(max_u, fs.back().input_arity());
    }
    if (m < 0) m = std::max(max_u, 1);
    if (max_u > m)
        throw DimensionError("dimension mismatch: expressions reference u" + std::to_string(max_u) + " but m=" +
                             std::to_string(m));
    Plant p;
    p.id = "exprs";
    p.n = n;
    p.m = m;
    p.step_fn = [fs](const Vec& x, const Vec& u) {
        Vec xp(static_cast<Index>(fs.size()));
        std::span<const double> xs(x.data(), static_cast<std::size_t>(x.size()));
        std::span<const double> us(u.data(), static_cast<std::size_t>(u.size()));
        for (std::size_t i = 0; i < fs.size(); ++i) xp(static_cast<Index>(i)) = fs[i](xs, us);
        return xp;
    };
    const Vec f0 = p.step_fn(Vec::Zero(n), Vec::Zero(m));
    if (!f0.allFinite() || f0.cwiseAbs().maxCoeff() > 0.0)
        p.warnings.push_back("origin is not an equilibrium: f(0,0) != 0");
    return p;
}

inline Plant builtin(const std::string& name, const std::map<std::string, double>& params = {}) {
    if (name == "pendulum") return pendulum(params);
    if (!params.empty()) throw std::invalid_argument("plant '" + name + "' takes no parameters");
    if (name == "poly2") return poly2();
    if (name == "affine2") return affine2();
    throw std::invalid_argument("unknown builtin plant '" + name + "'");
}

} // namespace systems
} // namespace dstab
