#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "basis.hpp"
#include "embedding.hpp"
#include "io.hpp"
#include "plant.hpp"
#include "synthesis.hpp"

namespace dstab {

/// V(x) = x' (sum_i alpha_i(x) P_i) x, with P_i = Q_i^{-1}; Pbar = sum_i P_i bounds every P(x) on the simplex.
struct LyapunovFn {
    std::vector<Mat> P;
    Mat Pbar;

    bool uniform() const { return P.size() == 1; }

    static LyapunovFn from_outcome(const SynthesisOutcome& o) {
        if (!o.feasible()) throw std::invalid_argument("Lyapunov function needs a feasible outcome");
        LyapunovFn v;
        v.P = o.P();
        v.Pbar = Mat::Zero(o.n, o.n);
        for (const auto& p : v.P) {
            if (linalg::min_eig(p) <= 0.0) throw std::domain_error("Lyapunov matrix is not positive definite");
            v.Pbar += p;
        }
        return v;
    }

    Mat at(const Vec& alpha) const {
        if (uniform()) return P[0];
        linalg::require_dims(alpha.size() == static_cast<Index>(P.size()), "weights do not match the vertex count");
        Mat out = Mat::Zero(P[0].rows(), P[0].cols());
        for (std::size_t i = 0; i < P.size(); ++i) out += alpha(static_cast<Index>(i)) * P[i];
        return out;
    }
};

inline double lyap_eval(const LyapunovFn& V, const Vec& alpha, const Vec& x) { return x.dot(V.at(alpha) * x); }

inline double lyap_eval(const LyapunovFn& V, const PolytopicAnnihilator& ann, const Vec& x) {
    return lyap_eval(V, V.uniform() ? Vec() : ann.alpha(x), x);
}

enum class BoundKind { Nominal, Robust, InputAffine };

inline const char* to_string(BoundKind b) {
    switch (b) {
    case BoundKind::Nominal: return "h";
    case BoundKind::Robust: return "h-robust";
    case BoundKind::InputAffine: return "h-input-affine";
    }
    return "?";
}

/// Everything a bound function reads: the outcome, the embedding and the data.
struct BoundContext {
    SynthesisOutcome outcome;
    PolytopicAnnihilator annihilator;
    BasisSpec basis;
    Mat X1; // Y1 for measured data
    Mat U0;
    std::optional<Mat> W0bar;
    double epsbar{0.0};
    Mat Delta;
    Mat Bbar;
    std::vector<Mat> W_vertices;
    LyapunovFn V;

    BoundContext(SynthesisOutcome o, PolytopicAnnihilator a, BasisSpec b, const DataMatrices& d)
        : outcome(std::move(o)), annihilator(std::move(a)), basis(std::move(b)), X1(d.X1), U0(d.U0), W0bar(d.W0bar),
          V(LyapunovFn::from_outcome(outcome)) {}

    Mat G(const Vec& x) const {
        if (outcome.G.size() == 1) return outcome.G[0];
        const Vec a = annihilator.alpha(x);
        Mat g = Mat::Zero(outcome.T, outcome.S);
        for (std::size_t i = 0; i < outcome.G.size(); ++i) g += a(static_cast<Index>(i)) * outcome.G[i];
        return g;
    }

    /// G(x) Z(x)
    Vec GZ(const Vec& x) const { return G(x) * eval_basis(basis, x); }

    /// Data-based closed-loop step x+ = X1 G(x) Z(x).
    Vec data_step(const Vec& x) const { return X1 * GZ(x); }

    double V_at(const Vec& x) const { return lyap_eval(V, annihilator, x); }
};

namespace analysis {

inline double h_nominal(const BoundContext& c, const Vec& x) {
    const Vec xp = c.data_step(x);
    return c.V_at(xp) - c.V_at(x);
}

/// Upper bound on the Lyapunov difference under D D' <= Delta and ||eps|| <= epsbar.
inline double h_robust(const BoundContext& c, const Vec& x) {
    const Vec gz = c.GZ(x);
    const Vec y = c.X1 * gz;
    const double rbar = c.epsbar + std::sqrt(std::max(0.0, linalg::max_eig(c.Delta))) * gz.norm();
    const double np = linalg::norm2(c.V.Pbar);
    return y.dot(c.V.Pbar * y) + rbar * rbar * np + 2.0 * rbar * (c.V.Pbar * y).norm() - c.V_at(x);
}

/// F(x) = sum_i alpha_i(x) (W(v_i) U0 - W0bar)
inline Mat input_mismatch(const BoundContext& c, const Vec& x) {
    if (!c.W0bar) throw std::invalid_argument("input-affine bound needs W0bar");
    const Vec a = c.annihilator.alpha(x);
    Mat F = Mat::Zero(c.W0bar->rows(), c.W0bar->cols());
    for (std::size_t i = 0; i < c.W_vertices.size(); ++i) F += a(static_cast<Index>(i)) * (c.W_vertices[i] * c.U0 - *c.W0bar);
    return F;
}

inline double h_input_affine(const BoundContext& c, const Vec& x) {
    const Vec gz = c.GZ(x);
    const double c1 = 2.0 * linalg::max_eig(c.V.Pbar) * std::max(0.0, linalg::max_eig(c.Bbar));
    const Vec y = c.X1 * gz;
    const Vec f = input_mismatch(c, x) * gz;
    return 2.0 * y.dot(c.V.Pbar * y) + c1 * f.squaredNorm() - c.V_at(x);
}

inline double bound_eval(const BoundContext& c, BoundKind k, const Vec& x) {
    switch (k) {
    case BoundKind::Nominal: return h_nominal(c, x);
    case BoundKind::Robust: return h_robust(c, x);
    case BoundKind::InputAffine: return h_input_affine(c, x);
    }
    return 0.0;
}

/// Tensor grid of points lo + k (hi - lo)/(res - 1), first coordinate fastest.
struct Grid {
    Vec lo, hi;
    std::vector<int> res;

    Grid() = default;
    Grid(Vec l, Vec h, std::vector<int> r) : lo(std::move(l)), hi(std::move(h)), res(std::move(r)) {
        linalg::require_dims(lo.size() == hi.size() && static_cast<Index>(res.size()) == lo.size(), "grid box and resolution lengths differ");
        for (Index j = 0; j < lo.size(); ++j) {
            if (!(lo(j) < hi(j)) || !std::isfinite(lo(j)) || !std::isfinite(hi(j))) throw std::invalid_argument("grid box must be finite with lo < hi");
            if (res[static_cast<std::size_t>(j)] < 2) throw std::invalid_argument("grid resolution must be at least 2");
        }
    }

    int n() const { return static_cast<int>(lo.size()); }
    std::size_t size() const {
        std::size_t s = 1;
        for (int r : res) s *= static_cast<std::size_t>(r);
        return s;
    }
    double step(int j) const { return (hi(j) - lo(j)) / (res[static_cast<std::size_t>(j)] - 1); }
    double cell_volume() const {
        double v = 1.0;
        for (int j = 0; j < n(); ++j) v *= step(j);
        return v;
    }
    std::vector<int> index(std::size_t flat) const {
        std::vector<int> k(res.size());
        for (std::size_t j = 0; j < res.size(); ++j) {
            k[j] = static_cast<int>(flat % static_cast<std::size_t>(res[j]));
            flat /= static_cast<std::size_t>(res[j]);
        }
        return k;
    }
    std::size_t flat(const std::vector<int>& k) const {
        std::size_t f = 0;
        for (std::size_t j = res.size(); j-- > 0;) f = f * static_cast<std::size_t>(res[j]) + static_cast<std::size_t>(k[j]);
        return f;
    }
    Vec point(std::size_t flat_index) const {
        auto k = index(flat_index);
        Vec x(n());
        for (int j = 0; j < n(); ++j) x(j) = lo(j) + k[static_cast<std::size_t>(j)] * step(j);
        return x;
    }
    bool on_boundary(std::size_t flat_index) const {
        auto k = index(flat_index);
        for (std::size_t j = 0; j < res.size(); ++j)
            if (k[j] == 0 || k[j] == res[j] - 1) return true;
        return false;
    }
    /// Within half a step of the origin in every coordinate.
    bool is_origin_cell(const Vec& x) const {
        for (int j = 0; j < n(); ++j)
            if (std::abs(x(j)) > 0.5 * step(j) * (1 + 1e-12)) return false;
        return true;
    }
};

/// Default resolution: 301 per axis in the plane, coarser in higher dimension.
inline Grid default_grid(const Vec& lo, const Vec& hi) {
    const int n = static_cast<int>(lo.size());
    const int r = n <= 2 ? 301 : n == 3 ? 61 : 15;
    return Grid(lo, hi, std::vector<int>(static_cast<std::size_t>(n), r));
}

template <class F>
inline void parallel_for(std::size_t count, int threads, F&& body) {
    threads = std::max(1, threads);
    if (threads == 1 || count < 2) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (count + static_cast<std::size_t>(threads) - 1) / static_cast<std::size_t>(threads);
    for (int t = 0; t < threads; ++t) {
        const std::size_t a = static_cast<std::size_t>(t) * chunk, b = std::min(count, a + chunk);
        if (a >= b) break;
        pool.emplace_back([a, b, &body] {
            for (std::size_t i = a; i < b; ++i) body(i);
        });
    }
    for (auto& th : pool) th.join();
}

struct RoaEstimate {
    Grid grid;
    BoundKind kind{BoundKind::Nominal};
    std::vector<double> V, bound;
    std::vector<char> inside; // in the admissible domain
    std::vector<char> mask;
    double c_max{0.0};
    double binding_V{0.0};
    double quantum{0.0};
    double area{0.0};
    std::size_t cells{0};
    bool empty{true};
};

/// Largest sublevel set of V inside the grid that avoids bound >= 0 (origin excepted),
/// the domain exterior and the grid boundary, shrunk by one grid quantum.
inline RoaEstimate roa_sublevel(const BoundContext& c, BoundKind kind, const Grid& grid, const BoxDomain& domain,
                                int threads = 1) {
    linalg::require_dims(grid.n() == c.outcome.n, "grid dimension differs from the state dimension");
    linalg::require_dims(domain.lo.size() == grid.n(), "domain dimension differs from the grid");
    RoaEstimate r;
    r.grid = grid;
    r.kind = kind;
    const std::size_t N = grid.size();
    r.V.assign(N, 0.0);
    r.bound.assign(N, 0.0);
    r.inside.assign(N, 0);
    r.mask.assign(N, 0);
    parallel_for(N, threads, [&](std::size_t i) {
        const Vec x = grid.point(i);
        r.inside[i] = domain.contains(x) ? 1 : 0;
        r.V[i] = c.V_at(x);
        double b;
        try {
            b = bound_eval(c, kind, x);
        } catch (const std::domain_error&) {
            b = std::numeric_limits<double>::infinity();
        }
        r.bound[i] = std::isfinite(b) ? b : std::numeric_limits<double>::infinity();
    });
    std::size_t bind = N;
    for (std::size_t i = 0; i < N; ++i) {
        const Vec x = grid.point(i);
        const bool origin = grid.is_origin_cell(x);
        const bool violates = (!origin && !(r.bound[i] < 0.0)) || !r.inside[i] || grid.on_boundary(i);
        if (violates && (bind == N || r.V[i] < r.V[bind])) bind = i;
    }
    r.binding_V = r.V[bind];
    const auto k = grid.index(bind);
    for (std::size_t j = 0; j < k.size(); ++j)
        for (int d : {-1, 1}) {
            auto kk = k;
            kk[j] += d;
            if (kk[j] < 0 || kk[j] >= grid.res[j]) continue;
            r.quantum = std::max(r.quantum, std::abs(r.V[grid.flat(kk)] - r.binding_V));
        }
    r.c_max = r.binding_V - r.quantum;
    r.empty = !(r.c_max > 0.0);
    if (r.empty) r.c_max = 0.0;
    for (std::size_t i = 0; i < N && !r.empty; ++i)
        if (r.V[i] <= r.c_max) {
            r.mask[i] = 1;
            ++r.cells;
        }
    r.area = static_cast<double>(r.cells) * grid.cell_volume();
    return r;
}

inline std::string roa_csv(const RoaEstimate& r) {
    std::vector<std::string> header;
    for (int j = 1; j <= r.grid.n(); ++j) header.push_back("x_" + std::to_string(j));
    for (const char* h : {"V", "bound", "in_domain", "mask"}) header.emplace_back(h);
    io::CsvWriter w(header);
    for (std::size_t i = 0; i < r.V.size(); ++i) {
        const Vec x = r.grid.point(i);
        std::vector<std::string> row;
        for (Index j = 0; j < x.size(); ++j) row.push_back(io::fmt(x(j)));
        row.push_back(io::fmt(r.V[i]));
        row.push_back(io::fmt(r.bound[i]));
        row.push_back(r.inside[i] ? "1" : "0");
        row.push_back(r.mask[i] ? "1" : "0");
        w.row(row);
    }
    return w.str();
}

inline io::json roa_summary(const RoaEstimate& r) {
    return {{"bound", to_string(r.kind)},
            {"grid", {{"lo", io::to_array(r.grid.lo)}, {"hi", io::to_array(r.grid.hi)}, {"res", r.grid.res}}},
            {"c_max", r.c_max},
            {"binding_V", r.binding_V},
            {"quantum", r.quantum},
            {"cells", r.cells},
            {"area", r.area},
            {"empty", r.empty}};
}

using Controller = std::function<Vec(const Vec&)>;

/// True when ||x_k||_inf <= threshold at some step k <= horizon.
inline bool rollout_converges(const Plant& plant, const Controller& ctrl, Vec x, int horizon, double threshold) {
    for (int k = 0; k <= horizon; ++k) {
        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > dataset::overflow_guard) return false;
        if (x.cwiseAbs().maxCoeff() <= threshold) return true;
        if (k == horizon) break;
        try {
            const Vec u = ctrl(x);
            if (!u.allFinite()) return false;
            x = plant.step(x, u);
        } catch (const std::domain_error&) {
            return false;
        }
    }
    return false;
}

struct McRoaResult {
    enum class Mode { Grid, Random } mode{Mode::Grid};
    Vec lo, hi;
    int samples{0};
    int horizon{200};
    double threshold{1e-6};
    std::uint64_t seed{0};
    std::vector<Vec> initial;
    std::vector<char> converged;
    std::size_t converged_count{0};
    double area{0.0};
    bool empty() const { return converged_count == 0; }
};

struct McOptions {
    int samples{5000};
    int horizon{200};
    double threshold{1e-6};
    std::uint64_t seed{0};
    McRoaResult::Mode mode{McRoaResult::Mode::Grid};
    int threads{1};
};

/// Grid mode uses cell centres of round(samples^(1/n)) cells per axis; area is converged cells times cell volume.
/// Random mode samples uniformly and reports the converged fraction times the box volume.
inline McRoaResult roa_monte_carlo(const Plant& plant, const Controller& ctrl, const Vec& lo, const Vec& hi,
                                   const McOptions& opt = {}) {
    linalg::require_dims(lo.size() == plant.n && hi.size() == plant.n, "sampling box must have length n");
    if (opt.samples < 1 || opt.horizon < 0 || !(opt.threshold > 0)) throw std::invalid_argument("roa_monte_carlo: bad options");
    McRoaResult r;
    r.mode = opt.mode;
    r.lo = lo;
    r.hi = hi;
    r.horizon = opt.horizon;
    r.threshold = opt.threshold;
    r.seed = opt.seed;
    const int n = plant.n;
    double box_vol = 1.0;
    for (int j = 0; j < n; ++j) box_vol *= hi(j) - lo(j);
    double cell_vol = 0.0;
    if (opt.mode == McRoaResult::Mode::Grid) {
        const int per = std::max(1, static_cast<int>(std::lround(std::pow(opt.samples, 1.0 / n))));
        std::size_t total = 1;
        for (int j = 0; j < n; ++j) total *= static_cast<std::size_t>(per);
        for (std::size_t f = 0; f < total; ++f) {
            Vec x(n);
            std::size_t g = f;
            for (int j = 0; j < n; ++j) {
                const int k = static_cast<int>(g % static_cast<std::size_t>(per));
                g /= static_cast<std::size_t>(per);
                x(j) = lo(j) + (k + 0.5) * (hi(j) - lo(j)) / per;
            }
            r.initial.push_back(x);
        }
        cell_vol = box_vol / static_cast<double>(total);
    } else {
        std::mt19937_64 rng(opt.seed);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (int s = 0; s < opt.samples; ++s) {
            Vec x(n);
            for (int j = 0; j < n; ++j) x(j) = lo(j) + (hi(j) - lo(j)) * unit(rng);
            r.initial.push_back(x);
        }
    }
    r.samples = static_cast<int>(r.initial.size());
    r.converged.assign(r.initial.size(), 0);
    parallel_for(r.initial.size(), opt.threads, [&](std::size_t i) {
        r.converged[i] = rollout_converges(plant, ctrl, r.initial[i], opt.horizon, opt.threshold) ? 1 : 0;
    });
    for (char c : r.converged) r.converged_count += static_cast<std::size_t>(c);
    r.area = opt.mode == McRoaResult::Mode::Grid ? static_cast<double>(r.converged_count) * cell_vol
                                                 : box_vol * static_cast<double>(r.converged_count) / r.samples;
    return r;
}

inline std::string mc_csv(const McRoaResult& r) {
    std::vector<std::string> header;
    for (Index j = 1; j <= r.lo.size(); ++j) header.push_back("x_" + std::to_string(j));
    header.emplace_back("converged");
    io::CsvWriter w(header);
    for (std::size_t i = 0; i < r.initial.size(); ++i) {
        std::vector<std::string> row;
        for (Index j = 0; j < r.initial[i].size(); ++j) row.push_back(io::fmt(r.initial[i](j)));
        row.push_back(r.converged[i] ? "1" : "0");
        w.row(row);
    }
    return w.str();
}

inline io::json mc_summary(const McRoaResult& r) {
    return {{"mode", r.mode == McRoaResult::Mode::Grid ? "grid" : "random"},
            {"box", {{"lo", io::to_array(r.lo)}, {"hi", io::to_array(r.hi)}}},
            {"samples", r.samples},
            {"horizon", r.horizon},
            {"threshold", r.threshold},
            {"seed", r.seed},
            {"converged", r.converged_count},
            {"area", r.area},
            {"empty", r.empty()}};
}

/// u = K(x) Z(x) from a synthesis outcome.
inline Controller make_controller(const SynthesisOutcome& o, const PolytopicAnnihilator& ann, const BasisSpec& basis) {
    return [o, ann, basis](const Vec& x) { return synthesis::gain_eval(o, ann, basis, x).u; };
}

} // namespace analysis
} // namespace dstab
