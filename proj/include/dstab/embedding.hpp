#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "basis.hpp"
#include "linalg.hpp"

namespace dstab {

/// Matrix-valued map affine in x: A(x) = constant + sum_j x_j * linear[j].
struct AffineMatrixFn {
    Mat constant;
    std::vector<Mat> linear;

    Index rows() const { return constant.rows(); }
    Index cols() const { return constant.cols(); }
    int n() const { return static_cast<int>(linear.size()); }

    Mat operator()(const Vec& x) const {
        linalg::require_dims(x.size() == n(), "affine map expects x of length " + std::to_string(n()));
        Mat out = constant;
        for (int j = 0; j < n(); ++j)
            if (x(j) != 0.0) out += x(j) * linear[static_cast<std::size_t>(j)];
        return out;
    }

    bool depends_on(int j) const { return linear[static_cast<std::size_t>(j)].cwiseAbs().maxCoeff() > 0.0; }

    std::vector<int> active_coordinates() const {
        std::vector<int> out;
        for (int j = 0; j < n(); ++j)
            if (rows() > 0 && cols() > 0 && depends_on(j)) out.push_back(j);
        return out;
    }
};

/// Axis-aligned domain. Infinite bounds mark coordinates left unconstrained.
struct BoxDomain {
    Vec lo;
    Vec hi;

    static BoxDomain global(int n) {
        const double inf = std::numeric_limits<double>::infinity();
        return {Vec::Constant(n, -inf), Vec::Constant(n, inf)};
    }

    static BoxDomain symmetric(const Vec& half_width) { return {-half_width, half_width}; }

    BoxDomain() = default;
    BoxDomain(Vec l, Vec h) : lo(std::move(l)), hi(std::move(h)) {
        if (lo.size() != hi.size()) throw DimensionError("dimension mismatch: box lo/hi lengths differ");
        for (Index j = 0; j < lo.size(); ++j) {
            if (!(lo(j) < hi(j))) throw std::invalid_argument("box: need lo < hi in every coordinate");
            if (!(lo(j) < 0.0 && 0.0 < hi(j))) throw std::invalid_argument("box: the origin must lie strictly inside");
        }
    }

    int n() const { return static_cast<int>(lo.size()); }
    bool bounded(int j) const { return std::isfinite(lo(j)) && std::isfinite(hi(j)); }
    bool is_global() const {
        for (int j = 0; j < n(); ++j)
            if (std::isfinite(lo(j)) || std::isfinite(hi(j))) return false;
        return true;
    }

    bool contains(const Vec& x) const {
        for (int j = 0; j < n(); ++j)
            if (x(j) < lo(j) || x(j) > hi(j)) return false;
        return true;
    }
};

/// Vertex description of L(x) = sum_i alpha_i(x) L_i over a domain.
struct PolytopicAnnihilator {
    int n{0};
    int S{0};
    std::vector<Mat> vertices;      // each (S-n) x S
    std::vector<Vec> vertex_points; // states at which L(v_i) = L_i
    std::function<Vec(const Vec&)> weights;
    std::function<Mat(const Vec&)> exact; // L(x) evaluated directly, when known
    BoxDomain domain;
    std::string mode;

    int N() const { return static_cast<int>(vertices.size()); }

    Vec alpha(const Vec& x) const { return weights(x); }

    /// sum_i alpha_i(x) L_i
    Mat L(const Vec& x) const {
        Vec a = alpha(x);
        Mat out = Mat::Zero(S - n, S);
        for (int i = 0; i < N(); ++i) out += a(i) * vertices[static_cast<std::size_t>(i)];
        return out;
    }

    Mat L2(const Vec& x) const { return L(x).rightCols(S - n); }
};

namespace embedding {

/// Affine annihilator of a factor-closed monomial dictionary: each row places
/// x_j over the quotient column and -1 on the term itself.
inline AffineMatrixFn build_monomial_annihilator(const BasisSpec& spec) {
    if (!spec.all_monomial())
        throw std::invalid_argument("build_monomial_annihilator: dictionary contains non-monomial terms");
    if (!spec.factor_closed())
        throw std::invalid_argument("build_monomial_annihilator: dictionary is not factor-closed");
    const int n = spec.n();
    const int S = spec.S();
    AffineMatrixFn L;
    L.constant = Mat::Zero(S - n, S);
    L.linear.assign(static_cast<std::size_t>(n), Mat::Zero(S - n, S));
    for (int k = 0; k < S - n; ++k) {
        const auto& f = spec.factorization(n + k);
        L.linear[static_cast<std::size_t>(f->var)](k, f->quotient) = 1.0;
        L.constant(k, n + k) = -1.0;
    }
    return L;
}

/// Multilinear (tensor-product barycentric) decomposition over the box
/// corners of the active coordinates. Vertex i takes, for active coordinate
/// number b, the upper bound when bit b of i is clear and the lower bound
/// otherwise. Inactive coordinates sit at 0 in the vertex points.
inline PolytopicAnnihilator box_vertex_decomposition(const AffineMatrixFn& L, const BoxDomain& domain,
                                                     std::vector<int> active = {}) {
    const int n = L.n();
    linalg::require_dims(domain.n() == n, "box has length " + std::to_string(domain.n()) + ", expected n=" + std::to_string(n));
    if (active.empty()) active = L.active_coordinates();
    for (int j : L.active_coordinates())
        if (std::find(active.begin(), active.end(), j) == active.end())
            throw std::invalid_argument("box_vertex_decomposition: active set omits a coordinate L depends on");
    std::sort(active.begin(), active.end());
    for (int j : active)
        if (!domain.bounded(j))
            throw std::invalid_argument("box_vertex_decomposition: domain unbounded in x" + std::to_string(j + 1) +
                                        ", on which L depends");

    const int k = static_cast<int>(active.size());
    if (k > 16) throw std::invalid_argument("box_vertex_decomposition: too many active coordinates");
    const int N = 1 << k;

    PolytopicAnnihilator out;
    out.n = n;
    out.S = static_cast<int>(L.cols());
    out.domain = domain;
    out.mode = "box";
    for (int i = 0; i < N; ++i) {
        Vec v = Vec::Zero(n);
        for (int b = 0; b < k; ++b) {
            const int j = active[static_cast<std::size_t>(b)];
            v(j) = ((i >> b) & 1) ? domain.lo(j) : domain.hi(j);
        }
        out.vertex_points.push_back(v);
        out.vertices.push_back(L(v));
    }
    const Vec lo = domain.lo;
    const Vec hi = domain.hi;
    out.weights = [active, lo, hi, N, k](const Vec& x) {
        Vec a(N);
        for (int i = 0; i < N; ++i) {
            double w = 1.0;
            for (int b = 0; b < k; ++b) {
                const int j = active[static_cast<std::size_t>(b)];
                const double width = hi(j) - lo(j);
                w *= ((i >> b) & 1) ? (hi(j) - x(j)) / width : (x(j) - lo(j)) / width;
            }
            a(i) = w;
        }
        return a;
    };
    out.exact = [L](const Vec& x) { return L(x); };
    return out;
}

/// Two-vertex decomposition for L = L0 + s(x) L1 with s bounded in [s_min, s_max].
inline PolytopicAnnihilator scalar_envelope_decomposition(const Mat& L0, const Mat& L1,
                                                          std::function<double(const Vec&)> s, double s_min,
                                                          double s_max, const Vec& v_max, const Vec& v_min,
                                                          const BoxDomain& domain) {
    if (!(s_max > s_min)) throw std::invalid_argument("scalar_envelope_decomposition: need s_max > s_min");
    if (L0.rows() != L1.rows() || L0.cols() != L1.cols())
        throw DimensionError("dimension mismatch: envelope template parts differ in shape");
    PolytopicAnnihilator out;
    out.n = static_cast<int>(v_max.size());
    out.S = static_cast<int>(L0.cols());
    out.domain = domain;
    out.mode = "scalar-envelope";
    out.vertices = {L0 + s_max * L1, L0 + s_min * L1};
    out.vertex_points = {v_max, v_min};
    out.weights = [s, s_min, s_max](const Vec& x) {
        Vec a(2);
        a(0) = (s(x) - s_min) / (s_max - s_min);
        a(1) = 1.0 - a(0);
        return a;
    };
    out.exact = [L0, L1, s](const Vec& x) { return Mat(L0 + s(x) * L1); };
    return out;
}

/// User-supplied vertices and weight functions.
inline PolytopicAnnihilator explicit_decomposition(int n, std::vector<Mat> vertices,
                                                   std::function<Vec(const Vec&)> weights, const BoxDomain& domain,
                                                   std::vector<Vec> vertex_points = {}) {
    if (vertices.empty()) throw std::invalid_argument("explicit decomposition: no vertices");
    PolytopicAnnihilator out;
    out.n = n;
    out.S = static_cast<int>(vertices[0].cols());
    for (const auto& v : vertices)
        if (v.rows() != out.S - n || v.cols() != out.S)
            throw DimensionError("dimension mismatch: vertex matrices must be (S-n) x S");
    out.vertices = std::move(vertices);
    out.vertex_points = std::move(vertex_points);
    out.weights = std::move(weights);
    out.domain = domain;
    out.mode = "explicit";
    return out;
}

/// Constant L (including the empty S = n case): one vertex, weight 1.
inline PolytopicAnnihilator constant_decomposition(int n, const Mat& L, const BoxDomain& domain) {
    PolytopicAnnihilator out;
    out.n = n;
    out.S = static_cast<int>(L.cols());
    out.vertices = {L};
    out.vertex_points = {Vec::Zero(n)};
    out.weights = [](const Vec&) { return Vec::Ones(1); };
    out.exact = [L](const Vec&) { return L; };
    out.domain = domain;
    out.mode = "constant";
    return out;
}

struct AnnihilatorReport {
    double max_LZ{0.0};
    double min_sigma_L2{std::numeric_limits<double>::infinity()};
    double min_alpha{std::numeric_limits<double>::infinity()};
    double max_sum_dev{0.0};
    double max_affine_dev{0.0}; // against the exact L(x) when known
    int samples{0};

    bool ok(double lz_tol = 1e-12, double sigma_tol = 1e-9, double alpha_tol = -1e-9, double sum_tol = 1e-12,
            double affine_tol = 1e-10) const {
        return max_LZ <= lz_tol && min_sigma_L2 >= sigma_tol && min_alpha >= alpha_tol && max_sum_dev <= sum_tol &&
               max_affine_dev <= affine_tol;
    }
};

/// Uniform samples from the domain box; unbounded coordinates fall back to sample_box.
inline std::vector<Vec> sample_domain(const BoxDomain& domain, int samples, std::uint64_t seed,
                                      const BoxDomain* sample_box = nullptr) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Vec> out;
    for (int s = 0; s < samples; ++s) {
        Vec x(domain.n());
        for (int j = 0; j < domain.n(); ++j) {
            double lo = domain.lo(j), hi = domain.hi(j);
            if (sample_box != nullptr) {
                lo = std::max(lo, sample_box->lo(j));
                hi = std::min(hi, sample_box->hi(j));
            }
            if (!std::isfinite(lo) || !std::isfinite(hi))
                throw std::invalid_argument("sample_domain: unbounded coordinate needs a sampling box");
            x(j) = lo + (hi - lo) * unit(rng);
        }
        out.push_back(x);
    }
    return out;
}

inline AnnihilatorReport verify_annihilator(const PolytopicAnnihilator& ann, const BasisSpec& spec, int samples,
                                            std::uint64_t seed, const BoxDomain* sample_box = nullptr) {
    if (samples < 1) throw std::invalid_argument("verify_annihilator: samples must be >= 1");
    linalg::require_dims(ann.S == spec.S(), "annihilator expects S=" + std::to_string(ann.S) + ", basis has S=" +
                                                std::to_string(spec.S()));
    AnnihilatorReport r;
    r.samples = samples;
    for (const Vec& x : sample_domain(ann.domain, samples, seed, sample_box)) {
        const Vec a = ann.alpha(x);
        const Mat L = ann.L(x);
        const Vec z = eval_basis(spec, x);
        if (L.rows() > 0) {
            r.max_LZ = std::max(r.max_LZ, (L * z).cwiseAbs().maxCoeff());
            r.min_sigma_L2 = std::min(r.min_sigma_L2, linalg::min_singular(L.rightCols(spec.S() - spec.n())));
        }
        r.min_alpha = std::min(r.min_alpha, a.minCoeff());
        r.max_sum_dev = std::max(r.max_sum_dev, std::abs(a.sum() - 1.0));
        if (ann.exact && L.size() > 0)
            r.max_affine_dev = std::max(r.max_affine_dev, (L - ann.exact(x)).cwiseAbs().maxCoeff());
    }
    return r;
}

} // namespace embedding
} // namespace dstab
