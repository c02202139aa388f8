#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "basis.hpp"
#include "dataset.hpp"
#include "embedding.hpp"
#include "expression.hpp"
#include "io.hpp"
#include "lmi.hpp"
#include "plant.hpp"
#include "synthesis.hpp"

namespace dstab {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

namespace config {

/// Bounds may be numbers, null (unbounded on that side) or "inf"/"-inf".
inline double bound_value(const io::json& j, double if_null) {
    if (j.is_null()) return if_null;
    if (j.is_string()) {
        const std::string s = j.get<std::string>();
        if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        throw ConfigError("bad bound '" + s + "'");
    }
    return j.get<double>();
}

inline Vec bound_vector(const io::json& j, double if_null) {
    Vec v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = bound_value(j[i], if_null);
    return v;
}

inline BoxDomain parse_box(const io::json& j) {
    const double inf = std::numeric_limits<double>::infinity();
    return BoxDomain(bound_vector(j.at("lo"), -inf), bound_vector(j.at("hi"), inf));
}

/// Finite sampling box; a scalar pair is broadcast to length n.
inline std::pair<Vec, Vec> parse_interval(const io::json& j, int n) {
    auto side = [&](const io::json& s) {
        if (s.is_number()) return Vec(Vec::Constant(n, s.get<double>()));
        Vec v = io::from_array(s);
        linalg::require_dims(v.size() == n, "interval must have length " + std::to_string(n));
        return v;
    };
    Vec lo = side(j.at("lo")), hi = side(j.at("hi"));
    for (Index i = 0; i < lo.size(); ++i)
        if (!(lo(i) <= hi(i)) || !std::isfinite(lo(i)) || !std::isfinite(hi(i))) throw ConfigError("interval must be finite with lo <= hi");
    return {lo, hi};
}

inline lmi::Objective parse_objective(const std::string& s) {
    if (s == "feasibility" || s == "margin") return lmi::Objective::Feasibility;
    if (s == "trace") return lmi::Objective::MaxTrace;
    if (s == "logdet") return lmi::Objective::MaxLogDet;
    throw ConfigError("unknown objective '" + s + "'");
}

} // namespace config

/// Parsed and cross-validated pipeline configuration.
struct PipelineConfig {
    io::json raw;
    std::string name;
    std::string hash;

    Plant plant;
    BasisSpec basis;
    std::optional<InputBasisSpec> input_basis;
    PolytopicAnnihilator annihilator;

    int T{10};
    Vec input_lo, input_hi, init_lo, init_hi;
    std::uint64_t seed{1};
    double noise_bound{0.0};
    bool measured{false};

    SynthMode mode{SynthMode::Nominal};
    double delta{0.0};
    std::optional<std::vector<double>> delta_grid;
    lmi::Objective objective{lmi::Objective::Feasibility};
    lmi::SolveOptions solve_options;
    Mat Delta;
    double epsbar{0.0};
    Mat Bbar;

    BoundKind bound{BoundKind::Nominal};
    std::optional<analysis::Grid> grid;
    std::optional<BoxDomain> extra_domain; // intersected with the annihilator domain for the ROA
    analysis::McOptions mc;
    std::optional<std::pair<Vec, Vec>> mc_box;
    int verify_samples{200};

    /// Canonical form used for hashing: compact dump with sorted keys.
    static std::string canonical(const io::json& j) { return j.dump(); }

    static PipelineConfig from_json(const io::json& j);
    static PipelineConfig load(const std::string& path) { return from_json(io::read_json(path)); }

    /// The vertex values W(v_i) for input-affine mode.
    std::vector<Mat> W_vertices() const {
        std::vector<Mat> w;
        if (!input_basis) return w;
        for (const auto& v : annihilator.vertex_points) w.push_back(eval_input_basis(*input_basis, v));
        return w;
    }

    /// Annihilator domain intersected with the extra domain.
    BoxDomain roa_domain() const {
        BoxDomain d = annihilator.domain;
        if (extra_domain) {
            d.lo = d.lo.cwiseMax(extra_domain->lo);
            d.hi = d.hi.cwiseMin(extra_domain->hi);
        }
        return d;
    }
};

inline PipelineConfig PipelineConfig::from_json(const io::json& j) {
    using namespace config;
    PipelineConfig c;
    c.raw = j;
    c.hash = io::fnv1a_hex(canonical(j));
    c.name = j.value("name", std::string("pipeline"));
    try {
        // plant
        const auto& pj = j.at("plant");
        if (pj.contains("builtin")) {
            std::map<std::string, double> params;
            if (pj.contains("params")) params = pj.at("params").get<std::map<std::string, double>>();
            c.plant = systems::builtin(pj.at("builtin").get<std::string>(), params);
        } else {
            c.plant = systems::from_expressions(pj.at("expressions").get<std::vector<std::string>>(), pj.value("m", -1));
        }
        const int n = c.plant.n;

        // basis
        const auto& bj = j.at("basis");
        const int bn = bj.value("n", n);
        linalg::require_dims(bn == n, "basis expects n=" + std::to_string(bn) + ", plant has n=" + std::to_string(n));
        if (bj.contains("terms")) c.basis = basis::from_terms(n, bj.at("terms").get<std::vector<std::string>>());
        else c.basis = basis::monomials_up_to_degree(n, bj.at("max_degree").get<int>());

        if (j.contains("input_basis")) {
            c.input_basis = InputBasisSpec::from_expressions(n, j.at("input_basis").at("rows").get<std::vector<std::vector<std::string>>>());
            linalg::require_dims(c.input_basis->m() == c.plant.m, "input basis has m=" + std::to_string(c.input_basis->m()) +
                                                                      ", plant has m=" + std::to_string(c.plant.m));
        }

        // annihilator
        const auto& aj = j.at("annihilator");
        const std::string kind = aj.at("kind");
        const BoxDomain domain = aj.contains("domain") ? parse_box(aj.at("domain")) : BoxDomain::global(n);
        linalg::require_dims(domain.n() == n, "annihilator domain has length " + std::to_string(domain.n()) + ", expected n=" + std::to_string(n));
        const int S = c.basis.S();
        if (kind == "monomial-box") {
            auto L = embedding::build_monomial_annihilator(c.basis);
            std::vector<int> active = L.active_coordinates();
            if (aj.contains("active")) {
                active.clear();
                for (int a : aj.at("active").get<std::vector<int>>()) active.push_back(a - 1);
            } else if (c.input_basis) {
                for (int k = 0; k < n; ++k)
                    if (c.input_basis->linear_part(k).cwiseAbs().maxCoeff() > 0 && std::find(active.begin(), active.end(), k) == active.end())
                        active.push_back(k);
            }
            c.annihilator = active.empty() ? embedding::constant_decomposition(n, L.constant, domain)
                                           : embedding::box_vertex_decomposition(L, domain, active);
        } else if (kind == "scalar-envelope") {
            const Mat L0 = io::from_rows(aj.at("L0")), L1 = io::from_rows(aj.at("L1"));
            linalg::require_dims(L0.cols() == S, "annihilator expects S=" + std::to_string(L0.cols()) + ", basis has S=" + std::to_string(S));
            linalg::require_dims(L0.rows() == S - n, "annihilator must have S-n=" + std::to_string(S - n) + " rows");
            auto sfn = std::make_shared<expr::Expression>(expr::parse(aj.at("s").get<std::string>()));
            if (sfn->state_arity() > n || sfn->input_arity() > 0) throw ConfigError("envelope scalar references unknown variables");
            std::function<double(const Vec&)> s = [sfn](const Vec& x) {
                return (*sfn)(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
            };
            const Vec vmax = io::from_array(aj.at("v_max")), vmin = io::from_array(aj.at("v_min"));
            linalg::require_dims(vmax.size() == n && vmin.size() == n, "envelope vertex points must have length n");
            const double smax = aj.contains("s_max") ? aj.at("s_max").get<double>() : s(vmax);
            const double smin = aj.contains("s_min") ? aj.at("s_min").get<double>() : s(vmin);
            c.annihilator = embedding::scalar_envelope_decomposition(L0, L1, s, smin, smax, vmax, vmin, domain);
        } else if (kind == "constant") {
            const Mat L = aj.contains("L") ? io::from_rows(aj.at("L")) : Mat(Mat::Zero(S - n, S));
            if (S > n) linalg::require_dims(L.cols() == S, "annihilator expects S=" + std::to_string(L.cols()) + ", basis has S=" + std::to_string(S));
            c.annihilator = embedding::constant_decomposition(n, S > n ? L : Mat(Mat::Zero(0, S)), domain);
        } else {
            throw ConfigError("unknown annihilator kind '" + kind + "'");
        }
        linalg::require_dims(c.annihilator.S == S, "annihilator expects S=" + std::to_string(c.annihilator.S) + ", basis has S=" + std::to_string(S));

        // experiment
        const auto& ej = j.at("experiment");
        c.T = ej.at("T");
        if (c.T < 1) throw ConfigError("experiment.T must be positive");
        std::tie(c.input_lo, c.input_hi) = parse_interval(ej.at("input_box"), c.plant.m);
        std::tie(c.init_lo, c.init_hi) = parse_interval(ej.at("init_box"), n);
        c.seed = ej.value("seed", std::uint64_t{1});
        c.noise_bound = ej.value("noise_bound", 0.0);
        c.measured = ej.value("measured", c.noise_bound > 0.0);

        // synthesis
        const auto& sj = j.at("synthesis");
        c.mode = synth_mode_from_string(sj.value("mode", std::string("nominal")));
        c.delta = sj.value("delta", 0.0);
        if (sj.contains("delta_grid")) {
            const auto& g = sj.at("delta_grid");
            if (g.is_string() && g.get<std::string>() == "default") c.delta_grid = synthesis::default_delta_grid();
            else c.delta_grid = g.get<std::vector<double>>();
        }
        c.objective = parse_objective(sj.value("objective", std::string("feasibility")));
        c.solve_options.eps_strict_rel = sj.value("eps_strict_rel", c.solve_options.eps_strict_rel);
        c.solve_options.box = sj.value("box", c.solve_options.box);
        c.solve_options.phase2_margin = sj.value("phase2_margin", c.solve_options.phase2_margin);
        c.epsbar = sj.value("epsbar", 0.0);
        if (sj.contains("Delta")) {
            const auto& dj = sj.at("Delta");
            if (dj.contains("matrix"))
                c.Delta = dataset::uncertainty_budget(n, c.noise_bound, c.epsbar, dataset::BudgetMode::Direct, io::from_rows(dj.at("matrix")));
            else
                c.Delta = dataset::uncertainty_budget(n, c.noise_bound, c.epsbar, dataset::BudgetMode::ScaledIdentity, {}, dj.at("scale").get<double>());
        } else {
            c.Delta = Mat::Zero(n, n);
        }
        c.Bbar = sj.contains("Bbar") ? io::from_rows(sj.at("Bbar")) : Mat(Mat::Zero(n, n));
        linalg::require_dims(c.Bbar.rows() == n && c.Bbar.cols() == n, "Bbar must be n x n");
        if (c.mode == SynthMode::InputAffine && !c.input_basis) throw ConfigError("input-affine mode needs an input_basis");

        // analysis
        const io::json aj2 = j.value("analysis", io::json::object());
        const std::string bound = aj2.value("bound", std::string("auto"));
        if (bound == "auto") {
            c.bound = c.mode == SynthMode::Robust        ? BoundKind::Robust
                      : c.mode == SynthMode::InputAffine ? BoundKind::InputAffine
                                                         : BoundKind::Nominal;
        } else if (bound == "h") {
            c.bound = BoundKind::Nominal;
        } else if (bound == "h-robust") {
            c.bound = BoundKind::Robust;
        } else if (bound == "h-input-affine") {
            c.bound = BoundKind::InputAffine;
        } else {
            throw ConfigError("unknown bound '" + bound + "'");
        }
        if (aj2.contains("grid")) {
            const auto& g = aj2.at("grid");
            auto [lo, hi] = parse_interval(g, n);
            std::vector<int> res;
            if (!g.contains("res")) res.assign(static_cast<std::size_t>(n), n <= 2 ? 301 : 21);
            else if (g.at("res").is_number()) res.assign(static_cast<std::size_t>(n), g.at("res").get<int>());
            else res = g.at("res").get<std::vector<int>>();
            c.grid = analysis::Grid(lo, hi, res);
        }
        if (aj2.contains("extra_domain")) c.extra_domain = parse_box(aj2.at("extra_domain"));
        if (aj2.contains("mc")) {
            const auto& m = aj2.at("mc");
            c.mc_box = parse_interval(m, n);
            c.mc.samples = m.value("samples", 5000);
            c.mc.horizon = m.value("horizon", 200);
            c.mc.threshold = m.value("threshold", 1e-6);
            const std::string mm = m.value("mode", std::string("grid"));
            if (mm != "grid" && mm != "random") throw ConfigError("mc.mode must be grid or random");
            c.mc.mode = mm == "grid" ? analysis::McRoaResult::Mode::Grid : analysis::McRoaResult::Mode::Random;
        }
        c.mc.seed = c.seed;
        c.verify_samples = aj2.value("verify_samples", 200);
    } catch (const io::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

} // namespace dstab
