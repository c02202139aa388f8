#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "analysis.hpp"
#include "config.hpp"
#include "synthesis.hpp"

namespace dstab::pipeline {

class HashMismatch : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void check_hash(const io::json& artifact, const PipelineConfig& cfg, const std::string& what) {
    const std::string h = artifact.value("config_hash", std::string());
    if (h != cfg.hash)
        throw HashMismatch("config hash mismatch: " + what + " was produced with " + (h.empty() ? "no hash" : h) +
                           ", config hashes to " + cfg.hash);
}

struct Collected {
    Trajectory trajectory;
    DataMatrices data;
};

inline Collected collect(const PipelineConfig& cfg) {
    Collected c;
    std::optional<NoiseSpec> noise;
    if (cfg.measured || cfg.noise_bound > 0.0) noise = NoiseSpec{cfg.noise_bound};
    c.trajectory = dataset::excite(cfg.plant, cfg.T, cfg.input_lo, cfg.input_hi, cfg.init_lo, cfg.init_hi, cfg.seed, noise);
    const InputBasisSpec* ib = cfg.input_basis ? &*cfg.input_basis : nullptr;
    c.data = dataset::assemble(c.trajectory, cfg.basis, ib, cfg.measured);
    return c;
}

inline io::json data_artifact(const PipelineConfig& cfg, const Collected& c) {
    io::json j = dataset::data_to_json(c.data);
    j["config_hash"] = cfg.hash;
    j["seed"] = cfg.seed;
    j["plant"] = cfg.plant.id;
    const auto rc = dataset::rank_check(c.data.Z0);
    j["rank"] = {{"rank", rc.rank}, {"min_singular", rc.min_singular}, {"full_row_rank", rc.full_row_rank}};
    return j;
}

inline SynthesisProblem make_problem(const PipelineConfig& cfg, const DataMatrices& data) {
    SynthesisProblem p;
    p.data = data;
    p.annihilator = cfg.annihilator;
    p.mode = cfg.mode;
    p.delta = cfg.delta;
    p.Delta = cfg.Delta;
    p.Bbar = cfg.Bbar;
    p.W_vertices = cfg.W_vertices();
    p.objective = cfg.objective;
    p.options = cfg.solve_options;
    return p;
}

/// Solves at the configured delta, or sweeps the configured grid.
inline synthesis::SweepResult synth(const PipelineConfig& cfg, const DataMatrices& data, int threads = 1) {
    const auto p = make_problem(cfg, data);
    if (cfg.delta_grid) return synthesis::delta_sweep(p, *cfg.delta_grid, threads);
    synthesis::SweepResult r;
    r.best = synthesis::synthesize(p);
    r.table.push_back({p.delta, lmi::to_string(r.best.status), r.best.objective, r.best.margin});
    r.best_index = r.best.feasible() ? 0 : -1;
    return r;
}

inline io::json outcome_artifact(const PipelineConfig& cfg, const synthesis::SweepResult& r) {
    io::json j = synthesis::outcome_to_json(r.best);
    j["config_hash"] = cfg.hash;
    io::json t = io::json::array();
    for (const auto& row : r.table)
        t.push_back({{"delta", row.delta}, {"status", row.status}, {"objective", row.objective}, {"margin", row.margin}});
    j["delta_sweep"] = t;
    return j;
}

/// Outcome as solved with the configured problem data (delta taken from the outcome).
inline SynthesisProblem problem_for(const PipelineConfig& cfg, const DataMatrices& data, const SynthesisOutcome& o) {
    auto p = make_problem(cfg, data);
    p.delta = o.delta;
    p.mode = o.mode;
    return p;
}

inline BoundContext bound_context(const PipelineConfig& cfg, const SynthesisOutcome& o, const DataMatrices& data) {
    BoundContext c(o, cfg.annihilator, cfg.basis, data);
    c.epsbar = cfg.epsbar;
    c.Delta = cfg.Delta;
    c.Bbar = cfg.Bbar;
    c.W_vertices = cfg.W_vertices();
    return c;
}

/// Finite box for sampling: the ROA domain clipped to the grid box, or to [-2, 2] where unbounded.
inline std::pair<Vec, Vec> sample_box(const PipelineConfig& cfg) {
    const BoxDomain d = cfg.roa_domain();
    Vec lo = d.lo, hi = d.hi;
    for (Index j = 0; j < lo.size(); ++j) {
        const double glo = cfg.grid ? cfg.grid->lo(j) : -2.0, ghi = cfg.grid ? cfg.grid->hi(j) : 2.0;
        lo(j) = std::max(lo(j), glo);
        hi(j) = std::min(hi(j), ghi);
    }
    return {lo, hi};
}

inline analysis::Grid roa_grid(const PipelineConfig& cfg) {
    if (cfg.grid) return *cfg.grid;
    auto [lo, hi] = sample_box(cfg);
    return analysis::default_grid(lo, hi);
}

inline analysis::RoaEstimate roa(const PipelineConfig& cfg, const BoundContext& ctx, int threads = 1) {
    return analysis::roa_sublevel(ctx, cfg.bound, roa_grid(cfg), cfg.roa_domain(), threads);
}

inline analysis::McRoaResult mc_roa(const PipelineConfig& cfg, const SynthesisOutcome& o, int threads = 1) {
    auto opt = cfg.mc;
    opt.threads = threads;
    Vec lo, hi;
    if (cfg.mc_box) std::tie(lo, hi) = *cfg.mc_box;
    else std::tie(lo, hi) = sample_box(cfg);
    return analysis::roa_monte_carlo(cfg.plant, analysis::make_controller(o, cfg.annihilator, cfg.basis), lo, hi, opt);
}

/// Closed-loop rollout: k, x, u, V per step; the last row has no input.
inline std::string simulate(const PipelineConfig& cfg, const SynthesisOutcome& o, const Vec& x0, int steps) {
    linalg::require_dims(x0.size() == cfg.plant.n, "x0 has length " + std::to_string(x0.size()) + ", plant has n=" + std::to_string(cfg.plant.n));
    const auto V = LyapunovFn::from_outcome(o);
    std::vector<std::string> header{"k"};
    for (int j = 1; j <= cfg.plant.n; ++j) header.push_back("x_" + std::to_string(j));
    for (int j = 1; j <= cfg.plant.m; ++j) header.push_back("u_" + std::to_string(j));
    header.emplace_back("V");
    io::CsvWriter w(header);
    Vec x = x0;
    for (int k = 0; k <= steps; ++k) {
        std::vector<std::string> row{std::to_string(k)};
        for (Index j = 0; j < x.size(); ++j) row.push_back(io::fmt(x(j)));
        Vec u;
        const bool finite = x.allFinite() && x.cwiseAbs().maxCoeff() <= dataset::overflow_guard;
        if (k < steps && finite) u = synthesis::gain_eval(o, cfg.annihilator, cfg.basis, x).u;
        for (int j = 0; j < cfg.plant.m; ++j) row.push_back(u.size() ? io::fmt(u(j)) : "");
        row.push_back(finite ? io::fmt(lyap_eval(V, cfg.annihilator, x)) : "");
        w.row(row);
        if (k == steps || !finite) break;
        x = cfg.plant.step(x, u);
    }
    return w.str();
}

struct VerifyReport {
    io::json json;
    bool pass{false};
};

/// Recomputes every residual and runs the sample checks.
inline VerifyReport verify(const PipelineConfig& cfg, const DataMatrices& data, const SynthesisOutcome& o) {
    VerifyReport v;
    auto& j = v.json;
    j["status"] = lmi::to_string(o.status);
    if (!o.feasible()) {
        j["pass"] = false;
        j["reason"] = "outcome is not feasible";
        return v;
    }
    const auto prob = problem_for(cfg, data, o);
    const auto res = synthesis::verify_outcome(prob, o);
    const bool lmi_ok = synthesis::residuals_pass(o, res);
    j["residuals"] = {{"worst_lmi_min_eig", res.worst_lmi()}, {"worst_equality", res.worst_eq()},
                      {"required_min_eig", 0.5 * o.eps_strict}, {"pass", lmi_ok}};

    const double zg = synthesis::z0g_identity_error(o, data.Z0);
    const bool zg_ok = zg <= 1e-6;
    j["z0g_identity"] = {{"max_abs_error", zg}, {"pass", zg_ok}};

    const auto [lo, hi] = sample_box(cfg);
    const BoxDomain sb(lo, hi);
    const auto ar = embedding::verify_annihilator(cfg.annihilator, cfg.basis, cfg.verify_samples, cfg.seed, &sb);
    const bool ann_ok = ar.ok();
    j["annihilator"] = {{"max_LZ", ar.max_LZ}, {"min_sigma_L2", ar.min_sigma_L2}, {"min_alpha", ar.min_alpha},
                        {"max_sum_dev", ar.max_sum_dev}, {"max_affine_dev", ar.max_affine_dev}, {"pass", ann_ok}};

    bool pd_ok = true;
    for (const auto& q : o.Q) pd_ok = pd_ok && linalg::min_eig(q) > 0.0;
    j["lyapunov_pd"] = pd_ok;

    // Decrease along the data-based loop wherever x and x+ both lie in the domain.
    bool dec_ok = true;
    if (o.mode == SynthMode::Nominal || o.mode == SynthMode::UniformQ) {
        const auto ctx = bound_context(cfg, o, data);
        const auto pts = embedding::sample_domain(cfg.roa_domain(), cfg.verify_samples, cfg.seed + 1, &sb);
        int checked = 0, violations = 0;
        double worst = -std::numeric_limits<double>::infinity();
        for (const auto& x : pts) {
            if (x.norm() == 0.0) continue;
            const Vec xp = ctx.data_step(x);
            if (!cfg.annihilator.domain.contains(xp)) continue;
            ++checked;
            const double h = analysis::h_nominal(ctx, x);
            worst = std::max(worst, h);
            if (!(h < 0.0)) ++violations;
        }
        dec_ok = violations == 0;
        j["decrease"] = {{"checked", checked}, {"violations", violations}, {"max_h", checked ? worst : 0.0}, {"pass", dec_ok}};
    }
    v.pass = lmi_ok && zg_ok && ann_ok && pd_ok && dec_ok;
    j["pass"] = v.pass;
    return v;
}

} // namespace dstab::pipeline
