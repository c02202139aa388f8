#pragma once

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "embedding.hpp"
#include "io.hpp"
#include "lmi.hpp"

namespace dstab {

enum class SynthMode { Nominal, UniformQ, Robust, InputAffine };

inline const char* to_string(SynthMode m) {
    switch (m) {
    case SynthMode::Nominal: return "nominal";
    case SynthMode::UniformQ: return "uniform-Q";
    case SynthMode::Robust: return "robust";
    case SynthMode::InputAffine: return "input-affine";
    }
    return "?";
}

inline SynthMode synth_mode_from_string(const std::string& s) {
    if (s == "nominal") return SynthMode::Nominal;
    if (s == "uniform-Q" || s == "uniform") return SynthMode::UniformQ;
    if (s == "robust") return SynthMode::Robust;
    if (s == "input-affine") return SynthMode::InputAffine;
    throw std::invalid_argument("unknown synthesis mode '" + s + "'");
}

struct SynthesisProblem {
    DataMatrices data;
    PolytopicAnnihilator annihilator;
    SynthMode mode{SynthMode::Nominal};
    double delta{0.0};
    Mat Delta;                  // robust
    Mat Bbar;                   // input-affine
    std::vector<Mat> W_vertices; // input-affine, W(v_i)
    lmi::Objective objective{lmi::Objective::Feasibility};
    lmi::SolveOptions options;
};

struct SynthesisOutcome {
    lmi::Status status{lmi::Status::NumericalFailure};
    SynthMode mode{SynthMode::Nominal};
    double delta{0.0};
    int n{0}, m{0}, S{0}, T{0}, N{0};
    std::vector<Mat> R; // one per vertex, or a single R in input-affine mode
    std::vector<Mat> Q; // one per vertex, or a single Q in uniform mode
    Mat M, C1, C2;
    Vec lambda;
    std::vector<Mat> K; // gains (single K in input-affine mode)
    std::vector<Mat> G;
    double repair_eps{0.0};
    lmi::ResidualReport residuals;
    double margin{0.0};
    double eps_strict{0.0};
    double objective{0.0};
    std::string objective_solved;
    std::string solver_status;
    std::vector<std::string> warnings;

    bool feasible() const { return status == lmi::Status::Feasible; }

    /// [[M, 0], [C1, C2]]
    Mat H() const {
        Mat h = Mat::Zero(S, S);
        h.topLeftCorner(n, n) = M;
        if (S > n) {
            h.bottomLeftCorner(S - n, n) = C1;
            h.bottomRightCorner(S - n, S - n) = C2;
        }
        return h;
    }

    /// Lyapunov matrices P_i = Q_i^{-1}
    std::vector<Mat> P() const {
        std::vector<Mat> out;
        for (const auto& q : Q) out.push_back(linalg::symmetrize(q.inverse()));
        return out;
    }
};

namespace synthesis {

/// The assembled program plus the variable handles in creation order.
struct Built {
    lmi::LmiProgram prog;
    std::vector<lmi::MatrixVar> R, Q, lambda;
    lmi::MatrixVar M, C1, C2;
    bool has_C{false};
};

namespace detail {

inline Mat e_top(int S, int n) {
    Mat e = Mat::Zero(S, n);
    e.topRows(n) = Mat::Identity(n, n);
    return e;
}

inline Mat e_bottom(int S, int n) {
    Mat e = Mat::Zero(S, S - n);
    e.bottomRows(S - n) = Mat::Identity(S - n, S - n);
    return e;
}

inline void check_problem(const SynthesisProblem& p) {
    const auto& d = p.data;
    const auto& a = p.annihilator;
    linalg::require_dims(a.S == d.S, "annihilator expects S=" + std::to_string(a.S) + ", data has S=" + std::to_string(d.S));
    linalg::require_dims(a.n == d.n, "annihilator expects n=" + std::to_string(a.n) + ", data has n=" + std::to_string(d.n));
    linalg::require_dims(d.Z0.rows() == d.S && d.Z0.cols() == d.T && d.X1.rows() == d.n && d.U0.cols() == d.T,
                         "data matrices inconsistent with n, S, T");
    if (a.N() < 1) throw std::invalid_argument("annihilator has no vertices");
    if (p.mode == SynthMode::Robust) {
        linalg::require_dims(p.Delta.rows() == d.n && p.Delta.cols() == d.n, "robust mode needs an n x n Delta");
        if (linalg::min_eig(p.Delta) < -1e-12) throw std::invalid_argument("Delta must be positive semidefinite");
    }
    if (p.mode == SynthMode::InputAffine) {
        if (!d.W0bar) throw std::invalid_argument("input-affine mode needs the W0bar data block");
        linalg::require_dims(p.Bbar.rows() == d.n && p.Bbar.cols() == d.n, "input-affine mode needs an n x n Bbar");
        if (linalg::min_eig(p.Bbar) < -1e-12) throw std::invalid_argument("Bbar must be positive semidefinite");
        linalg::require_dims(static_cast<int>(p.W_vertices.size()) == a.N(), "need one W vertex per annihilator vertex");
        for (const auto& w : p.W_vertices)
            linalg::require_dims(w.rows() == d.q && w.cols() == d.m, "W vertices must be q x m");
    }
}

} // namespace detail

/// Assembles the LMI program of the requested mode. Variable creation order is fixed.
inline Built build_program(const SynthesisProblem& p) {
    detail::check_problem(p);
    using lmi::AffineExpr;
    using lmi::Structure;
    const auto& d = p.data;
    const int n = d.n, S = d.S, T = d.T, N = p.annihilator.N();
    const double delta = p.delta;
    Built b;
    auto& prog = b.prog;

    const bool single_R = p.mode == SynthMode::InputAffine;
    const bool single_Q = p.mode == SynthMode::UniformQ;
    const bool has_lambda = p.mode == SynthMode::Robust || p.mode == SynthMode::InputAffine;

    for (int i = 0; i < (single_R ? 1 : N); ++i) b.R.push_back(prog.add_var("R" + std::to_string(i + 1), T, S));
    for (int i = 0; i < (single_Q ? 1 : N); ++i)
        b.Q.push_back(prog.add_var(single_Q ? "Q" : "Q" + std::to_string(i + 1), n, n, Structure::Symmetric));
    b.M = prog.add_var("M", n, n);
    b.has_C = S > n;
    if (b.has_C) {
        b.C1 = prog.add_var("C1", S - n, n);
        b.C2 = prog.add_var("C2", S - n, S - n);
    }
    if (has_lambda)
        for (int i = 0; i < N; ++i) b.lambda.push_back(prog.add_var("lambda" + std::to_string(i + 1), 1, 1));

    const Mat Et = detail::e_top(S, n);
    Mat D = Mat::Identity(S, S);
    D.topLeftCorner(n, n) *= delta;

    // Z0 R = [[M, 0], [C1, C2]]
    AffineExpr H = Et * AffineExpr::of(b.M) * Mat(Et.transpose());
    if (b.has_C) {
        const Mat Eb = detail::e_bottom(S, n);
        H = H + Eb * AffineExpr::of(b.C1) * Mat(Et.transpose()) + Eb * AffineExpr::of(b.C2) * Mat(Eb.transpose());
    }
    for (std::size_t k = 0; k < b.R.size(); ++k)
        prog.add_equality("Z0R" + std::to_string(k + 1) + "=H", d.Z0 * AffineExpr::of(b.R[k]) - H);

    for (std::size_t k = 0; k < b.Q.size(); ++k) {
        lmi::BlockLmi pos("Q" + std::to_string(k + 1) + ">0", 1);
        pos.set(0, 0, AffineExpr::of(b.Q[k]));
        prog.add_lmi(pos);
    }

    for (int i = 0; i < N; ++i) {
        Mat Ai(S, T);
        Ai << d.X1, p.annihilator.vertices[static_cast<std::size_t>(i)] * d.Z0;
        const auto& Rv = b.R[single_R ? 0 : static_cast<std::size_t>(i)];
        const auto& Qi = b.Q[single_Q ? 0 : static_cast<std::size_t>(i)];
        const AffineExpr ARi = Ai * AffineExpr::of(Rv);
        for (int j = 0; j < N; ++j) {
            const auto& Qj = b.Q[single_Q ? 0 : static_cast<std::size_t>(j)];
            AffineExpr tl = (ARi * D).sym() + Et * AffineExpr::of(Qj) * Mat(Et.transpose());
            if (p.mode == SynthMode::Robust)
                tl = tl + AffineExpr::scaled(b.lambda[static_cast<std::size_t>(i)], Mat(-(Et * p.Delta * Et.transpose())));
            if (p.mode == SynthMode::InputAffine)
                tl = tl + AffineExpr::scaled(b.lambda[static_cast<std::size_t>(i)], Mat(-(Et * p.Bbar * Et.transpose())));
            AffineExpr off = ARi * Et + delta * (Et * AffineExpr::of(b.M).transpose());
            AffineExpr br = AffineExpr::of(b.M).sym() - AffineExpr::of(Qi);

            const bool three = has_lambda;
            lmi::BlockLmi blk("(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")", three ? 3 : 2);
            blk.set(0, 0, tl);
            blk.set(1, 0, off.transpose());
            blk.set(1, 1, br);
            if (p.mode == SynthMode::Robust) {
                blk.set(2, 0, AffineExpr::of(Rv) * D);
                blk.set(2, 1, AffineExpr::of(Rv) * Et);
                blk.set(2, 2, AffineExpr::scaled(b.lambda[static_cast<std::size_t>(i)], Mat::Identity(T, T)));
            } else if (p.mode == SynthMode::InputAffine) {
                const Mat Fi = p.W_vertices[static_cast<std::size_t>(i)] * d.U0 - *d.W0bar;
                blk.set(2, 0, Mat(-Fi) * AffineExpr::of(Rv) * D);
                blk.set(2, 1, Mat(-Fi) * AffineExpr::of(Rv) * Et);
                blk.set(2, 2, AffineExpr::scaled(b.lambda[static_cast<std::size_t>(i)], Mat::Identity(d.q, d.q)));
            }
            prog.add_lmi(std::move(blk));
        }
    }
    std::vector<lmi::MatrixVar> trace_vars = b.Q;
    prog.set_objective(p.objective, trace_vars);
    return b;
}

/// Variable values in the program's creation order.
inline std::vector<Mat> outcome_values(const Built& b, const SynthesisOutcome& o) {
    std::vector<Mat> vals(b.prog.vars().size());
    for (std::size_t k = 0; k < b.R.size(); ++k) vals[static_cast<std::size_t>(b.R[k].id)] = o.R[k];
    for (std::size_t k = 0; k < b.Q.size(); ++k) vals[static_cast<std::size_t>(b.Q[k].id)] = o.Q[k];
    vals[static_cast<std::size_t>(b.M.id)] = o.M;
    if (b.has_C) {
        vals[static_cast<std::size_t>(b.C1.id)] = o.C1;
        vals[static_cast<std::size_t>(b.C2.id)] = o.C2;
    }
    for (std::size_t k = 0; k < b.lambda.size(); ++k) vals[static_cast<std::size_t>(b.lambda[k].id)] = Mat::Constant(1, 1, o.lambda(static_cast<Index>(k)));
    return vals;
}

/// G_i = R_i H^{-1} and K_i = U0 G_i, with H inverted blockwise.
inline void extract_gains(SynthesisOutcome& o, const Mat& U0) {
    Mat Hinv;
    if (o.S > o.n) Hinv = linalg::block_lower_inverse(o.M, o.C1, o.C2);
    else Hinv = o.M.partialPivLu().inverse();
    o.G.clear();
    o.K.clear();
    for (const auto& r : o.R) {
        o.G.push_back(r * Hinv);
        o.K.push_back(U0 * o.G.back());
    }
}

/// Worst residual of the outcome against its own program, with strict blocks
/// required to clear half the strictness threshold.
inline bool residuals_pass(const SynthesisOutcome& o, const lmi::ResidualReport& r, double eq_tol = 1e-8) {
    return r.worst_lmi() >= 0.5 * o.eps_strict && r.worst_eq() <= eq_tol * (1.0 + o.eps_strict);
}

inline bool needs_repair(const SynthesisOutcome& o) {
    if (o.S == o.n) return false;
    const double nc = linalg::norm2(o.C2);
    return linalg::min_singular(o.C2) < 1e-9 * nc || nc == 0.0;
}

/// C2 <- C2 + eps I with R_i shifted by Z0^+ blkdiag(0, eps I) so the equalities stay exact.
/// Scans dyadic |eps| = 2^-40 ... 2^-1, each with both signs, and accepts the first that verifies.
inline SynthesisOutcome repair_c2(const SynthesisOutcome& in, const SynthesisProblem& p) {
    if (!needs_repair(in)) return in;
    const auto built = build_program(p);
    const Mat& Z0 = p.data.Z0;
    const Mat Z0pinv = Z0.completeOrthogonalDecomposition().pseudoInverse();
    const int n = in.n, S = in.S;
    for (int k = 40; k >= 1; --k) {
        for (const double sign : {1.0, -1.0}) {
            const double eps = sign * std::ldexp(1.0, -k);
            SynthesisOutcome o = in;
            o.C2 = in.C2 + eps * Mat::Identity(S - n, S - n);
            Mat shift = Mat::Zero(S, S);
            shift.bottomRightCorner(S - n, S - n) = eps * Mat::Identity(S - n, S - n);
            for (auto& r : o.R) r += Z0pinv * shift;
            if (linalg::min_singular(o.C2) < 1e-9 * linalg::norm2(o.C2)) continue;
            auto res = built.prog.verify_solution(outcome_values(built, o));
            if (!residuals_pass(o, res)) continue;
            o.residuals = res;
            o.repair_eps = eps;
            extract_gains(o, p.data.U0);
            return o;
        }
    }
    SynthesisOutcome o = in;
    o.status = lmi::Status::NumericalFailure;
    o.warnings.push_back("C2 repair found no admissible eps");
    return o;
}

inline SynthesisOutcome synthesize(const SynthesisProblem& p) {
    auto built = build_program(p);
    auto rep = built.prog.solve(p.options);
    const auto& d = p.data;
    SynthesisOutcome o;
    o.status = rep.status;
    o.mode = p.mode;
    o.delta = p.delta;
    o.n = d.n;
    o.m = d.m;
    o.S = d.S;
    o.T = d.T;
    o.N = p.annihilator.N();
    for (const auto& v : built.R) o.R.push_back(rep.values[static_cast<std::size_t>(v.id)]);
    for (const auto& v : built.Q) o.Q.push_back(linalg::symmetrize(rep.values[static_cast<std::size_t>(v.id)]));
    o.M = rep.values[static_cast<std::size_t>(built.M.id)];
    if (built.has_C) {
        o.C1 = rep.values[static_cast<std::size_t>(built.C1.id)];
        o.C2 = rep.values[static_cast<std::size_t>(built.C2.id)];
    } else {
        o.C1 = Mat::Zero(0, d.n);
        o.C2 = Mat::Zero(0, 0);
    }
    o.lambda = Vec::Zero(static_cast<Index>(built.lambda.size()));
    for (std::size_t k = 0; k < built.lambda.size(); ++k)
        o.lambda(static_cast<Index>(k)) = rep.values[static_cast<std::size_t>(built.lambda[k].id)](0, 0);
    o.residuals = rep.residuals;
    o.margin = rep.margin;
    o.eps_strict = rep.eps_strict;
    o.objective = rep.objective;
    o.objective_solved = rep.objective_solved;
    o.solver_status = rep.solver_status;
    if (!dataset::rank_check(d.Z0).full_row_rank) o.warnings.push_back("Z0 does not have full row rank");
    if (o.feasible()) {
        if (needs_repair(o)) o = repair_c2(o, p);
        else extract_gains(o, d.U0);
    }
    return o;
}

inline SynthesisOutcome synth_nominal(SynthesisProblem p) {
    p.mode = SynthMode::Nominal;
    return synthesize(p);
}
inline SynthesisOutcome synth_uniform_q(SynthesisProblem p) {
    p.mode = SynthMode::UniformQ;
    return synthesize(p);
}
inline SynthesisOutcome synth_robust(SynthesisProblem p) {
    p.mode = SynthMode::Robust;
    return synthesize(p);
}
inline SynthesisOutcome synth_input_affine(SynthesisProblem p) {
    p.mode = SynthMode::InputAffine;
    return synthesize(p);
}

/// Re-checks an outcome against the program of a (possibly different) mode.
inline lmi::ResidualReport verify_outcome(const SynthesisProblem& p, const SynthesisOutcome& o) {
    auto built = build_program(p);
    return built.prog.verify_solution(outcome_values(built, o));
}

/// The default grid {10^k, k = -6..4} and 0.
inline std::vector<double> default_delta_grid() {
    std::vector<double> g;
    for (int k = -6; k <= 4; ++k) g.push_back(std::pow(10.0, k));
    g.push_back(0.0);
    return g;
}

struct SweepRow {
    double delta{0.0};
    std::string status;
    double objective{0.0};
    double margin{0.0};
};

struct SweepResult {
    SynthesisOutcome best;
    std::vector<SweepRow> table;
    int best_index{-1};
};

/// Solves per delta (concurrently up to `threads`), picks the feasible one with the
/// largest objective; ties go to the smaller |delta|.
inline SweepResult delta_sweep(const SynthesisProblem& tmpl, const std::vector<double>& grid, int threads = 1) {
    if (grid.empty()) throw std::invalid_argument("delta_sweep: empty grid");
    std::vector<SynthesisOutcome> outs(grid.size());
    threads = std::max(1, threads);
    for (std::size_t start = 0; start < grid.size(); start += static_cast<std::size_t>(threads)) {
        std::vector<std::future<SynthesisOutcome>> fut;
        const std::size_t stop = std::min(grid.size(), start + static_cast<std::size_t>(threads));
        for (std::size_t k = start; k < stop; ++k) {
            SynthesisProblem p = tmpl;
            p.delta = grid[k];
            if (threads == 1) outs[k] = synthesize(p);
            else fut.push_back(std::async(std::launch::async, [p] { return synthesize(p); }));
        }
        for (std::size_t k = 0; k < fut.size(); ++k) outs[start + k] = fut[k].get();
    }
    SweepResult r;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        r.table.push_back({grid[k], lmi::to_string(outs[k].status), outs[k].objective, outs[k].margin});
        if (!outs[k].feasible()) continue;
        if (r.best_index < 0) {
            r.best_index = static_cast<int>(k);
            continue;
        }
        const auto& b = outs[static_cast<std::size_t>(r.best_index)];
        const double ob = b.objective, oc = outs[k].objective;
        const double tol = 1e-9 * std::max(std::abs(ob), std::abs(oc));
        if (oc > ob + tol || (std::abs(oc - ob) <= tol && std::abs(grid[k]) < std::abs(b.delta)))
            r.best_index = static_cast<int>(k);
    }
    if (r.best_index >= 0) {
        r.best = outs[static_cast<std::size_t>(r.best_index)];
    } else {
        r.best = outs.front();
        r.best.status = lmi::Status::Infeasible;
        for (const auto& o : outs)
            if (o.status == lmi::Status::NumericalFailure) r.best.status = lmi::Status::NumericalFailure;
        bool any_infeasible = std::any_of(outs.begin(), outs.end(), [](const auto& o) { return o.status == lmi::Status::Infeasible; });
        if (any_infeasible) r.best.status = lmi::Status::Infeasible;
    }
    return r;
}

struct GainEval {
    Mat K;
    Vec u;
    Mat G;
};

/// K(x) = sum_i alpha_i(x) K_i (constant K in input-affine mode) and u = K(x) Z(x).
inline GainEval gain_eval(const SynthesisOutcome& o, const PolytopicAnnihilator& ann, const BasisSpec& basis, const Vec& x) {
    if (!o.feasible()) throw std::invalid_argument("gain_eval: outcome is not feasible");
    GainEval g;
    if (o.K.size() == 1) {
        g.K = o.K[0];
        g.G = o.G[0];
    } else {
        const Vec a = ann.alpha(x);
        g.K = Mat::Zero(o.m, o.S);
        g.G = Mat::Zero(o.T, o.S);
        for (int i = 0; i < o.N; ++i) {
            g.K += a(i) * o.K[static_cast<std::size_t>(i)];
            g.G += a(i) * o.G[static_cast<std::size_t>(i)];
        }
    }
    g.u = g.K * eval_basis(basis, x);
    return g;
}

/// max_i |Z0 G_i - I|
inline double z0g_identity_error(const SynthesisOutcome& o, const Mat& Z0) {
    double e = 0.0;
    for (const auto& G : o.G) e = std::max(e, (Z0 * G - Mat::Identity(o.S, o.S)).cwiseAbs().maxCoeff());
    return e;
}

/// Random admissible D (DD' <= Delta): D = Delta^{1/2} V with ||V|| <= 1.
inline Mat sample_admissible_D(const Mat& Delta, int T, std::mt19937_64& rng) {
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Index n = Delta.rows();
    Mat V(n, T);
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < T; ++c) V(r, c) = g(rng);
    const double nv = linalg::norm2(V);
    if (nv > 0) V *= u(rng) / nv;
    return linalg::psd_sqrt(Delta) * V;
}

/// min over (i,j) and sampled D of the smallest eigenvalue of the nominal
/// 2x2 block with Y1 replaced by Y1 - D.
inline double petersen_check(const SynthesisOutcome& o, const SynthesisProblem& p, int count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double worst = std::numeric_limits<double>::infinity();
    for (int s = 0; s < count; ++s) {
        SynthesisProblem q = p;
        q.mode = SynthMode::Nominal;
        q.data.X1 = p.data.X1 - sample_admissible_D(p.Delta, p.data.T, rng);
        auto built = build_program(q);
        auto vals = outcome_values(built, o);
        for (std::size_t k = 0; k < built.prog.lmis().size(); ++k) {
            if (built.prog.lmis()[k].name.rfind('(', 0) != 0) continue;
            worst = std::min(worst, linalg::min_eig(built.prog.assemble(built.prog.lmis()[k], vals)));
        }
    }
    return worst;
}

inline io::json outcome_to_json(const SynthesisOutcome& o) {
    using io::json;
    json j;
    j["status"] = lmi::to_string(o.status);
    j["mode"] = to_string(o.mode);
    j["delta"] = o.delta;
    j["dims"] = {{"n", o.n}, {"m", o.m}, {"S", o.S}, {"T", o.T}, {"N", o.N}};
    auto list = [](const std::vector<Mat>& v) {
        json a = json::array();
        for (const auto& m : v) a.push_back(io::encode_matrix(m));
        return a;
    };
    j["R"] = list(o.R);
    j["Q"] = list(o.Q);
    j["M"] = io::encode_matrix(o.M);
    j["C1"] = io::encode_matrix(o.C1);
    j["C2"] = io::encode_matrix(o.C2);
    j["lambda"] = io::encode_matrix(o.lambda);
    j["K"] = list(o.K);
    j["gains"] = json::array();
    for (const auto& k : o.K) j["gains"].push_back(io::to_rows(k));
    j["lyapunov_P"] = json::array();
    if (o.feasible())
        for (const auto& p : o.P()) j["lyapunov_P"].push_back(io::to_rows(p));
    j["repair_eps"] = o.repair_eps;
    json res = json::array();
    for (std::size_t k = 0; k < o.residuals.lmi_names.size(); ++k)
        res.push_back({{"lmi", o.residuals.lmi_names[k]}, {"min_eig", o.residuals.lmi_min_eig[k]}});
    json eqs = json::array();
    for (std::size_t k = 0; k < o.residuals.eq_names.size(); ++k)
        eqs.push_back({{"equality", o.residuals.eq_names[k]}, {"max_abs", o.residuals.eq_violation[k]}});
    j["residuals"] = {{"lmis", res}, {"equalities", eqs}};
    j["solver"] = {{"margin", o.margin}, {"eps_strict", o.eps_strict}, {"objective", o.objective},
                   {"objective_solved", o.objective_solved}, {"status", o.solver_status}};
    j["warnings"] = o.warnings;
    return j;
}

inline SynthesisOutcome outcome_from_json(const io::json& j) {
    SynthesisOutcome o;
    const std::string st = j.at("status");
    o.status = st == "feasible" ? lmi::Status::Feasible : st == "infeasible" ? lmi::Status::Infeasible : lmi::Status::NumericalFailure;
    o.mode = synth_mode_from_string(j.at("mode"));
    o.delta = j.at("delta");
    const auto& d = j.at("dims");
    o.n = d.at("n");
    o.m = d.at("m");
    o.S = d.at("S");
    o.T = d.at("T");
    o.N = d.at("N");
    for (const auto& m : j.at("R")) o.R.push_back(io::decode_matrix(m));
    for (const auto& m : j.at("Q")) o.Q.push_back(io::decode_matrix(m));
    o.M = io::decode_matrix(j.at("M"));
    o.C1 = io::decode_matrix(j.at("C1"));
    o.C2 = io::decode_matrix(j.at("C2"));
    o.lambda = io::decode_matrix(j.at("lambda"));
    for (const auto& m : j.at("K")) o.K.push_back(io::decode_matrix(m));
    o.repair_eps = j.at("repair_eps");
    for (const auto& r : j.at("residuals").at("lmis")) {
        o.residuals.lmi_names.push_back(r.at("lmi"));
        o.residuals.lmi_min_eig.push_back(r.at("min_eig"));
    }
    for (const auto& r : j.at("residuals").at("equalities")) {
        o.residuals.eq_names.push_back(r.at("equality"));
        o.residuals.eq_violation.push_back(r.at("max_abs"));
    }
    const auto& s = j.at("solver");
    o.margin = s.at("margin");
    o.eps_strict = s.at("eps_strict");
    o.objective = s.at("objective");
    o.objective_solved = s.at("objective_solved");
    o.solver_status = s.at("status");
    o.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (o.feasible() && !o.R.empty()) {
        Mat Hinv = o.S > o.n ? linalg::block_lower_inverse(o.M, o.C1, o.C2) : Mat(o.M.partialPivLu().inverse());
        for (const auto& r : o.R) o.G.push_back(r * Hinv);
    }
    return o;
}

} // namespace synthesis
} // namespace dstab
