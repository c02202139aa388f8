#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "linalg.hpp"
#include "lmi.hpp"

namespace dstab::lmi {

/// SVD canonical coordinates of a singular E: R E W = blkdiag(I_r, 0).
struct CanonicalForm {
    Mat R, W;
    int r{0};
    int nu{0};
};

inline CanonicalForm canonical_form(const Mat& E, int r) {
    linalg::require_dims(E.rows() == E.cols(), "E must be square");
    const int nu = static_cast<int>(E.rows());
    Eigen::JacobiSVD<Mat> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const Vec& s = svd.singularValues();
    const double tol = static_cast<double>(nu) * (s.size() ? s(0) : 0.0) * std::numeric_limits<double>::epsilon();
    int rank = 0;
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > tol) ++rank;
    if (rank != r)
        throw std::invalid_argument("rank(E) is " + std::to_string(rank) + ", declared r=" + std::to_string(r));
    CanonicalForm cf;
    cf.r = r;
    cf.nu = nu;
    Mat scale = Mat::Identity(nu, nu);
    for (int i = 0; i < r; ++i) scale(i, i) = 1.0 / s(i);
    cf.R = scale * svd.matrixU().transpose();
    cf.W = svd.matrixV();
    return cf;
}

/// A11 - A12 A22^{-1} A21 of R A W.
inline Mat reduced_map(const CanonicalForm& cf, const Mat& A) {
    const Mat B = cf.R * A * cf.W;
    const int r = cf.r, k = cf.nu - cf.r;
    if (k == 0) return B;
    const Mat A22 = B.bottomRightCorner(k, k);
    Eigen::FullPivLU<Mat> lu(A22);
    if (!lu.isInvertible()) throw std::domain_error("A22 is singular: the descriptor system is not causal here");
    return B.topLeftCorner(r, r) - B.topRightCorner(r, k) * lu.solve(B.bottomLeftCorner(k, r));
}

struct AdmissibilityResult {
    Status status{Status::NumericalFailure};
    CanonicalForm form;
    std::vector<Mat> Q, P;
    Mat M, F, C1, C2, C3;
    ResidualReport residuals;
    double margin{0.0};
    std::string note;

    bool feasible() const { return status == Status::Feasible; }
};

/// Sufficient LMI test for poly-quadratic admissibility of E eta+ = sum alpha_i A_i eta.
/// Infeasibility is inconclusive.
inline AdmissibilityResult admissibility_check_lpvd(const Mat& E, const std::vector<Mat>& A, int r,
                                                    const SolveOptions& opt = {}) {
    if (A.empty()) throw std::invalid_argument("admissibility check needs at least one vertex");
    AdmissibilityResult out;
    out.form = canonical_form(E, r);
    const int nu = out.form.nu, k = nu - r;
    for (const auto& a : A) linalg::require_dims(a.rows() == nu && a.cols() == nu, "vertex matrices must be nu x nu");
    if (r < 1) throw std::invalid_argument("rank(E) must be at least 1");

    LmiProgram prog;
    std::vector<MatrixVar> Q;
    for (std::size_t i = 0; i < A.size(); ++i)
        Q.push_back(prog.add_var("Q" + std::to_string(i + 1), r, r, Structure::Symmetric));
    auto M = prog.add_var("M", r, r);
    auto F = prog.add_var("F", r, r);
    MatrixVar C1, C2, C3;
    if (k > 0) {
        C1 = prog.add_var("C1", k, r);
        C2 = prog.add_var("C2", k, k);
        C3 = prog.add_var("C3", k, r);
    }
    Mat Et = Mat::Zero(nu, r);
    Et.topRows(r) = Mat::Identity(r, r);
    Mat Eb = Mat::Zero(nu, k);
    if (k > 0) Eb.bottomRows(k) = Mat::Identity(k, k);
    const Mat EtT = Et.transpose(), EbT = Eb.transpose();

    AffineExpr Fblk = Et * AffineExpr::of(F) * EtT;
    AffineExpr Mcol = Et * AffineExpr::of(M);
    if (k > 0) {
        Fblk = Fblk + Eb * AffineExpr::of(C3) * EtT + Eb * AffineExpr::of(C2) * EbT;
        Mcol = Mcol + Eb * AffineExpr::of(C1);
    }
    for (std::size_t i = 0; i < Q.size(); ++i) {
        BlockLmi pos("Q" + std::to_string(i + 1) + ">0", 1);
        pos.set(0, 0, AffineExpr::of(Q[i]));
        prog.add_lmi(pos);
    }
    for (std::size_t i = 0; i < A.size(); ++i) {
        const Mat B = out.form.R * A[i] * out.form.W;
        for (std::size_t j = 0; j < A.size(); ++j) {
            BlockLmi blk("(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")", 2);
            blk.set(0, 0, (B * Fblk).sym() + Et * AffineExpr::of(Q[j]) * EtT);
            blk.set(1, 0, (B * Mcol + Et * AffineExpr::of(F).transpose()).transpose());
            blk.set(1, 1, AffineExpr::of(M).sym() - AffineExpr::of(Q[i]));
            prog.add_lmi(std::move(blk));
        }
    }
    auto rep = prog.solve(opt);
    out.status = rep.status;
    out.residuals = rep.residuals;
    out.margin = rep.margin;
    for (const auto& q : Q) {
        out.Q.push_back(linalg::symmetrize(rep.values[static_cast<std::size_t>(q.id)]));
        if (out.feasible()) out.P.push_back(linalg::symmetrize(out.Q.back().inverse()));
    }
    out.M = rep.values[static_cast<std::size_t>(M.id)];
    out.F = rep.values[static_cast<std::size_t>(F.id)];
    if (k > 0) {
        out.C1 = rep.values[static_cast<std::size_t>(C1.id)];
        out.C2 = rep.values[static_cast<std::size_t>(C2.id)];
        out.C3 = rep.values[static_cast<std::size_t>(C3.id)];
    }
    if (out.status == Status::Infeasible) out.note = "test inconclusive for admissibility";
    return out;
}

} // namespace dstab::lmi
