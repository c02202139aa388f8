#pragma once

// Dense primal-dual interior-point solver for
//
//   maximize c'y  subject to  F0_b + sum_i y_i F_ib >= 0   (PSD blocks b)
//                             a0 + A y >= 0                 (elementwise)
//
// using the HKM search direction with a Mehrotra predictor-corrector.

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "linalg.hpp"

namespace dstab::sdp {

struct Block {
    int dim{0};
    Mat F0;
    Mat F; // dim*dim x p, column i is vec(F_i), each F_i symmetric
};

struct Problem {
    int p{0};
    Vec c;
    std::vector<Block> blocks;
    Vec lp_a0;
    Mat lp_A; // rows x p
};

struct Options {
    double tol{1e-8};
    int max_iters{100};
};

enum class Status { Optimal, MaxIterations, NumericalFailure };

inline const char* to_string(Status s) {
    switch (s) {
    case Status::Optimal: return "optimal";
    case Status::MaxIterations: return "max-iterations";
    case Status::NumericalFailure: return "numerical-failure";
    }
    return "?";
}

struct Result {
    Status status{Status::NumericalFailure};
    Vec y;
    double primal_obj{0.0}; // c'y
    double dual_obj{0.0};
    double gap{0.0};
    double pinf{0.0};
    double dinf{0.0};
    int iterations{0};
};

namespace detail {

inline Mat unvec(const Mat& F, Index col, int dim) {
    return Eigen::Map<const Mat>(F.col(col).data(), dim, dim);
}

/// Largest alpha with S + alpha*dS >= 0, given the Cholesky factor of S.
inline double max_step_psd(const Eigen::LLT<Mat>& chol, const Mat& dS) {
    Mat t = chol.matrixL().solve(dS);
    t = chol.matrixL().solve(t.transpose()).transpose();
    const double lmin = linalg::min_eig(t);
    return lmin >= 0.0 ? std::numeric_limits<double>::infinity() : -1.0 / lmin;
}

inline double max_step_lp(const Vec& s, const Vec& ds) {
    double a = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < s.size(); ++k)
        if (ds(k) < 0.0) a = std::min(a, -s(k) / ds(k));
    return a;
}

} // namespace detail

inline Result solve(const Problem& P, const Options& opt = {}) {
    const int p = P.p;
    const std::size_t nb = P.blocks.size();
    const Index nlp = P.lp_a0.size();
    Result res;
    res.y = Vec::Zero(p);

    double total_dim = static_cast<double>(nlp);
    for (const auto& b : P.blocks) total_dim += b.dim;
    if (total_dim == 0) {
        res.status = Status::Optimal;
        return res;
    }

    // SDPT3-style starting point
    std::vector<Mat> X(nb), Z(nb);
    double normF0 = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        const auto& B = P.blocks[b];
        const double sq = std::sqrt(static_cast<double>(B.dim));
        double xi = std::max(10.0, sq), eta = std::max(10.0, sq);
        for (int i = 0; i < p; ++i) {
            const double fn = B.F.col(i).norm();
            xi = std::max(xi, B.dim * (1.0 + std::abs(P.c(i))) / (1.0 + fn));
            eta = std::max(eta, fn);
        }
        eta = std::max(eta, B.F0.norm());
        normF0 = std::max(normF0, B.F0.norm());
        X[b] = xi * Mat::Identity(B.dim, B.dim);
        Z[b] = eta * Mat::Identity(B.dim, B.dim);
    }
    Vec xl, zl;
    if (nlp > 0) {
        double xi = 10.0, eta = std::max(10.0, P.lp_a0.cwiseAbs().maxCoeff());
        for (int i = 0; i < p; ++i) {
            const double fn = P.lp_A.col(i).norm();
            xi = std::max(xi, (1.0 + std::abs(P.c(i))) / (1.0 + fn));
            eta = std::max(eta, fn);
        }
        normF0 = std::max(normF0, P.lp_a0.norm());
        xl = Vec::Constant(nlp, xi);
        zl = Vec::Constant(nlp, eta);
    }
    Vec& y = res.y;
    const double normc = P.c.norm();

    std::vector<Mat> Zinv(nb), Rd(nb), dX(nb), dZ(nb), dXa(nb), dZa(nb);
    for (int it = 0; it < opt.max_iters; ++it) {
        res.iterations = it;
        // residuals
        Vec rp = -P.c;
        double dres2 = 0.0, pobj = 0.0, xz = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            const auto& B = P.blocks[b];
            Eigen::Map<const Vec> xv(X[b].data(), X[b].size());
            rp.noalias() -= B.F.transpose() * xv;
            Mat fy = B.F0;
            if (p > 0) {
                Vec v = B.F * y;
                fy += Eigen::Map<const Mat>(v.data(), B.dim, B.dim);
            }
            Rd[b] = fy - Z[b];
            dres2 += Rd[b].squaredNorm();
            pobj += (B.F0.cwiseProduct(X[b])).sum();
            xz += (X[b].cwiseProduct(Z[b])).sum();
        }
        Vec rdl;
        if (nlp > 0) {
            rp.noalias() -= P.lp_A.transpose() * xl;
            rdl = P.lp_a0 + P.lp_A * y - zl;
            dres2 += rdl.squaredNorm();
            pobj += P.lp_a0.dot(xl);
            xz += xl.dot(zl);
        }
        const double dobj = P.c.dot(y);
        const double mu = xz / total_dim;
        res.primal_obj = dobj;
        res.dual_obj = pobj;
        res.gap = xz / (1.0 + std::abs(pobj) + std::abs(dobj));
        res.pinf = rp.norm() / (1.0 + normc);
        res.dinf = std::sqrt(dres2) / (1.0 + normF0);
        if (!std::isfinite(res.gap) || !std::isfinite(res.pinf) || !std::isfinite(res.dinf)) {
            res.status = Status::NumericalFailure;
            return res;
        }
        if (res.gap <= opt.tol && res.pinf <= opt.tol && res.dinf <= opt.tol) {
            res.status = Status::Optimal;
            return res;
        }

        // Schur complement
        Mat M = Mat::Zero(p, p);
        std::vector<Mat> G(nb);
        for (std::size_t b = 0; b < nb; ++b) {
            const auto& B = P.blocks[b];
            Eigen::LLT<Mat> cz(Z[b]);
            if (cz.info() != Eigen::Success) {
                res.status = Status::NumericalFailure;
                return res;
            }
            Zinv[b] = linalg::symmetrize(cz.solve(Mat::Identity(B.dim, B.dim)));
            G[b].resize(B.dim * B.dim, p);
            for (int i = 0; i < p; ++i) {
                Mat g = X[b] * detail::unvec(B.F, i, B.dim) * Zinv[b];
                G[b].col(i) = Eigen::Map<const Vec>(g.data(), g.size());
            }
            M.noalias() += B.F.transpose() * G[b];
        }
        Vec dlp;
        if (nlp > 0) {
            dlp = xl.cwiseQuotient(zl);
            M.noalias() += P.lp_A.transpose() * dlp.asDiagonal() * P.lp_A;
        }
        M = linalg::symmetrize(M);
        Eigen::LLT<Mat> cm(M);
        if (cm.info() != Eigen::Success) {
            const double reg = 1e-14 * (1.0 + M.diagonal().cwiseAbs().maxCoeff());
            cm.compute(M + reg * Mat::Identity(p, p));
            if (cm.info() != Eigen::Success) {
                res.status = Status::NumericalFailure;
                return res;
            }
        }

        // one Newton direction for target sigma*mu and corrector products
        auto direction = [&](double target, bool corrector, Vec& dy, Vec& dxl, Vec& dzl) {
            Vec rhs = P.c;
            std::vector<Mat> W(nb);
            for (std::size_t b = 0; b < nb; ++b) {
                Mat inner = X[b] * Rd[b];
                if (corrector) inner += dXa[b] * dZa[b];
                W[b] = target * Zinv[b] - inner * Zinv[b];
                Mat ws = linalg::symmetrize(W[b]);
                rhs.noalias() += P.blocks[b].F.transpose() * Eigen::Map<const Vec>(ws.data(), ws.size());
            }
            Vec wl;
            if (nlp > 0) {
                Vec inner = xl.cwiseProduct(rdl);
                if (corrector) inner += dxl.cwiseProduct(dzl);
                wl = (Vec::Constant(nlp, target) - inner).cwiseQuotient(zl);
                rhs.noalias() += P.lp_A.transpose() * wl;
            }
            dy = cm.solve(rhs);
            for (std::size_t b = 0; b < nb; ++b) {
                const auto& B = P.blocks[b];
                Mat dz = Rd[b];
                if (p > 0) {
                    Vec v = B.F * dy;
                    dz += Eigen::Map<const Mat>(v.data(), B.dim, B.dim);
                }
                dZ[b] = linalg::symmetrize(dz);
                Mat dx = W[b] - X[b] * (dZ[b] - Rd[b]) * Zinv[b] - X[b];
                dX[b] = linalg::symmetrize(dx);
            }
            if (nlp > 0) {
                Vec dz = rdl + P.lp_A * dy;
                Vec dx = wl - xl.cwiseProduct(dz - rdl).cwiseQuotient(zl) - xl;
                dzl = dz;
                dxl = dx;
            }
        };

        auto step_lengths = [&](const Vec& dxl, const Vec& dzl, double& ap, double& ad) -> bool {
            ap = ad = std::numeric_limits<double>::infinity();
            for (std::size_t b = 0; b < nb; ++b) {
                Eigen::LLT<Mat> cx(X[b]), cz(Z[b]);
                if (cx.info() != Eigen::Success || cz.info() != Eigen::Success) return false;
                ap = std::min(ap, detail::max_step_psd(cx, dX[b]));
                ad = std::min(ad, detail::max_step_psd(cz, dZ[b]));
            }
            if (nlp > 0) {
                ap = std::min(ap, detail::max_step_lp(xl, dxl));
                ad = std::min(ad, detail::max_step_lp(zl, dzl));
            }
            return true;
        };

        // predictor
        Vec dy, dxl, dzl;
        direction(0.0, false, dy, dxl, dzl);
        double ap = 0, ad = 0;
        if (!step_lengths(dxl, dzl, ap, ad)) {
            res.status = Status::NumericalFailure;
            return res;
        }
        ap = std::min(1.0, ap);
        ad = std::min(1.0, ad);
        double xz_aff = 0.0;
        for (std::size_t b = 0; b < nb; ++b)
            xz_aff += ((X[b] + ap * dX[b]).cwiseProduct(Z[b] + ad * dZ[b])).sum();
        if (nlp > 0) xz_aff += (xl + ap * dxl).dot(zl + ad * dzl);
        const double mu_aff = std::max(0.0, xz_aff / total_dim);
        double sigma = std::pow(mu_aff / mu, 3.0);
        sigma = std::clamp(sigma, 0.0, 1.0);

        // corrector
        for (std::size_t b = 0; b < nb; ++b) {
            dXa[b] = dX[b];
            dZa[b] = dZ[b];
        }
        Vec dxla = dxl, dzla = dzl;
        {
            Vec cdxl = dxla, cdzl = dzla;
            direction(sigma * mu, true, dy, cdxl, cdzl);
            dxl = cdxl;
            dzl = cdzl;
        }
        if (!step_lengths(dxl, dzl, ap, ad)) {
            res.status = Status::NumericalFailure;
            return res;
        }
        const double gamma = 0.95;
        ap = std::min(1.0, gamma * ap);
        ad = std::min(1.0, gamma * ad);
        if (ap < 1e-12 && ad < 1e-12) {
            res.status = Status::NumericalFailure;
            return res;
        }
        for (std::size_t b = 0; b < nb; ++b) {
            X[b] = linalg::symmetrize(X[b] + ap * dX[b]);
            Z[b] = linalg::symmetrize(Z[b] + ad * dZ[b]);
        }
        if (nlp > 0) {
            xl += ap * dxl;
            zl += ad * dzl;
        }
        y += ad * dy;
    }
    res.status = Status::MaxIterations;
    return res;
}

} // namespace dstab::sdp
