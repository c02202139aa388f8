#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "io.hpp"
#include "linalg.hpp"
#include "sdp_solver.hpp"

namespace dstab::lmi {

enum class Structure { Free, Symmetric };

struct MatrixVar {
    int id{-1};
    int rows{0};
    int cols{0};
    Structure structure{Structure::Free};
    std::string name;
    int offset{0}; // first scalar index

    int scalars() const { return structure == Structure::Symmetric ? rows * (rows + 1) / 2 : rows * cols; }
};

/// One term L * op(V) * R, or v * C for a scalar variable when scalar is set.
struct Term {
    int var{-1};
    Mat L;
    Mat R;
    bool transposed{false};
    bool scalar{false};
    Mat C;
};

/// Constant plus a sum of terms linear in the decision variables.
class AffineExpr {
public:
    AffineExpr() = default;
    AffineExpr(Index rows, Index cols) : constant_(Mat::Zero(rows, cols)) {}
    explicit AffineExpr(Mat constant) : constant_(std::move(constant)) {}

    static AffineExpr of(const MatrixVar& v) {
        AffineExpr e(v.rows, v.cols);
        e.terms_.push_back({v.id, Mat::Identity(v.rows, v.rows), Mat::Identity(v.cols, v.cols), false, false, {}});
        return e;
    }

    /// v * C for a 1x1 variable v.
    static AffineExpr scaled(const MatrixVar& v, const Mat& C) {
        if (v.rows != 1 || v.cols != 1) throw std::invalid_argument("scaled(): variable '" + v.name + "' is not scalar");
        AffineExpr e(C.rows(), C.cols());
        e.terms_.push_back({v.id, {}, {}, false, true, C});
        return e;
    }

    Index rows() const { return constant_.rows(); }
    Index cols() const { return constant_.cols(); }
    const Mat& constant() const { return constant_; }
    const std::vector<Term>& terms() const { return terms_; }

    AffineExpr transpose() const {
        AffineExpr e(Mat(constant_.transpose()));
        for (const auto& t : terms_) {
            if (t.scalar) e.terms_.push_back({t.var, {}, {}, false, true, t.C.transpose()});
            else e.terms_.push_back({t.var, t.R.transpose(), t.L.transpose(), !t.transposed, false, {}});
        }
        return e;
    }

    AffineExpr sym() const { return *this + transpose(); }

    friend AffineExpr operator*(const Mat& A, const AffineExpr& x) {
        linalg::require_dims(A.cols() == x.rows(), "left factor has " + std::to_string(A.cols()) + " columns, expression has " +
                                                       std::to_string(x.rows()) + " rows");
        AffineExpr e(Mat(A * x.constant_));
        for (const auto& t : x.terms_) {
            if (t.scalar) e.terms_.push_back({t.var, {}, {}, false, true, A * t.C});
            else e.terms_.push_back({t.var, A * t.L, t.R, t.transposed, false, {}});
        }
        return e;
    }

    friend AffineExpr operator*(const AffineExpr& x, const Mat& B) {
        linalg::require_dims(x.cols() == B.rows(), "expression has " + std::to_string(x.cols()) + " columns, right factor has " +
                                                       std::to_string(B.rows()) + " rows");
        AffineExpr e(Mat(x.constant_ * B));
        for (const auto& t : x.terms_) {
            if (t.scalar) e.terms_.push_back({t.var, {}, {}, false, true, t.C * B});
            else e.terms_.push_back({t.var, t.L, t.R * B, t.transposed, false, {}});
        }
        return e;
    }

    friend AffineExpr operator*(double s, const AffineExpr& x) {
        AffineExpr e(Mat(s * x.constant_));
        for (auto t : x.terms_) {
            if (t.scalar) t.C *= s;
            else t.L *= s;
            e.terms_.push_back(std::move(t));
        }
        return e;
    }

    friend AffineExpr operator+(const AffineExpr& a, const AffineExpr& b) {
        linalg::require_dims(a.rows() == b.rows() && a.cols() == b.cols(), "sum of expressions with different shapes");
        AffineExpr e(Mat(a.constant_ + b.constant_));
        e.terms_ = a.terms_;
        e.terms_.insert(e.terms_.end(), b.terms_.begin(), b.terms_.end());
        return e;
    }

    friend AffineExpr operator+(const AffineExpr& a, const Mat& c) { return a + AffineExpr(c); }
    friend AffineExpr operator-(const AffineExpr& a, const AffineExpr& b) { return a + (-1.0) * b; }
    friend AffineExpr operator-(const AffineExpr& a, const Mat& c) { return a + AffineExpr(Mat(-c)); }

private:
    Mat constant_;
    std::vector<Term> terms_;
};

/// Symmetric block matrix given by its lower triangle; upper blocks mirror.
struct BlockLmi {
    std::string name;
    std::vector<std::vector<std::optional<AffineExpr>>> blocks; // blocks[i][j], j <= i
    bool strict{true};

    explicit BlockLmi(std::string nm, int k) : name(std::move(nm)), blocks(static_cast<std::size_t>(k)) {
        for (int i = 0; i < k; ++i) blocks[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(i + 1));
    }
    void set(int i, int j, AffineExpr e) {
        if (j > i) throw std::invalid_argument("BlockLmi::set: only lower-triangular blocks are given");
        blocks[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = std::move(e);
    }
    int grid() const { return static_cast<int>(blocks.size()); }
};

enum class Objective { Feasibility, MaxTrace, MaxLogDet };

inline const char* to_string(Objective o) {
    switch (o) {
    case Objective::Feasibility: return "feasibility";
    case Objective::MaxTrace: return "trace";
    case Objective::MaxLogDet: return "logdet";
    }
    return "?";
}

enum class Status { Feasible, Infeasible, NumericalFailure };

inline const char* to_string(Status s) {
    switch (s) {
    case Status::Feasible: return "feasible";
    case Status::Infeasible: return "infeasible";
    case Status::NumericalFailure: return "numerical-failure";
    }
    return "?";
}

struct ResidualReport {
    std::vector<std::string> lmi_names;
    std::vector<double> lmi_min_eig;
    std::vector<std::string> eq_names;
    std::vector<double> eq_violation;
    double worst_lmi() const {
        return lmi_min_eig.empty() ? std::numeric_limits<double>::infinity()
                                   : *std::min_element(lmi_min_eig.begin(), lmi_min_eig.end());
    }
    double worst_eq() const {
        return eq_violation.empty() ? 0.0 : *std::max_element(eq_violation.begin(), eq_violation.end());
    }
};

struct SolveOptions {
    double tol{1e-8};
    int max_iters{100};
    double eps_strict_rel{1e-7}; // relative to the program scale
    double box{1.0};             // |y_k| <= box normalizes homogeneous programs
    double phase2_margin{0.5};   // fraction of the optimal margin kept in the objective phase
};

struct SolveReport {
    Status status{Status::NumericalFailure};
    std::vector<Mat> values; // indexed by variable id
    ResidualReport residuals;
    double margin{0.0}; // optimal t of the margin phase
    double eps_strict{0.0};
    double scale{0.0};
    double objective{0.0};
    std::string objective_solved;
    std::string solver_status;
    int iterations{0};
    double solve_seconds{0.0};
    int reduced_dim{0};
};

class LmiProgram {
public:
    MatrixVar add_var(const std::string& name, int rows, int cols, Structure s = Structure::Free) {
        if (rows < 1 || cols < 1) throw std::invalid_argument("variable '" + name + "' needs a positive shape");
        if (s == Structure::Symmetric && rows != cols) throw std::invalid_argument("symmetric variable '" + name + "' must be square");
        MatrixVar v{static_cast<int>(vars_.size()), rows, cols, s, name, nscalars_};
        nscalars_ += v.scalars();
        vars_.push_back(v);
        return v;
    }

    void add_lmi(BlockLmi lmi) {
        check_refs(lmi);
        lmis_.push_back(std::move(lmi));
    }

    void add_equality(const std::string& name, AffineExpr e) {
        for (const auto& t : e.terms()) check_var(t.var);
        eq_names_.push_back(name);
        eqs_.push_back(std::move(e));
    }

    /// Objective maximizes the sum of traces of the given symmetric variables.
    void set_objective(Objective o, std::vector<MatrixVar> trace_vars = {}) {
        objective_ = o;
        trace_vars_ = std::move(trace_vars);
    }

    const std::vector<MatrixVar>& vars() const { return vars_; }
    const std::vector<BlockLmi>& lmis() const { return lmis_; }
    int scalar_count() const { return nscalars_; }
    Objective objective() const { return objective_; }

    /// Scalar index of entry (r, c) of v (symmetric variables use the upper triangle).
    int scalar_index(const MatrixVar& v, int r, int c) const {
        if (v.structure == Structure::Symmetric) {
            if (r > c) std::swap(r, c);
            // row-major upper triangle
            return v.offset + r * v.rows - r * (r - 1) / 2 + (c - r);
        }
        return v.offset + c * v.rows + r;
    }

    Mat unpack(const MatrixVar& v, const Vec& y) const {
        Mat out(v.rows, v.cols);
        for (int r = 0; r < v.rows; ++r)
            for (int c = 0; c < v.cols; ++c) out(r, c) = y(scalar_index(v, r, c));
        return out;
    }

    Vec pack(const std::vector<Mat>& values) const {
        Vec y = Vec::Zero(nscalars_);
        for (const auto& v : vars_)
            for (int r = 0; r < v.rows; ++r)
                for (int c = 0; c < v.cols; ++c) {
                    if (v.structure == Structure::Symmetric && r > c) continue;
                    y(scalar_index(v, r, c)) = values[static_cast<std::size_t>(v.id)](r, c);
                }
        return y;
    }

    /// Direct evaluation of an expression at given variable values.
    static Mat evaluate(const AffineExpr& e, const std::vector<Mat>& values) {
        Mat out = e.constant();
        for (const auto& t : e.terms()) {
            const Mat& V = values[static_cast<std::size_t>(t.var)];
            if (t.scalar) out += V(0, 0) * t.C;
            else if (t.transposed) out += t.L * V.transpose() * t.R;
            else out += t.L * V * t.R;
        }
        return out;
    }

    /// Assembled symmetric block matrix at given values.
    Mat assemble(const BlockLmi& lmi, const std::vector<Mat>& values) const {
        auto dims = block_dims(lmi);
        Index total = 0;
        std::vector<Index> off;
        for (Index d : dims) {
            off.push_back(total);
            total += d;
        }
        Mat out = Mat::Zero(total, total);
        for (int i = 0; i < lmi.grid(); ++i)
            for (int j = 0; j <= i; ++j) {
                const auto& b = lmi.blocks[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                if (!b) continue;
                Mat v = evaluate(*b, values);
                out.block(off[static_cast<std::size_t>(i)], off[static_cast<std::size_t>(j)], v.rows(), v.cols()) = v;
                if (i != j) out.block(off[static_cast<std::size_t>(j)], off[static_cast<std::size_t>(i)], v.cols(), v.rows()) = v.transpose();
            }
        return out;
    }

    /// Independent recomputation of block minimum eigenvalues and equality violations.
    ResidualReport verify_solution(const std::vector<Mat>& values) const {
        if (values.size() != vars_.size()) throw std::invalid_argument("verify_solution: values do not cover all variables");
        for (const auto& v : vars_)
            linalg::require_dims(values[static_cast<std::size_t>(v.id)].rows() == v.rows &&
                                     values[static_cast<std::size_t>(v.id)].cols() == v.cols,
                                 "value for '" + v.name + "' has the wrong shape");
        ResidualReport r;
        for (const auto& l : lmis_) {
            r.lmi_names.push_back(l.name);
            r.lmi_min_eig.push_back(linalg::min_eig(assemble(l, values)));
        }
        for (std::size_t k = 0; k < eqs_.size(); ++k) {
            r.eq_names.push_back(eq_names_[k]);
            Mat v = evaluate(eqs_[k], values);
            r.eq_violation.push_back(v.size() ? v.cwiseAbs().maxCoeff() : 0.0);
        }
        return r;
    }

    /// Self-describing dump: block structure and sparse coefficients.
    io::json dump() const {
        io::json j;
        j["format"] = "dstab-lmi-1";
        j["scalars"] = nscalars_;
        j["variables"] = io::json::array();
        for (const auto& v : vars_)
            j["variables"].push_back({{"name", v.name}, {"rows", v.rows}, {"cols", v.cols},
                                      {"structure", v.structure == Structure::Symmetric ? "symmetric" : "free"},
                                      {"offset", v.offset}});
        j["lmis"] = io::json::array();
        for (const auto& l : lmis_) {
            auto c = lmi_coefficients(l);
            io::json jl{{"name", l.name}, {"strict", l.strict}, {"dim", c.F0.rows()}};
            jl["F0"] = sparse_json(c.F0);
            io::json coeffs = io::json::object();
            for (const auto& [s, F] : c.F) coeffs[std::to_string(s)] = sparse_json(F);
            jl["coefficients"] = coeffs;
            j["lmis"].push_back(jl);
        }
        j["equalities"] = io::json::array();
        for (std::size_t k = 0; k < eqs_.size(); ++k) {
            auto [E, e0] = equality_rows(eqs_[k]);
            j["equalities"].push_back({{"name", eq_names_[k]}, {"A", sparse_json(E)}, {"b", io::to_array(Vec(-e0))}});
        }
        j["objective"] = to_string(objective_);
        return j;
    }

    SolveReport solve(const SolveOptions& opt = {}) const;

private:
    struct Coeffs {
        Mat F0;
        std::map<int, Mat> F;
    };

    static io::json sparse_json(const Mat& m) {
        io::json e = io::json::array();
        for (Index c = 0; c < m.cols(); ++c)
            for (Index r = 0; r < m.rows(); ++r)
                if (m(r, c) != 0.0) e.push_back({r, c, m(r, c)});
        return {{"rows", m.rows()}, {"cols", m.cols()}, {"entries", e}};
    }

    void check_var(int id) const {
        if (id < 0 || id >= static_cast<int>(vars_.size())) throw std::invalid_argument("expression references an undeclared variable");
    }

    void check_refs(const BlockLmi& l) const {
        for (const auto& row : l.blocks)
            for (const auto& b : row)
                if (b)
                    for (const auto& t : b->terms()) check_var(t.var);
        block_dims(l);
    }

    std::vector<Index> block_dims(const BlockLmi& l) const {
        std::vector<Index> dims(static_cast<std::size_t>(l.grid()), -1);
        for (int i = 0; i < l.grid(); ++i) {
            const auto& d = l.blocks[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
            if (!d) throw std::invalid_argument("LMI '" + l.name + "': missing diagonal block " + std::to_string(i));
            if (d->rows() != d->cols()) throw DimensionError("dimension mismatch: LMI '" + l.name + "' diagonal block not square");
            dims[static_cast<std::size_t>(i)] = d->rows();
        }
        for (int i = 0; i < l.grid(); ++i)
            for (int j = 0; j < i; ++j) {
                const auto& b = l.blocks[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                if (b && (b->rows() != dims[static_cast<std::size_t>(i)] || b->cols() != dims[static_cast<std::size_t>(j)]))
                    throw DimensionError("dimension mismatch: LMI '" + l.name + "' block (" + std::to_string(i) + "," +
                                         std::to_string(j) + ")");
            }
        return dims;
    }

    /// Adds the coefficient matrices of expression e into acc (shape of e).
    void expr_coefficients(const AffineExpr& e, std::map<int, Mat>& acc) const {
        auto add = [&](int s, const Mat& m) {
            auto it = acc.find(s);
            if (it == acc.end()) acc.emplace(s, m);
            else it->second += m;
        };
        for (const auto& t : e.terms()) {
            const auto& v = vars_[static_cast<std::size_t>(t.var)];
            if (t.scalar) {
                add(v.offset, t.C);
                continue;
            }
            for (int r = 0; r < v.rows; ++r)
                for (int c = 0; c < v.cols; ++c) {
                    if (v.structure == Structure::Symmetric && r > c) continue;
                    // entry (r,c) of V, plus its mirror for symmetric off-diagonals
                    auto contrib = [&](int a, int b) -> Mat {
                        return t.transposed ? Mat(t.L.col(b) * t.R.row(a)) : Mat(t.L.col(a) * t.R.row(b));
                    };
                    Mat m = contrib(r, c);
                    if (v.structure == Structure::Symmetric && r != c) m += contrib(c, r);
                    add(scalar_index(v, r, c), m);
                }
        }
    }

    Coeffs lmi_coefficients(const BlockLmi& l) const {
        auto dims = block_dims(l);
        std::vector<Index> off;
        Index total = 0;
        for (Index d : dims) {
            off.push_back(total);
            total += d;
        }
        Coeffs c;
        c.F0 = Mat::Zero(total, total);
        for (int i = 0; i < l.grid(); ++i)
            for (int j = 0; j <= i; ++j) {
                const auto& b = l.blocks[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                if (!b) continue;
                const Index ro = off[static_cast<std::size_t>(i)], co = off[static_cast<std::size_t>(j)];
                auto place = [&](Mat& target, const Mat& m) {
                    target.block(ro, co, m.rows(), m.cols()) += m;
                    if (i != j) target.block(co, ro, m.cols(), m.rows()) += m.transpose();
                };
                place(c.F0, b->constant());
                std::map<int, Mat> acc;
                expr_coefficients(*b, acc);
                for (auto& [s, m] : acc) {
                    auto it = c.F.find(s);
                    if (it == c.F.end()) it = c.F.emplace(s, Mat::Zero(total, total)).first;
                    place(it->second, m);
                }
            }
        auto check_sym = [&](const Mat& m) {
            const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
            if (asym > 1e-12 * (1.0 + m.cwiseAbs().maxCoeff()))
                throw std::invalid_argument("LMI '" + l.name + "': diagonal blocks are not symmetric");
        };
        check_sym(c.F0);
        c.F0 = linalg::symmetrize(c.F0);
        for (auto& [s, m] : c.F) {
            check_sym(m);
            m = linalg::symmetrize(m);
        }
        return c;
    }

    /// Rows of E y + e0 = 0 for one matrix equality.
    std::pair<Mat, Vec> equality_rows(const AffineExpr& e) const {
        std::map<int, Mat> acc;
        expr_coefficients(e, acc);
        const Index rows = e.rows() * e.cols();
        Mat E = Mat::Zero(rows, nscalars_);
        for (const auto& [s, m] : acc) E.col(s) = Eigen::Map<const Vec>(m.data(), rows);
        Vec e0 = Eigen::Map<const Vec>(e.constant().data(), rows);
        return {E, e0};
    }

    double logdet_at(const Mat& T, const Vec& y0, const Vec& w) const {
        const Vec y = y0 + T * w;
        double f = 0.0;
        for (const auto& v : trace_vars_) {
            Eigen::LLT<Mat> llt(unpack(v, y));
            if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
            f += 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        }
        return f;
    }

    /// Away-step Frank-Wolfe ascent of the summed log-determinants over the objective-phase set.
    /// The iterate is kept as a convex combination of the starting point and linear-SDP vertices.
    template <class LinearSolve>
    int maximize_logdet(SolveReport& rep, const Mat& T, const Vec& y0, Vec w, LinearSolve&& lin) const {
        int iters = 0;
        double f = logdet_at(T, y0, w);
        if (!std::isfinite(f)) return 0;
        std::vector<Vec> atoms{w};
        std::vector<double> alpha{1.0};
        auto line_max = [&](const Vec& d, double hi) {
            const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
            double a = 0.0, b = hi;
            double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
            double f1 = logdet_at(T, y0, w + x1 * d), f2 = logdet_at(T, y0, w + x2 * d);
            for (int it = 0; it < 60; ++it) {
                if (f1 < f2) {
                    a = x1; x1 = x2; f1 = f2;
                    x2 = a + phi * (b - a);
                    f2 = logdet_at(T, y0, w + x2 * d);
                } else {
                    b = x2; x2 = x1; f2 = f1;
                    x1 = b - phi * (b - a);
                    f1 = logdet_at(T, y0, w + x1 * d);
                }
            }
            // prefer the endpoint when it is at least as good (drops an atom on away steps)
            const double gm = 0.5 * (a + b), fm = logdet_at(T, y0, w + gm * d), fh = logdet_at(T, y0, w + hi * d);
            return fh >= fm ? std::pair{hi, fh} : std::pair{gm, fm};
        };
        for (int k = 0; k < 200; ++k) {
            const Vec y = y0 + T * w;
            Vec cy = Vec::Zero(nscalars_);
            for (const auto& v : trace_vars_) {
                const Mat Pi = unpack(v, y).inverse();
                for (int r = 0; r < v.rows; ++r)
                    for (int c = r; c < v.cols; ++c) cy(scalar_index(v, r, c)) += (r == c ? 1.0 : 2.0) * Pi(r, c);
            }
            const Vec g = T.transpose() * cy;
            const auto res = lin(g);
            iters += res.iterations;
            if (res.status != sdp::Status::Optimal && res.status != sdp::Status::MaxIterations) break;
            const Vec s = res.y.head(w.size());
            const double fw_gap = g.dot(s - w);
            if (fw_gap <= 1e-9 * std::max(1.0, std::abs(f))) break;
            std::size_t away = 0;
            for (std::size_t i = 1; i < atoms.size(); ++i)
                if (g.dot(atoms[i]) < g.dot(atoms[away])) away = i;
            const double away_gap = g.dot(w - atoms[away]);
            const bool toward = fw_gap >= away_gap || alpha[away] >= 1.0;
            const Vec d = toward ? Vec(s - w) : Vec(w - atoms[away]);
            const double hi = toward ? 1.0 : alpha[away] / (1.0 - alpha[away]);
            const auto [gam, fn] = line_max(d, hi);
            if (!(fn > f)) break;
            w += gam * d;
            f = fn;
            if (toward) {
                for (auto& al : alpha) al *= 1.0 - gam;
                atoms.push_back(s);
                alpha.push_back(gam);
            } else {
                for (auto& al : alpha) al *= 1.0 + gam;
                alpha[away] -= gam;
            }
            for (std::size_t i = atoms.size(); i-- > 0;)
                if (alpha[i] <= 1e-12) {
                    atoms.erase(atoms.begin() + static_cast<std::ptrdiff_t>(i));
                    alpha.erase(alpha.begin() + static_cast<std::ptrdiff_t>(i));
                }
        }
        std::vector<Mat> vals;
        const Vec y = y0 + T * w;
        for (const auto& v : vars_) vals.push_back(unpack(v, y));
        auto res = verify_solution(vals);
        if (res.worst_lmi() >= 0.5 * rep.eps_strict) {
            rep.values = std::move(vals);
            rep.residuals = std::move(res);
            rep.objective = f;
        }
        return iters;
    }

    std::vector<MatrixVar> vars_;
    std::vector<BlockLmi> lmis_;
    std::vector<AffineExpr> eqs_;
    std::vector<std::string> eq_names_;
    Objective objective_{Objective::Feasibility};
    std::vector<MatrixVar> trace_vars_;
    int nscalars_{0};
};

inline SolveReport LmiProgram::solve(const SolveOptions& opt) const {
    const auto t0 = std::chrono::steady_clock::now();
    SolveReport rep;
    const int p0 = nscalars_;

    // equality elimination: y = y0 + N z
    Mat E(0, p0);
    Vec e0(0);
    for (const auto& eq : eqs_) {
        auto [Ek, ek] = equality_rows(eq);
        Mat En(E.rows() + Ek.rows(), p0);
        En << E, Ek;
        Vec en(e0.size() + ek.size());
        en << e0, ek;
        E = std::move(En);
        e0 = std::move(en);
    }
    Vec y0 = Vec::Zero(p0);
    Mat N = Mat::Identity(p0, p0);
    if (E.rows() > 0) {
        Eigen::JacobiSVD<Mat> svd(E, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Vec& s = svd.singularValues();
        const double smax = s.size() ? s(0) : 0.0;
        const double tol = static_cast<double>(std::max(E.rows(), E.cols())) * smax * std::numeric_limits<double>::epsilon();
        int rank = 0;
        for (Index i = 0; i < s.size(); ++i)
            if (s(i) > tol) ++rank;
        const Mat& V = svd.matrixV();
        N = V.rightCols(p0 - rank);
        if (e0.cwiseAbs().maxCoeff() > 0.0) {
            Vec sol = -svd.solve(e0);
            y0 = sol;
            if ((E * y0 + e0).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + e0.cwiseAbs().maxCoeff())) {
                rep.status = Status::Infeasible;
                rep.solver_status = "inconsistent equalities";
                return rep;
            }
        }
    }

    // LMI data in y-coordinates
    std::vector<Coeffs> coeffs;
    double scale = 0.0;
    for (const auto& l : lmis_) {
        coeffs.push_back(lmi_coefficients(l));
        scale = std::max(scale, coeffs.back().F0.cwiseAbs().maxCoeff());
        for (const auto& [s, m] : coeffs.back().F) scale = std::max(scale, m.cwiseAbs().maxCoeff());
    }
    if (scale == 0.0) scale = 1.0;
    rep.scale = scale;
    rep.eps_strict = opt.eps_strict_rel * scale;

    // restrict to directions that move some LMI
    const Index pz = N.cols();
    std::vector<Mat> Fz; // per LMI: dim*dim x pz
    std::vector<Mat> F0z;
    Mat gram = Mat::Zero(pz, pz);
    for (auto& c : coeffs) {
        const Index d = c.F0.rows();
        Mat Fy = Mat::Zero(d * d, p0);
        for (const auto& [s, m] : c.F) Fy.col(s) = Eigen::Map<const Vec>(m.data(), d * d);
        Mat f0 = c.F0;
        Vec shift = Fy * y0;
        f0 += Eigen::Map<const Mat>(shift.data(), d, d);
        Mat fz = Fy * N;
        gram.noalias() += fz.transpose() * fz;
        Fz.push_back(std::move(fz));
        F0z.push_back(std::move(f0));
    }
    Mat Vr;
    if (pz > 0) {
        Eigen::SelfAdjointEigenSolver<Mat> es(gram);
        const Vec& ev = es.eigenvalues();
        const double emax = ev(pz - 1);
        std::vector<Index> keep;
        for (Index i = pz - 1; i >= 0; --i)
            if (ev(i) > 1e-12 * emax && emax > 0) keep.push_back(i);
        Vr.resize(pz, static_cast<Index>(keep.size()));
        for (std::size_t k = 0; k < keep.size(); ++k) Vr.col(static_cast<Index>(k)) = es.eigenvectors().col(keep[k]);
    } else {
        Vr.resize(0, 0);
    }
    const Mat T = N * Vr; // y = y0 + T w
    const int pw = static_cast<int>(T.cols());
    rep.reduced_dim = pw;

    // objective in w
    Vec cobj = Vec::Zero(pw);
    const Objective solved = objective_;
    if (solved == Objective::MaxTrace) {
        Vec cy = Vec::Zero(p0);
        for (const auto& v : trace_vars_)
            for (int k = 0; k < v.rows; ++k) cy(scalar_index(v, k, k)) += 1.0;
        cobj = T.transpose() * cy;
    }
    rep.objective_solved = to_string(solved);

    auto build = [&](bool margin_phase, double tau, const Vec& cobj) {
        sdp::Problem P;
        P.p = pw + (margin_phase ? 1 : 0);
        P.c = Vec::Zero(P.p);
        if (margin_phase) P.c(pw) = 1.0;
        else P.c.head(pw) = cobj;
        for (std::size_t k = 0; k < lmis_.size(); ++k) {
            sdp::Block b;
            const Index d = F0z[k].rows();
            b.dim = static_cast<int>(d);
            b.F0 = F0z[k];
            b.F.resize(d * d, P.p);
            b.F.leftCols(pw) = Fz[k] * Vr;
            if (lmis_[k].strict) {
                Mat I = Mat::Identity(d, d);
                if (margin_phase) b.F.col(pw) = -Eigen::Map<const Vec>(I.data(), d * d);
                else b.F0 -= tau * I;
            } else if (margin_phase) {
                b.F.col(pw).setZero();
            }
            P.blocks.push_back(std::move(b));
        }
        // box on the original scalars
        P.lp_A.resize(2 * p0, P.p);
        P.lp_A.setZero();
        P.lp_A.topLeftCorner(p0, pw) = -T;
        P.lp_A.bottomLeftCorner(p0, pw) = T;
        P.lp_a0.resize(2 * p0);
        P.lp_a0 << Vec::Constant(p0, opt.box) - y0, Vec::Constant(p0, opt.box) + y0;
        return P;
    };

    auto recover = [&](const Vec& w) {
        Vec y = y0 + T * w.head(pw);
        std::vector<Mat> vals;
        for (const auto& v : vars_) vals.push_back(unpack(v, y));
        return vals;
    };

    sdp::Options so{opt.tol, opt.max_iters};
    auto r1 = sdp::solve(build(true, 0.0, cobj), so);
    rep.iterations = r1.iterations;
    rep.solver_status = sdp::to_string(r1.status);
    rep.margin = r1.y.size() ? r1.y(pw) : 0.0;
    rep.values = recover(r1.y);
    rep.residuals = verify_solution(rep.values);

    const bool converged = r1.status == sdp::Status::Optimal ||
                           (r1.status == sdp::Status::MaxIterations && r1.gap < 1e-5 && r1.dinf < 1e-5);
    if (!converged) {
        rep.status = Status::NumericalFailure;
    } else if (rep.margin < rep.eps_strict) {
        rep.status = Status::Infeasible;
    } else {
        rep.status = Status::Feasible;
        rep.objective = rep.margin;
        if (solved == Objective::MaxTrace && pw > 0) {
            auto r2 = sdp::solve(build(false, opt.phase2_margin * rep.margin, cobj), so);
            if (r2.status == sdp::Status::Optimal || r2.status == sdp::Status::MaxIterations) {
                auto vals = recover(r2.y);
                auto res = verify_solution(vals);
                if (res.worst_lmi() >= 0.5 * rep.eps_strict) {
                    rep.values = std::move(vals);
                    rep.residuals = std::move(res);
                    rep.objective = cobj.dot(r2.y.head(pw));
                    rep.iterations += r2.iterations;
                }
            }
        }
        if (solved == Objective::MaxLogDet && pw > 0) {
            const auto r = maximize_logdet(rep, T, y0, r1.y.head(pw), [&](const Vec& c) {
                return sdp::solve(build(false, opt.phase2_margin * rep.margin, c), so);
            });
            rep.iterations += r;
        }
        if (solved == Objective::Feasibility) rep.objective_solved = "margin";
        // strict blocks must clear half the margin threshold after independent recomputation
        for (std::size_t k = 0; k < lmis_.size(); ++k)
            if (lmis_[k].strict && rep.residuals.lmi_min_eig[k] < 0.5 * rep.eps_strict) rep.status = Status::NumericalFailure;
    }
    rep.solve_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

} // namespace dstab::lmi
