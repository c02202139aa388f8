#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>

#include "basis.hpp"
#include "io.hpp"
#include "linalg.hpp"
#include "plant.hpp"

namespace dstab {

struct Trajectory {
    Mat U;                // m x T
    Mat X;                // n x (T+1)
    std::optional<Mat> Y; // measured states, n x (T+1)
    std::uint64_t seed{0};
    std::string plant_id;

    int T() const { return static_cast<int>(U.cols()); }
    int n() const { return static_cast<int>(X.rows()); }
    int m() const { return static_cast<int>(U.rows()); }
};

struct NoiseSpec {
    double bound{0.0}; // w-bar
};

struct DataMatrices {
    Mat U0;                 // m x T
    Mat Z0;                 // S x T
    Mat X1;                 // n x T, holds Y1 when measured
    std::optional<Mat> W0bar; // q x T
    bool measured{false};
    int n{0}, m{0}, S{0}, T{0}, q{0};
};

class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int step) : std::runtime_error("plant diverged at step " + std::to_string(step)), step_(step) {}
    int step() const { return step_; }

private:
    int step_;
};

namespace dataset {

inline constexpr double overflow_guard = 1e12;

/// Uniform sample on the Euclidean ball of radius r in R^n.
inline Vec sample_ball(std::mt19937_64& rng, int n, double r) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Vec d(n);
    double norm = 0.0;
    do {
        for (int j = 0; j < n; ++j) d(j) = gauss(rng);
        norm = d.norm();
    } while (norm == 0.0);
    return d * (r * std::pow(unit(rng), 1.0 / n) / norm);
}

/// Open-loop experiment: x0 from init_box, i.i.d. uniform inputs from input_box.
/// Draw order: x0, then u_0..u_{T-1}, then the noise w_0..w_T.
inline Trajectory excite(const Plant& plant, int T, const Vec& input_lo, const Vec& input_hi, const Vec& init_lo,
                         const Vec& init_hi, std::uint64_t seed, std::optional<NoiseSpec> noise = std::nullopt) {
    if (T < 1) throw std::invalid_argument("excite: T must be >= 1");
    linalg::require_dims(input_lo.size() == plant.m && input_hi.size() == plant.m, "input box must have length m");
    linalg::require_dims(init_lo.size() == plant.n && init_hi.size() == plant.n, "init box must have length n");
    if ((input_hi - input_lo).minCoeff() < 0 || (init_hi - init_lo).minCoeff() < 0)
        throw std::invalid_argument("excite: empty box");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Trajectory tr;
    tr.seed = seed;
    tr.plant_id = plant.id;
    tr.U.resize(plant.m, T);
    tr.X.resize(plant.n, T + 1);
    for (int j = 0; j < plant.n; ++j) tr.X(j, 0) = init_lo(j) + (init_hi(j) - init_lo(j)) * unit(rng);
    for (int k = 0; k < T; ++k)
        for (int j = 0; j < plant.m; ++j) tr.U(j, k) = input_lo(j) + (input_hi(j) - input_lo(j)) * unit(rng);
    for (int k = 0; k < T; ++k) {
        Vec xp = plant.step(tr.X.col(k), tr.U.col(k));
        if (!xp.allFinite() || xp.cwiseAbs().maxCoeff() > overflow_guard) throw DivergenceError(k + 1);
        tr.X.col(k + 1) = xp;
    }
    if (noise && noise->bound > 0.0) {
        Mat Y = tr.X;
        for (int k = 0; k <= T; ++k) Y.col(k) += sample_ball(rng, plant.n, noise->bound);
        tr.Y = Y;
    } else if (noise) {
        tr.Y = tr.X;
    }
    return tr;
}

inline DataMatrices assemble(const Trajectory& tr, const BasisSpec& spec, const InputBasisSpec* input_spec = nullptr,
                             bool use_measured = false) {
    linalg::require_dims(tr.n() == spec.n(), "trajectory has n=" + std::to_string(tr.n()) + ", basis expects n=" +
                                                 std::to_string(spec.n()));
    if (use_measured && !tr.Y) throw std::invalid_argument("assemble: trajectory has no measured states");
    const Mat& S = use_measured ? *tr.Y : tr.X;
    DataMatrices d;
    d.n = tr.n();
    d.m = tr.m();
    d.S = spec.S();
    d.T = tr.T();
    d.measured = use_measured;
    d.U0 = tr.U;
    d.Z0.resize(spec.S(), d.T);
    d.X1 = S.rightCols(d.T);
    for (int k = 0; k < d.T; ++k) d.Z0.col(k) = eval_basis(spec, S.col(k));
    if (input_spec != nullptr) {
        linalg::require_dims(input_spec->m() == d.m && input_spec->n() == d.n, "input dictionary shape vs plant");
        d.q = input_spec->q();
        d.W0bar = Mat(d.q, d.T);
        for (int k = 0; k < d.T; ++k) d.W0bar->col(k) = eval_input_basis(*input_spec, S.col(k)) * d.U0.col(k);
    }
    return d;
}

struct RankReport {
    int rank{0};
    double min_singular{0.0};
    bool full_row_rank{false};
};

inline RankReport rank_check(const Mat& Z0) {
    RankReport r;
    if (Z0.size() == 0) return r;
    Eigen::JacobiSVD<Mat> svd(Z0);
    const Vec& s = svd.singularValues();
    const double tol = static_cast<double>(std::max(Z0.rows(), Z0.cols())) * s(0) * std::numeric_limits<double>::epsilon();
    for (Index i = 0; i < s.size(); ++i)
        if (s(i) > tol) ++r.rank;
    r.min_singular = Z0.rows() <= Z0.cols() ? s(s.size() - 1) : 0.0;
    r.full_row_rank = r.rank == Z0.rows();
    return r;
}

enum class BudgetMode { Direct, ScaledIdentity };

/// The bound DD' <= Delta is an input; only PSD-ness is checked.
inline Mat uncertainty_budget(int n, double wbar, double epsbar, BudgetMode mode, const Mat& direct = {},
                              double scale = 0.0) {
    if (wbar < 0 || epsbar < 0) throw std::invalid_argument("uncertainty_budget: bounds must be nonnegative");
    Mat delta;
    if (mode == BudgetMode::Direct) {
        delta = direct;
        linalg::require_dims(delta.rows() == n && delta.cols() == n, "Delta must be n x n");
        if ((delta - delta.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + delta.cwiseAbs().maxCoeff()))
            throw std::invalid_argument("uncertainty_budget: Delta is not symmetric");
    } else {
        delta = scale * Mat::Identity(n, n);
    }
    if (linalg::min_eig(delta) < -1e-12 * (1.0 + delta.cwiseAbs().maxCoeff()))
        throw std::invalid_argument("uncertainty_budget: Delta is not positive semidefinite");
    return linalg::symmetrize(delta);
}

/// CSV with header k,u_1..u_m,x_1..x_n[,y_1..y_n]; the final row (k = T) leaves inputs empty.
inline std::string trajectory_csv(const Trajectory& tr) {
    std::vector<std::string> header{"k"};
    for (int j = 1; j <= tr.m(); ++j) header.push_back("u_" + std::to_string(j));
    for (int j = 1; j <= tr.n(); ++j) header.push_back("x_" + std::to_string(j));
    if (tr.Y)
        for (int j = 1; j <= tr.n(); ++j) header.push_back("y_" + std::to_string(j));
    io::CsvWriter w(header);
    for (int k = 0; k <= tr.T(); ++k) {
        std::vector<std::string> row{std::to_string(k)};
        for (int j = 0; j < tr.m(); ++j) row.push_back(k < tr.T() ? io::fmt(tr.U(j, k)) : "");
        for (int j = 0; j < tr.n(); ++j) row.push_back(io::fmt(tr.X(j, k)));
        if (tr.Y)
            for (int j = 0; j < tr.n(); ++j) row.push_back(io::fmt((*tr.Y)(j, k)));
        w.row(row);
    }
    return w.str();
}

inline Trajectory trajectory_from_csv(const std::string& text) {
    auto rows = io::parse_csv(text);
    if (rows.size() < 3) throw std::runtime_error("trajectory csv: need a header and at least two rows");
    const auto& h = rows[0];
    int m = 0, n = 0, ny = 0;
    for (const auto& c : h) {
        if (c.rfind("u_", 0) == 0) ++m;
        else if (c.rfind("x_", 0) == 0) ++n;
        else if (c.rfind("y_", 0) == 0) ++ny;
    }
    if (h.empty() || h[0] != "k" || m == 0 || n == 0 || (ny != 0 && ny != n))
        throw std::runtime_error("trajectory csv: header must be k,u_1..u_m,x_1..x_n[,y_1..y_n]");
    const int T = static_cast<int>(rows.size()) - 2;
    Trajectory tr;
    tr.U.resize(m, T);
    tr.X.resize(n, T + 1);
    if (ny) tr.Y = Mat(n, T + 1);
    for (int k = 0; k <= T; ++k) {
        const auto& r = rows[static_cast<std::size_t>(k + 1)];
        if (static_cast<int>(r.size()) != 1 + m + n + ny) throw std::runtime_error("trajectory csv: row " + std::to_string(k) + " has wrong width");
        for (int j = 0; j < m; ++j)
            if (k < T) tr.U(j, k) = std::stod(r[static_cast<std::size_t>(1 + j)]);
        for (int j = 0; j < n; ++j) tr.X(j, k) = std::stod(r[static_cast<std::size_t>(1 + m + j)]);
        for (int j = 0; j < ny; ++j) (*tr.Y)(j, k) = std::stod(r[static_cast<std::size_t>(1 + m + n + j)]);
    }
    if (!tr.U.allFinite() || !tr.X.allFinite()) throw std::runtime_error("trajectory csv: non-finite entries");
    return tr;
}

inline io::json data_to_json(const DataMatrices& d) {
    io::json j{{"n", d.n}, {"m", d.m}, {"S", d.S}, {"T", d.T}, {"q", d.q}, {"measured", d.measured},
               {"U0", io::encode_matrix(d.U0)}, {"Z0", io::encode_matrix(d.Z0)},
               {d.measured ? "Y1" : "X1", io::encode_matrix(d.X1)}};
    if (d.W0bar) j["W0bar"] = io::encode_matrix(*d.W0bar);
    return j;
}

inline DataMatrices data_from_json(const io::json& j) {
    DataMatrices d;
    d.n = j.at("n");
    d.m = j.at("m");
    d.S = j.at("S");
    d.T = j.at("T");
    d.q = j.at("q");
    d.measured = j.at("measured");
    d.U0 = io::decode_matrix(j.at("U0"));
    d.Z0 = io::decode_matrix(j.at("Z0"));
    d.X1 = io::decode_matrix(j.at(d.measured ? "Y1" : "X1"));
    if (j.contains("W0bar")) d.W0bar = io::decode_matrix(j.at("W0bar"));
    linalg::require_dims(d.U0.rows() == d.m && d.U0.cols() == d.T && d.Z0.rows() == d.S && d.Z0.cols() == d.T &&
                             d.X1.rows() == d.n && d.X1.cols() == d.T,
                         "data bundle blocks disagree with the declared n, m, S, T");
    return d;
}

} // namespace dataset
} // namespace dstab
