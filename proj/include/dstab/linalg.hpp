#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace dstab {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

/// Thrown for dimension mismatches between cooperating objects.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace linalg {

inline Mat sym(const Mat& m) { return m + m.transpose(); }

inline Mat symmetrize(const Mat& m) { return 0.5 * (m + m.transpose()); }

inline double min_eig(const Mat& m) {
    if (m.size() == 0) return std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
}

inline double max_eig(const Mat& m) {
    if (m.size() == 0) return -std::numeric_limits<double>::infinity();
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues()(es.eigenvalues().size() - 1);
}

/// Spectral norm (largest singular value).
inline double norm2(const Mat& m) {
    if (m.size() == 0) return 0.0;
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues()(0);
}

inline double min_singular(const Mat& m) {
    if (m.size() == 0) return std::numeric_limits<double>::infinity();
    Eigen::JacobiSVD<Mat> svd(m);
    return svd.singularValues()(svd.singularValues().size() - 1);
}

/// Symmetric PSD square root via eigendecomposition; negative eigenvalues are clipped.
inline Mat psd_sqrt(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(symmetrize(m));
    Vec d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

inline bool all_finite(const Mat& m) { return m.allFinite(); }

inline Mat blkdiag(const Mat& a, const Mat& b) {
    Mat out = Mat::Zero(a.rows() + b.rows(), a.cols() + b.cols());
    out.topLeftCorner(a.rows(), a.cols()) = a;
    out.bottomRightCorner(b.rows(), b.cols()) = b;
    return out;
}

/// Inverse of the block lower-triangular matrix [[M, 0], [C1, C2]].
inline Mat block_lower_inverse(const Mat& m, const Mat& c1, const Mat& c2) {
    const auto n = m.rows();
    const auto k = c2.rows();
    Mat out = Mat::Zero(n + k, n + k);
    Mat m_inv = m.partialPivLu().inverse();
    out.topLeftCorner(n, n) = m_inv;
    if (k > 0) {
        Mat c2_inv = c2.partialPivLu().inverse();
        out.bottomRightCorner(k, k) = c2_inv;
        out.bottomLeftCorner(k, n) = -c2_inv * c1 * m_inv;
    }
    return out;
}

inline void require_dims(bool ok, const std::string& what) {
    if (!ok) throw DimensionError("dimension mismatch: " + what);
}

} // namespace linalg
} // namespace dstab
