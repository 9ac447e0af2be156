#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rbf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

namespace detail {

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

/// Largest absolute asymmetry relative to the largest entry.
inline double relative_asymmetry(const Matrix& m) {
    const double scale = std::max(m.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    return (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
}

struct EigenRange {
    double smallest = 0.0;
    double largest = 0.0;
};

inline EigenRange symmetric_eigen_range(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    const auto& ev = es.eigenvalues();
    return {ev(0), ev(ev.size() - 1)};
}

/// smallest eigenvalue > rel_tol * largest eigenvalue
inline bool is_positive_definite(const Matrix& m, double rel_tol) {
    if (m.rows() == 0) return false;
    const auto r = symmetric_eigen_range(m);
    return r.largest > 0.0 && r.smallest > rel_tol * r.largest;
}

/// Number of singular values above rel_tol * largest singular value.
inline Index numerical_rank(const Matrix& m, double rel_tol) {
    if (m.size() == 0) return 0;
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& sv = svd.singularValues();
    if (sv(0) <= 0.0) return 0;
    Index rank = 0;
    for (Index i = 0; i < sv.size(); ++i)
        if (sv(i) > rel_tol * sv(0)) ++rank;
    return rank;
}

/// Orthonormal basis of Ker(A') for a tall full-column-rank A (d x m), as a
/// d x (d - m) matrix.
inline Matrix orthonormal_complement(const Matrix& a) {
    const Index d = a.rows();
    const Index m = a.cols();
    Eigen::HouseholderQR<Matrix> qr(a);
    Matrix q = qr.householderQ() * Matrix::Identity(d, d);
    return q.rightCols(d - m);
}

}  // namespace detail
}  // namespace rbf
