#pragma once

// Small dense solvers for nonnegativity-constrained problems:
// Lawson-Hanson NNLS and a primal active-set method for
//   min 1/2 x'Qx + c'x  s.t.  Ax = b, x >= 0.

#include "rbf/detail/linalg.hpp"

#include <algorithm>
#include <vector>

namespace rbf::detail {

struct NnlsResult {
    Vector x;
    double residual_norm = 0.0;
    int iterations = 0;
};

/// min ||Ax - b|| subject to x >= 0 (Lawson & Hanson).
inline NnlsResult nnls(const Matrix& a, const Vector& b, int max_iterations = 0) {
    const Index n = a.cols();
    if (max_iterations <= 0) max_iterations = static_cast<int>(3 * n + 50);
    const double tol = 10.0 * std::numeric_limits<double>::epsilon() * a.cwiseAbs().maxCoeff() *
                       static_cast<double>(std::max(a.rows(), n));
    NnlsResult out;
    out.x = Vector::Zero(n);
    std::vector<bool> passive(static_cast<std::size_t>(n), false);

    auto solve_passive = [&](Vector& z) {
        std::vector<Index> idx;
        for (Index j = 0; j < n; ++j)
            if (passive[static_cast<std::size_t>(j)]) idx.push_back(j);
        Matrix ap(a.rows(), static_cast<Index>(idx.size()));
        for (std::size_t k = 0; k < idx.size(); ++k) ap.col(static_cast<Index>(k)) = a.col(idx[k]);
        const Vector zp = ap.colPivHouseholderQr().solve(b);
        z = Vector::Zero(n);
        for (std::size_t k = 0; k < idx.size(); ++k) z(idx[k]) = zp(static_cast<Index>(k));
    };

    Vector w = a.transpose() * (b - a * out.x);
    while (out.iterations < max_iterations) {
        Index best = -1;
        double best_w = tol;
        for (Index j = 0; j < n; ++j)
            if (!passive[static_cast<std::size_t>(j)] && w(j) > best_w) {
                best_w = w(j);
                best = j;
            }
        if (best < 0) break;
        passive[static_cast<std::size_t>(best)] = true;

        Vector z;
        while (true) {
            ++out.iterations;
            solve_passive(z);
            bool feasible = true;
            for (Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0) feasible = false;
            if (feasible) break;
            double alpha = 1.0;
            for (Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && z(j) <= 0.0)
                    alpha = std::min(alpha, out.x(j) / (out.x(j) - z(j)));
            out.x += alpha * (z - out.x);
            for (Index j = 0; j < n; ++j)
                if (passive[static_cast<std::size_t>(j)] && out.x(j) <= tol) {
                    passive[static_cast<std::size_t>(j)] = false;
                    out.x(j) = 0.0;
                }
            if (out.iterations >= max_iterations) break;
        }
        out.x = z;
        for (Index j = 0; j < n; ++j)
            if (!passive[static_cast<std::size_t>(j)]) out.x(j) = 0.0;
        w = a.transpose() * (b - a * out.x);
    }
    out.residual_norm = (a * out.x - b).norm();
    return out;
}

struct QpResult {
    Vector x;
    /// Multipliers of the equality constraints (Qx + c = A'mu + lambda).
    Vector eq_multipliers;
    /// Multipliers of x >= 0; zero on the free set.
    Vector bound_multipliers;
    int iterations = 0;
    bool converged = false;
};

/// Primal active-set method started from a feasible x0 (Ax0 = b, x0 >= 0);
/// every step stays in Ker(A). Q must be positive definite on Ker(A).
inline QpResult solve_qp_nonneg(const Matrix& q, const Vector& c, const Matrix& a, const Vector& x0,
                                int max_iterations = 0) {
    const Index n = q.rows();
    const Index me = a.rows();
    if (max_iterations <= 0) max_iterations = static_cast<int>(20 * n + 100);
    const double scale = std::max({q.cwiseAbs().maxCoeff(), c.size() ? c.cwiseAbs().maxCoeff() : 0.0, 1e-300});
    const double step_tol = 1e-13 * std::max(1.0, x0.cwiseAbs().maxCoeff());
    const double mult_tol = 1e-12 * scale * std::max(1.0, x0.cwiseAbs().maxCoeff());

    QpResult out;
    out.x = x0.cwiseMax(0.0);
    std::vector<bool> working(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) working[static_cast<std::size_t>(i)] = out.x(i) <= 0.0;

    while (out.iterations < max_iterations) {
        ++out.iterations;
        std::vector<Index> free;
        for (Index i = 0; i < n; ++i)
            if (!working[static_cast<std::size_t>(i)]) free.push_back(i);
        const Index nf = static_cast<Index>(free.size());
        const Vector grad = q * out.x + c;

        // KKT system on the free variables: [Q_FF  -A_F'; A_F  0] [p; mu] = [-g_F; 0]
        Matrix kkt = Matrix::Zero(nf + me, nf + me);
        Vector rhs = Vector::Zero(nf + me);
        for (Index r = 0; r < nf; ++r) {
            for (Index s = 0; s < nf; ++s) kkt(r, s) = q(free[r], free[s]);
            for (Index e = 0; e < me; ++e) {
                kkt(r, nf + e) = -a(e, free[r]);
                kkt(nf + e, r) = a(e, free[r]);
            }
            rhs(r) = -grad(free[r]);
        }
        const Vector sol = kkt.completeOrthogonalDecomposition().solve(rhs);
        Vector p = Vector::Zero(n);
        for (Index r = 0; r < nf; ++r) p(free[r]) = sol(r);
        const Vector mu = sol.tail(me);

        if (p.cwiseAbs().maxCoeff() <= step_tol) {
            out.eq_multipliers = mu;
            out.bound_multipliers = grad - a.transpose() * mu;
            Index drop = -1;
            double most_negative = -mult_tol;
            for (Index i = 0; i < n; ++i) {
                if (!working[static_cast<std::size_t>(i)]) {
                    out.bound_multipliers(i) = 0.0;
                    continue;
                }
                if (out.bound_multipliers(i) < most_negative) {
                    most_negative = out.bound_multipliers(i);
                    drop = i;
                }
            }
            if (drop < 0) {
                out.converged = true;
                return out;
            }
            working[static_cast<std::size_t>(drop)] = false;
            continue;
        }

        double alpha = 1.0;
        Index blocking = -1;
        for (Index i : free)
            if (p(i) < 0.0) {
                const double ratio = -out.x(i) / p(i);
                if (ratio < alpha) {
                    alpha = ratio;
                    blocking = i;
                }
            }
        out.x += alpha * p;
        if (blocking >= 0) {
            out.x(blocking) = 0.0;
            working[static_cast<std::size_t>(blocking)] = true;
        }
        out.x = out.x.cwiseMax(0.0);
    }
    return out;
}

}  // namespace rbf::detail
