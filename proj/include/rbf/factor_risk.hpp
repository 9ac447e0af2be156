#pragma once

// Factor risk measure S(w) = min { R(y) : beta'y = w }, the optimal asset
// exposures y*(w), factor risk contributions, and the split of R(y) into the
// excess over the factor-optimal portfolio plus S(beta'y).

#include "rbf/risk_measures.hpp"

#include <cmath>
#include <limits>

namespace rbf {

/// Quantities derived once per loading matrix.
class FactorGeometry {
public:
    explicit FactorGeometry(const FactorModel& factors) : beta_(factors.beta()) {
        factors.require_valid();
        gram_.compute(beta_.transpose() * beta_);
        null_basis_ = detail::orthonormal_complement(beta_);
    }

    const Matrix& beta() const noexcept { return beta_; }
    Index assets() const noexcept { return beta_.rows(); }
    Index factors() const noexcept { return beta_.cols(); }
    /// Orthonormal basis of Ker(beta'), d x (d - m).
    const Matrix& null_basis() const noexcept { return null_basis_; }

    /// beta (beta'beta)^{-1} w: the minimum-norm exposures with beta'y = w.
    Vector min_norm_exposures(const Vector& w) const { return beta_ * gram_.solve(w); }
    /// (beta'beta)^{-1} beta' g
    Vector pull_back(const Vector& g) const { return gram_.solve(beta_.transpose() * g); }
    Vector exposures(const Vector& y) const { return beta_.transpose() * y; }

private:
    Matrix beta_;
    Eigen::LDLT<Matrix> gram_;
    Matrix null_basis_;
};

struct FactorRiskResult {
    double s_value = 0.0;
    Vector y_star;
    Vector u_star;
    Vector grad_s;
    /// R(y) - S(beta'y) when evaluated for a given portfolio; 0 otherwise.
    double residual_risk = 0.0;
    int iterations = 0;
    bool converged = true;
    /// Norm of the gradient of R at y* projected onto Ker(beta').
    double residual = 0.0;
};

struct FactorSolverConfig {
    int max_iterations = 2000;
    /// Stationarity tolerance relative to the loss scale.
    double tolerance = 1e-10;
    /// Smoothing continuation for ES/MAD: width shrinks by 10x per stage
    /// from 0.1 down to this fraction of the loss scale.
    double final_smoothing = 1e-8;
};

inline void require_nonzero_factor(const Vector& w) {
    require(w.size() > 0 && (w.array() != 0.0).any(), ErrorCode::ZeroExposure,
            "factor exposures must be nonzero");
}

/// Closed form under volatility: S(w) = sqrt(w'(beta' Sigma^-1 beta)^-1 w).
inline FactorRiskResult factor_risk_volatility(const Vector& w, const CovarianceModel& cov,
                                               const FactorGeometry& geo) {
    require(w.size() == geo.factors(), ErrorCode::DimensionMismatch, "w must have m entries");
    require(cov.assets() == geo.assets(), ErrorCode::DimensionMismatch,
            "covariance and loadings disagree on asset count");
    require_nonzero_factor(w);
    Eigen::LLT<Matrix> sigma_llt(cov.sigma());
    const Matrix sinv_beta = sigma_llt.solve(geo.beta());
    const Matrix projected = geo.beta().transpose() * sinv_beta;
    require(detail::is_positive_definite(projected, kDefiniteTolerance), ErrorCode::SingularProjection,
            "beta' Sigma^-1 beta is numerically singular");
    Eigen::LLT<Matrix> proj_llt(projected);
    const Vector mw = proj_llt.solve(w);

    FactorRiskResult out;
    out.s_value = std::sqrt(std::max(0.0, w.dot(mw)));
    out.y_star = sinv_beta * mw;
    out.u_star = out.y_star - geo.min_norm_exposures(w);
    out.grad_s = mw / out.s_value;
    out.residual = (geo.null_basis().transpose() * (cov.sigma() * out.y_star)).norm() / out.s_value;
    return out;
}

inline FactorRiskResult factor_risk_volatility(const Vector& w, const CovarianceModel& cov,
                                               const FactorModel& factors) {
    return factor_risk_volatility(w, cov, FactorGeometry(factors));
}

namespace detail {

// Smoothed (r)_+ and |r| used while continuing toward the exact empirical
// measure. phi returns value, first and second derivative in r.
struct Phi {
    double value;
    double d1;
    double d2;
};

// Beyond |x| = 40 the correction terms are below double precision.
inline double softplus(double x) {
    if (x > 40.0) return x;
    if (x < -40.0) return 0.0;
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
inline double logistic(double x) {
    if (x > 40.0) return 1.0;
    if (x < -40.0) return 0.0;
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline Phi phi(const RiskMeasureSpec& spec, double r, double t) {
    switch (spec.kind) {
    case MeasureKind::Volatility: return {r * r, 2.0 * r, 2.0};
    case MeasureKind::Variantile: {
        const double w = r > 0.0 ? spec.level : 1.0 - spec.level;
        return {w * r * r, 2.0 * w * r, 2.0 * w};
    }
    case MeasureKind::ExpectedShortfall: {
        const double inv = 1.0 / (1.0 - spec.level);
        const double x = r / t;
        const double s = logistic(x);
        return {inv * t * softplus(x), inv * s, inv * s * (1.0 - s) / t};
    }
    case MeasureKind::MeanAbsDevMedian: {
        const double x = r / t;
        const double s = logistic(x);
        return {r + 2.0 * t * softplus(-x), 2.0 * s - 1.0, 2.0 * s * (1.0 - s) / t};
    }
    }
    return {0.0, 0.0, 0.0};
}

// Minimizes F(u, zeta) = mean_i phi(a_i - G_i u - zeta) + kappa zeta by damped
// Newton with Armijo backtracking.
struct InnerState {
    Vector u;
    double zeta = 0.0;
};

struct InnerOutcome {
    int steps = 0;
    double grad_norm = 0.0;
    bool stalled = false;
    bool converged = false;
};

inline InnerOutcome newton_inner(const RiskMeasureSpec& spec, const Vector& a, const Matrix& g, double t,
                                 double grad_tol, double value_scale, int budget, InnerState& st) {
    const Index n = a.size();
    const Index k = g.cols();
    const double kappa = spec.kind == MeasureKind::ExpectedShortfall ? 1.0 : 0.0;
    const double inv_n = 1.0 / static_cast<double>(n);

    auto evaluate = [&](const Vector& u, double zeta) {
        const Vector r = (a - g * u).array() - zeta;
        double f = kappa * zeta;
        for (Index i = 0; i < n; ++i) f += inv_n * phi(spec, r(i), t).value;
        return f;
    };

    InnerOutcome out;
    while (true) {
        const Vector r = (a - g * st.u).array() - st.zeta;
        Vector d1(n);
        Vector d2(n);
        double f = kappa * st.zeta;
        for (Index i = 0; i < n; ++i) {
            const auto p = phi(spec, r(i), t);
            f += inv_n * p.value;
            d1(i) = inv_n * p.d1;
            d2(i) = inv_n * p.d2;
        }
        Vector grad(k + 1);
        grad.head(k) = -(g.transpose() * d1);
        grad(k) = kappa - d1.sum();
        out.grad_norm = grad.norm();
        if (out.grad_norm <= grad_tol) {
            out.converged = true;
            return out;
        }
        if (out.steps >= budget) return out;

        Matrix hess(k + 1, k + 1);
        const Matrix gw = g.array().colwise() * d2.array();
        hess.topLeftCorner(k, k) = g.transpose() * gw;
        const Vector cross = gw.colwise().sum().transpose();
        hess.topRightCorner(k, 1) = cross;
        hess.bottomLeftCorner(1, k) = cross.transpose();
        hess(k, k) = d2.sum();
        const double diag_scale = std::max(hess.diagonal().cwiseAbs().maxCoeff(), 1e-300);

        bool accepted = false;
        double mu = 1e-14 * diag_scale;
        for (int attempt = 0; attempt < 6 && !accepted; ++attempt) {
            Matrix damped = hess;
            damped.diagonal().array() += mu;
            const Vector step = -damped.ldlt().solve(grad);
            const double slope = grad.dot(step);
            // Predicted decrease below rounding of the objective.
            if (attempt == 0 && -slope <= 1e-15 * (std::abs(f) + value_scale)) {
                out.converged = true;
                return out;
            }
            if (!(slope < 0.0)) {
                mu = std::max(10.0 * mu, 1e-8 * diag_scale);
                continue;
            }
            double alpha = 1.0;
            for (int ls = 0; ls < 30; ++ls) {
                const Vector u_new = st.u + alpha * step.head(k);
                const double z_new = st.zeta + alpha * step(k);
                const double f_new = evaluate(u_new, z_new);
                if (std::isfinite(f_new) && f_new <= f + 1e-4 * alpha * slope) {
                    st.u = u_new;
                    st.zeta = z_new;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
            }
            if (!accepted) mu = std::max(100.0 * mu, 1e-6 * diag_scale);
        }
        ++out.steps;
        if (!accepted) {
            out.stalled = true;
            return out;
        }
    }
}

}  // namespace detail

/// S(w) for a general measure on scenarios: minimizes R(ybar_w + N u) over
/// the orthonormal Ker(beta') basis N jointly with the auxiliary zeta. ES and
/// MAD are minimized through a smoothing continuation; S itself is always
/// evaluated with the exact empirical measure.
inline FactorRiskResult factor_risk_general(const Vector& w, const RiskMeasureSpec& spec,
                                            const ScenarioSet& scenarios, const FactorGeometry& geo,
                                            const FactorSolverConfig& cfg = {},
                                            const Vector* u_start = nullptr) {
    require(w.size() == geo.factors(), ErrorCode::DimensionMismatch, "w must have m entries");
    require(scenarios.assets() == geo.assets(), ErrorCode::DimensionMismatch,
            "scenarios and loadings disagree on asset count");
    require_nonzero_factor(w);

    const Matrix& x = scenarios.returns();
    const Matrix& basis = geo.null_basis();
    const Vector ybar = geo.min_norm_exposures(w);
    const Vector a = -(x * ybar);
    const Matrix g = x * basis;

    const auto base = loss_risk(spec, LossSample{a, std::nullopt});
    double scale = std::sqrt((a.array() - a.mean()).square().mean());
    if (!(scale > 0.0)) scale = std::max(std::abs(base.value), 1.0) * 1e-3;

    detail::InnerState st;
    st.u = u_start ? *u_start : Vector::Zero(basis.cols());
    st.zeta = base.zeta;

    // Reference gradient magnitude: typical row norm of [G, 1] times the
    // slope scale of phi.
    const double row_scale = std::sqrt((g.rowwise().squaredNorm().array() + 1.0).mean());
    double slope_scale = 1.0;
    if (spec.g() == GTransform::Square) slope_scale = 2.0 * scale;
    else if (spec.kind == MeasureKind::ExpectedShortfall) slope_scale = 1.0 / (1.0 - spec.level);
    const double grad_tol = cfg.tolerance * row_scale * slope_scale;
    const double value_scale = spec.g() == GTransform::Square ? scale * scale : scale;

    FactorRiskResult out;
    int budget = cfg.max_iterations;
    detail::InnerOutcome last;
    if (spec.is_polyhedral()) {
        for (double t = 0.1 * scale; t >= cfg.final_smoothing * scale * 0.999 && budget > 0; t *= 0.1) {
            last = detail::newton_inner(spec, a, g, t, grad_tol, value_scale, budget, st);
            out.iterations += last.steps;
            budget -= last.steps;
        }
    } else {
        last = detail::newton_inner(spec, a, g, 1.0, grad_tol, value_scale, budget, st);
        out.iterations = last.steps;
    }
    if (!st.u.allFinite() || st.u.norm() > 1e8 * (ybar.norm() + 1.0))
        fail(ErrorCode::Diverged, "factor risk is unbounded below on this scenario set");

    out.u_star = basis * st.u;
    out.y_star = ybar + out.u_star;
    const LossSample losses = portfolio_losses(scenarios, out.y_star);
    const auto exact = loss_risk(spec, losses);
    out.s_value = exact.value;

    // For kinked measures the reported subgradient is taken from the
    // smoothed problem at the last continuation width: it is the element of
    // the subdifferential that is stationary on the affine slice.
    Vector sens = exact.sensitivities;
    if (spec.is_polyhedral()) {
        const double t = cfg.final_smoothing * scale;
        const double zeta = st.zeta;
        const double inv_n = 1.0 / static_cast<double>(x.rows());
        for (Index i = 0; i < x.rows(); ++i) sens(i) = inv_n * detail::phi(spec, losses.losses(i) - zeta, t).d1;
    }
    const Vector grad_r = -(x.transpose() * sens);
    out.grad_s = geo.pull_back(grad_r);
    out.residual = (basis.transpose() * grad_r).norm();
    // A stalled line search at this precision is a numerical optimum.
    out.converged = last.converged || (last.stalled && last.grad_norm <= 1e3 * grad_tol);
    return out;
}

inline FactorRiskResult factor_risk_general(const Vector& w, const RiskMeasureSpec& spec,
                                            const ScenarioSet& scenarios, const FactorModel& factors,
                                            const FactorSolverConfig& cfg = {}) {
    return factor_risk_general(w, spec, scenarios, FactorGeometry(factors), cfg);
}

inline FactorRiskResult factor_risk(const Vector& w, const RiskMeasureSpec& spec, const CovarianceModel& cov,
                                    const FactorGeometry& geo, const FactorSolverConfig& = {}) {
    require(spec.kind == MeasureKind::Volatility, ErrorCode::UnsupportedInput,
            spec.name() + " needs scenarios, not a covariance matrix");
    return factor_risk_volatility(w, cov, geo);
}

inline FactorRiskResult factor_risk(const Vector& w, const RiskMeasureSpec& spec, const ScenarioSet& scenarios,
                                    const FactorGeometry& geo, const FactorSolverConfig& cfg = {}) {
    return factor_risk_general(w, spec, scenarios, geo, cfg);
}

/// w_i * dS/dw_i
inline Vector factor_contributions(const Vector& w, const Vector& grad_s) {
    require(w.size() == grad_s.size(), ErrorCode::DimensionMismatch,
            "exposures and gradient lengths differ");
    return w.cwiseProduct(grad_s);
}

struct RiskDecomposition {
    /// R(y) - R(y*(beta'y)): risk in excess of the factor-optimal portfolio.
    double term_i = 0.0;
    /// S(beta'y)
    double term_ii = 0.0;
    FactorRiskResult factor;
};

template <class Data>
RiskDecomposition decompose_risk(const Vector& y, const RiskMeasureSpec& spec, const Data& data,
                                 const FactorGeometry& geo, const FactorSolverConfig& cfg = {}) {
    require_nonzero(y);
    const Vector w = geo.exposures(y);
    require_nonzero_factor(w);
    RiskDecomposition out;
    out.factor = factor_risk(w, spec, data, geo, cfg);
    const double total = risk_value(spec, y, data);
    out.term_ii = out.factor.s_value;
    out.term_i = total - out.term_ii;
    // Nonnegative in exact arithmetic; absorb solver noise.
    if (out.term_i < 0.0 && out.term_i > -1e-8 * std::max(1.0, std::abs(total))) out.term_i = 0.0;
    out.factor.residual_risk = out.term_i;
    return out;
}

template <class Data>
RiskDecomposition decompose_risk(const Vector& y, const RiskMeasureSpec& spec, const Data& data,
                                 const FactorModel& factors, const FactorSolverConfig& cfg = {}) {
    return decompose_risk(y, spec, data, FactorGeometry(factors), cfg);
}

}  // namespace rbf
