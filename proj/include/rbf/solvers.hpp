#pragma once

// Risk budgeting (RB), factor risk budgeting (FRB, long-only FRB), and
// asset-factor risk budgeting (AFRB) portfolios, plus the minimum-variance
// and equal-weight references.
//
// Every budgeting problem is a log-barrier program
//   min_y  g(R(y)) - la * sum_i ba_i log y_i - lf * sum_j bf_j log (beta'y)_j
// whose minimizer, once normalized, is the portfolio. Volatility problems
// on a covariance matrix are solved by damped Newton; measures given by
// scenarios go through the minimum representation
//   g(R(y)) = min_zeta E[H(zeta, -y'X)]
// and are solved jointly in (y, zeta) by stochastic gradient descent.

#include "rbf/detail/qp.hpp"
#include "rbf/factor_risk.hpp"

#include <boost/math/distributions/normal.hpp>

#include <cstdint>
#include <numeric>
#include <optional>
#include <random>

namespace rbf {

struct StepSchedule {
    enum class Kind { Constant, Polynomial };
    Kind kind = Kind::Polynomial;
    double c = 0.5;
    double gamma = 0.75;

    double rate(long k) const {
        return kind == Kind::Constant ? c : c / std::pow(1.0 + static_cast<double>(k), gamma);
    }
};

struct SolverConfig {
    int max_iterations = 500;
    /// Tolerance on the normalized-contribution residual (RB, FRB) or the
    /// scaled stationarity residual (AFRB).
    double tolerance = 1e-10;
    StepSchedule step{};
    bool averaging = true;
    /// Fraction of iterations discarded before Polyak-Ruppert averaging.
    double burn_in = 0.5;
    int batch_size = 64;
    double floor_epsilon = 1e-10;
    std::uint64_t seed = 0;
    /// Optional starting exposures (only the direction matters).
    std::optional<Vector> initial_point;
    FactorSolverConfig factor{};

    static SolverConfig deterministic() { return {}; }
    static SolverConfig stochastic() {
        SolverConfig c;
        c.max_iterations = 40000;
        c.tolerance = 1e-2;
        return c;
    }

    void validate() const {
        require(max_iterations > 0, ErrorCode::InvalidInput, "max_iterations must be positive");
        require(tolerance > 0.0, ErrorCode::InvalidInput, "tolerance must be positive");
        require(floor_epsilon > 0.0, ErrorCode::InvalidInput, "floor_epsilon must be positive");
        require(batch_size > 0, ErrorCode::InvalidInput, "batch_size must be positive");
        require(step.c > 0.0, ErrorCode::InvalidInput, "step constant must be positive");
        require(step.kind == StepSchedule::Kind::Constant || (step.gamma > 0.5 && step.gamma <= 1.0),
                ErrorCode::InvalidInput, "step exponent must lie in (0.5, 1]");
        require(burn_in >= 0.0 && burn_in < 1.0, ErrorCode::InvalidInput, "burn_in must lie in [0, 1)");
    }
};

enum class ProblemKind { RB, FRB, FRBLongOnly, AFRB, MinVariance, MinVarianceLongOnly, EqualWeight };

inline std::string problem_name(ProblemKind k) {
    switch (k) {
    case ProblemKind::RB: return "rb";
    case ProblemKind::FRB: return "frb";
    case ProblemKind::FRBLongOnly: return "frb-long";
    case ProblemKind::AFRB: return "afrb";
    case ProblemKind::MinVariance: return "mv";
    case ProblemKind::MinVarianceLongOnly: return "mv-long";
    case ProblemKind::EqualWeight: return "ew";
    }
    return "unknown";
}

struct ProblemSpec {
    ProblemKind kind = ProblemKind::RB;
    BudgetSpec budgets;
    RiskMeasureSpec measure = RiskMeasureSpec::volatility();
};

namespace detail {

enum class Domain {
    Positive,          // y > 0 (and beta'y > 0 when a factor barrier is present)
    FactorCone,        // beta'y > 0
    NonnegFactorCone,  // y >= 0 and beta'y > 0
};

struct BarrierTerms {
    double lambda_asset = 0.0;
    Vector asset_budgets;
    double lambda_factor = 0.0;
    Vector factor_budgets;
    const Matrix* beta = nullptr;
    Domain domain = Domain::Positive;

    bool has_asset() const { return asset_budgets.size() > 0; }
    bool has_factor() const { return factor_budgets.size() > 0; }
    double total_weight() const {
        return (has_asset() ? lambda_asset * asset_budgets.sum() : 0.0) +
               (has_factor() ? lambda_factor * factor_budgets.sum() : 0.0);
    }

    bool in_domain(const Vector& y) const {
        if (domain == Domain::Positive && (y.array() <= 0.0).any()) return false;
        if (domain == Domain::NonnegFactorCone && (y.array() < 0.0).any()) return false;
        if (has_factor() && ((beta->transpose() * y).array() <= 0.0).any()) return false;
        return true;
    }

    double value(const Vector& y) const {
        double v = 0.0;
        if (has_asset()) v -= lambda_asset * asset_budgets.dot(y.array().log().matrix());
        if (has_factor()) {
            const Vector w = beta->transpose() * y;
            v -= lambda_factor * factor_budgets.dot(w.array().log().matrix());
        }
        return v;
    }

    Vector gradient(const Vector& y) const {
        Vector g = Vector::Zero(y.size());
        if (has_asset()) g.array() -= lambda_asset * asset_budgets.array() / y.array();
        if (has_factor()) {
            const Vector w = beta->transpose() * y;
            g -= lambda_factor * (*beta) * (factor_budgets.array() / w.array()).matrix();
        }
        return g;
    }

    Matrix hessian(const Vector& y) const {
        Matrix h = Matrix::Zero(y.size(), y.size());
        if (has_asset()) h.diagonal().array() += lambda_asset * asset_budgets.array() / y.array().square();
        if (has_factor()) {
            const Vector w = beta->transpose() * y;
            const Vector d = factor_budgets.array() / w.array().square();
            h += lambda_factor * (*beta) * d.asDiagonal() * beta->transpose();
        }
        return h;
    }
};

/// Target size of the minimizer: Euler's identity at the optimum gives
/// g'(R) R = total barrier weight.
inline double target_risk(const RiskMeasureSpec& spec, double barrier_weight) {
    return spec.g() == GTransform::Square ? std::sqrt(barrier_weight / 2.0) : barrier_weight;
}

struct DescentOutcome {
    Vector y;
    int iterations = 0;
    std::vector<double> trace;
};

/// Damped Newton on y'Sigma y + barrier over an open domain.
inline DescentOutcome newton_barrier(const Matrix& sigma, const BarrierTerms& terms, Vector y,
                                     int max_iterations) {
    auto objective = [&](const Vector& v) {
        if (!terms.in_domain(v)) return std::numeric_limits<double>::infinity();
        return v.dot(sigma * v) + terms.value(v);
    };
    DescentOutcome out;
    double f = objective(y);
    out.trace.push_back(f);
    while (out.iterations < max_iterations) {
        const Vector g = 2.0 * sigma * y + terms.gradient(y);
        const Matrix h = 2.0 * sigma + terms.hessian(y);
        const Vector step = -h.llt().solve(g);
        const double decrement = -g.dot(step);
        if (!(decrement > 1e-26)) break;
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 80; ++ls) {
            const Vector trial = y + alpha * step;
            const double ft = objective(trial);
            if (ft <= f - 1e-4 * alpha * decrement) {
                y = trial;
                f = ft;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
        ++out.iterations;
        out.trace.push_back(f);
    }
    out.y = std::move(y);
    return out;
}

/// Projected Newton (Bertsekas) for the same objective over y >= 0.
inline DescentOutcome projected_newton_barrier(const Matrix& sigma, const BarrierTerms& terms, Vector y,
                                               int max_iterations) {
    auto objective = [&](const Vector& v) {
        if (!terms.in_domain(v)) return std::numeric_limits<double>::infinity();
        return v.dot(sigma * v) + terms.value(v);
    };
    const Index d = y.size();
    DescentOutcome out;
    double f = objective(y);
    out.trace.push_back(f);
    while (out.iterations < max_iterations) {
        const Vector g = 2.0 * sigma * y + terms.gradient(y);
        const Vector pg = y - (y - g).cwiseMax(0.0);
        const double pg_norm = pg.cwiseAbs().maxCoeff();
        if (pg_norm <= 1e-15 * std::max(1.0, g.cwiseAbs().maxCoeff())) break;
        const double eps = std::min(1e-6 * std::max(1.0, y.cwiseAbs().maxCoeff()), pg_norm);
        const Matrix h = 2.0 * sigma + terms.hessian(y);

        std::vector<Index> free;
        std::vector<bool> active(static_cast<std::size_t>(d), false);
        for (Index i = 0; i < d; ++i) {
            if (y(i) <= eps && g(i) > 0.0) active[static_cast<std::size_t>(i)] = true;
            else free.push_back(i);
        }
        Vector dir = Vector::Zero(d);
        if (!free.empty()) {
            const Index nf = static_cast<Index>(free.size());
            Matrix hf(nf, nf);
            Vector gf(nf);
            for (Index r = 0; r < nf; ++r) {
                gf(r) = g(free[r]);
                for (Index c = 0; c < nf; ++c) hf(r, c) = h(free[r], free[c]);
            }
            const Vector sf = -hf.llt().solve(gf);
            for (Index r = 0; r < nf; ++r) dir(free[r]) = sf(r);
        }
        for (Index i = 0; i < d; ++i)
            if (active[static_cast<std::size_t>(i)]) dir(i) = -g(i) / h(i, i);

        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 80; ++ls) {
            const Vector trial = (y + alpha * dir).cwiseMax(0.0);
            const double ft = objective(trial);
            const double predicted = g.dot(trial - y);
            if (ft <= f + 1e-4 * std::min(predicted, 0.0) && ft <= f) {
                if (ft == f && (trial - y).norm() == 0.0) break;
                y = trial;
                f = ft;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;
        ++out.iterations;
        out.trace.push_back(f);
    }
    out.y = std::move(y);
    return out;
}

inline Matrix population_covariance(const Matrix& x) {
    const Matrix centered = x.rowwise() - x.colwise().mean();
    return centered.transpose() * centered / static_cast<double>(x.rows());
}

/// Curvature of E[H] in zeta, used to precondition the zeta update.
inline double zeta_curvature(const RiskMeasureSpec& spec, double loss_sd) {
    const double sd = std::max(loss_sd, 1e-300);
    boost::math::normal standard;
    switch (spec.kind) {
    case MeasureKind::Volatility: return 2.0;
    case MeasureKind::Variantile: return 2.0 * std::min(spec.level, 1.0 - spec.level);
    case MeasureKind::ExpectedShortfall: {
        const double z = boost::math::quantile(standard, spec.level);
        return boost::math::pdf(standard, z) / (sd * (1.0 - spec.level));
    }
    case MeasureKind::MeanAbsDevMedian: return 2.0 * boost::math::pdf(standard, 0.0) / sd;
    }
    return 1.0;
}

struct SgdOutcome {
    Vector y;
    double zeta = 0.0;
    int iterations = 0;
};

/// Preconditioned mini-batch SGD on E[H(zeta, -y'X)] + barrier with
/// Polyak-Ruppert averaging. The preconditioner is the inverse of a
/// Gaussian-proxy Hessian at the starting point, so the step constant is
/// dimensionless.
inline SgdOutcome sgd_barrier(const ScenarioSet& scenarios, const RiskMeasureSpec& spec,
                              const BarrierTerms& terms, Vector y, const SolverConfig& cfg) {
    const Matrix& x = scenarios.returns();
    const Index n = x.rows();
    const Index d = x.cols();

    const double lambda_total = terms.total_weight();
    double r0 = loss_risk(spec, portfolio_losses(scenarios, y)).value;
    const double vol0 = loss_risk(RiskMeasureSpec::volatility(), portfolio_losses(scenarios, y)).value;
    if (!(r0 > 0.0)) r0 = vol0;
    require(r0 > 0.0, ErrorCode::InvalidInput, "starting portfolio has zero risk on these scenarios");
    y *= target_risk(spec, lambda_total) / r0;
    const Vector y_start = y;

    const Matrix cov = population_covariance(x);
    const double vol = std::sqrt(std::max(y.dot(cov * y), 1e-300));
    const double ratio = loss_risk(spec, portfolio_losses(scenarios, y)).value / vol;
    Matrix curvature = terms.hessian(y);
    if (spec.g() == GTransform::Square) curvature += 2.0 * cov;
    else curvature += std::max(ratio, 0.0) * cov / vol;
    curvature.diagonal().array() += 1e-12 * curvature.diagonal().cwiseAbs().maxCoeff();
    const Matrix precond = curvature.llt().solve(Matrix::Identity(d, d));
    const double zeta_precond = 1.0 / zeta_curvature(spec, vol);

    double zeta = optimal_zeta(spec, portfolio_losses(scenarios, y));

    std::mt19937_64 rng(cfg.seed);
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;

    const Index batch = std::min<Index>(cfg.batch_size, n);
    const long total = cfg.max_iterations;
    const long average_from = cfg.averaging ? static_cast<long>(cfg.burn_in * static_cast<double>(total)) : total;
    Vector y_sum = Vector::Zero(d);
    double zeta_sum = 0.0;
    long averaged = 0;
    const double blowup = 1e6 * y_start.norm();

    Vector grad_y(d);
    for (long k = 0; k < total; ++k) {
        grad_y.setZero();
        double grad_zeta = 0.0;
        for (Index j = 0; j < batch; ++j) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const Index i = order[cursor++];
            const double loss = -x.row(i).dot(y);
            const auto hp = h_partials(spec, zeta, loss);
            grad_zeta += hp.d_zeta;
            if (hp.d_loss != 0.0) grad_y.noalias() -= hp.d_loss * x.row(i).transpose();
        }
        grad_y /= static_cast<double>(batch);
        grad_zeta /= static_cast<double>(batch);
        grad_y += terms.gradient(y);

        const double eta = cfg.step.rate(k);
        Vector delta = -eta * (precond * grad_y);
        zeta -= eta * zeta_precond * grad_zeta;

        Vector trial = y + delta;
        if (terms.domain == Domain::Positive) trial = trial.cwiseMax(cfg.floor_epsilon);
        else if (terms.domain == Domain::NonnegFactorCone) trial = trial.cwiseMax(0.0);
        for (int halve = 0; halve < 40 && !terms.in_domain(trial); ++halve) {
            delta *= 0.5;
            trial = y + delta;
            if (terms.domain == Domain::Positive) trial = trial.cwiseMax(cfg.floor_epsilon);
            else if (terms.domain == Domain::NonnegFactorCone) trial = trial.cwiseMax(0.0);
        }
        if (terms.in_domain(trial)) y = trial;
        if (!y.allFinite() || y.norm() > blowup)
            fail(ErrorCode::Diverged, "stochastic iterate diverged; reduce the step constant");

        if (k >= average_from) {
            y_sum += y;
            zeta_sum += zeta;
            ++averaged;
        }
    }
    SgdOutcome out;
    out.iterations = static_cast<int>(total);
    if (averaged > 0) {
        out.y = y_sum / static_cast<double>(averaged);
        out.zeta = zeta_sum / static_cast<double>(averaged);
    } else {
        out.y = y;
        out.zeta = zeta;
    }
    return out;
}

template <class Data>
void fill_factor_side(SolveResult& r, const RiskMeasureSpec& spec, const Data& data, const FactorGeometry* geo,
                      const FactorSolverConfig& fcfg) {
    if (!geo) return;
    r.factor_exposures = geo->exposures(r.portfolio.weights);
    if ((r.factor_exposures.array() == 0.0).all()) {
        r.factor_contributions = Vector::Zero(geo->factors());
        return;
    }
    const auto fr = factor_risk(r.factor_exposures, spec, data, *geo, fcfg);
    r.factor_risk = fr.s_value;
    r.factor_contributions = factor_contributions(r.factor_exposures, fr.grad_s);
}

/// Portfolio, total risk, and contributions at both levels for exposures y.
template <class Data>
SolveResult assemble(const Vector& y, const RiskMeasureSpec& spec, const Data& data, const FactorGeometry* geo,
                     const FactorSolverConfig& fcfg) {
    SolveResult r;
    r.portfolio = Portfolio::from_exposures(y);
    r.total_risk = risk_value(spec, r.portfolio.weights, data);
    r.asset_contributions = risk_contributions(spec, r.portfolio.weights, data);
    fill_factor_side(r, spec, data, geo, fcfg);
    return r;
}

inline double contribution_residual(const Vector& contributions, const Vector& budgets) {
    const double total = contributions.sum();
    if (total == 0.0) return std::numeric_limits<double>::infinity();
    return (contributions / total - budgets).cwiseAbs().maxCoeff();
}

/// max_i |y_i df/dy_i| / (total barrier weight) for f = g(R) + barrier: a
/// scale-free stationarity measure on the open domain.
template <class Data>
double barrier_stationarity(const Vector& y, const RiskMeasureSpec& spec, const Data& data,
                            const BarrierTerms& terms) {
    const double risk = risk_value(spec, y, data);
    const Vector grad = spec.g_derivative(risk) * risk_gradient(spec, y, data) + terms.gradient(y);
    return y.cwiseProduct(grad).cwiseAbs().maxCoeff() / terms.total_weight();
}

inline void require_normalizable(const Vector& y) {
    const double sum = y.sum();
    require(std::abs(sum) >= 1e-8 * y.cwiseAbs().sum(), ErrorCode::NormalizationDegenerate,
            "exposures sum to zero; no fully invested portfolio");
    require(sum > 0.0, ErrorCode::NormalizationDegenerate,
            "exposures sum to a negative number; normalizing would flip factor exposures");
}

inline Vector scaled_start(const Vector& direction, const Matrix& sigma, const RiskMeasureSpec& spec,
                           double barrier_weight) {
    const double r = std::sqrt(direction.dot(sigma * direction));
    return direction * (target_risk(spec, barrier_weight) / r);
}

/// Some y >= 0 with beta'y >= 1, or nullopt when no nonnegative portfolio has
/// strictly positive factor exposures.
inline std::optional<Vector> long_only_feasible_point(const Matrix& beta) {
    const Index d = beta.rows();
    const Index m = beta.cols();
    Matrix a(m, d + m);
    a.leftCols(d) = beta.transpose();
    a.rightCols(m) = -Matrix::Identity(m, m);
    const auto sol = nnls(a, Vector::Ones(m));
    if (sol.residual_norm > 1e-9 * std::sqrt(static_cast<double>(m))) return std::nullopt;
    Vector y = sol.x.head(d);
    if (((beta.transpose() * y).array() <= 0.0).any()) return std::nullopt;
    return y;
}

inline Vector initial_direction(const SolverConfig& cfg, const Vector& fallback) {
    if (cfg.initial_point) {
        require(cfg.initial_point->size() == fallback.size(), ErrorCode::DimensionMismatch,
                "initial point has the wrong length");
        return *cfg.initial_point;
    }
    return fallback;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Risk budgeting

/// RB under volatility: Newton on y'Sigma y - sum b_i log y_i, normalized.
inline SolveResult solve_rb_volatility(const CovarianceModel& cov, const Vector& budgets,
                                       const SolverConfig& cfg = SolverConfig::deterministic(),
                                       const FactorModel* factors = nullptr) {
    cfg.validate();
    const Index d = cov.assets();
    require(budgets.size() == d, ErrorCode::DimensionMismatch, "budget length differs from asset count");
    require(is_budget_vector(budgets), ErrorCode::ValidationError, "budget-sum: asset budgets invalid");
    const auto spec = RiskMeasureSpec::volatility();
    std::optional<FactorGeometry> geo;
    if (factors) geo.emplace(*factors);

    detail::BarrierTerms terms;
    terms.lambda_asset = 1.0;
    terms.asset_budgets = budgets;
    Vector y0 = detail::initial_direction(cfg, budgets);
    require(terms.in_domain(y0), ErrorCode::InvalidInput, "initial point must be strictly positive");
    y0 = detail::scaled_start(y0, cov.sigma(), spec, terms.total_weight());

    const auto run = detail::newton_barrier(cov.sigma(), terms, y0, cfg.max_iterations);
    SolveResult r = detail::assemble(run.y, spec, cov, geo ? &*geo : nullptr, cfg.factor);
    r.iterations = run.iterations;
    r.objective_trace = run.trace;
    r.residual = detail::contribution_residual(r.asset_contributions, budgets);
    r.converged = r.residual <= cfg.tolerance;
    return r;
}

/// RB for any measure with a minimum representation, by SGD over (y, zeta).
inline SolveResult solve_rb_stochastic(const ScenarioSet& scenarios, const RiskMeasureSpec& measure,
                                       const Vector& budgets,
                                       const SolverConfig& cfg = SolverConfig::stochastic(),
                                       const FactorModel* factors = nullptr) {
    cfg.validate();
    require(budgets.size() == scenarios.assets(), ErrorCode::DimensionMismatch,
            "budget length differs from asset count");
    require(is_budget_vector(budgets), ErrorCode::ValidationError, "budget-sum: asset budgets invalid");
    std::optional<FactorGeometry> geo;
    if (factors) geo.emplace(*factors);

    detail::BarrierTerms terms;
    terms.lambda_asset = 1.0;
    terms.asset_budgets = budgets;
    const Vector y0 = detail::initial_direction(cfg, budgets);
    require(terms.in_domain(y0), ErrorCode::InvalidInput, "initial point must be strictly positive");

    const auto run = detail::sgd_barrier(scenarios, measure, terms, y0, cfg);
    SolveResult r = detail::assemble(run.y, measure, scenarios, geo ? &*geo : nullptr, cfg.factor);
    r.zeta = optimal_zeta(measure, portfolio_losses(scenarios, r.portfolio.weights));
    r.iterations = run.iterations;
    r.residual = detail::contribution_residual(r.asset_contributions, budgets);
    r.converged = r.residual <= cfg.tolerance;
    return r;
}

// ---------------------------------------------------------------------------
// Factor risk budgeting

namespace detail {

inline BarrierTerms factor_terms(const FactorGeometry& geo, const Vector& factor_budgets, bool long_only) {
    require(factor_budgets.size() == geo.factors(), ErrorCode::DimensionMismatch,
            "factor budget length differs from factor count");
    require(is_budget_vector(factor_budgets), ErrorCode::ValidationError, "budget-sum: factor budgets invalid");
    BarrierTerms terms;
    terms.lambda_factor = 1.0;
    terms.factor_budgets = factor_budgets;
    terms.beta = &geo.beta();
    terms.domain = long_only ? Domain::NonnegFactorCone : Domain::FactorCone;
    return terms;
}

inline Vector frb_start(const FactorGeometry& geo, const SolverConfig& cfg, bool long_only) {
    if (long_only) {
        auto feasible = long_only_feasible_point(geo.beta());
        if (!feasible)
            fail(ErrorCode::InfeasibleLongOnly,
                 "no nonnegative portfolio has strictly positive factor exposures");
        if (cfg.initial_point) return initial_direction(cfg, *feasible);
        // Pull the vertex-like NNLS point into the interior of the orthant.
        Vector y = *feasible;
        y.array() += 1e-3 * y.sum() / static_cast<double>(y.size());
        return y;
    }
    const Vector ybar = geo.min_norm_exposures(Vector::Ones(geo.factors()));
    return initial_direction(cfg, ybar / ybar.norm());
}

template <class Data>
SolveResult finish_frb(const Vector& y, const RiskMeasureSpec& spec, const Data& data, const FactorGeometry& geo,
                       const Vector& factor_budgets, bool long_only, const SolverConfig& cfg) {
    if (!long_only) require_normalizable(y);
    SolveResult r = assemble(y, spec, data, &geo, cfg.factor);
    r.residual = contribution_residual(r.factor_contributions, factor_budgets);
    return r;
}

}  // namespace detail

/// FRB under volatility on a covariance matrix: min y'Sigma y - sum bf log(beta'y)
/// over beta'y > 0 (and y >= 0 when long_only).
inline SolveResult solve_frb(const CovarianceModel& cov, const RiskMeasureSpec& measure, const FactorModel& factors,
                             const Vector& factor_budgets, const SolverConfig& cfg = SolverConfig::deterministic(),
                             bool long_only = false) {
    cfg.validate();
    require(measure.kind == MeasureKind::Volatility, ErrorCode::UnsupportedInput,
            measure.name() + " needs scenarios, not a covariance matrix");
    const FactorGeometry geo(factors);
    require(cov.assets() == geo.assets(), ErrorCode::DimensionMismatch, "covariance and loadings disagree");
    const auto terms = detail::factor_terms(geo, factor_budgets, long_only);
    Vector y0 = detail::frb_start(geo, cfg, long_only);
    require(terms.in_domain(y0), ErrorCode::InvalidInput, "initial point must have positive factor exposures");
    y0 = detail::scaled_start(y0, cov.sigma(), measure, terms.total_weight());

    const auto run = long_only ? detail::projected_newton_barrier(cov.sigma(), terms, y0, cfg.max_iterations)
                               : detail::newton_barrier(cov.sigma(), terms, y0, cfg.max_iterations);
    SolveResult r = detail::finish_frb(run.y, measure, cov, geo, factor_budgets, long_only, cfg);
    r.iterations = run.iterations;
    r.objective_trace = run.trace;
    if (long_only) {
        const Vector g = 2.0 * cov.sigma() * run.y + terms.gradient(run.y);
        const Vector pg = run.y - (run.y - g).cwiseMax(0.0);
        r.converged = pg.cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, g.cwiseAbs().maxCoeff());
    } else {
        r.converged = r.residual <= cfg.tolerance;
    }
    return r;
}

/// FRB for a measure with a minimum representation, by SGD over (y, zeta).
inline SolveResult solve_frb(const ScenarioSet& scenarios, const RiskMeasureSpec& measure, const FactorModel& factors,
                             const Vector& factor_budgets, const SolverConfig& cfg = SolverConfig::stochastic(),
                             bool long_only = false) {
    cfg.validate();
    const FactorGeometry geo(factors);
    require(scenarios.assets() == geo.assets(), ErrorCode::DimensionMismatch, "scenarios and loadings disagree");
    const auto terms = detail::factor_terms(geo, factor_budgets, long_only);
    const Vector y0 = detail::frb_start(geo, cfg, long_only);
    require(terms.in_domain(y0), ErrorCode::InvalidInput, "initial point must have positive factor exposures");

    const auto run = detail::sgd_barrier(scenarios, measure, terms, y0, cfg);
    SolveResult r = detail::finish_frb(run.y, measure, scenarios, geo, factor_budgets, long_only, cfg);
    r.zeta = optimal_zeta(measure, portfolio_losses(scenarios, r.portfolio.weights));
    r.iterations = run.iterations;
    r.converged = long_only ? true : r.residual <= cfg.tolerance;
    return r;
}

/// Long-only portfolio with prescribed factor exposures:
///   min R(y) s.t. beta'y = w_star, y >= 0, then normalized.
inline SolveResult solve_frb_match_exposures(const Vector& w_star, const FactorModel& factors,
                                             const CovarianceModel& cov,
                                             const RiskMeasureSpec& measure = RiskMeasureSpec::volatility(),
                                             const SolverConfig& cfg = SolverConfig::deterministic()) {
    require(measure.kind == MeasureKind::Volatility, ErrorCode::UnsupportedInput,
            measure.name() + " needs scenarios, not a covariance matrix");
    const FactorGeometry geo(factors);
    require(w_star.size() == geo.factors(), ErrorCode::DimensionMismatch, "w_star must have m entries");
    const Matrix at = geo.beta().transpose();
    const auto phase1 = detail::nnls(at, w_star);
    if (phase1.residual_norm > 1e-9 * (1.0 + w_star.norm()))
        fail(ErrorCode::InfeasibleExposures, "no nonnegative portfolio attains the requested factor exposures");
    const auto qp = detail::solve_qp_nonneg(2.0 * cov.sigma(), Vector::Zero(geo.assets()), at, phase1.x);
    require(qp.x.sum() > 0.0, ErrorCode::NormalizationDegenerate, "matched exposures have zero total weight");
    SolveResult r = detail::assemble(qp.x, measure, cov, &geo, cfg.factor);
    r.iterations = qp.iterations;
    r.converged = qp.converged;
    r.residual = (at * qp.x - w_star).norm();
    return r;
}

/// Scenario version: projected subgradient descent on R over the polytope
/// {y >= 0, beta'y = w_star}, keeping the best iterate.
inline SolveResult solve_frb_match_exposures(const Vector& w_star, const FactorModel& factors,
                                             const ScenarioSet& scenarios, const RiskMeasureSpec& measure,
                                             const SolverConfig& cfg = SolverConfig::deterministic()) {
    const FactorGeometry geo(factors);
    require(w_star.size() == geo.factors(), ErrorCode::DimensionMismatch, "w_star must have m entries");
    const Index d = geo.assets();
    const Matrix at = geo.beta().transpose();
    const auto phase1 = detail::nnls(at, w_star);
    if (phase1.residual_norm > 1e-9 * (1.0 + w_star.norm()))
        fail(ErrorCode::InfeasibleExposures, "no nonnegative portfolio attains the requested factor exposures");

    const Matrix eye = Matrix::Identity(d, d);
    auto project = [&](const Vector& z, const Vector& feasible) {
        // argmin ||y - z||^2 over the polytope, warm-started at a feasible point.
        return detail::solve_qp_nonneg(eye, -z, at, feasible).x;
    };

    Vector y = phase1.x;
    Vector best = y;
    double best_risk = risk_value(measure, y, scenarios);
    const double radius = std::max(y.norm(), 1e-12);
    int iterations = 0;
    for (int k = 0; k < cfg.max_iterations; ++k) {
        const Vector g = risk_gradient(measure, y, scenarios);
        const double gn = g.norm();
        if (gn == 0.0) break;
        const double eta = 0.1 * radius / (gn * std::sqrt(1.0 + k));
        y = project(y - eta * g, y);
        ++iterations;
        const double r = risk_value(measure, y, scenarios);
        if (r < best_risk) {
            best_risk = r;
            best = y;
        }
    }
    require(best.sum() > 0.0, ErrorCode::NormalizationDegenerate, "matched exposures have zero total weight");
    SolveResult r = detail::assemble(best, measure, scenarios, &geo, cfg.factor);
    r.iterations = iterations;
    r.converged = true;
    r.residual = (at * best - w_star).norm();
    return r;
}

// ---------------------------------------------------------------------------
// Asset-factor risk budgeting

namespace detail {

inline BarrierTerms afrb_terms(const FactorGeometry& geo, const BudgetSpec& budgets) {
    require_budgets(budgets, geo.assets(), geo.factors(), true, true);
    BarrierTerms terms;
    terms.lambda_asset = budgets.lambda_asset;
    terms.asset_budgets = budgets.asset_budgets;
    terms.lambda_factor = budgets.lambda_factor;
    terms.factor_budgets = budgets.factor_budgets;
    terms.beta = &geo.beta();
    terms.domain = Domain::Positive;
    return terms;
}

inline Vector afrb_start(const FactorGeometry& geo, const BudgetSpec& budgets, const SolverConfig& cfg) {
    Vector y = initial_direction(cfg, budgets.asset_budgets);
    if (cfg.initial_point) return y;
    if (((geo.beta().transpose() * y).array() > 0.0).all()) return y;
    auto feasible = long_only_feasible_point(geo.beta());
    if (!feasible)
        fail(ErrorCode::InfeasibleLongOnly, "no positive portfolio has strictly positive factor exposures");
    // A small multiple of the budgets keeps every coordinate positive.
    return *feasible + 1e-3 * feasible->sum() * budgets.asset_budgets;
}

}  // namespace detail

inline SolveResult solve_afrb(const CovarianceModel& cov, const RiskMeasureSpec& measure, const FactorModel& factors,
                              const BudgetSpec& budgets, const SolverConfig& cfg = SolverConfig::deterministic()) {
    cfg.validate();
    require(measure.kind == MeasureKind::Volatility, ErrorCode::UnsupportedInput,
            measure.name() + " needs scenarios, not a covariance matrix");
    const FactorGeometry geo(factors);
    require(cov.assets() == geo.assets(), ErrorCode::DimensionMismatch, "covariance and loadings disagree");
    const auto terms = detail::afrb_terms(geo, budgets);
    Vector y0 = detail::afrb_start(geo, budgets, cfg);
    require(terms.in_domain(y0), ErrorCode::InvalidInput, "initial point must lie in the positive factor cone");
    y0 = detail::scaled_start(y0, cov.sigma(), measure, terms.total_weight());

    const auto run = detail::newton_barrier(cov.sigma(), terms, y0, cfg.max_iterations);
    SolveResult r = detail::assemble(run.y, measure, cov, &geo, cfg.factor);
    r.iterations = run.iterations;
    r.objective_trace = run.trace;
    r.residual = detail::barrier_stationarity(run.y, measure, cov, terms);
    r.converged = r.residual <= cfg.tolerance;
    return r;
}

inline SolveResult solve_afrb(const ScenarioSet& scenarios, const RiskMeasureSpec& measure,
                              const FactorModel& factors, const BudgetSpec& budgets,
                              const SolverConfig& cfg = SolverConfig::stochastic()) {
    cfg.validate();
    const FactorGeometry geo(factors);
    require(scenarios.assets() == geo.assets(), ErrorCode::DimensionMismatch, "scenarios and loadings disagree");
    const auto terms = detail::afrb_terms(geo, budgets);
    const Vector y0 = detail::afrb_start(geo, budgets, cfg);
    require(terms.in_domain(y0), ErrorCode::InvalidInput, "initial point must lie in the positive factor cone");

    const auto run = detail::sgd_barrier(scenarios, measure, terms, y0, cfg);
    SolveResult r = detail::assemble(run.y, measure, scenarios, &geo, cfg.factor);
    r.zeta = optimal_zeta(measure, portfolio_losses(scenarios, r.portfolio.weights));
    r.iterations = run.iterations;
    r.residual = detail::barrier_stationarity(run.y, measure, scenarios, terms);
    r.converged = r.residual <= cfg.tolerance;
    return r;
}

// ---------------------------------------------------------------------------
// Reference portfolios

/// Minimum variance, fully invested; long-only via the active-set QP.
inline SolveResult solve_min_variance(const CovarianceModel& cov, bool long_only,
                                      const FactorModel* factors = nullptr) {
    const Index d = cov.assets();
    const auto spec = RiskMeasureSpec::volatility();
    std::optional<FactorGeometry> geo;
    if (factors) geo.emplace(*factors);
    Vector theta;
    int iterations = 0;
    double kkt = 0.0;
    if (!long_only) {
        const Vector inv_one = cov.sigma().llt().solve(Vector::Ones(d));
        theta = inv_one / inv_one.sum();
        const Vector g = 2.0 * cov.sigma() * theta;
        kkt = (g.array() - g.mean()).abs().maxCoeff();
        iterations = 1;
    } else {
        const Matrix ones = Matrix::Ones(1, d);
        const auto qp = detail::solve_qp_nonneg(2.0 * cov.sigma(), Vector::Zero(d), ones,
                                                Vector::Constant(d, 1.0 / static_cast<double>(d)));
        theta = qp.x / qp.x.sum();
        iterations = qp.iterations;
        // Stationarity, dual feasibility and complementarity of the QP.
        const Vector g = 2.0 * cov.sigma() * theta;
        const double nu = qp.eq_multipliers(0);
        const Vector lambda = g.array() - nu;
        for (Index i = 0; i < d; ++i) {
            kkt = std::max(kkt, std::max(-lambda(i), 0.0));
            kkt = std::max(kkt, std::abs(theta(i) * lambda(i)));
        }
    }
    SolveResult r = detail::assemble(theta, spec, cov, geo ? &*geo : nullptr, FactorSolverConfig{});
    r.iterations = iterations;
    r.residual = kkt;
    r.converged = kkt <= 1e-8;
    return r;
}

template <class Data>
SolveResult solve_equal_weight(Index assets, const RiskMeasureSpec& spec, const Data& data,
                               const FactorModel* factors = nullptr) {
    std::optional<FactorGeometry> geo;
    if (factors) geo.emplace(*factors);
    SolveResult r = detail::assemble(Vector::Constant(assets, 1.0 / static_cast<double>(assets)), spec, data,
                                     geo ? &*geo : nullptr, FactorSolverConfig{});
    r.converged = true;
    return r;
}

// ---------------------------------------------------------------------------
// Dispatch

/// Solves a problem on a covariance matrix (volatility only).
inline SolveResult solve(const ProblemSpec& problem, const CovarianceModel& cov, const FactorModel* factors,
                         const SolverConfig& cfg = SolverConfig::deterministic()) {
    auto need_factors = [&] {
        require(factors != nullptr, ErrorCode::InvalidInput,
                problem_name(problem.kind) + " needs a factor model");
        return *factors;
    };
    switch (problem.kind) {
    case ProblemKind::RB: return solve_rb_volatility(cov, problem.budgets.asset_budgets, cfg, factors);
    case ProblemKind::FRB:
        return solve_frb(cov, problem.measure, need_factors(), problem.budgets.factor_budgets, cfg, false);
    case ProblemKind::FRBLongOnly:
        return solve_frb(cov, problem.measure, need_factors(), problem.budgets.factor_budgets, cfg, true);
    case ProblemKind::AFRB: return solve_afrb(cov, problem.measure, need_factors(), problem.budgets, cfg);
    case ProblemKind::MinVariance: return solve_min_variance(cov, false, factors);
    case ProblemKind::MinVarianceLongOnly: return solve_min_variance(cov, true, factors);
    case ProblemKind::EqualWeight: return solve_equal_weight(cov.assets(), problem.measure, cov, factors);
    }
    fail(ErrorCode::InvalidInput, "unknown problem kind");
}

/// Solves a problem on scenarios. Volatility budgeting problems use the
/// deterministic solver on the sample covariance; other measures use SGD.
inline SolveResult solve(const ProblemSpec& problem, const ScenarioSet& scenarios, const FactorModel* factors,
                         const SolverConfig& cfg) {
    if (problem.measure.kind == MeasureKind::Volatility || problem.kind == ProblemKind::MinVariance ||
        problem.kind == ProblemKind::MinVarianceLongOnly) {
        const auto cov = sample_covariance(scenarios);
        SolverConfig det = cfg;
        if (problem.measure.kind != MeasureKind::Volatility) det = SolverConfig::deterministic();
        ProblemSpec vol = problem;
        vol.measure = RiskMeasureSpec::volatility();
        return solve(vol, cov, factors, det);
    }
    auto need_factors = [&] {
        require(factors != nullptr, ErrorCode::InvalidInput,
                problem_name(problem.kind) + " needs a factor model");
        return *factors;
    };
    switch (problem.kind) {
    case ProblemKind::RB:
        return solve_rb_stochastic(scenarios, problem.measure, problem.budgets.asset_budgets, cfg, factors);
    case ProblemKind::FRB:
        return solve_frb(scenarios, problem.measure, need_factors(), problem.budgets.factor_budgets, cfg, false);
    case ProblemKind::FRBLongOnly:
        return solve_frb(scenarios, problem.measure, need_factors(), problem.budgets.factor_budgets, cfg, true);
    case ProblemKind::AFRB: return solve_afrb(scenarios, problem.measure, need_factors(), problem.budgets, cfg);
    case ProblemKind::EqualWeight:
        return solve_equal_weight(scenarios.assets(), problem.measure, scenarios, factors);
    default: break;
    }
    fail(ErrorCode::InvalidInput, "unknown problem kind");
}

}  // namespace rbf
