#pragma once

// Rolling-window backtests: loading estimation by OLS with a p-value
// filter, periodic re-solving on a lookback window, buy-and-hold drift
// between rebalances and proportional transaction costs.

#include "rbf/detail/dates.hpp"
#include "rbf/solvers.hpp"

#include <boost/math/distributions/students_t.hpp>

namespace rbf {

enum class Frequency { Daily, Weekly, Monthly };

inline std::string frequency_name(Frequency f) {
    switch (f) {
    case Frequency::Daily: return "daily";
    case Frequency::Weekly: return "weekly";
    case Frequency::Monthly: return "monthly";
    }
    return "unknown";
}

namespace detail {

/// Group id per row: rows sharing an id fall in the same calendar period.
/// Without dates, weeks are blocks of 5 rows and months blocks of 21.
inline std::vector<long> period_groups(const ScenarioSet& s, Frequency f) {
    std::vector<long> ids(static_cast<std::size_t>(s.rows()));
    for (Index r = 0; r < s.rows(); ++r) {
        long id = r;
        if (f != Frequency::Daily) {
            if (s.has_dates()) {
                const auto day = require_date(s.dates()[static_cast<std::size_t>(r)]);
                id = f == Frequency::Weekly ? week_start(day).time_since_epoch().count() : month_key(day);
            } else {
                id = r / (f == Frequency::Weekly ? 5 : 21);
            }
        }
        ids[static_cast<std::size_t>(r)] = id;
    }
    return ids;
}

}  // namespace detail

/// Compounds returns within each calendar period. The period's last date
/// labels the aggregated row.
inline ScenarioSet aggregate_returns(const ScenarioSet& s, Frequency f) {
    if (f == Frequency::Daily) return s;
    const auto ids = detail::period_groups(s, f);
    std::vector<Vector> rows;
    std::vector<std::string> dates;
    Vector growth = Vector::Ones(s.assets());
    for (Index r = 0; r < s.rows(); ++r) {
        growth.array() *= 1.0 + s.returns().row(r).transpose().array();
        const bool last = r + 1 == s.rows() || ids[static_cast<std::size_t>(r + 1)] != ids[static_cast<std::size_t>(r)];
        if (last) {
            rows.push_back(growth.array() - 1.0);
            if (s.has_dates()) dates.push_back(s.dates()[static_cast<std::size_t>(r)]);
            growth.setOnes();
        }
    }
    require(rows.size() >= 2, ErrorCode::InsufficientData, "fewer than two aggregated periods");
    Matrix out(static_cast<Index>(rows.size()), s.assets());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = rows[i].transpose();
    const PeriodLength period = f == Frequency::Weekly ? PeriodLength::Weekly : PeriodLength::Monthly;
    return ScenarioSet(std::move(out), period, s.labels(), std::move(dates));
}

/// Per-asset OLS of returns on factor returns with an intercept. Slopes whose
/// two-sided t-test p-value exceeds the threshold are set to zero.
inline FactorModel estimate_loadings(const ScenarioSet& assets, const ScenarioSet& factors,
                                     double pvalue_threshold = 0.05) {
    require(assets.rows() == factors.rows(), ErrorCode::DimensionMismatch,
            "asset and factor windows have different lengths");
    if (assets.has_dates() && factors.has_dates())
        require(assets.dates() == factors.dates(), ErrorCode::DimensionMismatch, "asset and factor dates differ");
    require(pvalue_threshold >= 0.0 && pvalue_threshold <= 1.0, ErrorCode::InvalidInput,
            "p-value threshold must lie in [0, 1]");
    const Index n = assets.rows();
    const Index m = factors.assets();
    const Index d = assets.assets();
    require(n > m + 1, ErrorCode::InsufficientData,
            "OLS needs more than " + std::to_string(m + 1) + " rows, got " + std::to_string(n));

    Matrix design(n, m + 1);
    design.col(0).setOnes();
    design.rightCols(m) = factors.returns();
    const Matrix gram = design.transpose() * design;
    if (detail::numerical_rank(gram, 1e-12) < m + 1)
        fail(ErrorCode::RankLost, "factor returns are collinear in the estimation window");
    const Eigen::LDLT<Matrix> ldlt(gram);
    const Matrix gram_inv = ldlt.solve(Matrix::Identity(m + 1, m + 1));
    const Matrix coef = ldlt.solve(design.transpose() * assets.returns());  // (m+1) x d
    const Matrix resid = assets.returns() - design * coef;
    const double dof = static_cast<double>(n - m - 1);
    const boost::math::students_t dist(dof);

    Matrix beta(d, m);
    Matrix pvalues(d, m);
    for (Index i = 0; i < d; ++i) {
        const double s2 = resid.col(i).squaredNorm() / dof;
        for (Index j = 0; j < m; ++j) {
            const double b = coef(j + 1, i);
            const double se = std::sqrt(std::max(s2 * gram_inv(j + 1, j + 1), 0.0));
            double p = 0.0;
            if (se > 0.0) p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(b / se)));
            else if (b == 0.0) p = 1.0;
            pvalues(i, j) = p;
            beta(i, j) = p > pvalue_threshold ? 0.0 : b;
        }
    }
    FactorModel model(beta, factors.labels(), pvalues);
    if (m < d && !model.has_full_rank())
        fail(ErrorCode::RankLost, "p-value filtering left a rank-deficient loading matrix");
    model.require_valid();
    return model;
}

struct BacktestConfig {
    /// Lookback window length in rows of the return data.
    Index lookback = 1260;
    Frequency rebalance = Frequency::Weekly;
    /// Aggregation used for the loading regression.
    Frequency estimation = Frequency::Weekly;
    ProblemSpec strategy;
    /// Proportional spread per asset (fraction of traded notional).
    Vector costs;
    double pvalue_threshold = 0.05;
    SolverConfig solver = SolverConfig::deterministic();
    /// Fixed loadings used when no factor proxies are supplied.
    std::optional<FactorModel> fixed_factors;
};

struct RebalanceRecord {
    std::string date;
    Index row = 0;
    Vector weights;
    Vector asset_contributions;
    Vector factor_contributions;
    double total_risk = 0.0;
    /// Fraction of NAV paid at this rebalance.
    double cost_rate = 0.0;
    /// sum |new - drifted|; not counted for the initial allocation.
    double turnover = 0.0;
    bool initial = false;
    /// Empty on success; otherwise the error that made the strategy hold.
    std::string failure;
};

struct BacktestStats {
    double annual_mean = 0.0;
    double annual_volatility = 0.0;
    double expected_shortfall = 0.0;
    double max_drawdown = 0.0;
    double average_turnover = 0.0;
};

struct BacktestResult {
    std::vector<RebalanceRecord> rebalances;
    std::vector<std::string> nav_dates;
    std::vector<double> nav;
    double total_costs = 0.0;
    PeriodLength period = PeriodLength::Daily;
    std::vector<std::string> factor_labels;
    std::vector<std::string> asset_labels;
};

namespace detail {

inline bool needs_factors(ProblemKind k) {
    return k == ProblemKind::FRB || k == ProblemKind::FRBLongOnly || k == ProblemKind::AFRB;
}

inline std::string row_label(const ScenarioSet& s, Index r) {
    return s.has_dates() ? s.dates()[static_cast<std::size_t>(r)] : std::to_string(r);
}

}  // namespace detail

/// Runs the strategy over the returns. The first rebalance is the first
/// period end with a full lookback window; new weights take effect on the
/// following row.
inline BacktestResult run_backtest(const ScenarioSet& returns, const std::optional<ScenarioSet>& factor_proxies,
                                   const BacktestConfig& cfg) {
    const Index n = returns.rows();
    const Index d = returns.assets();
    require(cfg.lookback >= 2 && cfg.lookback < n, ErrorCode::InsufficientData,
            "lookback must be at least 2 and shorter than the dataset");
    require(cfg.costs.size() == 0 || cfg.costs.size() == d, ErrorCode::DimensionMismatch,
            "cost vector length differs from asset count");
    require(cfg.costs.size() == 0 || (cfg.costs.array() >= 0.0).all(), ErrorCode::InvalidInput,
            "costs must be nonnegative");
    if (factor_proxies) {
        require(factor_proxies->rows() == n, ErrorCode::DimensionMismatch, "factor proxies misaligned with returns");
        if (returns.has_dates() && factor_proxies->has_dates())
            require(returns.dates() == factor_proxies->dates(), ErrorCode::DimensionMismatch,
                    "factor proxy dates differ from return dates");
    }
    const bool factor_strategy = detail::needs_factors(cfg.strategy.kind);
    require(!factor_strategy || factor_proxies || cfg.fixed_factors, ErrorCode::InvalidInput,
            problem_name(cfg.strategy.kind) + " backtest needs factor proxies or fixed loadings");
    const Vector costs = cfg.costs.size() ? cfg.costs : Vector::Zero(d);

    const auto groups = detail::period_groups(returns, cfg.rebalance);
    auto is_period_end = [&](Index r) {
        return r + 1 == n || groups[static_cast<std::size_t>(r + 1)] != groups[static_cast<std::size_t>(r)];
    };

    BacktestResult out;
    out.period = returns.period();
    out.asset_labels = returns.labels();
    Index start = cfg.lookback - 1;
    while (start < n - 1 && !is_period_end(start)) ++start;
    require(start < n - 1, ErrorCode::InsufficientData, "no rebalance date leaves an evaluation period");

    double nav = 1.0;
    Vector held;  // drifted weights
    bool have_weights = false;
    for (Index r = start; r < n; ++r) {
        if (r > start) {
            const Vector ret = returns.returns().row(r).transpose();
            const double port = held.dot(ret);
            nav *= 1.0 + port;
            require(nav > 0.0, ErrorCode::InvalidInput, "NAV fell to zero at " + detail::row_label(returns, r));
            held = held.cwiseProduct((1.0 + ret.array()).matrix()) / (1.0 + port);
        }
        if (r == n - 1 || !is_period_end(r)) {
            out.nav_dates.push_back(detail::row_label(returns, r));
            out.nav.push_back(nav);
            continue;
        }

        RebalanceRecord rec;
        rec.date = detail::row_label(returns, r);
        rec.row = r;
        rec.initial = !have_weights;
        const Index first = r - cfg.lookback + 1;
        try {
            const ScenarioSet window = returns.slice(first, cfg.lookback);
            std::optional<FactorModel> loadings;
            if (factor_proxies) {
                const ScenarioSet fwin = factor_proxies->slice(first, cfg.lookback);
                try {
                    loadings = estimate_loadings(aggregate_returns(window, cfg.estimation),
                                                 aggregate_returns(fwin, cfg.estimation), cfg.pvalue_threshold);
                } catch (const Error&) {
                    if (factor_strategy) throw;
                }
            } else if (cfg.fixed_factors) {
                loadings = cfg.fixed_factors;
            }
            const SolveResult res = solve(cfg.strategy, window, loadings ? &*loadings : nullptr, cfg.solver);
            rec.weights = res.portfolio.weights;
            rec.asset_contributions = res.asset_contributions;
            rec.factor_contributions = res.factor_contributions;
            rec.total_risk = res.total_risk;
            if (loadings && out.factor_labels.empty()) out.factor_labels = loadings->labels();
        } catch (const Error& e) {
            rec.failure = std::string(e.name()) + ": " + e.what();
        }

        if (rec.failure.empty()) {
            const Vector before = have_weights ? held : Vector::Zero(d);
            const Vector trade = (rec.weights - before).cwiseAbs();
            rec.cost_rate = costs.dot(trade);
            rec.turnover = have_weights ? trade.sum() : 0.0;
            out.total_costs += nav * rec.cost_rate;
            nav *= 1.0 - rec.cost_rate;
            held = rec.weights;
            have_weights = true;
        } else if (have_weights) {
            rec.weights = held;
        } else {
            // Nothing invested yet: the strategy waits in cash.
            rec.weights = Vector::Zero(d);
            held = Vector::Zero(d);
        }
        out.nav_dates.push_back(rec.date);
        out.nav.push_back(nav);
        out.rebalances.push_back(std::move(rec));
    }
    return out;
}

inline BacktestStats summary_stats(const BacktestResult& result) {
    require(result.nav.size() >= 2, ErrorCode::InsufficientData, "NAV series needs at least two points");
    const std::size_t n = result.nav.size() - 1;
    Vector r(static_cast<Index>(n));
    for (std::size_t t = 0; t < n; ++t) r(static_cast<Index>(t)) = result.nav[t + 1] / result.nav[t] - 1.0;
    const double ppy = periods_per_year(result.period);
    BacktestStats s;
    const double mean = r.mean();
    s.annual_mean = mean * ppy;
    if (n >= 2) s.annual_volatility = std::sqrt((r.array() - mean).square().sum() / static_cast<double>(n - 1) * ppy);
    if (n >= 2) {
        const auto es = loss_risk(RiskMeasureSpec::expected_shortfall(0.95), LossSample{-r, std::nullopt});
        s.expected_shortfall = std::max(es.value, 0.0);
    }
    double peak = result.nav.front();
    for (double v : result.nav) {
        peak = std::max(peak, v);
        s.max_drawdown = std::max(s.max_drawdown, 1.0 - v / peak);
    }
    double turnover = 0.0;
    std::size_t count = 0;
    for (const auto& rec : result.rebalances) {
        if (rec.initial || !rec.failure.empty()) continue;
        turnover += rec.turnover;
        ++count;
    }
    s.average_turnover = count ? turnover / static_cast<double>(count) : 0.0;
    return s;
}

}  // namespace rbf
