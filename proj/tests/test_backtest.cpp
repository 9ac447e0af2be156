#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace rbf;
using namespace rbf::testing;

namespace {

Matrix uniform_returns(Index n, Index d, std::uint64_t seed, double scale = 0.02) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-scale, scale);
    Matrix x(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) x(i, j) = u(rng);
    return x;
}

BacktestConfig equal_weight_config(Index lookback, Frequency f) {
    BacktestConfig cfg;
    cfg.lookback = lookback;
    cfg.rebalance = f;
    cfg.strategy.kind = ProblemKind::EqualWeight;
    return cfg;
}

/// OLS with intercept via Householder QR on [1, F].
Matrix ols_slopes(const Matrix& y, const Matrix& f) {
    Matrix design(f.rows(), f.cols() + 1);
    design.col(0).setOnes();
    design.rightCols(f.cols()) = f;
    const Matrix coef = design.householderQr().solve(y);
    return coef.bottomRows(f.cols()).transpose();
}

}  // namespace

TEST(AggregateReturns, CompoundsWithinCalendarWeeks) {
    Matrix x(4, 1);
    x << 0.1, 0.2, -0.1, 0.05;
    // Thursday, Friday, Monday, Tuesday.
    const ScenarioSet s(x, PeriodLength::Daily, {"A"}, {"2021-01-07", "2021-01-08", "2021-01-11", "2021-01-12"});
    const auto w = aggregate_returns(s, Frequency::Weekly);
    ASSERT_EQ(w.rows(), 2);
    EXPECT_NEAR(w.returns()(0, 0), 1.1 * 1.2 - 1.0, 1e-15);
    EXPECT_NEAR(w.returns()(1, 0), 0.9 * 1.05 - 1.0, 1e-15);
    EXPECT_EQ(w.dates()[0], "2021-01-08");
    EXPECT_EQ(w.period(), PeriodLength::Weekly);
}

TEST(EstimateLoadings, RecoversNoiselessBeta) {
    const Matrix f = uniform_returns(120, 2, 61);
    std::mt19937_64 rng(62);
    const Matrix beta = random_matrix(4, 2, rng);
    Matrix y = f * beta.transpose();
    y.rowwise() += vec({0.001, -0.002, 0.0, 0.003}).transpose();
    const auto model = estimate_loadings(ScenarioSet(y), ScenarioSet(f), 0.05);
    EXPECT_LT((model.beta() - beta).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(EstimateLoadings, StrongSignalRetainedWithTinyPValue) {
    const Matrix f = uniform_returns(200, 2, 63);
    std::mt19937_64 rng(64);
    std::normal_distribution<double> noise(0.0, 1e-8);
    Matrix y(200, 3);
    for (Index i = 0; i < 200; ++i) {
        y(i, 0) = 2.0 * f(i, 0) + noise(rng);
        y(i, 1) = -1.0 * f(i, 1) + noise(rng);
        y(i, 2) = 0.5 * f(i, 0) + 0.5 * f(i, 1) + noise(rng);
    }
    const auto model = estimate_loadings(ScenarioSet(y), ScenarioSet(f), 0.05);
    EXPECT_NEAR(model.beta()(0, 0), 2.0, 1e-6);
    ASSERT_TRUE(model.pvalues().has_value());
    EXPECT_LT((*model.pvalues())(0, 0), 1e-10);
}

TEST(EstimateLoadings, PureNoiseIsZeroedMostOfTheTime) {
    int retained = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const Matrix f = uniform_returns(150, 1, 1000 + seed);
        Matrix y = uniform_returns(150, 3, 2000 + seed);
        y.col(0) += 3.0 * f.col(0);
        y.col(1) -= 2.0 * f.col(0);
        const auto model = estimate_loadings(ScenarioSet(y), ScenarioSet(f), 0.05);
        if (model.beta()(2, 0) != 0.0) ++retained;
    }
    EXPECT_LE(retained, 10);
}

TEST(EstimateLoadings, ThresholdOneKeepsRawOls) {
    const Matrix f = uniform_returns(80, 2, 65);
    std::mt19937_64 rng(3);
    const Matrix y = uniform_returns(80, 4, 66) + f * random_matrix(4, 2, rng).transpose();
    const auto model = estimate_loadings(ScenarioSet(y), ScenarioSet(f), 1.0);
    EXPECT_LT((model.beta() - ols_slopes(y, f)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(EstimateLoadings, ZeroingEverythingLosesRank) {
    const Matrix f = uniform_returns(100, 2, 67);
    const Matrix y = 1e-3 * uniform_returns(100, 4, 68);
    try {
        estimate_loadings(ScenarioSet(y), ScenarioSet(f), 1e-12);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RankLost);
    }
}

TEST(EstimateLoadings, TooFewRows) {
    const Matrix f = uniform_returns(3, 2, 69);
    try {
        estimate_loadings(ScenarioSet(uniform_returns(3, 4, 70)), ScenarioSet(f), 0.05);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InsufficientData);
    }
}

TEST(RunBacktest, DailyEqualWeightNavIsChainProductOfMeans) {
    const Matrix x = uniform_returns(30, 3, 71);
    const auto res = run_backtest(ScenarioSet(x), std::nullopt, equal_weight_config(5, Frequency::Daily));
    ASSERT_EQ(res.nav.size(), 26u);
    double nav = 1.0;
    for (Index r = 5; r < 30; ++r) {
        nav *= 1.0 + x.row(r).mean();
        EXPECT_NEAR(res.nav[static_cast<std::size_t>(r - 4)], nav, 1e-12);
    }
    EXPECT_EQ(res.total_costs, 0.0);
}

TEST(RunBacktest, WeeklyNavMatchesBuyAndHoldValue) {
    const Matrix x = uniform_returns(40, 3, 72);
    const auto res = run_backtest(ScenarioSet(x), std::nullopt, equal_weight_config(10, Frequency::Weekly));
    // Rebalances at rows 9, 14, ..., 34; within a week each asset grows by its compounded return.
    double nav = 1.0;
    std::size_t k = 0;
    for (Index end = 9; end < 39; end += 5) {
        Vector value = Vector::Constant(3, 1.0 / 3.0);
        for (Index r = end + 1; r <= std::min<Index>(end + 5, 39); ++r) {
            value = value.cwiseProduct((1.0 + x.row(r).transpose().array()).matrix());
            ++k;
            EXPECT_NEAR(res.nav[k], nav * value.sum(), 1e-12) << r;
        }
        nav *= value.sum();
    }
    for (const auto& rec : res.rebalances) EXPECT_NEAR(rec.weights.sum(), 1.0, 1e-12);
}

TEST(RunBacktest, ProportionalCostIdentity) {
    const Matrix x = uniform_returns(60, 3, 73);
    BacktestConfig cfg;
    cfg.lookback = 20;
    cfg.strategy.kind = ProblemKind::RB;
    cfg.strategy.budgets = BudgetSpec::uniform(3, 0);
    const auto free = run_backtest(ScenarioSet(x), std::nullopt, cfg);
    cfg.costs = vec({0.0002, 0.0001, 0.0005});
    const auto paid = run_backtest(ScenarioSet(x), std::nullopt, cfg);
    ASSERT_EQ(free.nav.size(), paid.nav.size());
    double factor = 1.0;
    std::size_t k = 0;
    for (std::size_t t = 0; t < paid.nav.size(); ++t) {
        if (k < paid.rebalances.size() && paid.nav_dates[t] == paid.rebalances[k].date) {
            factor *= 1.0 - paid.rebalances[k].cost_rate;
            ++k;
        }
        EXPECT_NEAR(paid.nav[t], free.nav[t] * factor, 1e-12) << t;
    }
    EXPECT_GT(paid.total_costs, 0.0);
    EXPECT_EQ(free.total_costs, 0.0);
    // Cost rates follow the spreads applied to traded weight.
    EXPECT_NEAR(paid.rebalances.front().cost_rate, cfg.costs.dot(paid.rebalances.front().weights), 1e-15);
}

TEST(RunBacktest, StationaryDataGivesNoTurnover) {
    const double week[5] = {0.01, -0.02, 0.015, 0.005, -0.004};
    Matrix x(60, 3);
    for (Index r = 0; r < 60; ++r)
        for (Index j = 0; j < 3; ++j) x(r, j) = week[(r + 2 * j) % 5];
    // Each asset compounds the same five returns per week, so drift leaves weights unchanged.
    BacktestConfig cfg;
    cfg.lookback = 20;
    cfg.strategy.kind = ProblemKind::RB;
    cfg.strategy.budgets.asset_budgets = vec({0.5, 0.3, 0.2});
    const auto res = run_backtest(ScenarioSet(x), std::nullopt, cfg);
    ASSERT_GT(res.rebalances.size(), 3u);
    for (const auto& rec : res.rebalances) {
        EXPECT_TRUE(rec.failure.empty()) << rec.failure;
        if (!rec.initial) EXPECT_LT(rec.turnover, 1e-6);
    }
    EXPECT_LT(summary_stats(res).average_turnover, 1e-6);
}

TEST(RunBacktest, FailedSolvesHoldCashThenInvest) {
    Matrix x = uniform_returns(50, 3, 74);
    for (Index r = 0; r < 25; ++r) x(r, 2) = 0.0;
    BacktestConfig cfg;
    cfg.lookback = 10;
    cfg.strategy.kind = ProblemKind::RB;
    cfg.strategy.budgets = BudgetSpec::uniform(3, 0);
    const auto res = run_backtest(ScenarioSet(x), std::nullopt, cfg);
    ASSERT_FALSE(res.rebalances.empty());
    EXPECT_FALSE(res.rebalances.front().failure.empty());
    EXPECT_EQ(res.rebalances.front().weights, Vector::Zero(3));
    bool invested = false;
    for (std::size_t t = 0; t < res.rebalances.size(); ++t) {
        const auto& rec = res.rebalances[t];
        if (rec.failure.empty() && !invested) {
            invested = true;
            EXPECT_TRUE(rec.initial);
        }
    }
    EXPECT_TRUE(invested);
    EXPECT_EQ(res.nav.front(), 1.0);
    EXPECT_EQ(res.nav[1], 1.0);
}

TEST(RunBacktest, ContributionHistoriesSatisfyEulerSum) {
    const Matrix x = gaussian_draws(toy_sigma() / 252.0, 200, 75);
    BacktestConfig cfg;
    cfg.lookback = 100;
    cfg.strategy.kind = ProblemKind::AFRB;
    cfg.strategy.budgets = BudgetSpec::uniform(4, 3, 0.5, 0.5);
    cfg.fixed_factors = toy_factors();
    const auto res = run_backtest(ScenarioSet(x), std::nullopt, cfg);
    for (const auto& rec : res.rebalances) {
        ASSERT_TRUE(rec.failure.empty()) << rec.failure;
        EXPECT_LT(rel_err(rec.asset_contributions.sum(), rec.total_risk), 1e-8);
        EXPECT_EQ(rec.factor_contributions.size(), 3);
    }
}

TEST(RunBacktest, FactorStrategyNeedsLoadings) {
    BacktestConfig cfg;
    cfg.lookback = 10;
    cfg.strategy.kind = ProblemKind::FRB;
    cfg.strategy.budgets = BudgetSpec::uniform(3, 1);
    EXPECT_THROW(run_backtest(ScenarioSet(uniform_returns(40, 3, 76)), std::nullopt, cfg), Error);
}

TEST(SummaryStats, ConstantNav) {
    BacktestResult r;
    r.nav = {1.0, 1.0, 1.0, 1.0};
    const auto s = summary_stats(r);
    EXPECT_EQ(s.annual_mean, 0.0);
    EXPECT_EQ(s.annual_volatility, 0.0);
    EXPECT_EQ(s.expected_shortfall, 0.0);
    EXPECT_EQ(s.max_drawdown, 0.0);
    EXPECT_EQ(s.average_turnover, 0.0);
}

TEST(SummaryStats, HandComputedDrawdown) {
    BacktestResult r;
    r.nav = {1.0, 1.1, 0.99};
    EXPECT_NEAR(summary_stats(r).max_drawdown, 0.1, 1e-15);
}

TEST(SummaryStats, AnnualizesDailyMoments) {
    BacktestResult r;
    r.nav = {1.0, 1.01, 1.01 * 0.99, 1.01 * 0.99 * 1.02};
    const auto s = summary_stats(r);
    const Vector ret = vec({0.01, -0.01, 0.02});
    EXPECT_NEAR(s.annual_mean, ret.mean() * 252.0, 1e-12);
    const double var = (ret.array() - ret.mean()).square().sum() / 2.0;
    EXPECT_NEAR(s.annual_volatility, std::sqrt(var * 252.0), 1e-12);
}
