#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace rbf;
using namespace rbf::testing;

namespace {

SolveResult with_contributions(const Vector& asset, const Vector& factor) {
    SolveResult r;
    r.asset_contributions = asset;
    r.factor_contributions = factor;
    return r;
}

}  // namespace

TEST(Lorenz, EqualValuesLieOnDiagonal) {
    const auto c = lorenz(Vector::Constant(4, 0.25));
    ASSERT_EQ(c.points.size(), 5u);
    for (const auto& [x, y] : c.points) EXPECT_NEAR(x, y, 1e-15);
}

TEST(Lorenz, FullConcentration) {
    const auto c = lorenz(vec({0, 0, 0, 1}));
    EXPECT_EQ(c.points[3].second, 0.0);
    EXPECT_EQ(c.points[4].second, 1.0);
    EXPECT_EQ(c.points.front(), std::make_pair(0.0, 0.0));
}

TEST(Lorenz, MixedSignsGiveUShape) {
    const auto c = lorenz(vec({2, -1, 1}));
    EXPECT_DOUBLE_EQ(c.points[1].second, -0.5);
    EXPECT_DOUBLE_EQ(c.points[2].second, 0.0);
    EXPECT_DOUBLE_EQ(c.points[3].second, 1.0);
}

TEST(Lorenz, ZeroTotalRejectedAndSortInvariant) {
    try {
        lorenz(vec({1, -1}));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ZeroTotal);
    }
    std::mt19937_64 rng(51);
    Vector v = random_simplex(7, rng);
    const auto a = lorenz(v);
    std::vector<double> p(v.data(), v.data() + v.size());
    std::shuffle(p.begin(), p.end(), rng);
    const auto b = lorenz(Eigen::Map<Vector>(p.data(), 7));
    EXPECT_EQ(a.points, b.points);
}

TEST(EntropyScores, MatchedContributionsScoreZero) {
    const BudgetSpec b = BudgetSpec::uniform(4, 2);
    const auto s = entropy_scores(with_contributions(Vector::Constant(4, 0.1), Vector::Constant(2, 0.3)), b);
    EXPECT_EQ(s.asset_score, 0.0);
    EXPECT_EQ(s.factor_score, 0.0);
}

TEST(EntropyScores, HandComputedDivergence) {
    BudgetSpec b;
    b.asset_budgets = vec({0.25, 0.75});
    b.factor_budgets = vec({0.5, 0.5});
    const auto s = entropy_scores(with_contributions(vec({0.5, 0.5}), vec({1, 1})), b);
    EXPECT_NEAR(s.asset_score, 0.5 * std::log(2.0) + 0.5 * std::log(2.0 / 3.0), 1e-15);
    EXPECT_NEAR(s.asset_score, 0.1438, 5e-5);
    EXPECT_NEAR(s.combined, 0.5 * s.asset_score, 1e-15);
    EXPECT_FALSE(s.asset_l1);
}

TEST(EntropyScores, NegativeContributionFallsBackToL1) {
    BudgetSpec b;
    b.asset_budgets = vec({0.5, 0.5});
    b.factor_budgets = vec({0.5, 0.5});
    const auto s = entropy_scores(with_contributions(vec({-0.5, 1.5}), vec({1, 1})), b);
    EXPECT_TRUE(s.asset_l1);
    EXPECT_NEAR(s.asset_score, 1.0 + 1.0, 1e-15);
}

TEST(EntropyScores, ToyAfrbLiesBetweenExtremes) {
    const FactorModel f = toy_factors();
    const auto budgets = BudgetSpec::uniform(4, 3, 0.2, 0.8);
    const auto vol = RiskMeasureSpec::volatility();
    const auto rb = solve(ProblemSpec{ProblemKind::RB, budgets, vol}, toy_cov(), &f);
    const auto frb = solve(ProblemSpec{ProblemKind::FRB, budgets, vol}, toy_cov(), &f);
    const auto afrb = solve(ProblemSpec{ProblemKind::AFRB, budgets, vol}, toy_cov(), &f);
    const auto s_rb = entropy_scores(rb, budgets);
    const auto s_frb = entropy_scores(frb, budgets);
    const auto s_afrb = entropy_scores(afrb, budgets);
    EXPECT_GT(s_afrb.asset_score, s_rb.asset_score);
    EXPECT_LT(s_afrb.factor_score, s_rb.factor_score);
    EXPECT_GT(s_afrb.factor_score, s_frb.factor_score);
}

TEST(LogGrid, EndpointsAndSize) {
    const auto g = log_grid(1e-2, 1e1, 4);
    ASSERT_EQ(g.size(), 16u);
    EXPECT_NEAR(g.front().first, 1e-2, 1e-16);
    EXPECT_NEAR(g.back().second, 1e1, 1e-13);
    EXPECT_THROW(log_grid(1.0, 0.5, 3), Error);
}

TEST(GridSearch, FactorLimitScoresLikeFrb) {
    Matrix beta(4, 2);
    beta << 1, 0,
            1, 0,
            0, 1,
            0, 1;
    Matrix sigma = Matrix::Zero(4, 4);
    sigma.diagonal() << 0.04, 0.09, 0.01, 0.16;
    const CovarianceModel cov(sigma);
    const FactorModel f(beta);
    const BudgetSpec budgets = BudgetSpec::uniform(4, 2);
    const auto t = lambda_grid_search(cov, RiskMeasureSpec::volatility(), f, budgets, {{1e-6, 1.0}}, SolverConfig{});
    ASSERT_TRUE(t.best.has_value());
    const auto frb = solve_frb(cov, RiskMeasureSpec::volatility(), f, budgets.factor_budgets);
    EXPECT_LT(t.points[0].scores->factor_score, 1e-4);
    EXPECT_NEAR(t.points[0].scores->asset_score, entropy_scores(frb, budgets).asset_score, 1e-3);
}

TEST(GridSearch, AssetLimitScoresNearZero) {
    const auto t = lambda_grid_search(toy_cov(), RiskMeasureSpec::volatility(), toy_factors(),
                                      BudgetSpec::uniform(4, 3), {{1.0, 1e-6}}, SolverConfig{});
    EXPECT_LT(t.points[0].scores->asset_score, 1e-4);
}

TEST(GridSearch, AssetScoreDecreasesAlongLambdaRay) {
    std::vector<std::pair<double, double>> ray;
    for (double la : {0.1, 0.3, 1.0, 3.0, 10.0}) ray.emplace_back(la, 1.0);
    const auto t = lambda_grid_search(toy_cov(), RiskMeasureSpec::volatility(), toy_factors(),
                                      BudgetSpec::uniform(4, 3), ray, SolverConfig{});
    for (std::size_t k = 1; k < t.points.size(); ++k)
        EXPECT_LE(t.points[k].scores->asset_score, t.points[k - 1].scores->asset_score + 1e-3);
}

TEST(GridSearch, ArgminInvariantToOrderingAndThreads) {
    auto grid = log_grid(1e-2, 1e1, 4);
    const auto budgets = BudgetSpec::uniform(4, 3);
    const auto a = lambda_grid_search(toy_cov(), RiskMeasureSpec::volatility(), toy_factors(), budgets, grid,
                                      SolverConfig{}, 1);
    std::reverse(grid.begin(), grid.end());
    const auto b = lambda_grid_search(toy_cov(), RiskMeasureSpec::volatility(), toy_factors(), budgets, grid,
                                      SolverConfig{}, 4);
    ASSERT_TRUE(a.best && b.best);
    EXPECT_EQ(a.points[*a.best].lambda_asset, b.points[*b.best].lambda_asset);
    EXPECT_EQ(a.points[*a.best].lambda_factor, b.points[*b.best].lambda_factor);
    EXPECT_EQ(a.points[*a.best].scores->combined, b.points[*b.best].scores->combined);
}

TEST(GridSearch, FailedPointsAreRecordedAndSkipped) {
    const auto t = lambda_grid_search(toy_cov(), RiskMeasureSpec::volatility(), toy_factors(),
                                      BudgetSpec::uniform(4, 3), {{0.0, 1.0}, {1.0, 1.0}}, SolverConfig{});
    EXPECT_FALSE(t.points[0].scores.has_value());
    EXPECT_FALSE(t.points[0].error.empty());
    ASSERT_TRUE(t.best.has_value());
    EXPECT_EQ(*t.best, 1u);
}

TEST(PcaEmbed, IdenticalPortfoliosCollapse) {
    const std::vector<Vector> p(4, vec({0.2, 0.3, 0.5}));
    EXPECT_EQ(pca_embed(p), Matrix::Zero(4, 2));
}

TEST(PcaEmbed, DuplicatedClustersGiveTwoPoints) {
    const std::vector<Vector> p = {vec({1, 0, 0}), vec({1, 0, 0}), vec({0, 0, 1}), vec({0, 0, 1})};
    const Matrix c = pca_embed(p);
    EXPECT_LT((c.row(0) - c.row(1)).norm(), 1e-15);
    EXPECT_LT((c.row(2) - c.row(3)).norm(), 1e-15);
    EXPECT_GT((c.row(0) - c.row(2)).norm(), 1.0);
}

TEST(PcaEmbed, PreservesDistancesOfRankTwoData) {
    std::mt19937_64 rng(52);
    const Vector origin = random_simplex(6, rng);
    const Matrix basis = random_matrix(6, 2, rng);
    std::vector<Vector> p;
    for (int i = 0; i < 8; ++i) p.push_back(origin + basis * random_matrix(2, 1, rng).col(0));
    const Matrix c = pca_embed(p);
    for (std::size_t i = 0; i < p.size(); ++i)
        for (std::size_t j = 0; j < p.size(); ++j)
            EXPECT_NEAR((c.row(Index(i)) - c.row(Index(j))).norm(), (p[i] - p[j]).norm(), 1e-10);
}

TEST(PcaEmbed, RowPermutationPermutesCoordinates) {
    std::mt19937_64 rng(53);
    std::vector<Vector> p;
    for (int i = 0; i < 6; ++i) p.push_back(random_simplex(5, rng));
    const Matrix a = pca_embed(p);
    std::vector<Vector> q(p.rbegin(), p.rend());
    const Matrix b = pca_embed(q);
    for (Index i = 0; i < 6; ++i) EXPECT_LT((a.row(i) - b.row(5 - i)).norm(), 1e-12);
}

TEST(ExAnteRisk, ToyTableValues) {
    const FactorModel f = toy_factors();
    const auto budgets = BudgetSpec::uniform(4, 3, 0.2, 0.8);
    const auto rb = solve(ProblemSpec{ProblemKind::RB, budgets, RiskMeasureSpec::volatility()}, toy_cov(), &f);
    const auto frb = solve(ProblemSpec{ProblemKind::FRB, budgets, RiskMeasureSpec::volatility()}, toy_cov(), &f);
    const auto afrb = solve(ProblemSpec{ProblemKind::AFRB, budgets, RiskMeasureSpec::volatility()}, toy_cov(), &f);
    const auto rows = ex_ante_risk_table({{"RB", rb.weights()}, {"FRB", frb.weights()}, {"AFRB", afrb.weights()}},
                                         RiskMeasureSpec::volatility(), toy_cov(), PeriodLength::Annual);
    EXPECT_NEAR(rows[0].annualized, 0.2113, 5e-5);
    EXPECT_NEAR(rows[1].annualized, 0.2216, 5e-5);
    EXPECT_NEAR(rows[2].annualized, 0.2118, 5e-5);
}

TEST(ExAnteRisk, DailyAnnualization) {
    const CovarianceModel cov(Matrix::Constant(1, 1, 1e-4));
    const auto rows = ex_ante_risk_table({{"A", vec({1})}}, RiskMeasureSpec::volatility(), cov, PeriodLength::Daily);
    EXPECT_NEAR(rows[0].risk, 0.01, 1e-15);
    EXPECT_NEAR(rows[0].annualized, 0.1587, 5e-5);
}
