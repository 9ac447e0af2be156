#include "fixtures.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace rbf;
using namespace rbf::testing;

namespace {

LossSample losses_of(std::vector<double> v) {
    Vector l(static_cast<Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) l(static_cast<Index>(i)) = v[i];
    return {l, std::nullopt};
}

/// Tail mean by sorting: average of the ceil((1 - alpha) n) largest losses,
/// with the boundary scenario weighted fractionally.
double brute_force_es(const Vector& losses, double alpha) {
    std::vector<double> v(losses.data(), losses.data() + losses.size());
    std::sort(v.begin(), v.end(), std::greater<>());
    const double n = static_cast<double>(v.size());
    double mass = (1.0 - alpha) * n;
    double sum = 0.0;
    for (double x : v) {
        const double take = std::min(1.0, mass);
        sum += take * x;
        mass -= take;
        if (mass <= 1e-12) break;
    }
    return sum / ((1.0 - alpha) * n);
}

double golden_section(const std::function<double(double)>& f, double lo, double hi) {
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    for (int i = 0; i < 200; ++i) {
        const double c = b - r * (b - a);
        const double d = a + r * (b - a);
        if (f(c) <= f(d)) b = d;
        else a = c;
    }
    return 0.5 * (a + b);
}

}  // namespace

TEST(RiskValue, ToyRbPortfolioVolatility) {
    const Vector theta = vec({0.2786, 0.2260, 0.2198, 0.2756});
    EXPECT_NEAR(risk_value(RiskMeasureSpec::volatility(), theta, toy_cov()), 0.2113, 5e-5);
}

TEST(RiskValue, UnitVectorUnderIdentity) {
    const CovarianceModel cov(Matrix::Identity(3, 3));
    EXPECT_DOUBLE_EQ(risk_value(RiskMeasureSpec::volatility(), vec({1, 0, 0}), cov), 1.0);
}

TEST(RiskValue, ExpectedShortfallOfOneToHundred) {
    Matrix x(100, 1);
    for (Index i = 0; i < 100; ++i) x(i, 0) = -static_cast<double>(i + 1);
    const ScenarioSet s(x);
    EXPECT_NEAR(risk_value(RiskMeasureSpec::expected_shortfall(0.95), vec({1}), s), 98.0, 1e-12);
}

TEST(RiskValue, ZeroExposureAndUnsupportedData) {
    EXPECT_THROW(risk_value(RiskMeasureSpec::volatility(), Vector::Zero(4), toy_cov()), Error);
    try {
        risk_value(RiskMeasureSpec::expected_shortfall(0.95), vec({1, 0, 0, 0}), toy_cov());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnsupportedInput);
    }
}

TEST(RiskGradient, EuclideanNorm) {
    const CovarianceModel cov(Matrix::Identity(2, 2));
    const Vector g = risk_gradient(RiskMeasureSpec::volatility(), vec({3, 4}), cov);
    EXPECT_NEAR(g(0), 0.6, 1e-15);
    EXPECT_NEAR(g(1), 0.8, 1e-15);
}

TEST(RiskGradient, ToyRbContributionsAreEqual) {
    const Vector theta = vec({0.2786, 0.2260, 0.2198, 0.2756});
    const Vector rc = risk_contributions(RiskMeasureSpec::volatility(), theta, toy_cov());
    for (Index i = 0; i < 4; ++i) EXPECT_NEAR(rc(i), 0.0528, 5e-5);
}

TEST(RiskGradient, ExpectedShortfallMatchesFiniteDifferences) {
    const ScenarioSet s = gaussian_scenarios(toy_sigma(), 10000, 3);
    const auto es = RiskMeasureSpec::expected_shortfall(0.95);
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 5; ++trial) {
        const Vector y = random_simplex(4, rng);
        const Vector g = risk_gradient(es, y, s);
        const double h = 1e-5 * y.norm();
        for (Index i = 0; i < 4; ++i) {
            Vector up = y, dn = y;
            up(i) += h;
            dn(i) -= h;
            const double fd = (risk_value(es, up, s) - risk_value(es, dn, s)) / (2.0 * h);
            EXPECT_LT(std::abs(fd - g(i)), 1e-3 * std::max(std::abs(fd), g.norm())) << trial << "," << i;
        }
    }
}

TEST(RiskGradient, VolatilityMatchesFiniteDifferences) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const CovarianceModel cov(random_spd(5, rng));
        const Vector y = random_matrix(5, 1, rng).col(0);
        const Vector g = risk_gradient(RiskMeasureSpec::volatility(), y, cov);
        const double h = 1e-6 * std::max(1.0, y.norm());
        for (Index i = 0; i < 5; ++i) {
            Vector up = y, dn = y;
            up(i) += h;
            dn(i) -= h;
            const double fd = (risk_value(RiskMeasureSpec::volatility(), up, cov) -
                               risk_value(RiskMeasureSpec::volatility(), dn, cov)) / (2.0 * h);
            EXPECT_LT(std::abs(fd - g(i)), 1e-4 * std::max(std::abs(g(i)), 1e-3));
        }
    }
}

TEST(RiskProperties, HomogeneitySubadditivityAndEuler) {
    const ScenarioSet s = gaussian_scenarios(toy_sigma(), 2000, 21);
    const CovarianceModel cov = toy_cov();
    std::mt19937_64 rng(8);
    const std::vector<RiskMeasureSpec> specs = {RiskMeasureSpec::volatility(), RiskMeasureSpec::expected_shortfall(0.95),
                                                RiskMeasureSpec::mean_abs_dev_median(), RiskMeasureSpec::variantile(0.7)};
    for (int trial = 0; trial < 100; ++trial) {
        const Vector y1 = random_matrix(4, 1, rng).col(0);
        const Vector y2 = random_matrix(4, 1, rng).col(0);
        for (const auto& spec : specs) {
            const double r = risk_value(spec, y1, s);
            for (double lambda : {0.5, 2.0, 10.0})
                EXPECT_LT(rel_err(risk_value(spec, lambda * y1, s), lambda * r), 1e-10);
            EXPECT_LE(risk_value(spec, y1 + y2, s), r + risk_value(spec, y2, s) + 1e-10);
            EXPECT_LT(rel_err(y1.dot(risk_gradient(spec, y1, s)), r), 1e-8) << spec.name();
        }
        const double rv = risk_value(RiskMeasureSpec::volatility(), y1, cov);
        EXPECT_LT(rel_err(y1.dot(risk_gradient(RiskMeasureSpec::volatility(), y1, cov)), rv), 1e-12);
    }
}

TEST(HObjective, ExpectedShortfallValues) {
    const auto es = RiskMeasureSpec::expected_shortfall(0.95);
    EXPECT_NEAR(h_objective(es, 0.0, 1.0), 20.0, 1e-12);
    EXPECT_NEAR(h_objective(es, 2.0, 1.0), 2.0, 1e-15);
}

TEST(HObjective, VolatilityRepresentation) {
    const auto vol = RiskMeasureSpec::volatility();
    const auto l = losses_of({-1.0, 1.0});
    EXPECT_DOUBLE_EQ(optimal_zeta(vol, l), 0.0);
    EXPECT_DOUBLE_EQ(expected_h(vol, 0.0, l), 1.0);
    EXPECT_DOUBLE_EQ(vol.apply_g(loss_risk(vol, l).value), 1.0);
}

TEST(OptimalZeta, ConventionalValues) {
    EXPECT_DOUBLE_EQ(optimal_zeta(RiskMeasureSpec::volatility(), losses_of({1, 2, 3})), 2.0);
    std::vector<double> hundred;
    for (int i = 1; i <= 100; ++i) hundred.push_back(i);
    EXPECT_DOUBLE_EQ(optimal_zeta(RiskMeasureSpec::expected_shortfall(0.95), losses_of(hundred)), 95.0);
    EXPECT_DOUBLE_EQ(optimal_zeta(RiskMeasureSpec::expected_shortfall(0.5), losses_of({0, 10})), 0.0);
}

TEST(OptimalZeta, AgreesWithGoldenSectionOracle) {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> nd;
    const std::vector<RiskMeasureSpec> specs = {RiskMeasureSpec::volatility(), RiskMeasureSpec::expected_shortfall(0.9),
                                                RiskMeasureSpec::mean_abs_dev_median(), RiskMeasureSpec::variantile(0.8)};
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(257);
        for (double& x : v) x = nd(rng);
        const auto l = losses_of(v);
        for (const auto& spec : specs) {
            const double z = optimal_zeta(spec, l);
            const double oracle = golden_section([&](double t) { return expected_h(spec, t, l); }, -10.0, 10.0);
            // The objective value at the convention's zeta is minimal.
            EXPECT_LE(expected_h(spec, z, l), expected_h(spec, oracle, l) + 1e-12) << spec.name();
        }
    }
}

TEST(Representation, GOfRiskEqualsMinimumExpectedH) {
    const ScenarioSet s = gaussian_scenarios(toy_sigma(), 5000, 13);
    std::mt19937_64 rng(2);
    const std::vector<RiskMeasureSpec> specs = {RiskMeasureSpec::volatility(), RiskMeasureSpec::expected_shortfall(0.95),
                                                RiskMeasureSpec::mean_abs_dev_median(), RiskMeasureSpec::variantile(0.3)};
    for (int trial = 0; trial < 10; ++trial) {
        const Vector y = random_matrix(4, 1, rng).col(0);
        const auto l = portfolio_losses(s, y);
        for (const auto& spec : specs) {
            const double lhs = spec.apply_g(risk_value(spec, y, s));
            const double rhs = expected_h(spec, optimal_zeta(spec, l), l);
            const double tol = spec.kind == MeasureKind::ExpectedShortfall ? 1e-10 : 1e-8;
            EXPECT_LT(std::abs(lhs - rhs), tol * std::max(1.0, std::abs(lhs))) << spec.name();
        }
    }
}

TEST(ExpectedShortfall, MatchesBruteForceSorting) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> nd;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 10 + trial * 7;
        Vector l(n);
        for (int i = 0; i < n; ++i) l(i) = nd(rng);
        for (double alpha : {0.5, 0.9, 0.95, 0.975}) {
            const auto r = loss_risk(RiskMeasureSpec::expected_shortfall(alpha), LossSample{l, std::nullopt});
            EXPECT_NEAR(r.value, brute_force_es(l, alpha), 1e-12 * std::max(1.0, std::abs(r.value)));
            EXPECT_NEAR(r.sensitivities.dot(l), r.value, 1e-12);
        }
    }
}

TEST(ExpectedShortfall, TiedLossesShareTailMass) {
    // Five equal largest losses straddle the 0.9 quantile of ten scenarios.
    const auto l = losses_of({1, 1, 1, 1, 1, 5, 5, 5, 5, 5});
    const auto r = loss_risk(RiskMeasureSpec::expected_shortfall(0.9), l);
    EXPECT_DOUBLE_EQ(r.value, 5.0);
    for (Index i = 5; i < 10; ++i) EXPECT_NEAR(r.sensitivities(i), 0.2, 1e-15);
    EXPECT_NEAR(r.sensitivities.sum(), 1.0, 1e-15);
}

TEST(LossSample, WeightedSampleValidated) {
    LossSample s{vec({1, 2}), vec({0.5, 0.6})};
    EXPECT_THROW(require_loss_sample(s), Error);
    s.weights = vec({0.25, 0.75});
    EXPECT_NEAR(loss_risk(RiskMeasureSpec::volatility(), s).value, std::sqrt(0.25 * 0.75), 1e-15);
}
