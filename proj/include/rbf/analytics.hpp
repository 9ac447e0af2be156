#pragma once

// Diversification analytics: Lorenz curves, relative-entropy scores against
// the budgets, grid search over the AFRB importance parameters, PCA
// embedding of portfolio sets and ex-ante risk tables.

#include "rbf/detail/parallel.hpp"
#include "rbf/solvers.hpp"

#include <utility>

namespace rbf {

struct LorenzCurve {
    /// (population fraction, cumulative share), starting at (0, 0).
    std::vector<std::pair<double, double>> points;
};

inline LorenzCurve lorenz(const Vector& values) {
    require(values.size() > 0, ErrorCode::InvalidInput, "Lorenz curve of an empty vector");
    const double total = values.sum();
    require(total != 0.0, ErrorCode::ZeroTotal, "values sum to zero; Lorenz curve undefined");
    std::vector<double> sorted(values.data(), values.data() + values.size());
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    LorenzCurve out;
    out.points.reserve(sorted.size() + 1);
    out.points.emplace_back(0.0, 0.0);
    double cum = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        cum += sorted[k];
        out.points.emplace_back(static_cast<double>(k + 1) / n, cum / total);
    }
    return out;
}

struct EntropyScores {
    double asset_score = 0.0;
    double factor_score = 0.0;
    double combined = 0.0;
    /// Set when a level had a non-positive contribution and the L1 distance
    /// replaced the KL divergence.
    bool asset_l1 = false;
    bool factor_l1 = false;
};

namespace detail {

/// KL(q || b) of the normalized contributions, or the L1 distance when some
/// normalized contribution is not strictly positive.
inline double divergence(const Vector& contributions, const Vector& budgets, bool& used_l1) {
    require(contributions.size() == budgets.size(), ErrorCode::DimensionMismatch,
            "contributions and budgets differ in length");
    const double total = contributions.sum();
    require(total != 0.0, ErrorCode::ZeroTotal, "contributions sum to zero");
    const Vector q = contributions / total;
    used_l1 = (q.array() <= 0.0).any();
    if (used_l1) return (q - budgets).cwiseAbs().sum();
    double kl = 0.0;
    for (Index i = 0; i < q.size(); ++i) kl += q(i) * std::log(q(i) / budgets(i));
    return std::max(kl, 0.0);
}

}  // namespace detail

inline EntropyScores entropy_scores(const SolveResult& result, const BudgetSpec& budgets) {
    EntropyScores s;
    s.asset_score = detail::divergence(result.asset_contributions, budgets.asset_budgets, s.asset_l1);
    s.factor_score = detail::divergence(result.factor_contributions, budgets.factor_budgets, s.factor_l1);
    s.combined = 0.5 * (s.asset_score + s.factor_score);
    return s;
}

struct GridPoint {
    double lambda_asset = 0.0;
    double lambda_factor = 0.0;
    std::optional<EntropyScores> scores;
    std::optional<SolveResult> result;
    /// "Name: message" of the solver error when the point failed.
    std::string error;
};

struct GridTable {
    std::vector<GridPoint> points;
    /// Index into points of the smallest combined score among successful solves.
    std::optional<std::size_t> best;
};

/// n x n logarithmic grid over [lo, hi]^2.
inline std::vector<std::pair<double, double>> log_grid(double lo = 1e-2, double hi = 1e1, int n = 7) {
    require(lo > 0.0 && hi > lo && n >= 2, ErrorCode::InvalidInput, "invalid grid bounds");
    std::vector<double> axis(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        axis[static_cast<std::size_t>(i)] =
            std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / static_cast<double>(n - 1));
    std::vector<std::pair<double, double>> grid;
    for (double la : axis)
        for (double lf : axis) grid.emplace_back(la, lf);
    return grid;
}

/// One AFRB solve per grid point, run concurrently. Failed points keep their
/// error and are excluded from the argmin.
template <class Data>
GridTable lambda_grid_search(const Data& data, const RiskMeasureSpec& measure, const FactorModel& factors,
                             const BudgetSpec& budgets, const std::vector<std::pair<double, double>>& grid,
                             const SolverConfig& cfg, unsigned threads = thread_limit()) {
    require(!grid.empty(), ErrorCode::InvalidInput, "empty lambda grid");
    GridTable table;
    table.points.resize(grid.size());
    detail::parallel_for(grid.size(), threads, [&](std::size_t i) {
        GridPoint& p = table.points[i];
        p.lambda_asset = grid[i].first;
        p.lambda_factor = grid[i].second;
        BudgetSpec b = budgets;
        b.lambda_asset = p.lambda_asset;
        b.lambda_factor = p.lambda_factor;
        try {
            p.result = solve_afrb(data, measure, factors, b, cfg);
            p.scores = entropy_scores(*p.result, b);
        } catch (const Error& e) {
            p.result.reset();
            p.error = std::string(e.name()) + ": " + e.what();
        }
    });
    for (std::size_t i = 0; i < table.points.size(); ++i) {
        const auto& p = table.points[i];
        if (!p.scores) continue;
        if (!table.best) {
            table.best = i;
            continue;
        }
        const auto& q = table.points[*table.best];
        const auto key = std::make_tuple(p.scores->combined, p.lambda_asset, p.lambda_factor);
        const auto best_key = std::make_tuple(q.scores->combined, q.lambda_asset, q.lambda_factor);
        if (key < best_key) table.best = i;
    }
    return table;
}

/// Coordinates of each portfolio on the top two principal directions of the
/// centered weight matrix (rows = portfolios).
inline Matrix pca_embed(const std::vector<Vector>& portfolios) {
    require(portfolios.size() >= 3, ErrorCode::InvalidInput, "PCA embedding needs at least 3 portfolios");
    const Index n = static_cast<Index>(portfolios.size());
    const Index d = portfolios.front().size();
    Matrix w(n, d);
    for (Index i = 0; i < n; ++i) {
        require(portfolios[static_cast<std::size_t>(i)].size() == d, ErrorCode::DimensionMismatch,
                "portfolios differ in length");
        w.row(i) = portfolios[static_cast<std::size_t>(i)].transpose();
    }
    const Matrix centered = w.rowwise() - w.colwise().mean();
    Matrix coords = Matrix::Zero(n, 2);
    if (centered.cwiseAbs().maxCoeff() == 0.0) return coords;
    Eigen::JacobiSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    const Index k = std::min<Index>(2, svd.matrixV().cols());
    for (Index c = 0; c < k; ++c) {
        if (svd.singularValues()(c) <= 1e-14 * svd.singularValues()(0)) break;
        Vector dir = svd.matrixV().col(c);
        Index pivot = 0;
        dir.cwiseAbs().maxCoeff(&pivot);
        if (dir(pivot) < 0.0) dir = -dir;
        coords.col(c) = centered * dir;
    }
    return coords;
}

struct RiskRow {
    std::string label;
    double risk = 0.0;
    double annualized = 0.0;
};

template <class Data>
std::vector<RiskRow> ex_ante_risk_table(const std::vector<std::pair<std::string, Vector>>& portfolios,
                                        const RiskMeasureSpec& spec, const Data& data, PeriodLength period) {
    const double factor = std::sqrt(periods_per_year(period));
    std::vector<RiskRow> rows;
    rows.reserve(portfolios.size());
    for (const auto& [label, weights] : portfolios) {
        const double r = risk_value(spec, weights, data);
        rows.push_back({label, r, r * factor});
    }
    return rows;
}

inline std::vector<RiskRow> ex_ante_risk_table(const std::vector<std::pair<std::string, Vector>>& portfolios,
                                               const RiskMeasureSpec& spec, const ScenarioSet& scenarios) {
    return ex_ante_risk_table(portfolios, spec, scenarios, scenarios.period());
}

}  // namespace rbf
