#pragma once

// Domain types shared by every module and the input validation pass.

#include "rbf/detail/linalg.hpp"
#include "rbf/error.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rbf {

inline constexpr double kRankTolerance = 1e-10;
inline constexpr double kDefiniteTolerance = 1e-12;
inline constexpr double kSymmetryTolerance = 1e-12;
inline constexpr double kBudgetSumTolerance = 1e-12;

enum class PeriodLength { Daily, Weekly, Monthly, Annual };

inline double periods_per_year(PeriodLength p) {
    switch (p) {
    case PeriodLength::Daily: return 252.0;
    case PeriodLength::Weekly: return 52.0;
    case PeriodLength::Monthly: return 12.0;
    case PeriodLength::Annual: return 1.0;
    }
    return 1.0;
}

inline std::vector<std::string> default_labels(const std::string& prefix, Index count) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i + 1));
    return out;
}

/// Joint asset-return observations (rows = scenarios, columns = assets),
/// treated as an equiprobable empirical law.
class ScenarioSet {
public:
    ScenarioSet() = default;

    explicit ScenarioSet(Matrix returns,
                         PeriodLength period = PeriodLength::Daily,
                         std::vector<std::string> asset_labels = {},
                         std::vector<std::string> dates = {})
        : returns_(std::move(returns)),
          period_(period),
          labels_(std::move(asset_labels)),
          dates_(std::move(dates)) {
        require(returns_.rows() >= 2, ErrorCode::InvalidInput, "ScenarioSet needs at least 2 rows");
        require(returns_.cols() >= 1, ErrorCode::InvalidInput, "ScenarioSet needs at least 1 asset");
        if (labels_.empty()) labels_ = default_labels("A", returns_.cols());
        require(static_cast<Index>(labels_.size()) == returns_.cols(), ErrorCode::DimensionMismatch,
                "asset label count does not match return columns");
        require(dates_.empty() || static_cast<Index>(dates_.size()) == returns_.rows(),
                ErrorCode::DimensionMismatch, "date count does not match return rows");
        for (Index r = 0; r < returns_.rows(); ++r)
            for (Index c = 0; c < returns_.cols(); ++c)
                if (!std::isfinite(returns_(r, c)))
                    fail(ErrorCode::NonFiniteValue, "non-finite return at row " + std::to_string(r) +
                                                        ", column " + std::to_string(c));
    }

    const Matrix& returns() const noexcept { return returns_; }
    Index rows() const noexcept { return returns_.rows(); }
    Index assets() const noexcept { return returns_.cols(); }
    PeriodLength period() const noexcept { return period_; }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::vector<std::string>& dates() const noexcept { return dates_; }
    bool has_dates() const noexcept { return !dates_.empty(); }

    /// Rows [first, first + count) as a new set.
    ScenarioSet slice(Index first, Index count) const {
        std::vector<std::string> d;
        if (has_dates()) d.assign(dates_.begin() + first, dates_.begin() + first + count);
        return ScenarioSet(returns_.middleRows(first, count), period_, labels_, std::move(d));
    }

private:
    Matrix returns_;
    PeriodLength period_ = PeriodLength::Daily;
    std::vector<std::string> labels_;
    std::vector<std::string> dates_;
};

enum class CovarianceSource { Sample, Structured, UserSupplied };

/// Symmetric positive-definite covariance of asset returns.
class CovarianceModel {
public:
    CovarianceModel() = default;

    explicit CovarianceModel(Matrix sigma, CovarianceSource source = CovarianceSource::UserSupplied)
        : sigma_(std::move(sigma)), source_(source) {
        require(sigma_.rows() == sigma_.cols() && sigma_.rows() >= 1, ErrorCode::DimensionMismatch,
                "covariance must be square and non-empty");
        require(sigma_.allFinite(), ErrorCode::NonFiniteValue, "covariance has non-finite entries");
        require(detail::relative_asymmetry(sigma_) <= kSymmetryTolerance, ErrorCode::InvalidInput,
                "covariance is not symmetric");
        sigma_ = 0.5 * (sigma_ + sigma_.transpose()).eval();
        require(detail::is_positive_definite(sigma_, kDefiniteTolerance),
                ErrorCode::NotPositiveDefinite, "covariance is not positive definite");
    }

    const Matrix& sigma() const noexcept { return sigma_; }
    Index assets() const noexcept { return sigma_.rows(); }
    CovarianceSource source() const noexcept { return source_; }

private:
    Matrix sigma_;
    CovarianceSource source_ = CovarianceSource::UserSupplied;
};

/// Factor loadings (d x m). Shape is checked on construction; rank and m < d
/// are checked by validate() so that degenerate inputs can still be reported.
class FactorModel {
public:
    FactorModel() = default;

    explicit FactorModel(Matrix beta, std::vector<std::string> factor_labels = {},
                         std::optional<Matrix> pvalues = std::nullopt)
        : beta_(std::move(beta)), labels_(std::move(factor_labels)), pvalues_(std::move(pvalues)) {
        require(beta_.rows() >= 1 && beta_.cols() >= 1, ErrorCode::DimensionMismatch,
                "factor loadings must be non-empty");
        require(beta_.allFinite(), ErrorCode::NonFiniteValue, "factor loadings have non-finite entries");
        if (labels_.empty()) labels_ = default_labels("F", beta_.cols());
        require(static_cast<Index>(labels_.size()) == beta_.cols(), ErrorCode::DimensionMismatch,
                "factor label count does not match loading columns");
        if (pvalues_)
            require(pvalues_->rows() == beta_.rows() && pvalues_->cols() == beta_.cols(),
                    ErrorCode::DimensionMismatch, "p-value matrix shape differs from loadings");
    }

    const Matrix& beta() const noexcept { return beta_; }
    Index assets() const noexcept { return beta_.rows(); }
    Index factors() const noexcept { return beta_.cols(); }
    const std::vector<std::string>& labels() const noexcept { return labels_; }
    const std::optional<Matrix>& pvalues() const noexcept { return pvalues_; }

    bool has_full_rank() const {
        return factors() < assets() && detail::numerical_rank(beta_, kRankTolerance) == factors();
    }

    void require_valid() const {
        require(factors() < assets(), ErrorCode::InvalidInput, "factor model needs m < d");
        require(detail::numerical_rank(beta_, kRankTolerance) == factors(), ErrorCode::RankLost,
                "factor loadings are rank deficient");
    }

private:
    Matrix beta_;
    std::vector<std::string> labels_;
    std::optional<Matrix> pvalues_;
};

/// Strictly positive entries summing to one.
inline bool is_budget_vector(const Vector& b) {
    if (b.size() == 0) return false;
    if ((b.array() <= 0.0).any() || !b.allFinite()) return false;
    return std::abs(b.sum() - 1.0) <= kBudgetSumTolerance;
}

struct BudgetSpec {
    Vector asset_budgets;
    Vector factor_budgets;
    double lambda_asset = 1.0;
    double lambda_factor = 1.0;

    static BudgetSpec uniform(Index assets, Index factors, double lambda_asset = 1.0,
                              double lambda_factor = 1.0) {
        BudgetSpec b;
        b.asset_budgets = Vector::Constant(assets, 1.0 / static_cast<double>(assets));
        if (factors > 0) b.factor_budgets = Vector::Constant(factors, 1.0 / static_cast<double>(factors));
        b.lambda_asset = lambda_asset;
        b.lambda_factor = lambda_factor;
        return b;
    }
};

struct Portfolio {
    Vector weights;
    Vector exposures;
    double normalization = 0.0;

    static Portfolio from_exposures(const Vector& y) {
        Portfolio p;
        p.exposures = y;
        p.normalization = y.sum();
        p.weights = p.normalization != 0.0 ? Vector(y / p.normalization) : y;
        return p;
    }
};

struct SolveResult {
    Portfolio portfolio;
    double zeta = 0.0;
    double total_risk = 0.0;
    Vector asset_contributions;
    Vector factor_exposures;
    Vector factor_contributions;
    double factor_risk = 0.0;
    int iterations = 0;
    bool converged = false;
    double residual = 0.0;
    std::vector<double> objective_trace;

    const Vector& weights() const noexcept { return portfolio.weights; }
};

struct ValidationCheck {
    std::string name;
    bool passed = true;
    std::string detail;
    std::vector<Index> offending;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;

    bool ok() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }

    const ValidationCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

namespace detail {

// Indices carrying weight in the eigenvector of the smallest eigenvalue: the
// columns involved in a (near) linear dependency.
inline std::vector<Index> dependent_columns(const Matrix& gram) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram);
    const Vector v = es.eigenvectors().col(0);
    const double peak = v.cwiseAbs().maxCoeff();
    std::vector<Index> out;
    for (Index i = 0; i < v.size(); ++i)
        if (std::abs(v(i)) > 1e-6 * peak) out.push_back(i);
    return out;
}

}  // namespace detail

inline ValidationCheck check_scenarios(const ScenarioSet& s) {
    const Index n = s.rows();
    const Index d = s.assets();
    Matrix design(n, d + 1);
    design.col(0).setOnes();
    design.rightCols(d) = s.returns();
    ValidationCheck check{"scenario-linear-independence", true, "", {}};
    for (Index j = 0; j < d; ++j) {
        const auto col = s.returns().col(j);
        if ((col.array() == col(0)).all()) check.offending.push_back(j);
    }
    // Unit-norm columns so the test does not depend on return scale.
    for (Index j = 0; j <= d; ++j) {
        const double nrm = design.col(j).norm();
        if (nrm > 0.0) design.col(j) /= nrm;
    }
    const Matrix gram = design.transpose() * design;
    const auto range = detail::symmetric_eigen_range(gram);
    if (!check.offending.empty() || !(range.smallest > kRankTolerance * range.largest)) {
        check.passed = false;
        if (check.offending.empty()) {
            for (Index i : detail::dependent_columns(gram))
                if (i > 0) check.offending.push_back(i - 1);
            check.detail = "Gram matrix of [1, X] is rank deficient";
        } else {
            check.detail = "constant asset columns";
        }
    }
    return check;
}

/// Report-only validation of the scenario and factor-model assumptions.
inline ValidationReport validate_model(const ScenarioSet& scenarios, const FactorModel& factors) {
    ValidationReport report;
    report.checks.push_back(check_scenarios(scenarios));

    ValidationCheck dims{"factor-dimension", factors.assets() == scenarios.assets(), "", {}};
    if (!dims.passed) dims.detail = "loadings have " + std::to_string(factors.assets()) +
                                    " rows for " + std::to_string(scenarios.assets()) + " assets";
    report.checks.push_back(dims);

    ValidationCheck fewer{"factor-count", factors.factors() < factors.assets(), "", {}};
    if (!fewer.passed) fewer.detail = "need m < d";
    report.checks.push_back(fewer);

    ValidationCheck rank{"factor-rank", true, "", {}};
    if (detail::numerical_rank(factors.beta(), kRankTolerance) != factors.factors()) {
        rank.passed = false;
        rank.detail = "loadings are rank deficient";
        const Matrix gram = factors.beta().transpose() * factors.beta();
        rank.offending = detail::dependent_columns(gram);
    }
    report.checks.push_back(rank);
    return report;
}

inline ValidationReport validate_model(const FactorModel& factors) {
    ValidationReport report;
    report.checks.push_back({"factor-count", factors.factors() < factors.assets(),
                             factors.factors() < factors.assets() ? "" : "need m < d", {}});
    ValidationCheck rank{"factor-rank", true, "", {}};
    if (detail::numerical_rank(factors.beta(), kRankTolerance) != factors.factors()) {
        rank.passed = false;
        rank.detail = "loadings are rank deficient";
        rank.offending = detail::dependent_columns(factors.beta().transpose() * factors.beta());
    }
    report.checks.push_back(rank);
    return report;
}

inline void require_budgets(const BudgetSpec& b, Index assets, Index factors, bool need_assets,
                            bool need_factors) {
    if (need_assets) {
        require(b.asset_budgets.size() == assets, ErrorCode::DimensionMismatch,
                "asset budget length does not match asset count");
        require(is_budget_vector(b.asset_budgets), ErrorCode::ValidationError,
                "budget-sum: asset budgets must be positive and sum to 1");
        require(b.lambda_asset > 0.0, ErrorCode::ValidationError, "lambda_asset must be positive");
    }
    if (need_factors) {
        require(b.factor_budgets.size() == factors, ErrorCode::DimensionMismatch,
                "factor budget length does not match factor count");
        require(is_budget_vector(b.factor_budgets), ErrorCode::ValidationError,
                "budget-sum: factor budgets must be positive and sum to 1");
        require(b.lambda_factor > 0.0, ErrorCode::ValidationError, "lambda_factor must be positive");
    }
}

/// Unbiased (n - 1) sample covariance.
inline CovarianceModel sample_covariance(const ScenarioSet& scenarios) {
    const Matrix& x = scenarios.returns();
    const Matrix centered = x.rowwise() - x.colwise().mean();
    Matrix sigma = (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    return CovarianceModel(std::move(sigma), CovarianceSource::Sample);
}

/// beta * sigma_f * beta' + diag(sigma_idio)
inline CovarianceModel structured_covariance(const FactorModel& factors, const Matrix& sigma_f,
                                             const Vector& sigma_idio) {
    const Index m = factors.factors();
    require(sigma_f.rows() == m && sigma_f.cols() == m, ErrorCode::DimensionMismatch,
            "factor covariance must be m x m");
    require(sigma_idio.size() == factors.assets(), ErrorCode::DimensionMismatch,
            "idiosyncratic variances must have one entry per asset");
    require(sigma_idio.allFinite() && (sigma_idio.array() > 0.0).all(), ErrorCode::InvalidInput,
            "idiosyncratic variances must be strictly positive");
    require(detail::relative_asymmetry(sigma_f) <= kSymmetryTolerance, ErrorCode::InvalidInput,
            "factor covariance is not symmetric");
    const auto range = detail::symmetric_eigen_range(sigma_f);
    require(range.smallest >= -kDefiniteTolerance * std::max(range.largest, 0.0),
            ErrorCode::InvalidInput, "factor covariance is not positive semidefinite");
    const Matrix& beta = factors.beta();
    Matrix sigma = beta * sigma_f * beta.transpose();
    sigma.diagonal() += sigma_idio;
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    return CovarianceModel(std::move(sigma), CovarianceSource::Structured);
}

}  // namespace rbf
