#pragma once

// Asset-exposure risk measures R(y) = rho(-y'X) on scenario sets or
// covariance matrices, their gradients, and the minimum representations
// g(R(y)) = min_zeta E[H(zeta, -y'X)] used by the stochastic solvers.

#include "rbf/core_model.hpp"

#include <algorithm>
#include <numeric>
#include <optional>
#include <string>

namespace rbf {

enum class MeasureKind { Volatility, ExpectedShortfall, MeanAbsDevMedian, Variantile };
enum class GTransform { Identity, Square };

struct RiskMeasureSpec {
    MeasureKind kind = MeasureKind::Volatility;
    /// ES confidence level alpha, or variantile asymmetry tau.
    double level = 0.95;

    static RiskMeasureSpec volatility() { return {MeasureKind::Volatility, 0.0}; }
    static RiskMeasureSpec expected_shortfall(double alpha) {
        require(alpha > 0.0 && alpha < 1.0, ErrorCode::InvalidInput, "alpha must lie in (0, 1)");
        return {MeasureKind::ExpectedShortfall, alpha};
    }
    static RiskMeasureSpec mean_abs_dev_median() { return {MeasureKind::MeanAbsDevMedian, 0.5}; }
    static RiskMeasureSpec variantile(double tau) {
        require(tau > 0.0 && tau < 1.0, ErrorCode::InvalidInput, "tau must lie in (0, 1)");
        return {MeasureKind::Variantile, tau};
    }

    GTransform g() const {
        return kind == MeasureKind::Volatility || kind == MeasureKind::Variantile ? GTransform::Square
                                                                                   : GTransform::Identity;
    }
    double apply_g(double r) const { return g() == GTransform::Square ? r * r : r; }
    double g_derivative(double r) const { return g() == GTransform::Square ? 2.0 * r : 1.0; }

    /// Piecewise-smooth measures whose empirical version has kinks.
    bool is_polyhedral() const {
        return kind == MeasureKind::ExpectedShortfall || kind == MeasureKind::MeanAbsDevMedian;
    }

    std::string name() const {
        switch (kind) {
        case MeasureKind::Volatility: return "volatility";
        case MeasureKind::ExpectedShortfall: return "expected-shortfall";
        case MeasureKind::MeanAbsDevMedian: return "mean-abs-dev-median";
        case MeasureKind::Variantile: return "variantile";
        }
        return "unknown";
    }
};

/// Losses -y'X per scenario with optional probabilities (equiprobable when absent).
struct LossSample {
    Vector losses;
    std::optional<Vector> weights;

    Index size() const { return losses.size(); }
    double prob(Index i) const {
        return weights ? (*weights)(i) : 1.0 / static_cast<double>(losses.size());
    }
};

inline void require_loss_sample(const LossSample& s) {
    require(s.size() >= 1, ErrorCode::InvalidInput, "loss sample is empty");
    if (s.weights) {
        require(s.weights->size() == s.size(), ErrorCode::DimensionMismatch,
                "loss weights length differs from losses");
        require((s.weights->array() >= 0.0).all() && std::abs(s.weights->sum() - 1.0) <= 1e-12,
                ErrorCode::InvalidInput, "loss weights must be nonnegative and sum to 1");
    }
}

// ---------------------------------------------------------------------------
// H and its partial derivatives

inline double h_objective(const RiskMeasureSpec& spec, double zeta, double loss) {
    const double r = loss - zeta;
    switch (spec.kind) {
    case MeasureKind::Volatility: return r * r;
    case MeasureKind::ExpectedShortfall: return zeta + std::max(r, 0.0) / (1.0 - spec.level);
    case MeasureKind::MeanAbsDevMedian: return std::abs(r);
    case MeasureKind::Variantile:
        return r > 0.0 ? spec.level * r * r : (1.0 - spec.level) * r * r;
    }
    return 0.0;
}

struct HPartials {
    double d_zeta = 0.0;
    double d_loss = 0.0;
};

/// One element of the (sub)differential of H; kinks take the left limit in L.
inline HPartials h_partials(const RiskMeasureSpec& spec, double zeta, double loss) {
    const double r = loss - zeta;
    switch (spec.kind) {
    case MeasureKind::Volatility: return {-2.0 * r, 2.0 * r};
    case MeasureKind::ExpectedShortfall: {
        const double tail = r > 0.0 ? 1.0 / (1.0 - spec.level) : 0.0;
        return {1.0 - tail, tail};
    }
    case MeasureKind::MeanAbsDevMedian: {
        const double s = r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        return {-s, s};
    }
    case MeasureKind::Variantile: {
        const double w = r > 0.0 ? spec.level : 1.0 - spec.level;
        return {-2.0 * w * r, 2.0 * w * r};
    }
    }
    return {};
}

namespace detail {

inline std::vector<Index> sorted_order(const Vector& v) {
    std::vector<Index> order(static_cast<std::size_t>(v.size()));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return v(a) < v(b); });
    return order;
}

/// Smallest loss whose cumulative probability reaches `level`.
inline double lower_quantile(const LossSample& s, double level) {
    const auto order = sorted_order(s.losses);
    const Index n = s.size();
    double cum = 0.0;
    for (Index k = 0; k < n; ++k) {
        const Index i = order[static_cast<std::size_t>(k)];
        cum = s.weights ? cum + (*s.weights)(i) : static_cast<double>(k + 1) / static_cast<double>(n);
        if (cum >= level - 1e-12) return s.losses(i);
    }
    return s.losses(order.back());
}

inline double weighted_mean(const LossSample& s) {
    if (!s.weights) return s.losses.mean();
    return s.weights->dot(s.losses);
}

/// Root of tau E[(L - z)_+] = (1 - tau) E[(z - L)_+].
inline double expectile(const LossSample& s, double tau) {
    const auto order = sorted_order(s.losses);
    const Index n = s.size();
    // f(z) = tau * sum p (L - z)_+ - (1 - tau) * sum p (z - L)_+ is decreasing
    // and linear between consecutive sorted losses.
    auto f = [&](double z) {
        double acc = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double r = s.losses(i) - z;
            acc += s.prob(i) * (r > 0.0 ? tau * r : (1.0 - tau) * r);
        }
        return acc;
    };
    double lo = s.losses(order.front());
    double hi = s.losses(order.back());
    if (hi == lo) return lo;
    // Locate the bracketing segment, then solve the linear piece exactly.
    Index a = 0;
    Index b = n - 1;
    while (b - a > 1) {
        const Index mid = (a + b) / 2;
        if (f(s.losses(order[static_cast<std::size_t>(mid)])) > 0.0) a = mid;
        else b = mid;
    }
    lo = s.losses(order[static_cast<std::size_t>(a)]);
    hi = s.losses(order[static_cast<std::size_t>(b)]);
    const double flo = f(lo);
    const double fhi = f(hi);
    if (flo <= 0.0) return lo;
    if (fhi >= 0.0) return hi;
    return lo + (hi - lo) * flo / (flo - fhi);
}

}  // namespace detail

/// Exact minimizer of the empirical H-average: mean (volatility), lower
/// alpha-quantile (ES), lower median (MAD), expectile (variantile).
inline double optimal_zeta(const RiskMeasureSpec& spec, const LossSample& losses) {
    require_loss_sample(losses);
    switch (spec.kind) {
    case MeasureKind::Volatility: return detail::weighted_mean(losses);
    case MeasureKind::ExpectedShortfall: return detail::lower_quantile(losses, spec.level);
    case MeasureKind::MeanAbsDevMedian: return detail::lower_quantile(losses, 0.5);
    case MeasureKind::Variantile: return detail::expectile(losses, spec.level);
    }
    return 0.0;
}

inline double expected_h(const RiskMeasureSpec& spec, double zeta, const LossSample& losses) {
    double acc = 0.0;
    for (Index i = 0; i < losses.size(); ++i) acc += losses.prob(i) * h_objective(spec, zeta, losses.losses(i));
    return acc;
}

/// Risk of a loss sample together with dR/dL_i. The sensitivities satisfy
/// sum_i c_i L_i = R exactly; at ES quantile ties the tied scenarios share
/// the residual tail mass in proportion to their probability.
struct LossRisk {
    double value = 0.0;
    double zeta = 0.0;
    Vector sensitivities;
};

inline LossRisk loss_risk(const RiskMeasureSpec& spec, const LossSample& s) {
    require_loss_sample(s);
    const Index n = s.size();
    LossRisk out;
    out.sensitivities = Vector::Zero(n);
    out.zeta = optimal_zeta(spec, s);
    const double z = out.zeta;
    switch (spec.kind) {
    case MeasureKind::Volatility:
    case MeasureKind::Variantile: {
        const bool vol = spec.kind == MeasureKind::Volatility;
        double var = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double r = s.losses(i) - z;
            const double w = vol ? 1.0 : (r > 0.0 ? spec.level : 1.0 - spec.level);
            var += s.prob(i) * w * r * r;
            out.sensitivities(i) = s.prob(i) * w * r;
        }
        out.value = std::sqrt(std::max(var, 0.0));
        if (out.value > 0.0) out.sensitivities /= out.value;
        break;
    }
    case MeasureKind::ExpectedShortfall: {
        const double inv = 1.0 / (1.0 - spec.level);
        double above = 0.0;
        double tied = 0.0;
        double excess = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double p = s.prob(i);
            if (s.losses(i) > z) {
                above += p;
                excess += p * (s.losses(i) - z);
                out.sensitivities(i) = p * inv;
            } else if (s.losses(i) == z) {
                tied += p;
            }
        }
        out.value = z + excess * inv;
        const double residual_mass = std::max(0.0, 1.0 - above * inv);
        if (tied > 0.0)
            for (Index i = 0; i < n; ++i)
                if (s.losses(i) == z) out.sensitivities(i) = residual_mass * s.prob(i) / tied;
        break;
    }
    case MeasureKind::MeanAbsDevMedian: {
        double below = 0.0;
        double above = 0.0;
        double tied = 0.0;
        for (Index i = 0; i < n; ++i) {
            const double p = s.prob(i);
            const double r = s.losses(i) - z;
            out.value += p * std::abs(r);
            if (r > 0.0) {
                above += p;
                out.sensitivities(i) = p;
            } else if (r < 0.0) {
                below += p;
                out.sensitivities(i) = -p;
            } else {
                tied += p;
            }
        }
        // Tied scenarios balance the signs so that sum_i c_i = 0.
        if (tied > 0.0) {
            const double sign = std::clamp((below - above) / tied, -1.0, 1.0);
            for (Index i = 0; i < n; ++i)
                if (s.losses(i) == z) out.sensitivities(i) = sign * s.prob(i);
        }
        break;
    }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Asset-exposure risk R(y)

inline void require_nonzero(const Vector& y) {
    require(y.size() > 0 && (y.array() != 0.0).any(), ErrorCode::ZeroExposure,
            "risk gradient is undefined at y = 0");
}

inline LossSample portfolio_losses(const ScenarioSet& scenarios, const Vector& y) {
    require(y.size() == scenarios.assets(), ErrorCode::DimensionMismatch,
            "exposure length differs from asset count");
    return LossSample{-(scenarios.returns() * y), std::nullopt};
}

/// Volatility is the only measure available from a covariance matrix.
inline double risk_value(const RiskMeasureSpec& spec, const Vector& y, const CovarianceModel& cov) {
    require(spec.kind == MeasureKind::Volatility, ErrorCode::UnsupportedInput,
            spec.name() + " needs scenarios, not a covariance matrix");
    require(y.size() == cov.assets(), ErrorCode::DimensionMismatch,
            "exposure length differs from asset count");
    require_nonzero(y);
    return std::sqrt(std::max(0.0, y.dot(cov.sigma() * y)));
}

/// Risk under the empirical law of the scenarios. Volatility here is the
/// population (divisor n) standard deviation of the losses.
inline double risk_value(const RiskMeasureSpec& spec, const Vector& y, const ScenarioSet& scenarios) {
    require_nonzero(y);
    return loss_risk(spec, portfolio_losses(scenarios, y)).value;
}

inline Vector risk_gradient(const RiskMeasureSpec& spec, const Vector& y, const CovarianceModel& cov) {
    const double r = risk_value(spec, y, cov);
    require(r > 0.0, ErrorCode::ZeroExposure, "zero portfolio volatility");
    return cov.sigma() * y / r;
}

/// Gradient dR/dy = -X' c with c the loss sensitivities; for ES this is the
/// conditional tail mean -E[X | L >= VaR].
inline Vector risk_gradient(const RiskMeasureSpec& spec, const Vector& y, const ScenarioSet& scenarios) {
    require_nonzero(y);
    const auto lr = loss_risk(spec, portfolio_losses(scenarios, y));
    return -(scenarios.returns().transpose() * lr.sensitivities);
}

/// Euler contributions y_i * dR/dy_i.
template <class Data>
Vector risk_contributions(const RiskMeasureSpec& spec, const Vector& y, const Data& data) {
    return y.cwiseProduct(risk_gradient(spec, y, data));
}

}  // namespace rbf
