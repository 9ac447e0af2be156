#pragma once

#include "rbf/rbf.hpp"

#include <random>

namespace rbf::testing {

inline Matrix toy_beta() {
    Matrix b(4, 3);
    b << 0.9, 0.0, 0.5,
         1.1, 0.5, 0.0,
         1.2, 0.3, 0.2,
         0.8, 0.1, 0.7;
    return b;
}

inline Matrix toy_sigma() {
    Matrix s(4, 4);
    s << 0.0449, 0.0396, 0.0442, 0.0323,
         0.0396, 0.0734, 0.0543, 0.0357,
         0.0442, 0.0543, 0.0689, 0.0401,
         0.0323, 0.0357, 0.0401, 0.0531;
    return s;
}

inline CovarianceModel toy_cov() { return CovarianceModel(toy_sigma(), CovarianceSource::UserSupplied); }
inline FactorModel toy_factors() { return FactorModel(toy_beta()); }

inline Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

/// n draws of N(mean, sigma).
inline Matrix gaussian_draws(const Matrix& sigma, Index n, std::uint64_t seed, double mean = 0.0) {
    const Matrix l = sigma.llt().matrixL();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    Matrix z(n, sigma.rows());
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < sigma.rows(); ++j) z(i, j) = nd(rng);
    Matrix x = z * l.transpose();
    x.array() += mean;
    return x;
}

inline ScenarioSet gaussian_scenarios(const Matrix& sigma, Index n, std::uint64_t seed) {
    return ScenarioSet(gaussian_draws(sigma, n, seed));
}

inline Matrix random_matrix(Index r, Index c, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Matrix m(r, c);
    for (Index i = 0; i < r; ++i)
        for (Index j = 0; j < c; ++j) m(i, j) = nd(rng);
    return m;
}

/// Well-conditioned random covariance of size d.
inline Matrix random_spd(Index d, std::mt19937_64& rng) {
    const Matrix a = random_matrix(d, d, rng);
    Matrix s = a * a.transpose() / static_cast<double>(d);
    s.diagonal().array() += 0.1;
    return s;
}

inline Vector random_simplex(Index d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.2, 1.0);
    Vector b(d);
    for (Index i = 0; i < d; ++i) b(i) = u(rng);
    return b / b.sum();
}

/// Loadings with positive column sums so that long positions reach the
/// positive factor cone.
inline Matrix random_beta(Index d, Index m, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.3, 1.2);
    Matrix b(d, m);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < m; ++j) b(i, j) = u(rng);
    return b;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace rbf::testing
