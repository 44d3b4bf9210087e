#pragma once

#include "loadgen/random.hpp"

#include <Eigen/Core>
#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

// Synthetic hour-conditioned load populations for tests.
namespace loadgen::testkit {

struct HourlySample {
    Eigen::MatrixXd values; // MW, one row per sample
    std::vector<int> hours;
};

// Two-component Gaussian mixture in 5 areas whose component means follow a
// daily profile; within a component every pair of areas has correlation rho.
inline HourlySample hourly_mixture(Eigen::Index n, std::uint64_t seed, double rho = 0.6)
{
    constexpr int d = 5;
    const double base[d] = {1000, 800, 600, 1200, 400};
    const double swing[d] = {200, 120, 90, 260, 50};
    const double spread[d] = {60, 50, 40, 80, 30};
    const double shift[2] = {-1.0, 1.5};

    Rng rng(seed);
    std::normal_distribution<double> normal;
    std::bernoulli_distribution second(0.4);
    HourlySample s;
    s.values.resize(n, d);
    s.hours.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const int h = static_cast<int>(i % 24);
        s.hours[static_cast<std::size_t>(i)] = h;
        const double profile = std::sin(2.0 * std::numbers::pi * (h - 6) / 24.0);
        const int k = second(rng) ? 1 : 0;
        const double common = normal(rng);
        for (int j = 0; j < d; ++j) {
            const double noise = std::sqrt(rho) * common + std::sqrt(1.0 - rho) * normal(rng);
            s.values(i, j) = base[j] + swing[j] * profile + spread[j] * (shift[k] + noise);
        }
    }
    return s;
}

// n draws from an 8-dimensional Gaussian with correlation 0.5 between
// neighbours and 0.25 beyond.
inline Eigen::MatrixXd correlated_gaussian(Eigen::Index n, std::uint64_t seed)
{
    constexpr int d = 8;
    Eigen::MatrixXd corr(d, d);
    for (int a = 0; a < d; ++a) {
        for (int b = 0; b < d; ++b) {
            corr(a, b) = a == b ? 1.0 : (std::abs(a - b) == 1 ? 0.5 : 0.25);
        }
    }
    const Eigen::MatrixXd L = corr.llt().matrixL();
    Rng rng(seed);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd z(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < d; ++j) {
            z(i, j) = normal(rng);
        }
    }
    return z * L.transpose();
}

inline Eigen::MatrixXd correlation(const Eigen::MatrixXd& x)
{
    const Eigen::MatrixXd c = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(x.rows() - 1);
    const Eigen::VectorXd s = cov.diagonal().cwiseSqrt();
    return cov.array() / (s * s.transpose()).array();
}

inline double mean_pairwise_correlation(const Eigen::MatrixXd& x)
{
    const Eigen::MatrixXd r = correlation(x);
    const auto d = r.rows();
    return (r.sum() - static_cast<double>(d)) / static_cast<double>(d * (d - 1));
}

} // namespace loadgen::testkit
