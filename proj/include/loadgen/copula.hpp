#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace loadgen::copula {

// Gaussian copula with empirical marginals.
struct CopulaModel {
    std::vector<Eigen::VectorXd> marginals; // sorted training values per dimension
    Eigen::MatrixXd correlation;            // normal-scores correlation (after PD repair)
    Eigen::MatrixXd factor;                 // lower Cholesky factor of `correlation`

    Eigen::Index dims() const { return static_cast<Eigen::Index>(marginals.size()); }
};

inline constexpr double kEigenvalueFloor = 1e-10;

/// Rank-transforms each column to normal scores r/(n+1), estimates their
/// correlation, clips eigenvalues at kEigenvalueFloor and factorizes.
/// Throws InputError for n < d + 1 or a constant column.
CopulaModel fit_gaussian_copula(const Eigen::MatrixXd& data);

/// Correlated normals -> uniforms -> linear interpolation of the empirical
/// quantile function, where u = k/(n+1) maps exactly to the k-th smallest value.
Eigen::MatrixXd sample_copula(const CopulaModel& model, Eigen::Index count, std::uint64_t seed);

double empirical_quantile(const Eigen::VectorXd& sorted, double u);

} // namespace loadgen::copula
