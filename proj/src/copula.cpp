#include "loadgen/copula.hpp"

#include "loadgen/distributions.hpp"
#include "loadgen/error.hpp"
#include "loadgen/random.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <numeric>

namespace loadgen::copula {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Mid-ranks (1-based, ties averaged).
VectorXd ranks(const VectorXd& column)
{
    const Index n = column.size();
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return column[a] < column[b]; });
    VectorXd r(n);
    for (Index i = 0; i < n;) {
        Index j = i;
        while (j + 1 < n && column[order[static_cast<std::size_t>(j + 1)]] == column[order[static_cast<std::size_t>(i)]]) {
            ++j;
        }
        const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
        for (Index k = i; k <= j; ++k) {
            r[order[static_cast<std::size_t>(k)]] = mid;
        }
        i = j + 1;
    }
    return r;
}

} // namespace

CopulaModel fit_gaussian_copula(const MatrixXd& data)
{
    const Index n = data.rows();
    const Index d = data.cols();
    if (d < 1 || n < d + 1) {
        throw InputError("copula fit needs at least d + 1 rows");
    }
    if (!data.allFinite()) {
        throw InputError("copula fit: non-finite data");
    }

    CopulaModel model;
    MatrixXd scores(n, d);
    for (Index j = 0; j < d; ++j) {
        VectorXd sorted = data.col(j);
        std::sort(sorted.begin(), sorted.end());
        if (sorted[0] == sorted[n - 1]) {
            throw InputError("copula fit: dimension " + std::to_string(j) + " is constant");
        }
        model.marginals.push_back(std::move(sorted));
        const VectorXd r = ranks(data.col(j));
        for (Index i = 0; i < n; ++i) {
            scores(i, j) = normal_quantile(r[i] / static_cast<double>(n + 1));
        }
    }

    const MatrixXd centered = scores.rowwise() - scores.colwise().mean();
    MatrixXd cov = centered.transpose() * centered;
    const VectorXd sd = cov.diagonal().cwiseSqrt();
    MatrixXd corr = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
    corr = 0.5 * (corr + corr.transpose());

    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(corr);
    if (eig.eigenvalues().minCoeff() < kEigenvalueFloor) {
        const VectorXd clipped = eig.eigenvalues().cwiseMax(kEigenvalueFloor);
        corr = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
        const VectorXd diag = corr.diagonal().cwiseSqrt().cwiseInverse();
        corr = diag.asDiagonal() * corr * diag.asDiagonal();
        corr = 0.5 * (corr + corr.transpose());
    }
    corr.diagonal().setOnes();

    Eigen::LLT<MatrixXd> llt(corr);
    if (llt.info() != Eigen::Success) {
        throw NumericError("copula fit: correlation matrix is not positive definite after repair");
    }
    model.correlation = corr;
    model.factor = llt.matrixL();
    return model;
}

double empirical_quantile(const VectorXd& sorted, double u)
{
    const Index n = sorted.size();
    const double pos = std::clamp(u * static_cast<double>(n + 1) - 1.0, 0.0, static_cast<double>(n - 1));
    const auto lo = static_cast<Index>(std::floor(pos));
    const Index hi = std::min(lo + 1, n - 1);
    const double w = pos - static_cast<double>(lo);
    return w == 0.0 ? sorted[lo] : (1.0 - w) * sorted[lo] + w * sorted[hi];
}

MatrixXd sample_copula(const CopulaModel& model, Index count, std::uint64_t seed)
{
    const Index d = model.dims();
    MatrixXd out(count, d);
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd g(d);
    for (Index i = 0; i < count; ++i) {
        for (Index j = 0; j < d; ++j) {
            g[j] = normal(rng);
        }
        const VectorXd z = model.factor * g;
        for (Index j = 0; j < d; ++j) {
            out(i, j) = empirical_quantile(model.marginals[static_cast<std::size_t>(j)], normal_cdf(z[j]));
        }
    }
    return out;
}

} // namespace loadgen::copula
