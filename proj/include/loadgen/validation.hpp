#pragma once

#include "loadgen/neural.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace loadgen::validation {

using Eigen::Index;

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

/// Two-sample Kolmogorov-Smirnov test. The p-value uses the asymptotic
/// Kolmogorov distribution at sqrt(n_a n_b / (n_a + n_b)) * D.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Distance of the empirical p-value CDF from the diagonal, evaluated at the
/// attained p-values: max over distinct p of |#{p_i <= p}/N - p|. For a
/// discrete statistic the CDF of a calibrated p-value meets the diagonal at
/// exactly those points.
double uniform_sup_distance(std::span<const double> p_values);

/// Classical sup over all t of |F_N(t) - t|, including the flat stretches
/// between attainable p-values.
double uniform_step_distance(std::span<const double> p_values);

struct PValueCurve {
    std::vector<double> p_values; // sorted ascending
    Index repetitions = 0;
    double fraction = 0.0;
    Index subsample_hist = 0;
    Index subsample_gen = 0;

    double sup_distance() const { return uniform_sup_distance(p_values); }
};

inline constexpr Index kMinSubsample = 10;

/// Per repetition, draws floor(fraction * n) rows without replacement from each
/// population and runs a K-S test on every column. One curve per column.
std::vector<PValueCurve> ks_repeated(const Eigen::MatrixXd& hist, const Eigen::MatrixXd& gen, double fraction,
                                     Index repetitions, std::uint64_t seed, int threads = 1);

struct AutoencoderConfig {
    std::vector<Index> hidden{24, 16};
    Index bottleneck = 8;
    Index batch_size = 64;
    Index iterations = 20000;
    double learning_rate = 1e-4;
};

struct Autoencoder {
    nn::Network network;
    std::vector<double> loss_trace;
    std::uint64_t seed = 0;
};

/// Deterministic autoencoder with the CVAE's layer widths, trained by Adam on
/// r = mean ||x - x_hat||^2 / d.
Autoencoder train_autoencoder(const Eigen::MatrixXd& train, const AutoencoderConfig& config, std::uint64_t seed);

/// Per-row ||x - x_hat||^2 / d, in row order.
Eigen::VectorXd reconstruction_errors(const Autoencoder& ae, const Eigen::MatrixXd& data);

/// Sorted reconstruction errors, ready to plot as an ECDF.
std::vector<double> recon_error_cdf(const Autoencoder& ae, const Eigen::MatrixXd& data);

struct EcdfReport {
    std::vector<std::string> labels;
    std::vector<std::vector<double>> errors;

    void add(std::string label, std::vector<double> sorted_errors);
};

/// V-statistic energy distance
/// 2 mean||a_i - b_j|| - mean||a_i - a_i'|| - mean||b_j - b_j'||.
/// Exactly symmetric in its arguments.
double energy_statistic(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Permutation p-value (1 + #{E_perm >= E_obs}) / (1 + permutations).
double energy_test(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Index permutations, std::uint64_t seed);

PValueCurve energy_repeated(const Eigen::MatrixXd& hist, const Eigen::MatrixXd& gen, double fraction,
                            Index repetitions, Index permutations, std::uint64_t seed, int threads = 1);

} // namespace loadgen::validation
