#pragma once

#include "loadgen/dataset.hpp"
#include "loadgen/error.hpp"
#include "loadgen/neural.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Conditional variational autoencoder for multivariate load states.
//
// The encoder maps (x, c) through ReLU hidden layers to a linear head whose
// output stacks the latent mean and log-variance. The decoder maps (z, c)
// through the mirrored hidden layers to the output mean and, when the output
// noise is co-optimized, its log-variance. With a fixed output noise level
// the decoder has no variance head and every output dimension uses s.
//
// All matrices hold one sample per row, on the normalized (min-max) scale.
namespace loadgen::cvae {

enum class SigmaMode { automatic, fixed };

struct StrategyConfig {
    SigmaMode sigma_mode = SigmaMode::automatic;
    double fixed_sigma = 0.1;
    bool noisy = true;
    double beta = 1.0;

    void validate() const;
    // "auto" or "fixed:<s>"
    std::string sigma_text() const;
    static StrategyConfig parse_sigma(std::string_view text, StrategyConfig base);
    static StrategyConfig parse_sigma(std::string_view text);
};

struct ModelConfig {
    Eigen::Index input_dim = 1;
    Eigen::Index condition_dim = dataset::kConditionDims;
    std::vector<Eigen::Index> hidden{24, 16};
    Eigen::Index latent_dim = 8;
    StrategyConfig strategy;
    Eigen::Index batch_size = 64;
    Eigen::Index iterations = 20000;
    double learning_rate = 1e-4;

    void validate() const;
    std::vector<nn::LayerSpec> encoder_layers() const;
    std::vector<nn::LayerSpec> decoder_layers() const;
};

// Log-variance heads are clamped from below; gradients vanish past the floor.
inline constexpr double kLogVarianceFloor = -20.0;

struct LatentCode {
    Eigen::MatrixXd mu;
    Eigen::MatrixXd sigma;
};

struct OutputDistribution {
    Eigen::MatrixXd mu;
    Eigen::MatrixXd sigma;
};

struct TrainedModel {
    ModelConfig config;
    nn::Network encoder;
    nn::Network decoder;
    dataset::NormalizationSpec normalization;
    std::vector<std::string> areas;
    std::array<Eigen::Index, 24> hour_histogram{};
    std::vector<double> loss_trace;
    std::uint64_t seed = 0;
};

TrainedModel initialize(const ModelConfig& config, std::uint64_t seed);

LatentCode encode(const TrainedModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& c);
Eigen::MatrixXd reparameterize(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& epsilon);
OutputDistribution decode(const TrainedModel& model, const Eigen::MatrixXd& z, const Eigen::MatrixXd& c);

enum class Reduction { sum, batch_mean };

// 1/2 sum(-1 + sigma^2 + mu^2 - log sigma^2)
double kl_loss(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& sigma, Reduction reduction = Reduction::sum);
// 1/2 sum((x - mu)^2 / sigma^2 + log sigma^2), Gaussian constant omitted
double recon_loss_auto(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mu, const Eigen::MatrixXd& sigma,
                       Reduction reduction = Reduction::sum);
// 1/2 sum((x - mu)^2 / s^2)
double recon_loss_fixed(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mu, double s,
                        Reduction reduction = Reduction::sum);
Eigen::MatrixXd recon_loss_auto_grad_mu(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mu,
                                        const Eigen::MatrixXd& sigma, Reduction reduction = Reduction::sum);
Eigen::MatrixXd recon_loss_fixed_grad_mu(const Eigen::MatrixXd& x, const Eigen::MatrixXd& mu, double s,
                                         Reduction reduction = Reduction::sum);

double total_loss(const StrategyConfig& strategy, double kl, double reconstruction);

struct LossValue {
    double kl = 0.0;
    double reconstruction = 0.0;
    double total = 0.0;
};

struct LossGradient {
    LossValue loss;
    nn::Gradients encoder;
    nn::Gradients decoder;
};

/// Batch-mean training loss for a fixed draw `epsilon` (batch x latent).
LossValue batch_loss(const TrainedModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& c,
                     const Eigen::MatrixXd& epsilon);
LossGradient batch_loss_gradient(const TrainedModel& model, const Eigen::MatrixXd& x, const Eigen::MatrixXd& c,
                                 const Eigen::MatrixXd& epsilon);

/// Thrown when the loss becomes non-finite; carries the parameters from the
/// last iteration whose loss was finite.
class TrainingDiverged : public NumericError {
public:
    TrainingDiverged(const std::string& what, TrainedModel last_good)
        : NumericError(what), last_good_(std::move(last_good))
    {
    }
    const TrainedModel& last_good() const { return last_good_; }

private:
    TrainedModel last_good_;
};

/// Minibatch Adam on the batch-mean loss with one latent draw per sample and
/// step. `conditions` has one row per sample (zero columns for a plain VAE).
TrainedModel train(const Eigen::MatrixXd& x, const Eigen::MatrixXd& conditions, const ModelConfig& config,
                   std::uint64_t seed);

/// Decodes standard-normal latent draws under the given conditions (one row
/// per output sample, or zero columns for a plain VAE). Noisy generation adds
/// epsilon * sigma' to the decoder mean. `noisy` defaults to the strategy.
Eigen::MatrixXd generate(const TrainedModel& model, const Eigen::MatrixXd& conditions, std::uint64_t seed,
                         std::optional<bool> noisy = std::nullopt);
/// Unconditional convenience overload.
Eigen::MatrixXd generate(const TrainedModel& model, Eigen::Index count, std::uint64_t seed,
                         std::optional<bool> noisy = std::nullopt);

std::array<Eigen::Index, 24> hour_histogram(std::span<const int> hours);

/// Hours for `count` generated rows following the histogram: replayed exactly
/// when `count` equals its total, otherwise apportioned by largest remainder.
std::vector<int> schedule_hours(const std::array<Eigen::Index, 24>& histogram, Eigen::Index count);

nlohmann::json to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

} // namespace loadgen::cvae
