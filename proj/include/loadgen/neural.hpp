#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <span>
#include <vector>

// Small dense feed-forward networks with exact backpropagation and Adam.
// Batches are row-major in the sense that each row is one sample.
namespace loadgen::nn {

enum class Activation { relu, identity };

struct LayerSpec {
    Eigen::Index inputs = 1;
    Eigen::Index outputs = 1;
    Activation activation = Activation::relu;
};

struct DenseLayer {
    Eigen::MatrixXd weights; // outputs x inputs
    Eigen::VectorXd bias;    // outputs
    Activation activation = Activation::relu;
};

class Network {
public:
    Network() = default;
    explicit Network(std::vector<DenseLayer> layers);

    /// Weights ~ N(0, 1/inputs), biases zero.
    static Network initialize(std::span<const LayerSpec> specs, std::uint64_t seed);

    const std::vector<DenseLayer>& layers() const { return layers_; }
    std::vector<DenseLayer>& layers() { return layers_; }
    std::vector<LayerSpec> specs() const;

    Eigen::Index input_width() const;
    Eigen::Index output_width() const;
    Eigen::Index parameter_count() const;

    // Per layer: weights in column-major order, then bias.
    Eigen::VectorXd flatten() const;
    void assign(const Eigen::VectorXd& flat);

private:
    std::vector<DenseLayer> layers_;
};

struct ForwardPass {
    std::vector<Eigen::MatrixXd> inputs;          // input to each layer
    std::vector<Eigen::MatrixXd> pre_activations; // W x + b for each layer
    Eigen::MatrixXd output;
};

ForwardPass forward(const Network& net, const Eigen::MatrixXd& input);
Eigen::MatrixXd predict(const Network& net, const Eigen::MatrixXd& input);

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> bias;
    Eigen::MatrixXd input;

    Eigen::VectorXd flatten() const;
};

/// Gradients of a scalar loss given its gradient with respect to the network
/// output, using the activations recorded by `forward`.
Gradients backward(const Network& net, const ForwardPass& pass, const Eigen::MatrixXd& output_grad);

struct AdamOptions {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<Eigen::MatrixXd> m_weights, v_weights;
    std::vector<Eigen::VectorXd> m_bias, v_bias;
    std::int64_t step = 0;

    static AdamState for_network(const Network& net);
};

/// One bias-corrected Adam update. Throws NumericError on non-finite gradients
/// and leaves parameters and state untouched in that case.
void adam_step(Network& net, const Gradients& grads, AdamState& state, double alpha,
               const AdamOptions& options = {});

nlohmann::json to_json(const Network& net);
Network network_from_json(const nlohmann::json& j);

} // namespace loadgen::nn
