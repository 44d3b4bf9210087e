#include "loadgen/neural.hpp"

#include "loadgen/error.hpp"
#include "loadgen/random.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace loadgen::nn {

namespace {

const char* activation_name(Activation a)
{
    return a == Activation::relu ? "relu" : "identity";
}

Activation activation_from_name(const std::string& name)
{
    if (name == "relu") {
        return Activation::relu;
    }
    if (name == "identity") {
        return Activation::identity;
    }
    throw InputError("unknown activation '" + name + "'");
}

} // namespace

Network::Network(std::vector<DenseLayer> layers) : layers_(std::move(layers))
{
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        if (layer.weights.rows() != layer.bias.size() || layer.weights.rows() < 1 || layer.weights.cols() < 1) {
            throw std::invalid_argument("layer " + std::to_string(l) + ": inconsistent weight/bias shapes");
        }
        if (l > 0 && layer.weights.cols() != layers_[l - 1].weights.rows()) {
            throw std::invalid_argument("layer " + std::to_string(l) + ": input width does not chain");
        }
    }
}

Network Network::initialize(std::span<const LayerSpec> specs, std::uint64_t seed)
{
    std::vector<DenseLayer> layers;
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t l = 0; l < specs.size(); ++l) {
        const auto& s = specs[l];
        if (s.inputs < 1 || s.outputs < 1) {
            throw std::invalid_argument("layer widths must be >= 1");
        }
        if (l > 0 && s.inputs != specs[l - 1].outputs) {
            throw std::invalid_argument("layer " + std::to_string(l) + ": input width does not chain");
        }
        DenseLayer layer;
        layer.activation = s.activation;
        layer.weights.resize(s.outputs, s.inputs);
        const double scale = 1.0 / std::sqrt(static_cast<double>(s.inputs));
        for (Eigen::Index c = 0; c < s.inputs; ++c) {
            for (Eigen::Index r = 0; r < s.outputs; ++r) {
                layer.weights(r, c) = scale * normal(rng);
            }
        }
        layer.bias = Eigen::VectorXd::Zero(s.outputs);
        layers.push_back(std::move(layer));
    }
    return Network(std::move(layers));
}

std::vector<LayerSpec> Network::specs() const
{
    std::vector<LayerSpec> out;
    for (const auto& l : layers_) {
        out.push_back({l.weights.cols(), l.weights.rows(), l.activation});
    }
    return out;
}

Eigen::Index Network::input_width() const
{
    return layers_.empty() ? 0 : layers_.front().weights.cols();
}

Eigen::Index Network::output_width() const
{
    return layers_.empty() ? 0 : layers_.back().weights.rows();
}

Eigen::Index Network::parameter_count() const
{
    Eigen::Index n = 0;
    for (const auto& l : layers_) {
        n += l.weights.size() + l.bias.size();
    }
    return n;
}

Eigen::VectorXd Network::flatten() const
{
    Eigen::VectorXd flat(parameter_count());
    Eigen::Index pos = 0;
    for (const auto& l : layers_) {
        flat.segment(pos, l.weights.size()) = l.weights.reshaped();
        pos += l.weights.size();
        flat.segment(pos, l.bias.size()) = l.bias;
        pos += l.bias.size();
    }
    return flat;
}

void Network::assign(const Eigen::VectorXd& flat)
{
    if (flat.size() != parameter_count()) {
        throw std::invalid_argument("parameter vector length mismatch");
    }
    Eigen::Index pos = 0;
    for (auto& l : layers_) {
        l.weights.reshaped() = flat.segment(pos, l.weights.size());
        pos += l.weights.size();
        l.bias = flat.segment(pos, l.bias.size());
        pos += l.bias.size();
    }
}

ForwardPass forward(const Network& net, const Eigen::MatrixXd& input)
{
    if (input.cols() != net.input_width()) {
        throw std::invalid_argument("input width " + std::to_string(input.cols()) + " does not match network width " +
                                    std::to_string(net.input_width()));
    }
    ForwardPass pass;
    pass.inputs.reserve(net.layers().size());
    pass.pre_activations.reserve(net.layers().size());
    Eigen::MatrixXd current = input;
    for (const auto& layer : net.layers()) {
        Eigen::MatrixXd z = current * layer.weights.transpose();
        z.rowwise() += layer.bias.transpose();
        pass.inputs.push_back(std::move(current));
        current = layer.activation == Activation::relu ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
        pass.pre_activations.push_back(std::move(z));
    }
    pass.output = std::move(current);
    return pass;
}

Eigen::MatrixXd predict(const Network& net, const Eigen::MatrixXd& input)
{
    return forward(net, input).output;
}

Gradients backward(const Network& net, const ForwardPass& pass, const Eigen::MatrixXd& output_grad)
{
    const auto& layers = net.layers();
    if (pass.inputs.size() != layers.size() || output_grad.rows() != pass.output.rows() ||
        output_grad.cols() != pass.output.cols()) {
        throw std::invalid_argument("backward: shape mismatch with forward pass");
    }
    Gradients g;
    g.weights.resize(layers.size());
    g.bias.resize(layers.size());
    Eigen::MatrixXd delta = output_grad;
    for (std::size_t k = layers.size(); k-- > 0;) {
        const auto& layer = layers[k];
        if (layer.activation == Activation::relu) {
            delta = (pass.pre_activations[k].array() > 0.0).select(delta, 0.0);
        }
        g.weights[k] = delta.transpose() * pass.inputs[k];
        g.bias[k] = delta.colwise().sum().transpose();
        delta = delta * layer.weights;
    }
    g.input = std::move(delta);
    return g;
}

Eigen::VectorXd Gradients::flatten() const
{
    Eigen::Index n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        n += weights[l].size() + bias[l].size();
    }
    Eigen::VectorXd flat(n);
    Eigen::Index pos = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        flat.segment(pos, weights[l].size()) = weights[l].reshaped();
        pos += weights[l].size();
        flat.segment(pos, bias[l].size()) = bias[l];
        pos += bias[l].size();
    }
    return flat;
}

AdamState AdamState::for_network(const Network& net)
{
    AdamState s;
    for (const auto& l : net.layers()) {
        s.m_weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        s.v_weights.push_back(Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()));
        s.m_bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
        s.v_bias.push_back(Eigen::VectorXd::Zero(l.bias.size()));
    }
    return s;
}

namespace {

template <typename P, typename G, typename M>
void adam_update(P& param, const G& grad, M& m, M& v, double alpha, double correction1, double correction2,
                 const AdamOptions& o)
{
    m = o.beta1 * m + (1.0 - o.beta1) * grad;
    v = o.beta2 * v + (1.0 - o.beta2) * grad.cwiseAbs2();
    param.array() -= alpha * (m.array() / correction1) / ((v.array() / correction2).sqrt() + o.epsilon);
}

} // namespace

void adam_step(Network& net, const Gradients& grads, AdamState& state, double alpha, const AdamOptions& options)
{
    auto& layers = net.layers();
    if (grads.weights.size() != layers.size() || state.m_weights.size() != layers.size()) {
        throw std::invalid_argument("adam_step: layer count mismatch");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (grads.weights[l].rows() != layers[l].weights.rows() || grads.weights[l].cols() != layers[l].weights.cols() ||
            grads.bias[l].size() != layers[l].bias.size()) {
            throw std::invalid_argument("adam_step: gradient shape mismatch at layer " + std::to_string(l));
        }
        if (!grads.weights[l].allFinite() || !grads.bias[l].allFinite()) {
            throw NumericError("adam_step: non-finite gradient at layer " + std::to_string(l));
        }
    }
    ++state.step;
    const auto t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(options.beta1, t);
    const double c2 = 1.0 - std::pow(options.beta2, t);
    for (std::size_t l = 0; l < layers.size(); ++l) {
        adam_update(layers[l].weights, grads.weights[l], state.m_weights[l], state.v_weights[l], alpha, c1, c2, options);
        adam_update(layers[l].bias, grads.bias[l], state.m_bias[l], state.v_bias[l], alpha, c1, c2, options);
    }
}

nlohmann::json to_json(const Network& net)
{
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers()) {
        nlohmann::json j;
        j["inputs"] = l.weights.cols();
        j["outputs"] = l.weights.rows();
        j["activation"] = activation_name(l.activation);
        auto& w = j["weights"] = nlohmann::json::array();
        for (Eigen::Index r = 0; r < l.weights.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(l.weights.cols()));
            for (Eigen::Index c = 0; c < l.weights.cols(); ++c) {
                row[static_cast<std::size_t>(c)] = l.weights(r, c);
            }
            w.push_back(std::move(row));
        }
        j["bias"] = std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size());
        layers.push_back(std::move(j));
    }
    return {{"layers", std::move(layers)}};
}

Network network_from_json(const nlohmann::json& j)
{
    std::vector<DenseLayer> layers;
    for (const auto& lj : j.at("layers")) {
        DenseLayer l;
        const auto inputs = lj.at("inputs").get<Eigen::Index>();
        const auto outputs = lj.at("outputs").get<Eigen::Index>();
        l.activation = activation_from_name(lj.at("activation").get<std::string>());
        const auto& w = lj.at("weights");
        if (static_cast<Eigen::Index>(w.size()) != outputs) {
            throw InputError("checkpoint: weight rows do not match layer outputs");
        }
        l.weights.resize(outputs, inputs);
        for (Eigen::Index r = 0; r < outputs; ++r) {
            const auto row = w[static_cast<std::size_t>(r)].get<std::vector<double>>();
            if (static_cast<Eigen::Index>(row.size()) != inputs) {
                throw InputError("checkpoint: weight columns do not match layer inputs");
            }
            for (Eigen::Index c = 0; c < inputs; ++c) {
                l.weights(r, c) = row[static_cast<std::size_t>(c)];
            }
        }
        const auto bias = lj.at("bias").get<std::vector<double>>();
        if (static_cast<Eigen::Index>(bias.size()) != outputs) {
            throw InputError("checkpoint: bias length does not match layer outputs");
        }
        l.bias = Eigen::Map<const Eigen::VectorXd>(bias.data(), outputs);
        layers.push_back(std::move(l));
    }
    try {
        return Network(std::move(layers));
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("checkpoint: ") + e.what());
    }
}

} // namespace loadgen::nn
