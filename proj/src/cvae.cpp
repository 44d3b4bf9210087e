#include "loadgen/cvae.hpp"

#include "loadgen/random.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace loadgen::cvae {

using Eigen::Index;
using Eigen::MatrixXd;

void StrategyConfig::validate() const
{
    if (sigma_mode == SigmaMode::fixed && !(fixed_sigma > 0.0)) {
        throw std::invalid_argument("fixed output sigma must be positive");
    }
    if (!(beta >= 0.0)) {
        throw std::invalid_argument("beta must be non-negative");
    }
}

std::string StrategyConfig::sigma_text() const
{
    if (sigma_mode == SigmaMode::automatic) {
        return "auto";
    }
    char buffer[64];
    auto [end, ec] = std::to_chars(buffer, buffer + sizeof(buffer), fixed_sigma);
    (void)ec;
    return "fixed:" + std::string(buffer, end);
}

StrategyConfig StrategyConfig::parse_sigma(std::string_view text, StrategyConfig base)
{
    if (text == "auto") {
        base.sigma_mode = SigmaMode::automatic;
        return base;
    }
    constexpr std::string_view prefix = "fixed:";
    if (text.starts_with(prefix)) {
        const auto number = text.substr(prefix.size());
        double s = 0.0;
        auto [ptr, ec] = std::from_chars(number.data(), number.data() + number.size(), s);
        if (ec == std::errc{} && ptr == number.data() + number.size() && s > 0.0) {
            base.sigma_mode = SigmaMode::fixed;
            base.fixed_sigma = s;
            return base;
        }
    }
    throw std::invalid_argument("sigma mode must be 'auto' or 'fixed:<positive number>', got '" + std::string(text) +
                                "'");
}

StrategyConfig StrategyConfig::parse_sigma(std::string_view text)
{
    return parse_sigma(text, StrategyConfig{});
}

void ModelConfig::validate() const
{
    if (input_dim < 1 || latent_dim < 1 || condition_dim < 0) {
        throw std::invalid_argument("model dimensions must be positive");
    }
    if (batch_size < 1 || iterations < 0 || !(learning_rate > 0.0)) {
        throw std::invalid_argument("invalid training hyperparameters");
    }
    for (auto h : hidden) {
        if (h < 1) {
            throw std::invalid_argument("hidden widths must be >= 1");
        }
    }
    strategy.validate();
}

std::vector<nn::LayerSpec> ModelConfig::encoder_layers() const
{
    std::vector<nn::LayerSpec> specs;
    Index width = input_dim + condition_dim;
    for (auto h : hidden) {
        specs.push_back({width, h, nn::Activation::relu});
        width = h;
    }
    specs.push_back({width, 2 * latent_dim, nn::Activation::identity});
    return specs;
}

std::vector<nn::LayerSpec> ModelConfig::decoder_layers() const
{
    std::vector<nn::LayerSpec> specs;
    Index width = latent_dim + condition_dim;
    for (auto it = hidden.rbegin(); it != hidden.rend(); ++it) {
        specs.push_back({width, *it, nn::Activation::relu});
        width = *it;
    }
    const Index heads = strategy.sigma_mode == SigmaMode::automatic ? 2 : 1;
    specs.push_back({width, heads * input_dim, nn::Activation::identity});
    return specs;
}

TrainedModel initialize(const ModelConfig& config, std::uint64_t seed)
{
    config.validate();
    TrainedModel model;
    model.config = config;
    const auto enc = config.encoder_layers();
    const auto dec = config.decoder_layers();
    model.encoder = nn::Network::initialize(enc, derive_seed(seed, 0));
    model.decoder = nn::Network::initialize(dec, derive_seed(seed, 1));
    model.seed = seed;
    return model;
}

namespace {

MatrixXd concat(const MatrixXd& a, const MatrixXd& b)
{
    MatrixXd out(a.rows(), a.cols() + b.cols());
    out << a, b;
    return out;
}

void check_conditions(const TrainedModel& model, Index rows, const MatrixXd& c)
{
    if (c.cols() != model.config.condition_dim || c.rows() != rows) {
        throw std::invalid_argument("condition matrix must be " + std::to_string(rows) + " x " +
                                    std::to_string(model.config.condition_dim));
    }
}

MatrixXd clamp_log_variance(const MatrixXd& raw)
{
    return raw.cwiseMax(kLogVarianceFloor);
}

double reduce(double sum, Index rows, Reduction reduction)
{
    return reduction == Reduction::sum || rows == 0 ? sum : sum / static_cast<double>(rows);
}

void check_same_shape(const MatrixXd& a, const MatrixXd& b, const char* what)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(what) + ": shape mismatch");
    }
}

void check_positive(const MatrixXd& sigma, const char* what)
{
    if (!(sigma.array() > 0.0).all()) {
        throw std::invalid_argument(std::string(what) + ": sigma must be strictly positive");
    }
}

} // namespace

LatentCode encode(const TrainedModel& model, const MatrixXd& x, const MatrixXd& c)
{
    if (x.cols() != model.config.input_dim) {
        throw std::invalid_argument("encode: input has " + std::to_string(x.cols()) + " columns, model expects " +
                                    std::to_string(model.config.input_dim));
    }
    check_conditions(model, x.rows(), c);
    const MatrixXd out = nn::predict(model.encoder, concat(x, c));
    const Index latent = model.config.latent_dim;
    return {out.leftCols(latent), (0.5 * clamp_log_variance(out.rightCols(latent)).array()).exp().matrix()};
}

MatrixXd reparameterize(const MatrixXd& mu, const MatrixXd& sigma, const MatrixXd& epsilon)
{
    check_same_shape(mu, sigma, "reparameterize");
    check_same_shape(mu, epsilon, "reparameterize");
    return mu + epsilon.cwiseProduct(sigma);
}

OutputDistribution decode(const TrainedModel& model, const MatrixXd& z, const MatrixXd& c)
{
    if (z.cols() != model.config.latent_dim) {
        throw std::invalid_argument("decode: latent width mismatch");
    }
    check_conditions(model, z.rows(), c);
    const MatrixXd out = nn::predict(model.decoder, concat(z, c));
    const Index d = model.config.input_dim;
    if (model.config.strategy.sigma_mode == SigmaMode::fixed) {
        return {out, MatrixXd::Constant(z.rows(), d, model.config.strategy.fixed_sigma)};
    }
    return {out.leftCols(d), (0.5 * clamp_log_variance(out.rightCols(d)).array()).exp().matrix()};
}

double kl_loss(const MatrixXd& mu, const MatrixXd& sigma, Reduction reduction)
{
    check_same_shape(mu, sigma, "kl_loss");
    check_positive(sigma, "kl_loss");
    const auto var = sigma.array().square();
    const double sum = 0.5 * (-1.0 + var + mu.array().square() - var.log()).sum();
    return reduce(sum, mu.rows(), reduction);
}

double recon_loss_auto(const MatrixXd& x, const MatrixXd& mu, const MatrixXd& sigma, Reduction reduction)
{
    check_same_shape(x, mu, "recon_loss_auto");
    check_same_shape(x, sigma, "recon_loss_auto");
    check_positive(sigma, "recon_loss_auto");
    const auto var = sigma.array().square();
    const double sum = 0.5 * ((x - mu).array().square() / var + var.log()).sum();
    return reduce(sum, x.rows(), reduction);
}

double recon_loss_fixed(const MatrixXd& x, const MatrixXd& mu, double s, Reduction reduction)
{
    check_same_shape(x, mu, "recon_loss_fixed");
    if (!(s > 0.0)) {
        throw std::invalid_argument("recon_loss_fixed: s must be positive");
    }
    const double sum = 0.5 * (x - mu).array().square().sum() / (s * s);
    return reduce(sum, x.rows(), reduction);
}

MatrixXd recon_loss_auto_grad_mu(const MatrixXd& x, const MatrixXd& mu, const MatrixXd& sigma, Reduction reduction)
{
    check_same_shape(x, mu, "recon_loss_auto_grad_mu");
    check_same_shape(x, sigma, "recon_loss_auto_grad_mu");
    check_positive(sigma, "recon_loss_auto_grad_mu");
    MatrixXd g = ((mu - x).array() / sigma.array().square()).matrix();
    if (reduction == Reduction::batch_mean && x.rows() > 0) {
        g /= static_cast<double>(x.rows());
    }
    return g;
}

MatrixXd recon_loss_fixed_grad_mu(const MatrixXd& x, const MatrixXd& mu, double s, Reduction reduction)
{
    check_same_shape(x, mu, "recon_loss_fixed_grad_mu");
    if (!(s > 0.0)) {
        throw std::invalid_argument("recon_loss_fixed_grad_mu: s must be positive");
    }
    MatrixXd g = (mu - x) / (s * s);
    if (reduction == Reduction::batch_mean && x.rows() > 0) {
        g /= static_cast<double>(x.rows());
    }
    return g;
}

double total_loss(const StrategyConfig& strategy, double kl, double reconstruction)
{
    return strategy.beta * kl + reconstruction;
}

namespace {

struct Evaluation {
    nn::ForwardPass encoder_pass;
    nn::ForwardPass decoder_pass;
    MatrixXd mu, log_var, sigma;           // latent
    MatrixXd out_mu, out_log_var;          // output (log-variance empty in fixed mode)
    LossValue loss;
};

Evaluation evaluate(const TrainedModel& model, const MatrixXd& x, const MatrixXd& c, const MatrixXd& epsilon)
{
    const auto& cfg = model.config;
    if (x.cols() != cfg.input_dim) {
        throw std::invalid_argument("batch_loss: input width mismatch");
    }
    check_conditions(model, x.rows(), c);
    if (epsilon.rows() != x.rows() || epsilon.cols() != cfg.latent_dim) {
        throw std::invalid_argument("batch_loss: epsilon must be batch x latent");
    }
    const Index latent = cfg.latent_dim;
    const Index d = cfg.input_dim;
    const double batch = static_cast<double>(std::max<Index>(x.rows(), 1));

    Evaluation e;
    e.encoder_pass = nn::forward(model.encoder, concat(x, c));
    e.mu = e.encoder_pass.output.leftCols(latent);
    e.log_var = clamp_log_variance(e.encoder_pass.output.rightCols(latent));
    e.sigma = (0.5 * e.log_var.array()).exp().matrix();
    const MatrixXd z = e.mu + epsilon.cwiseProduct(e.sigma);

    e.decoder_pass = nn::forward(model.decoder, concat(z, c));
    e.out_mu = e.decoder_pass.output.leftCols(d);

    e.loss.kl = 0.5 * (-1.0 + e.log_var.array().exp() + e.mu.array().square() - e.log_var.array()).sum() / batch;
    const auto residual2 = (x - e.out_mu).array().square();
    if (cfg.strategy.sigma_mode == SigmaMode::automatic) {
        e.out_log_var = clamp_log_variance(e.decoder_pass.output.rightCols(d));
        e.loss.reconstruction =
            0.5 * (residual2 * (-e.out_log_var.array()).exp() + e.out_log_var.array()).sum() / batch;
    } else {
        const double s = cfg.strategy.fixed_sigma;
        e.loss.reconstruction = 0.5 * residual2.sum() / (s * s) / batch;
    }
    e.loss.total = total_loss(cfg.strategy, e.loss.kl, e.loss.reconstruction);
    return e;
}

} // namespace

LossValue batch_loss(const TrainedModel& model, const MatrixXd& x, const MatrixXd& c, const MatrixXd& epsilon)
{
    return evaluate(model, x, c, epsilon).loss;
}

LossGradient batch_loss_gradient(const TrainedModel& model, const MatrixXd& x, const MatrixXd& c,
                                 const MatrixXd& epsilon)
{
    const auto& cfg = model.config;
    const Evaluation e = evaluate(model, x, c, epsilon);
    const Index latent = cfg.latent_dim;
    const Index d = cfg.input_dim;
    const double batch = static_cast<double>(std::max<Index>(x.rows(), 1));
    const double beta = cfg.strategy.beta;

    const MatrixXd residual = x - e.out_mu;
    MatrixXd d_out(x.rows(), cfg.strategy.sigma_mode == SigmaMode::automatic ? 2 * d : d);
    if (cfg.strategy.sigma_mode == SigmaMode::automatic) {
        const auto precision = (-e.out_log_var.array()).exp();
        d_out.leftCols(d) = (-residual.array() * precision / batch).matrix();
        const auto raw = e.decoder_pass.output.rightCols(d).array();
        d_out.rightCols(d) =
            (raw > kLogVarianceFloor).select(0.5 * (1.0 - residual.array().square() * precision) / batch, 0.0);
    } else {
        const double s = cfg.strategy.fixed_sigma;
        d_out = -residual / (s * s * batch);
    }

    LossGradient g;
    g.loss = e.loss;
    g.decoder = nn::backward(model.decoder, e.decoder_pass, d_out);
    const MatrixXd dz = g.decoder.input.leftCols(latent);

    MatrixXd d_enc(x.rows(), 2 * latent);
    d_enc.leftCols(latent) = dz + beta * e.mu / batch;
    const auto raw = e.encoder_pass.output.rightCols(latent).array();
    const auto through_z = dz.array() * epsilon.array() * 0.5 * e.sigma.array();
    const auto through_kl = beta * 0.5 * (e.log_var.array().exp() - 1.0) / batch;
    d_enc.rightCols(latent) = (raw > kLogVarianceFloor).select(through_z + through_kl, 0.0);
    g.encoder = nn::backward(model.encoder, e.encoder_pass, d_enc);
    return g;
}

TrainedModel train(const MatrixXd& x, const MatrixXd& conditions, const ModelConfig& config, std::uint64_t seed)
{
    config.validate();
    if (x.cols() != config.input_dim) {
        throw std::invalid_argument("train: data width does not match input_dim");
    }
    if (conditions.rows() != x.rows() || conditions.cols() != config.condition_dim) {
        throw std::invalid_argument("train: conditions must have one row per sample and condition_dim columns");
    }
    if (x.rows() < 1) {
        throw InputError("train: empty training set");
    }
    if (!x.allFinite() || !conditions.allFinite()) {
        throw InputError("train: non-finite training data");
    }

    TrainedModel model = initialize(config, seed);
    nn::AdamState enc_state = nn::AdamState::for_network(model.encoder);
    nn::AdamState dec_state = nn::AdamState::for_network(model.decoder);
    Rng rng = make_stream(seed, 2);
    std::normal_distribution<double> normal(0.0, 1.0);

    const Index n = x.rows();
    const Index batch = std::min(config.batch_size, n);
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;

    MatrixXd xb(batch, config.input_dim);
    MatrixXd cb(batch, config.condition_dim);
    MatrixXd eps(batch, config.latent_dim);
    model.loss_trace.reserve(static_cast<std::size_t>(config.iterations));

    nn::Network last_encoder = model.encoder;
    nn::Network last_decoder = model.decoder;
    for (Index it = 0; it < config.iterations; ++it) {
        for (Index b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const Index row = order[cursor++];
            xb.row(b) = x.row(row);
            cb.row(b) = conditions.row(row);
        }
        for (Index b = 0; b < batch; ++b) {
            for (Index j = 0; j < config.latent_dim; ++j) {
                eps(b, j) = normal(rng);
            }
        }

        const LossGradient g = batch_loss_gradient(model, xb, cb, eps);
        if (!std::isfinite(g.loss.total)) {
            TrainedModel good = model;
            good.encoder = last_encoder;
            good.decoder = last_decoder;
            throw TrainingDiverged("training loss became non-finite at iteration " + std::to_string(it),
                                   std::move(good));
        }
        model.loss_trace.push_back(g.loss.total);
        last_encoder = model.encoder;
        last_decoder = model.decoder;
        try {
            nn::adam_step(model.encoder, g.encoder, enc_state, config.learning_rate);
            nn::adam_step(model.decoder, g.decoder, dec_state, config.learning_rate);
        } catch (const NumericError& err) {
            TrainedModel good = model;
            good.encoder = last_encoder;
            good.decoder = last_decoder;
            throw TrainingDiverged(std::string(err.what()) + " at iteration " + std::to_string(it), std::move(good));
        }
    }
    return model;
}

namespace {

constexpr Index kGenerationChunk = 1024;

} // namespace

MatrixXd generate(const TrainedModel& model, const MatrixXd& conditions, std::uint64_t seed, std::optional<bool> noisy)
{
    const auto& cfg = model.config;
    if (conditions.cols() != cfg.condition_dim) {
        throw std::invalid_argument("generate: condition width mismatch");
    }
    const bool add_noise = noisy.value_or(cfg.strategy.noisy);
    const Index count = conditions.rows();
    MatrixXd out(count, cfg.input_dim);
    std::normal_distribution<double> normal(0.0, 1.0);

    // Each chunk owns an RNG stream, so any partition of the rows gives the same result.
    for (Index start = 0, chunk = 0; start < count; start += kGenerationChunk, ++chunk) {
        const Index rows = std::min(kGenerationChunk, count - start);
        Rng rng = make_stream(seed, static_cast<std::uint64_t>(chunk));
        MatrixXd z(rows, cfg.latent_dim);
        for (Index r = 0; r < rows; ++r) {
            for (Index j = 0; j < cfg.latent_dim; ++j) {
                z(r, j) = normal(rng);
            }
        }
        const OutputDistribution dist = decode(model, z, conditions.middleRows(start, rows));
        if (add_noise) {
            MatrixXd eps(rows, cfg.input_dim);
            for (Index r = 0; r < rows; ++r) {
                for (Index j = 0; j < cfg.input_dim; ++j) {
                    eps(r, j) = normal(rng);
                }
            }
            out.middleRows(start, rows) = dist.mu + eps.cwiseProduct(dist.sigma);
        } else {
            out.middleRows(start, rows) = dist.mu;
        }
    }
    return out;
}

MatrixXd generate(const TrainedModel& model, Index count, std::uint64_t seed, std::optional<bool> noisy)
{
    if (model.config.condition_dim != 0) {
        throw std::invalid_argument("generate: conditional model needs a condition matrix");
    }
    return generate(model, MatrixXd(count, 0), seed, noisy);
}

std::array<Index, 24> hour_histogram(std::span<const int> hours)
{
    std::array<Index, 24> h{};
    for (int hour : hours) {
        if (hour < 0 || hour > 23) {
            throw std::out_of_range("hour out of range");
        }
        ++h[static_cast<std::size_t>(hour)];
    }
    return h;
}

std::vector<int> schedule_hours(const std::array<Index, 24>& histogram, Index count)
{
    const Index total = std::accumulate(histogram.begin(), histogram.end(), Index{0});
    if (count < 0) {
        throw std::invalid_argument("schedule_hours: negative count");
    }
    if (total == 0) {
        throw std::invalid_argument("schedule_hours: empty histogram");
    }
    std::array<Index, 24> quota{};
    if (count == total) {
        quota = histogram;
    } else {
        std::array<double, 24> remainder{};
        Index assigned = 0;
        for (std::size_t h = 0; h < 24; ++h) {
            const double exact = static_cast<double>(histogram[h]) * static_cast<double>(count) /
                                 static_cast<double>(total);
            quota[h] = static_cast<Index>(std::floor(exact));
            remainder[h] = exact - static_cast<double>(quota[h]);
            assigned += quota[h];
        }
        std::array<std::size_t, 24> idx{};
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
        for (std::size_t k = 0; assigned < count; k = (k + 1) % 24) {
            ++quota[idx[k]];
            ++assigned;
        }
    }
    std::vector<int> hours;
    hours.reserve(static_cast<std::size_t>(count));
    for (std::size_t h = 0; h < 24; ++h) {
        hours.insert(hours.end(), static_cast<std::size_t>(quota[h]), static_cast<int>(h));
    }
    return hours;
}

nlohmann::json to_json(const TrainedModel& model)
{
    const auto& cfg = model.config;
    nlohmann::json j;
    j["format"] = "loadgen-cvae/1";
    j["config"] = {
        {"input_dim", cfg.input_dim},
        {"condition_dim", cfg.condition_dim},
        {"hidden", cfg.hidden},
        {"latent_dim", cfg.latent_dim},
        {"batch_size", cfg.batch_size},
        {"iterations", cfg.iterations},
        {"learning_rate", cfg.learning_rate},
    };
    j["strategy"] = {
        {"sigma_mode", cfg.strategy.sigma_text()},
        {"noisy", cfg.strategy.noisy},
        {"beta", cfg.strategy.beta},
    };
    j["normalization"] = dataset::to_json(model.normalization);
    j["areas"] = model.areas;
    j["hour_histogram"] = model.hour_histogram;
    j["seed"] = model.seed;
    j["encoder"] = nn::to_json(model.encoder);
    j["decoder"] = nn::to_json(model.decoder);
    j["loss_trace"] = model.loss_trace;
    return j;
}

TrainedModel model_from_json(const nlohmann::json& j)
{
    try {
        if (j.value("format", std::string{}) != "loadgen-cvae/1") {
            throw InputError("not a loadgen CVAE checkpoint");
        }
        TrainedModel model;
        auto& cfg = model.config;
        const auto& c = j.at("config");
        cfg.input_dim = c.at("input_dim").get<Index>();
        cfg.condition_dim = c.at("condition_dim").get<Index>();
        cfg.hidden = c.at("hidden").get<std::vector<Index>>();
        cfg.latent_dim = c.at("latent_dim").get<Index>();
        cfg.batch_size = c.at("batch_size").get<Index>();
        cfg.iterations = c.at("iterations").get<Index>();
        cfg.learning_rate = c.at("learning_rate").get<double>();
        const auto& s = j.at("strategy");
        cfg.strategy = StrategyConfig::parse_sigma(s.at("sigma_mode").get<std::string>());
        cfg.strategy.noisy = s.at("noisy").get<bool>();
        cfg.strategy.beta = s.at("beta").get<double>();
        cfg.validate();
        model.normalization = dataset::normalization_from_json(j.at("normalization"));
        model.areas = j.at("areas").get<std::vector<std::string>>();
        model.hour_histogram = j.at("hour_histogram").get<std::array<Index, 24>>();
        model.seed = j.at("seed").get<std::uint64_t>();
        model.encoder = nn::network_from_json(j.at("encoder"));
        model.decoder = nn::network_from_json(j.at("decoder"));
        model.loss_trace = j.value("loss_trace", std::vector<double>{});

        auto same = [](const std::vector<nn::LayerSpec>& a, const std::vector<nn::LayerSpec>& b) {
            return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](const auto& x, const auto& y) {
                       return x.inputs == y.inputs && x.outputs == y.outputs && x.activation == y.activation;
                   });
        };
        if (!same(model.encoder.specs(), cfg.encoder_layers()) || !same(model.decoder.specs(), cfg.decoder_layers())) {
            throw InputError("checkpoint: network shapes do not match the stored configuration");
        }
        if (model.normalization.dims() != cfg.input_dim ||
            static_cast<Index>(model.areas.size()) != cfg.input_dim) {
            throw InputError("checkpoint: normalization or area list does not match input_dim");
        }
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("checkpoint: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw InputError(std::string("checkpoint: ") + e.what());
    }
}

} // namespace loadgen::cvae
