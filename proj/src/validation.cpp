#include "loadgen/validation.hpp"

#include "loadgen/error.hpp"
#include "loadgen/parallel.hpp"
#include "loadgen/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace loadgen::validation {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double kolmogorov_survival(double lambda)
{
    if (lambda <= 0.0) {
        return 1.0;
    }
    if (lambda < 1.18) {
        // Jacobi-transformed series, fast for small lambda.
        const double pi2 = std::numbers::pi * std::numbers::pi;
        double cdf = 0.0;
        for (int k = 1; k <= 20; ++k) {
            const double odd = 2.0 * k - 1.0;
            cdf += std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
        }
        cdf *= std::sqrt(2.0 * std::numbers::pi) / lambda;
        return std::clamp(1.0 - cdf, 0.0, 1.0);
    }
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += (k % 2 == 1 ? term : -term);
        if (term < 1e-18) {
            break;
        }
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b)
{
    if (a.empty() || b.empty()) {
        throw std::invalid_argument("ks_two_sample: empty sample");
    }
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const auto na = static_cast<long long>(x.size());
    const auto nb = static_cast<long long>(y.size());

    // ECDF gaps in integer units of 1/(na nb): equal gaps give bit-identical D,
    // so tied statistics map to one p-value atom.
    std::size_t i = 0;
    std::size_t j = 0;
    long long widest = 0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) {
            ++i;
        }
        while (j < y.size() && y[j] == v) {
            ++j;
        }
        widest = std::max(widest, std::llabs(static_cast<long long>(i) * nb - static_cast<long long>(j) * na));
    }
    const double d = static_cast<double>(widest) / (static_cast<double>(na) * static_cast<double>(nb));
    const double ne = static_cast<double>(na) * static_cast<double>(nb) / static_cast<double>(na + nb);
    return {d, kolmogorov_survival(std::sqrt(ne) * d)};
}

double uniform_sup_distance(std::span<const double> p_values)
{
    if (p_values.empty()) {
        return 0.0;
    }
    std::vector<double> p(p_values.begin(), p_values.end());
    std::sort(p.begin(), p.end());
    const auto n = static_cast<double>(p.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i + 1 < p.size() && p[i + 1] == p[i]) {
            continue;
        }
        worst = std::max(worst, std::abs(static_cast<double>(i + 1) / n - p[i]));
    }
    return worst;
}

double uniform_step_distance(std::span<const double> p_values)
{
    if (p_values.empty()) {
        return 0.0;
    }
    std::vector<double> p(p_values.begin(), p_values.end());
    std::sort(p.begin(), p.end());
    const auto n = static_cast<double>(p.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        worst = std::max({worst, std::abs(static_cast<double>(i + 1) / n - p[i]),
                          std::abs(p[i] - static_cast<double>(i) / n)});
    }
    return std::max(worst, 1.0 - p.back());
}

namespace {

Index subsample_size(Index n, double fraction)
{
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("subsample fraction must lie in (0, 1]");
    }
    const auto k = static_cast<Index>(std::floor(fraction * static_cast<double>(n)));
    if (k < kMinSubsample) {
        throw InputError("subsample of " + std::to_string(k) + " rows is below the minimum of " +
                         std::to_string(kMinSubsample));
    }
    return k;
}

std::vector<Index> draw_rows(Index n, Index k, Rng& rng)
{
    std::vector<Index> all(static_cast<std::size_t>(n));
    std::iota(all.begin(), all.end(), Index{0});
    std::vector<Index> out;
    out.reserve(static_cast<std::size_t>(k));
    std::sample(all.begin(), all.end(), std::back_inserter(out), k, rng);
    return out;
}

MatrixXd take_rows(const MatrixXd& m, const std::vector<Index>& rows)
{
    MatrixXd out(static_cast<Index>(rows.size()), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Index>(i)) = m.row(rows[i]);
    }
    return out;
}

} // namespace

std::vector<PValueCurve> ks_repeated(const MatrixXd& hist, const MatrixXd& gen, double fraction, Index repetitions,
                                     std::uint64_t seed, int threads)
{
    if (hist.cols() != gen.cols()) {
        throw InputError("ks_repeated: populations differ in dimension");
    }
    if (repetitions < 1) {
        throw std::invalid_argument("ks_repeated: repetitions must be >= 1");
    }
    const Index kh = subsample_size(hist.rows(), fraction);
    const Index kg = subsample_size(gen.rows(), fraction);
    const Index d = hist.cols();
    MatrixXd p(repetitions, d);

    parallel_for(repetitions, threads, [&](Index r, int) {
        Rng rng = make_stream(seed, static_cast<std::uint64_t>(r));
        const auto rows_h = draw_rows(hist.rows(), kh, rng);
        const auto rows_g = draw_rows(gen.rows(), kg, rng);
        std::vector<double> a(static_cast<std::size_t>(kh));
        std::vector<double> b(static_cast<std::size_t>(kg));
        for (Index j = 0; j < d; ++j) {
            for (Index i = 0; i < kh; ++i) {
                a[static_cast<std::size_t>(i)] = hist(rows_h[static_cast<std::size_t>(i)], j);
            }
            for (Index i = 0; i < kg; ++i) {
                b[static_cast<std::size_t>(i)] = gen(rows_g[static_cast<std::size_t>(i)], j);
            }
            p(r, j) = ks_two_sample(a, b).p_value;
        }
    });

    std::vector<PValueCurve> curves(static_cast<std::size_t>(d));
    for (Index j = 0; j < d; ++j) {
        auto& c = curves[static_cast<std::size_t>(j)];
        c.p_values.assign(p.col(j).data(), p.col(j).data() + repetitions);
        std::sort(c.p_values.begin(), c.p_values.end());
        c.repetitions = repetitions;
        c.fraction = fraction;
        c.subsample_hist = kh;
        c.subsample_gen = kg;
    }
    return curves;
}

Autoencoder train_autoencoder(const MatrixXd& train, const AutoencoderConfig& config, std::uint64_t seed)
{
    if (train.rows() < 1 || train.cols() < 1) {
        throw InputError("train_autoencoder: empty training set");
    }
    if (!train.allFinite()) {
        throw InputError("train_autoencoder: non-finite training data");
    }
    if (config.bottleneck < 1 || config.batch_size < 1 || config.iterations < 0 || !(config.learning_rate > 0.0)) {
        throw std::invalid_argument("train_autoencoder: invalid configuration");
    }
    const Index d = train.cols();
    std::vector<nn::LayerSpec> specs;
    Index width = d;
    for (auto h : config.hidden) {
        specs.push_back({width, h, nn::Activation::relu});
        width = h;
    }
    specs.push_back({width, config.bottleneck, nn::Activation::identity});
    width = config.bottleneck;
    for (auto it = config.hidden.rbegin(); it != config.hidden.rend(); ++it) {
        specs.push_back({width, *it, nn::Activation::relu});
        width = *it;
    }
    specs.push_back({width, d, nn::Activation::identity});

    Autoencoder ae;
    ae.seed = seed;
    ae.network = nn::Network::initialize(specs, derive_seed(seed, 0));
    nn::AdamState state = nn::AdamState::for_network(ae.network);
    Rng rng = make_stream(seed, 1);

    const Index n = train.rows();
    const Index batch = std::min(config.batch_size, n);
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;
    MatrixXd xb(batch, d);
    ae.loss_trace.reserve(static_cast<std::size_t>(config.iterations));

    for (Index it = 0; it < config.iterations; ++it) {
        for (Index b = 0; b < batch; ++b) {
            if (cursor == order.size()) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            xb.row(b) = train.row(order[cursor++]);
        }
        const nn::ForwardPass pass = nn::forward(ae.network, xb);
        const MatrixXd residual = pass.output - xb;
        const double scale = static_cast<double>(batch * d);
        const double loss = residual.squaredNorm() / scale;
        if (!std::isfinite(loss)) {
            throw NumericError("autoencoder loss became non-finite at iteration " + std::to_string(it));
        }
        ae.loss_trace.push_back(loss);
        const nn::Gradients g = nn::backward(ae.network, pass, 2.0 * residual / scale);
        nn::adam_step(ae.network, g, state, config.learning_rate);
    }
    return ae;
}

VectorXd reconstruction_errors(const Autoencoder& ae, const MatrixXd& data)
{
    if (data.rows() == 0) {
        return VectorXd(0);
    }
    if (data.cols() != ae.network.input_width()) {
        throw InputError("reconstruction_errors: dimension mismatch");
    }
    const MatrixXd out = nn::predict(ae.network, data);
    return (out - data).rowwise().squaredNorm() / static_cast<double>(data.cols());
}

std::vector<double> recon_error_cdf(const Autoencoder& ae, const MatrixXd& data)
{
    const VectorXd e = reconstruction_errors(ae, data);
    std::vector<double> out(e.data(), e.data() + e.size());
    std::sort(out.begin(), out.end());
    return out;
}

void EcdfReport::add(std::string label, std::vector<double> sorted_errors)
{
    labels.push_back(std::move(label));
    errors.push_back(std::move(sorted_errors));
}

namespace {

double distance(const MatrixXd& x, Index i, const MatrixXd& y, Index j)
{
    return (x.row(i) - y.row(j)).norm();
}

double within_mean(const MatrixXd& x)
{
    double sum = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = i + 1; j < x.rows(); ++j) {
            sum += distance(x, i, x, j);
        }
    }
    const auto n = static_cast<double>(x.rows());
    return 2.0 * sum / (n * n);
}

double cross_mean(const MatrixXd& x, const MatrixXd& y)
{
    double sum = 0.0;
    for (Index i = 0; i < x.rows(); ++i) {
        for (Index j = 0; j < y.rows(); ++j) {
            sum += distance(x, i, y, j);
        }
    }
    return sum / (static_cast<double>(x.rows()) * static_cast<double>(y.rows()));
}

// Total order on matrices, used to fix the summation order of the cross term.
bool canonical_less(const MatrixXd& x, const MatrixXd& y)
{
    if (x.rows() != y.rows()) {
        return x.rows() < y.rows();
    }
    return std::lexicographical_compare(x.data(), x.data() + x.size(), y.data(), y.data() + y.size());
}

void check_energy_inputs(const MatrixXd& a, const MatrixXd& b)
{
    if (a.cols() != b.cols()) {
        throw InputError("energy test: populations differ in dimension");
    }
    if (a.rows() == 0 || b.rows() == 0) {
        throw std::invalid_argument("energy test: empty sample");
    }
}

// Energy statistic of the split {labels == true} vs {labels == false} from the
// pooled distance matrix.
double pooled_statistic(const MatrixXd& dist, const VectorXd& row_sums, const std::vector<Index>& order, Index na,
                        VectorXd& to_a)
{
    const Index n = dist.rows();
    to_a.setZero();
    for (Index k = 0; k < na; ++k) {
        to_a += dist.col(order[static_cast<std::size_t>(k)]);
    }
    double s_aa = 0.0;
    double s_ab = 0.0;
    double s_bb = 0.0;
    for (Index k = 0; k < n; ++k) {
        const Index i = order[static_cast<std::size_t>(k)];
        if (k < na) {
            s_aa += to_a[i];
        } else {
            s_ab += to_a[i];
            s_bb += row_sums[i] - to_a[i];
        }
    }
    const auto fa = static_cast<double>(na);
    const auto fb = static_cast<double>(n - na);
    return 2.0 * s_ab / (fa * fb) - (s_aa / (fa * fa) + s_bb / (fb * fb));
}

} // namespace

double energy_statistic(const MatrixXd& a, const MatrixXd& b)
{
    check_energy_inputs(a, b);
    const double cross = canonical_less(b, a) ? cross_mean(b, a) : cross_mean(a, b);
    return 2.0 * cross - (within_mean(a) + within_mean(b));
}

double energy_test(const MatrixXd& a, const MatrixXd& b, Index permutations, std::uint64_t seed)
{
    check_energy_inputs(a, b);
    if (permutations < 1) {
        throw std::invalid_argument("energy_test: permutations must be >= 1");
    }
    const Index na = a.rows();
    const Index n = a.rows() + b.rows();
    MatrixXd pooled(n, a.cols());
    pooled << a, b;
    MatrixXd dist(n, n);
    for (Index j = 0; j < n; ++j) {
        dist(j, j) = 0.0;
        for (Index i = j + 1; i < n; ++i) {
            dist(i, j) = dist(j, i) = distance(pooled, i, pooled, j);
        }
    }
    const VectorXd row_sums = dist.rowwise().sum();
    VectorXd scratch(n);

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    const double observed = pooled_statistic(dist, row_sums, order, na, scratch);

    Rng rng(seed);
    Index at_least = 0;
    for (Index p = 0; p < permutations; ++p) {
        std::shuffle(order.begin(), order.end(), rng);
        if (pooled_statistic(dist, row_sums, order, na, scratch) >= observed) {
            ++at_least;
        }
    }
    return static_cast<double>(1 + at_least) / static_cast<double>(1 + permutations);
}

PValueCurve energy_repeated(const MatrixXd& hist, const MatrixXd& gen, double fraction, Index repetitions,
                            Index permutations, std::uint64_t seed, int threads)
{
    check_energy_inputs(hist, gen);
    if (repetitions < 1) {
        throw std::invalid_argument("energy_repeated: repetitions must be >= 1");
    }
    const Index kh = subsample_size(hist.rows(), fraction);
    const Index kg = subsample_size(gen.rows(), fraction);
    std::vector<double> p(static_cast<std::size_t>(repetitions));

    parallel_for(repetitions, threads, [&](Index r, int) {
        const std::uint64_t stream = derive_seed(seed, static_cast<std::uint64_t>(r));
        Rng rng(stream);
        const MatrixXd a = take_rows(hist, draw_rows(hist.rows(), kh, rng));
        const MatrixXd b = take_rows(gen, draw_rows(gen.rows(), kg, rng));
        p[static_cast<std::size_t>(r)] = energy_test(a, b, permutations, derive_seed(stream, 1));
    });

    PValueCurve curve;
    curve.p_values = std::move(p);
    std::sort(curve.p_values.begin(), curve.p_values.end());
    curve.repetitions = repetitions;
    curve.fraction = fraction;
    curve.subsample_hist = kh;
    curve.subsample_gen = kg;
    return curve;
}

} // namespace loadgen::validation
