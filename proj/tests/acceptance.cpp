// Acceptance checks. Prints one PASS/FAIL/SKIP line per criterion and exits
// non-zero if any gating criterion fails. Criterion 10 runs only when
// LOADGEN_OPSD_CSV names an hourly load CSV (optional LOADGEN_OPSD_DROP:
// comma-separated columns to discard) and never gates.

#include "loadgen/adequacy.hpp"
#include "loadgen/copula.hpp"
#include "loadgen/cvae.hpp"
#include "loadgen/dataset.hpp"
#include "loadgen/io.hpp"
#include "loadgen/qp.hpp"
#include "loadgen/random.hpp"
#include "loadgen/validation.hpp"

#include "gradcheck.hpp"
#include "synthetic.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace loadgen;
using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

enum class Status { pass, fail, skip };

struct Outcome {
    Status status = Status::fail;
    std::string detail;
};

Outcome verdict(bool ok, std::string detail) { return {ok ? Status::pass : Status::fail, std::move(detail)}; }

std::string fmt(double v)
{
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

MatrixXd uniform_matrix(Index r, Index c, Rng& rng, double lo, double hi)
{
    std::uniform_real_distribution<double> u(lo, hi);
    MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i) {
        for (Index j = 0; j < c; ++j) m(i, j) = u(rng);
    }
    return m;
}

MatrixXd normal_matrix(Index r, Index c, Rng& rng)
{
    std::normal_distribution<double> n;
    MatrixXd m(r, c);
    for (Index i = 0; i < r; ++i) {
        for (Index j = 0; j < c; ++j) m(i, j) = n(rng);
    }
    return m;
}

std::vector<int> random_hours(Index n, Rng& rng)
{
    std::uniform_int_distribution<int> h(0, 23);
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int& v : out) v = h(rng);
    return out;
}

Outcome gradient_correctness()
{
    cvae::ModelConfig cfg;
    cfg.input_dim = 6;
    cfg.hidden = {24, 16};
    cfg.latent_dim = 8;
    cfg.strategy.sigma_mode = cvae::SigmaMode::automatic;
    cfg.strategy.beta = 1.0;
    cvae::TrainedModel m = cvae::initialize(cfg, 101);
    Rng rng(102);
    // Zero initial biases put ReLU inputs exactly on the kink for some rows;
    // jitter so central differences see a differentiable point.
    const VectorXd enc = m.encoder.flatten() + 0.1 * normal_matrix(m.encoder.parameter_count(), 1, rng);
    const VectorXd dec = m.decoder.flatten() + 0.1 * normal_matrix(m.decoder.parameter_count(), 1, rng);
    m.encoder.assign(enc);
    m.decoder.assign(dec);

    const MatrixXd x = uniform_matrix(16, 6, rng, 0.0, 1.0);
    const MatrixXd c = dataset::encode_hours(random_hours(16, rng));
    const MatrixXd eps = normal_matrix(16, 8, rng);
    const cvae::LossGradient g = cvae::batch_loss_gradient(m, x, c, eps);

    VectorXd theta(enc.size() + dec.size());
    theta << enc, dec;
    VectorXd analytic(theta.size());
    analytic << g.encoder.flatten(), g.decoder.flatten();
    auto loss = [&](const VectorXd& t) {
        cvae::TrainedModel copy = m;
        copy.encoder.assign(t.head(enc.size()));
        copy.decoder.assign(t.tail(dec.size()));
        return cvae::batch_loss(copy, x, c, eps).total;
    };
    const auto check = testkit::check_gradient(loss, theta, analytic);
    return verdict(check.share_within_1e4() >= 0.95 && check.worst <= 1e-3,
                   std::to_string(check.parameters) + " parameters, within 1e-4: " +
                       fmt(100.0 * check.share_within_1e4()) + "%, worst " + fmt(check.worst));
}

Outcome kl_closed_form()
{
    Rng rng(201);
    std::uniform_real_distribution<double> mu_dist(-2.0, 2.0);
    std::uniform_real_distribution<double> sigma_dist(0.2, 3.0);
    double worst = 0.0;
    for (int pair = 0; pair < 50; ++pair) {
        const double mu = mu_dist(rng);
        const double sigma = sigma_dist(rng);
        Rng draws = make_stream(202, static_cast<std::uint64_t>(pair));
        std::normal_distribution<double> normal;
        double acc = 0.0;
        const int n = 1000000;
        for (int k = 0; k < n; ++k) {
            const double e = normal(draws);
            const double z = mu + sigma * e;
            // log q(z) - log p(z) for q = N(mu, sigma^2), p = N(0, 1).
            acc += -std::log(sigma) - 0.5 * e * e + 0.5 * z * z;
        }
        const double mc = acc / n;
        const double closed = cvae::kl_loss(MatrixXd::Constant(1, 1, mu), MatrixXd::Constant(1, 1, sigma));
        worst = std::max(worst, std::abs(closed - mc) / std::abs(mc));
    }
    return verdict(worst <= 0.02, "worst relative deviation " + fmt(worst) + " over 50 pairs");
}

Outcome qp_oracle()
{
    Rng rng(301);
    std::uniform_real_distribution<double> mw(0.0, 1000.0);
    std::uniform_real_distribution<double> cap(0.0, 500.0);
    double worst_c = 0.0;
    double worst_kkt = 0.0;
    double worst_violation = 0.0;
    int not_optimal = 0;
    for (int k = 0; k < 100; ++k) {
        VectorXd d(2);
        VectorXd g(2);
        d << mw(rng), mw(rng);
        g << mw(rng), mw(rng);
        const std::vector<qp::Edge> edges{{0, 1, -cap(rng), cap(rng)}};
        const qp::QPProblem p = qp::build_curtailment_qp(d, g, edges);
        const qp::QPSolution s = qp::solve(p, 1e-7);
        not_optimal += s.status == qp::SolveStatus::optimal ? 0 : 1;
        worst_kkt = std::max(worst_kkt, s.kkt_residual);
        const qp::GridSolution o = qp::brute_force_oracle(p, 0.1);
        worst_c = std::max(worst_c, (s.curtailment - o.curtailment).cwiseAbs().maxCoeff());

        const double f = s.flow(0);
        double v = std::max({0.0, edges[0].lower - f, f - edges[0].upper});
        const VectorXd net = qp::net_import(2, edges, s.flow);
        for (Index i = 0; i < 2; ++i) {
            v = std::max({v, -s.curtailment(i), s.curtailment(i) - d(i), d(i) - g(i) - net(i) - s.curtailment(i),
                          net(i) + s.curtailment(i) - d(i)});
        }
        worst_violation = std::max(worst_violation, v);
    }
    // Feasibility is checked in MW against the solver's per-unit tolerance.
    const bool ok = not_optimal == 0 && worst_c <= 0.2 && worst_kkt <= 1e-7 && worst_violation <= 1e-7 * 1000.0;
    return verdict(ok, "max |c - oracle| " + fmt(worst_c) + " MW, max KKT " + fmt(worst_kkt) +
                           ", max violation " + fmt(worst_violation) + " MW, non-optimal " +
                           std::to_string(not_optimal));
}

Outcome exact_lole()
{
    adequacy::NetworkModel net;
    net.areas = {"single"};
    adequacy::GenerationFleet fleet;
    fleet.areas = {{100, 10, 0.83}};
    adequacy::LoleOptions opt;
    opt.samples = 200000;
    opt.seed = 401;
    const adequacy::LoleReport r = adequacy::estimate_lole(net, fleet, MatrixXd::Constant(1, 1, 850.0), opt);
    const std::vector<std::pair<double, double>> demand{{850.0, 1.0}};
    const double exact = adequacy::exact_lole_single_node(fleet.areas[0], demand, opt.threshold);
    const double z = std::abs(r.lole(0) - exact) / r.standard_error(0);
    return verdict(z <= 3.0, "MC " + fmt(r.lole(0)) + " h/yr vs exact " + fmt(exact) + " (" + fmt(z) + " SE)");
}

Outcome null_calibration()
{
    const MatrixXd hist = testkit::correlated_gaussian(20000, 501);
    const MatrixXd gen = testkit::correlated_gaussian(20000, 502);
    const unsigned hw = std::thread::hardware_concurrency();
    const int threads = static_cast<int>(hw == 0 ? 1 : hw);
    const auto ks = validation::ks_repeated(hist, gen, 0.005, 2000, 503, threads);
    double worst_ks = 0.0;
    double worst_ks_step = 0.0;
    for (const auto& curve : ks) {
        worst_ks = std::max(worst_ks, curve.sup_distance());
        worst_ks_step = std::max(worst_ks_step, validation::uniform_step_distance(curve.p_values));
    }
    const auto energy = validation::energy_repeated(hist, gen, 0.005, 500, 200, 504, threads);
    const double e = energy.sup_distance();
    // Verdict on the distance at attained p-values; the step distance across
    // the gaps between atoms is reported alongside.
    return verdict(worst_ks < 0.05 && e < 0.07,
                   "subsample " + std::to_string(ks.front().subsample_hist) + ", K-S worst sup-distance " +
                       fmt(worst_ks) + " over 8 dims (step " + fmt(worst_ks_step) + "), energy " + fmt(e) +
                       " (step " + fmt(validation::uniform_step_distance(energy.p_values)) + ")");
}

struct Recovery {
    testkit::HourlySample data;
    cvae::TrainedModel model;
    MatrixXd condition;
};

Recovery train_recovery_model()
{
    Recovery r{testkit::hourly_mixture(10000, 601), {}, {}};
    const dataset::NormalizationSpec norm = dataset::fit_minmax(r.data.values);
    r.condition = dataset::encode_hours(r.data.hours);
    cvae::ModelConfig cfg;
    cfg.input_dim = 5;
    cfg.strategy.sigma_mode = cvae::SigmaMode::automatic;
    cfg.strategy.beta = 1.0;
    cfg.strategy.noisy = true;
    r.model = cvae::train(dataset::normalize(r.data.values, norm), r.condition, cfg, 602);
    r.model.normalization = norm;
    return r;
}

Outcome synthetic_recovery(const Recovery& r)
{
    const MatrixXd g = dataset::denormalize(cvae::generate(r.model, r.condition, 603, true), r.model.normalization);
    const VectorXd range = r.model.normalization.max - r.model.normalization.min;
    const VectorXd mean_err =
        ((g.colwise().mean() - r.data.values.colwise().mean()).transpose().array() / range.array()).abs();
    const double corr_dev = (testkit::correlation(g) - testkit::correlation(r.data.values)).cwiseAbs().maxCoeff();
    return verdict(mean_err.maxCoeff() < 0.05 && corr_dev < 0.15,
                   "max mean error " + fmt(mean_err.maxCoeff()) + " of range, max correlation deviation " +
                       fmt(corr_dev));
}

Outcome noise_ordering(const Recovery& r)
{
    int holds = 0;
    std::string detail;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const MatrixXd noisy = cvae::generate(r.model, r.condition, 700 + seed, true);
        const MatrixXd plain = cvae::generate(r.model, r.condition, 700 + seed, false);
        const double cn = testkit::mean_pairwise_correlation(noisy);
        const double cp = testkit::mean_pairwise_correlation(plain);
        holds += cp >= cn ? 1 : 0;
        detail += (seed > 1 ? ", " : "") + fmt(cp) + " vs " + fmt(cn);
    }
    return verdict(holds == 5, std::to_string(holds) + "/5 (noise-free vs noisy: " + detail + ")");
}

Outcome strategy_equivalence()
{
    Rng rng(801);
    std::uniform_real_distribution<double> s_dist(0.05, 2.0);
    double worst = 0.0;
    for (int batch = 0; batch < 20; ++batch) {
        const double s = s_dist(rng);
        const MatrixXd x = uniform_matrix(32, 6, rng, 0.0, 1.0);
        const MatrixXd mu = uniform_matrix(32, 6, rng, -0.5, 1.5);
        const MatrixXd ga = cvae::recon_loss_auto_grad_mu(x, mu, MatrixXd::Constant(32, 6, s), cvae::Reduction::batch_mean);
        const MatrixXd gf = cvae::recon_loss_fixed_grad_mu(x, mu, s, cvae::Reduction::batch_mean);
        worst = std::max(worst, (ga - gf).cwiseAbs().maxCoeff());
    }
    return verdict(worst <= 1e-10, "max gradient difference " + fmt(worst) + " over 20 batches");
}

int run_cli(const std::string& args, const fs::path& log)
{
    const std::string cmd = std::string(LOADGEN_CLI) + " " + args + " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write_toy_inputs(const fs::path& dir)
{
    const auto s = testkit::hourly_mixture(12 * 168, 901);
    std::ofstream csv(dir / "loads.csv");
    csv.precision(10);
    csv << "utc_timestamp,AA,BB,CC,DD,EE\n";
    for (Index i = 0; i < s.values.rows(); ++i) {
        csv << dataset::format_timestamp(dataset::parse_timestamp("2016-01-04T00:00:00Z") +
                                         std::chrono::hours(i));
        for (Index j = 0; j < s.values.cols(); ++j) csv << ',' << s.values(i, j);
        csv << '\n';
    }
    std::ofstream sys(dir / "system.json");
    sys << R"({"areas": [{"name": "AA", "conventional_mw": 1100, "wind_mw": 400},
                         {"name": "BB", "conventional_mw": 900, "unit_size_mw": 90},
                         {"name": "CC", "conventional_mw": 700},
                         {"name": "DD", "conventional_mw": 1400},
                         {"name": "EE", "conventional_mw": 500}],
              "links": [{"from": "AA", "to": "BB", "forward_mw": 100, "backward_mw": 80},
                        {"from": "BB", "to": "CC", "forward_mw": 60, "backward_mw": 60},
                        {"from": "CC", "to": "DD", "forward_mw": 50, "backward_mw": 50}]})";
    std::ofstream cfg(dir / "run.json");
    cfg << R"({"seed": 42,
              "train": {"iterations": 2000},
              "generate": {"match_training_hours": true},
              "validate": {"fraction": 0.05, "ks_reps": 200, "energy_reps": 50, "ae_iterations": 1000},
              "adequacy": {"samples": 50000, "load_source": "checkpoint", "pool_size": 5000}})";
}

// Returns the failing step, or an empty string.
std::string run_pipeline(const fs::path& inputs, const fs::path& out)
{
    fs::create_directories(out);
    const std::string cfg = " --config " + (inputs / "run.json").string();
    const fs::path log = out / "log.txt";
    const auto p = [&](const std::string& rel) { return (out / rel).string(); };
    if (run_cli("ingest --input " + (inputs / "loads.csv").string() + " --out " + p("data") + cfg, log) != 0)
        return "ingest";
    if (run_cli("train --train " + p("data/train.csv") + " --norm " + p("data/normalization.json") + " --out " +
                    p("model") + cfg,
                log) != 0)
        return "train";
    if (run_cli("generate --model " + p("model/model.json") + " --out " + p("generated.csv") + cfg, log) != 0)
        return "generate";
    if (run_cli("validate --hist " + p("data/train.csv") + " --gen " + p("generated.csv") + " --test " +
                    p("data/test.csv") + " --norm " + p("data/normalization.json") + " --out " + p("validation") +
                    cfg,
                log) != 0)
        return "validate";
    if (run_cli("adequacy --system " + (inputs / "system.json").string() + " --model " + p("model/model.json") +
                    " --out " + p("adequacy") + cfg,
                log) != 0)
        return "adequacy";
    return {};
}

Outcome reproducibility()
{
    const fs::path root = fs::temp_directory_path() / ("loadgen_acceptance_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    write_toy_inputs(root);
    for (const char* run : {"first", "second"}) {
        const std::string failed = run_pipeline(root, root / run);
        if (!failed.empty()) {
            const std::string log = slurp(root / run / "log.txt");
            fs::remove_all(root);
            return {Status::fail, std::string(run) + " run failed at " + failed + ": " + log};
        }
    }
    const std::vector<std::string> outputs{"data/train.csv",
                                           "data/test.csv",
                                           "model/loss_trace.csv",
                                           "generated.csv",
                                           "validation/ks_pvalues.csv",
                                           "validation/energy_pvalues.csv",
                                           "validation/ae_errors.csv",
                                           "adequacy/lole.csv"};
    std::string differing;
    for (const auto& f : outputs) {
        const std::string a = slurp(root / "first" / f);
        if (a.empty() || a != slurp(root / "second" / f)) differing += " " + f;
    }
    fs::remove_all(root);
    return verdict(differing.empty(), differing.empty()
                                          ? std::to_string(outputs.size()) + " CSV outputs byte-identical"
                                          : "differing or missing:" + differing);
}

Outcome replication_hook()
{
    const char* path = std::getenv("LOADGEN_OPSD_CSV");
    if (path == nullptr || *path == '\0') return {Status::skip, "set LOADGEN_OPSD_CSV to run"};
    std::vector<std::string> drop;
    if (const char* d = std::getenv("LOADGEN_OPSD_DROP"); d != nullptr && *d != '\0') drop = io::split(d, ',');

    const dataset::LoadDataset all = dataset::load_csv(path, drop).dataset;
    const dataset::Split split = dataset::split_weekly_blocks(all, 0.2, 1001);
    const dataset::NormalizationSpec norm = dataset::fit_minmax(split.train);
    const MatrixXd x = dataset::normalize(split.train.values, norm);
    const std::vector<int> hours = dataset::hours_of_day(split.train);
    const MatrixXd c = dataset::encode_hours(hours);

    cvae::ModelConfig cfg;
    cfg.input_dim = x.cols();
    const cvae::TrainedModel cvae_model = cvae::train(x, c, cfg, 1002);
    cvae::ModelConfig vae_cfg = cfg;
    vae_cfg.condition_dim = 0;
    const cvae::TrainedModel vae_model = cvae::train(x, MatrixXd(x.rows(), 0), vae_cfg, 1003);

    struct Curve {
        std::string name;
        double ks = 0.0;
        double energy = 0.0;
    };
    auto score = [&](std::string name, const MatrixXd& gen) {
        Curve out{std::move(name)};
        for (const auto& k : validation::ks_repeated(x, gen, 0.005, 500, 1004)) out.ks = std::max(out.ks, k.sup_distance());
        out.energy = validation::energy_repeated(x, gen, 0.005, 200, 200, 1005).sup_distance();
        return out;
    };
    const Curve noisy = score("cvae-noisy", cvae::generate(cvae_model, c, 1006, true));
    const Curve plain = score("cvae-noise-free", cvae::generate(cvae_model, c, 1006, false));
    const Curve vae = score("vae-noisy", cvae::generate(vae_model, x.rows(), 1007, true));

    std::string detail;
    for (const Curve& k : {noisy, plain, vae}) {
        detail += k.name + " ks " + fmt(k.ks) + " energy " + fmt(k.energy) + "; ";
    }
    const bool noise_order = noisy.ks <= plain.ks && noisy.energy <= plain.energy;
    const bool condition_order = noisy.ks <= vae.ks && noisy.energy <= vae.energy;
    detail += std::string("noisy beats noise-free: ") + (noise_order ? "yes" : "no") +
              ", CVAE at least VAE: " + (condition_order ? "yes" : "no");
    return verdict(noise_order && condition_order, detail);
}

struct Criterion {
    int id;
    const char* name;
    double limit_seconds; // 0: no runtime bound
    bool gating;
    std::function<Outcome()> check;
};

} // namespace

int main()
{
    std::cout.setf(std::ios::unitbuf);
    std::optional<Recovery> recovery;
    double recovery_seconds = 0.0;
    auto recovery_model = [&]() -> const Recovery& {
        if (!recovery) {
            const auto t0 = std::chrono::steady_clock::now();
            recovery = train_recovery_model();
            recovery_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        }
        return *recovery;
    };

    const std::vector<Criterion> criteria{
        {1, "gradient correctness", 30, true, gradient_correctness},
        {2, "KL closed form vs Monte Carlo", 60, true, kl_closed_form},
        {3, "QP vs brute-force oracle", 20, true, qp_oracle},
        {4, "exact LOLE oracle", 10, true, exact_lole},
        {5, "test calibration under the null", 900, true, null_calibration},
        {6, "synthetic recovery", 300, true, [&] { return synthetic_recovery(recovery_model()); }},
        {7, "noise ordering", 0, true, [&] { return noise_ordering(recovery_model()); }},
        {8, "strategy objective equivalence", 0, true, strategy_equivalence},
        {9, "pipeline reproducibility", 0, true, reproducibility},
        {10, "replication hook", 0, false, replication_hook},
    };

    int gating_failures = 0;
    for (const Criterion& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.check();
        } catch (const std::exception& e) {
            out = {Status::fail, std::string("exception: ") + e.what()};
        }
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (out.status == Status::pass && c.limit_seconds > 0 && seconds > c.limit_seconds) {
            out = {Status::fail, out.detail + "; runtime over " + fmt(c.limit_seconds) + " s"};
        }
        const char* label = out.status == Status::pass ? "PASS" : out.status == Status::skip ? "SKIP" : "FAIL";
        std::cout << label << "  criterion " << c.id << ": " << c.name << " (" << out.detail << ") [" << fmt(seconds)
                  << " s";
        if (c.id == 6) std::cout << ", training " << fmt(recovery_seconds) << " s";
        std::cout << "]" << (c.gating ? "" : " (not gating)") << '\n';
        if (c.gating && out.status == Status::fail) ++gating_failures;
    }
    std::cout << (gating_failures == 0 ? "acceptance: all gating criteria passed\n"
                                       : "acceptance: " + std::to_string(gating_failures) +
                                             " gating criteria failed\n");
    return gating_failures == 0 ? 0 : 1;
}
