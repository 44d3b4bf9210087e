#include "commands.hpp"

#include "run_config.hpp"

#include "loadgen/adequacy.hpp"
#include "loadgen/copula.hpp"
#include "loadgen/cvae.hpp"
#include "loadgen/dataset.hpp"
#include "loadgen/error.hpp"
#include "loadgen/io.hpp"
#include "loadgen/random.hpp"
#include "loadgen/validation.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

namespace loadgen::cli {

namespace fs = std::filesystem;
using Eigen::Index;
using Eigen::MatrixXd;

namespace {

// Per-purpose seed streams under a command's master seed.
enum Stream : std::uint64_t { kPool = 1, kKs = 11, kEnergy = 12, kAutoencoder = 13 };

void write_file(const fs::path& path, const std::string& text)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw InputError("cannot write " + path.string());
    }
}

void write_json(const fs::path& path, const nlohmann::json& j)
{
    write_file(path, j.dump(2) + "\n");
}

void write_table(const fs::path& path, const std::string& comment, const io::Table& table)
{
    std::ostringstream out;
    out << comment << '\n';
    io::write_table(out, table);
    write_file(path, out.str());
}

nlohmann::json read_json(const fs::path& path)
{
    try {
        return nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

// Columns of `values` (named `have`) rearranged into the order `want`.
MatrixXd select_columns(const MatrixXd& values, const std::vector<std::string>& have,
                        const std::vector<std::string>& want, const std::string& source)
{
    MatrixXd out(values.rows(), static_cast<Index>(want.size()));
    for (std::size_t k = 0; k < want.size(); ++k) {
        const auto it = std::find(have.begin(), have.end(), want[k]);
        if (it == have.end()) {
            throw InputError(source + ": missing column '" + want[k] + "'");
        }
        out.col(static_cast<Index>(k)) = values.col(static_cast<Index>(it - have.begin()));
    }
    return out;
}

dataset::NormalizationSpec read_normalization(const fs::path& path, const std::vector<std::string>& areas)
{
    const nlohmann::json j = read_json(path);
    try {
        if (j.contains("areas") && j.at("areas").get<std::vector<std::string>>() != areas) {
            throw InputError(path.string() + ": normalization areas do not match the data columns");
        }
        auto spec = dataset::normalization_from_json(j);
        if (spec.dims() != static_cast<Index>(areas.size())) {
            throw InputError(path.string() + ": normalization has the wrong dimension");
        }
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

cvae::TrainedModel read_model(const fs::path& path)
{
    const nlohmann::json j = read_json(path);
    try {
        return cvae::model_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

std::vector<int> hours_for(const cvae::TrainedModel& model, Index count)
{
    const Index total = std::accumulate(model.hour_histogram.begin(), model.hour_histogram.end(), Index{0});
    return cvae::schedule_hours(model.hour_histogram, count < 0 ? total : count);
}

MatrixXd generate_mw(const cvae::TrainedModel& model, const std::vector<int>& hours, std::uint64_t seed,
                     std::optional<bool> noisy)
{
    const MatrixXd conditions =
        model.config.condition_dim > 0 ? dataset::encode_hours(hours) : MatrixXd(static_cast<Index>(hours.size()), 0);
    return dataset::denormalize(cvae::generate(model, conditions, seed, noisy), model.normalization);
}

void report(const std::vector<std::string>& diagnostics)
{
    for (const auto& d : diagnostics) {
        std::cerr << "note: " << d << '\n';
    }
}

// --- ingest -----------------------------------------------------------------

struct Ingest {
    std::string input;
    std::vector<std::string> drop;
    double test_fraction = 0.2;
    std::uint64_t seed = 1;
    std::string out = ".";

    void define(Command& c)
    {
        c.option("input", input, "Hourly load CSV (timestamp column, one column per area)", Role::path);
        c.option("drop", drop, "Area columns to discard");
        c.option("test-fraction", test_fraction, "Share of weekly blocks held out for testing")
            ->check(CLI::Range(0.0, 1.0));
        c.option("seed", seed, "Master seed");
        c.option("out", out, "Output directory", Role::path);
    }

    void run(const Command& c) const
    {
        if (input.empty()) {
            throw InputError("ingest: --input is required");
        }
        const dataset::LoadResult loaded = dataset::load_csv(input, drop);
        report(loaded.diagnostics);
        const dataset::Split split = dataset::split_weekly_blocks(loaded.dataset, test_fraction, seed);
        const dataset::NormalizationSpec norm = dataset::fit_minmax(split.train);

        const fs::path dir(out);
        const std::string comment = provenance_comment(c, seed);
        for (const auto& [name, part] : {std::pair{"train.csv", &split.train}, std::pair{"test.csv", &split.test}}) {
            std::ostringstream text;
            text << comment << '\n';
            dataset::write_csv(text, *part);
            write_file(dir / name, text.str());
        }

        nlohmann::json nj = dataset::to_json(norm);
        nj["areas"] = split.train.areas;
        nj["provenance"] = provenance(c, seed);
        write_json(dir / "normalization.json", nj);

        std::vector<std::string> degenerate;
        for (Index k : norm.degenerate_dims()) {
            degenerate.push_back(split.train.areas[static_cast<std::size_t>(k)]);
        }
        write_json(dir / "summary.json", {{"rows_read", loaded.dataset.rows() + static_cast<Index>(loaded.dropped_rows)},
                                          {"dropped_rows", loaded.dropped_rows},
                                          {"train", dataset::summarize(split.train)},
                                          {"test", dataset::summarize(split.test)},
                                          {"degenerate_areas", degenerate},
                                          {"provenance", provenance(c, seed)}});
        std::cerr << "ingest: " << split.train.rows() << " train rows, " << split.test.rows() << " test rows\n";
    }
};

// --- train ------------------------------------------------------------------

struct Train {
    std::string train;
    std::string norm;
    std::string out = ".";
    std::string sigma_mode = "auto";
    double beta = 1.0;
    bool conditional = true;
    bool noisy = true;
    std::vector<Index> hidden{24, 16};
    Index latent = 8;
    Index batch_size = 64;
    Index iterations = 20000;
    double learning_rate = 1e-4;
    std::uint64_t seed = 1;

    void define(Command& c)
    {
        c.option("train", train, "Training split CSV", Role::path);
        c.option("norm", norm, "normalization.json from ingest (default: fit on --train)", Role::path);
        c.option("out", out, "Output directory", Role::path);
        c.option("sigma-mode", sigma_mode, "Output noise: auto or fixed:<s>");
        c.option("beta", beta, "Weight of the KL term");
        c.flag("conditional", "unconditional", conditional, "Condition on hour of day");
        c.flag("noisy", "noise-free", noisy, "Default generation mode stored in the checkpoint");
        c.option("hidden", hidden, "Hidden layer widths");
        c.option("latent", latent, "Latent dimension");
        c.option("batch-size", batch_size, "Minibatch size");
        c.option("iterations", iterations, "Optimizer steps");
        c.option("learning-rate", learning_rate, "Adam step size");
        c.option("seed", seed, "Master seed");
    }

    void run(const Command& c) const
    {
        if (train.empty()) {
            throw InputError("train: --train is required");
        }
        const dataset::LoadDataset ds = dataset::load_csv(train).dataset;
        const dataset::NormalizationSpec spec = norm.empty() ? dataset::fit_minmax(ds) : read_normalization(norm, ds.areas);
        const std::vector<int> hours = dataset::hours_of_day(ds);

        cvae::ModelConfig cfg;
        cfg.input_dim = ds.dims();
        cfg.condition_dim = conditional ? dataset::kConditionDims : 0;
        cfg.hidden = hidden;
        cfg.latent_dim = latent;
        cfg.batch_size = batch_size;
        cfg.iterations = iterations;
        cfg.learning_rate = learning_rate;
        cvae::StrategyConfig base;
        base.noisy = noisy;
        base.beta = beta;
        cfg.strategy = cvae::StrategyConfig::parse_sigma(sigma_mode, base);

        const MatrixXd x = dataset::normalize(ds.values, spec);
        const MatrixXd conditions = conditional ? dataset::encode_hours(hours) : MatrixXd(x.rows(), 0);
        const fs::path dir(out);

        auto finish = [&](cvae::TrainedModel model) {
            model.normalization = spec;
            model.areas = ds.areas;
            model.hour_histogram = cvae::hour_histogram(hours);
            return model;
        };
        cvae::TrainedModel model;
        try {
            model = finish(cvae::train(x, conditions, cfg, seed));
        } catch (const cvae::TrainingDiverged& e) {
            nlohmann::json j = cvae::to_json(finish(e.last_good()));
            j["provenance"] = provenance(c, seed);
            write_json(dir / "model_last_good.json", j);
            throw;
        }

        nlohmann::json j = cvae::to_json(model);
        j["provenance"] = provenance(c, seed);
        write_json(dir / "model.json", j);

        io::Table trace;
        trace.label_header = "iteration";
        trace.columns = {"loss"};
        trace.values.resize(static_cast<Index>(model.loss_trace.size()), 1);
        for (std::size_t i = 0; i < model.loss_trace.size(); ++i) {
            trace.labels.push_back(std::to_string(i + 1));
            trace.values(static_cast<Index>(i), 0) = model.loss_trace[i];
        }
        write_table(dir / "loss_trace.csv", provenance_comment(c, seed), trace);
        if (!model.loss_trace.empty()) {
            std::cerr << "train: final loss " << model.loss_trace.back() << '\n';
        }
    }
};

// --- generate ---------------------------------------------------------------

struct Generate {
    std::string model;
    std::string train;
    bool noisy = true;
    CLI::Option* noisy_flag = nullptr;
    Index count = -1;
    int hour = -1;
    bool match_training_hours = false;
    bool clip_zero = false;
    std::uint64_t seed = 1;
    std::string out = "generated.csv";

    void define(Command& c)
    {
        c.option("model", model, "Checkpoint path, or 'copula' to sample the Gaussian copula of --train",
                 Role::path);
        c.option("train", train, "Training split CSV (copula backend)", Role::path);
        noisy_flag = c.flag("noisy", "noise-free", noisy, "Sample the output noise (default: as trained)");
        c.option("count", count, "Number of samples (default: training size)");
        c.option("hour", hour, "Generate every sample at this hour of day")->check(CLI::Range(-1, 23));
        c.flag("match-training-hours", "no-match-training-hours", match_training_hours,
               "Reproduce the training set's hour-of-day histogram exactly");
        c.flag("clip-zero", "no-clip-zero", clip_zero, "Clamp negative loads to zero");
        c.option("seed", seed, "Master seed");
        c.option("out", out, "Output CSV", Role::path);
    }

    void run(Command& c, const RunConfig& config)
    {
        if (model.empty()) {
            throw InputError("generate: --model is required");
        }
        if (match_training_hours && (hour >= 0 || count >= 0)) {
            throw InputError("generate: --match-training-hours excludes --hour and --count");
        }
        const bool explicit_noise = noisy_flag->count() > 0 || config.lookup(c.name(), "noisy") != nullptr;

        std::vector<int> hours;
        std::vector<std::string> areas;
        MatrixXd values;
        if (model == "copula") {
            if (train.empty()) {
                throw InputError("generate: the copula backend needs --train");
            }
            if (hour >= 0) {
                throw InputError("generate: the copula backend is unconditional; --hour is not supported");
            }
            const dataset::LoadDataset ds = dataset::load_csv(train).dataset;
            const auto histogram = cvae::hour_histogram(dataset::hours_of_day(ds));
            hours = cvae::schedule_hours(histogram, count < 0 ? ds.rows() : count);
            values = copula::sample_copula(copula::fit_gaussian_copula(ds.values), static_cast<Index>(hours.size()),
                                           seed);
            areas = ds.areas;
        } else {
            const cvae::TrainedModel m = read_model(model);
            if (hour >= 0) {
                if (count < 0) {
                    throw InputError("generate: --hour needs --count");
                }
                hours.assign(static_cast<std::size_t>(count), hour);
            } else {
                hours = hours_for(m, count);
            }
            if (!explicit_noise) {
                noisy = m.config.strategy.noisy;
            }
            values = generate_mw(m, hours, seed, noisy);
            areas = m.areas;
        }
        if (clip_zero) {
            values = values.cwiseMax(0.0);
        }

        io::Table table;
        table.label_header = "hour";
        table.columns = areas;
        table.values = std::move(values);
        for (int h : hours) {
            table.labels.push_back(std::to_string(h));
        }
        write_table(out, provenance_comment(c, seed), table);
        std::cerr << "generate: " << hours.size() << " samples\n";
    }
};

// --- validate ---------------------------------------------------------------

struct Validate {
    std::string hist;
    std::string gen;
    std::string norm;
    std::string test;
    double fraction = 0.005;
    Index ks_reps = 5000;
    Index energy_reps = 1000;
    Index permutations = 200;
    Index ae_iterations = 20000;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out = ".";

    void define(Command& c)
    {
        c.option("hist", hist, "Historical (training) CSV", Role::path);
        c.option("gen", gen, "Generated CSV", Role::path);
        c.option("norm", norm, "normalization.json (default: fit on --hist)", Role::path);
        c.option("test", test, "Held-out CSV for the autoencoder overfitting screen", Role::path);
        c.option("fraction", fraction, "Subsample share per repetition")->check(CLI::Range(0.0, 1.0));
        c.option("ks-reps", ks_reps, "K-S repetitions");
        c.option("energy-reps", energy_reps, "Energy-test repetitions");
        c.option("permutations", permutations, "Permutations per energy test");
        c.option("ae-iterations", ae_iterations, "Autoencoder optimizer steps (0 skips the test)");
        c.option("seed", seed, "Master seed");
        c.option("threads", threads, "Worker threads", Role::runtime)->check(CLI::PositiveNumber);
        c.option("out", out, "Output directory", Role::path);
    }

    void run(const Command& c) const
    {
        if (hist.empty() || gen.empty()) {
            throw InputError("validate: --hist and --gen are required");
        }
        const io::Table h = io::read_table(fs::path(hist));
        const io::Table g = io::read_table(fs::path(gen));
        const MatrixXd gen_mw = select_columns(g.values, g.columns, h.columns, gen);
        if (!h.values.allFinite() || !gen_mw.allFinite()) {
            throw InputError("validate: populations contain missing values");
        }
        const dataset::NormalizationSpec spec = norm.empty() ? dataset::fit_minmax(h.values)
                                                             : read_normalization(norm, h.columns);
        const MatrixXd H = dataset::normalize(h.values, spec);
        const MatrixXd G = dataset::normalize(gen_mw, spec);

        const auto ks = validation::ks_repeated(H, G, fraction, ks_reps, derive_seed(seed, kKs), threads);
        const auto energy = validation::energy_repeated(H, G, fraction, energy_reps, permutations,
                                                        derive_seed(seed, kEnergy), threads);

        const fs::path dir(out);
        const std::string comment = provenance_comment(c, seed);
        io::Table kt;
        kt.label_header = "rank";
        kt.columns = h.columns;
        kt.values.resize(ks_reps, static_cast<Index>(ks.size()));
        for (Index r = 0; r < ks_reps; ++r) {
            kt.labels.push_back(std::to_string(r + 1));
            for (std::size_t j = 0; j < ks.size(); ++j) {
                kt.values(r, static_cast<Index>(j)) = ks[j].p_values[static_cast<std::size_t>(r)];
            }
        }
        write_table(dir / "ks_pvalues.csv", comment, kt);

        io::Table et;
        et.label_header = "rank";
        et.columns = {"p_value"};
        et.values.resize(energy_reps, 1);
        for (Index r = 0; r < energy_reps; ++r) {
            et.labels.push_back(std::to_string(r + 1));
            et.values(r, 0) = energy.p_values[static_cast<std::size_t>(r)];
        }
        write_table(dir / "energy_pvalues.csv", comment, et);

        nlohmann::json summary;
        nlohmann::json ks_json = nlohmann::json::object();
        for (std::size_t j = 0; j < ks.size(); ++j) {
            ks_json[h.columns[j]] = {{"sup_distance", ks[j].sup_distance()},
                                     {"step_distance", validation::uniform_step_distance(ks[j].p_values)}};
        }
        summary["ks"] = {{"repetitions", ks_reps},
                         {"fraction", fraction},
                         {"subsample_hist", ks.empty() ? 0 : ks.front().subsample_hist},
                         {"subsample_gen", ks.empty() ? 0 : ks.front().subsample_gen},
                         {"seed", derive_seed(seed, kKs)},
                         {"areas", ks_json}};
        summary["energy"] = {{"repetitions", energy_reps},
                             {"permutations", permutations},
                             {"fraction", fraction},
                             {"seed", derive_seed(seed, kEnergy)},
                             {"sup_distance", energy.sup_distance()},
                             {"step_distance", validation::uniform_step_distance(energy.p_values)}};

        if (ae_iterations > 0) {
            validation::AutoencoderConfig ae_cfg;
            ae_cfg.iterations = ae_iterations;
            const auto ae = validation::train_autoencoder(H, ae_cfg, derive_seed(seed, kAutoencoder));
            validation::EcdfReport errors;
            errors.add("historical", validation::recon_error_cdf(ae, H));
            if (!test.empty()) {
                const io::Table t = io::read_table(fs::path(test));
                const MatrixXd test_mw = select_columns(t.values, t.columns, h.columns, test);
                errors.add("test", validation::recon_error_cdf(ae, dataset::normalize(test_mw, spec)));
            }
            errors.add("generated", validation::recon_error_cdf(ae, G));

            io::Table at;
            at.label_header = "population";
            at.columns = {"error"};
            Index rows = 0;
            for (const auto& e : errors.errors) {
                rows += static_cast<Index>(e.size());
            }
            at.values.resize(rows, 1);
            Index r = 0;
            nlohmann::json ae_json = nlohmann::json::object();
            for (std::size_t p = 0; p < errors.labels.size(); ++p) {
                const auto& e = errors.errors[p];
                for (double v : e) {
                    at.labels.push_back(errors.labels[p]);
                    at.values(r++, 0) = v;
                }
                ae_json[errors.labels[p]] = {{"count", e.size()},
                                             {"median", e.empty() ? 0.0 : e[e.size() / 2]},
                                             {"mean", e.empty() ? 0.0
                                                                : std::accumulate(e.begin(), e.end(), 0.0) /
                                                                      static_cast<double>(e.size())}};
            }
            write_table(dir / "ae_errors.csv", comment, at);
            summary["autoencoder"] = {{"iterations", ae_iterations},
                                      {"seed", derive_seed(seed, kAutoencoder)},
                                      {"final_loss", ae.loss_trace.empty() ? 0.0 : ae.loss_trace.back()},
                                      {"populations", ae_json}};
        }
        summary["provenance"] = provenance(c, seed);
        write_json(dir / "summary.json", summary);
        std::cerr << "validate: energy sup-distance " << energy.sup_distance() << '\n';
    }
};

// --- adequacy ---------------------------------------------------------------

struct Adequacy {
    std::string system;
    std::string load_source = "historical";
    std::string loads;
    std::string model;
    std::string train;
    Index pool_size = 100000;
    Index samples = 1000000;
    std::uint64_t seed = 1;
    double threshold = adequacy::kDefaultThreshold;
    int threads = 1;
    std::string out = ".";

    void define(Command& c)
    {
        c.option("system", system, "Network and fleet description (JSON)", Role::path);
        c.option("load-source", load_source, "historical, checkpoint or copula")
            ->check(CLI::IsMember({"historical", "checkpoint", "copula"}));
        c.option("loads", loads, "Load CSV in MW (historical source)", Role::path);
        c.option("model", model, "Checkpoint (checkpoint source)", Role::path);
        c.option("train", train, "Training split CSV (copula source)", Role::path);
        c.option("pool-size", pool_size, "Generated load samples to pair with availability draws");
        c.option("samples", samples, "Monte Carlo availability draws");
        c.option("seed", seed, "Master seed");
        c.option("threshold", threshold, "Curtailment counted as a shortfall above this (MW)");
        c.option("threads", threads, "Worker threads", Role::runtime)->check(CLI::PositiveNumber);
        c.option("out", out, "Output directory", Role::path);
    }

    MatrixXd load_pool(const std::vector<std::string>& areas) const
    {
        if (load_source == "historical") {
            if (loads.empty()) {
                throw InputError("adequacy: the historical source needs --loads");
            }
            const io::Table t = io::read_table(fs::path(loads));
            return select_columns(t.values, t.columns, areas, loads);
        }
        if (pool_size < 1) {
            throw InputError("adequacy: --pool-size must be positive");
        }
        if (load_source == "checkpoint") {
            if (model.empty()) {
                throw InputError("adequacy: the checkpoint source needs --model");
            }
            const cvae::TrainedModel m = read_model(model);
            const MatrixXd pool = generate_mw(m, hours_for(m, pool_size), derive_seed(seed, kPool), std::nullopt);
            return select_columns(pool, m.areas, areas, model);
        }
        if (train.empty()) {
            throw InputError("adequacy: the copula source needs --train");
        }
        const dataset::LoadDataset ds = dataset::load_csv(train).dataset;
        const MatrixXd pool =
            copula::sample_copula(copula::fit_gaussian_copula(ds.values), pool_size, derive_seed(seed, kPool));
        return select_columns(pool, ds.areas, areas, train);
    }

    void run(const Command& c) const
    {
        if (system.empty()) {
            throw InputError("adequacy: --system is required");
        }
        const adequacy::SystemDescription sys = adequacy::load_system(system);
        report(sys.fleet.diagnostics);
        const MatrixXd pool = load_pool(sys.network.areas);

        adequacy::LoleOptions options;
        options.samples = samples;
        options.seed = seed;
        options.threshold = threshold;
        options.threads = threads;
        const adequacy::LoleReport lole = adequacy::estimate_lole(sys.network, sys.fleet, pool, options);

        const fs::path dir(out);
        std::ostringstream csv;
        csv << provenance_comment(c, seed) << '\n';
        adequacy::write_csv(lole, csv);
        write_file(dir / "lole.csv", csv.str());

        nlohmann::json j = adequacy::to_json(lole);
        j["load_source"] = load_source;
        j["load_pool_rows"] = pool.rows();
        j["fleet"] = nlohmann::json::array();
        for (std::size_t i = 0; i < sys.fleet.areas.size(); ++i) {
            const auto& a = sys.fleet.areas[i];
            j["fleet"].push_back({{"area", sys.network.areas[i]},
                                  {"unit_size_mw", a.unit_size},
                                  {"units", a.units},
                                  {"availability", a.availability}});
        }
        j["diagnostics"] = sys.fleet.diagnostics;
        j["provenance"] = provenance(c, seed);
        write_json(dir / "lole.json", j);
        if (lole.clamped_demands > 0) {
            std::cerr << "note: " << lole.clamped_demands << " negative demands clamped to zero\n";
        }
        std::cerr << "adequacy: " << lole.samples << " samples, " << lole.qp_solves << " curtailment solves\n";
    }
};

int execute(int argc, const char* const* argv)
{
    CLI::App app{"Generative load modeling, validation and adequacy assessment"};
    app.require_subcommand(1);

    Ingest ingest;
    Train train;
    Generate generate;
    Validate validate;
    Adequacy adequacy;

    Command c_ingest(app, "ingest", "Split hourly load data into weekly train/test blocks");
    Command c_train(app, "train", "Train a conditional VAE");
    Command c_generate(app, "generate", "Sample loads from a checkpoint or the copula baseline");
    Command c_validate(app, "validate", "Compare generated and historical populations");
    Command c_adequacy(app, "adequacy", "Estimate LOLE by Monte Carlo");
    ingest.define(c_ingest);
    train.define(c_train);
    generate.define(c_generate);
    validate.define(c_validate);
    adequacy.define(c_adequacy);

    RunConfig config;
    if (const auto path = RunConfig::scan(argc, argv)) {
        config = RunConfig::load(*path);
        for (Command* c : {&c_ingest, &c_train, &c_generate, &c_validate, &c_adequacy}) {
            c->apply(config);
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    if (c_ingest.parsed()) {
        ingest.run(c_ingest);
    } else if (c_train.parsed()) {
        train.run(c_train);
    } else if (c_generate.parsed()) {
        generate.run(c_generate, config);
    } else if (c_validate.parsed()) {
        validate.run(c_validate);
    } else if (c_adequacy.parsed()) {
        adequacy.run(c_adequacy);
    }
    return 0;
}

} // namespace

int run(int argc, const char* const* argv)
{
    try {
        return execute(argc, argv);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << '\n';
        return 1;
    }
}

} // namespace loadgen::cli
