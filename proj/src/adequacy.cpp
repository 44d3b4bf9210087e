#include "loadgen/adequacy.hpp"

#include "loadgen/error.hpp"
#include "loadgen/io.hpp"
#include "loadgen/parallel.hpp"

#include <boost/math/distributions/binomial.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace loadgen::adequacy {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Uniform on [0, 1) from the top 53 bits.
double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<double> binomial_cdf(long long n, double p)
{
    std::vector<double> cdf(static_cast<std::size_t>(n + 1), 0.0);
    if (p >= 1.0) {
        cdf.back() = 1.0;
        return cdf;
    }
    if (p <= 0.0) {
        std::fill(cdf.begin(), cdf.end(), 1.0);
        return cdf;
    }
    const boost::math::binomial_distribution<double> dist(static_cast<double>(n), p);
    for (long long k = 0; k < n; ++k) {
        cdf[static_cast<std::size_t>(k)] = boost::math::cdf(dist, static_cast<double>(k));
    }
    cdf.back() = 1.0;
    return cdf;
}

void check_availability(double availability)
{
    if (!(availability >= 0.0 && availability <= 1.0)) {
        throw std::invalid_argument("availability must lie in [0, 1]");
    }
}

} // namespace

std::vector<qp::Edge> NetworkModel::edges() const
{
    std::vector<qp::Edge> out;
    out.reserve(links.size());
    for (const Link& l : links) {
        out.push_back({l.from, l.to, -l.backward, l.forward});
    }
    return out;
}

void NetworkModel::validate() const
{
    for (const Link& l : links) {
        if (l.from < 0 || l.to >= size() || l.from >= l.to) {
            throw InputError("links must join two distinct known areas with from < to");
        }
        if (!(l.forward >= 0.0) || !(l.backward >= 0.0) || !std::isfinite(l.forward) ||
            !std::isfinite(l.backward)) {
            throw InputError("link capacities must be finite and non-negative");
        }
    }
}

VectorXd GenerationFleet::capacity() const
{
    VectorXd c(static_cast<Index>(areas.size()));
    for (std::size_t i = 0; i < areas.size(); ++i) {
        c(static_cast<Index>(i)) = static_cast<double>(areas[i].capacity());
    }
    return c;
}

long long derive_unit_size(long long capacity)
{
    if (capacity < 1) {
        throw std::invalid_argument("derive_unit_size: capacity must be at least 1 MW");
    }
    for (long long size = std::min(capacity, kMaxUnitSize); size > 1; --size) {
        if (capacity % size == 0) {
            return size;
        }
    }
    return 1;
}

GenerationFleet build_fleet(std::span<const AreaCapacity> areas, double availability)
{
    check_availability(availability);
    GenerationFleet fleet;
    for (const AreaCapacity& a : areas) {
        if (!(a.conventional >= 0.0) || !(a.wind >= 0.0)) {
            throw std::invalid_argument("build_fleet: capacities must be non-negative");
        }
        AreaFleet f;
        f.availability = a.availability.value_or(availability);
        check_availability(f.availability);
        const long long capacity = std::llround(a.conventional + kWindCapacityCredit * a.wind);
        if (a.unit_size) {
            if (*a.unit_size < 1) {
                throw std::invalid_argument("build_fleet: unit size override must be at least 1 MW");
            }
            f.unit_size = *a.unit_size;
            f.units = std::llround(static_cast<double>(capacity) / static_cast<double>(f.unit_size));
            if (capacity % f.unit_size != 0) {
                fleet.diagnostics.push_back(a.name + ": capacity " + std::to_string(capacity) +
                                            " MW is not a multiple of the " + std::to_string(f.unit_size) +
                                            " MW unit size; modeled as " + std::to_string(f.capacity()) + " MW");
            }
        } else if (capacity > 0) {
            f.unit_size = derive_unit_size(capacity);
            f.units = capacity / f.unit_size;
        }
        fleet.areas.push_back(f);
    }
    return fleet;
}

AvailabilitySampler::AvailabilitySampler(const GenerationFleet& fleet)
{
    for (const AreaFleet& a : fleet.areas) {
        check_availability(a.availability);
        if (a.units < 0 || a.unit_size < 1) {
            throw std::invalid_argument("fleet areas need unit size >= 1 and a non-negative unit count");
        }
        unit_size_.push_back(a.unit_size);
        cdf_.push_back(binomial_cdf(a.units, a.availability));
    }
}

double AvailabilitySampler::available(Index area, double u) const
{
    const auto& cdf = cdf_[static_cast<std::size_t>(area)];
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto units = static_cast<long long>(std::min<std::ptrdiff_t>(it - cdf.begin(), std::ssize(cdf) - 1));
    return static_cast<double>(units * unit_size_[static_cast<std::size_t>(area)]);
}

VectorXd AvailabilitySampler::sample(Rng& rng) const
{
    VectorXd g(areas());
    for (Index i = 0; i < areas(); ++i) {
        g(i) = available(i, uniform01(rng));
    }
    return g;
}

VectorXd sample_availability(const GenerationFleet& fleet, Rng& rng)
{
    return AvailabilitySampler(fleet).sample(rng);
}

VectorXd evaluate_state(const SystemState& state, const NetworkModel& network, qp::Solver& solver)
{
    const Index n = network.size();
    if (state.available.size() != n || state.demand.size() != n) {
        throw std::invalid_argument("evaluate_state: state does not match the network");
    }
    if ((state.available.array() >= state.demand.array()).all()) {
        return VectorXd::Zero(n);
    }
    const auto edges = network.edges();
    const qp::QPProblem problem = qp::build_curtailment_qp(state.demand, state.available, edges);
    const qp::QPSolution solution = solver.solve(problem);
    if (solution.status != qp::SolveStatus::optimal) {
        throw NumericError(std::string("curtailment QP failed: ") + qp::to_string(solution.status) + "\n" +
                           qp::to_json(problem).dump());
    }
#ifndef NDEBUG
    const VectorXd implied = qp::implied_curtailment(problem, solution.flow);
    if ((implied - solution.curtailment).cwiseAbs().maxCoeff() > 1e-6 * std::max(1.0, problem.scale)) {
        throw NumericError("curtailment QP solution is inconsistent with its flows\n" + qp::to_json(problem).dump());
    }
#endif
    return solution.curtailment;
}

VectorXd evaluate_state(const SystemState& state, const NetworkModel& network, double tolerance)
{
    qp::SolverOptions options;
    options.tolerance = tolerance;
    options.warm_start = false;
    qp::Solver solver(options);
    return evaluate_state(state, network, solver);
}

LoleReport estimate_lole(const NetworkModel& network, const GenerationFleet& fleet, const MatrixXd& loads,
                         const LoleOptions& options)
{
    network.validate();
    const Index n = network.size();
    if (static_cast<Index>(fleet.areas.size()) != n) {
        throw InputError("fleet and network have different area counts");
    }
    if (loads.rows() == 0) {
        throw InputError("load source is empty");
    }
    if (loads.cols() != n) {
        throw InputError("load samples have " + std::to_string(loads.cols()) + " columns, network has " +
                         std::to_string(n) + " areas");
    }
    if (!loads.allFinite()) {
        throw InputError("load samples contain non-finite values");
    }
    if (options.samples < 1) {
        throw std::invalid_argument("estimate_lole: samples must be >= 1");
    }
    if (!(options.threshold >= 0.0)) {
        throw std::invalid_argument("estimate_lole: threshold must be non-negative");
    }

    const AvailabilitySampler sampler(fleet);
    const Index chunks = (options.samples + kChunkSize - 1) / kChunkSize;
    const int workers = std::max(1, options.threads);

    struct ChunkTally {
        std::vector<Index> shortfall;
        Index clamped = 0;
        Index solves = 0;
    };
    std::vector<ChunkTally> tallies(static_cast<std::size_t>(chunks));
    std::vector<qp::Solver> solvers;
    for (int w = 0; w < workers; ++w) {
        qp::SolverOptions so;
        so.tolerance = options.tolerance;
        solvers.emplace_back(so);
    }

    parallel_for(chunks, workers, [&](Index k, int worker) {
        const Index chunk = options.reverse_chunks ? chunks - 1 - k : k;
        ChunkTally& tally = tallies[static_cast<std::size_t>(chunk)];
        tally.shortfall.assign(static_cast<std::size_t>(n), 0);
        Rng rng = make_stream(options.seed, static_cast<std::uint64_t>(chunk));
        std::uniform_int_distribution<Index> pick(0, loads.rows() - 1);
        const Index begin = chunk * kChunkSize;
        const Index end = std::min(options.samples, begin + kChunkSize);
        SystemState state;
        for (Index s = begin; s < end; ++s) {
            state.available = sampler.sample(rng);
            state.source = pick(rng);
            state.demand = loads.row(state.source).transpose();
            for (Index i = 0; i < n; ++i) {
                if (state.demand(i) < 0.0) {
                    state.demand(i) = 0.0;
                    ++tally.clamped;
                }
            }
            if ((state.available.array() >= state.demand.array()).all()) {
                continue;
            }
            ++tally.solves;
            const VectorXd c = evaluate_state(state, network, solvers[static_cast<std::size_t>(worker)]);
            for (Index i = 0; i < n; ++i) {
                if (c(i) > options.threshold) {
                    ++tally.shortfall[static_cast<std::size_t>(i)];
                }
            }
        }
    });

    LoleReport report;
    report.areas = network.areas;
    report.samples = options.samples;
    report.threshold = options.threshold;
    report.seed = options.seed;
    report.shortfall_samples.assign(static_cast<std::size_t>(n), 0);
    for (const ChunkTally& t : tallies) {
        for (Index i = 0; i < n; ++i) {
            report.shortfall_samples[static_cast<std::size_t>(i)] += t.shortfall[static_cast<std::size_t>(i)];
        }
        report.clamped_demands += t.clamped;
        report.qp_solves += t.solves;
    }
    report.lole.resize(n);
    report.standard_error.resize(n);
    const double total = static_cast<double>(options.samples);
    for (Index i = 0; i < n; ++i) {
        const double p = static_cast<double>(report.shortfall_samples[static_cast<std::size_t>(i)]) / total;
        report.lole(i) = kHoursPerYear * p;
        report.standard_error(i) = kHoursPerYear * std::sqrt(p * (1.0 - p) / total);
    }
    return report;
}

double exact_lole_single_node(const AreaFleet& fleet, std::span<const std::pair<double, double>> demand,
                              double threshold)
{
    check_availability(fleet.availability);
    const std::vector<double> cdf = binomial_cdf(fleet.units, fleet.availability);
    double weight = 0.0;
    double shortfall = 0.0;
    for (const auto& [mw, probability] : demand) {
        if (!(probability >= 0.0)) {
            throw std::invalid_argument("exact_lole_single_node: probabilities must be non-negative");
        }
        weight += probability;
        // P[units * size < mw - threshold] = P[units <= k_max].
        const double limit = mw - threshold;
        if (limit <= 0.0) {
            continue;
        }
        const auto k_max = static_cast<long long>(std::ceil(limit / static_cast<double>(fleet.unit_size))) - 1;
        shortfall += probability * cdf[static_cast<std::size_t>(std::min(k_max, fleet.units))];
    }
    if (std::abs(weight - 1.0) > 1e-9) {
        throw std::invalid_argument("exact_lole_single_node: probabilities must sum to 1");
    }
    return kHoursPerYear * shortfall;
}

SystemDescription parse_system(const nlohmann::json& doc)
{
    try {
        SystemDescription sys;
        const double availability = doc.value("availability", kDefaultAvailability);
        if (!(availability >= 0.0 && availability <= 1.0)) {
            throw InputError("availability must lie in [0, 1]");
        }
        const auto& areas = doc.at("areas");
        if (!areas.is_array() || areas.empty()) {
            throw InputError("system needs a non-empty \"areas\" array");
        }
        std::map<std::string, Index> index;
        std::vector<AreaCapacity> capacities;
        for (const auto& a : areas) {
            AreaCapacity c;
            c.name = a.at("name").get<std::string>();
            c.conventional = a.at("conventional_mw").get<double>();
            c.wind = a.value("wind_mw", 0.0);
            if (!(c.conventional >= 0.0) || !(c.wind >= 0.0)) {
                throw InputError("area " + c.name + ": capacities must be non-negative");
            }
            if (a.contains("unit_size_mw")) {
                c.unit_size = a.at("unit_size_mw").get<long long>();
                if (*c.unit_size < 1) {
                    throw InputError("area " + c.name + ": unit_size_mw must be at least 1");
                }
            }
            if (a.contains("availability")) {
                c.availability = a.at("availability").get<double>();
                if (!(*c.availability >= 0.0 && *c.availability <= 1.0)) {
                    throw InputError("area " + c.name + ": availability must lie in [0, 1]");
                }
            }
            if (!index.emplace(c.name, static_cast<Index>(capacities.size())).second) {
                throw InputError("duplicate area name " + c.name);
            }
            sys.network.areas.push_back(c.name);
            capacities.push_back(std::move(c));
        }
        for (const auto& l : doc.value("links", nlohmann::json::array())) {
            const auto from = l.at("from").get<std::string>();
            const auto to = l.at("to").get<std::string>();
            const auto fi = index.find(from);
            const auto ti = index.find(to);
            if (fi == index.end() || ti == index.end()) {
                throw InputError("link " + from + "-" + to + " references an unknown area");
            }
            if (fi->second == ti->second) {
                throw InputError("link " + from + "-" + to + " is a self-loop");
            }
            Link link{fi->second, ti->second, l.at("forward_mw").get<double>(), l.at("backward_mw").get<double>()};
            if (link.from > link.to) {
                std::swap(link.from, link.to);
                std::swap(link.forward, link.backward);
            }
            sys.network.links.push_back(link);
        }
        sys.network.validate();
        sys.fleet = build_fleet(capacities, availability);
        return sys;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(std::string("malformed system description: ") + e.what());
    }
}

SystemDescription load_system(const std::filesystem::path& path)
{
    const std::string text = io::read_file(path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
    return parse_system(doc);
}

nlohmann::json to_json(const LoleReport& report)
{
    nlohmann::json areas = nlohmann::json::array();
    for (std::size_t i = 0; i < report.areas.size(); ++i) {
        const auto k = static_cast<Index>(i);
        areas.push_back({{"area", report.areas[i]},
                         {"lole_hours_per_year", report.lole(k)},
                         {"standard_error", report.standard_error(k)},
                         {"shortfall_samples", report.shortfall_samples[i]}});
    }
    return {{"areas", std::move(areas)},
            {"samples", report.samples},
            {"threshold_mw", report.threshold},
            {"clamped_demands", report.clamped_demands},
            {"qp_solves", report.qp_solves},
            {"seed", report.seed}};
}

void write_csv(const LoleReport& report, std::ostream& out)
{
    out << "area,lole_hours_per_year,standard_error,shortfall_samples\n";
    for (std::size_t i = 0; i < report.areas.size(); ++i) {
        const auto k = static_cast<Index>(i);
        out << report.areas[i] << ',' << io::format_number(report.lole(k)) << ','
            << io::format_number(report.standard_error(k)) << ',' << report.shortfall_samples[i] << '\n';
    }
}

} // namespace loadgen::adequacy
