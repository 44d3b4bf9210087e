#pragma once

#include "loadgen/qp.hpp"
#include "loadgen/random.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace loadgen::adequacy {

using Eigen::Index;

inline constexpr double kHoursPerYear = 8760.0;
inline constexpr double kDefaultAvailability = 0.83;
inline constexpr double kWindCapacityCredit = 0.05;
inline constexpr long long kMaxUnitSize = 500;
inline constexpr double kDefaultThreshold = 1e-6; // MW
inline constexpr Index kChunkSize = 4096;

/// Transfer link between areas from < to; flow in [-backward, forward] MW.
struct Link {
    Index from = 0;
    Index to = 0;
    double forward = 0.0;
    double backward = 0.0;
};

struct NetworkModel {
    std::vector<std::string> areas;
    std::vector<Link> links;

    Index size() const { return static_cast<Index>(areas.size()); }
    std::vector<qp::Edge> edges() const;
    void validate() const;
};

struct AreaFleet {
    long long unit_size = 1; // MW
    long long units = 0;
    double availability = kDefaultAvailability;

    long long capacity() const { return unit_size * units; }
};

struct GenerationFleet {
    std::vector<AreaFleet> areas;
    std::vector<std::string> diagnostics;

    Eigen::VectorXd capacity() const;
};

/// Largest divisor of `capacity` that does not exceed kMaxUnitSize.
long long derive_unit_size(long long capacity);

struct AreaCapacity {
    std::string name;
    double conventional = 0.0; // MW
    double wind = 0.0;         // nameplate MW
    std::optional<long long> unit_size;
    std::optional<double> availability;
};

GenerationFleet build_fleet(std::span<const AreaCapacity> areas, double availability = kDefaultAvailability);

/// Inverse-CDF binomial sampler. Each area consumes exactly one uniform per
/// draw, so runs that differ only in unit counts stay coupled.
class AvailabilitySampler {
public:
    explicit AvailabilitySampler(const GenerationFleet& fleet);

    Eigen::VectorXd sample(Rng& rng) const;
    double available(Index area, double u) const;
    Index areas() const { return static_cast<Index>(cdf_.size()); }

private:
    std::vector<long long> unit_size_;
    std::vector<std::vector<double>> cdf_;
};

Eigen::VectorXd sample_availability(const GenerationFleet& fleet, Rng& rng);

struct SystemState {
    Eigen::VectorXd available; // MW per area
    Eigen::VectorXd demand;    // MW per area
    Index source = -1;         // load row drawn for this state
};

/// Curtailment per area (MW). Throws NumericError if the solver does not
/// converge or, in debug builds, if the flows contradict the curtailments.
Eigen::VectorXd evaluate_state(const SystemState& state, const NetworkModel& network, qp::Solver& solver);
Eigen::VectorXd evaluate_state(const SystemState& state, const NetworkModel& network, double tolerance = 1e-7);

struct LoleOptions {
    Index samples = 1000000;
    std::uint64_t seed = 0;
    double threshold = kDefaultThreshold;
    double tolerance = 1e-7;
    int threads = 1;
    bool reverse_chunks = false; // process chunks back to front
};

struct LoleReport {
    std::vector<std::string> areas;
    Eigen::VectorXd lole;           // hours per year
    Eigen::VectorXd standard_error; // hours per year
    std::vector<Index> shortfall_samples;
    Index samples = 0;
    double threshold = kDefaultThreshold;
    Index clamped_demands = 0;
    Index qp_solves = 0;
    std::uint64_t seed = 0;
};

/// Pairs each availability draw with a load row (MW, one area per column)
/// drawn uniformly with replacement.
LoleReport estimate_lole(const NetworkModel& network, const GenerationFleet& fleet, const Eigen::MatrixXd& loads,
                         const LoleOptions& options);

/// 8760 * sum_k P[demand_k] * P[capacity < demand_k - threshold].
double exact_lole_single_node(const AreaFleet& fleet, std::span<const std::pair<double, double>> demand,
                              double threshold = 0.0);

struct SystemDescription {
    NetworkModel network;
    GenerationFleet fleet;
};

SystemDescription parse_system(const nlohmann::json& doc);
SystemDescription load_system(const std::filesystem::path& path);

nlohmann::json to_json(const LoleReport& report);
void write_csv(const LoleReport& report, std::ostream& out);

} // namespace loadgen::adequacy
