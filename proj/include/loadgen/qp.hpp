#pragma once

#include <Eigen/Core>
#include <json.hpp>

#include <span>
#include <vector>

// Balanced load curtailment for one sampled system state:
//
//   minimize    sum_i c_i^2 / (2 d_i) + c_i          (+ eps * sum f^2)
//   subject to  lower_e <= f_e <= upper_e
//               0 <= c_i <= d_i
//               d_i - g_i <= inflow_i(f) - outflow_i(f) + c_i <= d_i
//
// Flows run from the lower to the higher node index. The small flow penalty
// makes the program strictly convex; curtailments are unaffected by it.
namespace loadgen::qp {

using Eigen::Index;

struct Edge {
    Index from = 0;
    Index to = 0;
    double lower = 0.0; // MW, negative values mean flow towards `from`
    double upper = 0.0;
};

// Flow-penalty weight is kFlowRegularization / max demand, per MW^2.
inline constexpr double kFlowRegularization = 1e-8;

struct QPProblem {
    Eigen::VectorXd demand;   // MW per node
    Eigen::VectorXd capacity; // available generation, MW per node
    std::vector<Edge> edges;
    std::vector<Index> curtailed; // nodes with positive demand, in variable order
    double scale = 1.0;           // MW per model unit
    double flow_regularization = 0.0;

    // Scaled dense form over x = [c(curtailed); f] / scale:
    //   minimize 0.5 x'Hx + g'x  subject to  C'x >= b.
    Eigen::MatrixXd hessian;
    Eigen::VectorXd linear;
    Eigen::MatrixXd constraints; // variables x constraints
    Eigen::VectorXd bounds;

    Index nodes() const { return demand.size(); }
    Index variables() const { return linear.size(); }
    Index flow_offset() const { return static_cast<Index>(curtailed.size()); }
};

/// Node i's net import for the given flows (MW).
Eigen::VectorXd net_import(Index nodes, std::span<const Edge> edges, const Eigen::VectorXd& flow);

/// Zero-demand nodes get no curtailment variable; their balance rows stay.
QPProblem build_curtailment_qp(const Eigen::VectorXd& demand, const Eigen::VectorXd& capacity,
                               std::span<const Edge> edges);

enum class SolveStatus { optimal, iteration_limit, infeasible };

const char* to_string(SolveStatus status);

struct KktResiduals {
    double primal = 0.0;
    double dual = 0.0;
    double stationarity = 0.0;
    double complementarity = 0.0;

    double max() const;
};

/// Residuals of the scaled program at x with the given active set and
/// multipliers.
KktResiduals kkt_residuals(const QPProblem& problem, const Eigen::VectorXd& x, std::span<const Index> active,
                           const Eigen::VectorXd& multipliers);

struct QPSolution {
    Eigen::VectorXd curtailment; // MW per node
    Eigen::VectorXd flow;        // MW per edge
    double objective = 0.0;      // curtailment objective, without the flow penalty
    SolveStatus status = SolveStatus::optimal;
    Index iterations = 0;
    double kkt_residual = 0.0;
    bool warm_started = false;
    std::vector<Index> active_set;
    Eigen::VectorXd multipliers;
};

struct SolverOptions {
    double tolerance = 1e-7;
    Index max_iterations = 0; // 0: 10 * (variables + constraints) + 10
    bool warm_start = true;
};

/// Goldfarb-Idnani dual active-set solver. An instance keeps the last active
/// set and first tries it on the next problem of the same shape, falling back
/// to a cold solve when the guess fails the KKT check. Not thread-safe; use
/// one instance per worker.
class Solver {
public:
    explicit Solver(SolverOptions options = {}) : options_(options) {}

    QPSolution solve(const QPProblem& problem);
    void reset() { previous_active_.clear(); }
    const SolverOptions& options() const { return options_; }

private:
    SolverOptions options_;
    std::vector<Index> previous_active_;
    Index previous_variables_ = -1;
    Index previous_constraints_ = -1;
};

QPSolution solve(const QPProblem& problem, double tolerance = 1e-7);

/// sum over curtailed nodes of c^2 / (2 d) + c, in MW.
double curtailment_objective(const QPProblem& problem, const Eigen::VectorXd& curtailment);

/// max(0, d - p) with p = min(d, g + net import): the curtailment the flows
/// leave at each node.
Eigen::VectorXd implied_curtailment(const QPProblem& problem, const Eigen::VectorXd& flow);

struct GridSolution {
    Eigen::VectorXd curtailment;
    Eigen::VectorXd flow;
    double objective = 0.0;
    Index points = 0;
};

inline constexpr Index kOracleMaxFlows = 3;

/// Exhaustive grid search for tests. Flows run over lower + k * resolution;
/// given the flows the program separates per node and each curtailment is the
/// smallest feasible multiple of `resolution` (the objective increases in c).
/// Throws std::invalid_argument for more than kOracleMaxFlows edges.
GridSolution brute_force_oracle(const QPProblem& problem, double resolution);

nlohmann::json to_json(const QPProblem& problem);
nlohmann::json to_json(const QPSolution& solution);

} // namespace loadgen::qp
