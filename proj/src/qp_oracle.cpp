#include "loadgen/qp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace loadgen::qp {

GridSolution brute_force_oracle(const QPProblem& problem, double resolution) {
    if (!(resolution > 0.0)) throw std::invalid_argument("grid resolution must be positive");
    const Index ne = static_cast<Index>(problem.edges.size());
    if (ne > kOracleMaxFlows) throw std::invalid_argument("too many flow variables for the grid oracle");

    constexpr double slack = 1e-9;
    std::vector<Index> steps(static_cast<std::size_t>(ne));
    double total_points = 1.0;
    for (Index e = 0; e < ne; ++e) {
        const Edge& edge = problem.edges[static_cast<std::size_t>(e)];
        steps[static_cast<std::size_t>(e)] =
            static_cast<Index>(std::floor((edge.upper - edge.lower) / resolution + slack)) + 1;
        total_points *= static_cast<double>(steps[static_cast<std::size_t>(e)]);
    }
    if (total_points > 1e9) throw std::invalid_argument("grid oracle resolution too fine");

    GridSolution best;
    best.objective = std::numeric_limits<double>::infinity();
    const Index nodes = problem.nodes();
    std::vector<Index> counter(static_cast<std::size_t>(ne), 0);
    Eigen::VectorXd flow(ne);
    Eigen::VectorXd c(nodes);
    while (true) {
        for (Index e = 0; e < ne; ++e) {
            flow(e) = problem.edges[static_cast<std::size_t>(e)].lower +
                      static_cast<double>(counter[static_cast<std::size_t>(e)]) * resolution;
        }
        ++best.points;
        const Eigen::VectorXd net = net_import(nodes, problem.edges, flow);
        bool feasible = true;
        for (Index i = 0; i < nodes && feasible; ++i) {
            const double d = problem.demand(i);
            const double lo = std::max(0.0, d - problem.capacity(i) - net(i));
            const double hi = std::min(d, d - net(i));
            if (d <= 0.0) {
                feasible = lo <= slack && hi >= -slack;
                c(i) = 0.0;
                continue;
            }
            const double value = std::ceil(lo / resolution - slack) * resolution;
            feasible = value <= hi + slack;
            c(i) = value + 0.0; // no negative zero
        }
        if (feasible) {
            const double objective = curtailment_objective(problem, c);
            if (objective < best.objective) {
                best.objective = objective;
                best.curtailment = c;
                best.flow = flow;
            }
        }
        Index e = 0;
        while (e < ne && ++counter[static_cast<std::size_t>(e)] == steps[static_cast<std::size_t>(e)]) {
            counter[static_cast<std::size_t>(e)] = 0;
            ++e;
        }
        if (e == ne) break;
    }
    if (best.curtailment.size() == 0) throw std::runtime_error("grid oracle found no feasible point");
    return best;
}

} // namespace loadgen::qp
