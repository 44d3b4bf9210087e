#include "loadgen/qp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace loadgen::qp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_inputs(const VectorXd& demand, const VectorXd& capacity, std::span<const Edge> edges) {
    if (demand.size() != capacity.size()) {
        throw std::invalid_argument("demand and capacity sizes differ");
    }
    for (Index i = 0; i < demand.size(); ++i) {
        if (!(demand(i) >= 0.0) || !std::isfinite(demand(i))) {
            throw std::invalid_argument("demand must be finite and non-negative");
        }
        if (!(capacity(i) >= 0.0) || !std::isfinite(capacity(i))) {
            throw std::invalid_argument("capacity must be finite and non-negative");
        }
    }
    for (const Edge& e : edges) {
        if (e.from < 0 || e.to >= demand.size() || e.from >= e.to) {
            throw std::invalid_argument("edges must connect nodes i < j within range");
        }
        if (!(e.lower <= e.upper) || !std::isfinite(e.lower) || !std::isfinite(e.upper)) {
            throw std::invalid_argument("edge bounds must be finite with lower <= upper");
        }
    }
}

struct ConstraintBuilder {
    Index variables;
    std::vector<VectorXd> normals;
    std::vector<double> bounds;

    void add(VectorXd normal, double bound) {
        if (normal.isZero(0.0)) {
            // Trivially satisfied since the builder only emits rows with bound <= 0 here.
            return;
        }
        normals.push_back(std::move(normal));
        bounds.push_back(bound);
    }
};

// Dual active-set method for min 0.5 x'Hx + g'x s.t. C'x >= b with H positive
// definite. The factorization H^-1 = J J' is maintained as J = L^-T Q, and
// the active normals satisfy J' N = [R; 0] with R upper triangular.
class ActiveSetSolver {
public:
    ActiveSetSolver(const MatrixXd& H, const VectorXd& g, const MatrixXd& C, const VectorXd& b)
        : H_(H), g_(g), C_(C), b_(b), n_(H.rows()), m_(C.cols()) {}

    SolveStatus run(Index max_iterations, double feasibility_tolerance) {
        Eigen::LLT<MatrixXd> llt(H_);
        if (llt.info() != Eigen::Success) {
            throw std::runtime_error("QP Hessian is not positive definite");
        }
        J_ = llt.matrixU().solve(MatrixXd::Identity(n_, n_));
        R_ = MatrixXd::Zero(n_, n_);
        r_norm_ = 1.0;
        x_ = -llt.solve(g_);
        active_.clear();
        u_.clear();
        iterations_ = 0;

        std::vector<char> is_active(static_cast<std::size_t>(m_), 0);
        std::vector<char> rejected(static_cast<std::size_t>(m_), 0);
        VectorXd norms(m_);
        for (Index i = 0; i < m_; ++i) norms(i) = C_.col(i).norm();

        while (true) {
            VectorXd s = C_.transpose() * x_ - b_;
            Index p = -1;
            double worst = -feasibility_tolerance;
            for (Index i = 0; i < m_; ++i) {
                if (is_active[static_cast<std::size_t>(i)] || rejected[static_cast<std::size_t>(i)]) continue;
                const double scaled = s(i) / norms(i);
                if (scaled < worst) {
                    worst = scaled;
                    p = i;
                }
            }
            if (p < 0) return SolveStatus::optimal;

            const VectorXd np = C_.col(p);
            double slack = s(p);
            double u_new = 0.0;
            while (true) {
                if (++iterations_ > max_iterations) return SolveStatus::iteration_limit;
                const Index q = static_cast<Index>(active_.size());
                VectorXd d = J_.transpose() * np;
                VectorXd z = J_.rightCols(n_ - q) * d.tail(n_ - q);
                VectorXd r = R_.topLeftCorner(q, q).triangularView<Eigen::Upper>().solve(d.head(q));

                double t1 = kInfinity;
                Index drop = -1;
                for (Index k = 0; k < q; ++k) {
                    if (r(k) > 0.0) {
                        const double ratio = u_[static_cast<std::size_t>(k)] / r(k);
                        if (ratio < t1) {
                            t1 = ratio;
                            drop = k;
                        }
                    }
                }
                double t2 = kInfinity;
                const double zz = z.squaredNorm();
                if (zz > kEps * kEps) {
                    const double zn = z.dot(np);
                    if (zn > 0.0) t2 = -slack / zn;
                }
                const double t = std::min(t1, t2);
                if (t == kInfinity) return SolveStatus::infeasible;

                if (t2 == kInfinity) {
                    // Dual step only: np is dependent on the active normals.
                    for (Index k = 0; k < q; ++k) u_[static_cast<std::size_t>(k)] -= t * r(k);
                    u_new += t;
                    is_active[static_cast<std::size_t>(active_[static_cast<std::size_t>(drop)])] = 0;
                    remove(drop);
                    continue;
                }

                x_ += t * z;
                for (Index k = 0; k < q; ++k) u_[static_cast<std::size_t>(k)] -= t * r(k);
                u_new += t;

                if (t2 <= t1) {
                    if (!append(d)) {
                        rejected[static_cast<std::size_t>(p)] = 1;
                        break;
                    }
                    active_.push_back(p);
                    u_.push_back(u_new);
                    is_active[static_cast<std::size_t>(p)] = 1;
                    break;
                }
                is_active[static_cast<std::size_t>(active_[static_cast<std::size_t>(drop)])] = 0;
                remove(drop);
                slack = np.dot(x_) - b_(p);
            }
        }
    }

    const VectorXd& x() const { return x_; }
    const std::vector<Index>& active() const { return active_; }
    VectorXd multipliers() const {
        return Eigen::Map<const VectorXd>(u_.data(), static_cast<Index>(u_.size()));
    }
    Index iterations() const { return iterations_; }

private:
    bool append(VectorXd& d) {
        const Index q = static_cast<Index>(active_.size());
        for (Index j = n_ - 1; j >= q + 1; --j) {
            double cc = d(j - 1);
            double ss = d(j);
            const double h = std::hypot(cc, ss);
            if (h == 0.0) continue;
            d(j) = 0.0;
            cc /= h;
            ss /= h;
            if (cc < 0.0) {
                cc = -cc;
                ss = -ss;
                d(j - 1) = -h;
            } else {
                d(j - 1) = h;
            }
            const double xny = ss / (1.0 + cc);
            for (Index k = 0; k < n_; ++k) {
                const double a = J_(k, j - 1);
                const double c = J_(k, j);
                J_(k, j - 1) = a * cc + c * ss;
                J_(k, j) = xny * (a + J_(k, j - 1)) - c;
            }
        }
        if (std::abs(d(q)) <= kEps * r_norm_) return false;
        R_.col(q).head(q + 1) = d.head(q + 1);
        r_norm_ = std::max(r_norm_, std::abs(d(q)));
        return true;
    }

    void remove(Index l) {
        const Index q = static_cast<Index>(active_.size());
        active_.erase(active_.begin() + l);
        u_.erase(u_.begin() + l);
        for (Index i = l; i < q - 1; ++i) R_.col(i) = R_.col(i + 1);
        R_.col(q - 1).setZero();
        const Index remaining = q - 1;
        for (Index j = l; j < remaining; ++j) {
            double cc = R_(j, j);
            double ss = R_(j + 1, j);
            const double h = std::hypot(cc, ss);
            if (h == 0.0) continue;
            cc /= h;
            ss /= h;
            R_(j + 1, j) = 0.0;
            if (cc < 0.0) {
                R_(j, j) = -h;
                cc = -cc;
                ss = -ss;
            } else {
                R_(j, j) = h;
            }
            const double xny = ss / (1.0 + cc);
            for (Index k = j + 1; k < remaining; ++k) {
                const double a = R_(j, k);
                const double c = R_(j + 1, k);
                R_(j, k) = a * cc + c * ss;
                R_(j + 1, k) = xny * (a + R_(j, k)) - c;
            }
            for (Index k = 0; k < n_; ++k) {
                const double a = J_(k, j);
                const double c = J_(k, j + 1);
                J_(k, j) = a * cc + c * ss;
                J_(k, j + 1) = xny * (J_(k, j) + a) - c;
            }
        }
    }

    const MatrixXd& H_;
    const VectorXd& g_;
    const MatrixXd& C_;
    const VectorXd& b_;
    Index n_;
    Index m_;
    MatrixXd J_;
    MatrixXd R_;
    double r_norm_ = 1.0;
    VectorXd x_;
    std::vector<Index> active_;
    std::vector<double> u_;
    Index iterations_ = 0;
};

// Equality-constrained minimizer on a guessed active set.
bool solve_on_active_set(const QPProblem& problem, std::span<const Index> active, VectorXd& x, VectorXd& u) {
    Eigen::LLT<MatrixXd> llt(problem.hessian);
    if (llt.info() != Eigen::Success) return false;
    const VectorXd x0 = -llt.solve(problem.linear);
    const Index q = static_cast<Index>(active.size());
    if (q == 0) {
        x = x0;
        u.resize(0);
        return true;
    }
    MatrixXd N(problem.variables(), q);
    VectorXd rhs(q);
    for (Index k = 0; k < q; ++k) {
        N.col(k) = problem.constraints.col(active[static_cast<std::size_t>(k)]);
        rhs(k) = problem.bounds(active[static_cast<std::size_t>(k)]) - N.col(k).dot(x0);
    }
    const MatrixXd HinvN = llt.solve(N);
    const MatrixXd schur = N.transpose() * HinvN;
    Eigen::LDLT<MatrixXd> ldlt(schur);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return false;
    u = ldlt.solve(rhs);
    x = x0 + HinvN * u;
    // The flow penalty makes the Schur complement badly conditioned; refine on
    // the active-row residual. Stationarity holds exactly by construction.
    for (int pass = 0; pass < 3 && u.allFinite(); ++pass) {
        VectorXd residual(q);
        for (Index k = 0; k < q; ++k) {
            residual(k) = problem.bounds(active[static_cast<std::size_t>(k)]) - N.col(k).dot(x);
        }
        const VectorXd du = ldlt.solve(residual);
        u += du;
        x += HinvN * du;
    }
    return u.allFinite() && x.allFinite();
}

QPSolution finish(const QPProblem& problem, const VectorXd& x, std::vector<Index> active, VectorXd u,
                  SolveStatus status, Index iterations, bool warm) {
    QPSolution out;
    out.curtailment = VectorXd::Zero(problem.nodes());
    const Index nc = problem.flow_offset();
    for (Index k = 0; k < nc; ++k) {
        const Index node = problem.curtailed[static_cast<std::size_t>(k)];
        // Clamp rounding noise at the bounds, which are active constraints.
        out.curtailment(node) = std::clamp(x(k) * problem.scale, 0.0, problem.demand(node));
    }
    out.flow = x.tail(static_cast<Index>(problem.edges.size())) * problem.scale;
    out.objective = curtailment_objective(problem, out.curtailment);
    out.status = status;
    out.iterations = iterations;
    out.kkt_residual = kkt_residuals(problem, x, active, u).max();
    out.warm_started = warm;
    out.active_set = std::move(active);
    out.multipliers = std::move(u);
    return out;
}

} // namespace

const char* to_string(SolveStatus status) {
    switch (status) {
    case SolveStatus::optimal:
        return "optimal";
    case SolveStatus::iteration_limit:
        return "iteration_limit";
    case SolveStatus::infeasible:
        return "infeasible";
    }
    return "unknown";
}

double KktResiduals::max() const {
    return std::max({primal, dual, stationarity, complementarity});
}

VectorXd net_import(Index nodes, std::span<const Edge> edges, const VectorXd& flow) {
    if (flow.size() != static_cast<Index>(edges.size())) {
        throw std::invalid_argument("flow vector does not match edge count");
    }
    VectorXd net = VectorXd::Zero(nodes);
    for (std::size_t e = 0; e < edges.size(); ++e) {
        net(edges[e].to) += flow(static_cast<Index>(e));
        net(edges[e].from) -= flow(static_cast<Index>(e));
    }
    return net;
}

QPProblem build_curtailment_qp(const VectorXd& demand, const VectorXd& capacity, std::span<const Edge> edges) {
    check_inputs(demand, capacity, edges);
    QPProblem qp;
    qp.demand = demand;
    qp.capacity = capacity;
    qp.edges.assign(edges.begin(), edges.end());
    const Index nodes = demand.size();
    for (Index i = 0; i < nodes; ++i) {
        if (demand(i) > 0.0) qp.curtailed.push_back(i);
    }

    const double max_demand = nodes > 0 ? demand.maxCoeff() : 0.0;
    double scale = max_demand;
    if (scale <= 0.0) {
        scale = 1.0;
        if (nodes > 0) scale = std::max(scale, capacity.maxCoeff());
        for (const Edge& e : edges) scale = std::max({scale, std::abs(e.lower), std::abs(e.upper)});
    }
    qp.scale = scale;
    qp.flow_regularization = kFlowRegularization / std::max(max_demand, 1.0);

    const Index nc = qp.flow_offset();
    const Index ne = static_cast<Index>(edges.size());
    const Index n = nc + ne;

    // Objective divided by `scale` after substituting c = scale * x.
    qp.hessian = MatrixXd::Zero(n, n);
    qp.linear = VectorXd::Zero(n);
    std::vector<Index> column_of(static_cast<std::size_t>(nodes), -1);
    for (Index k = 0; k < nc; ++k) {
        const Index node = qp.curtailed[static_cast<std::size_t>(k)];
        column_of[static_cast<std::size_t>(node)] = k;
        qp.hessian(k, k) = scale / demand(node);
        qp.linear(k) = 1.0;
    }
    for (Index e = 0; e < ne; ++e) qp.hessian(nc + e, nc + e) = 2.0 * qp.flow_regularization * scale;

    ConstraintBuilder rows{n, {}, {}};
    for (Index e = 0; e < ne; ++e) {
        VectorXd v = VectorXd::Zero(n);
        v(nc + e) = 1.0;
        rows.add(v, edges[static_cast<std::size_t>(e)].lower / scale);
        rows.add(-v, -edges[static_cast<std::size_t>(e)].upper / scale);
    }
    for (Index k = 0; k < nc; ++k) {
        VectorXd v = VectorXd::Zero(n);
        v(k) = 1.0;
        rows.add(v, 0.0);
        rows.add(-v, -demand(qp.curtailed[static_cast<std::size_t>(k)]) / scale);
    }
    for (Index i = 0; i < nodes; ++i) {
        VectorXd v = VectorXd::Zero(n);
        for (Index e = 0; e < ne; ++e) {
            const Edge& edge = edges[static_cast<std::size_t>(e)];
            if (edge.to == i) v(nc + e) += 1.0;
            if (edge.from == i) v(nc + e) -= 1.0;
        }
        const Index col = column_of[static_cast<std::size_t>(i)];
        if (col >= 0) v(col) = 1.0;
        rows.add(v, (demand(i) - capacity(i)) / scale);
        rows.add(-v, -demand(i) / scale);
    }

    const Index m = static_cast<Index>(rows.normals.size());
    qp.constraints.resize(n, m);
    qp.bounds.resize(m);
    for (Index j = 0; j < m; ++j) {
        qp.constraints.col(j) = rows.normals[static_cast<std::size_t>(j)];
        qp.bounds(j) = rows.bounds[static_cast<std::size_t>(j)];
    }
    return qp;
}

KktResiduals kkt_residuals(const QPProblem& problem, const VectorXd& x, std::span<const Index> active,
                           const VectorXd& multipliers) {
    if (x.size() != problem.variables() || multipliers.size() != static_cast<Index>(active.size())) {
        throw std::invalid_argument("KKT check dimensions do not match the problem");
    }
    KktResiduals res;
    const VectorXd slack = problem.constraints.transpose() * x - problem.bounds;
    if (slack.size() > 0) res.primal = std::max(0.0, -slack.minCoeff());
    VectorXd grad = problem.hessian * x + problem.linear;
    for (std::size_t k = 0; k < active.size(); ++k) {
        const Index j = active[k];
        const double u = multipliers(static_cast<Index>(k));
        res.dual = std::max(res.dual, -u);
        res.complementarity = std::max(res.complementarity, std::abs(u * slack(j)));
        grad -= u * problem.constraints.col(j);
    }
    if (grad.size() > 0) res.stationarity = grad.cwiseAbs().maxCoeff();
    return res;
}

QPSolution Solver::solve(const QPProblem& problem) {
    const Index n = problem.variables();
    const Index m = problem.constraints.cols();
    if (n == 0) {
        QPSolution out;
        out.curtailment = VectorXd::Zero(problem.nodes());
        out.flow = VectorXd::Zero(0);
        out.multipliers = VectorXd::Zero(0);
        const VectorXd none = VectorXd::Zero(0);
        out.kkt_residual = kkt_residuals(problem, none, {}, none).max();
        out.status = out.kkt_residual <= options_.tolerance ? SolveStatus::optimal : SolveStatus::infeasible;
        return out;
    }

    if (options_.warm_start && n == previous_variables_ && m == previous_constraints_ &&
        !previous_active_.empty()) {
        VectorXd x;
        VectorXd u;
        if (solve_on_active_set(problem, previous_active_, x, u) &&
            kkt_residuals(problem, x, previous_active_, u).max() <= 1e-3 * options_.tolerance) {
            return finish(problem, x, previous_active_, std::move(u), SolveStatus::optimal, 0, true);
        }
    }

    const Index cap = options_.max_iterations > 0 ? options_.max_iterations : 10 * (n + m) + 10;
    ActiveSetSolver core(problem.hessian, problem.linear, problem.constraints, problem.bounds);
    const SolveStatus status = core.run(cap, 1e-3 * options_.tolerance);
    QPSolution out =
        finish(problem, core.x(), core.active(), core.multipliers(), status, core.iterations(), false);
    if (status == SolveStatus::optimal) {
        previous_active_ = out.active_set;
        previous_variables_ = n;
        previous_constraints_ = m;
    } else {
        reset();
    }
    return out;
}

QPSolution solve(const QPProblem& problem, double tolerance) {
    SolverOptions options;
    options.tolerance = tolerance;
    options.warm_start = false;
    return Solver(options).solve(problem);
}

double curtailment_objective(const QPProblem& problem, const VectorXd& curtailment) {
    if (curtailment.size() != problem.nodes()) {
        throw std::invalid_argument("curtailment vector does not match node count");
    }
    double total = 0.0;
    for (Index node : problem.curtailed) {
        const double c = curtailment(node);
        total += c * c / (2.0 * problem.demand(node)) + c;
    }
    return total;
}

VectorXd implied_curtailment(const QPProblem& problem, const VectorXd& flow) {
    const VectorXd net = net_import(problem.nodes(), problem.edges, flow);
    VectorXd c(problem.nodes());
    for (Index i = 0; i < problem.nodes(); ++i) {
        const double served = std::min(problem.demand(i), problem.capacity(i) + net(i));
        c(i) = std::max(0.0, problem.demand(i) - served);
    }
    return c;
}

nlohmann::json to_json(const QPProblem& problem) {
    nlohmann::json j;
    j["demand_mw"] = std::vector<double>(problem.demand.begin(), problem.demand.end());
    j["capacity_mw"] = std::vector<double>(problem.capacity.begin(), problem.capacity.end());
    nlohmann::json edges = nlohmann::json::array();
    for (const Edge& e : problem.edges) {
        edges.push_back({{"from", e.from}, {"to", e.to}, {"lower_mw", e.lower}, {"upper_mw", e.upper}});
    }
    j["edges"] = std::move(edges);
    j["curtailed_nodes"] = problem.curtailed;
    j["scale_mw"] = problem.scale;
    j["flow_regularization"] = problem.flow_regularization;
    return j;
}

nlohmann::json to_json(const QPSolution& solution) {
    nlohmann::json j;
    j["curtailment_mw"] = std::vector<double>(solution.curtailment.begin(), solution.curtailment.end());
    j["flow_mw"] = std::vector<double>(solution.flow.begin(), solution.flow.end());
    j["objective"] = solution.objective;
    j["status"] = to_string(solution.status);
    j["iterations"] = solution.iterations;
    j["kkt_residual"] = solution.kkt_residual;
    j["warm_started"] = solution.warm_started;
    j["active_set"] = solution.active_set;
    return j;
}

} // namespace loadgen::qp
