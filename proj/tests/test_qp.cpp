#include "loadgen/qp.hpp"
#include "loadgen/random.hpp"

#include <gtest/gtest.h>

#include <random>
#include <vector>

using namespace loadgen;
using namespace loadgen::qp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd vec(std::initializer_list<double> v)
{
    VectorXd out(static_cast<Index>(v.size()));
    Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

// Flows within bounds, 0 <= c <= d, and the nodal balance band, all in MW.
void expect_feasible(const QPProblem& p, const VectorXd& c, const VectorXd& f, double tol)
{
    for (std::size_t e = 0; e < p.edges.size(); ++e) {
        EXPECT_GE(f(static_cast<Index>(e)), p.edges[e].lower - tol);
        EXPECT_LE(f(static_cast<Index>(e)), p.edges[e].upper + tol);
    }
    const VectorXd net = net_import(p.nodes(), p.edges, f);
    for (Index i = 0; i < p.nodes(); ++i) {
        EXPECT_GE(c(i), -tol);
        EXPECT_LE(c(i), p.demand(i) + tol);
        EXPECT_GE(net(i) + c(i), p.demand(i) - p.capacity(i) - tol) << "node " << i;
        EXPECT_LE(net(i) + c(i), p.demand(i) + tol) << "node " << i;
    }
}

struct RandomInstance {
    VectorXd demand;
    VectorXd capacity;
    std::vector<Edge> edges;
};

RandomInstance random_two_node(Rng& rng)
{
    std::uniform_real_distribution<double> d(0.0, 1000.0);
    std::uniform_real_distribution<double> cap(0.0, 300.0);
    RandomInstance r;
    r.demand = vec({d(rng), d(rng)});
    r.capacity = vec({d(rng), d(rng)});
    r.edges = {{0, 1, -cap(rng), cap(rng)}};
    return r;
}

} // namespace

TEST(Build, SingleNodeMatrices)
{
    const QPProblem p = build_curtailment_qp(vec({100}), vec({80}), {});
    EXPECT_EQ(p.variables(), 1);
    EXPECT_DOUBLE_EQ(p.scale, 100.0);
    EXPECT_DOUBLE_EQ(p.hessian(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(p.linear(0), 1.0);
}

TEST(Build, TwoNodeMatricesMatchHandConstruction)
{
    const std::vector<Edge> edges{{0, 1, -30, 30}};
    const QPProblem p = build_curtailment_qp(vec({100, 100}), vec({50, 200}), edges);
    // x = [c0, c1, f] / 100; eps = 1e-8 / 100 per MW^2.
    MatrixXd h = MatrixXd::Zero(3, 3);
    h(0, 0) = 1.0;
    h(1, 1) = 1.0;
    h(2, 2) = 2.0 * 1e-10 * 100.0;
    MatrixXd c(3, 10);
    // clang-format off
    c <<  0,    0,  1, -1, 0,  0,  1,   -1, 0,  0,
          0,    0,  0,  0, 1, -1,  0,    0, 1, -1,
          1,   -1,  0,  0, 0,  0, -1,    1, 1, -1;
    // clang-format on
    const VectorXd b = vec({-0.3, -0.3, 0, -1, 0, -1, 0.5, -1, -1, -1});
    EXPECT_EQ(p.curtailed, (std::vector<Index>{0, 1}));
    EXPECT_TRUE(p.hessian.isApprox(h, 1e-15));
    EXPECT_EQ(p.linear, vec({1, 1, 0}));
    EXPECT_EQ(p.constraints, c);
    EXPECT_TRUE(p.bounds.isApprox(b, 1e-15));
}

TEST(Build, Rejections)
{
    const std::vector<Edge> backwards{{1, 0, -1, 1}};
    const std::vector<Edge> inverted{{0, 1, 5, 1}};
    const std::vector<Edge> outside{{0, 2, -1, 1}};
    EXPECT_THROW(build_curtailment_qp(vec({1, 1}), vec({1, 1}), backwards), std::invalid_argument);
    EXPECT_THROW(build_curtailment_qp(vec({1, 1}), vec({1, 1}), inverted), std::invalid_argument);
    EXPECT_THROW(build_curtailment_qp(vec({1, 1}), vec({1, 1}), outside), std::invalid_argument);
    EXPECT_THROW(build_curtailment_qp(vec({-1}), vec({1}), {}), std::invalid_argument);
    EXPECT_THROW(build_curtailment_qp(vec({1}), vec({-1}), {}), std::invalid_argument);
    EXPECT_THROW(build_curtailment_qp(vec({1, 2}), vec({1}), {}), std::invalid_argument);
}

TEST(Solve, SingleNodeClosedForm)
{
    const QPSolution s = solve(build_curtailment_qp(vec({100}), vec({80}), {}));
    EXPECT_EQ(s.status, SolveStatus::optimal);
    EXPECT_NEAR(s.curtailment(0), 20.0, 1e-6);
    EXPECT_NEAR(s.objective, 22.0, 1e-6);
}

TEST(Solve, ZeroDemandNodeIsEliminated)
{
    const QPProblem single = build_curtailment_qp(vec({0}), vec({50}), {});
    EXPECT_EQ(single.variables(), 0);
    const QPSolution s = solve(single);
    EXPECT_EQ(s.status, SolveStatus::optimal);
    EXPECT_EQ(s.curtailment.size(), 1);
    EXPECT_EQ(s.curtailment(0), 0.0);

    const std::vector<Edge> edges{{0, 1, -40, 40}};
    const QPProblem p = build_curtailment_qp(vec({0, 100}), vec({10, 50}), edges);
    EXPECT_EQ(p.variables(), 2);
    const QPSolution t = solve(p);
    EXPECT_EQ(t.curtailment(0), 0.0);
    // Node 0 exports at most its own 10 MW; its balance row still binds.
    EXPECT_NEAR(t.flow(0), 10.0, 1e-6);
    EXPECT_NEAR(t.curtailment(1), 40.0, 1e-6);
}

TEST(Solve, TwoNodeImportLimitedByLink)
{
    const std::vector<Edge> edges{{0, 1, -30, 30}};
    const QPProblem p = build_curtailment_qp(vec({100, 100}), vec({50, 200}), edges);
    const QPSolution s = solve(p);
    EXPECT_NEAR(s.flow(0), -30.0, 1e-6);
    EXPECT_NEAR(s.curtailment(0), 20.0, 1e-6);
    EXPECT_NEAR(s.curtailment(1), 0.0, 1e-6);
    const GridSolution g = brute_force_oracle(p, 0.1);
    EXPECT_NEAR(g.curtailment(0), s.curtailment(0), 0.2);
    EXPECT_NEAR(g.curtailment(1), s.curtailment(1), 0.2);
}

TEST(Solve, IslandedNodesCarryTheirOwnDeficits)
{
    const std::vector<Edge> edges{{0, 1, 0, 0}};
    const QPSolution s = solve(build_curtailment_qp(vec({100, 200}), vec({70, 170}), edges));
    EXPECT_NEAR(s.curtailment(0), 30.0, 1e-6);
    EXPECT_NEAR(s.curtailment(1), 30.0, 1e-6);
}

TEST(Solve, SharedDeficitSplitsInProportionToDemand)
{
    // Node 2 exports 150 MW over uncongested links; the 150 MW deficit is shared.
    const std::vector<Edge> edges{{0, 2, -1000, 1000}, {1, 2, -1000, 1000}};
    const QPSolution s = solve(build_curtailment_qp(vec({100, 200, 0}), vec({0, 0, 150}), edges));
    EXPECT_NEAR(s.curtailment(0) + s.curtailment(1), 150.0, 1e-6);
    EXPECT_NEAR(s.curtailment(0) / 100.0, s.curtailment(1) / 200.0, 1e-8);
    EXPECT_NEAR(s.curtailment(0), 50.0, 1e-6);
}

TEST(Solve, SymmetricChainEndsShareEqually)
{
    // Identical end nodes around a hub; with slack links every node keeps the same c/d.
    const std::vector<Edge> edges{{0, 1, -200, 200}, {1, 2, -200, 200}};
    const QPSolution s = solve(build_curtailment_qp(vec({300, 50, 300}), vec({150, 250, 0}), edges));
    EXPECT_NEAR(s.curtailment.sum(), 250.0, 1e-6);
    for (Index i = 0; i < 3; ++i) {
        EXPECT_NEAR(s.curtailment(i) / (i == 1 ? 50.0 : 300.0), 250.0 / 650.0, 1e-8) << "node " << i;
    }

    // Binding links separate the hub's ratio from the ends' ratio, ends still equal.
    const std::vector<Edge> tight{{0, 1, -80, 80}, {1, 2, -80, 80}};
    const QPSolution t = solve(build_curtailment_qp(vec({300, 50, 300}), vec({150, 200, 150}), tight));
    EXPECT_NEAR(t.curtailment(0), t.curtailment(2), 1e-6);
    EXPECT_NEAR(t.curtailment(0), 70.0, 1e-6);
    EXPECT_NEAR(t.curtailment(1), 10.0, 1e-6);
}

TEST(Solve, ThreeNodeChainMatchesOracle)
{
    const std::vector<Edge> edges{{0, 1, -50, 50}, {1, 2, -40, 40}};
    const QPProblem p = build_curtailment_qp(vec({200, 300, 100}), vec({350, 150, 20}), edges);
    const QPSolution s = solve(p);
    const GridSolution g = brute_force_oracle(p, 0.1);
    for (Index i = 0; i < 3; ++i) {
        EXPECT_NEAR(s.curtailment(i), g.curtailment(i), 0.2) << "node " << i;
    }
    EXPECT_LE(s.objective, g.objective + 1e-9);
    expect_feasible(p, g.curtailment, g.flow, 1e-9);
}

TEST(Solve, RandomInstancesAgreeWithOracle)
{
    Rng rng(2024);
    for (int k = 0; k < 40; ++k) {
        const RandomInstance r = random_two_node(rng);
        const QPProblem p = build_curtailment_qp(r.demand, r.capacity, r.edges);
        const QPSolution s = solve(p);
        ASSERT_EQ(s.status, SolveStatus::optimal);
        EXPECT_LE(s.kkt_residual, 1e-7);
        expect_feasible(p, s.curtailment, s.flow, 1e-6);
        const GridSolution g = brute_force_oracle(p, 0.1);
        EXPECT_LE((s.curtailment - g.curtailment).cwiseAbs().maxCoeff(), 0.2) << "instance " << k;
    }
}

TEST(Solve, FeasibilityCertificateBoundsObjective)
{
    Rng rng(7);
    std::uniform_real_distribution<double> u(0.0, 500.0);
    for (int k = 0; k < 50; ++k) {
        const VectorXd d = vec({u(rng), u(rng), u(rng), u(rng)});
        const VectorXd g = vec({u(rng), u(rng), u(rng), u(rng)});
        const std::vector<Edge> edges{{0, 1, -u(rng), u(rng)}, {1, 2, -u(rng), u(rng)}, {0, 3, -u(rng), u(rng)},
                                      {2, 3, -u(rng), u(rng)}};
        const QPProblem p = build_curtailment_qp(d, g, edges);
        expect_feasible(p, d, VectorXd::Zero(4), 0.0);
        const QPSolution s = solve(p);
        EXPECT_LE(s.objective, curtailment_objective(p, d) + 1e-9);
        // Flows leave exactly the curtailment the optimum reports.
        EXPECT_LE((implied_curtailment(p, s.flow) - s.curtailment).cwiseAbs().maxCoeff(), 1e-5);
    }
}

TEST(Solve, WarmAndColdStartsAgree)
{
    Rng rng(11);
    std::uniform_real_distribution<double> u(0.0, 400.0);
    const std::vector<Edge> edges{{0, 1, -100, 120}, {1, 2, -90, 60}, {0, 2, -50, 50}};
    Solver warm;
    int warm_hits = 0;
    for (int k = 0; k < 200; ++k) {
        const VectorXd d = vec({300 + 0.1 * u(rng), 250 + 0.1 * u(rng), 200 + 0.1 * u(rng)});
        const VectorXd g = vec({150 + 0.1 * u(rng), 100 + 0.1 * u(rng), 250 + 0.1 * u(rng)});
        const QPProblem p = build_curtailment_qp(d, g, edges);
        const QPSolution a = warm.solve(p);
        const QPSolution b = solve(p);
        warm_hits += a.warm_started ? 1 : 0;
        EXPECT_LE((a.curtailment - b.curtailment).cwiseAbs().maxCoeff(), 10 * 1e-7 * p.scale);
        EXPECT_LE(a.kkt_residual, 1e-7);
    }
    EXPECT_GT(warm_hits, 0);
}

TEST(Kkt, ResidualsAtSolution)
{
    const std::vector<Edge> edges{{0, 1, -30, 30}};
    const QPProblem p = build_curtailment_qp(vec({100, 100}), vec({50, 200}), edges);
    const QPSolution s = solve(p);
    VectorXd x(3);
    x << s.curtailment(0), s.curtailment(1), s.flow(0);
    x /= p.scale;
    const KktResiduals r = kkt_residuals(p, x, s.active_set, s.multipliers);
    EXPECT_LE(r.max(), 1e-7);
    const KktResiduals moved = kkt_residuals(p, x + vec({0.1, 0, 0}), s.active_set, s.multipliers);
    EXPECT_GT(moved.max(), 1e-3);
    EXPECT_THROW(kkt_residuals(p, VectorXd::Zero(2), s.active_set, s.multipliers), std::invalid_argument);
}

TEST(Oracle, RefinementNeverWorsensObjective)
{
    const std::vector<Edge> edges{{0, 1, -33.3, 47.7}};
    const QPProblem p = build_curtailment_qp(vec({180, 120}), vec({100, 170}), edges);
    double previous = std::numeric_limits<double>::infinity();
    for (double h : {4.0, 2.0, 1.0, 0.5, 0.25}) {
        const GridSolution g = brute_force_oracle(p, h);
        EXPECT_LE(g.objective, previous + 1e-12) << "resolution " << h;
        previous = g.objective;
    }
    EXPECT_GE(previous, solve(p).objective - 1e-9);
}

TEST(Oracle, SkipsInfeasiblePointsAndRejectsLargeProblems)
{
    // Exports beyond node 0's 10 MW would need c0 > d0; those points are skipped.
    const std::vector<Edge> edges{{0, 1, -100, 100}};
    const QPProblem p = build_curtailment_qp(vec({5, 100}), vec({10, 0}), edges);
    const GridSolution g = brute_force_oracle(p, 1.0);
    expect_feasible(p, g.curtailment, g.flow, 1e-9);
    EXPECT_NEAR(g.flow(0), 10.0, 1e-12);
    EXPECT_NEAR(g.curtailment(1), 90.0, 1e-12);

    const std::vector<Edge> four{{0, 1, -1, 1}, {1, 2, -1, 1}, {2, 3, -1, 1}, {0, 3, -1, 1}};
    const QPProblem big = build_curtailment_qp(vec({1, 1, 1, 1}), vec({0, 0, 0, 0}), four);
    EXPECT_THROW(brute_force_oracle(big, 0.1), std::invalid_argument);
    EXPECT_THROW(brute_force_oracle(p, 0.0), std::invalid_argument);
}

TEST(Json, DumpsProblemAndSolution)
{
    const std::vector<Edge> edges{{0, 1, -30, 30}};
    const QPProblem p = build_curtailment_qp(vec({100, 100}), vec({50, 200}), edges);
    const nlohmann::json jp = to_json(p);
    EXPECT_EQ(jp["demand_mw"].size(), 2u);
    EXPECT_EQ(jp["edges"][0]["lower_mw"], -30.0);
    const nlohmann::json js = to_json(solve(p));
    EXPECT_EQ(js["status"], "optimal");
    EXPECT_NEAR(js["curtailment_mw"][0].get<double>(), 20.0, 1e-6);
}
