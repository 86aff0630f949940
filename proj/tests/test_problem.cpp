#include <doctest.h>

#include <Eigen/Dense>

#include "pdmm/errors.hpp"
#include "pdmm/problem.hpp"
#include "testutil.hpp"

using namespace pdmm;

TEST_CASE("validate accepts the two-node problem") {
  CHECK_NOTHROW(validate(testutil::two_node_problem()));
}

TEST_CASE("validate rejects a non-symmetric Sigma, naming the node") {
  Problem p = testutil::two_node_problem();
  p.dims[1] = 2;
  p.objectives[1].Sigma = Eigen::MatrixXd::Zero(2, 2);
  p.objectives[1].Sigma(0, 1) = 1.0;
  p.objectives[1].a = Eigen::VectorXd::Zero(2);
  p.constraints[0].A_hi = Eigen::MatrixXd::Ones(1, 2);
  CHECK_THROWS_WITH_AS(validate(p), "problem: Sigma not symmetric at node 1", ValidationError);
}

TEST_CASE("validate rejects an indefinite Sigma") {
  Problem p = testutil::two_node_problem();
  p.objectives[0].Sigma(0, 0) = -1.0;
  CHECK_THROWS_AS(validate(p), ValidationError);
}

TEST_CASE("validate rejects a wrong constraint column count, naming the edge") {
  Problem p = testutil::two_node_problem();
  p.constraints[0].A_lo = Eigen::MatrixXd::Ones(1, 2);
  try {
    validate(p);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("edge (0,1)") != std::string::npos);
  }
}

TEST_CASE("objective_value") {
  Problem single;
  single.graph = build_graph(1, {});
  single.dims = {1};
  single.objectives = {{Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1)}};
  CHECK(objective_value(single, Eigen::VectorXd::Zero(1)) == 0.0);

  Problem p = testutil::two_node_problem();
  Eigen::VectorXd x(2);
  x << 2.0, 2.0;
  CHECK(objective_value(p, x) == doctest::Approx(-4.0));
  CHECK_THROWS_AS(objective_value(p, Eigen::VectorXd::Zero(3)), ValidationError);

  // With a = 0 the PSD quadratic form is non-negative.
  testutil::Rng rng(7);
  for (int t = 0; t < 10; ++t) {
    Problem r = testutil::random_tree_problem(rng);
    for (auto& obj : r.objectives) obj.a.setZero();
    CHECK(objective_value(r, testutil::random_vector(rng, r.total_dim())) >= 0.0);
  }
}

TEST_CASE("kkt_residual on the two-node problem") {
  Problem p = testutil::two_node_problem();
  Eigen::VectorXd x_opt(2);
  x_opt << 2.0, 2.0;
  std::vector<Eigen::VectorXd> delta_opt = {Eigen::VectorXd::Ones(1)};
  CHECK(kkt_residual(p, x_opt, delta_opt).norm == doctest::Approx(0.0).epsilon(1e-14));

  Eigen::VectorXd zero = Eigen::VectorXd::Zero(2);
  std::vector<Eigen::VectorXd> delta0 = {Eigen::VectorXd::Zero(1)};
  KktResidual r = kkt_residual(p, zero, delta0);
  CHECK(r.stationarity[0](0) == doctest::Approx(-1.0));
  CHECK(r.stationarity[1](0) == doctest::Approx(-3.0));
  CHECK(r.feasibility[0].norm() == doctest::Approx(0.0));

  // Violating the constraint by t shows up as |t| in the feasibility block.
  Eigen::VectorXd x_bad(2);
  x_bad << 2.5, 2.0;
  CHECK(kkt_residual(p, x_bad, delta_opt).feasibility[0].norm() == doctest::Approx(0.5));
}

TEST_CASE("oracle_solve on the two-node problem") {
  Problem p = testutil::two_node_problem();
  OracleSolution sol = oracle_solve(p);
  CHECK(sol.x_star(0) == doctest::Approx(2.0));
  CHECK(sol.x_star(1) == doctest::Approx(2.0));
  CHECK(sol.delta_star[0](0) == doctest::Approx(1.0));
  CHECK(sol.residual_norm <= 1e-9 * kkt_scale(p));
}

TEST_CASE("oracle_solve: unconstrained single node returns a") {
  Problem p;
  p.graph = build_graph(1, {});
  p.dims = {3};
  Eigen::VectorXd v(3);
  v << 1.0, -2.0, 0.5;
  p.objectives = {{Eigen::MatrixXd::Identity(3, 3), v}};
  OracleSolution sol = oracle_solve(p);
  CHECK((sol.x_star - v).norm() <= 1e-12);
}

TEST_CASE("oracle_solve: contradictory constraints raise infeasibility") {
  // x_1 pinned to 1 via edge (0,1) and to 2 via edge (1,2).
  Problem p;
  p.graph = build_graph(3, {{0, 1}, {1, 2}});
  p.dims = {1, 1, 1};
  for (int i = 0; i < 3; ++i)
    p.objectives.push_back({Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1)});
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 1);
  Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  Eigen::VectorXd c1(1), c2(1);
  c1 << 1.0;
  c2 << 2.0;
  p.constraints = {{zero, one, c1}, {one, zero, c2}};
  CHECK_THROWS_AS(oracle_solve(p), InfeasibleError);
}

TEST_CASE("oracle_solve satisfies the KKT conditions on random trees") {
  testutil::Rng rng(20240811);
  for (int t = 0; t < 100; ++t) {
    Problem p = testutil::random_tree_problem(rng, 2, 12, 3);
    OracleSolution sol = oracle_solve(p);
    CHECK(sol.residual_norm <= 1e-9 * kkt_scale(p));
  }
}

TEST_CASE("oracle_solve minimizes over the feasible set") {
  testutil::Rng rng(99);
  for (int t = 0; t < 25; ++t) {
    Problem p = testutil::random_tree_problem(rng, 2, 8, 3);
    OracleSolution sol = oracle_solve(p);

    // Assemble the stacked constraint matrix and perturb inside its kernel.
    const auto off = p.offsets();
    int rows = 0;
    for (const auto& con : p.constraints) rows += static_cast<int>(con.c.size());
    Eigen::MatrixXd B = Eigen::MatrixXd::Zero(rows, p.total_dim());
    int row = 0;
    for (size_t e = 0; e < p.constraints.size(); ++e) {
      const auto& [lo, hi] = p.graph.edges[e];
      const int k = static_cast<int>(p.constraints[e].c.size());
      B.block(row, off[lo], k, p.dims[lo]) = p.constraints[e].A_lo;
      B.block(row, off[hi], k, p.dims[hi]) = p.constraints[e].A_hi;
      row += k;
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
    Eigen::MatrixXd kernel = lu.kernel();
    const double f_star = objective_value(p, sol.x_star);
    for (int s = 0; s < 5; ++s) {
      Eigen::VectorXd w = testutil::random_vector(rng, static_cast<int>(kernel.cols()));
      Eigen::VectorXd x = sol.x_star + kernel * w;
      CHECK(f_star <= objective_value(p, x) + 1e-8 * kkt_scale(p));
    }
  }
}
