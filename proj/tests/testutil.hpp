#pragma once

// Shared generators for the unit and acceptance suites. Everything is
// seeded; no test depends on global RNG state.

#include <Eigen/Dense>
#include <random>
#include <utility>
#include <vector>

#include "pdmm/kalman.hpp"
#include "pdmm/params.hpp"
#include "pdmm/problem.hpp"
#include "pdmm/solver.hpp"

namespace testutil {

using Rng = std::mt19937_64;

inline Eigen::MatrixXd random_matrix(Rng& rng, int rows, int cols) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = g(rng);
  return m;
}

inline Eigen::VectorXd random_vector(Rng& rng, int n) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

inline Eigen::MatrixXd random_spd(Rng& rng, int n) {
  std::uniform_real_distribution<double> shift(0.5, 1.5);
  const Eigen::MatrixXd g = random_matrix(rng, n, n);
  return g * g.transpose() + shift(rng) * Eigen::MatrixXd::Identity(n, n);
}

// Gaussian matrix redrawn until its smallest singular value has a margin,
// keeping the generated problems numerically benign.
inline Eigen::MatrixXd random_full_row_rank(Rng& rng, int rows, int cols) {
  for (;;) {
    Eigen::MatrixXd m = random_matrix(rng, rows, cols);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    if (svd.singularValues().minCoeff() > 0.3) return m;
  }
}

inline pdmm::Problem problem_on_tree(Rng& rng, int nodes,
                                     const std::vector<std::pair<int, int>>& edges,
                                     int max_dim = 3) {
  std::uniform_int_distribution<int> dim_pick(1, max_dim);
  pdmm::Problem p;
  p.graph = pdmm::build_graph(nodes, edges);
  p.dims.resize(nodes);
  p.objectives.resize(nodes);
  for (int i = 0; i < nodes; ++i) {
    p.dims[i] = dim_pick(rng);
    p.objectives[i] = {random_spd(rng, p.dims[i]), random_vector(rng, p.dims[i])};
  }
  p.constraints.resize(p.graph.edge_count());
  for (int e = 0; e < p.graph.edge_count(); ++e) {
    const auto& [lo, hi] = p.graph.edges[e];
    std::uniform_int_distribution<int> k_pick(1, std::min(p.dims[lo], p.dims[hi]));
    const int k = k_pick(rng);
    p.constraints[e] = {random_full_row_rank(rng, k, p.dims[lo]),
                        random_full_row_rank(rng, k, p.dims[hi]), random_vector(rng, k)};
  }
  pdmm::validate(p);
  return p;
}

inline pdmm::Problem random_tree_problem(Rng& rng, int min_nodes = 2, int max_nodes = 12,
                                         int max_dim = 3) {
  std::uniform_int_distribution<int> node_pick(min_nodes, max_nodes);
  const int m = node_pick(rng);
  std::vector<std::pair<int, int>> edges;
  for (int k = 1; k < m; ++k) {
    std::uniform_int_distribution<int> parent(0, k - 1);
    edges.emplace_back(parent(rng), k);
  }
  return problem_on_tree(rng, m, edges, max_dim);
}

inline pdmm::Problem random_chain_problem(Rng& rng, int min_len = 2, int max_len = 10,
                                          int max_dim = 3) {
  std::uniform_int_distribution<int> len_pick(min_len, max_len);
  const int m = len_pick(rng);
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i + 1 < m; ++i) edges.emplace_back(i, i + 1);
  return problem_on_tree(rng, m, edges, max_dim);
}

// Scalar consensus: f_i = 1/2 x^2 - a_i x, constraints x_i = x_j per edge.
inline pdmm::Problem consensus_problem(int nodes, const std::vector<std::pair<int, int>>& edges,
                                       Rng& rng) {
  pdmm::Problem p;
  p.graph = pdmm::build_graph(nodes, edges);
  p.dims.assign(nodes, 1);
  p.objectives.resize(nodes);
  for (int i = 0; i < nodes; ++i)
    p.objectives[i] = {Eigen::MatrixXd::Identity(1, 1), random_vector(rng, 1)};
  p.constraints.resize(p.graph.edge_count());
  for (int e = 0; e < p.graph.edge_count(); ++e) {
    Eigen::MatrixXd plus(1, 1), minus(1, 1);
    plus << 1.0;
    minus << -1.0;
    p.constraints[e] = {plus, minus, Eigen::VectorXd::Zero(1)};
  }
  pdmm::validate(p);
  return p;
}

// The worked two-node instance used across the suites: Sigma = (1,1),
// a = (1,3), one constraint x_0 - x_1 = 0; optimum x* = (2,2), dual 1.
inline pdmm::Problem two_node_problem() {
  pdmm::Problem p;
  p.graph = pdmm::build_graph(2, {{0, 1}});
  p.dims = {1, 1};
  Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  Eigen::VectorXd a0(1), a1(1);
  a0 << 1.0;
  a1 << 3.0;
  p.objectives = {{one, a0}, {one, a1}};
  Eigen::MatrixXd plus(1, 1), minus(1, 1);
  plus << 1.0;
  minus << -1.0;
  p.constraints = {{plus, minus, Eigen::VectorXd::Zero(1)}};
  pdmm::validate(p);
  return p;
}

// All-scalar chain 0-1-2 with Sigma = 1, a = (1,1,0), constraints
// x_i - x_{i+1} = 0; the tree-optimal set for root 2 is P_01 = 1, P_12 = 0.5.
inline pdmm::Problem scalar_chain3_problem() {
  pdmm::Problem p;
  p.graph = pdmm::build_graph(3, {{0, 1}, {1, 2}});
  p.dims = {1, 1, 1};
  Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  Eigen::VectorXd a0(1), a1(1), a2(1);
  a0 << 1.0;
  a1 << 1.0;
  a2 << 0.0;
  p.objectives = {{one, a0}, {one, a1}, {one, a2}};
  Eigen::MatrixXd plus(1, 1), minus(1, 1);
  plus << 1.0;
  minus << -1.0;
  p.constraints = {{plus, minus, Eigen::VectorXd::Zero(1)},
                   {plus, minus, Eigen::VectorXd::Zero(1)}};
  pdmm::validate(p);
  return p;
}

inline pdmm::StateSpaceModel random_model(Rng& rng, int max_dim = 4, int max_horizon = 10) {
  std::uniform_int_distribution<int> dim_pick(1, max_dim);
  std::uniform_int_distribution<int> horizon_pick(2, max_horizon);
  pdmm::StateSpaceModel m;
  m.n = dim_pick(rng);
  m.r = dim_pick(rng);
  m.q = dim_pick(rng);
  m.horizon = horizon_pick(rng);
  for (int l = 0; l < m.horizon; ++l) {
    // Redraw until [F G] has full row rank with margin.
    for (;;) {
      Eigen::MatrixXd F = random_matrix(rng, m.n, m.n);
      Eigen::MatrixXd G = random_matrix(rng, m.n, m.r);
      Eigen::MatrixXd FG(m.n, m.n + m.r);
      FG << F, G;
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(FG);
      if (svd.singularValues().minCoeff() > 0.3) {
        m.F.push_back(std::move(F));
        m.G.push_back(std::move(G));
        break;
      }
    }
    m.H.push_back(random_matrix(rng, m.q, m.n));
    m.Q.push_back(random_spd(rng, m.r));
    m.R.push_back(random_spd(rng, m.q));
  }
  m.Pi0 = random_spd(rng, m.n);
  pdmm::validate_model(m);
  return m;
}

inline std::vector<Eigen::VectorXd> random_measurements(Rng& rng, const pdmm::StateSpaceModel& m,
                                                        int count) {
  std::vector<Eigen::VectorXd> ys;
  for (int l = 0; l < count; ++l) ys.push_back(random_vector(rng, m.q));
  return ys;
}

// State sitting exactly at a saddle point: x at the optimum and every
// message consistent with the optimal duals.
inline pdmm::SolverState saddle_state(const pdmm::Solver& solver,
                                      const pdmm::OracleSolution& sol) {
  const pdmm::Problem& p = solver.problem();
  pdmm::SolverState st = pdmm::init_state(p);
  const auto off = p.offsets();
  for (int i = 0; i < p.node_count(); ++i) st.x_hat[i] = sol.x_star.segment(off[i], p.dims[i]);
  for (int e = 0; e < p.graph.edge_count(); ++e) {
    const auto& [lo, hi] = p.graph.edges[e];
    const auto& con = p.constraints[e];
    const auto& P = solver.params().P[e];
    st.messages[pdmm::message_slot(p.graph, lo, hi)] =
        P * sol.delta_star[e] + con.c - con.A_lo * st.x_hat[lo];
    st.messages[pdmm::message_slot(p.graph, hi, lo)] =
        P * sol.delta_star[e] + con.c - con.A_hi * st.x_hat[hi];
  }
  return st;
}

inline pdmm::SolverState random_state(Rng& rng, const pdmm::Problem& p, double scale = 1.0) {
  pdmm::SolverState st = pdmm::init_state(p);
  for (int i = 0; i < p.node_count(); ++i) st.x_hat[i] = scale * random_vector(rng, p.dims[i]);
  for (size_t s = 0; s < st.messages.size(); ++s)
    st.messages[s] = scale * random_vector(rng, static_cast<int>(st.messages[s].size()));
  return st;
}

inline double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  return (got - want).norm() / (1.0 + want.norm());
}

inline double rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want) {
  return (got - want).norm() / (1.0 + want.norm());
}

}  // namespace testutil
