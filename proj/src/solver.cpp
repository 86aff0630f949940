#include "pdmm/solver.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "pdmm/errors.hpp"

namespace pdmm {

namespace {

std::string edge_name(int i, int j) {
  return "edge (" + std::to_string(i) + "," + std::to_string(j) + ")";
}

bool ldlt_invertible(const Eigen::LDLT<Eigen::MatrixXd>& f) {
  const auto d = f.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (!(dmax > 0.0)) return false;
  return d.cwiseAbs().minCoeff() > 1e-13 * dmax;
}

}  // namespace

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "Converged";
    case RunStatus::FiniteScheduleComplete: return "FiniteScheduleComplete";
    case RunStatus::MaxIterationsReached: return "MaxIterationsReached";
  }
  return "Unknown";
}

int message_slot(const Graph& g, int from, int to) {
  const int e = g.edge_index(from, to);
  if (e < 0)
    throw ValidationError("message_slot: no " + edge_name(from, to));
  return 2 * e + (from < to ? 0 : 1);
}

SolverState init_state(const Problem& p) {
  return init_state(p, std::nullopt, std::nullopt);
}

SolverState init_state(const Problem& p, const std::optional<Eigen::VectorXd>& x0,
                       const std::optional<std::vector<Eigen::VectorXd>>& m0) {
  SolverState st;
  st.x_hat.resize(p.node_count());
  const auto off = p.offsets();
  if (x0) {
    if (x0->size() != p.total_dim())
      throw ValidationError("init_state: x0 has wrong stacked dimension");
    for (int i = 0; i < p.node_count(); ++i) st.x_hat[i] = x0->segment(off[i], p.dims[i]);
  } else {
    for (int i = 0; i < p.node_count(); ++i) st.x_hat[i] = Eigen::VectorXd::Zero(p.dims[i]);
  }

  const size_t slots = 2 * p.constraints.size();
  if (m0) {
    if (m0->size() != slots)
      throw ValidationError("init_state: expected one message per directed edge pair");
    for (size_t s = 0; s < slots; ++s) {
      const int k = p.constraint_dim(static_cast<int>(s / 2));
      if ((*m0)[s].size() != k)
        throw ValidationError("init_state: message dimension mismatch on " +
                              edge_name(p.graph.edges[s / 2].first, p.graph.edges[s / 2].second));
    }
    st.messages = *m0;
  } else {
    st.messages.resize(slots);
    for (size_t s = 0; s < slots; ++s)
      st.messages[s] = Eigen::VectorXd::Zero(p.constraint_dim(static_cast<int>(s / 2)));
  }
  st.iteration = 0;
  return st;
}

Eigen::VectorXd lambda_from_message(const Eigen::MatrixXd& P_ij,
                                    const Eigen::VectorXd& m_j_to_i,
                                    const Eigen::VectorXd& c_ij,
                                    const Eigen::MatrixXd& A_j_on_i,
                                    const Eigen::VectorXd& x_j) {
  Eigen::LDLT<Eigen::MatrixXd> f(P_ij);
  if (f.info() != Eigen::Success || !ldlt_invertible(f))
    throw SingularityError("lambda_from_message: P is singular");
  return f.solve(m_j_to_i - c_ij + A_j_on_i * x_j);
}

Solver::Solver(Problem p, PMatrixSet params)
    : problem_(std::move(p)), params_(std::move(params)) {
  validate(problem_);
  if (params_.P.size() != problem_.constraints.size())
    throw ValidationError("solver: weighting set does not cover every edge");
  if (!params_.edges.empty() && params_.edges != problem_.graph.edges)
    throw ValidationError("solver: weighting set edge list does not match the graph");

  const int ne = problem_.graph.edge_count();
  p_fact_.resize(ne);
  weights_.resize(2 * ne);
  for (int e = 0; e < ne; ++e) {
    const auto& P = params_.P[e];
    const int k = problem_.constraint_dim(e);
    if (P.rows() != k || P.cols() != k)
      throw ValidationError("solver: weighting matrix dimension mismatch on " +
                            edge_name(problem_.graph.edges[e].first,
                                      problem_.graph.edges[e].second));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    if (!(lo > 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff())))
      throw SingularityError("solver: weighting matrix on " +
                             edge_name(problem_.graph.edges[e].first,
                                       problem_.graph.edges[e].second) +
                             " is not positive definite (min eigenvalue " + std::to_string(lo) +
                             ")");
    p_fact_[e] = P.ldlt();
    weights_[2 * e] = p_fact_[e].solve(problem_.constraints[e].A_lo).transpose();
    weights_[2 * e + 1] = p_fact_[e].solve(problem_.constraints[e].A_hi).transpose();
  }

  const int m = problem_.node_count();
  node_fact_.resize(m);
  node_singular_.assign(m, 0);
  for (int i = 0; i < m; ++i) {
    Eigen::MatrixXd M = problem_.objectives[i].Sigma;
    for (int u : problem_.graph.neighbors(i)) {
      const int e = problem_.graph.edge_index(i, u);
      M += weights_[message_slot(problem_.graph, i, u)] * problem_.edge_matrix(i, e);
    }
    M = 0.5 * (M + M.transpose()).eval();
    node_fact_[i] = M.ldlt();
    node_singular_[i] = (node_fact_[i].info() != Eigen::Success ||
                         !ldlt_invertible(node_fact_[i]))
                            ? 1
                            : 0;
  }
}

void Solver::validate_state(const SolverState& state) const {
  if (static_cast<int>(state.x_hat.size()) != problem_.node_count() ||
      state.messages.size() != 2 * problem_.constraints.size())
    throw ValidationError("solver: state shape does not match the problem");
  for (int i = 0; i < problem_.node_count(); ++i)
    if (state.x_hat[i].size() != problem_.dims[i])
      throw ValidationError("solver: x dimension mismatch at node " + std::to_string(i));
  for (size_t s = 0; s < state.messages.size(); ++s)
    if (state.messages[s].size() != problem_.constraint_dim(static_cast<int>(s / 2)))
      throw ValidationError("solver: message dimension mismatch");
}

const Eigen::VectorXd& Solver::message(const SolverState& state, int from, int to) const {
  return state.messages[message_slot(problem_.graph, from, to)];
}

Eigen::VectorXd Solver::stack_x(const SolverState& state) const {
  Eigen::VectorXd x(problem_.total_dim());
  const auto off = problem_.offsets();
  for (int i = 0; i < problem_.node_count(); ++i) x.segment(off[i], problem_.dims[i]) = state.x_hat[i];
  return x;
}

Eigen::VectorXd Solver::local_x_update(const SolverState& state, int i) const {
  if (i < 0 || i >= problem_.node_count())
    throw ValidationError("local_x_update: node out of range");
  if (node_singular_[i])
    throw SingularityError("local_x_update: singular local system at node " + std::to_string(i));
  Eigen::VectorXd rhs = problem_.objectives[i].a;
  for (int u : problem_.graph.neighbors(i)) {
    rhs += weights_[message_slot(problem_.graph, i, u)] *
           state.messages[message_slot(problem_.graph, u, i)];
  }
  return node_fact_[i].solve(rhs);
}

Eigen::VectorXd Solver::message_update(const SolverState& state, int i, int j,
                                       const Eigen::VectorXd& x_i_new) const {
  const int e = problem_.graph.edge_index(i, j);
  if (e < 0) throw ValidationError("message_update: no " + edge_name(i, j));
  if (x_i_new.size() != problem_.dims[i])
    throw ValidationError("message_update: x dimension mismatch at node " + std::to_string(i));
  return state.messages[message_slot(problem_.graph, j, i)] + problem_.constraints[e].c -
         2.0 * (problem_.edge_matrix(i, e) * x_i_new);
}

void Solver::sync_iteration(SolverState& state) const {
  validate_state(state);
  const int m = problem_.node_count();
  std::vector<Eigen::VectorXd> x_new(m);
  for (int i = 0; i < m; ++i) x_new[i] = local_x_update(state, i);

  std::vector<Eigen::VectorXd> msg_new(state.messages.size());
  for (int i = 0; i < m; ++i)
    for (int j : problem_.graph.neighbors(i))
      msg_new[message_slot(problem_.graph, i, j)] = message_update(state, i, j, x_new[i]);

  state.x_hat = std::move(x_new);
  state.messages = std::move(msg_new);
  ++state.iteration;
}

void Solver::async_step(SolverState& state, int i) const {
  if (i < 0 || i >= problem_.node_count())
    throw ValidationError("async_step: node out of range");
  Eigen::VectorXd x_new = local_x_update(state, i);
  // Outgoing slots are disjoint from the incoming ones read above, so the
  // writes below cannot feed back into this step.
  for (int j : problem_.graph.neighbors(i))
    state.messages[message_slot(problem_.graph, i, j)] = message_update(state, i, j, x_new);
  state.x_hat[i] = std::move(x_new);
  ++state.iteration;
}

Eigen::VectorXd Solver::forward_message_direct(
    int i, int j, const std::vector<std::pair<int, Eigen::VectorXd>>& incoming) const {
  const int e = problem_.graph.edge_index(i, j);
  if (e < 0) throw ValidationError("forward_message_direct: no " + edge_name(i, j));
  if (node_singular_[i])
    throw SingularityError("forward_message_direct: singular local system at node " +
                           std::to_string(i));
  const auto& nbrs = problem_.graph.neighbors(i);
  if (incoming.size() != nbrs.size() - 1)
    throw ValidationError("forward_message_direct: expected one message per neighbor of " +
                          std::to_string(i) + " except " + std::to_string(j));

  Eigen::VectorXd rhs = problem_.objectives[i].a;
  std::vector<char> seen(problem_.node_count(), 0);
  for (const auto& [u, m_u] : incoming) {
    const int eu = problem_.graph.edge_index(i, u);
    if (u == j || eu < 0 || seen[u])
      throw ValidationError("forward_message_direct: unexpected incoming message from node " +
                            std::to_string(u));
    seen[u] = 1;
    if (m_u.size() != problem_.constraint_dim(eu))
      throw ValidationError("forward_message_direct: message dimension mismatch from node " +
                            std::to_string(u));
    rhs += weights_[message_slot(problem_.graph, i, u)] * m_u;
  }
  const Eigen::VectorXd y = node_fact_[i].solve(rhs);
  return problem_.constraints[e].c - 2.0 * (problem_.edge_matrix(i, e) * y);
}

double Solver::feasibility_norm(const SolverState& state) const {
  double worst = 0.0;
  for (size_t e = 0; e < problem_.constraints.size(); ++e) {
    const auto& con = problem_.constraints[e];
    const auto& [lo, hi] = problem_.graph.edges[e];
    worst = std::max(worst,
                     (con.A_lo * state.x_hat[lo] + con.A_hi * state.x_hat[hi] - con.c).norm());
  }
  return worst;
}

std::vector<Eigen::VectorXd> Solver::dual_estimate(const SolverState& state) const {
  std::vector<Eigen::VectorXd> delta(problem_.constraints.size());
  for (size_t e = 0; e < problem_.constraints.size(); ++e) {
    const auto& [lo, hi] = problem_.graph.edges[e];
    delta[e] = lambda_from_message(params_.P[e], message(state, hi, lo),
                                   problem_.constraints[e].c, problem_.constraints[e].A_hi,
                                   state.x_hat[hi]);
  }
  return delta;
}

void Solver::run_forward_backward(SolverState& state, const Orientation& o,
                                  const std::function<void(int)>& after_iteration) const {
  // Forward: deepest tails first, so every preceding message is already fixed
  // when an edge is selected.
  std::vector<std::pair<int, int>> order = o.directed_edges;
  std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    if (o.dist[a.first] != o.dist[b.first]) return o.dist[a.first] > o.dist[b.first];
    return a < b;
  });
  for (auto [i, j] : order) {
    std::vector<std::pair<int, Eigen::VectorXd>> incoming;
    for (int u : problem_.graph.neighbors(i))
      if (u != j) incoming.emplace_back(u, message(state, u, i));
    state.messages[message_slot(problem_.graph, i, j)] =
        forward_message_direct(i, j, incoming);
    ++state.iteration;
    after_iteration(i);
  }

  // Backward: root first, then outward by distance; each activation computes
  // the optimal x and pushes fixed messages to the node's children.
  std::vector<int> nodes(problem_.node_count());
  for (int i = 0; i < problem_.node_count(); ++i) nodes[i] = i;
  std::sort(nodes.begin(), nodes.end(), [&](int a, int b) {
    if (o.dist[a] != o.dist[b]) return o.dist[a] < o.dist[b];
    return a < b;
  });
  for (int i : nodes) {
    async_step(state, i);
    after_iteration(i);
  }
}

RunResult Solver::run(const Schedule& schedule, const RunOptions& options) const {
  const int m = problem_.node_count();

  if (schedule.kind == ScheduleKind::ChainForwardBackward ||
      schedule.kind == ScheduleKind::TreeForwardBackward) {
    if (!schedule.orientation)
      throw ValidationError("run: forward/backward schedules require an orientation");
    const Orientation& o = *schedule.orientation;
    if (static_cast<int>(o.dist.size()) != m ||
        o.directed_edges.size() != problem_.graph.edges.size() || o.root < 0 || o.root >= m)
      throw ValidationError("run: orientation does not match the problem graph");
    for (auto [i, j] : o.directed_edges)
      if (!problem_.graph.has_edge(i, j) || o.dist[j] != o.dist[i] - 1)
        throw ValidationError("run: orientation edge " + edge_name(i, j) +
                              " is inconsistent with the distances");
    if (!is_tree(problem_.graph))
      throw ValidationError("run: forward/backward schedules require a tree");
    if (schedule.kind == ScheduleKind::ChainForwardBackward) {
      if (!is_chain(problem_.graph))
        throw ValidationError("run: chain schedule requires a chain graph");
      if (m > 1 && problem_.graph.neighbors(o.root).size() != 1)
        throw ValidationError("run: chain schedule requires the root at an endpoint");
    }
  }

  RunResult result;
  result.state = options.initial ? *options.initial : init_state();
  validate_state(result.state);
  SolverState& st = result.state;

  const bool with_oracle = options.oracle_x != nullptr;
  auto record = [&](int active) {
    TraceRecord r;
    r.iteration = st.iteration;
    r.active_node = active;
    r.feasibility = feasibility_norm(st);
    r.objective = objective_value(problem_, stack_x(st));
    if (with_oracle) r.err_vs_oracle = (stack_x(st) - *options.oracle_x).norm();
    result.trace.push_back(r);
    if (options.observer) options.observer(st, active);
  };

  switch (schedule.kind) {
    case ScheduleKind::ChainForwardBackward:
    case ScheduleKind::TreeForwardBackward:
      run_forward_backward(st, *schedule.orientation, record);
      result.status = RunStatus::FiniteScheduleComplete;
      return result;

    case ScheduleKind::Synchronous:
    case ScheduleKind::CyclicAsync:
    case ScheduleKind::RandomAsync: {
      std::mt19937_64 rng(schedule.seed);
      std::uniform_int_distribution<int> pick(0, m - 1);
      result.status = RunStatus::MaxIterationsReached;
      for (long k = 0; k < options.max_iters; ++k) {
        const Eigen::VectorXd x_prev = stack_x(st);
        int active = -1;
        if (schedule.kind == ScheduleKind::Synchronous) {
          sync_iteration(st);
        } else {
          active = schedule.kind == ScheduleKind::CyclicAsync ? static_cast<int>(k % m)
                                                              : pick(rng);
          async_step(st, active);
        }
        record(active);
        const double dx = (stack_x(st) - x_prev).norm();
        if (feasibility_norm(st) <= options.tol && dx <= options.tol) {
          result.status = RunStatus::Converged;
          break;
        }
      }
      return result;
    }
  }
  throw ValidationError("run: unknown schedule kind");
}

}  // namespace pdmm
