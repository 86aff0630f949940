#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "pdmm/params.hpp"
#include "pdmm/problem.hpp"

namespace pdmm {

// Solver state: per-node primal estimates and one message per directed pair.
// Messages are stored two per edge: slot 2e holds the message from the
// lower-id endpoint to the higher-id one, slot 2e+1 the reverse.
struct SolverState {
  std::vector<Eigen::VectorXd> x_hat;
  std::vector<Eigen::VectorXd> messages;
  long iteration = 0;
};

// Index of the message travelling from -> to inside SolverState::messages.
int message_slot(const Graph& g, int from, int to);

// All-zeros state, or one populated from an explicit stacked x0 / message set.
SolverState init_state(const Problem& p);
SolverState init_state(const Problem& p, const std::optional<Eigen::VectorXd>& x0,
                       const std::optional<std::vector<Eigen::VectorXd>>& m0);

// Inverts the message definition m_{j->i} = P_ij lambda_{j|i} + (c_ij - A_{j|i} x_j).
Eigen::VectorXd lambda_from_message(const Eigen::MatrixXd& P_ij,
                                    const Eigen::VectorXd& m_j_to_i,
                                    const Eigen::VectorXd& c_ij,
                                    const Eigen::MatrixXd& A_j_on_i,
                                    const Eigen::VectorXd& x_j);

enum class ScheduleKind {
  Synchronous,
  CyclicAsync,
  RandomAsync,
  ChainForwardBackward,
  TreeForwardBackward,
};

struct Schedule {
  ScheduleKind kind = ScheduleKind::Synchronous;
  std::uint64_t seed = 0;                   // RandomAsync node selection
  std::optional<Orientation> orientation;   // forward/backward schedules

  static Schedule synchronous() { return {ScheduleKind::Synchronous, 0, std::nullopt}; }
  static Schedule cyclic_async() { return {ScheduleKind::CyclicAsync, 0, std::nullopt}; }
  static Schedule random_async(std::uint64_t seed) {
    return {ScheduleKind::RandomAsync, seed, std::nullopt};
  }
  static Schedule chain_forward_backward(Orientation o) {
    return {ScheduleKind::ChainForwardBackward, 0, std::move(o)};
  }
  static Schedule tree_forward_backward(Orientation o) {
    return {ScheduleKind::TreeForwardBackward, 0, std::move(o)};
  }
};

struct TraceRecord {
  long iteration = 0;
  int active_node = -1;  // -1 for synchronous iterations
  double feasibility = 0.0;
  double objective = 0.0;
  double err_vs_oracle = std::numeric_limits<double>::quiet_NaN();
};
using Trace = std::vector<TraceRecord>;

enum class RunStatus { Converged, FiniteScheduleComplete, MaxIterationsReached };

const char* to_string(RunStatus s);

struct RunOptions {
  long max_iters = 10000;
  double tol = 1e-8;
  const Eigen::VectorXd* oracle_x = nullptr;   // enables the error trace column
  const SolverState* initial = nullptr;        // defaults to all zeros
  // Invoked after every completed iteration with the active node (-1 = sync).
  std::function<void(const SolverState&, int)> observer;
};

struct RunResult {
  SolverState state;
  Trace trace;
  RunStatus status = RunStatus::MaxIterationsReached;
};

// PDMM engine over a fixed problem/weighting pair. Construction factorizes
// the per-node local systems Sigma_i + sum_u A_i|u' P_iu^-1 A_i|u once; all
// update operations reuse those factorizations. Immutable after
// construction, so one engine may drive many states concurrently.
class Solver {
 public:
  Solver(Problem p, PMatrixSet params);

  const Problem& problem() const { return problem_; }
  const PMatrixSet& params() const { return params_; }

  SolverState init_state() const { return pdmm::init_state(problem_); }

  // Closed-form local minimizer of f_i plus the message-anchored proximal
  // terms. Throws SingularityError if the node's local system is singular.
  Eigen::VectorXd local_x_update(const SolverState& state, int i) const;

  // m_{i->j}^{k+1} = m_{j->i}^k + (c_ij - 2 A_i|j x_i_new); pure, state unchanged.
  Eigen::VectorXd message_update(const SolverState& state, int i, int j,
                                 const Eigen::VectorXd& x_i_new) const;

  // All x from the previous iteration's messages, then all messages from the
  // previous iteration's reverse messages and the fresh x.
  void sync_iteration(SolverState& state) const;

  // Updates x_i and the outgoing messages of node i; nothing else.
  void async_step(SolverState& state, int i) const;

  // Converged forward message over [i,j] from fixed incoming messages
  // {(u, m_u->i) : u in N_i \ j}; never reads m_{j->i}.
  Eigen::VectorXd forward_message_direct(
      int i, int j, const std::vector<std::pair<int, Eigen::VectorXd>>& incoming) const;

  RunResult run(const Schedule& schedule, const RunOptions& options = {}) const;

  // Max l2 norm over per-edge constraint violations.
  double feasibility_norm(const SolverState& state) const;

  // Per-edge dual estimates recovered from the higher-id-to-lower-id message.
  std::vector<Eigen::VectorXd> dual_estimate(const SolverState& state) const;

  const Eigen::VectorXd& message(const SolverState& state, int from, int to) const;
  Eigen::VectorXd stack_x(const SolverState& state) const;

 private:
  void validate_state(const SolverState& state) const;
  void run_forward_backward(SolverState& state, const Orientation& o,
                            const std::function<void(int)>& after_iteration) const;

  Problem problem_;
  PMatrixSet params_;
  std::vector<Eigen::LDLT<Eigen::MatrixXd>> p_fact_;   // per edge
  std::vector<Eigen::MatrixXd> weights_;               // per slot: A' P^-1
  std::vector<Eigen::LDLT<Eigen::MatrixXd>> node_fact_;
  std::vector<char> node_singular_;
};

}  // namespace pdmm
