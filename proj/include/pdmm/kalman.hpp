#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "pdmm/params.hpp"
#include "pdmm/problem.hpp"

namespace pdmm {

// Linear Gaussian state-space model
//   z_{l+1} = F_l z_l + G_l u_l,   y_l = H_l z_l + v_l
// with u_l ~ N(0, Q_l), v_l ~ N(0, R_l), z_0 ~ N(0, Pi0). Time-invariant
// models store the same matrix repeated per step.
struct StateSpaceModel {
  int n = 0;        // state dimension
  int r = 0;        // process-noise dimension
  int q = 0;        // measurement dimension
  int horizon = 0;  // number of modeled steps
  std::vector<Eigen::MatrixXd> F, G, H, Q, R;  // one entry per step
  Eigen::MatrixXd Pi0;
  // Optional process/measurement cross covariance; must be all zeros when
  // present (correlated noise is not supported).
  std::vector<Eigen::MatrixXd> S;
};

// Q_l, R_l, Pi0 positive definite; [F_l G_l] full row rank; consistent shapes.
void validate_model(const StateSpaceModel& m);

StateSpaceModel time_invariant_model(int horizon, const Eigen::MatrixXd& F,
                                     const Eigen::MatrixXd& G, const Eigen::MatrixXd& H,
                                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                     const Eigen::MatrixXd& Pi0);

struct KalmanState {
  Eigen::VectorXd z_pred;  // one-step prediction of z_{step}
  Eigen::MatrixXd D;       // its error covariance
  Eigen::MatrixXd K;       // gain used by the latest step
  int step = 0;
};

KalmanState kalman_init(const StateSpaceModel& m);

// One measurement update:
//   K_l     = F_l D_l H_l' (H_l D_l H_l' + R_l)^-1
//   z_pred' = (F_l - K_l H_l) z_pred + K_l y
//   D'      = F_l D_l F_l' + G_l Q_l G_l' - K_l (H_l D_l H_l' + R_l) K_l'
KalmanState kalman_step(const StateSpaceModel& m, const KalmanState& s,
                        const Eigen::VectorXd& y);

// Maximum-likelihood estimation of the states given y_0..y_l, rewritten as a
// decomposable quadratic program over the chain 0 - 1 - ... - l+1 with node
// variables x_i = [u_i; z_i]. Node l+1 carries no objective (its measurement
// has not arrived); edge (i,i+1) encodes z_{i+1} - F_i z_i - G_i u_i = 0.
struct MlChainProblem {
  Problem problem;
  int noise_dim = 0;  // r: u block is [0, r) inside each node variable
  int state_dim = 0;  // n: z block is [r, r+n)
  int steps = 0;      // measurements folded in (nodes = steps + 1)

  Eigen::VectorXd u_block(const Eigen::VectorXd& x_i) const { return x_i.head(noise_dim); }
  Eigen::VectorXd z_block(const Eigen::VectorXd& x_i) const { return x_i.tail(state_dim); }
};

MlChainProblem ml_chain_problem(const StateSpaceModel& m,
                                const std::vector<Eigen::VectorXd>& ys);

// Specialized weighting recursion for the ML chain:
//   P_{i,i+1} = [G_i F_i] J_i^-1 [G_i F_i]'
//   J_0 = diag(Q_0^-1, H_0' R_0^-1 H_0 + Pi0^-1)
//   J_i = diag(Q_i^-1, H_i' R_i^-1 H_i + P_{i-1,i}^-1)
// Produces P_{i,i+1} for i = 0..l; agrees with the generic tree-optimal
// construction on the reformulated chain.
PMatrixSet build_P_statespace(const StateSpaceModel& m, int l);

struct FilterStep {
  Eigen::VectorXd message;  // converged forward message m*_{i->i+1}
  Eigen::MatrixXd P;        // P_{i,i+1}
};

// Forward PDMM pass over the ML chain. The returned messages equal the
// Kalman one-step predictions and are append-only: extending the
// measurement sequence never changes earlier entries.
std::vector<FilterStep> pdmm_filter(const StateSpaceModel& m,
                                    const std::vector<Eigen::VectorXd>& ys);

struct SmootherResult {
  std::vector<Eigen::VectorXd> u;  // per chain node (u of the root is zero)
  std::vector<Eigen::VectorXd> z;
};

// Forward pass plus backward refinement. Without a lag the full backward
// pass runs once and every node gets its smoothed estimate; with lag kappa
// each step refreshes only nodes l .. l-kappa (clamped at node 0).
SmootherResult pdmm_smoother(const StateSpaceModel& m, const std::vector<Eigen::VectorXd>& ys,
                             std::optional<int> lag = std::nullopt);

struct Trajectory {
  std::vector<Eigen::VectorXd> states;        // z_0 .. z_horizon
  std::vector<Eigen::VectorXd> measurements;  // y_0 .. y_{horizon-1}
};

// Seeded Gaussian draws through the model equations; deterministic per seed.
Trajectory simulate_trajectory(const StateSpaceModel& m, std::uint64_t seed);

}  // namespace pdmm
