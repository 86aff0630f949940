#include "pdmm/kalman.hpp"

#include <Eigen/Eigenvalues>
#include <random>
#include <string>

#include "pdmm/errors.hpp"
#include "pdmm/solver.hpp"

namespace pdmm {

namespace {

void require_pd(const Eigen::MatrixXd& m, const std::string& what) {
  if (m.rows() != m.cols() || m.rows() == 0)
    throw ValidationError("model: " + what + " must be square and non-empty");
  if ((m - m.transpose()).cwiseAbs().maxCoeff() >
      1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
    throw ValidationError("model: " + what + " must be symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  if (!(lo > 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff())))
    throw ValidationError("model: " + what + " must be positive definite (min eigenvalue " +
                          std::to_string(lo) + ")");
}

Eigen::MatrixXd pd_inverse(const Eigen::MatrixXd& m) {
  return m.llt().solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

void check_shapes(const StateSpaceModel& m) {
  if (m.n <= 0 || m.r <= 0 || m.q <= 0 || m.horizon <= 0)
    throw ValidationError("model: n, r, q, horizon must all be positive");
  auto check = [&](const std::vector<Eigen::MatrixXd>& seq, int rows, int cols,
                   const std::string& name) {
    if (static_cast<int>(seq.size()) != m.horizon)
      throw ValidationError("model: expected one " + name + " per step");
    for (const auto& mat : seq)
      if (mat.rows() != rows || mat.cols() != cols)
        throw ValidationError("model: " + name + " has wrong shape");
  };
  check(m.F, m.n, m.n, "F");
  check(m.G, m.n, m.r, "G");
  check(m.H, m.q, m.n, "H");
  check(m.Q, m.r, m.r, "Q");
  check(m.R, m.q, m.q, "R");
  if (m.Pi0.rows() != m.n || m.Pi0.cols() != m.n)
    throw ValidationError("model: Pi0 has wrong shape");
}

}  // namespace

void validate_model(const StateSpaceModel& m) {
  check_shapes(m);
  for (int l = 0; l < m.horizon; ++l) {
    require_pd(m.Q[l], "Q at step " + std::to_string(l));
    require_pd(m.R[l], "R at step " + std::to_string(l));
    Eigen::MatrixXd FG(m.n, m.n + m.r);
    FG << m.F[l], m.G[l];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(FG);
    const double smax = svd.singularValues().maxCoeff();
    if (!(smax > 0.0) || svd.singularValues().minCoeff() < 1e-10 * smax)
      throw ValidationError("model: [F G] at step " + std::to_string(l) +
                            " is not of full row rank");
  }
  require_pd(m.Pi0, "Pi0");
  if (!m.S.empty()) {
    if (static_cast<int>(m.S.size()) != m.horizon)
      throw ValidationError("model: expected one S per step");
    for (const auto& s : m.S) {
      if (s.rows() != m.r || s.cols() != m.q)
        throw ValidationError("model: S has wrong shape");
      if (s.cwiseAbs().maxCoeff() != 0.0)
        throw ValidationError("model: correlated process/measurement noise (S != 0) "
                              "is not supported");
    }
  }
}

StateSpaceModel time_invariant_model(int horizon, const Eigen::MatrixXd& F,
                                     const Eigen::MatrixXd& G, const Eigen::MatrixXd& H,
                                     const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                                     const Eigen::MatrixXd& Pi0) {
  StateSpaceModel m;
  m.n = static_cast<int>(F.rows());
  m.r = static_cast<int>(G.cols());
  m.q = static_cast<int>(H.rows());
  m.horizon = horizon;
  m.F.assign(horizon, F);
  m.G.assign(horizon, G);
  m.H.assign(horizon, H);
  m.Q.assign(horizon, Q);
  m.R.assign(horizon, R);
  m.Pi0 = Pi0;
  validate_model(m);
  return m;
}

KalmanState kalman_init(const StateSpaceModel& m) {
  validate_model(m);
  KalmanState s;
  s.z_pred = Eigen::VectorXd::Zero(m.n);
  s.D = m.Pi0;
  s.K = Eigen::MatrixXd::Zero(m.n, m.q);
  s.step = 0;
  return s;
}

KalmanState kalman_step(const StateSpaceModel& m, const KalmanState& s,
                        const Eigen::VectorXd& y) {
  const int l = s.step;
  if (l < 0 || l >= m.horizon)
    throw ValidationError("kalman_step: step " + std::to_string(l) + " outside the horizon");
  if (y.size() != m.q) throw ValidationError("kalman_step: measurement has wrong dimension");

  const Eigen::MatrixXd& F = m.F[l];
  const Eigen::MatrixXd& H = m.H[l];
  Eigen::MatrixXd S_innov = H * s.D * H.transpose() + m.R[l];
  S_innov = 0.5 * (S_innov + S_innov.transpose()).eval();
  Eigen::LDLT<Eigen::MatrixXd> f(S_innov);
  const auto d = f.vectorD();
  if (f.info() != Eigen::Success ||
      d.cwiseAbs().minCoeff() <= 1e-14 * std::max(1.0, d.cwiseAbs().maxCoeff()))
    throw SingularityError("kalman_step: innovation covariance is singular at step " +
                           std::to_string(l));

  KalmanState next;
  next.K = f.solve(H * s.D * F.transpose()).transpose();
  next.z_pred = (F - next.K * H) * s.z_pred + next.K * y;
  Eigen::MatrixXd D = F * s.D * F.transpose() + m.G[l] * m.Q[l] * m.G[l].transpose() -
                      next.K * S_innov * next.K.transpose();
  next.D = 0.5 * (D + D.transpose());
  next.step = l + 1;
  return next;
}

MlChainProblem ml_chain_problem(const StateSpaceModel& m,
                                const std::vector<Eigen::VectorXd>& ys) {
  validate_model(m);
  const int steps = static_cast<int>(ys.size());
  if (steps < 1) throw ValidationError("ml_chain_problem: at least one measurement required");
  if (steps > m.horizon)
    throw ValidationError("ml_chain_problem: more measurements than the model horizon");
  for (const auto& y : ys)
    if (y.size() != m.q)
      throw ValidationError("ml_chain_problem: measurement dimension mismatch");

  const int n = m.n, r = m.r;
  const int d = r + n;
  const int nodes = steps + 1;

  std::vector<std::pair<int, int>> edge_list;
  for (int i = 0; i < steps; ++i) edge_list.emplace_back(i, i + 1);

  MlChainProblem chain;
  chain.noise_dim = r;
  chain.state_dim = n;
  chain.steps = steps;
  Problem& p = chain.problem;
  p.graph = build_graph(nodes, edge_list);
  p.dims.assign(nodes, d);
  p.objectives.resize(nodes);
  p.constraints.resize(steps);

  const Eigen::MatrixXd Pi0_inv = pd_inverse(m.Pi0);
  for (int i = 0; i < steps; ++i) {
    const Eigen::MatrixXd Rinv = pd_inverse(m.R[i]);
    Eigen::MatrixXd Sigma = Eigen::MatrixXd::Zero(d, d);
    Sigma.topLeftCorner(r, r) = pd_inverse(m.Q[i]);
    Sigma.bottomRightCorner(n, n) = m.H[i].transpose() * Rinv * m.H[i];
    if (i == 0) Sigma.bottomRightCorner(n, n) += Pi0_inv;
    Eigen::VectorXd a = Eigen::VectorXd::Zero(d);
    a.tail(n) = m.H[i].transpose() * (Rinv * ys[i]);
    p.objectives[i] = {0.5 * (Sigma + Sigma.transpose()), std::move(a)};

    EdgeConstraint con;
    con.A_lo = Eigen::MatrixXd::Zero(n, d);
    con.A_lo.leftCols(r) = -m.G[i];
    con.A_lo.rightCols(n) = -m.F[i];
    con.A_hi = Eigen::MatrixXd::Zero(n, d);
    con.A_hi.rightCols(n) = Eigen::MatrixXd::Identity(n, n);
    con.c = Eigen::VectorXd::Zero(n);
    p.constraints[i] = std::move(con);
  }
  // The newest node has no measurement yet, so no local objective.
  p.objectives[steps] = {Eigen::MatrixXd::Zero(d, d), Eigen::VectorXd::Zero(d)};

  validate(p);
  return chain;
}

PMatrixSet build_P_statespace(const StateSpaceModel& m, int l) {
  validate_model(m);
  if (l < 0 || l >= m.horizon)
    throw ValidationError("build_P_statespace: step index outside the horizon");

  PMatrixSet out;
  out.provenance = PProvenance::TreeOptimal;
  out.root = l + 1;
  out.P.reserve(l + 1);
  out.edges.reserve(l + 1);

  Eigen::MatrixXd z_prior = pd_inverse(m.Pi0);  // P_{-1,0}^-1 = Pi0^-1
  for (int i = 0; i <= l; ++i) {
    const int n = m.n, r = m.r;
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(r + n, r + n);
    J.topLeftCorner(r, r) = pd_inverse(m.Q[i]);
    J.bottomRightCorner(n, n) =
        m.H[i].transpose() * pd_inverse(m.R[i]) * m.H[i] + z_prior;
    Eigen::MatrixXd GF(n, r + n);
    GF << m.G[i], m.F[i];
    Eigen::MatrixXd P = GF * J.ldlt().solve(GF.transpose());
    P = 0.5 * (P + P.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    if (!(lo > 1e-12 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff())))
      throw SingularityError("build_P_statespace: P on edge (" + std::to_string(i) + "," +
                             std::to_string(i + 1) + ") is not positive definite despite the "
                             "model assumptions (min eigenvalue " + std::to_string(lo) + ")");
    z_prior = pd_inverse(P);
    out.P.push_back(std::move(P));
    out.edges.emplace_back(i, i + 1);
  }
  return out;
}

std::vector<FilterStep> pdmm_filter(const StateSpaceModel& m,
                                    const std::vector<Eigen::VectorXd>& ys) {
  const MlChainProblem chain = ml_chain_problem(m, ys);
  const int steps = chain.steps;
  PMatrixSet params = build_P_statespace(m, steps - 1);
  Solver solver(chain.problem, std::move(params));

  std::vector<FilterStep> out;
  out.reserve(steps);
  for (int i = 0; i < steps; ++i) {
    std::vector<std::pair<int, Eigen::VectorXd>> incoming;
    if (i > 0) incoming.emplace_back(i - 1, out[i - 1].message);
    out.push_back({solver.forward_message_direct(i, i + 1, incoming), solver.params().P[i]});
  }
  return out;
}

SmootherResult pdmm_smoother(const StateSpaceModel& m, const std::vector<Eigen::VectorXd>& ys,
                             std::optional<int> lag) {
  if (lag && *lag < 0) throw ValidationError("pdmm_smoother: lag must be non-negative");
  const MlChainProblem chain = ml_chain_problem(m, ys);
  const int steps = chain.steps;
  PMatrixSet params = build_P_statespace(m, steps - 1);
  Solver solver(chain.problem, std::move(params));
  const Graph& g = chain.problem.graph;

  SolverState st = init_state(chain.problem);
  std::vector<Eigen::VectorXd> fwd(steps);
  for (int i = 0; i < steps; ++i) {
    std::vector<std::pair<int, Eigen::VectorXd>> incoming;
    if (i > 0) incoming.emplace_back(i - 1, fwd[i - 1]);
    fwd[i] = solver.forward_message_direct(i, i + 1, incoming);
    st.messages[message_slot(g, i, i + 1)] = fwd[i];
  }

  // Backward sweep after absorbing y_l. The newest node's local system is
  // singular (its process-noise block is untouched by any term), so its
  // minimum-norm update is taken directly: z equals the forward message,
  // u stays zero.
  auto sweep = [&](int l, int depth) {
    const int rt = l + 1;
    Eigen::VectorXd x_root = Eigen::VectorXd::Zero(chain.noise_dim + chain.state_dim);
    x_root.tail(chain.state_dim) = fwd[l];
    st.x_hat[rt] = x_root;
    st.messages[message_slot(g, rt, l)] = solver.message_update(st, rt, l, x_root);
    const int stop = std::max(0, l - depth);
    for (int i = l; i >= stop; --i) {
      Eigen::VectorXd xi = solver.local_x_update(st, i);
      st.x_hat[i] = xi;
      if (i > 0) st.messages[message_slot(g, i, i - 1)] = solver.message_update(st, i, i - 1, xi);
    }
  };

  if (lag) {
    for (int l = 0; l < steps; ++l) sweep(l, *lag);
  } else {
    sweep(steps - 1, steps - 1);  // full backward pass reaches node 0
  }

  SmootherResult out;
  out.u.reserve(steps + 1);
  out.z.reserve(steps + 1);
  for (int i = 0; i <= steps; ++i) {
    out.u.push_back(chain.u_block(st.x_hat[i]));
    out.z.push_back(chain.z_block(st.x_hat[i]));
  }
  return out;
}

Trajectory simulate_trajectory(const StateSpaceModel& m, std::uint64_t seed) {
  validate_model(m);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto draw = [&](int k) {
    Eigen::VectorXd w(k);
    for (int i = 0; i < k; ++i) w[i] = gauss(rng);
    return w;
  };

  Trajectory t;
  t.states.reserve(m.horizon + 1);
  t.measurements.reserve(m.horizon);
  t.states.push_back(Eigen::MatrixXd(m.Pi0.llt().matrixL()) * draw(m.n));
  for (int l = 0; l < m.horizon; ++l) {
    const Eigen::VectorXd& z = t.states.back();
    t.measurements.push_back(m.H[l] * z + Eigen::MatrixXd(m.R[l].llt().matrixL()) * draw(m.q));
    t.states.push_back(m.F[l] * z +
                       m.G[l] * (Eigen::MatrixXd(m.Q[l].llt().matrixL()) * draw(m.r)));
  }
  return t;
}

}  // namespace pdmm
