#include "pdmm/problem.hpp"

#include <Eigen/Eigenvalues>
#include <numeric>
#include <string>

#include "pdmm/errors.hpp"

namespace pdmm {

namespace {

std::string node_name(int i) { return "node " + std::to_string(i); }

std::string edge_name(const Graph& g, int e) {
  auto [i, j] = g.edges.at(e);
  return "edge (" + std::to_string(i) + "," + std::to_string(j) + ")";
}

}  // namespace

int Problem::total_dim() const {
  return std::accumulate(dims.begin(), dims.end(), 0);
}

std::vector<int> Problem::offsets() const {
  std::vector<int> off(dims.size() + 1, 0);
  for (size_t i = 0; i < dims.size(); ++i) off[i + 1] = off[i] + dims[i];
  return off;
}

const Eigen::MatrixXd& Problem::edge_matrix(int node, int e) const {
  const auto& [lo, hi] = graph.edges.at(e);
  if (node == lo) return constraints[e].A_lo;
  if (node == hi) return constraints[e].A_hi;
  throw ValidationError("node " + std::to_string(node) + " is not an endpoint of " +
                        edge_name(graph, e));
}

int Problem::edge_peer(int node, int e) const {
  const auto& [lo, hi] = graph.edges.at(e);
  return node == lo ? hi : lo;
}

Eigen::VectorBlock<const Eigen::VectorXd> Problem::node_block(const Eigen::VectorXd& x,
                                                              int i) const {
  int off = 0;
  for (int k = 0; k < i; ++k) off += dims[k];
  return x.segment(off, dims[i]);
}

void validate(const Problem& p) {
  const int m = p.graph.node_count;
  if (static_cast<int>(p.dims.size()) != m)
    throw ValidationError("problem: expected one dimension per node");
  if (static_cast<int>(p.objectives.size()) != m)
    throw ValidationError("problem: expected one objective per node");
  if (p.constraints.size() != p.graph.edges.size())
    throw ValidationError("problem: expected one constraint per edge");

  for (int i = 0; i < m; ++i) {
    const int n = p.dims[i];
    if (n <= 0) throw ValidationError("problem: non-positive dimension at " + node_name(i));
    const auto& obj = p.objectives[i];
    if (obj.Sigma.rows() != n || obj.Sigma.cols() != n)
      throw ValidationError("problem: Sigma shape mismatch at " + node_name(i));
    if (obj.a.size() != n)
      throw ValidationError("problem: a dimension mismatch at " + node_name(i));

    const double scale = obj.Sigma.cwiseAbs().maxCoeff();
    const double asym = (obj.Sigma - obj.Sigma.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-12 * std::max(1.0, scale))
      throw ValidationError("problem: Sigma not symmetric at " + node_name(i));

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(obj.Sigma, Eigen::EigenvaluesOnly);
    const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
    if (es.eigenvalues().minCoeff() < -1e-10 * norm)
      throw ValidationError("problem: Sigma not positive semi-definite at " + node_name(i) +
                            " (min eigenvalue " + std::to_string(es.eigenvalues().minCoeff()) +
                            ")");
  }

  for (size_t e = 0; e < p.constraints.size(); ++e) {
    const auto& con = p.constraints[e];
    const auto& [lo, hi] = p.graph.edges[e];
    const int rows = static_cast<int>(con.c.size());
    if (rows <= 0)
      throw ValidationError("problem: empty constraint on " + edge_name(p.graph, (int)e));
    if (con.A_lo.rows() != rows || con.A_hi.rows() != rows)
      throw ValidationError("problem: constraint row count mismatch on " +
                            edge_name(p.graph, (int)e));
    if (con.A_lo.cols() != p.dims[lo])
      throw ValidationError("problem: constraint matrix for node " + std::to_string(lo) +
                            " has wrong column count on " + edge_name(p.graph, (int)e));
    if (con.A_hi.cols() != p.dims[hi])
      throw ValidationError("problem: constraint matrix for node " + std::to_string(hi) +
                            " has wrong column count on " + edge_name(p.graph, (int)e));
  }
}

double objective_value(const Problem& p, const Eigen::VectorXd& x) {
  if (x.size() != p.total_dim())
    throw ValidationError("objective_value: stacked vector has wrong dimension");
  const auto off = p.offsets();
  double value = 0.0;
  for (int i = 0; i < p.node_count(); ++i) {
    const auto xi = x.segment(off[i], p.dims[i]);
    value += 0.5 * xi.dot(p.objectives[i].Sigma * xi) - p.objectives[i].a.dot(xi);
  }
  return value;
}

KktResidual kkt_residual(const Problem& p, const Eigen::VectorXd& x,
                         const std::vector<Eigen::VectorXd>& delta) {
  if (x.size() != p.total_dim())
    throw ValidationError("kkt_residual: stacked vector has wrong dimension");
  if (delta.size() != p.constraints.size())
    throw ValidationError("kkt_residual: expected one dual vector per edge");
  for (size_t e = 0; e < delta.size(); ++e)
    if (delta[e].size() != p.constraint_dim((int)e))
      throw ValidationError("kkt_residual: dual dimension mismatch on " +
                            edge_name(p.graph, (int)e));

  const auto off = p.offsets();
  KktResidual r;
  r.stationarity.resize(p.node_count());
  r.feasibility.resize(p.constraints.size());

  for (int i = 0; i < p.node_count(); ++i) {
    const auto xi = x.segment(off[i], p.dims[i]);
    Eigen::VectorXd s = p.objectives[i].Sigma * xi - p.objectives[i].a;
    for (int u : p.graph.neighbors(i)) {
      const int e = p.graph.edge_index(i, u);
      s -= p.edge_matrix(i, e).transpose() * delta[e];
    }
    r.stationarity[i] = std::move(s);
  }
  for (size_t e = 0; e < p.constraints.size(); ++e) {
    const auto& [lo, hi] = p.graph.edges[e];
    r.feasibility[e] = p.constraints[e].A_lo * x.segment(off[lo], p.dims[lo]) +
                       p.constraints[e].A_hi * x.segment(off[hi], p.dims[hi]) -
                       p.constraints[e].c;
  }

  double norm = 0.0;
  for (const auto& b : r.stationarity) norm = std::max(norm, b.norm());
  for (const auto& b : r.feasibility) norm = std::max(norm, b.norm());
  r.norm = norm;
  return r;
}

double kkt_scale(const Problem& p) {
  double a2 = 0.0, c2 = 0.0;
  for (const auto& obj : p.objectives) a2 += obj.a.squaredNorm();
  for (const auto& con : p.constraints) c2 += con.c.squaredNorm();
  return 1.0 + std::sqrt(a2) + std::sqrt(c2);
}

OracleSolution oracle_solve(const Problem& p) {
  validate(p);
  const int n = p.total_dim();
  const auto off = p.offsets();
  int rows = 0;
  for (const auto& con : p.constraints) rows += static_cast<int>(con.c.size());

  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(rows, n);
  Eigen::VectorXd c(rows);
  int row = 0;
  for (size_t e = 0; e < p.constraints.size(); ++e) {
    const auto& con = p.constraints[e];
    const auto& [lo, hi] = p.graph.edges[e];
    const int k = static_cast<int>(con.c.size());
    B.block(row, off[lo], k, p.dims[lo]) = con.A_lo;
    B.block(row, off[hi], k, p.dims[hi]) = con.A_hi;
    c.segment(row, k) = con.c;
    row += k;
  }

  Eigen::VectorXd a(n);
  for (int i = 0; i < p.node_count(); ++i) a.segment(off[i], p.dims[i]) = p.objectives[i].a;

  const double scale = kkt_scale(p);

  if (rows > 0) {
    // Feasibility first, so contradictory constraints are reported as such
    // rather than as an unsolvable saddle-point system.
    Eigen::VectorXd xf = B.completeOrthogonalDecomposition().solve(c);
    if ((B * xf - c).norm() > 1e-9 * scale)
      throw InfeasibleError("oracle: constraints are inconsistent (residual " +
                            std::to_string((B * xf - c).norm()) + ")");
  }

  // Stacked KKT system:  [Sigma  -B'; B  0] [x; delta] = [a; c]
  Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n + rows, n + rows);
  for (int i = 0; i < p.node_count(); ++i)
    K.block(off[i], off[i], p.dims[i], p.dims[i]) = p.objectives[i].Sigma;
  if (rows > 0) {
    K.block(0, n, n, rows) = -B.transpose();
    K.block(n, 0, rows, n) = B;
  }
  Eigen::VectorXd rhs(n + rows);
  rhs.head(n) = a;
  rhs.tail(rows) = c;

  Eigen::VectorXd sol = K.completeOrthogonalDecomposition().solve(rhs);

  OracleSolution out;
  out.x_star = sol.head(n);
  out.delta_star.resize(p.constraints.size());
  row = n;
  for (size_t e = 0; e < p.constraints.size(); ++e) {
    const int k = p.constraint_dim((int)e);
    out.delta_star[e] = sol.segment(row, k);
    row += k;
  }

  out.residual_norm = kkt_residual(p, out.x_star, out.delta_star).norm;
  if (out.residual_norm > 1e-9 * scale)
    throw SingularityError("oracle: KKT system has no solution (no saddle point); residual " +
                           std::to_string(out.residual_norm));
  return out;
}

}  // namespace pdmm
