#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pdmm/graph.hpp"

namespace pdmm {

// Local quadratic objective f_i(x) = 1/2 x'*Sigma*x - a'*x.
struct NodeObjective {
  Eigen::MatrixXd Sigma;
  Eigen::VectorXd a;
};

// Linear equality constraint over an edge (i,j), i < j after normalization:
//   A_lo * x_i + A_hi * x_j = c
// A_lo acts on the lower-id endpoint, A_hi on the higher-id one. Both have
// c.size() rows.
struct EdgeConstraint {
  Eigen::MatrixXd A_lo;
  Eigen::MatrixXd A_hi;
  Eigen::VectorXd c;
};

// Decomposable quadratic program: one objective per node, one linear
// equality constraint per edge of an undirected graph.
struct Problem {
  Graph graph;
  std::vector<int> dims;                    // per-node variable dimension
  std::vector<NodeObjective> objectives;    // indexed by node
  std::vector<EdgeConstraint> constraints;  // indexed like graph.edges

  int node_count() const { return graph.node_count; }
  int dim(int i) const { return dims.at(i); }
  int total_dim() const;
  int constraint_dim(int e) const { return static_cast<int>(constraints.at(e).c.size()); }

  // Offset of node i's block inside the stacked vector x.
  std::vector<int> offsets() const;

  // Constraint matrix of `node` on edge e (A_lo if node is the lower-id
  // endpoint of the edge, A_hi otherwise).
  const Eigen::MatrixXd& edge_matrix(int node, int e) const;
  // The other endpoint of edge e as seen from `node`.
  int edge_peer(int node, int e) const;

  Eigen::VectorBlock<const Eigen::VectorXd> node_block(const Eigen::VectorXd& x, int i) const;
};

// Checks every structural invariant: symmetric PSD Sigma (eigenvalues down
// to -1e-10 * ||Sigma|| are accepted), consistent dimensions everywhere.
// Throws ValidationError naming the offending node or edge.
void validate(const Problem& p);

double objective_value(const Problem& p, const Eigen::VectorXd& x);

struct KktResidual {
  std::vector<Eigen::VectorXd> stationarity;  // per node: Sigma_i x_i - a_i - sum_j A'_i delta_ij
  std::vector<Eigen::VectorXd> feasibility;   // per edge: A_lo x_lo + A_hi x_hi - c
  double norm = 0.0;                          // max l2 norm over all blocks
};

KktResidual kkt_residual(const Problem& p, const Eigen::VectorXd& x,
                         const std::vector<Eigen::VectorXd>& delta);

// Scale used by the relative residual tolerances: 1 + ||a|| + ||c||.
double kkt_scale(const Problem& p);

struct OracleSolution {
  Eigen::VectorXd x_star;                  // stacked primal optimum
  std::vector<Eigen::VectorXd> delta_star; // per-edge duals (minimum norm)
  double residual_norm = 0.0;
};

// Dense saddle-point solve of the stacked KKT equations. Rank-deficient
// systems are resolved by a minimum-norm least-squares solve; inconsistent
// constraints raise InfeasibleError.
OracleSolution oracle_solve(const Problem& p);

}  // namespace pdmm
