#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "pdmm/problem.hpp"

namespace pdmm {

enum class PProvenance { TreeOptimal, Uniform, Custom };

// One symmetric positive definite weighting matrix per undirected edge.
// The matrix has no direction: the same P_ij serves both message directions.
struct PMatrixSet {
  std::vector<Eigen::MatrixXd> P;              // indexed like `edges`
  std::vector<std::pair<int, int>> edges;      // copy of the graph's edge list
  PProvenance provenance = PProvenance::Custom;
  int root = -1;                               // set for TreeOptimal
  double rho = 0.0;                            // set for Uniform

  const Eigen::MatrixXd& at(int e) const { return P.at(e); }
};

// P_ij = rho * I for every edge.
PMatrixSet build_uniform(const Problem& p, double rho);

// Recursive weighting-matrix construction along the orientation, processed
// from the deepest directed edges towards the root:
//   leaf tail u (single neighbor v):  P_uv = A_u (Sigma_u)^-1 A_u'
//   interior [i,j]: P_ij = A_i|j (Sigma_i + sum_{u in N_i\j} A_i|u' P_ui^-1 A_i|u)^-1 A_i|j'
// Every produced matrix is verified symmetric positive definite.
PMatrixSet build_tree_optimal(const Problem& p, const Orientation& o);

struct Assumption2Report {
  struct EdgeCheck {
    int i = 0, j = 0;
    double min_eigenvalue = 0.0;
    bool pass = false;
  };
  std::vector<EdgeCheck> edges;
  bool all_pass = true;
};

// Per-edge positive-definiteness report: min eigenvalue > 1e-12 * max(1, ||P||).
Assumption2Report check_assumption2(const PMatrixSet& params);

// (A + U C V)^-1 = A^-1 - A^-1 U (C^-1 + V A^-1 U)^-1 V A^-1, given A^-1.
Eigen::MatrixXd woodbury_inverse(const Eigen::MatrixXd& A_inv, const Eigen::MatrixXd& U,
                                 const Eigen::MatrixXd& C, const Eigen::MatrixXd& V);

// Variant taking C^-1 directly; used where the inverse is already at hand.
Eigen::MatrixXd woodbury_inverse_given_cinv(const Eigen::MatrixXd& A_inv,
                                            const Eigen::MatrixXd& U,
                                            const Eigen::MatrixXd& C_inv,
                                            const Eigen::MatrixXd& V);

}  // namespace pdmm
