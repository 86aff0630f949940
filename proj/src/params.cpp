#include "pdmm/params.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
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

double min_eigenvalue(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

void require_spd(const Eigen::MatrixXd& p, int i, int j) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
  if (!(lo > 1e-12 * std::max(1.0, norm)))
    throw SingularityError("weighting matrix on " + edge_name(i, j) +
                           " is not positive definite (min eigenvalue " + std::to_string(lo) +
                           ")");
}

}  // namespace

PMatrixSet build_uniform(const Problem& p, double rho) {
  if (!(rho > 0.0)) throw ValidationError("build_uniform: rho must be positive");
  PMatrixSet out;
  out.provenance = PProvenance::Uniform;
  out.rho = rho;
  out.edges = p.graph.edges;
  out.P.reserve(p.constraints.size());
  for (size_t e = 0; e < p.constraints.size(); ++e) {
    const int k = p.constraint_dim((int)e);
    out.P.push_back(rho * Eigen::MatrixXd::Identity(k, k));
  }
  return out;
}

PMatrixSet build_tree_optimal(const Problem& p, const Orientation& o) {
  validate(p);
  if (static_cast<int>(o.dist.size()) != p.node_count() ||
      o.directed_edges.size() != p.graph.edges.size())
    throw ValidationError("build_tree_optimal: orientation does not match the problem graph");
  for (auto [i, j] : o.directed_edges)
    if (!p.graph.has_edge(i, j))
      throw ValidationError("build_tree_optimal: orientation refers to missing " +
                            edge_name(i, j));

  // Deepest tails first so every preceding matrix exists when needed.
  std::vector<std::pair<int, int>> order = o.directed_edges;
  std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    if (o.dist[a.first] != o.dist[b.first]) return o.dist[a.first] > o.dist[b.first];
    return a < b;
  });

  PMatrixSet out;
  out.provenance = PProvenance::TreeOptimal;
  out.root = o.root;
  out.edges = p.graph.edges;
  out.P.assign(p.graph.edges.size(), Eigen::MatrixXd());

  for (auto [i, j] : order) {
    const int e = p.graph.edge_index(i, j);
    const Eigen::MatrixXd& Aij = p.edge_matrix(i, e);
    const int ni = p.dim(i);
    const auto& nbrs = p.graph.neighbors(i);

    Eigen::MatrixXd inner_times_At;  // = inner^-1 * Aij'
    if (nbrs.size() == 1) {
      // Leaf rule: inner matrix is Sigma_i alone, which must be nonsingular.
      Eigen::LDLT<Eigen::MatrixXd> f(p.objectives[i].Sigma);
      if (f.info() != Eigen::Success || !ldlt_invertible(f))
        throw SingularityError("build_tree_optimal: Sigma at leaf node " + std::to_string(i) +
                               " is singular");
      inner_times_At = f.solve(Aij.transpose());
    } else {
      bool all_low_rank = true;
      for (int u : nbrs) {
        if (u == j) continue;
        if (p.constraint_dim(p.graph.edge_index(i, u)) >= ni) all_low_rank = false;
      }
      Eigen::LDLT<Eigen::MatrixXd> sf(p.objectives[i].Sigma);
      if (all_low_rank && sf.info() == Eigen::Success && ldlt_invertible(sf)) {
        // Accumulate the inverse with rank-n_iu Woodbury updates.
        Eigen::MatrixXd inv = sf.solve(Eigen::MatrixXd::Identity(ni, ni));
        for (int u : nbrs) {
          if (u == j) continue;
          const int eu = p.graph.edge_index(i, u);
          const Eigen::MatrixXd& Aiu = p.edge_matrix(i, eu);
          inv = woodbury_inverse_given_cinv(inv, Aiu.transpose(), out.P[eu], Aiu);
        }
        inner_times_At = inv * Aij.transpose();
      } else {
        Eigen::MatrixXd inner = p.objectives[i].Sigma;
        for (int u : nbrs) {
          if (u == j) continue;
          const int eu = p.graph.edge_index(i, u);
          const Eigen::MatrixXd& Aiu = p.edge_matrix(i, eu);
          inner += Aiu.transpose() * out.P[eu].ldlt().solve(Aiu);
        }
        Eigen::LDLT<Eigen::MatrixXd> f(inner);
        if (f.info() != Eigen::Success || !ldlt_invertible(f))
          throw SingularityError("build_tree_optimal: inner matrix at node " +
                                 std::to_string(i) + " is singular while building " +
                                 edge_name(i, j));
        inner_times_At = f.solve(Aij.transpose());
      }
    }

    Eigen::MatrixXd P = Aij * inner_times_At;
    P = 0.5 * (P + P.transpose()).eval();
    require_spd(P, i, j);
    out.P[e] = std::move(P);
  }
  return out;
}

Assumption2Report check_assumption2(const PMatrixSet& params) {
  Assumption2Report report;
  report.edges.reserve(params.P.size());
  for (size_t e = 0; e < params.P.size(); ++e) {
    Assumption2Report::EdgeCheck check;
    if (e < params.edges.size()) {
      check.i = params.edges[e].first;
      check.j = params.edges[e].second;
    }
    const auto& P = params.P[e];
    if (P.rows() == 0 || P.rows() != P.cols() ||
        (P - P.transpose()).cwiseAbs().maxCoeff() >
            1e-10 * std::max(1.0, P.cwiseAbs().maxCoeff())) {
      check.min_eigenvalue = std::numeric_limits<double>::quiet_NaN();
      check.pass = false;
    } else {
      check.min_eigenvalue = min_eigenvalue(P);
      const double norm = P.cwiseAbs().maxCoeff();
      check.pass = check.min_eigenvalue > 1e-12 * std::max(1.0, norm);
    }
    report.all_pass = report.all_pass && check.pass;
    report.edges.push_back(check);
  }
  return report;
}

Eigen::MatrixXd woodbury_inverse(const Eigen::MatrixXd& A_inv, const Eigen::MatrixXd& U,
                                 const Eigen::MatrixXd& C, const Eigen::MatrixXd& V) {
  Eigen::PartialPivLU<Eigen::MatrixXd> cf(C);
  if (std::abs(cf.determinant()) < 1e-300)
    throw SingularityError("woodbury_inverse: C is singular");
  return woodbury_inverse_given_cinv(A_inv, U, cf.inverse(), V);
}

Eigen::MatrixXd woodbury_inverse_given_cinv(const Eigen::MatrixXd& A_inv,
                                            const Eigen::MatrixXd& U,
                                            const Eigen::MatrixXd& C_inv,
                                            const Eigen::MatrixXd& V) {
  const Eigen::MatrixXd inner = C_inv + V * A_inv * U;
  Eigen::PartialPivLU<Eigen::MatrixXd> f(inner);
  if (std::abs(f.determinant()) < 1e-300)
    throw SingularityError("woodbury_inverse: inner matrix C^-1 + V A^-1 U is singular");
  return A_inv - A_inv * U * f.solve(V * A_inv);
}

}  // namespace pdmm
