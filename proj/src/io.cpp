#include "pdmm/io.hpp"

#include <cstdio>
#include <fstream>

#include "pdmm/errors.hpp"

namespace pdmm {

namespace {

using nlohmann::json;

json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << j.dump(2) << "\n";
}

const json& field(const json& j, const std::string& key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(where + ": missing field '" + key + "'");
  return *it;
}

int int_field(const json& j, const std::string& key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_number_integer()) throw ParseError(where + ": field '" + key + "' must be an integer");
  return v.get<int>();
}

}  // namespace

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  return out;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Eigen::MatrixXd matrix_from_json(const json& j, int rows, int cols, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows * cols)
    throw ParseError(what + ": expected a flat row-major array of " + std::to_string(rows) +
                     "x" + std::to_string(cols) + " = " + std::to_string(rows * cols) +
                     " numbers");
  Eigen::MatrixXd m(rows, cols);
  int k = 0;
  for (int i = 0; i < rows; ++i)
    for (int c = 0; c < cols; ++c, ++k) {
      if (!j[k].is_number()) throw ParseError(what + ": non-numeric entry");
      m(i, c) = j[k].get<double>();
    }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, int size, const std::string& what) {
  if (!j.is_array() || static_cast<int>(j.size()) != size)
    throw ParseError(what + ": expected an array of " + std::to_string(size) + " numbers");
  Eigen::VectorXd v(size);
  for (int i = 0; i < size; ++i) {
    if (!j[i].is_number()) throw ParseError(what + ": non-numeric entry");
    v[i] = j[i].get<double>();
  }
  return v;
}

ProblemBundle load_problem_file(const std::string& path) {
  const json j = parse_file(path);
  const json& nodes = field(j, "nodes", path);
  const json& edges = field(j, "edges", path);
  if (!nodes.is_array() || nodes.empty()) throw ParseError(path + ": 'nodes' must be a non-empty array");
  if (!edges.is_array()) throw ParseError(path + ": 'edges' must be an array");

  const int m = static_cast<int>(nodes.size());
  std::vector<int> dims(m, -1);
  std::vector<NodeObjective> objectives(m);
  for (const json& nj : nodes) {
    const int id = int_field(nj, "id", path + " node");
    if (id < 0 || id >= m) throw ParseError(path + ": node id " + std::to_string(id) + " out of range");
    if (dims[id] >= 0) throw ParseError(path + ": duplicate node id " + std::to_string(id));
    const int dim = int_field(nj, "dim", path + " node");
    if (dim <= 0) throw ParseError(path + ": node " + std::to_string(id) + " has non-positive dim");
    dims[id] = dim;
    const std::string where = path + " node " + std::to_string(id);
    objectives[id].Sigma = matrix_from_json(field(nj, "Sigma", where), dim, dim, where + " Sigma");
    objectives[id].a = vector_from_json(field(nj, "a", where), dim, where + " a");
  }

  std::vector<std::pair<int, int>> edge_list;
  std::vector<EdgeConstraint> constraints_in_file_order;
  for (const json& ej : edges) {
    const int i = int_field(ej, "i", path + " edge");
    const int jn = int_field(ej, "j", path + " edge");
    if (i < 0 || i >= m || jn < 0 || jn >= m)
      throw ParseError(path + ": edge endpoint out of range");
    const std::string where = path + " edge (" + std::to_string(i) + "," + std::to_string(jn) + ")";
    const json& cj = field(ej, "c", where);
    if (!cj.is_array() || cj.empty()) throw ParseError(where + ": 'c' must be a non-empty array");
    const int k = static_cast<int>(cj.size());
    EdgeConstraint con;
    con.c = vector_from_json(cj, k, where + " c");
    Eigen::MatrixXd A_i = matrix_from_json(field(ej, "A_i_on_j", where), k, dims[i], where + " A_i_on_j");
    Eigen::MatrixXd A_j = matrix_from_json(field(ej, "A_j_on_i", where), k, dims[jn], where + " A_j_on_i");
    if (i < jn) {
      con.A_lo = std::move(A_i);
      con.A_hi = std::move(A_j);
    } else {
      con.A_lo = std::move(A_j);
      con.A_hi = std::move(A_i);
    }
    edge_list.emplace_back(i, jn);
    constraints_in_file_order.push_back(std::move(con));
  }

  ProblemBundle out;
  out.problem.graph = build_graph(m, edge_list);
  out.problem.dims = dims;
  out.problem.objectives = std::move(objectives);
  out.problem.constraints.resize(edge_list.size());
  for (size_t e = 0; e < edge_list.size(); ++e) {
    auto [i, jn] = edge_list[e];
    const int idx = out.problem.graph.edge_index(i, jn);
    out.problem.constraints[idx] = std::move(constraints_in_file_order[e]);
  }
  validate(out.problem);

  if (j.contains("root")) {
    if (!j["root"].is_number_integer()) throw ParseError(path + ": 'root' must be an integer");
    const int root = j["root"].get<int>();
    if (root < 0 || root >= m) throw ValidationError(path + ": root node out of range");
    out.root = root;
  }

  if (j.contains("P")) {
    const json& pj = j["P"];
    if (!pj.is_array()) throw ParseError(path + ": 'P' must be an array");
    PMatrixSet ps;
    ps.provenance = PProvenance::Custom;
    ps.edges = out.problem.graph.edges;
    ps.P.assign(out.problem.graph.edge_count(), Eigen::MatrixXd());
    for (const json& ej : pj) {
      const int i = int_field(ej, "i", path + " P");
      const int jn = int_field(ej, "j", path + " P");
      const int e = out.problem.graph.edge_index(i, jn);
      if (e < 0)
        throw ParseError(path + ": P entry refers to missing edge (" + std::to_string(i) + "," +
                         std::to_string(jn) + ")");
      const int k = out.problem.constraint_dim(e);
      ps.P[e] = matrix_from_json(field(ej, "P", path + " P"), k, k, path + " P entry");
    }
    for (int e = 0; e < out.problem.graph.edge_count(); ++e)
      if (ps.P[e].rows() == 0)
        throw ParseError(path + ": P override must cover every edge");
    out.p_override = std::move(ps);
  }
  return out;
}

void save_problem_file(const std::string& path, const Problem& p, std::optional<int> root,
                       const std::optional<PMatrixSet>& p_override) {
  json j;
  j["nodes"] = json::array();
  for (int i = 0; i < p.node_count(); ++i) {
    json nj;
    nj["id"] = i;
    nj["dim"] = p.dims[i];
    nj["Sigma"] = matrix_to_json(p.objectives[i].Sigma);
    nj["a"] = vector_to_json(p.objectives[i].a);
    j["nodes"].push_back(std::move(nj));
  }
  j["edges"] = json::array();
  for (int e = 0; e < p.graph.edge_count(); ++e) {
    const auto& [lo, hi] = p.graph.edges[e];
    json ej;
    ej["i"] = lo;
    ej["j"] = hi;
    ej["A_i_on_j"] = matrix_to_json(p.constraints[e].A_lo);
    ej["A_j_on_i"] = matrix_to_json(p.constraints[e].A_hi);
    ej["c"] = vector_to_json(p.constraints[e].c);
    j["edges"].push_back(std::move(ej));
  }
  if (root) j["root"] = *root;
  if (p_override) {
    json pj = json::array();
    for (size_t e = 0; e < p_override->P.size(); ++e) {
      json ej;
      ej["i"] = p_override->edges[e].first;
      ej["j"] = p_override->edges[e].second;
      ej["P"] = matrix_to_json(p_override->P[e]);
      pj.push_back(std::move(ej));
    }
    j["P"] = std::move(pj);
  }
  write_file(path, j);
}

namespace {

// Shared matrices are flat arrays, per-step ones arrays of flat arrays.
std::vector<Eigen::MatrixXd> matrix_sequence(const json& j, int horizon, int rows, int cols,
                                             const std::string& what) {
  if (!j.is_array() || j.empty()) throw ParseError(what + ": expected an array");
  if (j[0].is_array()) {
    if (static_cast<int>(j.size()) != horizon)
      throw ParseError(what + ": per-step list must have one entry per horizon step");
    std::vector<Eigen::MatrixXd> out;
    out.reserve(horizon);
    for (int l = 0; l < horizon; ++l)
      out.push_back(matrix_from_json(j[l], rows, cols, what + " step " + std::to_string(l)));
    return out;
  }
  return std::vector<Eigen::MatrixXd>(horizon, matrix_from_json(j, rows, cols, what));
}

}  // namespace

ModelBundle load_model_file(const std::string& path) {
  const json j = parse_file(path);
  ModelBundle out;
  StateSpaceModel& m = out.model;
  m.n = int_field(j, "n", path);
  m.r = int_field(j, "r", path);
  m.q = int_field(j, "q", path);
  m.horizon = int_field(j, "horizon", path);
  if (m.n <= 0 || m.r <= 0 || m.q <= 0 || m.horizon <= 0)
    throw ParseError(path + ": n, r, q, horizon must be positive");
  m.F = matrix_sequence(field(j, "F", path), m.horizon, m.n, m.n, path + " F");
  m.G = matrix_sequence(field(j, "G", path), m.horizon, m.n, m.r, path + " G");
  m.H = matrix_sequence(field(j, "H", path), m.horizon, m.q, m.n, path + " H");
  m.Q = matrix_sequence(field(j, "Q", path), m.horizon, m.r, m.r, path + " Q");
  m.R = matrix_sequence(field(j, "R", path), m.horizon, m.q, m.q, path + " R");
  m.Pi0 = matrix_from_json(field(j, "Pi0", path), m.n, m.n, path + " Pi0");
  if (j.contains("S"))
    m.S = matrix_sequence(j["S"], m.horizon, m.r, m.q, path + " S");
  validate_model(m);

  if (j.contains("measurements")) {
    const json& mj = j["measurements"];
    if (!mj.is_array()) throw ParseError(path + ": 'measurements' must be an array");
    if (static_cast<int>(mj.size()) > m.horizon)
      throw ValidationError(path + ": more measurements than the model horizon");
    std::vector<Eigen::VectorXd> ys;
    ys.reserve(mj.size());
    for (size_t l = 0; l < mj.size(); ++l)
      ys.push_back(vector_from_json(mj[l], m.q, path + " measurement " + std::to_string(l)));
    out.measurements = std::move(ys);
  }
  return out;
}

void save_model_file(const std::string& path, const StateSpaceModel& m,
                     const std::optional<std::vector<Eigen::VectorXd>>& measurements) {
  auto seq = [](const std::vector<Eigen::MatrixXd>& v) {
    json out = json::array();
    for (const auto& mat : v) out.push_back(matrix_to_json(mat));
    return out;
  };
  json j;
  j["n"] = m.n;
  j["r"] = m.r;
  j["q"] = m.q;
  j["horizon"] = m.horizon;
  j["F"] = seq(m.F);
  j["G"] = seq(m.G);
  j["H"] = seq(m.H);
  j["Q"] = seq(m.Q);
  j["R"] = seq(m.R);
  j["Pi0"] = matrix_to_json(m.Pi0);
  if (!m.S.empty()) j["S"] = seq(m.S);
  if (measurements) {
    json mj = json::array();
    for (const auto& y : *measurements) mj.push_back(vector_to_json(y));
    j["measurements"] = std::move(mj);
  }
  write_file(path, j);
}

void write_trace_csv(const std::string& path, const Trace& trace) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out << "iteration,active_node,feasibility,objective,err_vs_oracle\n";
  char buf[96];
  for (const auto& r : trace) {
    std::snprintf(buf, sizeof(buf), "%ld,%d,%.17g,%.17g,%.17g", r.iteration, r.active_node,
                  r.feasibility, r.objective, r.err_vs_oracle);
    out << buf << "\n";
  }
}

}  // namespace pdmm
