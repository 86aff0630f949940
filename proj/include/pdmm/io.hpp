#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdmm/kalman.hpp"
#include "pdmm/params.hpp"
#include "pdmm/problem.hpp"
#include "pdmm/solver.hpp"

namespace pdmm {

// Matrices travel as flat row-major arrays with shapes implied by the
// declared node/edge/model dimensions.
nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);
nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::MatrixXd matrix_from_json(const nlohmann::json& j, int rows, int cols,
                                 const std::string& what);
Eigen::VectorXd vector_from_json(const nlohmann::json& j, int size, const std::string& what);

struct ProblemBundle {
  Problem problem;
  std::optional<int> root;
  std::optional<PMatrixSet> p_override;
};

ProblemBundle load_problem_file(const std::string& path);
void save_problem_file(const std::string& path, const Problem& p,
                       std::optional<int> root = std::nullopt,
                       const std::optional<PMatrixSet>& p_override = std::nullopt);

struct ModelBundle {
  StateSpaceModel model;
  std::optional<std::vector<Eigen::VectorXd>> measurements;
};

ModelBundle load_model_file(const std::string& path);
void save_model_file(const std::string& path, const StateSpaceModel& m,
                     const std::optional<std::vector<Eigen::VectorXd>>& measurements =
                         std::nullopt);

// CSV with header iteration,active_node,feasibility,objective,err_vs_oracle;
// floats are written with 17 significant digits.
void write_trace_csv(const std::string& path, const Trace& trace);

}  // namespace pdmm
