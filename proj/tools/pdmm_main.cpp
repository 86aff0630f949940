// Command-line front end: `pdmm solve`, `pdmm oracle`, `pdmm kalman`.
//
// Exit codes: 0 success, 2 parse error, 3 validation error,
// 4 non-convergence (or equivalence check failure), 5 infeasible problem.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include "pdmm/errors.hpp"
#include "pdmm/io.hpp"
#include "pdmm/kalman.hpp"
#include "pdmm/params.hpp"
#include "pdmm/solver.hpp"

namespace {

using nlohmann::json;

constexpr int kExitParse = 2;
constexpr int kExitValidation = 3;
constexpr int kExitNotConverged = 4;
constexpr int kExitInfeasible = 5;

void emit(const json& j, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream f(out_path);
    if (!f) throw pdmm::ParseError("cannot write " + out_path);
    f << j.dump(2) << "\n";
  }
}

json per_node_json(const pdmm::Problem& p, const Eigen::VectorXd& stacked) {
  json out = json::array();
  const auto off = p.offsets();
  for (int i = 0; i < p.node_count(); ++i)
    out.push_back(pdmm::vector_to_json(stacked.segment(off[i], p.dims[i])));
  return out;
}

int default_root(const pdmm::Graph& g, bool chain_schedule) {
  if (g.node_count == 1) return 0;
  if (chain_schedule) {
    int best = -1;
    for (int i = 0; i < g.node_count; ++i)
      if (g.neighbors(i).size() == 1) best = std::max(best, i);
    if (best >= 0) return best;
  }
  return g.node_count - 1;
}

struct SolveArgs {
  std::string problem_path;
  std::string schedule = "sync";
  std::string p_mode = "tree";
  double rho = 1.0;
  std::optional<int> root;
  double tol = 1e-8;
  long max_iters = 10000;
  std::uint64_t seed = 0;
  bool with_oracle = false;
  std::string out_path;
  std::string trace_path;
};

int cmd_solve(const SolveArgs& args) {
  const pdmm::ProblemBundle bundle = pdmm::load_problem_file(args.problem_path);
  const pdmm::Problem& p = bundle.problem;

  const bool fb_chain = args.schedule == "chain-fb";
  const bool fb_tree = args.schedule == "tree-fb";
  const bool needs_orientation = fb_chain || fb_tree || args.p_mode == "tree";

  std::optional<pdmm::Orientation> orientation;
  if (needs_orientation) {
    int root = args.root ? *args.root
                         : (bundle.root ? *bundle.root : default_root(p.graph, fb_chain));
    orientation = pdmm::orient_to_root(p.graph, root);
  }

  pdmm::PMatrixSet params;
  if (args.p_mode == "tree") {
    params = pdmm::build_tree_optimal(p, *orientation);
  } else if (args.p_mode == "uniform") {
    params = pdmm::build_uniform(p, args.rho);
  } else {  // custom
    if (!bundle.p_override)
      throw pdmm::ValidationError("--p-mode custom requires a P override in the problem file");
    params = *bundle.p_override;
  }

  pdmm::Schedule schedule;
  if (args.schedule == "sync") schedule = pdmm::Schedule::synchronous();
  else if (args.schedule == "cyclic") schedule = pdmm::Schedule::cyclic_async();
  else if (args.schedule == "random") schedule = pdmm::Schedule::random_async(args.seed);
  else if (fb_chain) schedule = pdmm::Schedule::chain_forward_backward(*orientation);
  else schedule = pdmm::Schedule::tree_forward_backward(*orientation);

  pdmm::Solver solver(p, std::move(params));

  std::optional<pdmm::OracleSolution> oracle;
  pdmm::RunOptions options;
  options.max_iters = args.max_iters;
  options.tol = args.tol;
  if (args.with_oracle) {
    oracle = pdmm::oracle_solve(p);
    options.oracle_x = &oracle->x_star;
  }

  const pdmm::RunResult result = solver.run(schedule, options);

  json out;
  out["status"] = pdmm::to_string(result.status);
  out["iterations"] = result.state.iteration;
  out["feasibility"] = solver.feasibility_norm(result.state);
  out["objective"] = pdmm::objective_value(p, solver.stack_x(result.state));
  out["x"] = per_node_json(p, solver.stack_x(result.state));
  if (oracle) out["err_vs_oracle"] = (solver.stack_x(result.state) - oracle->x_star).norm();
  emit(out, args.out_path);
  if (!args.trace_path.empty()) pdmm::write_trace_csv(args.trace_path, result.trace);

  if (result.status == pdmm::RunStatus::MaxIterationsReached) {
    std::cerr << "pdmm solve: stopped after " << result.state.iteration
              << " iterations without meeting the tolerance\n";
    return kExitNotConverged;
  }
  return 0;
}

int cmd_oracle(const std::string& problem_path, const std::string& out_path) {
  const pdmm::ProblemBundle bundle = pdmm::load_problem_file(problem_path);
  const pdmm::OracleSolution sol = pdmm::oracle_solve(bundle.problem);
  json out;
  out["x_star"] = per_node_json(bundle.problem, sol.x_star);
  json duals = json::array();
  for (const auto& d : sol.delta_star) duals.push_back(pdmm::vector_to_json(d));
  out["delta_star"] = std::move(duals);
  out["kkt_residual_norm"] = sol.residual_norm;
  emit(out, out_path);
  return 0;
}

struct KalmanArgs {
  std::string model_path;
  std::string mode = "filter";
  std::optional<int> lag;
  bool simulate = false;
  std::uint64_t seed = 0;
  std::string out_path;
};

int cmd_kalman(const KalmanArgs& args) {
  const pdmm::ModelBundle bundle = pdmm::load_model_file(args.model_path);
  const pdmm::StateSpaceModel& m = bundle.model;

  std::vector<Eigen::VectorXd> ys;
  json simulated;
  if (args.simulate) {
    const pdmm::Trajectory t = pdmm::simulate_trajectory(m, args.seed);
    ys = t.measurements;
    simulated = json::array();
    for (const auto& y : ys) simulated.push_back(pdmm::vector_to_json(y));
  } else {
    if (!bundle.measurements || bundle.measurements->empty())
      throw pdmm::ValidationError(
          "no measurements: provide them in the model file or pass --simulate");
    ys = *bundle.measurements;
  }

  json out;
  if (args.simulate) out["measurements"] = simulated;
  int exit_code = 0;

  if (args.mode == "filter") {
    pdmm::KalmanState s = pdmm::kalman_init(m);
    json steps = json::array();
    for (const auto& y : ys) {
      s = pdmm::kalman_step(m, s, y);
      json sj;
      sj["z_pred"] = pdmm::vector_to_json(s.z_pred);
      sj["D"] = pdmm::matrix_to_json(s.D);
      sj["K"] = pdmm::matrix_to_json(s.K);
      steps.push_back(std::move(sj));
    }
    out["steps"] = std::move(steps);
  } else if (args.mode == "pdmm-filter") {
    const auto steps = pdmm::pdmm_filter(m, ys);
    json sj = json::array();
    for (const auto& s : steps) {
      json one;
      one["m"] = pdmm::vector_to_json(s.message);
      one["P"] = pdmm::matrix_to_json(s.P);
      sj.push_back(std::move(one));
    }
    out["steps"] = std::move(sj);
  } else if (args.mode == "smoother") {
    const pdmm::SmootherResult sm = pdmm::pdmm_smoother(m, ys, args.lag);
    json nodes = json::array();
    for (size_t i = 0; i < sm.z.size(); ++i) {
      json nj;
      nj["u"] = pdmm::vector_to_json(sm.u[i]);
      nj["z"] = pdmm::vector_to_json(sm.z[i]);
      nodes.push_back(std::move(nj));
    }
    out["nodes"] = std::move(nodes);
  } else {  // compare
    const auto steps = pdmm::pdmm_filter(m, ys);
    pdmm::KalmanState s = pdmm::kalman_init(m);
    double prop1_dev = 0.0, thm5_dev = 0.0;
    for (size_t i = 0; i < ys.size(); ++i) {
      s = pdmm::kalman_step(m, s, ys[i]);
      prop1_dev = std::max(prop1_dev, (s.D - steps[i].P).norm() / std::max(1.0, s.D.norm()));
      thm5_dev = std::max(thm5_dev, (s.z_pred - steps[i].message).norm() /
                                        std::max(1.0, s.z_pred.norm()));
    }
    const double tolerance = 1e-6;
    out["prop1_max_dev"] = prop1_dev;
    out["thm5_max_dev"] = thm5_dev;
    out["tolerance"] = tolerance;
    const bool pass = prop1_dev <= tolerance && thm5_dev <= tolerance;
    out["pass"] = pass;
    if (!pass) {
      std::cerr << "pdmm kalman: equivalence deviation exceeds " << tolerance << "\n";
      exit_code = kExitNotConverged;
    }
  }
  emit(out, args.out_path);
  return exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PDMM solver for decomposable quadratic programs over graphs, "
               "with a Kalman-filter equivalence toolkit"};
  app.require_subcommand(1);

  SolveArgs solve_args;
  CLI::App* solve = app.add_subcommand("solve", "Run PDMM on a problem file");
  solve->add_option("problem", solve_args.problem_path, "Problem JSON file")->required();
  solve->add_option("--schedule", solve_args.schedule, "Node activation schedule")
      ->check(CLI::IsMember({"sync", "cyclic", "random", "chain-fb", "tree-fb"}));
  solve->add_option("--p-mode", solve_args.p_mode, "Weighting matrix construction")
      ->check(CLI::IsMember({"tree", "uniform", "custom"}));
  solve->add_option("--rho", solve_args.rho, "Uniform weighting scale");
  solve->add_option("--root", solve_args.root, "Root node for orientation");
  solve->add_option("--tol", solve_args.tol, "Stopping tolerance");
  solve->add_option("--max-iters", solve_args.max_iters, "Iteration cap");
  solve->add_option("--seed", solve_args.seed, "Seed for the random schedule");
  solve->add_flag("--with-oracle", solve_args.with_oracle,
                  "Track distance to the dense KKT solution in the trace");
  solve->add_option("--out", solve_args.out_path, "Solution JSON (stdout if omitted)");
  solve->add_option("--trace", solve_args.trace_path, "Per-iteration trace CSV");

  std::string oracle_problem, oracle_out;
  CLI::App* oracle = app.add_subcommand("oracle", "Dense KKT solve of a problem file");
  oracle->add_option("problem", oracle_problem, "Problem JSON file")->required();
  oracle->add_option("--out", oracle_out, "Output JSON (stdout if omitted)");

  KalmanArgs kalman_args;
  CLI::App* kalman = app.add_subcommand("kalman", "State-space estimation commands");
  kalman->add_option("model", kalman_args.model_path, "Model JSON file")->required();
  kalman->add_option("--mode", kalman_args.mode, "What to run")
      ->check(CLI::IsMember({"filter", "pdmm-filter", "smoother", "compare"}));
  kalman->add_option("--lag", kalman_args.lag, "Fixed-lag smoother depth");
  kalman->add_flag("--simulate", kalman_args.simulate, "Draw measurements from the model");
  kalman->add_option("--seed", kalman_args.seed, "Seed for --simulate");
  kalman->add_option("--out", kalman_args.out_path, "Output JSON (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitParse;
  }

  try {
    if (solve->parsed()) return cmd_solve(solve_args);
    if (oracle->parsed()) return cmd_oracle(oracle_problem, oracle_out);
    return cmd_kalman(kalman_args);
  } catch (const pdmm::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const pdmm::InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const pdmm::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
