#include "bhpm/cli/commands.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "bhpm/cli/io.hpp"
#include "bhpm/errors.hpp"
#include "bhpm/hpm.hpp"
#include "bhpm/verify.hpp"

namespace bhpm::cli {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json optional_number(const std::optional<double>& v) {
  return v ? ordered_json(*v) : ordered_json(nullptr);
}

ordered_json residual_json(const ResidualReport& r) {
  ordered_json j;
  j["state_sup"] = r.state_sup;
  j["state_l2"] = r.state_l2;
  j["costate_sup"] = r.costate_sup;
  j["costate_l2"] = r.costate_l2;
  j["initial_defect"] = r.initial_defect;
  j["terminal_defect"] = r.terminal_defect;
  j["ode_sup"] = r.ode_sup();
  j["grid_step"] = r.grid_step;
  return j;
}

void print_residual(std::ostream& out, const ResidualReport& r) {
  out << "  state residual    sup " << format_number(r.state_sup) << "  L2 "
      << format_number(r.state_l2) << '\n'
      << "  costate residual  sup " << format_number(r.costate_sup) << "  L2 "
      << format_number(r.costate_l2) << '\n'
      << "  initial defect        " << format_number(r.initial_defect) << '\n'
      << "  terminal defect       " << format_number(r.terminal_defect) << '\n';
}

int even_steps(int k) { return k % 2 == 0 ? k : k + 1; }

void check_config(const RunConfig& config) {
  if (config.orders < 1) throw std::invalid_argument("--orders must be >= 1");
  if (config.grid_steps < 2) throw std::invalid_argument("--grid-steps must be >= 2");
  if (!(config.tol > 0.0)) throw std::invalid_argument("--tol must be positive");
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write '" + path.string() + "'");
  return f;
}

int run_solve(const BilinearProblem& problem, const RunConfig& config, bool demo,
              std::ostream& out, std::ostream& err) {
  check_config(config);
  for (const auto& w : problem.warnings()) err << "warning: " << w << '\n';

  const int K = even_steps(config.grid_steps);
  if (K != config.grid_steps) {
    err << "note: grid steps rounded up to " << K << " (Simpson cost needs an even count)\n";
  }
  const TimeGrid grid(problem.t0(), problem.tf(), K);

  const auto start = std::chrono::steady_clock::now();
  const HpmSolution sol = hpm_iterate(problem, grid, {config.orders, config.tol, config.mode});
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const ResidualReport residual = tpbvp_residual(problem, sol.x_sum, sol.lam_sum, config.mode);

  std::vector<std::string> warnings = sol.report.warnings;
  std::optional<double> cost_sim;
  std::optional<double> terminal_sim;
  try {
    const Trajectory x_sim = forward_simulate(problem, sol.u, problem.x0());
    cost_sim = cost_evaluate(problem, x_sim, sol.u);
    terminal_sim = Vector(x_sim.at(x_sim.size() - 1)).norm();
  } catch (const DivergenceError& e) {
    warnings.push_back(std::string("forward simulation: ") + e.what());
  }

  std::filesystem::create_directories(config.out_dir);
  {
    auto f = open_out(config.out_dir / "trajectories.csv");
    write_trajectories_csv(f, sol.x_sum, sol.lam_sum, sol.u);
  }

  ordered_json diag;
  diag["stop_reason"] = to_string(sol.report.stop_reason);
  diag["control_mode"] = to_string(config.mode);
  diag["grid_steps"] = K;
  diag["max_orders"] = config.orders;
  diag["tol"] = config.tol;
  diag["orders_computed"] = static_cast<int>(sol.terms.size()) - 1;
  diag["term_norms"] = sol.report.term_norms;
  auto ratios = ordered_json::array();
  for (const auto& r : sol.report.ratios) ratios.push_back(optional_number(r));
  diag["ratios"] = std::move(ratios);
  diag["tail_bound"] = optional_number(sol.report.tail_bound);
  diag["linear_residuals"] = sol.linear_residuals;
  diag["residual"] = residual_json(residual);
  diag["cost"] = sol.cost;
  diag["cost_forward_simulated"] = optional_number(cost_sim);
  diag["terminal_state_norm"] = Vector(sol.x_sum.at(sol.x_sum.size() - 1)).norm();
  diag["terminal_state_norm_forward_simulated"] = optional_number(terminal_sim);
  diag["warnings"] = warnings;
  if (config.record_wall_time) diag["wall_time_s"] = wall;
  {
    auto f = open_out(config.out_dir / "diagnostics.json");
    f << diag.dump(2) << '\n';
  }

  if (demo) {
    write_problem_file(config.out_dir / "problem.json", problem);
    auto f = open_out(config.out_dir / "plot.csv");
    write_plot_csv(f, sol.x_sum, sol.u);
  }

  for (const auto& w : warnings) err << "warning: " << w << '\n';
  out << "stop reason: " << to_string(sol.report.stop_reason) << " after "
      << sol.terms.size() - 1 << " correction order(s)\n";
  out << "term norms:";
  for (double s : sol.report.term_norms) out << ' ' << format_number(s);
  out << '\n';
  out << "cost J = " << format_number(sol.cost);
  if (cost_sim) out << " (forward simulated " << format_number(*cost_sim) << ")";
  out << '\n';
  out << "residual:\n";
  print_residual(out, residual);
  out << "wall time " << std::fixed << std::setprecision(3) << wall << " s\n"
      << std::defaultfloat;
  out << "wrote " << (config.out_dir / "trajectories.csv").string() << ", "
      << (config.out_dir / "diagnostics.json").string() << '\n';

  return sol.report.stop_reason == StopReason::kDivergenceDetected ? kExitDiverged : kExitOk;
}

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const HpmAbortedError& e) {
    err << "error: solver aborted at order " << e.failed_order() << ": " << e.what() << '\n';
  } catch (const ProblemError& e) {
    err << "error: invalid problem: " << e.what() << '\n';
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
  }
  return kExitError;
}

}  // namespace

int cmd_solve(const std::filesystem::path& problem_path, const RunConfig& config,
              std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const BilinearProblem problem = read_problem_file(problem_path);
    return run_solve(problem, config, false, out, err);
  });
}

int cmd_reactor_demo(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] { return run_solve(reactor_problem(), config, true, out, err); });
}

int cmd_verify(const VerifyConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!(config.threshold > 0.0)) throw std::invalid_argument("--threshold must be positive");
    const BilinearProblem problem = read_problem_file(config.problem);
    std::ifstream in(config.trajectories, std::ios::binary);
    if (!in) throw Error("cannot open trajectories file '" + config.trajectories.string() + "'");
    const TrajectorySet traj = read_trajectories_csv(in, problem);

    const ResidualReport r = tpbvp_residual(problem, traj.x, traj.lam, config.mode);
    const double cost = cost_evaluate(problem, traj.x, traj.u);

    out << "grid: " << traj.x.grid().intervals() << " intervals on ["
        << format_number(problem.t0()) << ", " << format_number(problem.tf()) << "]\n";
    out << "residual (" << to_string(config.mode) << " control law):\n";
    print_residual(out, r);
    out << "cost J = " << format_number(cost) << '\n';

    if (config.against_reference) {
      const ReferenceSolution ref = reference_solve(problem, traj.x.grid());
      const double cost_ref = cost_evaluate(problem, ref.x, ref.u);
      out << "reference (shooting, " << ref.newton_iterations << " Newton steps, terminal defect "
          << format_number(ref.terminal_defect) << "):\n";
      out << "  quantity  sup|candidate - reference|\n";
      out << "  x         " << format_number(sup_distance(traj.x, ref.x)) << '\n';
      out << "  lambda    " << format_number(sup_distance(traj.lam, ref.lam)) << '\n';
      out << "  u         " << format_number(sup_distance(traj.u, ref.u)) << '\n';
      out << "  J         " << format_number(cost) << " vs " << format_number(cost_ref)
          << " (relative " << format_number(std::abs(cost - cost_ref) / std::abs(cost_ref))
          << ")\n";
    }

    const double worst = r.total_sup();
    const bool pass = worst < config.threshold;
    out << (pass ? "PASS" : "FAIL") << ": max residual/defect " << format_number(worst)
        << (pass ? " < " : " >= ") << "threshold " << format_number(config.threshold) << '\n';
    return pass ? kExitOk : kExitError;
  });
}

namespace {

void add_run_options(CLI::App* cmd, RunConfig& cfg, std::string& mode) {
  cmd->add_option("--orders", cfg.orders, "Maximum number of series correction orders")
      ->capture_default_str();
  cmd->add_option("--grid-steps", cfg.grid_steps, "Grid intervals K (forced even)")
      ->capture_default_str();
  cmd->add_option("--tol", cfg.tol, "Stop once s_n < tol (1 + s_0)")->capture_default_str();
  cmd->add_option("--control-mode", mode, "Control law: full | linear-gain")
      ->check(CLI::IsMember({"full", "linear-gain"}))
      ->capture_default_str();
  cmd->add_option("--out", cfg.out_dir, "Output directory")->capture_default_str();
  cmd->add_flag("--wall-time", cfg.record_wall_time, "Record wall time in diagnostics.json");
}

}  // namespace

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bilinear quadratic optimal control by homotopy perturbation"};
  app.require_subcommand(1);

  RunConfig solve_cfg;
  std::string solve_mode = "full";
  std::filesystem::path problem_path;
  auto* solve = app.add_subcommand("solve", "Solve a problem file");
  solve->add_option("--problem", problem_path, "Problem JSON file")->required();
  add_run_options(solve, solve_cfg, solve_mode);

  VerifyConfig verify_cfg;
  std::string verify_mode = "full";
  auto* verify = app.add_subcommand("verify", "Check trajectories against the optimality system");
  verify->add_option("--problem", verify_cfg.problem, "Problem JSON file")->required();
  verify->add_option("--trajectories", verify_cfg.trajectories, "Trajectories CSV")->required();
  verify->add_option("--threshold", verify_cfg.threshold, "Pass threshold")->capture_default_str();
  verify->add_flag("--against-reference", verify_cfg.against_reference,
                   "Compare with the shooting reference solution");
  verify->add_option("--control-mode", verify_mode, "Control law: full | linear-gain")
      ->check(CLI::IsMember({"full", "linear-gain"}))
      ->capture_default_str();

  RunConfig demo_cfg;
  demo_cfg.orders = 3;
  std::string demo_mode = "full";
  auto* demo = app.add_subcommand("reactor-demo", "Solve the built-in chemical reactor problem");
  add_run_options(demo, demo_cfg, demo_mode);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  if (solve->parsed()) {
    solve_cfg.mode = parse_control_mode(solve_mode);
    return cmd_solve(problem_path, solve_cfg, out, err);
  }
  if (verify->parsed()) {
    verify_cfg.mode = parse_control_mode(verify_mode);
    return cmd_verify(verify_cfg, out, err);
  }
  demo_cfg.mode = parse_control_mode(demo_mode);
  return cmd_reactor_demo(demo_cfg, out, err);
}

}  // namespace bhpm::cli
