#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "bhpm/model.hpp"

namespace bhpm::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitError = 1,
  kExitDiverged = 2,
};

struct RunConfig {
  int orders = 8;
  /// Interval count K; odd values are rounded up to the next even number.
  int grid_steps = 300;
  double tol = 1e-8;
  ControlMode mode = ControlMode::kFull;
  std::filesystem::path out_dir = ".";
  /// Adds wall_time_s to diagnostics.json (makes the file run-dependent).
  bool record_wall_time = false;
};

struct VerifyConfig {
  std::filesystem::path problem;
  std::filesystem::path trajectories;
  double threshold = 1e-3;
  bool against_reference = false;
  ControlMode mode = ControlMode::kFull;
};

/// Solves the problem file and writes trajectories.csv and diagnostics.json
/// into config.out_dir.
int cmd_solve(const std::filesystem::path& problem_path, const RunConfig& config,
              std::ostream& out, std::ostream& err);

/// Checks a trajectories CSV against the problem's optimality system; exit 0
/// iff every residual and boundary defect is below the threshold.
int cmd_verify(const VerifyConfig& config, std::ostream& out, std::ostream& err);

/// Solves the built-in chemical-reactor problem; writes the solve artifacts
/// plus problem.json and plot.csv.
int cmd_reactor_demo(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Parses argv and dispatches to a subcommand.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace bhpm::cli
