#pragma once

// File formats used by the command-line front end.
//
//   problem JSON     {"n", "m", "A", "B", "N", "Q", "Qf", "R", "x0", "t0", "tf"}
//                    matrices as row-major nested arrays; unknown keys rejected
//   trajectories CSV t,x_1..x_n,lambda_1..lambda_n,u_1..u_m  (%.17g, '\n')
//   plot CSV         t,x_1..x_n,u_1..u_m

#include <filesystem>
#include <iosfwd>
#include <string>

#include <json.hpp>

#include "bhpm/hpm.hpp"
#include "bhpm/model.hpp"
#include "bhpm/tpbvp.hpp"

namespace bhpm::cli {

/// Parses problem JSON text. Throws ProblemError whose key is the offending
/// field (or "line L, column C" for syntax errors).
[[nodiscard]] BilinearProblem parse_problem(const std::string& text);
[[nodiscard]] BilinearProblem read_problem_file(const std::filesystem::path& path);

[[nodiscard]] nlohmann::ordered_json problem_to_json(const BilinearProblem& problem);
void write_problem_file(const std::filesystem::path& path, const BilinearProblem& problem);

/// printf("%.17g"), the format of every CSV cell.
[[nodiscard]] std::string format_number(double value);

struct TrajectorySet {
  Trajectory x;
  Trajectory lam;
  Trajectory u;
};

void write_trajectories_csv(std::ostream& os, const Trajectory& x, const Trajectory& lam,
                            const Trajectory& u);
void write_plot_csv(std::ostream& os, const Trajectory& x, const Trajectory& u);

/// Reads a trajectories CSV and checks it against the problem's dimensions
/// and time horizon. Throws DimensionError on any mismatch.
[[nodiscard]] TrajectorySet read_trajectories_csv(std::istream& is,
                                                  const BilinearProblem& problem);

}  // namespace bhpm::cli
