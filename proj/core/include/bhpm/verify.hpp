#pragma once

// Independent checks for series solutions: nonlinear TPBVP residuals,
// closed-loop forward simulation, cost quadrature and a shooting reference
// solver for the full nonlinear state/costate system.

#include <optional>

#include "bhpm/errors.hpp"
#include "bhpm/model.hpp"
#include "bhpm/tpbvp.hpp"

namespace bhpm {

struct ResidualReport {
  double state_sup = 0.0;
  double state_l2 = 0.0;
  double costate_sup = 0.0;
  double costate_l2 = 0.0;
  /// ||x(t0) - x0||.
  double initial_defect = 0.0;
  /// ||lam(tf) - Qf x(tf)||.
  double terminal_defect = 0.0;
  /// Grid step; the finite-difference derivative leaves an O(step^4) floor.
  double grid_step = 0.0;

  /// max(state_sup, costate_sup).
  [[nodiscard]] double ode_sup() const noexcept;
  /// ode_sup() together with both boundary defects.
  [[nodiscard]] double total_sup() const noexcept;
};

/// Residuals of
///   x'   = A x + (B + N(x)) u
///   lam' = -Q x - A' lam - [lam' N_j u]_j
/// with u from the given control mode (mode full reproduces the maximum
/// principle system exactly). Throws DimensionError on grid mismatch.
[[nodiscard]] ResidualReport tpbvp_residual(const BilinearProblem& problem, const Trajectory& x,
                                            const Trajectory& lam,
                                            ControlMode mode = ControlMode::kFull);

/// Classical RK4 on the control grid with u linear inside each step.
/// Throws DivergenceError naming the first non-finite node.
[[nodiscard]] Trajectory forward_simulate(const BilinearProblem& problem, const Trajectory& u,
                                          const Vector& x0);

/// 1/2 x(tf)' Qf x(tf) + 1/2 int (x'Qx + u'Ru) dt by composite Simpson (3/8
/// rule on the last three intervals when the interval count is odd).
[[nodiscard]] double cost_evaluate(const BilinearProblem& problem, const Trajectory& x,
                                   const Trajectory& u);

/// Composite Simpson quadrature of uniformly sampled values.
[[nodiscard]] double simpson(const Vector& samples, double step);

struct ReferenceOptions {
  double newton_tol = 1e-9;
  int max_newton = 50;
  /// Initial lam(t0); defaults to the order-0 series costate.
  std::optional<Vector> initial_costate;
  /// Finite-difference Jacobian step, relative to max(1, |lam_i|).
  double fd_relative_step = 1e-6;
};

struct ReferenceSolution {
  Trajectory x;
  Trajectory lam;
  Trajectory u;
  /// Newton iterations summed over all continuation stages.
  int newton_iterations = 0;
  double terminal_defect = 0.0;
  /// 0 when Newton converged directly from the initial costate.
  int continuation_stages = 0;
};

class ReferenceConvergenceError : public Error {
 public:
  ReferenceConvergenceError(const std::string& what, Vector best_costate, double best_defect)
      : Error(what), best_costate_(std::move(best_costate)), best_defect_(best_defect) {}

  [[nodiscard]] const Vector& best_costate() const noexcept { return best_costate_; }
  [[nodiscard]] double best_defect() const noexcept { return best_defect_; }

 private:
  Vector best_costate_;
  double best_defect_;
};

/// Single shooting on lam(t0) with a damped finite-difference Newton method.
///
/// Newton is first run from the initial costate. If it stagnates (less than
/// 10% defect reduction over three steps, or no acceptable damped step), the
/// solve is repeated along the family x(t0) = sigma x0, sigma: 0 -> 1, each
/// stage seeded by secant extrapolation of the previous stages' costates.
[[nodiscard]] ReferenceSolution reference_solve(const BilinearProblem& problem,
                                                const TimeGrid& grid,
                                                const ReferenceOptions& options = {});

/// RK4 integration of the nonlinear state/costate system from (x0, lam0).
/// Returns the stacked 2n trajectory; non-finite samples are left in place.
[[nodiscard]] Trajectory integrate_hamiltonian_system(const BilinearProblem& problem,
                                                      const TimeGrid& grid, const Vector& x0,
                                                      const Vector& lam0);

}  // namespace bhpm
