#pragma once

// Homotopy-perturbation series for the bilinear maximum-principle TPBVP.
//
// The homotopy  L[z~ - z_ini] + p L[z_ini] + p Nl[z~] = 0  with z~ expanded
// as a Maclaurin series  z~ = sum_n z^(n) p^n  gives, order by order,
//
//   order 0:   L[z^(0)] = 0,              x^(0)(t0) = x0
//   order n:   L[z^(n)] + h^(n-1) = 0,   x^(n)(t0) = 0
//
// with lam^(n)(tf) = Qf x^(n)(tf) at every order and h^(n-1) the order-(n-1)
// coefficient of Nl = (-phi, -psi) applied to the series. Every order is a
// linear time-invariant TPBVP sharing the Hamiltonian matrix M; the solution
// is the series evaluated at p = 1.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bhpm/errors.hpp"
#include "bhpm/model.hpp"
#include "bhpm/tpbvp.hpp"

namespace bhpm {

struct SeriesTerm {
  int order = 0;
  Trajectory x;
  Trajectory lam;

  /// sup_t ||(x, lam)(t)||_2 over the stacked 2n-vector.
  [[nodiscard]] double sup_norm() const;
};

enum class StopReason { kToleranceMet, kMaxOrders, kDivergenceDetected };

[[nodiscard]] std::string to_string(StopReason reason);

struct ConvergenceReport {
  /// s_n for n = 0..N.
  std::vector<double> term_norms;
  /// ratios[n - 1] = s_n / s_{n-1}; absent when s_{n-1} == 0.
  std::vector<std::optional<double>> ratios;
  /// s_N * g / (1 - g) with g the last ratio, when g < 1.
  std::optional<double> tail_bound;
  /// Sup-norm of the nonlinear TPBVP residual of the assembled partial sum.
  double residual_sup = 0.0;
  StopReason stop_reason = StopReason::kMaxOrders;
  std::vector<std::string> warnings;
};

/// Norms, ratios and tail bound from the terms; residual and stop reason are
/// left for the caller.
[[nodiscard]] ConvergenceReport convergence_report(std::span<const SeriesTerm> terms);
[[nodiscard]] ConvergenceReport convergence_report_from_norms(std::span<const double> norms);

struct HpmOptions {
  int max_orders = 8;
  double tol = 1e-8;
  ControlMode mode = ControlMode::kFull;
};

struct HpmSolution {
  std::vector<SeriesTerm> terms;
  Trajectory x_sum;
  Trajectory lam_sum;
  Trajectory u;
  /// Quadratic cost of (x_sum, u).
  double cost = 0.0;
  ControlMode mode = ControlMode::kFull;
  ConvergenceReport report;
  /// Per-order finite-difference residual of each linear solve.
  std::vector<double> linear_residuals;
};

/// Sum of the first `count` terms (orders 0..count-1) as (x, lam).
[[nodiscard]] std::pair<Trajectory, Trajectory> partial_sum(std::span<const SeriesTerm> terms,
                                                            std::size_t count);

/// Forcing pair (h1, h2): the order-k coefficients of Nl1 = -phi and Nl2 = -psi.
struct ForcingPair {
  Trajectory h1;
  Trajectory h2;
};

/// Order-0 term: the LQ solution z' = M z, x(t0) = x0, lam(tf) = Qf x(tf).
[[nodiscard]] SeriesTerm initial_guess(const BilinearProblem& problem, const TimeGrid& grid);

/// Exact order-`order` coefficient of (-phi, -psi) on the series formed by
/// terms[0..order]. Throws std::invalid_argument when a term is missing.
[[nodiscard]] ForcingPair series_coefficient_phi_psi(const BilinearProblem& problem,
                                                     std::span<const SeriesTerm> terms,
                                                     int order);

/// Raised when an order's linear solve is degenerate; carries what was
/// computed before the failure.
class HpmAbortedError : public Error {
 public:
  HpmAbortedError(const std::string& what, int failed_order, ConvergenceReport partial)
      : Error(what), failed_order_(failed_order), partial_(std::move(partial)) {}

  [[nodiscard]] int failed_order() const noexcept { return failed_order_; }
  [[nodiscard]] const ConvergenceReport& partial_report() const noexcept { return partial_; }

 private:
  int failed_order_;
  ConvergenceReport partial_;
};

/// Runs the series up to `max_orders` corrections, stopping early once
/// s_n < tol (1 + s_0). Two consecutive ratios >= 1 mark the run
/// divergence-detected; the series is still carried to max_orders unless it
/// stops being finite.
[[nodiscard]] HpmSolution hpm_iterate(const BilinearProblem& problem, const TimeGrid& grid,
                                      const HpmOptions& options = {});

/// Control samples for sampled (x, lam).
[[nodiscard]] Trajectory control_trajectory(const BilinearProblem& problem, const Trajectory& x,
                                            const Trajectory& lam, ControlMode mode);

}  // namespace bhpm
