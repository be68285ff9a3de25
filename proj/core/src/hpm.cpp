#include "bhpm/hpm.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bhpm/verify.hpp"

namespace bhpm {

double SeriesTerm::sup_norm() const {
  return (x.samples().colwise().squaredNorm() + lam.samples().colwise().squaredNorm())
      .cwiseSqrt()
      .maxCoeff();
}

std::string to_string(StopReason reason) {
  switch (reason) {
    case StopReason::kToleranceMet:
      return "tolerance-met";
    case StopReason::kMaxOrders:
      return "max-orders";
    case StopReason::kDivergenceDetected:
      return "divergence-detected";
  }
  return "unknown";
}

ConvergenceReport convergence_report_from_norms(std::span<const double> norms) {
  ConvergenceReport report;
  report.term_norms.assign(norms.begin(), norms.end());
  for (std::size_t n = 1; n < norms.size(); ++n) {
    if (norms[n - 1] > 0.0) {
      report.ratios.emplace_back(norms[n] / norms[n - 1]);
    } else {
      report.ratios.emplace_back(std::nullopt);
    }
  }
  if (!report.ratios.empty() && report.ratios.back().has_value()) {
    const double g = *report.ratios.back();
    if (g < 1.0) report.tail_bound = norms.back() * g / (1.0 - g);
  }
  return report;
}

ConvergenceReport convergence_report(std::span<const SeriesTerm> terms) {
  std::vector<double> norms;
  norms.reserve(terms.size());
  for (const auto& t : terms) norms.push_back(t.sup_norm());
  return convergence_report_from_norms(norms);
}

std::pair<Trajectory, Trajectory> partial_sum(std::span<const SeriesTerm> terms,
                                              std::size_t count) {
  if (count == 0 || count > terms.size()) {
    throw std::invalid_argument("partial_sum: term count out of range");
  }
  Trajectory x = terms[0].x;
  Trajectory lam = terms[0].lam;
  for (std::size_t i = 1; i < count; ++i) {
    x += terms[i].x;
    lam += terms[i].lam;
  }
  return {std::move(x), std::move(lam)};
}

Trajectory control_trajectory(const BilinearProblem& problem, const Trajectory& x,
                              const Trajectory& lam, ControlMode mode) {
  if (!(x.grid() == lam.grid())) throw DimensionError("x and lam grids differ");
  Trajectory u(x.grid(), problem.m());
  for (std::size_t k = 0; k < x.size(); ++k) {
    u.at(k) = control_law(problem, x.at(k), lam.at(k), mode);
  }
  return u;
}

namespace {

LinearTpbvpSpec make_spec(const BilinearProblem& problem, const HamiltonianMatrix& M,
                          Trajectory forcing, Vector initial_state) {
  return LinearTpbvpSpec{M, std::move(forcing), std::move(initial_state), problem.Qf(),
                         Vector::Zero(problem.n())};
}

}  // namespace

SeriesTerm initial_guess(const BilinearProblem& problem, const TimeGrid& grid) {
  const HamiltonianMatrix M = assemble_hamiltonian_matrix(problem);
  auto sol = solve_linear_ti_tpbvp(
      make_spec(problem, M, Trajectory(grid, 2 * problem.n()), problem.x0()), grid);
  return SeriesTerm{0, std::move(sol.x), std::move(sol.lam)};
}

ForcingPair series_coefficient_phi_psi(const BilinearProblem& problem,
                                       std::span<const SeriesTerm> terms, int order) {
  if (order < 0) throw std::invalid_argument("coefficient order must be non-negative");
  const auto k = static_cast<std::size_t>(order);
  if (terms.size() < k + 1) {
    throw std::invalid_argument("series coefficient of order " + std::to_string(order) +
                                " needs terms 0.." + std::to_string(order));
  }
  for (std::size_t i = 0; i <= k; ++i) {
    if (terms[i].order != static_cast<int>(i)) {
      throw std::invalid_argument("series terms must be ordered 0..k without gaps");
    }
  }
  const TimeGrid& grid = terms[0].x.grid();
  for (std::size_t i = 0; i <= k; ++i) {
    if (!(terms[i].x.grid() == grid) || !(terms[i].lam.grid() == grid)) {
      throw DimensionError("series terms must share one grid");
    }
  }

  const int n = problem.n();
  const int m = problem.m();
  const Matrix& Ri = problem.R_inverse();
  const Matrix RiBt = Ri * problem.B().transpose();

  ForcingPair out{Trajectory(grid, n), Trajectory(grid, n)};
  if (problem.is_linear()) return out;

  std::vector<Matrix> Nx(k + 1);
  std::vector<Vector> W(k + 1);  // coefficients of w = R^-1 (B + N(x))' lam

  for (std::size_t node = 0; node < grid.size(); ++node) {
    for (std::size_t i = 0; i <= k; ++i) Nx[i] = n_of_x(problem, terms[i].x.at(node));

    Vector omega_k = Vector::Zero(m);  // coefficient k of R^-1 N(x)' lam
    for (std::size_t q = 0; q <= k; ++q) {
      Vector acc = Vector::Zero(m);
      for (std::size_t i = 0; i <= q; ++i) {
        acc.noalias() += Nx[i].transpose() * terms[q - i].lam.at(node);
      }
      const Vector omega_q = Ri * acc;
      W[q] = RiBt * terms[q].lam.at(node) + omega_q;
      if (q == k) omega_k = omega_q;
    }

    // phi_k = -B omega_k - sum_i N(x_i) W_{k-i}
    Vector phi = -(problem.B() * omega_k);
    for (std::size_t i = 0; i <= k; ++i) phi.noalias() -= Nx[i] * W[k - i];

    // psi_{j,k} = sum_a lam_a' N_j W_{k-a}
    Vector psi = Vector::Zero(n);
    for (int j = 0; j < n; ++j) {
      const Matrix& Nj = problem.N(j);
      double s = 0.0;
      for (std::size_t a = 0; a <= k; ++a) {
        s += terms[a].lam.at(node).dot(Nj * W[k - a]);
      }
      psi(j) = s;
    }

    out.h1.at(node) = -phi;
    out.h2.at(node) = -psi;
  }
  return out;
}

HpmSolution hpm_iterate(const BilinearProblem& problem, const TimeGrid& grid,
                        const HpmOptions& options) {
  if (options.max_orders < 1) throw std::invalid_argument("max_orders must be >= 1");
  if (!(options.tol > 0.0)) throw std::invalid_argument("tol must be positive");

  const int n = problem.n();
  const HamiltonianMatrix M = assemble_hamiltonian_matrix(problem);

  std::vector<SeriesTerm> terms;
  std::vector<double> linear_residuals;
  std::vector<double> norms;

  {
    auto sol = solve_linear_ti_tpbvp(
        make_spec(problem, M, Trajectory(grid, 2 * n), problem.x0()), grid);
    linear_residuals.push_back(sol.residual_max);
    terms.push_back(SeriesTerm{0, std::move(sol.x), std::move(sol.lam)});
    norms.push_back(terms.back().sup_norm());
  }
  const double s0 = norms.front();

  StopReason stop = StopReason::kMaxOrders;
  bool divergence = false;
  int consecutive_growth = 0;
  std::vector<std::string> warnings;

  for (int order = 1; order <= options.max_orders; ++order) {
    const ForcingPair h = series_coefficient_phi_psi(problem, terms, order - 1);
    // L[z^(n)] + h = 0  <=>  z' = M z - h
    Trajectory forcing = stack(h.h1, h.h2);
    forcing.samples() *= -1.0;

    LinearTpbvpSolution sol = [&] {
      try {
        return solve_linear_ti_tpbvp(
            make_spec(problem, M, std::move(forcing), Vector::Zero(n)), grid);
      } catch (const DegenerateBoundaryError& e) {
        throw HpmAbortedError(std::string("order ") + std::to_string(order) + ": " + e.what(),
                              order, convergence_report_from_norms(norms));
      }
    }();

    if (!sol.x.all_finite() || !sol.lam.all_finite()) {
      warnings.push_back("order " + std::to_string(order) +
                         " is not finite; series truncated before it");
      divergence = true;
      break;
    }
    linear_residuals.push_back(sol.residual_max);
    terms.push_back(SeriesTerm{order, std::move(sol.x), std::move(sol.lam)});
    const double s = terms.back().sup_norm();
    const double prev = norms.back();
    norms.push_back(s);

    if (prev > 0.0 && s / prev >= 1.0) {
      if (++consecutive_growth >= 2 && !divergence) {
        divergence = true;
        std::ostringstream os;
        os << "series diverging: term-norm ratio >= 1 at orders " << order - 1 << " and "
           << order;
        warnings.push_back(os.str());
      }
    } else {
      consecutive_growth = 0;
    }

    if (s < options.tol * (1.0 + s0)) {
      stop = StopReason::kToleranceMet;
      break;
    }
  }
  if (divergence && stop != StopReason::kToleranceMet) stop = StopReason::kDivergenceDetected;

  auto [x_sum, lam_sum] = partial_sum(terms, terms.size());
  Trajectory u = control_trajectory(problem, x_sum, lam_sum, options.mode);
  const double cost = cost_evaluate(problem, x_sum, u);

  ConvergenceReport report = convergence_report_from_norms(norms);
  report.residual_sup = tpbvp_residual(problem, x_sum, lam_sum, options.mode).ode_sup();
  report.stop_reason = stop;
  report.warnings = std::move(warnings);

  return HpmSolution{std::move(terms), std::move(x_sum),   std::move(lam_sum),
                     std::move(u),     cost,               options.mode,
                     std::move(report), std::move(linear_residuals)};
}

}  // namespace bhpm
