#include "bhpm/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "bhpm/hpm.hpp"

namespace bhpm {

double ResidualReport::ode_sup() const noexcept { return std::max(state_sup, costate_sup); }

double ResidualReport::total_sup() const noexcept {
  return std::max({state_sup, costate_sup, initial_defect, terminal_defect});
}

namespace {

void require_same_grid(const Trajectory& a, const Trajectory& b, const char* what) {
  if (!(a.grid() == b.grid())) {
    throw DimensionError(std::string(what) + ": trajectories are on different grids");
  }
}

// Maximum-principle vector field z = [x; lam] -> [x'; lam'] with u = u*(x, lam).
// Holds scratch space so repeated evaluation does not allocate.
class HamiltonianField {
 public:
  explicit HamiltonianField(const BilinearProblem& p)
      : p_(p), n_(p.n()), G_(p.n(), p.m()), w_(p.m()), tmp_(p.m()) {}

  void operator()(const Vector& z, Vector& out) {
    const auto x = z.head(n_);
    const auto lam = z.tail(n_);
    G_ = p_.B();
    for (int j = 0; j < n_; ++j) G_.noalias() += x(j) * p_.N(j);
    tmp_.noalias() = G_.transpose() * lam;
    w_.noalias() = p_.R_inverse() * tmp_;  // u* = -w
    out.head(n_).noalias() = p_.A() * x;
    out.head(n_).noalias() -= G_ * w_;
    out.tail(n_).noalias() = -(p_.Q() * x);
    out.tail(n_).noalias() -= p_.A().transpose() * lam;
    for (int j = 0; j < n_; ++j) {
      tmp_.noalias() = p_.N(j).transpose() * lam;
      out(n_ + j) += tmp_.dot(w_);
    }
  }

 private:
  const BilinearProblem& p_;
  int n_;
  Matrix G_;
  Vector w_;
  Vector tmp_;
};

// Integrates the Hamiltonian system; returns false (and stops) if the state
// leaves the finite range. Only the terminal value is kept when `path` is null.
bool shoot(HamiltonianField& field, const TimeGrid& grid, const Vector& z0, Vector& z_end,
           Trajectory* path) {
  const double h = grid.step();
  const Eigen::Index d = z0.size();
  Vector z = z0, k1(d), k2(d), k3(d), k4(d), tmp(d);
  if (path) path->at(0) = z;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    field(z, k1);
    tmp = z + 0.5 * h * k1;
    field(tmp, k2);
    tmp = z + 0.5 * h * k2;
    field(tmp, k3);
    tmp = z + h * k3;
    field(tmp, k4);
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (path) path->at(k + 1) = z;
    if (!z.allFinite() || z.cwiseAbs().maxCoeff() > 1e150) {
      if (path) {
        for (std::size_t r = k + 2; r < grid.size(); ++r) {
          path->at(r).setConstant(std::numeric_limits<double>::quiet_NaN());
        }
      }
      return false;
    }
  }
  z_end = z;
  return true;
}

struct NewtonResult {
  Vector costate;
  double defect = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

class Shooter {
 public:
  Shooter(const BilinearProblem& problem, const TimeGrid& grid)
      : problem_(problem), grid_(grid), field_(problem), n_(problem.n()) {}

  /// lam(tf) - Qf x(tf) for the given initial costate, or nullopt on blow-up.
  std::optional<Vector> defect(const Vector& x0, const Vector& lam0) {
    Vector z0(2 * n_), z_end(2 * n_);
    z0 << x0, lam0;
    if (!shoot(field_, grid_, z0, z_end, nullptr)) return std::nullopt;
    Vector d = z_end.tail(n_) - problem_.Qf() * z_end.head(n_);
    if (!d.allFinite()) return std::nullopt;
    return d;
  }

  NewtonResult newton(const Vector& x0, const Vector& lam_init, double tol, int max_iter,
                      double fd_step) {
    NewtonResult res;
    res.costate = lam_init;
    auto d0 = defect(x0, lam_init);
    if (!d0) return res;
    Vector d = *d0;
    res.defect = d.norm();
    std::vector<double> history{res.defect};

    while (res.iterations < max_iter) {
      if (res.defect < tol) {
        res.converged = true;
        return res;
      }
      Matrix J(n_, n_);
      for (int i = 0; i < n_; ++i) {
        const double h = fd_step * std::max(1.0, std::abs(res.costate(i)));
        Vector lp = res.costate, lm = res.costate;
        lp(i) += h;
        lm(i) -= h;
        auto dp = defect(x0, lp);
        auto dm = defect(x0, lm);
        if (!dp || !dm) return res;
        J.col(i) = (*dp - *dm) / (2.0 * h);
      }
      const Vector step = -J.fullPivLu().solve(d);
      if (!step.allFinite()) return res;

      bool accepted = false;
      for (double alpha = 1.0; alpha >= 1.0 / 1024.0; alpha *= 0.5) {
        const Vector trial = res.costate + alpha * step;
        auto dt = defect(x0, trial);
        if (dt && dt->norm() < (1.0 - 1e-4 * alpha) * res.defect) {
          res.costate = trial;
          d = *dt;
          res.defect = d.norm();
          accepted = true;
          break;
        }
      }
      ++res.iterations;
      if (!accepted) return res;
      history.push_back(res.defect);
      const std::size_t h = history.size();
      if (h >= 4 && history[h - 1] > 0.9 * history[h - 4] && res.defect >= tol) return res;
    }
    res.converged = res.defect < tol;
    return res;
  }

 private:
  const BilinearProblem& problem_;
  const TimeGrid& grid_;
  HamiltonianField field_;
  int n_;
};

}  // namespace

ResidualReport tpbvp_residual(const BilinearProblem& problem, const Trajectory& x,
                              const Trajectory& lam, ControlMode mode) {
  require_same_grid(x, lam, "tpbvp_residual");
  const int n = problem.n();
  if (x.dim() != n || lam.dim() != n) {
    throw DimensionError("tpbvp_residual: trajectory dimension does not match problem");
  }
  const TimeGrid& grid = x.grid();
  const Trajectory dx = differentiate(x);
  const Trajectory dl = differentiate(lam);

  Vector rx2(static_cast<Eigen::Index>(grid.size()));
  Vector rl2(static_cast<Eigen::Index>(grid.size()));
  ResidualReport rep;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const Vector xk = x.at(k);
    const Vector lk = lam.at(k);
    const Vector u = control_law(problem, xk, lk, mode);
    const Matrix G = problem.B() + n_of_x(problem, xk);
    const Vector fx = problem.A() * xk + G * u;
    Vector fl = -(problem.Q() * xk) - problem.A().transpose() * lk;
    for (int j = 0; j < n; ++j) fl(j) -= lk.dot(problem.N(j) * u);
    const double ex = (dx.at(k) - fx).norm();
    const double el = (dl.at(k) - fl).norm();
    rep.state_sup = std::max(rep.state_sup, ex);
    rep.costate_sup = std::max(rep.costate_sup, el);
    rx2(static_cast<Eigen::Index>(k)) = ex * ex;
    rl2(static_cast<Eigen::Index>(k)) = el * el;
  }
  const double h = grid.step();
  auto trapezoid = [h](const Vector& v) {
    return h * (v.sum() - 0.5 * (v(0) + v(v.size() - 1)));
  };
  rep.state_l2 = std::sqrt(trapezoid(rx2));
  rep.costate_l2 = std::sqrt(trapezoid(rl2));
  rep.initial_defect = (Vector(x.at(0)) - problem.x0()).norm();
  const std::size_t K = grid.size() - 1;
  rep.terminal_defect = (Vector(lam.at(K)) - problem.Qf() * x.at(K)).norm();
  rep.grid_step = h;
  return rep;
}

Trajectory forward_simulate(const BilinearProblem& problem, const Trajectory& u,
                            const Vector& x0) {
  const int n = problem.n();
  if (u.dim() != problem.m()) throw DimensionError("forward_simulate: control dimension");
  if (x0.size() != n) throw DimensionError("forward_simulate: x0 dimension");
  const TimeGrid& grid = u.grid();
  const double h = grid.step();

  auto f = [&](const Vector& x, const Vector& uu) -> Vector {
    return problem.A() * x + (problem.B() + n_of_x(problem, x)) * uu;
  };

  Trajectory x(grid, n);
  x.at(0) = x0;
  Vector xk = x0;
  for (std::size_t k = 0; k + 1 < grid.size(); ++k) {
    const Vector u0 = u.at(k);
    const Vector u1 = u.at(k + 1);
    const Vector um = 0.5 * (u0 + u1);
    const Vector k1 = f(xk, u0);
    const Vector k2 = f(xk + 0.5 * h * k1, um);
    const Vector k3 = f(xk + 0.5 * h * k2, um);
    const Vector k4 = f(xk + h * k3, u1);
    xk += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!xk.allFinite()) {
      std::ostringstream os;
      os << "forward simulation diverged at node " << k + 1 << " (t = " << grid.node(k + 1)
         << ")";
      throw DivergenceError(os.str(), k + 1);
    }
    x.at(k + 1) = xk;
  }
  return x;
}

double simpson(const Vector& v, double h) {
  const Eigen::Index K = v.size() - 1;
  if (K < 1) return 0.0;
  if (K == 1) return 0.5 * h * (v(0) + v(1));
  auto simpson_even = [&](Eigen::Index last) {
    double s = v(0) + v(last);
    for (Eigen::Index i = 1; i < last; ++i) s += (i % 2 == 1 ? 4.0 : 2.0) * v(i);
    return s * h / 3.0;
  };
  if (K % 2 == 0) return simpson_even(K);
  // odd: Simpson on [0, K-3], 3/8 rule on the last three intervals
  const double tail = 3.0 * h / 8.0 * (v(K - 3) + 3.0 * v(K - 2) + 3.0 * v(K - 1) + v(K));
  return (K > 3 ? simpson_even(K - 3) : 0.0) + tail;
}

double cost_evaluate(const BilinearProblem& problem, const Trajectory& x, const Trajectory& u) {
  require_same_grid(x, u, "cost_evaluate");
  if (x.dim() != problem.n() || u.dim() != problem.m()) {
    throw DimensionError("cost_evaluate: trajectory dimension does not match problem");
  }
  const Matrix& X = x.samples();
  const Matrix& U = u.samples();
  const Vector running = ((problem.Q() * X).cwiseProduct(X)).colwise().sum().transpose() +
                         ((problem.R() * U).cwiseProduct(U)).colwise().sum().transpose();
  const Vector xf = X.col(X.cols() - 1);
  return 0.5 * xf.dot(problem.Qf() * xf) + 0.5 * simpson(running, x.grid().step());
}

Trajectory integrate_hamiltonian_system(const BilinearProblem& problem, const TimeGrid& grid,
                                        const Vector& x0, const Vector& lam0) {
  HamiltonianField field(problem);
  Vector z0(2 * problem.n()), z_end(2 * problem.n());
  z0 << x0, lam0;
  Trajectory path(grid, 2 * problem.n());
  shoot(field, grid, z0, z_end, &path);
  return path;
}

ReferenceSolution reference_solve(const BilinearProblem& problem, const TimeGrid& grid,
                                  const ReferenceOptions& options) {
  if (!(options.newton_tol > 0.0)) throw std::invalid_argument("newton_tol must be positive");
  if (options.max_newton < 1) throw std::invalid_argument("max_newton must be >= 1");
  const int n = problem.n();

  Vector lam_init;
  if (options.initial_costate) {
    if (options.initial_costate->size() != n) {
      throw DimensionError("initial costate has wrong dimension");
    }
    lam_init = *options.initial_costate;
  } else {
    lam_init = Vector(initial_guess(problem, grid).lam.at(0));
  }

  Shooter shooter(problem, grid);
  const Vector& x0 = problem.x0();
  int total_iterations = 0;
  int stages = 0;

  NewtonResult best =
      shooter.newton(x0, lam_init, options.newton_tol, options.max_newton,
                     options.fd_relative_step);
  total_iterations += best.iterations;

  if (!best.converged) {
    // Continuation on sigma in x(t0) = sigma x0. At sigma = 0 the solution is
    // zero and its costate tangent is the linear-quadratic costate, which the
    // order-0 initializer supplies.
    std::vector<std::pair<double, Vector>> path{{0.0, Vector::Zero(n)}};
    double sigma = 0.0;
    double dsigma = 0.1;
    constexpr double kMinStep = 1e-4;
    NewtonResult stage;
    while (sigma < 1.0) {
      const double target = std::min(1.0, sigma + dsigma);
      Vector guess;
      if (path.size() < 2) {
        guess = target * lam_init;
      } else {
        const auto& [s1, l1] = path[path.size() - 1];
        const auto& [s0, l0] = path[path.size() - 2];
        guess = l1 + (target - s1) / (s1 - s0) * (l1 - l0);
      }
      stage = shooter.newton(target * x0, guess, options.newton_tol, options.max_newton,
                             options.fd_relative_step);
      total_iterations += stage.iterations;
      ++stages;
      if (stage.converged) {
        sigma = target;
        path.emplace_back(sigma, stage.costate);
        if (stage.iterations <= 4) dsigma = std::min(0.25, 1.5 * dsigma);
      } else {
        dsigma *= 0.5;
        if (dsigma < kMinStep) {
          const bool direct_better = best.defect <= stage.defect;
          std::ostringstream os;
          os << "reference shooting did not converge (continuation stalled at sigma = "
             << sigma << ", best terminal defect "
             << (direct_better ? best.defect : stage.defect) << ")";
          throw ReferenceConvergenceError(os.str(),
                                          direct_better ? best.costate : stage.costate,
                                          std::min(best.defect, stage.defect));
        }
      }
    }
    best = stage;
  }

  Trajectory z = integrate_hamiltonian_system(problem, grid, x0, best.costate);
  Trajectory x(grid, z.samples().topRows(n));
  Trajectory lam(grid, z.samples().bottomRows(n));
  Trajectory u = control_trajectory(problem, x, lam, ControlMode::kFull);
  return ReferenceSolution{std::move(x), std::move(lam), std::move(u), total_iterations,
                           best.defect, stages};
}

}  // namespace bhpm
