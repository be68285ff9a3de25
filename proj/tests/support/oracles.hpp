#pragma once

// Test-only oracles. Nothing here calls into the solver code paths it is used
// to check.

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "bhpm/model.hpp"
#include "bhpm/tpbvp.hpp"

namespace bhpm::testing {

/// e^{M dt} by a 50-term Taylor series on M dt / 2^s, then s squarings, with s
/// chosen so that ||M dt / 2^s||_1 <= 0.5.
inline Matrix taylor_expm(const Matrix& M, double dt, int terms = 50) {
  Matrix X = M * dt;
  const double norm = X.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm > 0.5) s = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  X /= std::ldexp(1.0, s);
  Matrix result = Matrix::Identity(M.rows(), M.cols());
  Matrix term = Matrix::Identity(M.rows(), M.cols());
  for (int k = 1; k <= terms; ++k) {
    term = term * X / static_cast<double>(k);
    result += term;
  }
  for (int i = 0; i < s; ++i) result = result * result;
  return result;
}

struct LqReference {
  Trajectory x;
  Trajectory lam;
};

/// Linear-quadratic optimum via the Riccati differential equation
///   -P' = A'P + PA - P S P + Q,  P(tf) = Qf
/// integrated backwards by RK4 on a grid `refine` times finer than `grid`,
/// then x' = (A - S P) x forwards by RK4 on the same fine grid; lam = P x.
inline LqReference riccati_lq_solution(const Matrix& A, const Matrix& S, const Matrix& Q,
                                       const Matrix& Qf, const Vector& x0, const TimeGrid& grid,
                                       int refine = 20) {
  const int n = static_cast<int>(A.rows());
  const std::size_t fine_steps = static_cast<std::size_t>(grid.intervals()) * refine * 2;
  const double h = (grid.tf() - grid.t0()) / static_cast<double>(fine_steps);

  auto riccati = [&](const Matrix& P) -> Matrix {
    return A.transpose() * P + P * A - P * S * P + Q;
  };
  // P[i] at t = t0 + i h
  std::vector<Matrix> P(fine_steps + 1);
  P[fine_steps] = Qf;
  for (std::size_t i = fine_steps; i > 0; --i) {
    const Matrix& p = P[i];
    const Matrix k1 = riccati(p);
    const Matrix k2 = riccati(p + 0.5 * h * k1);
    const Matrix k3 = riccati(p + 0.5 * h * k2);
    const Matrix k4 = riccati(p + h * k3);
    P[i - 1] = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }

  // Forward pass with step 2h so the midpoint value P[i+1] is available.
  LqReference out{Trajectory(grid, n), Trajectory(grid, n)};
  Vector x = x0;
  const std::size_t per_coarse = static_cast<std::size_t>(refine);
  out.x.at(0) = x;
  out.lam.at(0) = P[0] * x;
  for (std::size_t i = 0; i + 2 <= fine_steps; i += 2) {
    const double H = 2.0 * h;
    const Matrix F0 = A - S * P[i];
    const Matrix F1 = A - S * P[i + 1];
    const Matrix F2 = A - S * P[i + 2];
    const Vector k1 = F0 * x;
    const Vector k2 = F1 * (x + 0.5 * H * k1);
    const Vector k3 = F1 * (x + 0.5 * H * k2);
    const Vector k4 = F2 * (x + H * k3);
    x += (H / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    const std::size_t step = (i + 2) / 2;
    if (step % per_coarse == 0) {
      const std::size_t k = step / per_coarse;
      out.x.at(k) = x;
      out.lam.at(k) = P[i + 2] * x;
    }
  }
  return out;
}

/// Symmetric positive semi-definite n x n with entries of order `scale`.
inline Matrix random_psd(std::mt19937& rng, int n, double scale) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix L(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) L(i, j) = g(rng);
  return scale * (L * L.transpose()) / n;
}

inline Matrix random_matrix(std::mt19937& rng, int rows, int cols, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) M(i, j) = g(rng);
  return M;
}

inline Vector random_vector(std::mt19937& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

/// Random well-posed problem; N_j are zero when `bilinear` is false.
inline BilinearProblem random_problem(std::mt19937& rng, int n, int m, bool bilinear,
                                      double coupling = 0.3) {
  ProblemData d;
  d.A = random_matrix(rng, n, n, 0.6);
  d.B = random_matrix(rng, n, m, 1.0);
  for (int j = 0; j < n; ++j) {
    d.N.push_back(bilinear ? random_matrix(rng, n, m, coupling) : Matrix::Zero(n, m));
  }
  d.Q = random_psd(rng, n, 1.0) + 0.1 * Matrix::Identity(n, n);
  d.Qf = random_psd(rng, n, 1.0);
  d.R = random_psd(rng, m, 1.0) + 0.5 * Matrix::Identity(m, m);
  d.x0 = random_vector(rng, n, -1.0, 1.0);
  d.t0 = 0.0;
  std::uniform_real_distribution<double> horizon(0.5, 2.0);
  d.tf = horizon(rng);
  return BilinearProblem(std::move(d));
}

/// Central finite-difference gradient of a scalar function.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& at,
                          double step) {
  Vector g(at.size());
  for (Eigen::Index i = 0; i < at.size(); ++i) {
    Vector p = at, q = at;
    p(i) += step;
    q(i) -= step;
    g(i) = (f(p) - f(q)) / (2.0 * step);
  }
  return g;
}

/// Chemical reactor with the initial state scaled by `scale`.
inline BilinearProblem scaled_reactor(double scale) {
  const BilinearProblem base = reactor_problem();
  return base.with_initial_state(scale * base.x0());
}

}  // namespace bhpm::testing
