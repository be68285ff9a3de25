#include "bhpm/tpbvp.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <unsupported/Eigen/MatrixFunctions>

#include "bhpm/errors.hpp"

namespace bhpm {

TimeGrid::TimeGrid(double t0, double tf, int intervals)
    : t0_(t0), tf_(tf), intervals_(intervals), step_(0.0) {
  if (!(std::isfinite(t0) && std::isfinite(tf)) || !(t0 < tf)) {
    throw std::invalid_argument("time grid requires finite t0 < tf");
  }
  if (intervals < 2) {
    throw std::invalid_argument("time grid requires at least 2 intervals");
  }
  step_ = (tf - t0) / intervals;
}

double TimeGrid::node(std::size_t k) const noexcept {
  if (k == static_cast<std::size_t>(intervals_)) return tf_;
  return t0_ + static_cast<double>(k) * step_;
}

Trajectory::Trajectory(TimeGrid grid, Eigen::Index dim)
    : grid_(grid), samples_(Matrix::Zero(dim, static_cast<Eigen::Index>(grid.size()))) {}

Trajectory::Trajectory(TimeGrid grid, Matrix samples)
    : grid_(grid), samples_(std::move(samples)) {
  if (samples_.cols() != static_cast<Eigen::Index>(grid_.size())) {
    throw DimensionError("trajectory sample count does not match grid");
  }
}

double Trajectory::sup_norm() const {
  if (samples_.rows() == 0) return 0.0;
  return samples_.colwise().norm().maxCoeff();
}

Trajectory& Trajectory::operator+=(const Trajectory& other) {
  if (!(grid_ == other.grid_) || dim() != other.dim()) {
    throw DimensionError("trajectory sum requires matching grid and dimension");
  }
  samples_ += other.samples_;
  return *this;
}

Trajectory operator+(Trajectory a, const Trajectory& b) {
  a += b;
  return a;
}

Trajectory operator-(const Trajectory& a, const Trajectory& b) {
  if (!(a.grid() == b.grid()) || a.dim() != b.dim()) {
    throw DimensionError("trajectory difference requires matching grid and dimension");
  }
  return Trajectory(a.grid(), a.samples() - b.samples());
}

double sup_distance(const Trajectory& a, const Trajectory& b) {
  return (a - b).sup_norm();
}

Trajectory stack(const Trajectory& top, const Trajectory& bottom) {
  if (!(top.grid() == bottom.grid())) {
    throw DimensionError("stack requires matching grids");
  }
  Matrix s(top.dim() + bottom.dim(), top.samples().cols());
  s.topRows(top.dim()) = top.samples();
  s.bottomRows(bottom.dim()) = bottom.samples();
  return Trajectory(top.grid(), std::move(s));
}

HamiltonianMatrix::HamiltonianMatrix(Matrix M) : M_(std::move(M)) {
  if (M_.rows() != M_.cols() || M_.rows() % 2 != 0 || M_.rows() == 0) {
    throw DimensionError("Hamiltonian matrix must be square with even dimension");
  }
}

HamiltonianMatrix assemble_hamiltonian_matrix(const BilinearProblem& problem) {
  const int n = problem.n();
  Matrix M(2 * n, 2 * n);
  M.topLeftCorner(n, n) = problem.A();
  M.topRightCorner(n, n) = -problem.S();
  M.bottomLeftCorner(n, n) = -problem.Q();
  M.bottomRightCorner(n, n) = -problem.A().transpose();
  return HamiltonianMatrix(std::move(M));
}

Matrix expm(const Matrix& M, double dt) {
  if (M.rows() != M.cols()) throw DimensionError("expm requires a square matrix");
  if (!M.allFinite() || !std::isfinite(dt)) {
    throw NumericRangeError("expm argument is not finite");
  }
  if (dt == 0.0) return Matrix::Identity(M.rows(), M.cols());
  const Matrix scaled = M * dt;
  Matrix out = scaled.exp();
  if (!out.allFinite()) {
    std::ostringstream os;
    os << "matrix exponential out of range (||M dt||_1 = " << scaled.lpNorm<1>() << ")";
    throw NumericRangeError(os.str());
  }
  return out;
}

StepPropagator::StepPropagator(const Matrix& M, double dt) : dt_(dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("step size must be positive");
  const Eigen::Index d = M.rows();
  Matrix aug = Matrix::Zero(3 * d, 3 * d);
  aug.block(0, 0, d, d) = M;
  aug.block(0, d, d, d).setIdentity();
  aug.block(d, 2 * d, d, d).setIdentity();
  const Matrix big = expm(aug, dt);
  transition_ = big.block(0, 0, d, d);
  constant_kernel_ = big.block(0, d, d, d);
  ramp_kernel_ = big.block(0, 2 * d, d, d);
}

Vector StepPropagator::step(const Vector& z, const Vector& h_begin,
                            const Vector& h_end) const {
  const Vector slope = (h_end - h_begin) / dt_;
  return transition_ * z + constant_kernel_ * h_begin + ramp_kernel_ * slope;
}

Vector propagate_step(const Matrix& M, const Vector& z_k, const Vector& h_k,
                      const Vector& h_k1, double dt) {
  if (z_k.size() != M.rows() || h_k.size() != M.rows() || h_k1.size() != M.rows()) {
    throw DimensionError("propagate_step: vector dimension does not match M");
  }
  return StepPropagator(M, dt).step(z_k, h_k, h_k1);
}

Trajectory differentiate(const Trajectory& path) {
  const std::size_t K = path.grid().size() - 1;
  const double dt = path.grid().step();
  Trajectory d(path.grid(), path.dim());
  const auto f = [&](std::size_t k) { return path.at(k); };
  if (K < 4) {
    for (std::size_t k = 1; k < K; ++k) d.at(k) = (f(k + 1) - f(k - 1)) / (2.0 * dt);
    d.at(0) = (-3.0 * f(0) + 4.0 * f(1) - f(2)) / (2.0 * dt);
    d.at(K) = (3.0 * f(K) - 4.0 * f(K - 1) + f(K - 2)) / (2.0 * dt);
    return d;
  }
  // fourth-order: five-point central stencil, one-sided at the two end nodes
  const double s = 1.0 / (12.0 * dt);
  for (std::size_t k = 2; k + 2 <= K; ++k) {
    d.at(k) = s * (f(k - 2) - 8.0 * f(k - 1) + 8.0 * f(k + 1) - f(k + 2));
  }
  d.at(0) = s * (-25.0 * f(0) + 48.0 * f(1) - 36.0 * f(2) + 16.0 * f(3) - 3.0 * f(4));
  d.at(1) = s * (-3.0 * f(0) - 10.0 * f(1) + 18.0 * f(2) - 6.0 * f(3) + f(4));
  d.at(K) = s * (25.0 * f(K) - 48.0 * f(K - 1) + 36.0 * f(K - 2) - 16.0 * f(K - 3) +
                 3.0 * f(K - 4));
  d.at(K - 1) = s * (3.0 * f(K) + 10.0 * f(K - 1) - 18.0 * f(K - 2) + 6.0 * f(K - 3) -
                     f(K - 4));
  return d;
}

double linear_residual(const Matrix& M, const Trajectory& z, const Trajectory& forcing) {
  if (!(z.grid() == forcing.grid()) || z.dim() != M.rows() || forcing.dim() != M.rows()) {
    throw DimensionError("linear_residual: inconsistent grid or dimension");
  }
  const Matrix r = differentiate(z).samples() - M * z.samples() - forcing.samples();
  return r.colwise().norm().maxCoeff();
}

LinearTpbvpSolution solve_linear_ti_tpbvp(const LinearTpbvpSpec& spec,
                                          const TimeGrid& grid) {
  const int n = spec.M.n();
  const Matrix& M = spec.M.matrix();
  if (!(spec.forcing.grid() == grid)) {
    throw DimensionError("forcing is not sampled on the solve grid");
  }
  if (spec.forcing.dim() != 2 * n || spec.initial_state.size() != n ||
      spec.terminal_weight.rows() != n || spec.terminal_weight.cols() != n ||
      spec.terminal_offset.size() != n) {
    throw DimensionError("linear TPBVP data inconsistent with state dimension");
  }

  const StepPropagator prop(M, grid.step());
  const std::size_t K = grid.size() - 1;
  const Trajectory& h = spec.forcing;

  // Particular solution q (q(t0) = 0) and Phi(tf, t0).
  Vector q = Vector::Zero(2 * n);
  Matrix phi = Matrix::Identity(2 * n, 2 * n);
  const bool forced = !h.samples().isZero(0.0);
  for (std::size_t k = 0; k < K; ++k) {
    if (forced) q = prop.step(q, h.at(k), h.at(k + 1));
    phi = prop.transition() * phi;
  }

  const auto P11 = phi.topLeftCorner(n, n);
  const auto P12 = phi.topRightCorner(n, n);
  const auto P21 = phi.bottomLeftCorner(n, n);
  const auto P22 = phi.bottomRightCorner(n, n);
  const Matrix& Qf = spec.terminal_weight;
  const Vector& a = spec.initial_state;

  const Matrix boundary = P22 - Qf * P12;
  const Vector rhs = Qf * (P11 * a + q.head(n)) + spec.terminal_offset - P21 * a -
                     q.tail(n);

  Eigen::JacobiSVD<Matrix> svd(boundary);
  const auto& sv = svd.singularValues();
  const double smax = sv(0);
  const double smin = sv(sv.size() - 1);
  const double cond = smin > 0.0 ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(smin > 0.0) || !(cond <= kMaxBoundaryCondition) || !std::isfinite(cond)) {
    std::ostringstream os;
    os << "degenerate boundary-value problem: boundary matrix condition number "
       << cond;
    throw DegenerateBoundaryError(os.str(), cond);
  }
  const Vector lam0 = boundary.partialPivLu().solve(rhs);

  Trajectory z(grid, 2 * n);
  z.at(0).head(n) = a;
  z.at(0).tail(n) = lam0;
  for (std::size_t k = 0; k < K; ++k) {
    z.at(k + 1) = forced ? prop.step(z.at(k), h.at(k), h.at(k + 1)) : prop.step(z.at(k));
  }

  LinearTpbvpSolution out{
      Trajectory(grid, z.samples().topRows(n)),
      Trajectory(grid, z.samples().bottomRows(n)),
  };
  out.residual_max = linear_residual(M, z, h);
  out.residual_constant = out.residual_max / (grid.step() * grid.step());
  out.boundary_condition = cond;
  return out;
}

}  // namespace bhpm
