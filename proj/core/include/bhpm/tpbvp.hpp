#pragma once

// Linear time-invariant two-point boundary value problems of Hamiltonian form
//
//   z' = M z + h(t),   z = [x; lam],   M = [[A, -S], [-Q, -A']]
//   x(t0) = a,         lam(tf) = Qf x(tf) + c
//
// solved with exact step transition matrices and a single n x n boundary
// solve. Forcing h is piecewise linear between grid nodes and is integrated
// exactly through an augmented matrix exponential.

#include <cstddef>

#include <Eigen/Dense>

#include "bhpm/model.hpp"

namespace bhpm {

/// Uniform grid t_k = t0 + k * (tf - t0) / K, k = 0..K.
class TimeGrid {
 public:
  /// Throws std::invalid_argument unless K >= 2 and t0 < tf.
  TimeGrid(double t0, double tf, int intervals);

  [[nodiscard]] double t0() const noexcept { return t0_; }
  [[nodiscard]] double tf() const noexcept { return tf_; }
  [[nodiscard]] int intervals() const noexcept { return intervals_; }
  [[nodiscard]] std::size_t size() const noexcept {
    return static_cast<std::size_t>(intervals_) + 1;
  }
  [[nodiscard]] double step() const noexcept { return step_; }
  [[nodiscard]] double node(std::size_t k) const noexcept;

  friend bool operator==(const TimeGrid& a, const TimeGrid& b) noexcept {
    return a.t0_ == b.t0_ && a.tf_ == b.tf_ && a.intervals_ == b.intervals_;
  }

 private:
  double t0_;
  double tf_;
  int intervals_;
  double step_;
};

/// Sampled vector path on a TimeGrid: column k holds the value at node k.
class Trajectory {
 public:
  Trajectory(TimeGrid grid, Eigen::Index dim);
  Trajectory(TimeGrid grid, Matrix samples);

  [[nodiscard]] const TimeGrid& grid() const noexcept { return grid_; }
  [[nodiscard]] Eigen::Index dim() const noexcept { return samples_.rows(); }
  [[nodiscard]] std::size_t size() const noexcept { return grid_.size(); }

  [[nodiscard]] auto at(std::size_t k) { return samples_.col(static_cast<Eigen::Index>(k)); }
  [[nodiscard]] auto at(std::size_t k) const {
    return samples_.col(static_cast<Eigen::Index>(k));
  }
  [[nodiscard]] const Matrix& samples() const noexcept { return samples_; }
  [[nodiscard]] Matrix& samples() noexcept { return samples_; }

  [[nodiscard]] bool all_finite() const { return samples_.allFinite(); }
  /// max_k ||value_k||_2.
  [[nodiscard]] double sup_norm() const;

  Trajectory& operator+=(const Trajectory& other);

 private:
  TimeGrid grid_;
  Matrix samples_;
};

[[nodiscard]] Trajectory operator+(Trajectory a, const Trajectory& b);
[[nodiscard]] Trajectory operator-(const Trajectory& a, const Trajectory& b);

/// sup_k ||a_k - b_k||_2; throws DimensionError on grid or shape mismatch.
[[nodiscard]] double sup_distance(const Trajectory& a, const Trajectory& b);

/// Stack [top; bottom] sample-wise.
[[nodiscard]] Trajectory stack(const Trajectory& top, const Trajectory& bottom);

/// 2n x 2n matrix [[A, -S], [-Q, -A']].
class HamiltonianMatrix {
 public:
  explicit HamiltonianMatrix(Matrix M);

  [[nodiscard]] const Matrix& matrix() const noexcept { return M_; }
  [[nodiscard]] int n() const noexcept { return static_cast<int>(M_.rows() / 2); }

 private:
  Matrix M_;
};

[[nodiscard]] HamiltonianMatrix assemble_hamiltonian_matrix(const BilinearProblem& problem);

/// e^{M dt}. Throws NumericRangeError when the result is not finite.
[[nodiscard]] Matrix expm(const Matrix& M, double dt);

/// Exact one-step map for z' = M z + h(s), h linear across the step.
///
/// Precomputes E = e^{M dt} and the forcing kernels
///   G1 = int_0^dt e^{M(dt-s)} ds,   G2 = int_0^dt e^{M(dt-s)} s ds
/// from one exponential of the augmented block matrix
///   [[M, I, 0], [0, 0, I], [0, 0, 0]] * dt.
class StepPropagator {
 public:
  StepPropagator(const Matrix& M, double dt);

  [[nodiscard]] Vector step(const Vector& z, const Vector& h_begin,
                            const Vector& h_end) const;
  /// Same as step() with h == 0.
  [[nodiscard]] Vector step(const Vector& z) const { return transition_ * z; }

  [[nodiscard]] const Matrix& transition() const noexcept { return transition_; }
  [[nodiscard]] double dt() const noexcept { return dt_; }

 private:
  double dt_;
  Matrix transition_;
  Matrix constant_kernel_;
  Matrix ramp_kernel_;
};

/// z_{k+1} = e^{M dt} z_k + int_0^dt e^{M(dt-s)} h(s) ds, h interpolating
/// h_k -> h_{k+1} linearly. Throws std::invalid_argument unless dt > 0.
[[nodiscard]] Vector propagate_step(const Matrix& M, const Vector& z_k,
                                    const Vector& h_k, const Vector& h_k1, double dt);

/// One linear TPBVP instance (z' = M z + forcing with split boundary data).
struct LinearTpbvpSpec {
  HamiltonianMatrix M;
  /// Stacked 2n forcing samples on the solve grid.
  Trajectory forcing;
  /// x(t0).
  Vector initial_state;
  /// lam(tf) - Qf x(tf) = terminal_offset.
  Matrix terminal_weight;
  Vector terminal_offset;
};

struct LinearTpbvpSolution {
  Trajectory x;
  Trajectory lam;
  /// max-norm of the finite-difference residual of z' - M z - h.
  double residual_max = 0.0;
  /// residual_max / dt^2.
  double residual_constant = 0.0;
  /// 2-norm condition number of the boundary matrix (Phi22 - Qf Phi12).
  double boundary_condition = 0.0;
};

inline constexpr double kMaxBoundaryCondition = 1e12;

/// Throws DegenerateBoundaryError if the boundary matrix is singular or its
/// condition number exceeds kMaxBoundaryCondition; DimensionError on
/// inconsistent shapes or grids.
[[nodiscard]] LinearTpbvpSolution solve_linear_ti_tpbvp(const LinearTpbvpSpec& spec,
                                                        const TimeGrid& grid);

/// Finite-difference residual sup-norm of z' = M z + h for sampled z.
[[nodiscard]] double linear_residual(const Matrix& M, const Trajectory& z,
                                     const Trajectory& forcing);

/// Finite-difference derivative of a sampled path: fourth-order five-point
/// central stencil, fourth-order one-sided at the two nodes nearest each end
/// (second-order stencils when the grid has fewer than 4 intervals).
[[nodiscard]] Trajectory differentiate(const Trajectory& path);

}  // namespace bhpm
