#pragma once

// Bilinear quadratic optimal control problem and the maximum-principle
// quantities derived from it.
//
//   dynamics:  x' = A x + B u + N(x) u,     N(x) = sum_j x_j N_j   (n x m)
//   cost:      J  = 1/2 x(tf)' Qf x(tf) + 1/2 int (x'Qx + u'Ru) dt
//   Hamiltonian H = 1/2 x'Qx + 1/2 u'Ru + lam'(A x + (B + N(x)) u)
//
// Stationarity dH/du = 0 gives u* = -w(x, lam), w = R^-1 (B + N(x))' lam.
// Substituting u* splits the state/costate right-hand sides into the linear
// Hamiltonian part and the nonlinear remainders phi, psi:
//
//   x'   =  A x - S lam + phi(x, lam),          S = B R^-1 B'
//   lam' = -Q x - A' lam + psi(x, lam)
//
//   phi      = -(B R^-1 N(x)' + N(x) R^-1 B' + N(x) R^-1 N(x)') lam
//   psi_j    = -lam' N_j u*  =  lam' N_j R^-1 (B + N(x))' lam

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace bhpm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Co-state at one time instant.
using CostateVector = Eigen::VectorXd;

/// Which control law to apply on top of (x, lam).
enum class ControlMode {
  kFull,        ///< u = -R^-1 (B + N(x))' lam, the stationary point of H.
  kLinearGain,  ///< u = -R^-1 B' lam, the linear-gain series form.
};

[[nodiscard]] std::string to_string(ControlMode mode);
/// Accepts "full" and "linear-gain"; throws std::invalid_argument otherwise.
[[nodiscard]] ControlMode parse_control_mode(const std::string& text);

/// Raw, unvalidated problem data as read from a file or built in code.
struct ProblemData {
  Matrix A;
  Matrix B;
  std::vector<Matrix> N;
  Matrix Q;
  Matrix Qf;
  Matrix R;
  Vector x0;
  double t0 = 0.0;
  double tf = 1.0;
};

/// Validated bilinear problem. Immutable after construction.
///
/// Construction symmetrizes Q, Qf and R, checks Q, Qf >= -1e-10 and R > 0 by
/// eigenvalues, and caches R^-1 and S = B R^-1 B'. Asymmetry above 1e-9 is
/// tolerated but recorded in `warnings()`.
class BilinearProblem {
 public:
  static constexpr double kPsdTolerance = 1e-10;
  static constexpr double kAsymmetryWarning = 1e-9;

  /// Throws ProblemError naming the offending key.
  explicit BilinearProblem(ProblemData data);

  [[nodiscard]] int n() const noexcept { return static_cast<int>(x0_.size()); }
  [[nodiscard]] int m() const noexcept { return static_cast<int>(B_.cols()); }

  [[nodiscard]] const Matrix& A() const noexcept { return A_; }
  [[nodiscard]] const Matrix& B() const noexcept { return B_; }
  [[nodiscard]] const std::vector<Matrix>& N() const noexcept { return N_; }
  [[nodiscard]] const Matrix& N(int j) const { return N_.at(static_cast<std::size_t>(j)); }
  [[nodiscard]] const Matrix& Q() const noexcept { return Q_; }
  [[nodiscard]] const Matrix& Qf() const noexcept { return Qf_; }
  [[nodiscard]] const Matrix& R() const noexcept { return R_; }
  [[nodiscard]] const Matrix& R_inverse() const noexcept { return R_inv_; }
  /// S = B R^-1 B'.
  [[nodiscard]] const Matrix& S() const noexcept { return S_; }
  [[nodiscard]] const Vector& x0() const noexcept { return x0_; }
  [[nodiscard]] double t0() const noexcept { return t0_; }
  [[nodiscard]] double tf() const noexcept { return tf_; }

  /// True when every N_j is exactly zero (plain LQ problem).
  [[nodiscard]] bool is_linear() const noexcept { return linear_; }

  [[nodiscard]] const std::vector<std::string>& warnings() const noexcept {
    return warnings_;
  }

  /// Same problem with a different initial state.
  [[nodiscard]] BilinearProblem with_initial_state(const Vector& x0) const;

  [[nodiscard]] ProblemData data() const;

 private:
  Matrix A_, B_;
  std::vector<Matrix> N_;
  Matrix Q_, Qf_, R_, R_inv_, S_;
  Vector x0_;
  double t0_ = 0.0, tf_ = 1.0;
  bool linear_ = true;
  std::vector<std::string> warnings_;
};

/// Chemical-reactor example: two states (temperature, concentration), one
/// cooling-flow control, horizon [0, 3].
[[nodiscard]] BilinearProblem reactor_problem();

/// N(x) = sum_j x_j N_j.
[[nodiscard]] Matrix n_of_x(const BilinearProblem& problem, const Vector& x);

/// w = R^-1 (B + N(x))' lam, so that u* = -w.
[[nodiscard]] Vector w_of(const BilinearProblem& problem, const Vector& x,
                          const CostateVector& lam);

/// Gain operator z(x) = R^-1 (B + N(x))'  (m x n), w = z(x) lam.
[[nodiscard]] Matrix gain_operator(const BilinearProblem& problem, const Vector& x);

[[nodiscard]] Vector control_law(const BilinearProblem& problem, const Vector& x,
                                 const CostateVector& lam,
                                 ControlMode mode = ControlMode::kFull);

[[nodiscard]] double hamiltonian(const BilinearProblem& problem, const Vector& x,
                                 const CostateVector& lam, const Vector& u);

[[nodiscard]] Vector eval_phi(const BilinearProblem& problem, const Vector& x,
                              const CostateVector& lam);

[[nodiscard]] Vector eval_psi(const BilinearProblem& problem, const Vector& x,
                              const CostateVector& lam);

/// Operator split F = L + Nl of the state/costate residual operators
///
///   F1[x, lam] = x'   - A x + S lam - phi   = L1 + Nl1,   Nl1 = -phi
///   F2[x, lam] = lam' + Q x + A' lam - psi  = L2 + Nl2,   Nl2 = -psi
///
/// The derivative part of L lives in the TPBVP solver; this class exposes the
/// algebraic pieces evaluated at one instant.
class OperatorSplit {
 public:
  explicit OperatorSplit(const BilinearProblem& problem) : problem_(&problem) {}

  /// A x - S lam: the drift the linear state operator subtracts.
  [[nodiscard]] Vector linear_state_rhs(const Vector& x, const CostateVector& lam) const;
  /// -Q x - A' lam.
  [[nodiscard]] Vector linear_costate_rhs(const Vector& x, const CostateVector& lam) const;
  /// Nl1 = -phi.
  [[nodiscard]] Vector nonlinear_state(const Vector& x, const CostateVector& lam) const;
  /// Nl2 = -psi.
  [[nodiscard]] Vector nonlinear_costate(const Vector& x, const CostateVector& lam) const;

  [[nodiscard]] const BilinearProblem& problem() const noexcept { return *problem_; }

 private:
  const BilinearProblem* problem_;
};

}  // namespace bhpm
