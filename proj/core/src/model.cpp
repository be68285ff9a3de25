#include "bhpm/model.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bhpm/errors.hpp"

namespace bhpm {

namespace {

bool all_finite(const Matrix& M) { return M.allFinite(); }

void require_shape(const std::string& key, const Matrix& M, Eigen::Index rows,
                   Eigen::Index cols) {
  if (M.rows() != rows || M.cols() != cols) {
    std::ostringstream os;
    os << "expected " << rows << "x" << cols << " matrix, got " << M.rows()
       << "x" << M.cols();
    throw ProblemError(key, os.str());
  }
  if (!all_finite(M)) throw ProblemError(key, "non-finite entry");
}

Matrix symmetrize(const std::string& key, const Matrix& M,
                  std::vector<std::string>& warnings) {
  const double asym = (M - M.transpose()).cwiseAbs().maxCoeff();
  if (asym > BilinearProblem::kAsymmetryWarning) {
    std::ostringstream os;
    os << key << " is not symmetric (max |M - M'| = " << asym
       << "); using (M + M')/2";
    warnings.push_back(os.str());
  }
  return 0.5 * (M + M.transpose());
}

double min_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetric, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

}  // namespace

std::string to_string(ControlMode mode) {
  return mode == ControlMode::kFull ? "full" : "linear-gain";
}

ControlMode parse_control_mode(const std::string& text) {
  if (text == "full") return ControlMode::kFull;
  if (text == "linear-gain") return ControlMode::kLinearGain;
  throw std::invalid_argument("unknown control mode '" + text +
                              "' (expected full or linear-gain)");
}

BilinearProblem::BilinearProblem(ProblemData data) {
  const Eigen::Index n = data.x0.size();
  if (n <= 0) throw ProblemError("x0", "state dimension must be positive");
  if (!data.x0.allFinite()) throw ProblemError("x0", "non-finite entry");
  const Eigen::Index m = data.B.cols();
  if (m <= 0) throw ProblemError("B", "control dimension must be positive");

  require_shape("A", data.A, n, n);
  require_shape("B", data.B, n, m);
  if (static_cast<Eigen::Index>(data.N.size()) != n) {
    std::ostringstream os;
    os << "expected " << n << " matrices, got " << data.N.size();
    throw ProblemError("N", os.str());
  }
  for (std::size_t j = 0; j < data.N.size(); ++j) {
    require_shape("N[" + std::to_string(j) + "]", data.N[j], n, m);
  }
  require_shape("Q", data.Q, n, n);
  require_shape("Qf", data.Qf, n, n);
  require_shape("R", data.R, m, m);
  if (!std::isfinite(data.t0)) throw ProblemError("t0", "non-finite");
  if (!std::isfinite(data.tf)) throw ProblemError("tf", "non-finite");
  if (!(data.t0 < data.tf)) throw ProblemError("tf", "must satisfy t0 < tf");

  Q_ = symmetrize("Q", data.Q, warnings_);
  Qf_ = symmetrize("Qf", data.Qf, warnings_);
  R_ = symmetrize("R", data.R, warnings_);
  if (min_eigenvalue(Q_) < -kPsdTolerance) {
    throw ProblemError("Q", "must be positive semi-definite");
  }
  if (min_eigenvalue(Qf_) < -kPsdTolerance) {
    throw ProblemError("Qf", "must be positive semi-definite");
  }
  if (!(min_eigenvalue(R_) > 0.0)) {
    throw ProblemError("R", "must be positive definite");
  }

  A_ = std::move(data.A);
  B_ = std::move(data.B);
  N_ = std::move(data.N);
  x0_ = std::move(data.x0);
  t0_ = data.t0;
  tf_ = data.tf;

  Eigen::LLT<Matrix> llt(R_);
  R_inv_ = llt.solve(Matrix::Identity(m, m));
  R_inv_ = 0.5 * (R_inv_ + R_inv_.transpose());
  S_ = B_ * R_inv_ * B_.transpose();
  S_ = 0.5 * (S_ + S_.transpose());

  linear_ = true;
  for (const auto& Nj : N_) {
    if (!Nj.isZero(0.0)) linear_ = false;
  }
}

BilinearProblem BilinearProblem::with_initial_state(const Vector& x0) const {
  ProblemData d = data();
  d.x0 = x0;
  return BilinearProblem(std::move(d));
}

ProblemData BilinearProblem::data() const {
  return ProblemData{A_, B_, N_, Q_, Qf_, R_, x0_, t0_, tf_};
}

BilinearProblem reactor_problem() {
  ProblemData d;
  d.A.resize(2, 2);
  d.A << 13.0 / 6.0, 5.0 / 12.0,  //
      -50.0 / 3.0, -8.0 / 3.0;
  d.B.resize(2, 1);
  d.B << -1.0 / 8.0, 0.0;
  d.N.assign(2, Matrix::Zero(2, 1));
  d.N[0] << -1.0, 0.0;
  d.Q = 10.0 * Matrix::Identity(2, 2);
  d.Qf = 1000.0 * Matrix::Identity(2, 2);
  d.R = Matrix::Identity(1, 1);
  d.x0.resize(2);
  d.x0 << 0.15, 0.0;
  d.t0 = 0.0;
  d.tf = 3.0;
  return BilinearProblem(std::move(d));
}

static void check_vector(const char* name, const Vector& v, int dim) {
  if (v.size() != dim) {
    std::ostringstream os;
    os << name << " has dimension " << v.size() << ", expected " << dim;
    throw DimensionError(os.str());
  }
}

Matrix n_of_x(const BilinearProblem& problem, const Vector& x) {
  check_vector("x", x, problem.n());
  Matrix out = Matrix::Zero(problem.n(), problem.m());
  for (int j = 0; j < problem.n(); ++j) out.noalias() += x(j) * problem.N(j);
  return out;
}

Matrix gain_operator(const BilinearProblem& problem, const Vector& x) {
  return problem.R_inverse() * (problem.B() + n_of_x(problem, x)).transpose();
}

Vector w_of(const BilinearProblem& problem, const Vector& x,
            const CostateVector& lam) {
  check_vector("lam", lam, problem.n());
  const Vector Gt_lam = (problem.B() + n_of_x(problem, x)).transpose() * lam;
  return problem.R_inverse() * Gt_lam;
}

Vector control_law(const BilinearProblem& problem, const Vector& x,
                   const CostateVector& lam, ControlMode mode) {
  check_vector("x", x, problem.n());
  check_vector("lam", lam, problem.n());
  if (mode == ControlMode::kLinearGain) {
    const Vector Bt_lam = problem.B().transpose() * lam;
    return -(problem.R_inverse() * Bt_lam);
  }
  return -w_of(problem, x, lam);
}

double hamiltonian(const BilinearProblem& problem, const Vector& x,
                   const CostateVector& lam, const Vector& u) {
  check_vector("x", x, problem.n());
  check_vector("lam", lam, problem.n());
  check_vector("u", u, problem.m());
  const Vector drift =
      problem.A() * x + (problem.B() + n_of_x(problem, x)) * u;
  return 0.5 * x.dot(problem.Q() * x) + 0.5 * u.dot(problem.R() * u) +
         lam.dot(drift);
}

Vector eval_phi(const BilinearProblem& problem, const Vector& x,
                const CostateVector& lam) {
  check_vector("lam", lam, problem.n());
  const Matrix Nx = n_of_x(problem, x);
  const Matrix& Ri = problem.R_inverse();
  const Vector NtLam = Nx.transpose() * lam;
  const Vector BtLam = problem.B().transpose() * lam;
  return -(problem.B() * (Ri * NtLam) + Nx * (Ri * BtLam) + Nx * (Ri * NtLam));
}

Vector eval_psi(const BilinearProblem& problem, const Vector& x,
                const CostateVector& lam) {
  const Vector w = w_of(problem, x, lam);
  Vector psi(problem.n());
  // psi_j = -lam' N_j u* with u* = -w
  for (int j = 0; j < problem.n(); ++j) psi(j) = lam.dot(problem.N(j) * w);
  return psi;
}

Vector OperatorSplit::linear_state_rhs(const Vector& x,
                                       const CostateVector& lam) const {
  return problem_->A() * x - problem_->S() * lam;
}

Vector OperatorSplit::linear_costate_rhs(const Vector& x,
                                         const CostateVector& lam) const {
  return -(problem_->Q() * x) - problem_->A().transpose() * lam;
}

Vector OperatorSplit::nonlinear_state(const Vector& x,
                                      const CostateVector& lam) const {
  return -eval_phi(*problem_, x, lam);
}

Vector OperatorSplit::nonlinear_costate(const Vector& x,
                                        const CostateVector& lam) const {
  return -eval_psi(*problem_, x, lam);
}

}  // namespace bhpm
