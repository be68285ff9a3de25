#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "bhpm/errors.hpp"
#include "bhpm/hpm.hpp"
#include "bhpm/verify.hpp"
#include "oracles.hpp"

namespace bhpm {
namespace {

ProblemData scalar_data(double a, double b, double n1, double q, double qf, double x0) {
  ProblemData d;
  d.A = Matrix::Constant(1, 1, a);
  d.B = Matrix::Constant(1, 1, b);
  d.N = {Matrix::Constant(1, 1, n1)};
  d.Q = Matrix::Constant(1, 1, q);
  d.Qf = Matrix::Constant(1, 1, qf);
  d.R = Matrix::Ones(1, 1);
  d.x0 = Vector::Constant(1, x0);
  d.t0 = 0.0;
  d.tf = 1.0;
  return d;
}

BilinearProblem reactor_lq() {
  ProblemData d = reactor_problem().data();
  for (auto& Nj : d.N) Nj.setZero();
  return BilinearProblem(std::move(d));
}

// The converged reactor costate at t0, cross-checked offline against an
// independent collocation solver.
Vector reactor_costate_at_t0() {
  Vector lam(2);
  lam << 8.92733952, 2.73777e-4;
  return lam;
}

TEST(Residual, ExactLinearSolutionSitsOnDiscretizationFloor) {
  const BilinearProblem p = reactor_lq();
  double previous = 0.0;
  for (int K : {300, 600}) {
    const TimeGrid g(p.t0(), p.tf(), K);
    const SeriesTerm t = initial_guess(p, g);
    const ResidualReport r = tpbvp_residual(p, t.x, t.lam);
    EXPECT_EQ(r.initial_defect, 0.0);
    EXPECT_LT(r.terminal_defect, 1e-9);
    EXPECT_LT(r.ode_sup(), std::pow(r.grid_step, 2) * (1.0 + t.sup_norm()));
    EXPECT_DOUBLE_EQ(r.grid_step, g.step());
    if (previous > 0.0) EXPECT_GT(previous / r.ode_sup(), 3.0);
    previous = r.ode_sup();
  }
}

TEST(Residual, ZeroTrajectoriesReportInitialDefect) {
  const BilinearProblem p = reactor_problem();
  const TimeGrid g(p.t0(), p.tf(), 300);
  const Trajectory zero(g, 2);
  const ResidualReport r = tpbvp_residual(p, zero, zero);
  EXPECT_EQ(r.initial_defect, p.x0().norm());
  EXPECT_EQ(r.terminal_defect, 0.0);
  EXPECT_EQ(r.ode_sup(), 0.0);
  EXPECT_EQ(r.state_l2, 0.0);
  EXPECT_EQ(r.total_sup(), p.x0().norm());
}

TEST(Residual, GridMismatchIsRejected) {
  const BilinearProblem p = reactor_problem();
  const Trajectory a(TimeGrid(0.0, 3.0, 300), 2);
  const Trajectory b(TimeGrid(0.0, 3.0, 200), 2);
  EXPECT_THROW((void)tpbvp_residual(p, a, b), DimensionError);
  const Trajectory wrong_dim(TimeGrid(0.0, 3.0, 300), 3);
  EXPECT_THROW((void)tpbvp_residual(p, wrong_dim, wrong_dim), DimensionError);
}

TEST(Residual, L2NormIsBoundedBySupNorm) {
  const BilinearProblem p = reactor_problem();
  const TimeGrid g(p.t0(), p.tf(), 300);
  const HpmSolution sol = hpm_iterate(p, g, HpmOptions{1, 1e-8});
  const ResidualReport r = tpbvp_residual(p, sol.x_sum, sol.lam_sum);
  const double T = p.tf() - p.t0();
  EXPECT_GT(r.state_l2, 0.0);
  EXPECT_LE(r.state_l2, r.state_sup * std::sqrt(T) * (1.0 + 1e-12));
  EXPECT_LE(r.costate_l2, r.costate_sup * std::sqrt(T) * (1.0 + 1e-12));
}

TEST(ForwardSimulate, DriftFreeZeroControlHoldsState) {
  ProblemData d = reactor_problem().data();
  d.A.setZero();
  const BilinearProblem p(std::move(d));
  const TimeGrid g(p.t0(), p.tf(), 50);
  const Trajectory x = forward_simulate(p, Trajectory(g, 1), p.x0());
  for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(Vector(x.at(k)), p.x0());
}

TEST(ForwardSimulate, ScalarDecayMatchesExponential) {
  const BilinearProblem p(scalar_data(-1.0, 1.0, 0.0, 1.0, 0.0, 1.0));
  const TimeGrid g(0.0, 1.0, 300);
  const Trajectory x = forward_simulate(p, Trajectory(g, 1), p.x0());
  EXPECT_NEAR(x.at(300)(0), std::exp(-1.0), 1e-8);
}

TEST(ForwardSimulate, LinearlyInterpolatesControl) {
  // x' = u with u(t) = t gives x(1) = 1/2 exactly under RK4.
  const BilinearProblem p(scalar_data(0.0, 1.0, 0.0, 1.0, 0.0, 0.0));
  const TimeGrid g(0.0, 1.0, 10);
  Trajectory u(g, 1);
  for (std::size_t k = 0; k < g.size(); ++k) u.at(k)(0) = g.node(k);
  const Trajectory x = forward_simulate(p, u, p.x0());
  EXPECT_NEAR(x.at(10)(0), 0.5, 1e-15);
  EXPECT_NEAR(x.at(5)(0), 0.125, 1e-15);
}

TEST(ForwardSimulate, BlowUpNamesFirstBadNode) {
  // x' = x u with u = 1000 grows like e^{1000 t}; doubles overflow near t = 0.71.
  const BilinearProblem p(scalar_data(0.0, 0.0, 1.0, 1.0, 0.0, 1.0));
  const TimeGrid g(0.0, 1.0, 1000);
  Trajectory u(g, 1);
  u.samples().setConstant(1000.0);
  try {
    (void)forward_simulate(p, u, p.x0());
    FAIL() << "expected DivergenceError";
  } catch (const DivergenceError& e) {
    EXPECT_GT(e.first_bad_node(), 600u);
    EXPECT_LT(e.first_bad_node(), 800u);
  }
}

TEST(ForwardSimulate, RejectsWrongInitialState) {
  const BilinearProblem p = reactor_problem();
  const TimeGrid g(p.t0(), p.tf(), 10);
  EXPECT_THROW((void)forward_simulate(p, Trajectory(g, 1), Vector::Zero(3)), DimensionError);
  EXPECT_THROW((void)forward_simulate(p, Trajectory(g, 2), p.x0()), DimensionError);
}

TEST(Cost, ZeroTrajectoriesCostNothing) {
  const BilinearProblem p = reactor_problem();
  const TimeGrid g(p.t0(), p.tf(), 300);
  EXPECT_EQ(cost_evaluate(p, Trajectory(g, 2), Trajectory(g, 1)), 0.0);
}

TEST(Cost, ConstantStateExample) {
  const BilinearProblem p(scalar_data(0.0, 1.0, 0.0, 2.0, 0.0, 1.0));
  for (int K : {2, 3, 300, 301}) {
    const TimeGrid g(0.0, 1.0, K);
    Trajectory x(g, 1);
    x.samples().setOnes();
    EXPECT_NEAR(cost_evaluate(p, x, Trajectory(g, 1)), 1.0, 1e-14) << "K = " << K;
  }
}

TEST(Cost, SimpsonIsExactForCubics) {
  for (int K : {2, 3, 4, 7, 10}) {
    const double h = 2.0 / K;
    Vector v(K + 1);
    for (int k = 0; k <= K; ++k) {
      const double t = k * h;
      v(k) = t * t * t - 2.0 * t + 1.0;
    }
    EXPECT_NEAR(simpson(v, h), 4.0 - 4.0 + 2.0, 1e-13) << "K = " << K;
  }
}

TEST(Cost, InvariantUnderRefinement) {
  const BilinearProblem p = reactor_problem();
  auto cost_on = [&](int K) {
    const TimeGrid g(p.t0(), p.tf(), K);
    Trajectory x(g, 2), u(g, 1);
    for (std::size_t k = 0; k < g.size(); ++k) {
      const double t = g.node(k);
      x.at(k) << 0.15 * std::exp(-t) * std::cos(2.0 * t), 0.1 * std::sin(t);
      u.at(k) << std::cos(3.0 * t);
    }
    return cost_evaluate(p, x, u);
  };
  const double coarse = cost_on(600);
  EXPECT_NEAR(cost_on(1200), coarse, 1e-9 * coarse);
}

TEST(Cost, GridMismatchIsRejected) {
  const BilinearProblem p = reactor_problem();
  EXPECT_THROW((void)cost_evaluate(p, Trajectory(TimeGrid(0.0, 3.0, 10), 2),
                                   Trajectory(TimeGrid(0.0, 3.0, 12), 1)),
               DimensionError);
}

TEST(Reference, LinearProblemNeedsAtMostTwoNewtonSteps) {
  const BilinearProblem p = reactor_lq();
  const TimeGrid g(p.t0(), p.tf(), 300);
  ReferenceOptions opts;
  opts.initial_costate = Vector::Zero(2);
  const ReferenceSolution ref = reference_solve(p, g, opts);
  EXPECT_LE(ref.newton_iterations, 2);
  EXPECT_EQ(ref.continuation_stages, 0);
  EXPECT_LT(ref.terminal_defect, 1e-9);
  const auto lq = testing::riccati_lq_solution(p.A(), p.S(), p.Q(), p.Qf(), p.x0(), g);
  EXPECT_LT(sup_distance(ref.x, lq.x), 1e-6);
  EXPECT_LT(sup_distance(ref.lam, lq.lam), 1e-6);
}

TEST(Reference, RejectsBadOptions) {
  const BilinearProblem p = reactor_problem();
  const TimeGrid g(p.t0(), p.tf(), 30);
  ReferenceOptions opts;
  opts.newton_tol = 0.0;
  EXPECT_THROW((void)reference_solve(p, g, opts), std::invalid_argument);
  opts = ReferenceOptions{};
  opts.initial_costate = Vector::Zero(3);
  EXPECT_THROW((void)reference_solve(p, g, opts), DimensionError);
}

class ReactorReference : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ref_ = new ReferenceSolution(reference_solve(problem(), grid()));
  }
  static void TearDownTestSuite() {
    delete ref_;
    ref_ = nullptr;
  }
  static BilinearProblem problem() { return reactor_problem(); }
  static TimeGrid grid() { return TimeGrid(0.0, 3.0, 3000); }

  static ReferenceSolution* ref_;
};

ReferenceSolution* ReactorReference::ref_ = nullptr;

TEST_F(ReactorReference, ConvergesWithSmallResidual) {
  EXPECT_LT(ref_->terminal_defect, 1e-9);
  const ResidualReport r = tpbvp_residual(problem(), ref_->x, ref_->lam);
  EXPECT_LE(r.total_sup(), 1e-6);
  EXPECT_LT((Vector(ref_->lam.at(0)) - reactor_costate_at_t0()).norm(), 1e-5);
  EXPECT_NEAR(cost_evaluate(problem(), ref_->x, ref_->u), 0.92929, 1e-4);
}

TEST_F(ReactorReference, PerturbedInitializationFindsSameSolution) {
  std::mt19937 rng(2024);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 3; ++trial) {
    ReferenceOptions opts;
    Vector lam0 = ref_->lam.at(0);
    for (Eigen::Index i = 0; i < lam0.size(); ++i) lam0(i) += 0.1 * g(rng);
    opts.initial_costate = lam0;
    const ReferenceSolution other = reference_solve(problem(), grid(), opts);
    EXPECT_LT(sup_distance(other.x, ref_->x), 1e-6);
    EXPECT_LT(sup_distance(other.lam, ref_->lam), 1e-6);
  }
}

TEST_F(ReactorReference, ForwardSimulationGapIsSecondOrder) {
  // Linear interpolation of the sampled control inside each step leaves an
  // O(dt^2) gap to the reference. This RK4 uses the exact stage controls.
  const Trajectory x = forward_simulate(problem(), ref_->u, problem().x0());
  EXPECT_LE(sup_distance(x, ref_->x), 1e-6);
}

TEST(Reference, ForwardSimulationReproducesReactorState) {
  const BilinearProblem p = reactor_problem();
  const TimeGrid g(p.t0(), p.tf(), 12000);
  const ReferenceSolution ref = reference_solve(p, g);
  const Trajectory x = forward_simulate(p, ref.u, p.x0());
  EXPECT_LE(sup_distance(x, ref.x), 1e-7);
}

TEST_F(ReactorReference, TerminalStateIsNearOrigin) {
  EXPECT_LT(ref_->x.at(3000).norm(), 0.05 * problem().x0().norm());
}

TEST(Reference, ContractiveReactorCostOrdering) {
  // J of the closed-loop N-term series control decreases in N and stays above
  // the optimum. Costs use forward-simulated states.
  const BilinearProblem p = testing::scaled_reactor(1.0 / 15.0);
  const TimeGrid g(p.t0(), p.tf(), 300);
  const HpmSolution sol = hpm_iterate(p, g, HpmOptions{3, 1e-30});
  const ReferenceSolution ref = reference_solve(p, g);
  const double j_ref = cost_evaluate(p, ref.x, ref.u);
  double previous = INFINITY;
  for (std::size_t N = 1; N <= 3; ++N) {
    auto [x, lam] = partial_sum(sol.terms, N);
    const Trajectory u = control_trajectory(p, x, lam, ControlMode::kFull);
    const double j = cost_evaluate(p, forward_simulate(p, u, p.x0()), u);
    EXPECT_LE(j, previous) << "N = " << N;
    EXPECT_GE(j, j_ref - 1e-9) << "N = " << N;
    previous = j;
  }
}

}  // namespace
}  // namespace bhpm
