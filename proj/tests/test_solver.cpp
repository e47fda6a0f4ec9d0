#include <gtest/gtest.h>

#include "mmx/solver.hpp"
#include "mmx/trace_io.hpp"
#include "support/oracles.hpp"

using mmx::IterateState;
using mmx::ManifoldKit;
using mmx::Matrix;
using mmx::PenalizedProblem;
using mmx::SolverConfig;
using mmx::Vector;

namespace {

// 2-D sphere instance with Q = diag(1, -1), A = I, mu_y = 1.
mmx::QuadraticInstance tiny_instance() {
  mmx::QuadraticInstance inst;
  inst.m = inst.n = 2;
  inst.L_target = 1.0;
  inst.mu_y = 1.0;
  inst.seed = 0;
  inst.Q = Matrix::Zero(2, 2);
  inst.Q(0, 0) = 1.0;
  inst.Q(1, 1) = -1.0;
  inst.A = Matrix::Identity(2, 2);
  Eigen::SelfAdjointEigenSolver<Matrix> es(inst.Q + inst.A * inst.A.transpose());
  inst.F_star = 0.5 * es.eigenvalues().minCoeff();
  return inst;
}

PenalizedProblem penalized(const mmx::QuadraticInstance& inst, double rho = 10.0,
                           double C = 1000.0) {
  return PenalizedProblem(mmx::make_problem(inst),
                          ManifoldKit::stiefel(inst.m, 1), rho, C);
}

bool traces_identical(const std::vector<mmx::TraceRow>& a,
                      const std::vector<mmx::TraceRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (mmx::trace_row_csv(a[i]) != mmx::trace_row_csv(b[i])) return false;
  return true;
}

}  // namespace

TEST(Config, PracticalDefaults) {
  auto cfg = mmx::practical_config(5.0, 1.0);
  EXPECT_NEAR(cfg.tau1, 1.0 / 30.0, 1e-15);
  EXPECT_NEAR(cfg.tau2, 1.0 / 90.0, 1e-15);
  EXPECT_EQ(cfg.beta, 0.9);
  EXPECT_EQ(cfg.p, 10.0);
  EXPECT_EQ(cfg.rho, 10.0);
  EXPECT_EQ(cfg.C, 1000.0);
  EXPECT_NEAR(cfg.kappa_bar(), 5.0, 1e-15);
}

TEST(Config, PlTheoryRelations) {
  double l = 4.0, mu = 0.5, zeta = 0.25;
  auto cfg = mmx::pl_theory_config(l, mu, zeta);
  EXPECT_NEAR(cfg.tau1, 1.0 / 12.0, 1e-15);
  EXPECT_NEAR(cfg.tau2, (1.0 / 16.0) / (3.0 / cfg.tau1 + zeta), 1e-18);
  EXPECT_EQ(cfg.p, 8.0);
  EXPECT_NEAR(cfg.beta, cfg.alpha * mu * cfg.tau2, 1e-18);
  EXPECT_EQ(cfg.theta_at(17), 0.0);
  EXPECT_THROW(mmx::pl_theory_config(l, mu, 0.0, 1.0 / 2000.0), std::invalid_argument);
}

TEST(Config, ConcaveSchedules) {
  double l = 4.0, l_yy = 0.0;
  auto cfg = mmx::concave_theory_config(l, l_yy);
  EXPECT_EQ(cfg.p, 0.0);
  EXPECT_EQ(cfg.beta, 1.0);
  EXPECT_NEAR(cfg.tau2, 1.0 / 40.0, 1e-15);
  EXPECT_GT(cfg.concave_b, mmx::kConcaveBFloor);
  EXPECT_GT(cfg.concave_b, 2.0 / (cfg.tau2 * l) - 1.0);
  EXPECT_NEAR(cfg.theta_coeff, 0.95 / cfg.tau2, 1e-12);
  // schedules: theta strictly decreasing to 0, tau1 strictly decreasing
  double prev_theta = mmx::kInf, prev_tau = mmx::kInf;
  for (long t = 0; t < 2000; ++t) {
    EXPECT_LT(cfg.theta_at(t), prev_theta);
    EXPECT_GT(cfg.tau1_at(t), 0.0);
    EXPECT_LT(cfg.tau1_at(t), prev_tau);
    prev_theta = cfg.theta_at(t);
    prev_tau = cfg.tau1_at(t);
  }
  EXPECT_LT(cfg.theta_at(1L << 40), 1e-2);
}

TEST(Config, ValidationCatchesBrokenSetups) {
  auto inst = tiny_instance();
  auto problem = mmx::make_problem(inst);
  auto cfg = mmx::pl_theory_config(4.0, 1.0);
  cfg.tau1 = 1.0;  // violates tau1 <= 1/(3l)
  EXPECT_THROW(mmx::validate(cfg, problem), std::invalid_argument);
  auto cfg2 = mmx::concave_theory_config(4.0, 2.0);
  cfg2.p = 1.0;  // merely-concave mode requires p = 0
  EXPECT_THROW(mmx::validate(cfg2, problem), std::invalid_argument);
  auto cfg3 = mmx::concave_theory_config(4.0, 2.0);
  cfg3.tau2 = 1.0;  // violates tau2 <= 1/(10 l_yy) with l_yy = mu_y = 1
  EXPECT_THROW(mmx::validate(cfg3, problem), std::invalid_argument);
  auto cfg4 = mmx::practical_config(5.0);
  cfg4.rho = -1.0;
  EXPECT_THROW(mmx::validate(cfg4, problem), std::invalid_argument);
}

TEST(Step, StationaryFixedPoint) {
  auto inst = mmx::generate_quadratic(5, 5, 5.0, 1.0, 61);
  auto pp = penalized(inst);
  Eigen::SelfAdjointEigenSolver<Matrix> es(inst.Q + inst.A * inst.A.transpose());
  Matrix x(5, 1);
  x.col(0) = es.eigenvectors().col(2);
  Vector ystar = inst.A.transpose() * x.col(0);
  auto cfg = mmx::practical_config(5.0, 1.0);
  IterateState s{x, x, ystar, 0};
  auto out = mmx::smgda_step(pp, cfg, s);
  EXPECT_LT((out.state.x - x).norm(), 1e-12);
  EXPECT_LT((out.state.y - ystar).norm(), 1e-12);
  EXPECT_LT((out.state.z - x).norm(), 1e-12);
}

TEST(Step, ReducesToPlainDescentAscentWithoutSmoothing) {
  auto inst = tiny_instance();
  auto pp = penalized(inst);
  auto cfg = mmx::mgda_config(1.0, 1.0);
  cfg.T = 50;
  auto rng = mmx::make_rng(62);
  Matrix x = pp.kit().random_point(rng);
  Vector y = Vector::Zero(2);
  Matrix z = x;

  // hand-rolled alternating descent-ascent on the penalized objective
  Matrix hx = x;
  Vector hy = y;
  for (int t = 0; t < 50; ++t) {
    Matrix g = pp.grad_x(hx, hy);
    hx = mmx::project_frobenius_ball(hx - cfg.tau1 * g, cfg.C);
    hy = hy + cfg.tau2 * pp.grad_y(hx, hy);
  }

  IterateState s{x, z, y, 0};
  Matrix gx = pp.grad_x(s.x, s.y);
  for (int t = 0; t < 50; ++t) {
    auto out = mmx::smgda_step(pp, cfg, s, gx);
    s = out.state;
    EXPECT_TRUE(s.z == z);  // beta = 0 freezes the anchor
    gx = pp.grad_x(s.x, s.y);
  }
  EXPECT_LT((s.x - hx).norm(), 1e-14);
  EXPECT_LT((s.y - hy).norm(), 1e-14);
}

TEST(Step, HandScriptedRecomputation) {
  auto inst = tiny_instance();
  double L = 1.0;  // max{||Q||_2, ||A||_2}
  auto pp = penalized(inst);
  auto cfg = mmx::practical_config(L, inst.mu_y);
  Matrix x0(2, 1);
  x0 << 1, 0;
  Vector y0 = Vector::Zero(2);
  IterateState s{x0, x0, y0, 0};

  // independent recomputation of one update from raw matrix expressions
  auto script_step = [&](Matrix x, Matrix z, Vector y) {
    double xx = (x.transpose() * x)(0, 0);
    Matrix a = x * (1.5 - 0.5 * xx);
    Matrix gf = inst.Q * a + inst.A * y;
    Matrix ja = gf * (1.5 - 0.5 * xx) - x * (x.transpose() * gf)(0, 0);
    Matrix g = ja + cfg.rho * x * (xx - 1.0);
    Matrix xr = x - cfg.tau1 * (g + cfg.p * (x - z));
    if (xr.norm() > cfg.C) xr *= cfg.C / xr.norm();
    double xx1 = (xr.transpose() * xr)(0, 0);
    Matrix a1 = xr * (1.5 - 0.5 * xx1);
    Vector gy = inst.A.transpose() * a1.col(0) - inst.mu_y * y;
    Vector y1 = y + cfg.tau2 * gy;  // h = 0: prox is the identity
    Matrix z1 = z + cfg.beta * (xr - z);
    return std::make_tuple(xr, z1, y1);
  };

  auto out = mmx::smgda_step(pp, cfg, s);
  auto [sx, sz, sy] = script_step(x0, x0, y0);
  EXPECT_LT((out.state.x - sx).norm(), 1e-16);
  EXPECT_LT((out.state.z - sz).norm(), 1e-16);
  EXPECT_LT((out.state.y - sy).norm(), 1e-16);
  // the specific starting point is a fixed point in x and moves y by tau2 A'x
  EXPECT_TRUE(out.state.x == x0);
  EXPECT_LT((out.state.y - Vector(cfg.tau2 * inst.A.transpose() * x0.col(0))).norm(),
            1e-16);
  // a few chained steps stay in lockstep with the script
  IterateState cur = out.state;
  Matrix hx = sx, hz = sz;
  Vector hy = sy;
  for (int t = 1; t <= 5; ++t) {
    auto nxt = mmx::smgda_step(pp, cfg, cur);
    std::tie(hx, hz, hy) = script_step(hx, hz, hy);
    EXPECT_LT((nxt.state.x - hx).norm(), 1e-15);
    EXPECT_LT((nxt.state.y - hy).norm(), 1e-15);
    EXPECT_LT((nxt.state.z - hz).norm(), 1e-15);
    cur = nxt.state;
  }
}

TEST(Step, NeverProjectsOntoTheManifold) {
  auto inst = mmx::generate_quadratic(6, 6, 5.0, 1.0, 63);
  auto pp = penalized(inst);
  auto cfg = mmx::practical_config(5.0, 1.0);
  auto rng = mmx::make_rng(64);
  IterateState s{pp.kit().random_point(rng), Matrix(), Vector::Zero(6), 0};
  s.z = s.x;
  long before = pp.kit().projection_count();
  for (int t = 0; t < 200; ++t) s = mmx::smgda_step(pp, cfg, s).state;
  EXPECT_EQ(pp.kit().projection_count(), before);
}

TEST(Run, ZeroIterationsReturnsInitialState) {
  auto inst = tiny_instance();
  auto pp = penalized(inst);
  auto cfg = mmx::practical_config(1.0, 1.0);
  cfg.T = 0;
  Matrix x0(2, 1);
  x0 << 0, 1;
  auto result = mmx::run(pp, cfg, x0, Vector::Zero(2));
  EXPECT_TRUE(result.trace.empty());
  EXPECT_TRUE(result.final_state.x == x0);
  EXPECT_EQ(result.stats.iters_run, 0);
}

TEST(Run, WarmDualStartIsAscent) {
  for (double mu_y : {0.0, 1.0}) {
    auto inst = mmx::generate_quadratic(6, 6, 5.0, mu_y, 65);
    auto pp = penalized(inst);
    auto rng = mmx::make_rng(66);
    Matrix x0 = pp.kit().random_point(rng);
    Vector y_raw = pp.base().h.domain_center();
    Vector y_warm = mmx::warm_dual_start(pp, x0, y_raw, 500);
    EXPECT_GE(pp.value_r(x0, y_warm), pp.value_r(x0, y_raw) - 1e-12);
    EXPECT_TRUE(pp.base().h.in_domain(y_warm, 1e-12));
  }
}

TEST(Run, DeterministicTraces) {
  auto inst = mmx::generate_quadratic(8, 8, 5.0, 1.0, 67);
  auto pp = penalized(inst);
  auto cfg = mmx::practical_config(5.0, 1.0);
  cfg.T = 500;
  auto rng = mmx::make_rng(68);
  Matrix x0 = pp.kit().random_point(rng);
  auto r1 = mmx::run(pp, cfg, x0, Vector::Zero(8), 100);
  auto r2 = mmx::run(pp, cfg, x0, Vector::Zero(8), 100);
  EXPECT_TRUE(traces_identical(r1.trace, r2.trace));
  EXPECT_TRUE(r1.final_state.x == r2.final_state.x);
}

TEST(Run, FeasibilityEveryRecordedIterate) {
  auto inst = mmx::generate_quadratic(6, 6, 5.0, 0.0, 69);
  auto pp = penalized(inst);
  auto cfg = mmx::practical_config(5.0);
  cfg.T = 800;
  auto rng = mmx::make_rng(70);
  auto result = mmx::run(pp, cfg, pp.kit().random_point(rng),
                         pp.base().h.domain_center(), 1);
  ASSERT_EQ(result.trace.size(), 800u);
  for (const auto& row : result.trace) {
    EXPECT_LE(row.x_norm, cfg.C + 1e-12);
    EXPECT_FALSE(row.ball_active);
  }
  EXPECT_EQ(result.stats.ball_active_count, 0);
  EXPECT_TRUE(pp.base().h.in_domain(result.final_state.y, 1e-12));
}

TEST(Run, EarlyStopOnResidual) {
  auto inst = mmx::generate_quadratic(6, 6, 5.0, 1.0, 71);
  auto pp = penalized(inst);
  auto cfg = mmx::practical_config(5.0, 1.0);
  cfg.T = 100000;
  cfg.tol = 1e-6;
  auto rng = mmx::make_rng(72);
  auto result = mmx::run(pp, cfg, pp.kit().random_point(rng), Vector::Zero(6), 1000);
  EXPECT_EQ(result.stats.status, mmx::RunStatus::EarlyStopped);
  EXPECT_LT(result.stats.iters_run, 100000);
  const auto& last = result.trace.back();
  EXPECT_LE(std::max(last.Gx, last.Gy), cfg.tol);
}

TEST(Run, NonFiniteIteratesAreDiagnosed) {
  auto inst = mmx::generate_quadratic(4, 4, 5.0, 1.0, 73);
  auto pp = penalized(inst);
  auto cfg = mmx::practical_config(5.0, 1.0);
  cfg.tau1 = 1e160;  // drives the first steps to overflow
  cfg.tau2 = 1e160;
  cfg.regime = mmx::Regime::Practical;
  cfg.T = 50;
  auto rng = mmx::make_rng(74);
  auto result = mmx::run(pp, cfg, pp.kit().random_point(rng), Vector::Zero(4), 1);
  EXPECT_EQ(result.stats.status, mmx::RunStatus::NonFinite);
  EXPECT_GE(result.stats.nonfinite_t, 1);
  EXPECT_LE(result.stats.nonfinite_t, 50);
}

TEST(Run, MerelyConcaveSchedulesRunToCompletion) {
  auto inst = mmx::generate_quadratic(6, 6, 5.0, 0.0, 75);
  auto problem = mmx::make_problem(inst);
  auto cfg = mmx::concave_theory_config(mmx::practical_constant(inst),
                                        problem.lipschitz.yy);
  cfg.T = 1500;
  auto pp = penalized(inst);
  auto rng = mmx::make_rng(76);
  auto result = mmx::run(pp, cfg, pp.kit().random_point(rng),
                         problem.h.domain_center(), 100);
  EXPECT_EQ(result.stats.status, mmx::RunStatus::Completed);
  EXPECT_EQ(result.stats.iters_run, 1500);
  for (const auto& row : result.trace) {
    EXPECT_TRUE(std::isfinite(row.Gx));
    EXPECT_TRUE(std::isfinite(row.Gy));
    EXPECT_TRUE(std::isfinite(row.c_norm));
  }
}

TEST(Run, TikhonovWrapShiftsTheDualFixedPoint) {
  auto inst = mmx::generate_quadratic(6, 6, 5.0, 0.0, 77);
  auto pp = penalized(inst);
  auto base_cfg = mmx::practical_config(5.0);
  base_cfg.T = 4000;
  auto cfg = mmx::tikhonov_config(base_cfg, 1e-2, pp.base().h.domain_diameter());
  EXPECT_NEAR(cfg.mu, 1e-2 / 4.0, 1e-15);
  auto rng = mmx::make_rng(78);
  Matrix x0 = pp.kit().random_point(rng);
  auto result = mmx::run(pp, cfg, x0, pp.base().h.domain_center(), 500);
  EXPECT_EQ(result.stats.status, mmx::RunStatus::Completed);
  // the recorded dual residual is measured against the unwrapped problem
  for (const auto& row : result.trace) EXPECT_TRUE(std::isfinite(row.dual_residual));
}

TEST(Rgda, TangentZeroFixedPoint) {
  auto inst = mmx::generate_quadratic(5, 5, 5.0, 1.0, 79);
  auto problem = mmx::make_problem(inst);
  ManifoldKit kit = ManifoldKit::stiefel(5, 1);
  Eigen::SelfAdjointEigenSolver<Matrix> es(inst.Q + inst.A * inst.A.transpose());
  Matrix x(5, 1);
  x.col(0) = es.eigenvectors().col(0);
  Vector ystar = inst.A.transpose() * x.col(0);
  IterateState s{x, x, ystar, 0};
  auto next = mmx::rgda_step(problem, kit, 0.05, 0.1, s);
  EXPECT_LT((next.x - x).norm(), 1e-10);
  EXPECT_LT((next.y - ystar).norm(), 1e-10);
}

TEST(Rgda, SphereUpdateIsNormalization) {
  auto inst = tiny_instance();
  auto problem = mmx::make_problem(inst);
  ManifoldKit kit = ManifoldKit::stiefel(2, 1);
  auto rng = mmx::make_rng(80);
  Matrix x = kit.random_point(rng);
  Vector y = mmx::gaussian_matrix(rng, 2, 1).col(0);
  double tau1 = 0.1;
  IterateState s{x, x, y, 0};
  auto next = mmx::rgda_step(problem, kit, tau1, 0.1, s);
  Matrix g = problem.grad_x(x, y);
  Matrix tangent = g - x * (x.transpose() * g)(0, 0);
  Matrix expected = x - tau1 * tangent;
  expected /= expected.norm();
  EXPECT_LT((next.x - expected).norm(), 1e-12);
}

TEST(Rgda, IteratesStayOnManifold) {
  auto inst = mmx::generate_quadratic(8, 8, 5.0, 1.0, 81);
  auto problem = mmx::make_problem(inst);
  ManifoldKit kit = ManifoldKit::stiefel(8, 1);
  auto rng = mmx::make_rng(82);
  double L = mmx::practical_constant(inst);
  double tau1 = 1.0 / (16.0 * 4.0 * L);
  auto result = mmx::run_rgda(problem, kit, tau1, 1.0 / L, kit.random_point(rng),
                              Vector::Zero(8), 500, 1);
  ASSERT_EQ(result.trace.size(), 500u);
  for (const auto& row : result.trace) EXPECT_LE(row.c_norm, 1e-10);
}

TEST(RhoHelper, LowerBoundFormula) {
  EXPECT_NEAR(mmx::rho_lower_bound(2.0, -3.0, 1.5, 0.5, 2.0), 16.0 * (5.0 + 4.0), 1e-12);
}
