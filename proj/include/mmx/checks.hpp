#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mmx/experiment.hpp"
#include "mmx/manifold.hpp"
#include "mmx/penalty.hpp"
#include "mmx/problem.hpp"
#include "mmx/prox.hpp"
#include "mmx/solver.hpp"

namespace mmx {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

namespace detail {

/// Central finite difference of a scalar function of a matrix, assembled
/// entrywise into a gradient-shaped matrix.
inline Matrix fd_gradient(const std::function<double(const Matrix&)>& f, const Matrix& x,
                          double step = 1e-6) {
  Matrix g(x.rows(), x.cols());
  Matrix xp = x;
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.cols(); ++j) {
      double orig = x(i, j);
      xp(i, j) = orig + step;
      double up = f(xp);
      xp(i, j) = orig - step;
      double down = f(xp);
      xp(i, j) = orig;
      g(i, j) = (up - down) / (2.0 * step);
    }
  return g;
}

inline double rel_error(const Matrix& got, const Matrix& want) {
  return (got - want).norm() / std::max(1.0, want.norm());
}

}  // namespace detail

/// Quick self-test battery behind the `check` CLI subcommand: operator
/// identities, finite-difference audits of every Jacobian-transpose product
/// and penalized gradient, prox properties, and a determinism micro-run.
inline std::vector<CheckResult> run_self_checks(std::uint64_t seed = 12345) {
  std::vector<CheckResult> results;
  auto add = [&](const std::string& name, bool ok, const std::string& detail = "") {
    results.push_back({name, ok, detail});
  };
  auto rng = make_rng(seed);

  std::vector<ManifoldKit> kits;
  kits.push_back(ManifoldKit::stiefel(7, 3));
  kits.push_back(ManifoldKit::oblique(6, 4));
  {
    Matrix g = gaussian_matrix(rng, 5, 5);
    Matrix b = g * g.transpose() + 5.0 * Matrix::Identity(5, 5);
    kits.push_back(ManifoldKit::generalized_stiefel(5, 2, b));
  }

  for (const auto& kit : kits) {
    std::string fam = to_string(kit.family());
    double worst_fix = 0, worst_proj = 0, worst_jtp = 0, worst_cjtp = 0, worst_tan = 0;
    for (int trial = 0; trial < 20; ++trial) {
      Matrix on = kit.random_point(rng);
      worst_fix = std::max(worst_fix, (kit.dissolve(on) - on).norm());
      worst_fix = std::max(worst_fix, kit.constraint_violation(on));
      Matrix x = on + 0.2 * gaussian_matrix(rng, kit.rows(), kit.cols());
      worst_proj = std::max(worst_proj, kit.constraint_violation(kit.project(x)));
      Matrix u = gaussian_matrix(rng, kit.rows(), kit.cols());
      auto a_dot_u = [&](const Matrix& xx) { return (kit.dissolve(xx).array() * u.array()).sum(); };
      worst_jtp = std::max(worst_jtp,
                           detail::rel_error(kit.dissolve_jtp(x, u), detail::fd_gradient(a_dot_u, x)));
      Matrix v = kit.family() == ManifoldFamily::Oblique
                     ? gaussian_matrix(rng, kit.cols(), 1)
                     : Matrix(sym(gaussian_matrix(rng, kit.cols(), kit.cols())));
      auto c_dot_v = [&](const Matrix& xx) { return (kit.constraint(xx).array() * v.array()).sum(); };
      worst_cjtp = std::max(worst_cjtp,
                            detail::rel_error(kit.constraint_jtp(x, v), detail::fd_gradient(c_dot_v, x)));
      Matrix q = kit.riemannian_grad(on, gaussian_matrix(rng, kit.rows(), kit.cols()));
      Matrix w = kit.family() == ManifoldFamily::Oblique
                     ? gaussian_matrix(rng, kit.cols(), 1)
                     : Matrix(sym(gaussian_matrix(rng, kit.cols(), kit.cols())));
      worst_tan = std::max(worst_tan,
                           std::abs((kit.constraint_jtp(on, w).array() * q.array()).sum()) /
                               std::max(1.0, q.norm()));
    }
    add(fam + ": A(x)=x and c(x)=0 on manifold", worst_fix < 1e-10);
    add(fam + ": projection lands on manifold", worst_proj < 1e-10);
    add(fam + ": dissolve_jtp matches finite differences", worst_jtp < 1e-5);
    add(fam + ": constraint_jtp matches finite differences", worst_cjtp < 1e-5);
    add(fam + ": riemannian_grad is tangent", worst_tan < 1e-8);
  }

  {
    Regularizer ball = Regularizer::ball_indicator(2, 1.0);
    Vector v(2);
    v << 3, 4;
    Vector p = ball.prox(0.7, v);
    add("prox: ball projection", (p - Vector(v * 0.2)).norm() < 1e-14);
    Regularizer simplex = Regularizer::simplex_indicator(4);
    Vector s = simplex.prox(1.0, gaussian_matrix(rng, 4, 1).col(0));
    add("prox: simplex output feasible",
        s.minCoeff() >= 0 && std::abs(s.sum() - 1.0) < 1e-12);
    bool firm = true;
    for (int trial = 0; trial < 50; ++trial) {
      Vector a = gaussian_matrix(rng, 3, 1).col(0), b = gaussian_matrix(rng, 3, 1).col(0);
      Regularizer h = Regularizer::simplex_indicator(3);
      if ((h.prox(1.0, a) - h.prox(1.0, b)).norm() > (a - b).norm() + 1e-12) firm = false;
    }
    add("prox: nonexpansive on random pairs", firm);
  }

  {
    QuadraticInstance inst = generate_quadratic(6, 6, 5.0, 1.0, seed);
    QuadraticInstance inst2 = generate_quadratic(6, 6, 5.0, 1.0, seed);
    add("generator: identical seeds give identical instances",
        inst.Q == inst2.Q && inst.A == inst2.A && inst.F_star == inst2.F_star);
    MinimaxProblem prob = make_problem(inst);
    ManifoldKit kit = ManifoldKit::stiefel(6, 1);
    PenalizedProblem pp(prob, kit, 10.0, 1000.0);
    double worst = 0;
    for (int trial = 0; trial < 10; ++trial) {
      Matrix x = gaussian_matrix(rng, 6, 1);
      Vector y = gaussian_matrix(rng, 6, 1).col(0);
      auto fx = [&](const Matrix& xx) { return pp.value(xx, y); };
      worst = std::max(worst, detail::rel_error(pp.grad_x(x, y), detail::fd_gradient(fx, x)));
      Matrix recomposed = kit.dissolve_jtp(x, prob.grad_x(kit.dissolve(x), y)) +
                          0.5 * pp.rho() * kit.constraint_jtp(x, kit.constraint(x));
      worst = std::max(worst, (recomposed - pp.grad_x(x, y)).norm());
    }
    add("penalty: grad_x matches finite differences and recomposition", worst < 1e-5);

    SolverConfig cfg = practical_config(practical_constant(inst), inst.mu_y);
    cfg.T = 200;
    auto rng2 = make_rng(seed + 1);
    Matrix x0 = kit.random_point(rng2);
    Vector y0 = prob.h.domain_center();
    RunResult r1 = run(pp, cfg, x0, y0, 50);
    RunResult r2 = run(pp, cfg, x0, y0, 50);
    bool identical = r1.trace.size() == r2.trace.size();
    for (std::size_t i = 0; identical && i < r1.trace.size(); ++i)
      identical = trace_row_csv(r1.trace[i]) == trace_row_csv(r2.trace[i]);
    add("solver: repeated run is bit-identical", identical);
    add("solver: iterates stay in the ball",
        r1.final_state.x.norm() <= cfg.C + 1e-12 && r1.stats.ball_active_count == 0);
  }

  return results;
}

}  // namespace mmx
