#pragma once

#include "mmx/core.hpp"
#include "mmx/manifold.hpp"
#include "mmx/problem.hpp"

namespace mmx {

struct PenaltyLipschitz {
  double xx = 0, xy = 0, yx = 0, yy = 0;
  double max() const { return std::max(std::max(xx, xy), std::max(yx, yy)); }
};

/// Lipschitz constants of the penalized gradient on {||x|| <= C} x dom h:
///   l_yy = L_yy
///   l_xy = l_yx = 3/2 (1 + C^2) max{L_xy, L_yx}
///   l_xx = 3C lbar_x + 9/4 (1 + C^2)^2 L_xx + rho (3C^2 + 1)
/// where lbar_x bounds ||grad_x f(A(x), y)|| over the box. These grow like
/// C^2 rho + C^4 L_xx, so with a large ball they are far more conservative
/// than the base constants; both are exposed and the experiment defaults use
/// the base constant.
inline PenaltyLipschitz penalty_lipschitz(const LipschitzConstants& base, double rho,
                                          double C, double lbar_x) {
  require(rho >= 0 && C >= 0 && lbar_x >= 0, "penalty_lipschitz: negative input");
  PenaltyLipschitz l;
  l.yy = base.yy;
  l.xy = l.yx = 1.5 * (1.0 + C * C) * std::max(base.xy, base.yx);
  l.xx = 3.0 * C * lbar_x + 2.25 * (1.0 + C * C) * (1.0 + C * C) * base.xx +
         rho * (3.0 * C * C + 1.0);
  return l;
}

/// Analytic bound on ||grad_x f(A(x), y)|| for a quadratic instance:
/// ||A(x)|| <= C(3 + C^2)/2 on the ball, so ||Q A(x) + A y|| <=
/// ||Q||_2 C(3+C^2)/2 + ||A||_2 R_Y.
inline double quadratic_lbar_x(const QuadraticInstance& inst, double C, double dual_radius) {
  double reach = C * (3.0 + C * C) / 2.0;
  return spectral_norm(inst.Q) * reach + spectral_norm(inst.A) * dual_radius;
}

/// Sampled bound on ||grad_x f(A(x), y)|| over the ball times the dual
/// region, with a 2x safety factor. Used when no analytic bound is supplied.
inline double estimate_lbar_x(const MinimaxProblem& p, const ManifoldKit& kit, double C,
                              std::size_t samples, std::uint64_t seed) {
  auto rng = make_rng(splitmix64(seed));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    Matrix x = gaussian_matrix(rng, p.d1, p.r);
    x *= C * std::pow(unif(rng), 1.0 / static_cast<double>(p.d1 * p.r)) / x.norm();
    Vector y = gaussian_matrix(rng, p.d2, 1).col(0);
    y *= p.dual_radius * unif(rng) / std::max(y.norm(), 1e-300);
    y = p.h.prox(1.0, y);  // pull into dom h
    worst = std::max(worst, p.grad_x(kit.dissolve(x), y).norm());
  }
  return 2.0 * worst;
}

/// Exact-penalty reformulation of a manifold minimax problem:
///   value(x, y)  = f(A(x), y) + rho/4 ||c(x)||^2
///   grad_x(x, y) = J_A(x)'[grad_x f(A(x), y)] + rho/2 J_c(x)'[c(x)]
///   grad_y(x, y) = grad_y f(A(x), y)
/// over the Frobenius ball ||x|| <= C. Evaluation is retraction-free: no
/// SVD, QR or inverse of an x-sized matrix occurs on this path.
class PenalizedProblem {
 public:
  PenalizedProblem(MinimaxProblem base, ManifoldKit kit, double rho, double C)
      : base_(std::move(base)), kit_(std::move(kit)), rho_(rho), C_(C) {
    require(rho > 0, "PenalizedProblem: rho must be positive");
    require(base_.d1 == kit_.rows() && base_.r == kit_.cols(),
            "PenalizedProblem: problem/manifold dimension mismatch");
    double needed = 0.5 + kit_.max_frobenius_on_manifold();
    if (C <= needed)
      throw std::invalid_argument("PenalizedProblem: ball radius C must exceed 1/2 + sup_M ||x||");
  }

  const MinimaxProblem& base() const { return base_; }
  const ManifoldKit& kit() const { return kit_; }
  double rho() const { return rho_; }
  double ball_radius() const { return C_; }

  double value(const Matrix& x, const Vector& y) const {
    Matrix c = kit_.constraint(x);
    return base_.eval_f(kit_.dissolve(x), y) + 0.25 * rho_ * c.squaredNorm();
  }

  /// value(x, y) - h(y); finite only on dom h.
  double value_r(const Matrix& x, const Vector& y) const {
    return value(x, y) - base_.h.value(y);
  }

  Matrix grad_x(const Matrix& x, const Vector& y) const {
    Matrix a = kit_.dissolve(x);
    Matrix g = base_.grad_x(a, y);
    return kit_.dissolve_jtp(x, g) + 0.5 * rho_ * kit_.constraint_jtp(x, kit_.constraint(x));
  }

  Vector grad_y(const Matrix& x, const Vector& y) const {
    return base_.grad_y(kit_.dissolve(x), y);
  }

  /// Penalized problem with the dual regularizer replaced; keeps f, the kit
  /// and the penalty parameters. Used for Tikhonov dual regularization.
  PenalizedProblem with_regularizer(const Regularizer& h) const {
    MinimaxProblem b = base_;
    b.h = h;
    return PenalizedProblem(std::move(b), kit_, rho_, C_);
  }

 private:
  MinimaxProblem base_;
  ManifoldKit kit_;
  double rho_;
  double C_;
};

}  // namespace mmx
