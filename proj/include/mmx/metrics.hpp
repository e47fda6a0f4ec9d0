#pragma once

#include <cmath>
#include <vector>

#include "mmx/core.hpp"
#include "mmx/penalty.hpp"

namespace mmx {

/// One recorded iteration. Gx/Gy are the gradient-mapping residuals of the
/// penalized problem; manifold_residual and dual_residual measure
/// stationarity of the original constrained problem at the projected point.
struct TraceRow {
  long t = 0;
  double Gx = 0, Gy = 0;
  double c_norm = 0;
  double dist_M = 0;
  double primal_gap = 0;
  double rel_grad = 1;     // running min of (Gx^2+Gy^2)/(Gx_1^2+Gy_1^2)
  double grad_pen_x = 0;   // ||grad_x of the penalized objective|| at x_t
  double manifold_residual = 0;
  double dual_residual = 0;
  double x_norm = 0;
  bool ball_active = false;
};

inline const char* trace_csv_header() {
  return "t,Gx,Gy,c_norm,dist_M,primal_gap,rel_grad,grad_pen_x,"
         "manifold_residual,dual_residual,x_norm,ball_active";
}

struct ResidualPair {
  double gx = 0, gy = 0;
  double sum_sq() const { return gx * gx + gy * gy; }
};

/// Residual assembly from already-evaluated gradients. One solver step from
/// (x_t, y_t, z_t) to (x_t1, y_t1) with primal step tau1_t, dual step tau2,
/// dual shift theta_t and smoothing weight p yields
///   Gx = (x_t - x_t1)/tau1_t + gx(x_t1,y_t1) - gx(x_t,y_t) + p (z_t - x_t)
///   Gy = (y_t1 - y_t)/tau2 + gy(x_t1,y_t1) - gy(x_t1,y_t) + theta_t y_t
/// which lie in the penalized problem's subdifferential residual sets at
/// (x_t1, y_t1) by the prox/projection optimality conditions.
inline ResidualPair penalized_residuals_from_grads(
    const Matrix& x_t, const Matrix& x_t1, const Vector& y_t, const Vector& y_t1,
    const Matrix& z_t, const Matrix& gx_t, const Matrix& gx_t1,
    const Vector& gy_t1_at_yt, const Vector& gy_t1_at_yt1, double tau1_t, double tau2,
    double theta_t, double p) {
  Matrix gx_map = (x_t - x_t1) / tau1_t + gx_t1 - gx_t + p * (z_t - x_t);
  Vector gy_map = (y_t1 - y_t) / tau2 + gy_t1_at_yt1 - gy_t1_at_yt + theta_t * y_t;
  return {gx_map.norm(), gy_map.norm()};
}

/// Residuals for a step whose gradients were not kept; evaluates the four
/// needed gradients of the penalized problem.
inline ResidualPair penalized_residuals(const PenalizedProblem& pp, const Matrix& x_t,
                                        const Matrix& x_t1, const Vector& y_t,
                                        const Vector& y_t1, const Matrix& z_t,
                                        double tau1_t, double tau2, double theta_t,
                                        double p) {
  return penalized_residuals_from_grads(
      x_t, x_t1, y_t, y_t1, z_t, pp.grad_x(x_t, y_t), pp.grad_x(x_t1, y_t1),
      pp.grad_y(x_t1, y_t), pp.grad_y(x_t1, y_t1), tau1_t, tau2, theta_t, p);
}

struct OriginalResiduals {
  double manifold_residual = 0;  // ||grad_x f(P_M(x), y)|| (Riemannian)
  double dual_residual = 0;      // prox residual of the dual at (P_M(x), y)
  double exact_dual_distance = 0;  // normal-cone distance where closed-form
  double dist_M = 0;
  bool far_from_manifold = false;  // dist(x, M) > 1/2: projection unreliable
};

/// Stationarity of the original constrained problem measured at the
/// projected point P_M(x). The dual residual is the prox-gradient surrogate
/// (1/tau)||y - prox_{tau h}(y + tau grad_y f)||; the exact subdifferential
/// distance is also reported (it coincides with a closed form for the
/// indicator regularizers and with ||grad_y f|| for smooth ones).
inline OriginalResiduals original_residuals(const PenalizedProblem& pp, const Matrix& x,
                                            const Vector& y, double tau_check) {
  require(tau_check > 0, "original_residuals: tau_check must be positive");
  const auto& kit = pp.kit();
  const auto& base = pp.base();
  OriginalResiduals out;
  Matrix xp = kit.project(x);
  out.dist_M = (x - xp).norm();
  out.far_from_manifold = out.dist_M > 0.5;
  Matrix gx = base.grad_x(xp, y);
  out.manifold_residual = kit.riemannian_grad(xp, gx).norm();
  Vector gy = base.grad_y(xp, y);
  Vector stepped = base.h.prox(tau_check, y + tau_check * gy);
  out.dual_residual = (y - stepped).norm() / tau_check;
  out.exact_dual_distance = base.h.dual_distance(y, gy);
  return out;
}

struct RelativeGradientSeries {
  std::vector<double> values;  // running min, normalized by the first entry
  bool zero_denominator = false;
};

/// min_{1<=s<=t} (Gx_s^2 + Gy_s^2) / (Gx_1^2 + Gy_1^2) as a function of t.
/// Monotone nonincreasing, starts at 1. A zero first residual (already
/// stationary) yields an all-zero series with the flag set.
inline RelativeGradientSeries relative_gradient_norm(const std::vector<ResidualPair>& g) {
  RelativeGradientSeries out;
  if (g.empty()) return out;
  double denom = g.front().sum_sq();
  if (denom <= 0.0) {
    out.zero_denominator = true;
    out.values.assign(g.size(), 0.0);
    return out;
  }
  double running = kInf;
  out.values.reserve(g.size());
  for (const auto& r : g) {
    running = std::min(running, r.sum_sq());
    out.values.push_back(running / denom);
  }
  return out;
}

/// Least-squares slope of log(value) against log(t) over t in [t_lo, t_hi].
/// Non-positive values (exact fixed points reached in floating point) are
/// skipped. Returns NaN when fewer than two usable points remain.
inline double loglog_slope(const std::vector<long>& ts, const std::vector<double>& vals,
                           long t_lo, long t_hi) {
  require(ts.size() == vals.size(), "loglog_slope: size mismatch");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i] < t_lo || ts[i] > t_hi || vals[i] <= 0.0) continue;
    double lx = std::log(static_cast<double>(ts[i]));
    double ly = std::log(vals[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++n;
  }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  double dn = static_cast<double>(n);
  return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
}

}  // namespace mmx
