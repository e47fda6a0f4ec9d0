#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mmx/core.hpp"
#include "mmx/metrics.hpp"
#include "mmx/penalty.hpp"

namespace mmx {

enum class Regime { PLOrStronglyConcave, MerelyConcave, TikhonovRegularized, Practical };

inline const char* to_string(Regime r) {
  switch (r) {
    case Regime::PLOrStronglyConcave: return "pl";
    case Regime::MerelyConcave: return "concave";
    case Regime::TikhonovRegularized: return "tikhonov";
    case Regime::Practical: return "practical";
  }
  return "?";
}

/// All scalars and schedules of one solver run. Build via the factory
/// functions below; validate() enforces the per-regime parameter relations.
struct SolverConfig {
  Regime regime = Regime::Practical;
  double rho = 10.0;
  double C = 1000.0;
  double p = 0.0;
  double beta = 1.0;
  double tau1 = 0.0;        // constant primal step (ignored if concave_b > 0)
  double tau2 = 0.0;
  double concave_b = 0.0;   // b in tau_{1,t} = 2 / (2 tau2 l^2 (1 + b sqrt(t+1)) - l)
  double theta_coeff = 0.0; // theta_t = coeff (t+1)^{-1/4}; 0 disables the shift
  double alpha = 1.0 / 4612.0;  // admissible range (0, 1/2306)
  double eps_target = 0.0;  // > 0: Tikhonov dual regularization strength
  long T = 1000;
  double tol = 0.0;         // early stop when max(Gx, Gy) <= tol; 0 disables
  int warm_dual_iters = 0;  // ascent steps refining y0 before the main loop
  // constants the parameters were derived from; recorded for auditability
  double l_used = 0.0;
  double mu = 0.0;
  double zeta = 0.0;

  double kappa_bar() const { return mu > 0 ? std::max(1.0, l_used / mu) : 1.0; }

  double tau1_at(long t) const {
    if (concave_b <= 0.0) return tau1;
    double l = l_used;
    return 2.0 / (2.0 * tau2 * l * l * (1.0 + concave_b * std::sqrt(t + 1.0)) - l);
  }

  double theta_at(long t) const {
    return theta_coeff > 0.0 ? theta_coeff / std::pow(t + 1.0, 0.25) : 0.0;
  }
};

inline constexpr double kAlphaUpper = 1.0 / 2306.0;
inline constexpr double kConcaveBFloor = 32.0 * 400.0 / 361.0;  // 32 (20/19)^2

/// Parameters used in the quadratic experiments: tau1 = 1/(6L),
/// tau2 = tau1/3, beta = 0.9, p = 2L, rho = 10, C = 1000, with L the base
/// gradient Lipschitz constant.
inline SolverConfig practical_config(double L, double mu_hint = 0.0) {
  require(L > 0, "practical_config: L must be positive");
  SolverConfig cfg;
  cfg.regime = Regime::Practical;
  cfg.tau1 = 1.0 / (6.0 * L);
  cfg.tau2 = cfg.tau1 / 3.0;
  cfg.beta = 0.9;
  cfg.p = 2.0 * L;
  cfg.rho = 10.0;
  cfg.C = 1000.0;
  cfg.l_used = L;
  cfg.mu = mu_hint;
  return cfg;
}

/// Plain descent-ascent on the penalized problem: smoothing disabled
/// (p = 0, beta = 0), otherwise the practical parameters.
inline SolverConfig mgda_config(double L, double mu_hint = 0.0) {
  SolverConfig cfg = practical_config(L, mu_hint);
  cfg.p = 0.0;
  cfg.beta = 0.0;
  return cfg;
}

/// Parameter relations of the PL / strongly concave analysis:
/// tau1 in (0, 1/(3l)], tau2 = (1/16)(3/tau1 + zeta)^-1, p = 2l,
/// beta = alpha min{mu, l} tau2 with alpha in (0, 1/2306). Pass the
/// conservative penalized constant or the base constant as l; both modes are
/// supported and l is recorded in the config.
inline SolverConfig pl_theory_config(double l, double mu, double zeta = 0.0,
                                     double alpha = 1.0 / 4612.0) {
  require(l > 0 && mu > 0, "pl_theory_config: need l, mu > 0");
  require(alpha > 0 && alpha < kAlphaUpper, "pl_theory_config: alpha out of range");
  SolverConfig cfg;
  cfg.regime = Regime::PLOrStronglyConcave;
  cfg.tau1 = 1.0 / (3.0 * l);
  cfg.tau2 = (1.0 / 16.0) / (3.0 / cfg.tau1 + zeta);
  cfg.p = 2.0 * l;
  cfg.alpha = alpha;
  cfg.beta = alpha * std::min(mu, l) * cfg.tau2;
  cfg.l_used = l;
  cfg.mu = mu;
  cfg.zeta = zeta;
  return cfg;
}

/// Merely concave schedules: p = 0, beta = 1, tau2 <= 1/(10 l_yy),
/// theta_t = (19/20)(1/tau2)(t+1)^{-1/4},
/// tau_{1,t} = 2/(2 tau2 l^2 (1 + b sqrt(t+1)) - l),
/// b > max{2/(tau2 l) - 1, 32 (20/19)^2}. tau2 defaults to 1/(10 l), which
/// satisfies the bound since l >= l_yy.
inline SolverConfig concave_theory_config(double l, double l_yy, double b = 0.0) {
  require(l > 0, "concave_theory_config: l must be positive");
  SolverConfig cfg;
  cfg.regime = Regime::MerelyConcave;
  cfg.p = 0.0;
  cfg.beta = 1.0;
  cfg.tau2 = 1.0 / (10.0 * l);
  if (l_yy > 0) cfg.tau2 = std::min(cfg.tau2, 1.0 / (10.0 * l_yy));
  double b_floor = std::max(2.0 / (cfg.tau2 * l) - 1.0, kConcaveBFloor);
  cfg.concave_b = b > 0 ? b : 1.01 * b_floor;
  require(cfg.concave_b > b_floor, "concave_theory_config: b below its floor");
  cfg.theta_coeff = (19.0 / 20.0) / cfg.tau2;
  cfg.l_used = l;
  cfg.mu = 0.0;
  return cfg;
}

/// Adds the Tikhonov dual regularization eps/(4 D_Y) ||y - y0||^2 on top of
/// any base config; run() wraps the regularizer and the effective strong
/// concavity modulus eps/(2 D_Y) is recorded.
inline SolverConfig tikhonov_config(SolverConfig base, double eps_target, double D_Y) {
  require(eps_target > 0, "tikhonov_config: eps_target must be positive");
  require(std::isfinite(D_Y) && D_Y > 0, "tikhonov_config: need a finite dual diameter");
  base.regime = Regime::TikhonovRegularized;
  base.eps_target = eps_target;
  base.mu = eps_target / (2.0 * D_Y);
  return base;
}

/// Penalty parameter sufficient to keep ||c(x_t)|| <= 1/2 along the run:
/// rho >= 16 (F(z0) - F_lower + (lbar_y + l_h) D_Y).
inline double rho_lower_bound(double F_z0, double F_lower, double lbar_y, double l_h,
                              double D_Y) {
  return 16.0 * (F_z0 - F_lower + (lbar_y + l_h) * D_Y);
}

inline void validate(const SolverConfig& cfg, const MinimaxProblem& problem) {
  require(cfg.rho > 0, "SolverConfig: rho must be positive");
  require(cfg.C > 0, "SolverConfig: C must be positive");
  require(cfg.T >= 0, "SolverConfig: negative iteration budget");
  require(cfg.tau2 > 0, "SolverConfig: tau2 must be positive");
  require(cfg.beta >= 0 && cfg.beta <= 1, "SolverConfig: beta outside [0, 1]");
  require(cfg.p >= 0, "SolverConfig: p must be nonnegative");
  if (cfg.tau2 * problem.h.weak_convexity() >= 1.0)
    throw std::invalid_argument("SolverConfig: tau2 * zeta >= 1, prox undefined");
  if (cfg.concave_b <= 0.0)
    require(cfg.tau1 > 0, "SolverConfig: tau1 must be positive");
  switch (cfg.regime) {
    case Regime::PLOrStronglyConcave:
    case Regime::TikhonovRegularized: {
      require(cfg.l_used > 0, "SolverConfig: l_used missing");
      require(cfg.tau1 <= 1.0 / (3.0 * cfg.l_used) + 1e-15,
              "SolverConfig: tau1 must lie in (0, 1/(3l)]");
      require(cfg.alpha > 0 && cfg.alpha < kAlphaUpper,
              "SolverConfig: alpha outside (0, 1/2306)");
      break;
    }
    case Regime::MerelyConcave: {
      require(cfg.p == 0.0, "SolverConfig: merely-concave mode needs p = 0");
      require(cfg.beta == 1.0, "SolverConfig: merely-concave mode needs beta = 1");
      require(cfg.concave_b > kConcaveBFloor, "SolverConfig: b too small");
      require(cfg.tau1_at(0) > 0, "SolverConfig: primal schedule not positive");
      if (problem.lipschitz.yy > 0)
        require(cfg.tau2 <= 1.0 / (10.0 * problem.lipschitz.yy) + 1e-15,
                "SolverConfig: tau2 must be <= 1/(10 l_yy)");
      break;
    }
    case Regime::Practical:
      break;
  }
}

struct IterateState {
  Matrix x, z;
  Vector y;
  long t = 0;
};

/// One iteration of the smoothed penalized descent-ascent update:
///   g_t    = grad_x of the penalized objective at (x_t, y_t)   [given]
///   x_next = P_ball(x_t - tau1_t (g_t + p (x_t - z_t)), C)
///   y_next = prox_{tau2 h}(y_t + tau2 (grad_y(x_next, y_t) - theta_t y_t))
///   z_next = z_t + beta (x_next - z_t)
/// Exactly one grad_x and one grad_y evaluation; the grad_y value is
/// returned so residual assembly can reuse it. No projection onto the
/// manifold occurs here.
struct StepResult {
  IterateState state;
  Vector gy_step;       // grad_y at (x_next, y_t)
  bool ball_was_active = false;
};

inline StepResult smgda_step(const PenalizedProblem& pp, const SolverConfig& cfg,
                             const IterateState& s, const Matrix& gx_t) {
  double tau1 = cfg.tau1_at(s.t);
  double theta = cfg.theta_at(s.t);
  Matrix raw = s.x - tau1 * (gx_t + cfg.p * (s.x - s.z));
  StepResult out;
  out.ball_was_active = raw.norm() > cfg.C;
  out.state.x = project_frobenius_ball(raw, cfg.C);
  out.gy_step = pp.grad_y(out.state.x, s.y);
  out.state.y = pp.base().h.prox(cfg.tau2, s.y + cfg.tau2 * (out.gy_step - theta * s.y));
  out.state.z = s.z + cfg.beta * (out.state.x - s.z);
  out.state.t = s.t + 1;
  return out;
}

/// Convenience overload evaluating the primal gradient itself.
inline StepResult smgda_step(const PenalizedProblem& pp, const SolverConfig& cfg,
                             const IterateState& s) {
  return smgda_step(pp, cfg, s, pp.grad_x(s.x, s.y));
}

enum class RunStatus { Completed, EarlyStopped, NonFinite };

struct RunStats {
  RunStatus status = RunStatus::Completed;
  long iters_run = 0;
  long ball_active_count = 0;
  long nonfinite_t = -1;
  double G1_sq = 0.0;         // first-iterate residual, the rel-grad denominator
  bool zero_first_residual = false;
  double final_rel_grad = 1.0;
  double kappa_bar = 1.0;
  double l_used = 0.0;
  // running min of Gx^2 + kappa_bar Gy^2 per iteration, for rate fits
  std::vector<long> rate_t;
  std::vector<double> rate_running_min;
};

struct RunResult {
  IterateState final_state;
  std::vector<TraceRow> trace;
  RunStats stats;
};

using TraceCallback = std::function<void(const TraceRow&)>;

/// Warm-start ascent on y at fixed x0: prox-gradient steps on the dual of
/// the penalized objective. Monotone for steps <= 1/l_yy.
inline Vector warm_dual_start(const PenalizedProblem& pp, const Matrix& x0, Vector y,
                              int iters) {
  double lyy = pp.base().lipschitz.yy;
  double tau = lyy > 0 ? 1.0 / lyy : 1.0;
  for (int k = 0; k < iters; ++k)
    y = pp.base().h.prox(tau, y + tau * pp.grad_y(x0, y));
  return y;
}

/// Runs T iterations from (x0, y0, z0 = x0), recording metrics every
/// record_every iterations (plus t = 1 and the final iterate). Cheap
/// residuals are tracked every iteration; the projection-based metrics are
/// computed only at recorded rows. Early-stops when max(Gx, Gy) <= tol.
inline RunResult run(const PenalizedProblem& pp, const SolverConfig& cfg,
                     const Matrix& x0, const Vector& y0, long record_every = 1,
                     const TraceCallback* callback = nullptr) {
  validate(cfg, pp.base());
  require(record_every >= 1, "run: record_every must be >= 1");
  require(x0.norm() <= cfg.C + 1e-12, "run: x0 outside the ball");

  const PenalizedProblem* active = &pp;
  std::optional<PenalizedProblem> wrapped;
  if (cfg.eps_target > 0) {
    double D = pp.base().h.domain_diameter();
    require(std::isfinite(D), "run: Tikhonov mode needs a bounded dual domain");
    wrapped.emplace(pp.with_regularizer(
        pp.base().h.with_quadratic(cfg.eps_target / (4.0 * D), y0)));
    active = &*wrapped;
  }

  RunResult out;
  out.stats.kappa_bar = cfg.kappa_bar();
  out.stats.l_used = cfg.l_used;

  IterateState s;
  s.x = x0;
  s.z = x0;
  s.y = cfg.warm_dual_iters > 0 ? warm_dual_start(*active, x0, y0, cfg.warm_dual_iters)
                                : y0;
  s.t = 0;

  if (cfg.T == 0) {
    out.final_state = s;
    return out;
  }

  const double kb = out.stats.kappa_bar;
  Matrix gx_cur = active->grad_x(s.x, s.y);
  double rel_min_sq = kInf;
  double rate_min = kInf;
  bool stop = false;

  for (long t = 0; t < cfg.T && !stop; ++t) {
    double tau1 = cfg.tau1_at(t);
    double theta = cfg.theta_at(t);
    StepResult step = smgda_step(*active, cfg, s, gx_cur);
    out.stats.ball_active_count += step.ball_was_active ? 1 : 0;

    if (!all_finite(step.state.x) || !all_finite(step.state.y)) {
      out.stats.status = RunStatus::NonFinite;
      out.stats.nonfinite_t = t + 1;
      break;
    }

    Matrix gx_next = active->grad_x(step.state.x, step.state.y);
    Vector gy_next = active->grad_y(step.state.x, step.state.y);
    ResidualPair g = penalized_residuals_from_grads(
        s.x, step.state.x, s.y, step.state.y, s.z, gx_cur, gx_next, step.gy_step,
        gy_next, tau1, cfg.tau2, theta, cfg.p);

    long tn = t + 1;
    if (tn == 1) {
      out.stats.G1_sq = g.sum_sq();
      out.stats.zero_first_residual = out.stats.G1_sq <= 0.0;
    }
    rel_min_sq = std::min(rel_min_sq, g.sum_sq());
    rate_min = std::min(rate_min, g.gx * g.gx + kb * g.gy * g.gy);
    out.stats.rate_t.push_back(tn);
    out.stats.rate_running_min.push_back(rate_min);

    bool early = cfg.tol > 0 && std::max(g.gx, g.gy) <= cfg.tol;
    bool record = tn == 1 || tn == cfg.T || tn % record_every == 0 || early;
    double rel = out.stats.zero_first_residual ? 0.0 : rel_min_sq / out.stats.G1_sq;

    if (record) {
      TraceRow row;
      row.t = tn;
      row.Gx = g.gx;
      row.Gy = g.gy;
      row.rel_grad = rel;
      row.grad_pen_x = gx_next.norm();
      row.c_norm = active->kit().constraint_violation(step.state.x);
      row.x_norm = step.state.x.norm();
      row.ball_active = step.ball_was_active;
      OriginalResiduals orig =
          original_residuals(pp, step.state.x, step.state.y, cfg.tau2);
      row.dist_M = orig.dist_M;
      row.manifold_residual = orig.manifold_residual;
      row.dual_residual = orig.dual_residual;
      const auto& base = pp.base();
      if (base.has_F_star && base.primal_value) {
        Matrix xp = pp.kit().project(step.state.x);
        row.primal_gap = base.primal_value(xp) - base.F_star;
      } else {
        row.primal_gap = std::numeric_limits<double>::quiet_NaN();
      }
      out.trace.push_back(row);
      if (callback) (*callback)(row);
    }

    out.stats.final_rel_grad = rel;
    s = step.state;
    gx_cur = gx_next;
    out.stats.iters_run = tn;
    if (early) {
      out.stats.status = RunStatus::EarlyStopped;
      stop = true;
    }
  }

  out.final_state = s;
  return out;
}

/// Retraction-based descent-ascent baseline: a Riemannian gradient step in x
/// followed by a nearest-point projection, then a dual prox-ascent step.
/// Iterates stay on the manifold to projection accuracy.
inline IterateState rgda_step(const MinimaxProblem& problem, const ManifoldKit& kit,
                              double tau1, double tau2, const IterateState& s) {
  IterateState next;
  Matrix g = kit.riemannian_grad(s.x, problem.grad_x(s.x, s.y));
  next.x = kit.project(s.x - tau1 * g);
  next.y = problem.h.prox(tau2, s.y + tau2 * problem.grad_y(next.x, s.y));
  next.z = next.x;
  next.t = s.t + 1;
  return next;
}

/// RGDA baseline run with the trace schema of run(). Gx/Gy carry the
/// original-problem residuals (Riemannian gradient norm and dual prox
/// residual), which are the natural stationarity measures for a feasible
/// method.
inline RunResult run_rgda(const MinimaxProblem& problem, const ManifoldKit& kit,
                          double tau1, double tau2, const Matrix& x0, const Vector& y0,
                          long T, long record_every = 1,
                          const TraceCallback* callback = nullptr) {
  require(tau1 > 0 && tau2 > 0, "run_rgda: steps must be positive");
  RunResult out;
  IterateState s;
  s.x = x0;
  s.z = x0;
  s.y = y0;
  s.t = 0;
  double rel_min = kInf;
  for (long t = 0; t < T; ++t) {
    s = rgda_step(problem, kit, tau1, tau2, s);
    if (!all_finite(s.x) || !all_finite(s.y)) {
      out.stats.status = RunStatus::NonFinite;
      out.stats.nonfinite_t = t + 1;
      break;
    }
    Matrix gx = problem.grad_x(s.x, s.y);
    Vector gy = problem.grad_y(s.x, s.y);
    double rx = kit.riemannian_grad(s.x, gx).norm();
    Vector stepped = problem.h.prox(tau2, s.y + tau2 * gy);
    double ry = (s.y - stepped).norm() / tau2;
    double sq = rx * rx + ry * ry;
    long tn = t + 1;
    if (tn == 1) {
      out.stats.G1_sq = sq;
      out.stats.zero_first_residual = sq <= 0.0;
    }
    rel_min = std::min(rel_min, sq);
    out.stats.rate_t.push_back(tn);
    out.stats.rate_running_min.push_back(rel_min);
    double rel = out.stats.zero_first_residual ? 0.0 : rel_min / out.stats.G1_sq;
    out.stats.final_rel_grad = rel;
    if (tn == 1 || tn == T || tn % record_every == 0) {
      TraceRow row;
      row.t = tn;
      row.Gx = rx;
      row.Gy = ry;
      row.rel_grad = rel;
      row.grad_pen_x = gx.norm();
      row.c_norm = kit.constraint_violation(s.x);
      row.dist_M = kit.dist_to_manifold(s.x);
      row.x_norm = s.x.norm();
      row.manifold_residual = rx;
      row.dual_residual = ry;
      if (problem.has_F_star && problem.primal_value)
        row.primal_gap = problem.primal_value(kit.project(s.x)) - problem.F_star;
      else
        row.primal_gap = std::numeric_limits<double>::quiet_NaN();
      out.trace.push_back(row);
      if (callback) (*callback)(row);
    }
    out.stats.iters_run = tn;
  }
  out.final_state = s;
  return out;
}

}  // namespace mmx
