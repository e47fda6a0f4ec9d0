#pragma once

#include <cmath>
#include <fstream>
#include <functional>
#include <string>

#include "json.hpp"

#include "mmx/core.hpp"
#include "mmx/prox.hpp"

namespace mmx {

using json = nlohmann::json;

struct LipschitzConstants {
  double xx = 0, xy = 0, yx = 0, yy = 0;
  bool estimated = false;  // true when obtained by sampling, not analysis
  double max() const { return std::max(std::max(xx, xy), std::max(yx, yy)); }
};

enum class ConcavityMode { PL, StronglyConcave, MerelyConcave };

/// A smooth coupling f with partial gradients plus the dual regularizer h.
/// Closures must be pure; instances are safe to evaluate concurrently.
struct MinimaxProblem {
  Index d1 = 0, r = 0, d2 = 0;
  std::function<double(const Matrix&, const Vector&)> eval_f;
  std::function<Matrix(const Matrix&, const Vector&)> grad_x;
  std::function<Vector(const Matrix&, const Vector&)> grad_y;
  Regularizer h = Regularizer::zero(1);
  LipschitzConstants lipschitz;
  double mu = 0.0;  // 0 in MerelyConcave mode
  ConcavityMode mode = ConcavityMode::MerelyConcave;
  /// Bound on the dual iterates' norm; equals the domain radius for
  /// indicator regularizers and a problem-specific estimate otherwise.
  double dual_radius = 1.0;
  std::function<double(const Matrix&)> primal_value;  // F(x), when known
  double F_star = std::numeric_limits<double>::quiet_NaN();
  bool has_F_star = false;
};

/// Quadratic benchmark instance: f(x,y) = 1/2 x'Qx + x'Ay (- mu_y/2 ||y||^2),
/// with x on the sphere in R^m (r = 1) and either a unit-ball dual (mu_y = 0)
/// or an unconstrained strongly concave dual (mu_y > 0).
struct QuadraticInstance {
  Index m = 0, n = 0;
  double L_target = 0.0;
  double mu_y = 0.0;  // 0: merely-concave variant, > 0: strongly concave
  std::uint64_t seed = 0;
  Matrix Q;  // m x m symmetric, ||Q||_2 = L_target
  Matrix A;  // m x n, ||A||_2 = 1
  double F_star = 0.0;
};

namespace detail {

inline Vector uniform_pm1(std::mt19937_64& rng, Index n) {
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = unif(rng);
  return v;
}

inline Vector nonzero_uniform_pm1(std::mt19937_64& rng, Index n) {
  for (;;) {
    Vector v = uniform_pm1(rng, n);
    if (v.cwiseAbs().maxCoeff() > 1e-12) return v;
  }
}

inline Matrix symmetric_sqrt(const Matrix& s) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  Vector ev = es.eigenvalues().cwiseMax(0.0);  // clamp -1e-12-ish noise
  return es.eigenvectors() * ev.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// Draws an instance: V orthogonal (QR of a Gaussian), diagonal spectra
/// sampled uniformly from [-1, 1] and rescaled so ||Q||_2 = L_target and
/// ||A||_2 = 1, then F_star from the closed-form eigenvalue expression.
/// Identical seeds produce bit-identical instances. For m != n the spectrum
/// of A is zero-padded and an independent right factor is drawn.
inline QuadraticInstance generate_quadratic(Index m, Index n, double L_target,
                                            double mu_y, std::uint64_t seed) {
  require(m >= 1 && n >= 1, "generate_quadratic: need m, n >= 1");
  require(L_target > 0, "generate_quadratic: L_target must be positive");
  require(mu_y >= 0, "generate_quadratic: mu_y must be nonnegative");
  auto rng = make_rng(seed);

  Matrix v = orthonormal_columns(rng, m, m);
  Vector lam_q = detail::nonzero_uniform_pm1(rng, m);
  lam_q *= L_target / lam_q.cwiseAbs().maxCoeff();
  Index k = std::min(m, n);
  Vector lam_a = detail::nonzero_uniform_pm1(rng, k);
  lam_a /= lam_a.cwiseAbs().maxCoeff();

  QuadraticInstance inst;
  inst.m = m;
  inst.n = n;
  inst.L_target = L_target;
  inst.mu_y = mu_y;
  inst.seed = seed;
  inst.Q = v * lam_q.asDiagonal() * v.transpose();
  if (m == n) {
    inst.A = v * lam_a.asDiagonal() * v.transpose();
  } else {
    Matrix w = orthonormal_columns(rng, n, n);
    Matrix d = Matrix::Zero(m, n);
    for (Index i = 0; i < k; ++i) d(i, i) = lam_a(i);
    inst.A = v * d * w.transpose();
  }

  Eigen::SelfAdjointEigenSolver<Matrix> es;
  if (mu_y > 0) {
    es.compute(inst.Q + inst.A * inst.A.transpose() / mu_y, Eigen::EigenvaluesOnly);
    inst.F_star = 0.5 * es.eigenvalues().minCoeff();
  } else {
    es.compute(0.5 * inst.Q + detail::symmetric_sqrt(inst.A * inst.A.transpose()),
               Eigen::EigenvaluesOnly);
    inst.F_star = es.eigenvalues().minCoeff();
  }
  if (es.info() != Eigen::Success)
    throw std::runtime_error("generate_quadratic: eigensolve failed");
  return inst;
}

/// The base gradient Lipschitz constant of a quadratic instance,
/// max{||Q||_2, ||A||_2}; the experiment defaults derive step sizes from it.
inline double practical_constant(const QuadraticInstance& inst) {
  return std::max(spectral_norm(inst.Q), spectral_norm(inst.A));
}

/// Closed-form primal value F(x) = max_y f(x,y) - h(y).
inline double primal_value(const QuadraticInstance& inst, const Matrix& x) {
  require(x.rows() == inst.m && x.cols() == 1, "primal_value: x has wrong dims");
  Vector xv = x.col(0);
  double quad = 0.5 * xv.dot(inst.Q * xv);
  if (inst.mu_y > 0)
    return quad + 0.5 * (inst.A.transpose() * xv).squaredNorm() / inst.mu_y;
  return quad + (inst.A.transpose() * xv).norm();
}

inline MinimaxProblem make_problem(const QuadraticInstance& inst) {
  MinimaxProblem p;
  p.d1 = inst.m;
  p.r = 1;
  p.d2 = inst.n;
  const Matrix Q = inst.Q;
  const Matrix A = inst.A;
  const double mu_y = inst.mu_y;
  p.eval_f = [Q, A, mu_y](const Matrix& x, const Vector& y) {
    Vector xv = x.col(0);
    double val = 0.5 * xv.dot(Q * xv) + xv.dot(A * y);
    if (mu_y > 0) val -= 0.5 * mu_y * y.squaredNorm();
    return val;
  };
  p.grad_x = [Q, A](const Matrix& x, const Vector& y) {
    return Matrix(Q * x.col(0) + A * y);
  };
  p.grad_y = [A, mu_y](const Matrix& x, const Vector& y) {
    Vector g = A.transpose() * x.col(0);
    if (mu_y > 0) g -= mu_y * y;
    return g;
  };
  double norm_q = spectral_norm(inst.Q);
  double norm_a = spectral_norm(inst.A);
  p.lipschitz = {norm_q, norm_a, norm_a, mu_y, false};
  if (mu_y > 0) {
    p.h = Regularizer::zero(inst.n);
    p.mu = mu_y;
    p.mode = ConcavityMode::StronglyConcave;
    p.dual_radius = 2.0 * norm_a / mu_y;  // y*(x) = A'x / mu_y with ||x|| near 1
  } else {
    p.h = Regularizer::ball_indicator(inst.n, 1.0);
    p.mu = 0.0;
    p.mode = ConcavityMode::MerelyConcave;
    p.dual_radius = 1.0;
  }
  QuadraticInstance copy = inst;
  p.primal_value = [copy](const Matrix& x) { return primal_value(copy, x); };
  p.F_star = inst.F_star;
  p.has_F_star = true;
  return p;
}

inline json to_json(const QuadraticInstance& inst) {
  json j;
  j["kind"] = "quadratic";
  j["m"] = inst.m;
  j["n"] = inst.n;
  j["L_target"] = inst.L_target;
  j["mu_y"] = inst.mu_y;
  j["seed"] = inst.seed;
  j["F_star"] = inst.F_star;
  std::vector<double> q(inst.Q.size()), a(inst.A.size());
  for (Index i = 0; i < inst.m; ++i)
    for (Index jj = 0; jj < inst.m; ++jj) q[i * inst.m + jj] = inst.Q(i, jj);
  for (Index i = 0; i < inst.m; ++i)
    for (Index jj = 0; jj < inst.n; ++jj) a[i * inst.n + jj] = inst.A(i, jj);
  j["Q"] = q;  // row-major
  j["A"] = a;  // row-major
  return j;
}

inline QuadraticInstance instance_from_json(const json& j) {
  if (j.value("kind", "") != std::string("quadratic"))
    throw std::invalid_argument("instance_from_json: unknown kind");
  QuadraticInstance inst;
  inst.m = j.at("m").get<Index>();
  inst.n = j.at("n").get<Index>();
  inst.L_target = j.at("L_target").get<double>();
  inst.mu_y = j.at("mu_y").get<double>();
  inst.seed = j.at("seed").get<std::uint64_t>();
  inst.F_star = j.at("F_star").get<double>();
  auto q = j.at("Q").get<std::vector<double>>();
  auto a = j.at("A").get<std::vector<double>>();
  if (static_cast<Index>(q.size()) != inst.m * inst.m ||
      static_cast<Index>(a.size()) != inst.m * inst.n)
    throw std::invalid_argument("instance_from_json: matrix payload size mismatch");
  inst.Q.resize(inst.m, inst.m);
  inst.A.resize(inst.m, inst.n);
  for (Index i = 0; i < inst.m; ++i)
    for (Index jj = 0; jj < inst.m; ++jj) inst.Q(i, jj) = q[i * inst.m + jj];
  for (Index i = 0; i < inst.m; ++i)
    for (Index jj = 0; jj < inst.n; ++jj) inst.A(i, jj) = a[i * inst.n + jj];
  return inst;
}

inline void save_instance(const QuadraticInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_instance: cannot open " + path);
  out << to_json(inst).dump(2) << "\n";
}

inline QuadraticInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_instance: cannot open " + path);
  json j;
  in >> j;
  return instance_from_json(j);
}

}  // namespace mmx
