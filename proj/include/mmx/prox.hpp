#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "mmx/core.hpp"

namespace mmx {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Euclidean projection onto the ball {y : ||y|| <= radius}.
inline Vector project_ball(const Vector& v, double radius) {
  double n = v.norm();
  return n <= radius ? v : Vector(v * (radius / n));
}

/// Projection onto the probability simplex via sort-and-threshold.
inline Vector project_simplex(const Vector& v) {
  const Index n = v.size();
  std::vector<double> u(v.data(), v.data() + n);
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, tau = 0.0;
  Index k = 0;
  for (Index j = 0; j < n; ++j) {
    cum += u[j];
    double t = (cum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) {
      k = j + 1;
      tau = t;
    }
  }
  (void)k;
  return (v.array() - tau).cwiseMax(0.0).matrix();
}

/// Projection onto the Frobenius-norm ball {x : ||x||_F <= radius}.
inline Matrix project_frobenius_ball(const Matrix& x, double radius) {
  double n = x.norm();
  return n <= radius ? x : Matrix(x * (radius / n));
}

/// Projection onto the spectral-norm ball via singular value clipping.
/// Costs an SVD per call; the Frobenius ball is the default elsewhere.
inline Matrix project_spectral_ball(const Matrix& x, double radius) {
  Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Vector s = svd.singularValues().cwiseMin(radius);
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

enum class RegularizerKind {
  Zero,
  BallIndicator,
  SimplexIndicator,
  QuadraticPenalty,
  SimplexPlusQuadratic,
};

/// Dual regularizer h: an indicator of a simple convex set, an optional
/// quadratic alpha*||y - center||^2, or both. prox_{tau h} is exact for every
/// kind: shrink toward the quadratic's center, then project onto the domain.
///
/// weak_convexity (zeta) is 0 for every built-in kind; the tau*zeta < 1 prox
/// gate is still enforced so nonconvex regularizers added later inherit it.
class Regularizer {
 public:
  static Regularizer zero(Index dim) { return Regularizer(RegularizerKind::Zero, dim); }

  static Regularizer ball_indicator(Index dim, double radius) {
    require(radius > 0, "Regularizer: radius must be positive");
    Regularizer h(RegularizerKind::BallIndicator, dim);
    h.radius_ = radius;
    return h;
  }

  static Regularizer simplex_indicator(Index dim) {
    return Regularizer(RegularizerKind::SimplexIndicator, dim);
  }

  static Regularizer quadratic_penalty(Index dim, double alpha, const Vector& center) {
    require(alpha >= 0, "Regularizer: alpha must be nonnegative");
    require(center.size() == dim, "Regularizer: center has wrong dimension");
    Regularizer h(RegularizerKind::QuadraticPenalty, dim);
    h.alpha_ = alpha;
    h.center_ = center;
    return h;
  }

  static Regularizer simplex_plus_quadratic(Index dim, double alpha, const Vector& center) {
    require(alpha >= 0, "Regularizer: alpha must be nonnegative");
    require(center.size() == dim, "Regularizer: center has wrong dimension");
    Regularizer h(RegularizerKind::SimplexPlusQuadratic, dim);
    h.alpha_ = alpha;
    h.center_ = center;
    return h;
  }

  RegularizerKind kind() const { return kind_; }
  Index dim() const { return dim_; }
  double weak_convexity() const { return zeta_; }
  double quadratic_alpha() const { return alpha_; }
  const Vector& quadratic_center() const { return center_; }
  double ball_radius() const { return radius_; }

  bool has_indicator() const {
    return kind_ == RegularizerKind::BallIndicator ||
           kind_ == RegularizerKind::SimplexIndicator ||
           kind_ == RegularizerKind::SimplexPlusQuadratic;
  }

  /// Diameter of dom h (+inf when the domain is all of R^d2).
  double domain_diameter() const {
    switch (kind_) {
      case RegularizerKind::BallIndicator: return 2.0 * radius_;
      case RegularizerKind::SimplexIndicator:
      case RegularizerKind::SimplexPlusQuadratic: return std::sqrt(2.0);
      default: return kInf;
    }
  }

  /// Lipschitz constant of h over its domain (finite only when the domain is
  /// bounded or h is constant); used by the penalty-parameter helper.
  double lipschitz_on_domain() const {
    if (alpha_ == 0.0) return 0.0;
    double reach = kInf;
    switch (kind_) {
      case RegularizerKind::BallIndicator:
      case RegularizerKind::SimplexIndicator:
      case RegularizerKind::SimplexPlusQuadratic:
        reach = domain_max_norm() + center_.norm();
        break;
      default:
        return kInf;
    }
    return 2.0 * alpha_ * reach;
  }

  bool in_domain(const Vector& y, double tol = 0.0) const {
    check_dim(y);
    switch (kind_) {
      case RegularizerKind::BallIndicator:
        return y.norm() <= radius_ + tol;
      case RegularizerKind::SimplexIndicator:
      case RegularizerKind::SimplexPlusQuadratic:
        return y.minCoeff() >= -tol && std::abs(y.sum() - 1.0) <= tol * y.size() + tol;
      default:
        return true;
    }
  }

  /// h(y); +inf outside the domain.
  double value(const Vector& y) const {
    check_dim(y);
    if (!in_domain(y, kDomainTol)) return kInf;
    return alpha_ > 0 ? alpha_ * (y - center_).squaredNorm() : 0.0;
  }

  /// prox_{tau h}(v) = argmin_y tau h(y) + 1/2 ||y - v||^2. Requires
  /// tau * zeta < 1 so the objective is strongly convex.
  Vector prox(double tau, const Vector& v) const {
    check_dim(v);
    require(tau > 0, "Regularizer::prox: tau must be positive");
    if (tau * zeta_ >= 1.0)
      throw std::invalid_argument("Regularizer::prox: tau * zeta >= 1");
    Vector w = v;
    if (alpha_ > 0) {
      double scale = 2.0 * tau * alpha_;
      w = (v + scale * center_) / (1.0 + scale);
    }
    switch (kind_) {
      case RegularizerKind::BallIndicator: return project_ball(w, radius_);
      case RegularizerKind::SimplexIndicator:
      case RegularizerKind::SimplexPlusQuadratic: return project_simplex(w);
      default: return w;
    }
  }

  /// Canonical initial dual point: center of the domain.
  Vector domain_center() const {
    switch (kind_) {
      case RegularizerKind::SimplexIndicator:
      case RegularizerKind::SimplexPlusQuadratic:
        return Vector::Constant(dim_, 1.0 / static_cast<double>(dim_));
      default:
        return Vector::Zero(dim_);
    }
  }

  /// Exact distance dist(0, -g + dh(y)) where dh is the subdifferential;
  /// available for the indicator-based kinds (normal-cone formulas) and for
  /// the smooth kinds. g is the partial gradient of the coupling at y.
  double dual_distance(const Vector& y, const Vector& g) const {
    check_dim(y);
    check_dim(g);
    Vector geff = g;
    if (alpha_ > 0) geff -= 2.0 * alpha_ * (y - center_);
    switch (kind_) {
      case RegularizerKind::Zero:
      case RegularizerKind::QuadraticPenalty:
        return geff.norm();
      case RegularizerKind::BallIndicator: {
        if (y.norm() < radius_ * (1.0 - kDomainTol)) return geff.norm();
        Vector yhat = y / y.norm();
        double radial = geff.dot(yhat);
        if (radial <= 0.0) return geff.norm();
        return (geff - radial * yhat).norm();
      }
      case RegularizerKind::SimplexIndicator:
      case RegularizerKind::SimplexPlusQuadratic:
        return simplex_dual_distance(y, geff);
    }
    throw std::logic_error("unreachable");
  }

  /// Same regularizer with an extra quadratic alpha*||y - center||^2 added;
  /// used by the Tikhonov-regularized solver mode.
  Regularizer with_quadratic(double alpha, const Vector& center) const {
    require(alpha >= 0, "with_quadratic: alpha must be nonnegative");
    require(center.size() == dim_, "with_quadratic: center has wrong dimension");
    Regularizer h = *this;
    if (h.alpha_ == 0.0) {
      h.alpha_ = alpha;
      h.center_ = center;
    } else {
      // alpha1||y-c1||^2 + alpha2||y-c2||^2 = (alpha1+alpha2)||y-cbar||^2 + const
      double total = h.alpha_ + alpha;
      h.center_ = (h.alpha_ * h.center_ + alpha * center) / total;
      h.alpha_ = total;
    }
    switch (kind_) {
      case RegularizerKind::Zero: h.kind_ = RegularizerKind::QuadraticPenalty; break;
      case RegularizerKind::SimplexIndicator:
        h.kind_ = RegularizerKind::SimplexPlusQuadratic;
        break;
      default: break;  // BallIndicator keeps its kind; prox handles both terms
    }
    return h;
  }

  static constexpr double kDomainTol = 1e-9;

 private:
  Regularizer(RegularizerKind kind, Index dim) : kind_(kind), dim_(dim) {
    require(dim >= 1, "Regularizer: dim must be positive");
    center_ = Vector::Zero(dim);
  }

  void check_dim(const Vector& y) const {
    if (y.size() != dim_)
      throw std::invalid_argument("Regularizer: vector has wrong dimension");
  }

  double domain_max_norm() const {
    switch (kind_) {
      case RegularizerKind::BallIndicator: return radius_;
      case RegularizerKind::SimplexIndicator:
      case RegularizerKind::SimplexPlusQuadratic: return 1.0;
      default: return kInf;
    }
  }

  // dist(0, -g + N(y)) for the simplex normal cone
  //   N(y) = {v : v_i = s on the support, v_i <= s off it, s free}.
  // The squared distance as a function of s is convex piecewise quadratic;
  // its derivative is piecewise linear and increasing, so the minimizer is
  // found by scanning the breakpoints (the off-support g_i) in order.
  double simplex_dual_distance(const Vector& y, const Vector& g) const {
    std::vector<Index> support, inactive;
    for (Index i = 0; i < dim_; ++i)
      (y(i) > kDomainTol ? support : inactive).push_back(i);
    if (support.empty()) support.push_back(0);

    auto dist_sq = [&](double s) {
      double d = 0.0;
      for (Index i : support) d += (s - g(i)) * (s - g(i));
      for (Index i : inactive) {
        double excess = s - g(i);
        if (excess < 0.0) d += excess * excess;
      }
      return d;
    };
    // Candidate minimizers: unconstrained stationary points over each linear
    // piece plus the breakpoints themselves.
    std::vector<double> breaks;
    for (Index i : inactive) breaks.push_back(g(i));
    std::sort(breaks.begin(), breaks.end());
    double sum_support = 0.0;
    for (Index i : support) sum_support += g(i);

    double best = kInf;
    auto consider = [&](double s) { best = std::min(best, dist_sq(s)); };
    // piece below all breakpoints and between consecutive breakpoints: the
    // active set of the second sum is {i : g_i > s}.
    for (std::size_t piece = 0; piece <= breaks.size(); ++piece) {
      double lo = piece == 0 ? -kInf : breaks[piece - 1];
      double hi = piece == breaks.size() ? kInf : breaks[piece];
      double cnt = static_cast<double>(support.size());
      double tot = sum_support;
      for (std::size_t j = piece; j < breaks.size(); ++j) {
        cnt += 1.0;
        tot += breaks[j];
      }
      double s = tot / cnt;
      if (s >= lo && s <= hi) consider(s);
    }
    for (double b : breaks) consider(b);
    return std::sqrt(best);
  }

  RegularizerKind kind_;
  Index dim_;
  double radius_ = 0.0;
  double alpha_ = 0.0;
  Vector center_;
  double zeta_ = 0.0;
};

}  // namespace mmx
