#pragma once

#include <atomic>
#include <memory>
#include <stdexcept>

#include "mmx/core.hpp"

namespace mmx {

enum class ManifoldFamily { Stiefel, Oblique, GeneralizedStiefel };

inline const char* to_string(ManifoldFamily f) {
  switch (f) {
    case ManifoldFamily::Stiefel: return "stiefel";
    case ManifoldFamily::Oblique: return "oblique";
    case ManifoldFamily::GeneralizedStiefel: return "generalized-stiefel";
  }
  return "?";
}

/// Operator kit for a compact matrix submanifold M = {x : c(x) = 0}.
///
/// Three families are supported:
///   Stiefel             c(x) = x'x - I,  A(x) = x(3/2 I - 1/2 x'x)
///   Oblique             c(x) = diag(x'x) - 1 (per-column unit norm),
///                       A(x) = 2x(I + Diag(x'x))^-1
///   GeneralizedStiefel  c(x) = x'Bx - I,  A(x) = x(3/2 I - 1/2 x'Bx)
///
/// A is the constraint dissolving map: A(x) = x on M, so the composite
/// f(A(x), y) + (rho/4)||c(x)||^2 has the same near-manifold stationary
/// points as the constrained problem while being differentiable everywhere.
///
/// The constraint codomain is an r x r symmetric matrix for Stiefel and
/// GeneralizedStiefel and a length-r vector (stored as r x 1) for Oblique.
/// Kits are immutable after construction; all operations are pure and safe
/// to call concurrently.
class ManifoldKit {
 public:
  static ManifoldKit stiefel(Index d1, Index r) {
    return ManifoldKit(ManifoldFamily::Stiefel, d1, r, Matrix());
  }

  static ManifoldKit oblique(Index d1, Index r) {
    return ManifoldKit(ManifoldFamily::Oblique, d1, r, Matrix());
  }

  /// metric must be symmetric positive definite; its square root and inverse
  /// square root are precomputed here via a symmetric eigendecomposition.
  static ManifoldKit generalized_stiefel(Index d1, Index r, const Matrix& metric) {
    return ManifoldKit(ManifoldFamily::GeneralizedStiefel, d1, r, metric);
  }

  ManifoldFamily family() const { return family_; }
  Index rows() const { return d1_; }
  Index cols() const { return r_; }
  const Matrix& metric() const { return B_; }
  const Matrix& metric_sqrt() const { return B_sqrt_; }
  const Matrix& metric_inv_sqrt() const { return B_inv_sqrt_; }

  /// sup_{x in M} ||x||_F, used when validating the ball radius C.
  double max_frobenius_on_manifold() const {
    double root_r = std::sqrt(static_cast<double>(r_));
    if (family_ == ManifoldFamily::GeneralizedStiefel)
      return inv_sqrt_spectral_norm_ * root_r;
    return root_r;
  }

  /// Constraint residual c(x). Its Frobenius/Euclidean norm is the
  /// constraint-violation metric.
  Matrix constraint(const Matrix& x) const {
    check_point(x);
    switch (family_) {
      case ManifoldFamily::Stiefel:
        return x.transpose() * x - Matrix::Identity(r_, r_);
      case ManifoldFamily::Oblique: {
        Matrix c(r_, 1);
        for (Index j = 0; j < r_; ++j) c(j, 0) = x.col(j).squaredNorm() - 1.0;
        return c;
      }
      case ManifoldFamily::GeneralizedStiefel:
        return x.transpose() * B_ * x - Matrix::Identity(r_, r_);
    }
    throw std::logic_error("unreachable");
  }

  double constraint_violation(const Matrix& x) const { return constraint(x).norm(); }

  /// Constraint dissolving map A(x); fixed point of M: c(x)=0 implies A(x)=x.
  Matrix dissolve(const Matrix& x) const {
    check_point(x);
    switch (family_) {
      case ManifoldFamily::Stiefel:
        return x * (1.5 * Matrix::Identity(r_, r_) - 0.5 * (x.transpose() * x));
      case ManifoldFamily::Oblique: {
        Matrix a(d1_, r_);
        for (Index j = 0; j < r_; ++j)
          a.col(j) = 2.0 * x.col(j) / (1.0 + x.col(j).squaredNorm());
        return a;
      }
      case ManifoldFamily::GeneralizedStiefel:
        return x * (1.5 * Matrix::Identity(r_, r_) - 0.5 * (x.transpose() * B_ * x));
    }
    throw std::logic_error("unreachable");
  }

  /// Jacobian-transpose product of A at x: J_A(x)' u.
  Matrix dissolve_jtp(const Matrix& x, const Matrix& u) const {
    check_point(x);
    check_point(u);
    switch (family_) {
      case ManifoldFamily::Stiefel:
        return u * (1.5 * Matrix::Identity(r_, r_) - 0.5 * (x.transpose() * x)) -
               x * sym(x.transpose() * u);
      case ManifoldFamily::Oblique: {
        // Columns are independent: A_j(x_j) = 2 x_j / (1 + |x_j|^2), whose
        // (symmetric) Jacobian applied to u_j is
        //   2 u_j / (1+s) - 4 <x_j,u_j> x_j / (1+s)^2,  s = |x_j|^2.
        Matrix out(d1_, r_);
        for (Index j = 0; j < r_; ++j) {
          double s = x.col(j).squaredNorm();
          double denom = 1.0 + s;
          out.col(j) = 2.0 * u.col(j) / denom -
                       4.0 * x.col(j).dot(u.col(j)) * x.col(j) / (denom * denom);
        }
        return out;
      }
      case ManifoldFamily::GeneralizedStiefel:
        return u * (1.5 * Matrix::Identity(r_, r_) - 0.5 * (x.transpose() * B_ * x)) -
               B_ * x * sym(x.transpose() * u);
    }
    throw std::logic_error("unreachable");
  }

  /// Jacobian-transpose product of c at x: J_c(x)' v. For Stiefel and
  /// GeneralizedStiefel, v is an r x r matrix and is symmetrized internally;
  /// for Oblique, v is a length-r vector (r x 1).
  Matrix constraint_jtp(const Matrix& x, const Matrix& v) const {
    check_point(x);
    switch (family_) {
      case ManifoldFamily::Stiefel:
        check_codomain(v);
        return 2.0 * x * sym(v);
      case ManifoldFamily::Oblique: {
        check_codomain(v);
        Matrix out(d1_, r_);
        for (Index j = 0; j < r_; ++j) out.col(j) = 2.0 * v(j, 0) * x.col(j);
        return out;
      }
      case ManifoldFamily::GeneralizedStiefel:
        check_codomain(v);
        return 2.0 * B_ * x * sym(v);
    }
    throw std::logic_error("unreachable");
  }

  /// Nearest manifold point in Frobenius norm. Well-defined for
  /// dist(x, M) < 1; throws on rank-deficient input.
  Matrix project(const Matrix& x) const {
    check_point(x);
    ++*projection_count_;
    switch (family_) {
      case ManifoldFamily::Stiefel: {
        Eigen::JacobiSVD<Matrix> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.singularValues().minCoeff() <= kDegenerateTol)
          throw std::domain_error("ManifoldKit::project: rank-deficient input");
        return svd.matrixU() * svd.matrixV().transpose();
      }
      case ManifoldFamily::Oblique: {
        Matrix p(d1_, r_);
        for (Index j = 0; j < r_; ++j) {
          double nj = x.col(j).norm();
          if (nj <= kDegenerateTol)
            throw std::domain_error("ManifoldKit::project: zero column");
          p.col(j) = x.col(j) / nj;
        }
        return p;
      }
      case ManifoldFamily::GeneralizedStiefel: {
        Eigen::JacobiSVD<Matrix> svd(B_sqrt_ * x,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.singularValues().minCoeff() <= kDegenerateTol)
          throw std::domain_error("ManifoldKit::project: rank-deficient input");
        return B_inv_sqrt_ * svd.matrixU() * svd.matrixV().transpose();
      }
    }
    throw std::logic_error("unreachable");
  }

  /// Orthogonal projection of the Euclidean partial gradient g onto the
  /// tangent space at xbar (a point on M). The result q satisfies
  /// <q, n> = 0 for every normal direction n in range(J_c(xbar)').
  Matrix riemannian_grad(const Matrix& xbar, const Matrix& g) const {
    check_point(xbar);
    check_point(g);
    if (constraint_violation(xbar) > kOnManifoldTol)
      throw std::domain_error("ManifoldKit::riemannian_grad: point off manifold");
    switch (family_) {
      case ManifoldFamily::Stiefel:
        return g - xbar * sym(xbar.transpose() * g);
      case ManifoldFamily::Oblique: {
        Matrix out(d1_, r_);
        for (Index j = 0; j < r_; ++j)
          out.col(j) = g.col(j) - xbar.col(j).dot(g.col(j)) * xbar.col(j);
        return out;
      }
      case ManifoldFamily::GeneralizedStiefel: {
        // q = g - B xbar S with S symmetric solving W S + S W = 2 sym(xbar'Bg),
        // W = xbar'B^2 xbar; this is the Euclidean-orthogonal projection onto
        // {u : sym(xbar'Bu) = 0}.
        Matrix bx = B_ * xbar;
        Matrix w = bx.transpose() * bx;
        Matrix e = sym(bx.transpose() * g);
        Eigen::SelfAdjointEigenSolver<Matrix> es(w);
        const Vector& d = es.eigenvalues();
        const Matrix& u = es.eigenvectors();
        Matrix ehat = u.transpose() * e * u;
        Matrix shat(r_, r_);
        for (Index i = 0; i < r_; ++i)
          for (Index j = 0; j < r_; ++j) shat(i, j) = 2.0 * ehat(i, j) / (d(i) + d(j));
        return g - bx * (u * shat * u.transpose());
      }
    }
    throw std::logic_error("unreachable");
  }

  double dist_to_manifold(const Matrix& x) const { return (x - project(x)).norm(); }

  /// Uniform-ish random point on M (QR of a Gaussian draw; columns
  /// normalized for Oblique; pulled back through B^{-1/2} for
  /// GeneralizedStiefel).
  Matrix random_point(std::mt19937_64& rng) const {
    switch (family_) {
      case ManifoldFamily::Stiefel:
        return orthonormal_columns(rng, d1_, r_);
      case ManifoldFamily::Oblique: {
        Matrix g = gaussian_matrix(rng, d1_, r_);
        for (Index j = 0; j < r_; ++j) g.col(j).normalize();
        return g;
      }
      case ManifoldFamily::GeneralizedStiefel:
        return B_inv_sqrt_ * orthonormal_columns(rng, d1_, r_);
    }
    throw std::logic_error("unreachable");
  }

  /// Number of SVD-based projections performed through this kit (shared
  /// across copies). The solver's update path must leave this unchanged.
  long projection_count() const { return projection_count_->load(); }

  static constexpr double kOnManifoldTol = 1e-8;
  static constexpr double kDegenerateTol = 1e-14;

 private:
  ManifoldKit(ManifoldFamily family, Index d1, Index r, const Matrix& metric)
      : family_(family),
        d1_(d1),
        r_(r),
        projection_count_(std::make_shared<std::atomic<long>>(0)) {
    require(d1 >= 1 && r >= 1 && r <= d1, "ManifoldKit: need 1 <= r <= d1");
    if (family == ManifoldFamily::GeneralizedStiefel) {
      require(metric.rows() == d1 && metric.cols() == d1,
              "ManifoldKit: metric must be d1 x d1");
      if ((metric - metric.transpose()).norm() > 1e-10 * (1.0 + metric.norm()))
        throw std::invalid_argument("ManifoldKit: metric must be symmetric");
      Eigen::SelfAdjointEigenSolver<Matrix> es(sym(metric));
      const Vector& ev = es.eigenvalues();
      double lmax = ev.maxCoeff();
      if (lmax <= 0 || ev.minCoeff() < 1e-12 * lmax)
        throw std::invalid_argument("ManifoldKit: metric must be positive definite");
      B_ = sym(metric);
      B_sqrt_ = es.eigenvectors() * ev.cwiseSqrt().asDiagonal() *
                es.eigenvectors().transpose();
      B_inv_sqrt_ = es.eigenvectors() * ev.cwiseSqrt().cwiseInverse().asDiagonal() *
                    es.eigenvectors().transpose();
      inv_sqrt_spectral_norm_ = 1.0 / std::sqrt(ev.minCoeff());
    }
  }

  void check_point(const Matrix& x) const {
    if (x.rows() != d1_ || x.cols() != r_)
      throw std::invalid_argument("ManifoldKit: point has wrong dimensions");
  }

  void check_codomain(const Matrix& v) const {
    if (family_ == ManifoldFamily::Oblique) {
      if (v.rows() != r_ || v.cols() != 1)
        throw std::invalid_argument("ManifoldKit: expected an r x 1 constraint value");
    } else if (v.rows() != r_ || v.cols() != r_) {
      throw std::invalid_argument("ManifoldKit: expected an r x r constraint value");
    }
  }

  ManifoldFamily family_;
  Index d1_, r_;
  Matrix B_, B_sqrt_, B_inv_sqrt_;
  double inv_sqrt_spectral_norm_ = 1.0;
  std::shared_ptr<std::atomic<long>> projection_count_;
};

}  // namespace mmx
