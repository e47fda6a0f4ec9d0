#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <cstdio>
#include <random>
#include <stdexcept>
#include <string>

namespace mmx {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Symmetric part of a square matrix.
inline Matrix sym(const Matrix& a) { return 0.5 * (a + a.transpose()); }

inline double spectral_norm(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues().maxCoeff();
}

/// splitmix64 mixer; used to derive independent RNG streams from one seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Matrix gaussian_matrix(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) g(i, j) = normal(rng);
  return g;
}

/// Orthonormal d x r matrix: Q factor of a Gaussian draw, with the sign of
/// each column fixed so the R factor has a positive diagonal.
inline Matrix orthonormal_columns(std::mt19937_64& rng, Index d, Index r) {
  if (r > d) throw std::invalid_argument("orthonormal_columns: need r <= d");
  Matrix g = gaussian_matrix(rng, d, r);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(d, r);
  Matrix rfac = q.transpose() * g;
  for (Index j = 0; j < r; ++j)
    if (rfac(j, j) < 0) q.col(j) = -q.col(j);
  return q;
}

/// Shortest text form that round-trips a double exactly.
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }
inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace mmx
