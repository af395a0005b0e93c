#include "alecton/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace alecton {

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw DimensionError("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm_sq(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

double norm(const Vector& v) { return std::sqrt(norm_sq(v)); }

TallMatrix::TallMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
  if (rows == 0 || cols == 0) throw DimensionError("TallMatrix: empty shape");
}

Vector TallMatrix::col(std::size_t j) const {
  Vector v(rows_);
  for (std::size_t i = 0; i < rows_; ++i) v[i] = (*this)(i, j);
  return v;
}

void TallMatrix::set_col(std::size_t j, const Vector& v) {
  if (v.size() != rows_) throw DimensionError("set_col: length mismatch");
  for (std::size_t i = 0; i < rows_; ++i) (*this)(i, j) = v[i];
}

SmallSymmetric::SmallSymmetric(std::size_t p) : p_(p), data_(p * p, 0.0) {
  if (p == 0 || p > kMaxSize)
    throw DimensionError("SmallSymmetric: size must be in [1, 64]");
}

SmallSymmetric SmallSymmetric::from_dense(const TallMatrix& m) {
  if (m.rows() != m.cols())
    throw DimensionError("SmallSymmetric::from_dense: matrix not square");
  SmallSymmetric s(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      s(i, j) = 0.5 * (m(i, j) + m(j, i));
  return s;
}

TallMatrix random_orthonormal(std::size_t n, std::size_t p, Rng& rng) {
  if (p > n) throw DimensionError("random_orthonormal: p > n");
  TallMatrix y(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) y(i, j) = rng.gaussian();

  // Modified Gram-Schmidt, two passes for orthogonality near machine eps.
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t j = 0; j < p; ++j) {
      for (std::size_t k = 0; k < j; ++k) {
        double proj = 0.0;
        for (std::size_t i = 0; i < n; ++i) proj += y(i, k) * y(i, j);
        for (std::size_t i = 0; i < n; ++i) y(i, j) -= proj * y(i, k);
      }
      double nrm = 0.0;
      for (std::size_t i = 0; i < n; ++i) nrm += y(i, j) * y(i, j);
      nrm = std::sqrt(nrm);
      if (nrm < 1e-150)
        throw NumericError("random_orthonormal: degenerate column");
      for (std::size_t i = 0; i < n; ++i) y(i, j) /= nrm;
    }
  }
  return y;
}

SmallSymmetric gram(const TallMatrix& y) {
  SmallSymmetric g(y.cols());
  for (std::size_t a = 0; a < y.cols(); ++a)
    for (std::size_t b = a; b < y.cols(); ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < y.rows(); ++i) s += y(i, a) * y(i, b);
      g(a, b) = s;
      g(b, a) = s;
    }
  return g;
}

TallMatrix transpose_times(const TallMatrix& a, const TallMatrix& b) {
  if (a.rows() != b.rows())
    throw DimensionError("transpose_times: row count mismatch");
  TallMatrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t r = 0; r < a.cols(); ++r) {
      double av = a(i, r);
      if (av == 0.0) continue;
      for (std::size_t s = 0; s < b.cols(); ++s) c(r, s) += av * b(i, s);
    }
  return c;
}

TallMatrix times_small(const TallMatrix& y, const SmallSymmetric& s) {
  if (y.cols() != s.size())
    throw DimensionError("times_small: inner dimension mismatch");
  TallMatrix out(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t b = 0; b < y.cols(); ++b) {
      double acc = 0.0;
      for (std::size_t a = 0; a < y.cols(); ++a) acc += y(i, a) * s(a, b);
      out(i, b) = acc;
    }
  return out;
}

namespace {

double offdiag_norm(const SmallSymmetric& s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = i + 1; j < s.size(); ++j) acc += 2.0 * s(i, j) * s(i, j);
  return std::sqrt(acc);
}

double frob_norm(const SmallSymmetric& s) {
  double acc = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) acc += s(i, j) * s(i, j);
  return std::sqrt(acc);
}

}  // namespace

SymmetricEigen eigen_symmetric(const SmallSymmetric& s) {
  const std::size_t p = s.size();
  SmallSymmetric a = s;
  TallMatrix v(p, p);
  for (std::size_t i = 0; i < p; ++i) v(i, i) = 1.0;

  const double scale = frob_norm(a);
  const double tol = 1e-12 * (scale > 0.0 ? scale : 1.0);
  bool converged = offdiag_norm(a) <= tol;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    for (std::size_t i = 0; i + 1 < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j) {
        double apq = a(i, j);
        if (apq == 0.0) continue;
        double app = a(i, i), aqq = a(j, j);
        double theta = 0.5 * (aqq - app) / apq;
        double t = (theta >= 0.0 ? 1.0 : -1.0) /
                   (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double sn = t * c;
        for (std::size_t k = 0; k < p; ++k) {
          double aki = a(k, i), akj = a(k, j);
          a(k, i) = c * aki - sn * akj;
          a(k, j) = sn * aki + c * akj;
        }
        for (std::size_t k = 0; k < p; ++k) {
          double aik = a(i, k), ajk = a(j, k);
          a(i, k) = c * aik - sn * ajk;
          a(j, k) = sn * aik + c * ajk;
        }
        for (std::size_t k = 0; k < p; ++k) {
          double vki = v(k, i), vkj = v(k, j);
          v(k, i) = c * vki - sn * vkj;
          v(k, j) = sn * vki + c * vkj;
        }
      }
    converged = offdiag_norm(a) <= tol;
  }
  if (!converged)
    throw NumericError("eigen_symmetric: Jacobi did not converge in 100 sweeps");

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });

  SymmetricEigen out;
  out.values.resize(p);
  out.vectors = TallMatrix(p, p);
  for (std::size_t j = 0; j < p; ++j) {
    out.values[j] = a(order[j], order[j]);
    for (std::size_t i = 0; i < p; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

std::vector<double> small_eigs(const SmallSymmetric& s) {
  return eigen_symmetric(s).values;
}

SmallSymmetric inv_sqrt_psd(const SmallSymmetric& s) {
  SymmetricEigen eig = eigen_symmetric(s);
  double max_eig = eig.values.front();
  double min_eig = eig.values.back();
  if (min_eig <= 1e-12 * max_eig || max_eig <= 0.0)
    throw RankDeficiencyError(
        "inv_sqrt_psd: eigenvalue " + std::to_string(min_eig) +
        " is not safely positive (max " + std::to_string(max_eig) + ")");
  const std::size_t p = s.size();
  SmallSymmetric out(p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < p; ++k)
        acc += eig.vectors(i, k) * eig.vectors(j, k) / std::sqrt(eig.values[k]);
      out(i, j) = acc;
      out(j, i) = acc;
    }
  return out;
}

SmallSymmetric sqrt_psd_clipped(const SmallSymmetric& s, int* clipped) {
  SymmetricEigen eig = eigen_symmetric(s);
  int count = 0;
  for (double& lambda : eig.values) {
    if (lambda < 0.0) {
      lambda = 0.0;
      ++count;
    }
  }
  if (clipped) *clipped = count;
  const std::size_t p = s.size();
  SmallSymmetric out(p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = i; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < p; ++k)
        acc += eig.vectors(i, k) * eig.vectors(j, k) * std::sqrt(eig.values[k]);
      out(i, j) = acc;
      out(j, i) = acc;
    }
  return out;
}

double det_small(const SmallSymmetric& s) {
  const std::size_t p = s.size();
  std::vector<double> a(p * p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) a[i * p + j] = s(i, j);

  double det = 1.0;
  for (std::size_t k = 0; k < p; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < p; ++i)
      if (std::abs(a[i * p + k]) > std::abs(a[piv * p + k])) piv = i;
    if (a[piv * p + k] == 0.0) return 0.0;
    if (piv != k) {
      for (std::size_t j = 0; j < p; ++j) std::swap(a[k * p + j], a[piv * p + j]);
      det = -det;
    }
    det *= a[k * p + k];
    for (std::size_t i = k + 1; i < p; ++i) {
      double f = a[i * p + k] / a[k * p + k];
      if (f == 0.0) continue;
      for (std::size_t j = k; j < p; ++j) a[i * p + j] -= f * a[k * p + j];
    }
  }
  return det;
}

void apply_outer(TallMatrix& y, double scale, const Vector& u, const Vector& v) {
  if (u.size() != y.rows() || v.size() != y.rows())
    throw DimensionError("apply_outer: vector length must equal row count");
  if (scale == 0.0) return;
  const std::size_t p = y.cols();
  Vector w(p, 0.0);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double vi = v[i];
    if (vi == 0.0) continue;
    auto r = y.row(i);
    for (std::size_t j = 0; j < p; ++j) w[j] += vi * r[j];
  }
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double f = scale * u[i];
    if (f == 0.0) continue;
    auto r = y.row(i);
    for (std::size_t j = 0; j < p; ++j) r[j] += f * w[j];
  }
}

TallMatrix orthonormalize(const TallMatrix& y) {
  return times_small(y, inv_sqrt_psd(gram(y)));
}

}  // namespace alecton
