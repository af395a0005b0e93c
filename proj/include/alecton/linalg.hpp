#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "alecton/errors.hpp"
#include "alecton/rng.hpp"

namespace alecton {

using Vector = std::vector<double>;

double dot(const Vector& a, const Vector& b);
double norm_sq(const Vector& v);
double norm(const Vector& v);

// Dense row-major matrix. Iterates are tall (rows >= cols) but the type
// itself is shape-agnostic so it can also hold small cross products.
class TallMatrix {
 public:
  TallMatrix() = default;
  TallMatrix(std::size_t rows, std::size_t cols);

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * cols_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * cols_ + j];
  }

  std::span<double> row(std::size_t i) {
    return {data_.data() + i * cols_, cols_};
  }
  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * cols_, cols_};
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  Vector col(std::size_t j) const;
  void set_col(std::size_t j, const Vector& v);

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

// Small dense symmetric matrix (p <= 64). Symmetry is enforced on
// construction from general data by averaging with the transpose.
class SmallSymmetric {
 public:
  static constexpr std::size_t kMaxSize = 64;

  SmallSymmetric() = default;
  explicit SmallSymmetric(std::size_t p);

  // (m + m^T) / 2 of a square matrix.
  static SmallSymmetric from_dense(const TallMatrix& m);

  double& operator()(std::size_t i, std::size_t j) {
    return data_[i * p_ + j];
  }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * p_ + j];
  }

  std::size_t size() const { return p_; }

 private:
  std::size_t p_ = 0;
  std::vector<double> data_;
};

struct SymmetricEigen {
  std::vector<double> values;  // descending
  TallMatrix vectors;          // p x p, column j pairs with values[j]
};

// Gaussian fill followed by modified Gram-Schmidt with one
// re-orthogonalization pass. Requires p <= n.
TallMatrix random_orthonormal(std::size_t n, std::size_t p, Rng& rng);

// Y^T Y.
SmallSymmetric gram(const TallMatrix& y);

// A^T B for matrices sharing their row count.
TallMatrix transpose_times(const TallMatrix& a, const TallMatrix& b);

// Y S for a small symmetric S with S.size() == Y.cols().
TallMatrix times_small(const TallMatrix& y, const SmallSymmetric& s);

// Cyclic Jacobi eigendecomposition. Sweeps until the off-diagonal Frobenius
// norm falls below 1e-12 relative to the matrix norm (at most 100 sweeps).
SymmetricEigen eigen_symmetric(const SmallSymmetric& s);

// Eigenvalues only, descending.
std::vector<double> small_eigs(const SmallSymmetric& s);

// S^{-1/2} of a positive definite S. Throws RankDeficiencyError naming the
// offending eigenvalue when min eig <= 1e-12 * max eig.
SmallSymmetric inv_sqrt_psd(const SmallSymmetric& s);

// S^{1/2} after clipping negative eigenvalues to zero; reports how many
// eigenvalues were clipped.
SmallSymmetric sqrt_psd_clipped(const SmallSymmetric& s, int* clipped);

// Determinant via LU with partial pivoting.
double det_small(const SmallSymmetric& s);

// Y += scale * u (v^T Y). u, v must have Y.rows() entries. O(rows * cols).
void apply_outer(TallMatrix& y, double scale, const Vector& u, const Vector& v);

// Y (Y^T Y)^{-1/2}; orthonormal columns spanning the same space.
TallMatrix orthonormalize(const TallMatrix& y);

}  // namespace alecton
