#include <cmath>

#include "alecton/linalg.hpp"
#include "doctest.h"

using namespace alecton;

namespace {

TallMatrix dense_from(const std::vector<std::vector<double>>& rows) {
  TallMatrix m(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

SmallSymmetric sym_from(const std::vector<std::vector<double>>& rows) {
  SmallSymmetric s(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows.size(); ++j) s(i, j) = rows[i][j];
  return s;
}

double max_abs_diff(const TallMatrix& a, const TallMatrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      m = std::max(m, std::abs(a(i, j) - b(i, j)));
  return m;
}

}  // namespace

TEST_CASE("vector primitives") {
  Vector a{1.0, 2.0, 3.0}, b{4.0, -5.0, 6.0};
  CHECK(dot(a, b) == 12.0);
  CHECK(norm_sq(a) == 14.0);
  CHECK(norm(b) == doctest::Approx(std::sqrt(77.0)).epsilon(1e-15));
}

TEST_CASE("gram, eigenvalues and determinant of a fixed cross product") {
  TallMatrix y = dense_from({{1, 1}, {1, 0}, {0, 1}});
  SmallSymmetric g = gram(y);
  CHECK(g(0, 0) == 2.0);
  CHECK(g(0, 1) == 1.0);
  CHECK(g(1, 0) == 1.0);
  CHECK(g(1, 1) == 2.0);

  std::vector<double> ev = small_eigs(g);
  REQUIRE(ev.size() == 2);
  CHECK(ev[0] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(ev[1] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK(det_small(g) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("det_small on a fixed 3x3") {
  SmallSymmetric s = sym_from({{2, 1, 0}, {1, 3, 1}, {0, 1, 4}});
  CHECK(det_small(s) == doctest::Approx(18.0).epsilon(1e-12));
}

TEST_CASE("eigen_symmetric reconstructs and orders") {
  Rng rng(42);
  const std::size_t p = 8;
  TallMatrix raw(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) raw(i, j) = rng.gaussian();
  SmallSymmetric s = SmallSymmetric::from_dense(raw);

  SymmetricEigen e = eigen_symmetric(s);
  for (std::size_t i = 1; i < p; ++i) CHECK(e.values[i] <= e.values[i - 1]);

  // V diag(values) V^T == S
  TallMatrix rec(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < p; ++k)
        acc += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
      rec(i, j) = acc;
    }
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      CHECK(rec(i, j) == doctest::Approx(s(i, j)).epsilon(1e-10));

  SmallSymmetric vg = gram(e.vectors);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j)
      CHECK(vg(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
}

TEST_CASE("inv_sqrt_psd") {
  SmallSymmetric d = sym_from({{4, 0}, {0, 9}});
  SmallSymmetric r = inv_sqrt_psd(d);
  CHECK(r(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(std::abs(r(0, 1)) < 1e-12);

  Rng rng(7);
  TallMatrix y = random_orthonormal(6, 3, rng);
  for (std::size_t i = 0; i < 6; ++i) y(i, 0) *= 3.0;  // well conditioned, not I
  SmallSymmetric g = gram(y);
  SmallSymmetric gi = inv_sqrt_psd(g);
  // gi * g * gi == I
  const std::size_t p = 3;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < p; ++k)
        for (std::size_t l = 0; l < p; ++l)
          acc += gi(i, k) * g(k, l) * gi(l, j);
      CHECK(acc == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));
    }

  SmallSymmetric singular = sym_from({{1, 1}, {1, 1}});
  CHECK_THROWS_AS(inv_sqrt_psd(singular), RankDeficiencyError);
}

TEST_CASE("sqrt_psd_clipped") {
  int clipped = -1;
  SmallSymmetric d = sym_from({{4, 0}, {0, 1}});
  SmallSymmetric r = sqrt_psd_clipped(d, &clipped);
  CHECK(clipped == 0);
  CHECK(r(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r(1, 1) == doctest::Approx(1.0).epsilon(1e-12));

  SmallSymmetric neg = sym_from({{1, 0}, {0, -0.01}});
  r = sqrt_psd_clipped(neg, &clipped);
  CHECK(clipped == 1);
  CHECK(r(1, 1) == doctest::Approx(0.0));
  CHECK(r(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("random_orthonormal produces orthonormal columns") {
  Rng rng(123);
  TallMatrix y = random_orthonormal(40, 5, rng);
  SmallSymmetric g = gram(y);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j)
      CHECK(g(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
  CHECK_THROWS_AS(random_orthonormal(3, 4, rng), DimensionError);
}

TEST_CASE("transpose_times and times_small") {
  TallMatrix a = dense_from({{1, 2}, {3, 4}, {5, 6}});
  TallMatrix b = dense_from({{1, 0}, {0, 1}, {1, 1}});
  TallMatrix c = transpose_times(a, b);  // 2x2: A^T B
  CHECK(c(0, 0) == 6.0);   // 1+0+5
  CHECK(c(0, 1) == 8.0);   // 0+3+5
  CHECK(c(1, 0) == 8.0);   // 2+0+6
  CHECK(c(1, 1) == 10.0);  // 0+4+6

  SmallSymmetric s = sym_from({{2, 1}, {1, 3}});
  TallMatrix as = times_small(a, s);
  CHECK(as(0, 0) == 4.0);   // 1*2+2*1
  CHECK(as(0, 1) == 7.0);   // 1*1+2*3
  CHECK(as(2, 0) == 16.0);  // 5*2+6*1
  CHECK(as(2, 1) == 23.0);  // 5*1+6*3
}

TEST_CASE("apply_outer matches the dense formula and skips zeros correctly") {
  Rng rng(5);
  const std::size_t n = 7, p = 2;
  TallMatrix y(n, p), y2(n, p);
  Vector u(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    u[i] = (i % 3 == 0) ? 0.0 : rng.gaussian();  // exercise the zero skips
    v[i] = (i % 2 == 0) ? 0.0 : rng.gaussian();
    for (std::size_t j = 0; j < p; ++j) {
      y(i, j) = rng.gaussian();
      y2(i, j) = y(i, j);
    }
  }
  const double scale = 1.75;
  apply_outer(y, scale, u, v);

  // reference: y2 += scale * u v^T y2
  Vector w(p, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) w[j] += v[i] * y2(i, j);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) y2(i, j) += scale * u[i] * w[j];

  CHECK(max_abs_diff(y, y2) < 1e-14);

  Vector bad(n + 1, 0.0);
  CHECK_THROWS_AS(apply_outer(y, 1.0, bad, v), DimensionError);
}

TEST_CASE("orthonormalize preserves the column space") {
  Rng rng(9);
  TallMatrix y(10, 3);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 3; ++j) y(i, j) = rng.gaussian();
  TallMatrix q = orthonormalize(y);

  SmallSymmetric g = gram(q);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(g(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10));

  // every original column stays inside span(q): || q q^T y_c - y_c || ~ 0
  for (std::size_t c = 0; c < 3; ++c) {
    Vector yc = y.col(c);
    Vector proj(10, 0.0);
    for (std::size_t k = 0; k < 3; ++k) {
      double coef = 0.0;
      for (std::size_t i = 0; i < 10; ++i) coef += q(i, k) * yc[i];
      for (std::size_t i = 0; i < 10; ++i) proj[i] += coef * q(i, k);
    }
    for (std::size_t i = 0; i < 10; ++i)
      CHECK(proj[i] == doctest::Approx(yc[i]).epsilon(1e-9));
  }
}

TEST_CASE("from_dense symmetrizes") {
  TallMatrix m = dense_from({{1, 2}, {0, 1}});
  SmallSymmetric s = SmallSymmetric::from_dense(m);
  CHECK(s(0, 1) == 1.0);
  CHECK(s(1, 0) == 1.0);
  CHECK(s(0, 0) == 1.0);
}

TEST_CASE("TallMatrix column accessors") {
  TallMatrix m(3, 2);
  m.set_col(1, {7.0, 8.0, 9.0});
  Vector c = m.col(1);
  CHECK(c[0] == 7.0);
  CHECK(c[2] == 9.0);
  CHECK(m.col(0)[0] == 0.0);
}
