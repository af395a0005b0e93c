#include "alecton/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace alecton {

namespace {

void check_orthonormal(const TallMatrix& b, double tol, const char* what) {
  SmallSymmetric g = gram(b);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j) {
      double want = (i == j) ? 1.0 : 0.0;
      if (std::abs(g(i, j) - want) > tol)
        throw ParameterError(std::string(what) + ": columns not orthonormal");
    }
}

double inner_with(const Vector& v, int state, const Vector& y) {
  if (state >= 0) return y[static_cast<std::size_t>(state)];
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * y[i];
  return s;
}

}  // namespace

GroundTruth GroundTruth::spectral(std::vector<double> eigenvalues,
                                  TallMatrix eigenvectors) {
  if (eigenvalues.empty()) throw ParameterError("spectral: no eigenvalues");
  if (eigenvalues.size() != eigenvectors.cols())
    throw DimensionError("spectral: eigenvalue count != eigenvector columns");
  if (eigenvectors.cols() > eigenvectors.rows())
    throw DimensionError("spectral: rank exceeds dimension");
  for (std::size_t i = 0; i < eigenvalues.size(); ++i) {
    if (!(eigenvalues[i] > 0.0))
      throw ParameterError("spectral: eigenvalues must be positive");
    if (i > 0 && eigenvalues[i] > eigenvalues[i - 1])
      throw ParameterError("spectral: eigenvalues must be descending");
  }
  check_orthonormal(eigenvectors, 1e-10, "spectral");

  GroundTruth t;
  t.kind_ = Kind::Spectral;
  t.dim_ = eigenvectors.rows();
  t.eigenvalues_ = std::move(eigenvalues);
  t.basis_ = std::move(eigenvectors);
  for (double l : t.eigenvalues_) {
    t.frob_sq_ += l * l;
    t.trace_ += l;
  }
  return t;
}

GroundTruth GroundTruth::rect(std::size_t rows, std::size_t cols,
                              const std::vector<Triplet>& entries) {
  if (rows == 0 || cols == 0) throw ParameterError("rect: empty shape");
  GroundTruth t;
  t.kind_ = Kind::Rect;
  t.rect_rows_ = rows;
  t.rect_cols_ = cols;
  t.dim_ = rows + cols;
  t.rect_values_.assign(rows * cols, 0.0);
  for (const Triplet& e : entries) {
    if (e.row >= rows || e.col >= cols)
      throw ParameterError("rect: entry (" + std::to_string(e.row) + "," +
                           std::to_string(e.col) + ") out of bounds");
    t.rect_values_[e.row * cols + e.col] = e.value;  // duplicates: last wins
  }
  double f = 0.0;
  for (double v : t.rect_values_) f += v * v;
  if (f == 0.0) throw ParameterError("rect: matrix is identically zero");
  t.frob_sq_ = 2.0 * f;  // of the symmetric embedding
  t.trace_ = 0.0;
  return t;
}

GroundTruth GroundTruth::projection(TallMatrix basis) {
  if (basis.cols() > basis.rows())
    throw DimensionError("projection: rank exceeds dimension");
  check_orthonormal(basis, 1e-10, "projection");
  GroundTruth t;
  t.kind_ = Kind::Projection;
  t.dim_ = basis.rows();
  t.basis_ = std::move(basis);
  double r = static_cast<double>(t.basis_.cols());
  t.frob_sq_ = r;
  t.trace_ = r;
  return t;
}

std::size_t GroundTruth::rank() const {
  switch (kind_) {
    case Kind::Spectral:
      return eigenvalues_.size();
    case Kind::Projection:
      return basis_.cols();
    case Kind::Rect:
      return std::min(rect_rows_, rect_cols_);
  }
  return 0;
}

double GroundTruth::entry(std::size_t i, std::size_t j) const {
  if (i >= dim_ || j >= dim_) throw DimensionError("entry: index out of range");
  switch (kind_) {
    case Kind::Spectral: {
      double s = 0.0;
      for (std::size_t k = 0; k < eigenvalues_.size(); ++k)
        s += eigenvalues_[k] * basis_(i, k) * basis_(j, k);
      return s;
    }
    case Kind::Projection: {
      double s = 0.0;
      for (std::size_t k = 0; k < basis_.cols(); ++k)
        s += basis_(i, k) * basis_(j, k);
      return s;
    }
    case Kind::Rect: {
      if (i < rect_rows_ && j >= rect_rows_)
        return rect_values_[i * rect_cols_ + (j - rect_rows_)];
      if (j < rect_rows_ && i >= rect_rows_)
        return rect_values_[j * rect_cols_ + (i - rect_rows_)];
      return 0.0;
    }
  }
  return 0.0;
}

void GroundTruth::matvec(const Vector& x, Vector& out) const {
  if (x.size() != dim_) throw DimensionError("matvec: length mismatch");
  out.assign(dim_, 0.0);
  switch (kind_) {
    case Kind::Spectral:
    case Kind::Projection: {
      const std::size_t r = basis_.cols();
      Vector t(r, 0.0);
      for (std::size_t i = 0; i < dim_; ++i) {
        double xi = x[i];
        if (xi == 0.0) continue;
        for (std::size_t k = 0; k < r; ++k) t[k] += basis_(i, k) * xi;
      }
      if (kind_ == Kind::Spectral)
        for (std::size_t k = 0; k < r; ++k) t[k] *= eigenvalues_[k];
      for (std::size_t i = 0; i < dim_; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < r; ++k) s += basis_(i, k) * t[k];
        out[i] = s;
      }
      break;
    }
    case Kind::Rect: {
      for (std::size_t i = 0; i < rect_rows_; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < rect_cols_; ++j)
          s += rect_values_[i * rect_cols_ + j] * x[rect_rows_ + j];
        out[i] = s;
      }
      for (std::size_t j = 0; j < rect_cols_; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < rect_rows_; ++i)
          s += rect_values_[i * rect_cols_ + j] * x[i];
        out[rect_rows_ + j] = s;
      }
      break;
    }
  }
}

double GroundTruth::frob_sq() const { return frob_sq_; }
double GroundTruth::trace() const { return trace_; }

std::optional<double> GroundTruth::eigengap(std::size_t q) const {
  if (q < 1 || q > dim_) throw ParameterError("eigengap: q out of range");
  if (kind_ == Kind::Rect) return std::nullopt;
  auto lam = [&](std::size_t i) -> double {  // 1-indexed
    if (i > rank()) return 0.0;
    return kind_ == Kind::Spectral ? eigenvalues_[i - 1] : 1.0;
  };
  double next = (q + 1 > dim_) ? 0.0 : lam(q + 1);
  return lam(q) - next;
}

std::optional<TallMatrix> GroundTruth::dominant_basis(std::size_t q) const {
  if (q < 1) throw ParameterError("dominant_basis: q must be >= 1");
  if (kind_ == Kind::Rect || q > rank()) return std::nullopt;
  TallMatrix b(dim_, q);
  for (std::size_t i = 0; i < dim_; ++i)
    for (std::size_t j = 0; j < q; ++j) b(i, j) = basis_(i, j);
  return b;
}

double GroundTruth::rect_value(std::size_t i, std::size_t j) const {
  if (kind_ != Kind::Rect) throw ParameterError("rect_value: not a rect target");
  if (i >= rect_rows_ || j >= rect_cols_)
    throw DimensionError("rect_value: index out of range");
  return rect_values_[i * rect_cols_ + j];
}

double GroundTruth::rect_xi() const {
  if (kind_ != Kind::Rect) throw ParameterError("rect_xi: not a rect target");
  double max_sq = 0.0;
  for (double v : rect_values_) max_sq = std::max(max_sq, v * v);
  double mf2 = frob_sq_ / 2.0;
  return max_sq * static_cast<double>(rect_rows_) *
         static_cast<double>(rect_cols_) / mf2;
}

// ---- SampleOp ----

void SampleOp::Term::set_left_basis(std::size_t n, std::size_t idx) {
  if (left.size() != n) {
    left.assign(n, 0.0);
  } else if (left_state == -2) {
    std::fill(left.begin(), left.end(), 0.0);
  } else if (left_state >= 0) {
    left[static_cast<std::size_t>(left_state)] = 0.0;
  }
  left[idx] = 1.0;
  left_state = static_cast<int>(idx);
}

void SampleOp::Term::set_right_basis(std::size_t n, std::size_t idx) {
  if (right.size() != n) {
    right.assign(n, 0.0);
  } else if (right_state == -2) {
    std::fill(right.begin(), right.end(), 0.0);
  } else if (right_state >= 0) {
    right[static_cast<std::size_t>(right_state)] = 0.0;
  }
  right[idx] = 1.0;
  right_state = static_cast<int>(idx);
}

Vector& SampleOp::Term::dense_left(std::size_t n) {
  left.resize(n);
  left_state = -2;
  return left;
}

Vector& SampleOp::Term::dense_right(std::size_t n) {
  right.resize(n);
  right_state = -2;
  return right;
}

void SampleOp::Term::set_left_copy(const Vector& v) {
  left.assign(v.begin(), v.end());
  left_state = -2;
}

void SampleOp::Term::set_right_copy(const Vector& v) {
  right.assign(v.begin(), v.end());
  right_state = -2;
}

void SampleOp::resize_terms(std::size_t count) { terms.resize(count); }

void SampleOp::apply_scaled(TallMatrix& y, double eta) const {
  for (const Term& t : terms) apply_outer(y, eta * t.scale, t.left, t.right);
}

double SampleOp::quad_form(const Vector& y) const {
  double s = 0.0;
  for (const Term& t : terms)
    s += t.scale * inner_with(t.left, t.left_state, y) *
         inner_with(t.right, t.right_state, y);
  return s;
}

void SampleOp::apply_to_vector(const Vector& y, Vector& z) const {
  z.assign(y.size(), 0.0);
  for (const Term& t : terms) {
    double r = t.scale * inner_with(t.right, t.right_state, y);
    if (r == 0.0) continue;
    if (t.left_state >= 0) {
      z[static_cast<std::size_t>(t.left_state)] += r;
    } else {
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += r * t.left[i];
    }
  }
}

void SampleOp::accumulate_compressed(const TallMatrix& yhat, TallMatrix& acc,
                                     double weight) const {
  const std::size_t p = yhat.cols();
  Vector a(p), b(p);
  for (const Term& t : terms) {
    for (std::size_t j = 0; j < p; ++j) {
      a[j] = 0.0;
      b[j] = 0.0;
    }
    if (t.left_state >= 0) {
      auto r = yhat.row(static_cast<std::size_t>(t.left_state));
      for (std::size_t j = 0; j < p; ++j) a[j] = r[j];
    } else {
      for (std::size_t i = 0; i < yhat.rows(); ++i) {
        double li = t.left[i];
        if (li == 0.0) continue;
        auto r = yhat.row(i);
        for (std::size_t j = 0; j < p; ++j) a[j] += li * r[j];
      }
    }
    if (t.right_state >= 0) {
      auto r = yhat.row(static_cast<std::size_t>(t.right_state));
      for (std::size_t j = 0; j < p; ++j) b[j] = r[j];
    } else {
      for (std::size_t i = 0; i < yhat.rows(); ++i) {
        double ri = t.right[i];
        if (ri == 0.0) continue;
        auto r = yhat.row(i);
        for (std::size_t j = 0; j < p; ++j) b[j] += ri * r[j];
      }
    }
    double ws = weight * t.scale;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) acc(i, j) += ws * a[i] * b[j];
  }
}

// ---- Sampler ----

const char* sampler_kind_name(SamplerKind k) {
  switch (k) {
    case SamplerKind::Exact: return "exact";
    case SamplerKind::Entrywise: return "entrywise";
    case SamplerKind::Rect: return "rect";
    case SamplerKind::Trace: return "trace";
    case SamplerKind::TraceSymmetric: return "trace-sym";
    case SamplerKind::Subspace: return "subspace";
    case SamplerKind::SubspaceSplit: return "subspace-split";
  }
  return "?";
}

Sampler::Sampler(SamplerKind kind, std::shared_ptr<const GroundTruth> truth)
    : kind_(kind), truth_(std::move(truth)) {
  if (!truth_) throw ParameterError("sampler: null truth");
}

Sampler Sampler::exact(std::shared_ptr<const GroundTruth> truth) {
  Sampler s(SamplerKind::Exact, std::move(truth));
  if (s.truth_->kind() == GroundTruth::Kind::Rect)
    throw ParameterError("exact: rect targets have no stored factorization");
  return s;
}

Sampler Sampler::entrywise(std::shared_ptr<const GroundTruth> truth) {
  Sampler s(SamplerKind::Entrywise, std::move(truth));
  if (s.truth_->kind() == GroundTruth::Kind::Rect)
    throw ParameterError("entrywise: use the rect sampler for rect targets");
  return s;
}

Sampler Sampler::rect(std::shared_ptr<const GroundTruth> truth) {
  Sampler s(SamplerKind::Rect, std::move(truth));
  if (s.truth_->kind() != GroundTruth::Kind::Rect)
    throw ParameterError("rect sampler requires a rect target");
  return s;
}

Sampler Sampler::trace(std::shared_ptr<const GroundTruth> truth) {
  Sampler s(SamplerKind::Trace, std::move(truth));
  if (s.truth_->kind() == GroundTruth::Kind::Rect)
    throw ParameterError("trace: square symmetric target required");
  return s;
}

Sampler Sampler::trace_symmetric(std::shared_ptr<const GroundTruth> truth) {
  Sampler s(SamplerKind::TraceSymmetric, std::move(truth));
  if (s.truth_->kind() == GroundTruth::Kind::Rect)
    throw ParameterError("trace-sym: square symmetric target required");
  return s;
}

Sampler Sampler::subspace(std::shared_ptr<const GroundTruth> truth,
                          std::size_t m_keep) {
  Sampler s(SamplerKind::Subspace, std::move(truth));
  if (s.truth_->kind() != GroundTruth::Kind::Projection)
    throw ParameterError("subspace sampler requires a projection target");
  if (m_keep < 1 || m_keep > s.dim())
    throw ParameterError("subspace: m_keep must be in [1, n]");
  s.m_keep_ = m_keep;
  return s;
}

Sampler Sampler::subspace_split(std::shared_ptr<const GroundTruth> truth,
                                std::size_t m_keep) {
  Sampler s(SamplerKind::SubspaceSplit, std::move(truth));
  if (s.truth_->kind() != GroundTruth::Kind::Projection)
    throw ParameterError("subspace-split sampler requires a projection target");
  if (m_keep < 1 || 2 * m_keep > s.dim())
    throw ParameterError("subspace-split: requires 2 * m_keep <= n");
  s.m_keep_ = m_keep;
  return s;
}

Sampler Sampler::with_noise(double additive_sd, double multiplicative_sd) const {
  if (additive_sd < 0.0 || multiplicative_sd < 0.0)
    throw ParameterError("with_noise: standard deviations must be >= 0");
  Sampler s = *this;
  s.additive_sd_ = additive_sd;
  s.multiplicative_sd_ = multiplicative_sd;
  return s;
}

Sampler Sampler::deflated(std::vector<Vector> recovered) const {
  Sampler s = *this;
  for (const Vector& v : recovered)
    if (v.size() != dim())
      throw DimensionError("deflated: component length must equal dimension");
  s.deflation_ = std::move(recovered);
  return s;
}

std::size_t Sampler::base_terms() const {
  return kind_ == SamplerKind::Rect
             ? 2
             : (kind_ == SamplerKind::Exact ? truth_->rank() : 1);
}

std::size_t Sampler::stochastic_rank() const {
  if (kind_ == SamplerKind::Exact) return 1;  // deterministic, unconstrained
  return base_terms() + deflation_.size();
}

namespace {

// Shared body of the two-sample reduction; norms must be validated already.
void fill_two_sample(const GroundTruth& truth, const Vector& u1,
                     const Vector& u2, double na, double nb, SampleOp::Term& t) {
  const std::size_t n = truth.dim();
  Vector tmp;
  truth.matvec(u1, tmp);
  double q1 = dot(u1, tmp);
  truth.matvec(u2, tmp);
  double q2 = dot(u2, tmp);
  double measurement = (q1 - q2) / (na * nb);
  Vector& l = t.dense_left(n);
  Vector& r = t.dense_right(n);
  for (std::size_t i = 0; i < n; ++i) {
    l[i] = (u1[i] + u2[i]) / na;
    r[i] = (u1[i] - u2[i]) / nb;
  }
  t.scale = static_cast<double>(n) * static_cast<double>(n) * measurement;
}

}  // namespace

void two_sample_term(const GroundTruth& truth, const Vector& u1,
                     const Vector& u2, SampleOp& out) {
  if (u1.size() != truth.dim() || u2.size() != truth.dim())
    throw DimensionError("two_sample_term: length mismatch");
  Vector a(u1.size()), b(u1.size());
  for (std::size_t i = 0; i < u1.size(); ++i) {
    a[i] = u1[i] + u2[i];
    b[i] = u1[i] - u2[i];
  }
  double na = norm(a), nb = norm(b);
  if (na < 1e-12 || nb < 1e-12)
    throw ParameterError("two_sample_term: degenerate vector pair");
  out.resize_terms(1);
  fill_two_sample(truth, u1, u2, na, nb, out.terms[0]);
}

void Sampler::draw(Rng& rng, SampleOp& out) const {
  const std::size_t n = dim();
  const std::size_t nb = base_terms();
  out.resize_terms(nb + deflation_.size());

  switch (kind_) {
    case SamplerKind::Exact: {
      const TallMatrix& b = truth_->basis();
      for (std::size_t k = 0; k < nb; ++k) {
        SampleOp::Term& t = out.terms[k];
        t.scale = truth_->kind() == GroundTruth::Kind::Spectral
                      ? truth_->eigenvalues()[k]
                      : 1.0;
        Vector& l = t.dense_left(n);
        Vector& r = t.dense_right(n);
        for (std::size_t i = 0; i < n; ++i) {
          l[i] = b(i, k);
          r[i] = b(i, k);
        }
      }
      break;
    }
    case SamplerKind::Entrywise: {
      std::size_t i = rng.index(n);
      std::size_t j = rng.index(n);
      SampleOp::Term& t = out.terms[0];
      t.scale = static_cast<double>(n) * static_cast<double>(n) *
                truth_->entry(i, j);
      t.set_left_basis(n, i);
      t.set_right_basis(n, j);
      break;
    }
    case SamplerKind::Rect: {
      const std::size_t m = truth_->rect_rows();
      const std::size_t c = truth_->rect_cols();
      std::size_t i = rng.index(m);
      std::size_t j = rng.index(c);
      double scale = static_cast<double>(m) * static_cast<double>(c) *
                     truth_->rect_value(i, j);
      out.terms[0].scale = scale;
      out.terms[0].set_left_basis(n, i);
      out.terms[0].set_right_basis(n, m + j);
      out.terms[1].scale = scale;
      out.terms[1].set_left_basis(n, m + j);
      out.terms[1].set_right_basis(n, i);
      break;
    }
    case SamplerKind::Trace: {
      SampleOp::Term& t = out.terms[0];
      Vector& v = t.dense_left(n);
      Vector& w = t.dense_right(n);
      double nv = 0.0, nw = 0.0;
      do {
        nv = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          v[i] = rng.gaussian();
          nv += v[i] * v[i];
        }
        nv = std::sqrt(nv);
      } while (nv < 1e-12);
      do {
        nw = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          w[i] = rng.gaussian();
          nw += w[i] * w[i];
        }
        nw = std::sqrt(nw);
      } while (nw < 1e-12);
      for (std::size_t i = 0; i < n; ++i) {
        v[i] /= nv;
        w[i] /= nw;
      }
      Vector tmp;
      truth_->matvec(w, tmp);
      t.scale = static_cast<double>(n) * static_cast<double>(n) * dot(v, tmp);
      break;
    }
    case SamplerKind::TraceSymmetric: {
      // u1, u2 are plain gaussian vectors: then u1+u2 and u1-u2 are
      // independent, which the unbiasedness argument needs. (For unit u1, u2
      // the sum and difference are forced orthogonal and the reduction would
      // acquire a diagonal bias.)
      Vector u1(n), u2(n);
      double na = 0.0, nbn = 0.0;
      do {
        na = 0.0;
        nbn = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          u1[i] = rng.gaussian();
          u2[i] = rng.gaussian();
          double a = u1[i] + u2[i], b = u1[i] - u2[i];
          na += a * a;
          nbn += b * b;
        }
        na = std::sqrt(na);
        nbn = std::sqrt(nbn);
      } while (na < 1e-12 || nbn < 1e-12);
      fill_two_sample(*truth_, u1, u2, na, nbn, out.terms[0]);
      break;
    }
    case SamplerKind::Subspace:
    case SamplerKind::SubspaceSplit: {
      const TallMatrix& b = truth_->basis();
      const std::size_t r = b.cols();
      SampleOp::Term& t = out.terms[0];
      Vector& l = t.dense_left(n);
      Vector& rt = t.dense_right(n);
      Vector g(r);
      double nv = 0.0;
      do {
        for (std::size_t k = 0; k < r; ++k) g[k] = rng.gaussian();
        nv = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
          double s = 0.0;
          for (std::size_t k = 0; k < r; ++k) s += b(i, k) * g[k];
          l[i] = s;  // unit vector in the subspace, before masking
          nv += s * s;
        }
        nv = std::sqrt(nv);
      } while (nv < 1e-12);

      const double rate = static_cast<double>(m_keep_) / static_cast<double>(n);
      if (kind_ == SamplerKind::Subspace) {
        for (std::size_t i = 0; i < n; ++i) {
          double vi = l[i] / nv;
          bool qi = rng.bernoulli(rate);
          bool ri = rng.bernoulli(rate);
          l[i] = qi ? vi : 0.0;
          rt[i] = ri ? vi : 0.0;
        }
      } else {
        // Reveal mask S = Q or R; a revealed coordinate is routed to Q, R,
        // or both so that Q and R come out exactly independent Bernoulli
        // (a strictly disjoint split would zero the diagonal of E[A~]).
        const double s_rate = 2.0 * rate - rate * rate;
        const double p_both = rate * rate / s_rate;
        const double p_q_only = rate * (1.0 - rate) / s_rate;
        for (std::size_t i = 0; i < n; ++i) {
          double vi = l[i] / nv;
          bool qi = false, ri = false;
          if (rng.bernoulli(s_rate)) {
            double u = rng.uniform();
            if (u < p_both) {
              qi = true;
              ri = true;
            } else if (u < p_both + p_q_only) {
              qi = true;
            } else {
              ri = true;
            }
          }
          l[i] = qi ? vi : 0.0;
          rt[i] = ri ? vi : 0.0;
        }
      }
      double nn = static_cast<double>(n);
      double mm = static_cast<double>(m_keep_);
      t.scale = static_cast<double>(r) * nn * nn / (mm * mm);
      break;
    }
  }

  if (multiplicative_sd_ > 0.0 || additive_sd_ > 0.0) {
    for (std::size_t k = 0; k < nb; ++k) {
      double s = out.terms[k].scale;
      if (multiplicative_sd_ > 0.0)
        s *= 1.0 + multiplicative_sd_ * rng.gaussian();
      if (additive_sd_ > 0.0) s += additive_sd_ * rng.gaussian();
      out.terms[k].scale = s;
    }
  }

  for (std::size_t d = 0; d < deflation_.size(); ++d) {
    SampleOp::Term& t = out.terms[nb + d];
    t.scale = -1.0;
    t.set_left_copy(deflation_[d]);
    t.set_right_copy(deflation_[d]);
  }
}

SampleOp Sampler::draw(Rng& rng) const {
  SampleOp op;
  draw(rng, op);
  return op;
}

VarianceParams Sampler::variance_params() const {
  VarianceParams vp;
  const double n = static_cast<double>(dim());
  switch (kind_) {
    case SamplerKind::Exact:
      vp.degenerate = true;
      return vp;  // zero variance; noise inflation does not apply
    case SamplerKind::Entrywise: {
      double mu = matrix_incoherence(*truth_);
      double mu4 = mu * mu * mu * mu;
      vp.sigma_a_sq = mu4 * truth_->frob_sq();
      vp.sigma_r_sq = mu4 * truth_->trace() * truth_->trace();
      break;
    }
    case SamplerKind::Rect: {
      double mf2 = truth_->frob_sq() / 2.0;
      double s = 2.0 * truth_->rect_xi() * mf2;
      vp.sigma_a_sq = s;
      vp.sigma_r_sq = s;
      break;
    }
    case SamplerKind::Trace:
    case SamplerKind::TraceSymmetric:
      vp.sigma_a_sq = 16.0 * truth_->frob_sq();
      vp.sigma_r_sq = 16.0 * truth_->trace() * truth_->trace();
      vp.small_n_flagged = dim() <= 50;
      break;
    case SamplerKind::Subspace:
    case SamplerKind::SubspaceSplit: {
      double r = static_cast<double>(truth_->rank());
      double mu = subspace_incoherence(*truth_);
      double f = 1.0 + mu * r / static_cast<double>(m_keep_);
      vp.sigma_a_sq = r * r * f * f;
      vp.sigma_r_sq = vp.sigma_a_sq;
      break;
    }
  }
  double mult2 = multiplicative_sd_ * multiplicative_sd_;
  double add2 = additive_sd_ * additive_sd_;
  vp.sigma_a_sq = vp.sigma_a_sq * (1.0 + mult2) + n * n * add2;
  vp.sigma_r_sq = vp.sigma_r_sq * (1.0 + mult2) + n * n * add2;
  return vp;
}

double matrix_incoherence(const GroundTruth& truth) {
  if (truth.kind() == GroundTruth::Kind::Rect)
    throw ParameterError("matrix_incoherence: eigenvectors unavailable");
  const TallMatrix& b = truth.basis();
  double m = 0.0;
  for (std::size_t i = 0; i < b.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      m = std::max(m, std::abs(b(i, j)));
  return std::sqrt(static_cast<double>(b.rows())) * m;
}

double subspace_incoherence(const GroundTruth& truth) {
  if (truth.kind() == GroundTruth::Kind::Rect)
    throw ParameterError("subspace_incoherence: basis unavailable");
  const TallMatrix& b = truth.basis();
  double m = 0.0;
  for (std::size_t i = 0; i < b.rows(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < b.cols(); ++j) row += b(i, j) * b(i, j);
    m = std::max(m, row);
  }
  return static_cast<double>(b.rows()) / static_cast<double>(b.cols()) * m;
}

AvcReport empirical_avc_check(const Sampler& sampler, std::size_t num_pairs,
                              std::size_t num_draws, Rng& rng,
                              std::optional<VarianceParams> params_override) {
  if (num_pairs < 1 || num_draws < 2)
    throw ParameterError("empirical_avc_check: need >= 1 pair, >= 2 draws");
  const GroundTruth& truth = sampler.truth();
  const std::size_t n = truth.dim();

  AvcReport report;
  report.params =
      params_override ? *params_override : sampler.variance_params();
  report.all_pass = true;

  SampleOp op;
  Vector y(n), z, az, aaz;
  for (std::size_t pair = 0; pair < num_pairs; ++pair) {
    double ny = 0.0;
    do {
      ny = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        y[i] = rng.gaussian();
        ny += y[i] * y[i];
      }
      ny = std::sqrt(ny);
    } while (ny < 1e-12);
    for (std::size_t i = 0; i < n; ++i) y[i] /= ny;

    double c0 = rng.uniform(), c1 = rng.uniform(), c2 = rng.uniform();
    double tr_w = c0 * static_cast<double>(n) + c1 * truth.trace() +
                  c2 * truth.frob_sq();

    double sum_a = 0.0, sumsq_a = 0.0, sum_r = 0.0, sumsq_r = 0.0;
    for (std::size_t d = 0; d < num_draws; ++d) {
      sampler.draw(rng, op);
      op.apply_to_vector(y, z);
      truth.matvec(z, az);
      truth.matvec(az, aaz);
      double s_a = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        s_a += z[i] * (c0 * z[i] + c1 * az[i] + c2 * aaz[i]);
      double quad = op.quad_form(y);
      double s_r = quad * quad;
      sum_a += s_a;
      sumsq_a += s_a * s_a;
      sum_r += s_r;
      sumsq_r += s_r * s_r;
    }
    double nd = static_cast<double>(num_draws);
    AvcProbe probe;
    probe.estimate_a = sum_a / nd;
    probe.estimate_r = sum_r / nd;
    double var_a =
        std::max(0.0, (sumsq_a - nd * probe.estimate_a * probe.estimate_a) /
                          (nd - 1.0));
    double var_r =
        std::max(0.0, (sumsq_r - nd * probe.estimate_r * probe.estimate_r) /
                          (nd - 1.0));
    double se_a = std::sqrt(var_a / nd);
    double se_r = std::sqrt(var_r / nd);
    probe.rel_se_a = probe.estimate_a > 0.0 ? se_a / probe.estimate_a : 0.0;
    probe.rel_se_r = probe.estimate_r > 0.0 ? se_r / probe.estimate_r : 0.0;
    probe.bound_a = report.params.sigma_a_sq * tr_w;  // ||y|| == 1
    probe.bound_r = report.params.sigma_r_sq;
    probe.pass_a = probe.estimate_a <= probe.bound_a * (1.0 + 3.0 * probe.rel_se_a);
    probe.pass_r = probe.estimate_r <= probe.bound_r * (1.0 + 3.0 * probe.rel_se_r);
    report.all_pass = report.all_pass && probe.pass_a && probe.pass_r;
    report.probes.push_back(probe);
  }
  return report;
}

}  // namespace alecton
