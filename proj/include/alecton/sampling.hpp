#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "alecton/linalg.hpp"
#include "alecton/rng.hpp"

namespace alecton {

struct Triplet {
  std::size_t row, col;
  double value;
};

// Target matrix in one of three forms:
//  - spectral: A = U diag(lambda) U^T with orthonormal U (n x rank)
//  - rect: rectangular M accessed through its symmetric embedding
//          [[0, M], [M^T, 0]] of dimension rows + cols
//  - projection: A = B B^T for an orthonormal basis B (n x r)
class GroundTruth {
 public:
  enum class Kind { Spectral, Rect, Projection };

  static GroundTruth spectral(std::vector<double> eigenvalues,
                              TallMatrix eigenvectors);
  static GroundTruth rect(std::size_t rows, std::size_t cols,
                          const std::vector<Triplet>& entries);
  static GroundTruth projection(TallMatrix basis);

  Kind kind() const { return kind_; }
  // Ambient dimension of the (embedded) symmetric target.
  std::size_t dim() const { return dim_; }
  std::size_t rank() const;

  double entry(std::size_t i, std::size_t j) const;
  void matvec(const Vector& x, Vector& out) const;
  double frob_sq() const;
  double trace() const;

  // lambda_q - lambda_{q+1}; eigenvalues beyond the stored rank are zero.
  // Unavailable for rect targets (their spectrum is not stored).
  std::optional<double> eigengap(std::size_t q) const;
  // Orthonormal basis of the top-q eigenspace, when the form provides one.
  std::optional<TallMatrix> dominant_basis(std::size_t q) const;

  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  const TallMatrix& basis() const { return basis_; }

  std::size_t rect_rows() const { return rect_rows_; }
  std::size_t rect_cols() const { return rect_cols_; }
  double rect_value(std::size_t i, std::size_t j) const;
  // Spikiness xi = max M_ij^2 * rows * cols / ||M||_F^2.
  double rect_xi() const;

 private:
  GroundTruth() = default;
  Kind kind_ = Kind::Spectral;
  std::size_t dim_ = 0;
  std::vector<double> eigenvalues_;
  TallMatrix basis_;  // eigenvectors or subspace basis
  std::size_t rect_rows_ = 0, rect_cols_ = 0;
  std::vector<double> rect_values_;  // dense rows x cols
  double frob_sq_ = 0.0, trace_ = 0.0;
};

// One stochastic measurement A~, stored as a short sum of outer products
// scale * left * right^T. Vectors that are basis vectors carry a hot index
// so draws can reset them in O(1); the arithmetic is unchanged.
struct SampleOp {
  struct Term {
    double scale = 0.0;
    Vector left, right;
    // -2: dense content, -1: all zero, >=0: single nonzero at that index
    int left_state = -1, right_state = -1;

    void set_left_basis(std::size_t n, std::size_t idx);
    void set_right_basis(std::size_t n, std::size_t idx);
    Vector& dense_left(std::size_t n);
    Vector& dense_right(std::size_t n);
    void set_left_copy(const Vector& v);
    void set_right_copy(const Vector& v);
  };

  std::vector<Term> terms;

  void resize_terms(std::size_t count);
  // Y += eta * A~ * Y
  void apply_scaled(TallMatrix& y, double eta) const;
  // y^T A~ y
  double quad_form(const Vector& y) const;
  // z = A~ * y
  void apply_to_vector(const Vector& y, Vector& z) const;
  // acc += weight * Yhat^T A~ Yhat   (acc is p x p)
  void accumulate_compressed(const TallMatrix& yhat, TallMatrix& acc,
                             double weight) const;
};

struct VarianceParams {
  double sigma_a_sq = 0.0;
  double sigma_r_sq = 0.0;
  bool degenerate = false;     // exact sampler: zero variance
  bool small_n_flagged = false;  // trace bounds assume n > 50
};

enum class SamplerKind {
  Exact,
  Entrywise,
  Rect,
  Trace,
  TraceSymmetric,
  Subspace,
  SubspaceSplit,
};

const char* sampler_kind_name(SamplerKind k);

// Immutable sampling distribution over measurement operators. Drawing needs
// a caller-owned Rng, so a single Sampler is safe to share across trials.
class Sampler {
 public:
  static Sampler exact(std::shared_ptr<const GroundTruth> truth);
  static Sampler entrywise(std::shared_ptr<const GroundTruth> truth);
  static Sampler rect(std::shared_ptr<const GroundTruth> truth);
  static Sampler trace(std::shared_ptr<const GroundTruth> truth);
  static Sampler trace_symmetric(std::shared_ptr<const GroundTruth> truth);
  static Sampler subspace(std::shared_ptr<const GroundTruth> truth,
                          std::size_t m_keep);
  static Sampler subspace_split(std::shared_ptr<const GroundTruth> truth,
                                std::size_t m_keep);

  // Same distribution with every base term's scale perturbed to
  // scale * (1 + eps_m) + eps_a. Deflation terms stay exact.
  Sampler with_noise(double additive_sd, double multiplicative_sd) const;
  // Same distribution with terms (-1, y, y) appended for each recovered y,
  // so the expectation becomes A - sum y y^T.
  Sampler deflated(std::vector<Vector> recovered) const;

  void draw(Rng& rng, SampleOp& out) const;
  SampleOp draw(Rng& rng) const;

  SamplerKind kind() const { return kind_; }
  const GroundTruth& truth() const { return *truth_; }
  std::shared_ptr<const GroundTruth> truth_ptr() const { return truth_; }
  std::size_t dim() const { return truth_->dim(); }
  std::size_t m_keep() const { return m_keep_; }
  double additive_sd() const { return additive_sd_; }
  double multiplicative_sd() const { return multiplicative_sd_; }
  const std::vector<Vector>& deflation() const { return deflation_; }

  // Max rank of an emitted measurement; the exact sampler reports 1 because
  // its deterministic samples put no constraint on p.
  std::size_t stochastic_rank() const;

  // Second-moment parameters from the per-model bounds, inflated for noise.
  VarianceParams variance_params() const;

 private:
  Sampler(SamplerKind kind, std::shared_ptr<const GroundTruth> truth);
  std::size_t base_terms() const;

  SamplerKind kind_;
  std::shared_ptr<const GroundTruth> truth_;
  std::size_t m_keep_ = 0;
  double additive_sd_ = 0.0, multiplicative_sd_ = 0.0;
  std::vector<Vector> deflation_;
};

// Worst-entry incoherence of the nonzero eigenvectors:
// mu = sqrt(n) * max |U_ji|. In [1, sqrt(n)].
double matrix_incoherence(const GroundTruth& truth);

// Row-leverage incoherence of a subspace: mu = (n/r) * max_i ||row_i(B)||^2.
// In [1, n/r].
double subspace_incoherence(const GroundTruth& truth);

// The two-sample reduction: from u1, u2 build u ~ u1+u2, v ~ u1-u2 and a
// measurement (u1^T A u1 - u2^T A u2) / (||u1+u2|| ||u1-u2||), emitting
// (n^2 * measurement, u, v). Exposed for direct testing.
void two_sample_term(const GroundTruth& truth, const Vector& u1,
                     const Vector& u2, SampleOp& out);

struct AvcProbe {
  double estimate_a = 0.0, bound_a = 0.0, rel_se_a = 0.0;
  double estimate_r = 0.0, bound_r = 0.0, rel_se_r = 0.0;
  bool pass_a = false, pass_r = false;
};

struct AvcReport {
  std::vector<AvcProbe> probes;
  VarianceParams params;
  bool all_pass = false;
};

// Monte Carlo check of the variance conditions
//   E[y^T A~^T W A~ y] <= sigma_a^2 tr(W) ||y||^2
//   E[(y^T A~ y)^2]    <= sigma_r^2 ||y||^4
// over random unit y and random PSD W = c0 I + c1 A + c2 A^2 (commuting with
// A by construction). A probe passes when estimate <= bound * (1 + 3 rel SE).
AvcReport empirical_avc_check(const Sampler& sampler, std::size_t num_pairs,
                              std::size_t num_draws, Rng& rng,
                              std::optional<VarianceParams> params_override = {});

}  // namespace alecton
