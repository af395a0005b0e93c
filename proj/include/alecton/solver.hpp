#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "alecton/linalg.hpp"
#include "alecton/sampling.hpp"

namespace alecton {

struct AlectonConfig {
  std::size_t p = 1;        // recovery rank
  std::size_t q = 1;        // target eigenspace size, q <= p
  double epsilon = 0.1;     // success threshold 1 - epsilon
  double eta = 0.0;         // step size
  std::size_t k_steps = 0;  // angular iterations
  std::size_t l_steps = 0;  // radial averaging samples
  std::uint64_t seed = 0;
  std::size_t renorm_every = 1000;  // 0: never renormalize
  std::size_t trace_every = 0;      // 0: only initial and final records
};

struct StepSizeReport {
  double gamma = 0.0;
  bool satisfied = false;  // gamma <= 1
  double eta_max = 0.0;    // step size at which gamma hits 1
};

// gamma = 2 n sigma_a^2 p^2 (p + epsilon) eta / (delta epsilon).
// Requires delta > 0, epsilon in (0,1), eta >= 0, sigma_a_sq >= 0.
StepSizeReport compute_gamma(double eta, std::size_t n, std::size_t p,
                             double epsilon, double sigma_a_sq, double delta);

struct TraceRecord {
  std::size_t step = 0;
  std::optional<double> rho;  // min-Rayleigh alignment with the target space
  std::optional<double> tau;  // determinant diagnostic
  double wall_ms = 0.0;
};

struct ConvergenceTrace {
  std::vector<TraceRecord> records;
};

struct SuccessCheck {
  double lambda_min_ratio = 0.0;
  bool succeeded = false;
};

// lambda_min(G^{-1/2} (Y^T U Y) G^{-1/2}) with G = Y^T Y, U the projector
// onto the span of `basis` (orthonormal columns). Success means the ratio
// reaches 1 - epsilon: every direction in span(Y) is nearly inside span(U).
SuccessCheck success_metric(const TallMatrix& y, const TallMatrix& basis,
                            double epsilon);

// det(Y^T U Y) / det(Y^T W Y) with W = c I + (1 - c) U, c = gamma q / (n p^2).
// In [0, 1]; equals 1 exactly on span(U). Requires c in (0, 1].
double tau_metric(const TallMatrix& y, const TallMatrix& basis, double gamma,
                  std::size_t n, std::size_t p, std::size_t q);

// Observation hook for the angular phase: when present, rho (and tau when
// tau_coefficient is set) is recorded at the trace cadence.
struct TraceProbe {
  const TallMatrix* dominant = nullptr;  // n x q orthonormal
  double epsilon = 0.1;
  std::optional<double> tau_coefficient;  // c = gamma q / (n p^2)
};

struct AngularResult {
  TallMatrix y_hat;  // orthonormalized final iterate
  ConvergenceTrace trace;
  std::size_t steps_run = 0;
};

// Y_{k+1} = Y_k + eta A~_k Y_k from a random orthonormal start, followed by
// final orthonormalization. Initialization and sampling use Rng streams 0
// and 1 derived from config.seed. When stop_rho >= 0 and a probe is given,
// the loop exits early at the first recorded rho >= stop_rho.
AngularResult angular_phase(const Sampler& sampler, const AlectonConfig& config,
                            const TraceProbe* probe = nullptr,
                            double stop_rho = -1.0);

// (1/L) sum of Yhat^T A~_l Yhat, symmetrized.
SmallSymmetric radial_phase(const Sampler& sampler, const TallMatrix& y_hat,
                            std::size_t l_steps, Rng& rng);

struct AssembleResult {
  TallMatrix factor;  // Yhat * Rbar^{1/2}
  int clipped = 0;    // negative eigenvalues of Rbar clipped to zero
};

AssembleResult assemble(const TallMatrix& y_hat, const SmallSymmetric& r_bar);

struct RecoverOptions {
  bool force = false;         // run even when the step-size rule fails
  bool angular_only = false;  // skip the radial phase
  bool diagnostics = true;    // record rho/tau when the truth provides a basis
  std::optional<double> sigma_a_sq_override;
  std::optional<double> delta_override;
  double stop_rho = -1.0;
};

struct RecoveryResult {
  TallMatrix y_hat;
  std::optional<SmallSymmetric> r_bar;
  std::optional<TallMatrix> factor;
  ConvergenceTrace trace;
  StepSizeReport step_size;
  std::size_t steps_run = 0;
  int clipped = 0;
};

// Full two-phase recovery with the step-size gate. The gate needs sigma_a^2
// (from the sampler's variance parameters unless overridden) and the
// eigengap at q (from the truth unless overridden); if either is unavailable
// or gamma > 1, the run is refused unless opts.force is set.
RecoveryResult recover(const Sampler& sampler, const AlectonConfig& config,
                       const RecoverOptions& opts = {});

struct OaatComponent {
  std::size_t steps = 0;
  double residual_fro = 0.0;  // ||sum_j y_j y_j^T - A||_F / ||A||_F
  double wall_ms = 0.0;
};

struct OaatResult {
  std::vector<Vector> components;
  std::vector<OaatComponent> stats;
};

// Rank-1 recoveries with deflation: component c runs against the base
// distribution minus the previously recovered outer products. Requires
// config.p == 1. Per-component step-size inputs come from the truth's
// spectrum when available.
OaatResult one_at_a_time(const Sampler& base, std::size_t count,
                         const AlectonConfig& config,
                         const RecoverOptions& opts = {});

}  // namespace alecton
