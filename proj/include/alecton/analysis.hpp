#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "alecton/sampling.hpp"
#include "alecton/solver.hpp"

namespace alecton {

// Complementary error function, accurate to ~1e-14 relative: Maclaurin
// series for small arguments, Lentz continued fraction beyond.
double erfc(double x);

// Z_1(gamma) = sqrt(2 pi gamma) exp(gamma/2) erfc(sqrt(gamma/2)).
double z1_closed_form(double gamma);

struct ZpEstimate {
  std::size_t p = 0;
  double gamma = 0.0;
  std::size_t num_samples = 0;
  double value = 0.0;
  double std_err = 0.0;
};

// Z_p(gamma) = 2 (1 - E[det(I + (gamma/p) (R^T R)^{-1})^{-1}]) over p x p
// standard gaussian R, evaluated through the equivalent ratio
// det(R^T R) / det(R^T R + (gamma/p) I) which needs no inversion.
ZpEstimate zp_monte_carlo(std::size_t p, double gamma, std::size_t num_samples,
                          Rng& rng);

struct FailureBoundReport {
  double zp_term = 0.0;
  double log_term = 0.0;
  double total = 0.0;
  double log_arg = 0.0;
  bool log_arg_flagged = false;  // log argument <= 1: bound vacuous
};

// Angular failure probability bound at step budget t:
//   Z_p(gamma) + [4 n sigma_a^2 p^2 (p+eps) / (delta^2 gamma eps t)]
//                 * ln(n p^2 / (gamma q eps)).
FailureBoundReport failure_bound(double t, double gamma, std::size_t n,
                                 std::size_t p, std::size_t q, double epsilon,
                                 double sigma_a_sq, double delta,
                                 double zp_value);

struct TrialOutcome {
  bool converged = false;
  std::size_t steps_to_success = 0;  // step budget when not converged
};

struct FailureRateReport {
  std::size_t trials = 0, failures = 0;
  double rate = 0.0;
  double wilson_low = 0.0, wilson_high = 0.0;
  std::vector<TrialOutcome> outcomes;
};

// Wilson 95% score interval for a binomial proportion.
void wilson_interval(std::size_t successes, std::size_t trials, double* low,
                     double* high);

// Runs `trials` independent angular phases (per-trial derived seeds) and
// counts the runs whose recorded rho never reaches 1 - epsilon within the
// configured step budget. config.trace_every sets the observation cadence.
FailureRateReport empirical_failure_rate(const Sampler& sampler,
                                         const AlectonConfig& config,
                                         const TallMatrix& dominant,
                                         std::size_t trials);

struct DivergenceReport {
  std::vector<double> iterates;     // x_0 ... x_last
  bool bound_held = false;          // x_k^2 > C^{2k} (C+1) / alpha throughout
  bool overflowed = false;          // |x| exceeded 1e100
  std::size_t steps_to_overflow = 0;
};

// x_{k+1} = (1 - alpha x_k^2) x_k with constant alpha. With growth factor
// C > 1 and x_0^2 >= (C+1)/alpha the iterates provably explode; the report
// checks the certified growth floor each step and stops at overflow.
DivergenceReport divergence_demo(double alpha, double growth, double x0,
                                 std::size_t max_steps);

struct StuckReport {
  std::vector<double> first_coordinate;
  std::vector<double> distance;  // || y y^T - diag(4, 0) ||_F per step
  bool first_coordinate_zero_throughout = false;
  double final_distance = 0.0;
};

// Gradient descent on || y y^T - A ||_F^2 with A = diag(4, 1):
// y <- y - 4 alpha_k (y ||y||^2 - A y). The e1 coordinate is multiplied by
// a scalar each step, so an exactly-zero start stays exactly zero and the
// iteration converges to the spurious point +-e2 instead of +-2 e1.
StuckReport stuck_demo(const std::function<double(std::size_t)>& alpha_schedule,
                       const Vector& y0, std::size_t steps);

struct LowerBoundReport {
  double mean_rho = 0.0;
  double std_err = 0.0;
  double floor = 0.0;  // sigma^2 / (sigma^2 n + C^2 K)
  double sigma_sq = 0.0;  // measured directional second-moment constant
  double c_bound = 0.0;   // operator-norm bound on samples
  bool floor_respected = false;  // mean_rho >= floor - 3 std_err
};

// Alignment floor experiment: a bounded unbiased sampler
// A~ = A + zeta (u v^T + v u^T), v uniform on the sphere, u a fixed
// non-top eigenvector of A = diag(1, 1/4, ..., 1/4). No step-size schedule
// can push E[(u^T Y_K)^2 / ||Y_K||^2] below sigma^2 / (sigma^2 n + C^2 K).
// sigma^2 is measured empirically and C is verified on sample draws before
// the trials run. Requires n in [2, 64].
LowerBoundReport lower_bound_experiment(
    std::size_t n, std::size_t k_steps,
    const std::function<double(std::size_t)>& eta_schedule, std::size_t trials,
    std::uint64_t seed);

}  // namespace alecton
