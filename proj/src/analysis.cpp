#include "alecton/analysis.hpp"

#include <algorithm>
#include <cmath>

namespace alecton {

namespace {

double erf_series(double x) {
  // erf(x) = 2/sqrt(pi) sum (-1)^k x^{2k+1} / (k! (2k+1)), |x| < ~2.
  double term = x;
  double sum = x;
  double x2 = x * x;
  for (int k = 1; k < 200; ++k) {
    term *= -x2 / static_cast<double>(k);
    double add = term / static_cast<double>(2 * k + 1);
    sum += add;
    if (std::abs(add) < 1e-18 * std::abs(sum)) break;
  }
  return 2.0 / std::sqrt(M_PI) * sum;
}

double erfc_cf(double x) {
  // erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
  // evaluated with the modified Lentz algorithm.
  const double tiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int k = 1; k < 300; ++k) {
    double a = 0.5 * static_cast<double>(k);
    d = x + a * d;
    if (std::abs(d) < tiny) d = tiny;
    c = x + a / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return std::exp(-x * x) / std::sqrt(M_PI) / f;
}

}  // namespace

double erfc(double x) {
  if (x < 0.0) return 2.0 - erfc(-x);
  if (x < 2.0) return 1.0 - erf_series(x);
  if (x > 27.0) return 0.0;  // below double underflow of exp(-x^2)
  return erfc_cf(x);
}

double z1_closed_form(double gamma) {
  if (!(gamma >= 0.0)) throw ParameterError("z1_closed_form: gamma must be >= 0");
  if (gamma == 0.0) return 0.0;
  double half = 0.5 * gamma;
  return std::sqrt(2.0 * M_PI * gamma) * std::exp(half) *
         alecton::erfc(std::sqrt(half));
}

ZpEstimate zp_monte_carlo(std::size_t p, double gamma, std::size_t num_samples,
                          Rng& rng) {
  if (p < 1 || p > SmallSymmetric::kMaxSize)
    throw ParameterError("zp_monte_carlo: p out of range");
  if (!(gamma >= 0.0)) throw ParameterError("zp_monte_carlo: gamma must be >= 0");
  if (num_samples < 2) throw ParameterError("zp_monte_carlo: need >= 2 samples");

  TallMatrix r(p, p);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t s = 0; s < num_samples; ++s) {
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) r(i, j) = rng.gaussian();
    SmallSymmetric g = gram(r);
    double dg = det_small(g);
    SmallSymmetric shifted = g;
    double shift = gamma / static_cast<double>(p);
    for (std::size_t i = 0; i < p; ++i) shifted(i, i) += shift;
    double ds = det_small(shifted);
    double ratio = ds > 0.0 ? dg / ds : 0.0;
    ratio = std::clamp(ratio, 0.0, 1.0);
    sum += ratio;
    sumsq += ratio * ratio;
  }
  double nd = static_cast<double>(num_samples);
  double mean = sum / nd;
  double var = std::max(0.0, (sumsq - nd * mean * mean) / (nd - 1.0));

  ZpEstimate out;
  out.p = p;
  out.gamma = gamma;
  out.num_samples = num_samples;
  out.value = 2.0 * (1.0 - mean);
  out.std_err = 2.0 * std::sqrt(var / nd);
  return out;
}

FailureBoundReport failure_bound(double t, double gamma, std::size_t n,
                                 std::size_t p, std::size_t q, double epsilon,
                                 double sigma_a_sq, double delta,
                                 double zp_value) {
  if (!(t >= 1.0)) throw ParameterError("failure_bound: t must be >= 1");
  if (!(gamma > 0.0)) throw ParameterError("failure_bound: gamma must be > 0");
  if (!(delta > 0.0)) throw ParameterError("failure_bound: delta must be > 0");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw ParameterError("failure_bound: epsilon must be in (0, 1)");
  if (q < 1 || q > p) throw ParameterError("failure_bound: need 1 <= q <= p");
  if (!(zp_value >= 0.0 && zp_value <= 2.0))
    throw ParameterError("failure_bound: zp_value out of [0, 2]");

  double pd = static_cast<double>(p);
  FailureBoundReport r;
  r.zp_term = zp_value;
  r.log_arg = static_cast<double>(n) * pd * pd /
              (gamma * static_cast<double>(q) * epsilon);
  r.log_arg_flagged = r.log_arg <= 1.0;
  double coeff = 4.0 * static_cast<double>(n) * sigma_a_sq * pd * pd *
                 (pd + epsilon) / (delta * delta * gamma * epsilon * t);
  r.log_term = coeff * std::log(r.log_arg);
  r.total = r.zp_term + r.log_term;
  return r;
}

void wilson_interval(std::size_t successes, std::size_t trials, double* low,
                     double* high) {
  if (trials == 0) throw ParameterError("wilson_interval: no trials");
  if (successes > trials)
    throw ParameterError("wilson_interval: successes exceed trials");
  const double z = 1.9599639845400545;  // 97.5th percentile of N(0, 1)
  double nd = static_cast<double>(trials);
  double phat = static_cast<double>(successes) / nd;
  double z2 = z * z;
  double denom = 1.0 + z2 / nd;
  double center = phat + z2 / (2.0 * nd);
  double half = z * std::sqrt(phat * (1.0 - phat) / nd + z2 / (4.0 * nd * nd));
  if (low) *low = std::max(0.0, (center - half) / denom);
  if (high) *high = std::min(1.0, (center + half) / denom);
}

FailureRateReport empirical_failure_rate(const Sampler& sampler,
                                         const AlectonConfig& config,
                                         const TallMatrix& dominant,
                                         std::size_t trials) {
  if (trials < 1) throw ParameterError("empirical_failure_rate: no trials");
  if (config.trace_every == 0)
    throw ParameterError(
        "empirical_failure_rate: trace_every must be > 0 (observation cadence)");

  FailureRateReport report;
  report.trials = trials;
  TraceProbe probe;
  probe.dominant = &dominant;
  probe.epsilon = config.epsilon;
  const double target = 1.0 - config.epsilon;

  for (std::size_t i = 0; i < trials; ++i) {
    AlectonConfig c = config;
    c.seed = splitmix64(config.seed ^ (0xF417ULL + i));
    AngularResult res = angular_phase(sampler, c, &probe, target);
    TrialOutcome o;
    o.steps_to_success = config.k_steps;
    for (const TraceRecord& rec : res.trace.records) {
      if (rec.rho && *rec.rho >= target) {
        o.converged = true;
        o.steps_to_success = rec.step;
        break;
      }
    }
    if (!o.converged) ++report.failures;
    report.outcomes.push_back(o);
  }
  report.rate =
      static_cast<double>(report.failures) / static_cast<double>(trials);
  wilson_interval(report.failures, trials, &report.wilson_low,
                  &report.wilson_high);
  return report;
}

DivergenceReport divergence_demo(double alpha, double growth, double x0,
                                 std::size_t max_steps) {
  if (!(alpha > 0.0)) throw ParameterError("divergence_demo: alpha must be > 0");
  if (!(growth > 1.0))
    throw ParameterError("divergence_demo: growth factor must be > 1");
  if (!(x0 * x0 >= (growth + 1.0) / alpha))
    throw ParameterError(
        "divergence_demo: need x0^2 >= (growth + 1) / alpha to certify blowup");

  DivergenceReport r;
  r.bound_held = true;
  double x = x0;
  r.iterates.push_back(x);
  double floor = (growth + 1.0) / alpha;  // C^{2k} (C+1) / alpha at k = 0
  for (std::size_t k = 1; k <= max_steps; ++k) {
    x = (1.0 - alpha * x * x) * x;
    r.iterates.push_back(x);
    floor *= growth * growth;
    if (!(x * x > floor)) r.bound_held = false;
    if (std::abs(x) > 1e100) {
      r.overflowed = true;
      r.steps_to_overflow = k;
      break;
    }
  }
  return r;
}

StuckReport stuck_demo(const std::function<double(std::size_t)>& alpha_schedule,
                       const Vector& y0, std::size_t steps) {
  if (y0.size() != 2) throw DimensionError("stuck_demo: y0 must be length 2");
  StuckReport r;
  double y1 = y0[0], y2 = y0[1];
  auto dist = [](double a, double b) {
    // || y y^T - diag(4, 0) ||_F for y = (a, b)
    double d11 = a * a - 4.0, d12 = a * b, d22 = b * b;
    return std::sqrt(d11 * d11 + 2.0 * d12 * d12 + d22 * d22);
  };
  r.first_coordinate.push_back(y1);
  r.distance.push_back(dist(y1, y2));
  r.first_coordinate_zero_throughout = (y1 == 0.0);
  for (std::size_t k = 0; k < steps; ++k) {
    double a = alpha_schedule(k);
    double nsq = y1 * y1 + y2 * y2;
    double g1 = y1 * nsq - 4.0 * y1;  // (y ||y||^2 - A y) with A = diag(4, 1)
    double g2 = y2 * nsq - 1.0 * y2;
    y1 -= 4.0 * a * g1;
    y2 -= 4.0 * a * g2;
    if (y1 != 0.0) r.first_coordinate_zero_throughout &= false;
    r.first_coordinate.push_back(y1);
    r.distance.push_back(dist(y1, y2));
  }
  r.final_distance = r.distance.back();
  return r;
}

LowerBoundReport lower_bound_experiment(
    std::size_t n, std::size_t k_steps,
    const std::function<double(std::size_t)>& eta_schedule, std::size_t trials,
    std::uint64_t seed) {
  if (n < 2 || n > SmallSymmetric::kMaxSize)
    throw ParameterError("lower_bound_experiment: n must be in [2, 64]");
  if (trials < 2) throw ParameterError("lower_bound_experiment: need >= 2 trials");

  const double lambda_top = 1.0, lambda_rest = 0.25, zeta = 0.5;
  const std::size_t u_index = 1;  // u = e2, eigenvalue lambda_rest
  LowerBoundReport report;
  report.c_bound = lambda_top + 2.0 * zeta;

  auto av = [&](const Vector& y, Vector& out) {
    out[0] = lambda_top * y[0];
    for (std::size_t i = 1; i < n; ++i) out[i] = lambda_rest * y[i];
  };
  auto draw_v = [&](Rng& rng, Vector& v) {
    double nv;
    do {
      nv = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        v[i] = rng.gaussian();
        nv += v[i] * v[i];
      }
      nv = std::sqrt(nv);
    } while (nv < 1e-12);
    for (std::size_t i = 0; i < n; ++i) v[i] /= nv;
  };
  // A~ y = A y + zeta (u (v^T y) + v (u^T y))
  auto sample_apply = [&](const Vector& v, const Vector& y, double eta,
                          Vector& scratch, Vector& out) {
    av(y, scratch);
    double vy = dot(v, y);
    double uy = y[u_index];
    for (std::size_t i = 0; i < n; ++i) {
      double s = scratch[i] + zeta * v[i] * uy;
      if (i == u_index) s += zeta * vy;
      out[i] = y[i] + eta * s;
    }
  };

  // Measure the directional second moment E[(A~^T u)(A~^T u)^T] and take its
  // smallest eigenvalue as sigma^2; verify the operator-norm bound C on draws.
  {
    Rng rng = Rng::derive(seed, 0xA0);
    const std::size_t probe_draws = 20000;
    TallMatrix acc(n, n);
    Vector v(n), m(n);
    for (std::size_t d = 0; d < probe_draws; ++d) {
      draw_v(rng, v);
      // A~^T u reduces to A~ u by symmetry.
      double vu = v[u_index];
      for (std::size_t i = 0; i < n; ++i) {
        m[i] = (i == u_index ? lambda_rest : 0.0) + zeta * v[i] * 1.0;
        if (i == u_index) m[i] += zeta * vu;
      }
      // m = A u + zeta (u (v^T u) + v (u^T u)) with u = e_{u_index}
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) acc(i, j) += m[i] * m[j];
    }
    SmallSymmetric mom(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        mom(i, j) = acc(i, j) / static_cast<double>(probe_draws);
    report.sigma_sq = small_eigs(mom).back();

    Vector y(n), scratch(n), out(n);
    for (std::size_t d = 0; d < 1000; ++d) {
      draw_v(rng, v);
      draw_v(rng, y);
      sample_apply(v, y, 1.0, scratch, out);
      // ||y + A~ y|| <= (1 + C) ||y|| must hold; equivalently ||A~ y|| <= C.
      double anorm = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        double ay = out[i] - y[i];
        anorm += ay * ay;
      }
      if (std::sqrt(anorm) > report.c_bound * (1.0 + 1e-9))
        throw NumericError("lower_bound_experiment: operator bound violated");
    }
  }

  double sum = 0.0, sumsq = 0.0;
  Vector y(n), v(n), scratch(n), next(n);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    Rng rng = Rng::derive(seed, 0x1000 + trial);
    draw_v(rng, y);
    for (std::size_t k = 0; k < k_steps; ++k) {
      draw_v(rng, v);
      sample_apply(v, y, eta_schedule(k), scratch, next);
      std::swap(y, next);
      double ny = norm(y);
      if (ny > 1e100 || ny < 1e-100) {  // renormalize; rho is scale-free
        for (std::size_t i = 0; i < n; ++i) y[i] /= ny;
      }
    }
    double rho = y[u_index] * y[u_index] / norm_sq(y);
    sum += rho;
    sumsq += rho * rho;
  }
  double nd = static_cast<double>(trials);
  report.mean_rho = sum / nd;
  double var =
      std::max(0.0, (sumsq - nd * report.mean_rho * report.mean_rho) / (nd - 1.0));
  report.std_err = std::sqrt(var / nd);
  report.floor =
      report.sigma_sq /
      (report.sigma_sq * static_cast<double>(n) +
       report.c_bound * report.c_bound * static_cast<double>(k_steps));
  report.floor_respected =
      report.mean_rho >= report.floor - 3.0 * report.std_err;
  return report;
}

}  // namespace alecton
