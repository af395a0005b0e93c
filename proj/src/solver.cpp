#include "alecton/solver.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace alecton {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

// B = S1 * S2 as a general small matrix (product of symmetrics need not be
// symmetric).
TallMatrix small_product(const SmallSymmetric& s1, const SmallSymmetric& s2) {
  const std::size_t p = s1.size();
  TallMatrix out(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < p; ++k) acc += s1(i, k) * s2(k, j);
      out(i, j) = acc;
    }
  return out;
}

SmallSymmetric sandwich(const SmallSymmetric& outer, const SmallSymmetric& mid) {
  // outer * mid * outer, symmetric when outer and mid are.
  TallMatrix om = small_product(outer, mid);
  const std::size_t p = outer.size();
  TallMatrix full(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < p; ++k) acc += om(i, k) * outer(k, j);
      full(i, j) = acc;
    }
  return SmallSymmetric::from_dense(full);
}

void validate_config(const AlectonConfig& c, std::size_t n) {
  if (c.p < 1 || c.p > n) throw ParameterError("config: need 1 <= p <= n");
  if (c.q < 1 || c.q > c.p) throw ParameterError("config: need 1 <= q <= p");
  if (!(c.epsilon > 0.0 && c.epsilon < 1.0))
    throw ParameterError("config: epsilon must be in (0, 1)");
  if (!(c.eta >= 0.0) || !std::isfinite(c.eta))
    throw ParameterError("config: eta must be finite and >= 0");
}

constexpr std::size_t kOverflowCheckInterval = 256;
constexpr double kOverflowLimit = 1e100;

void check_finite(const TallMatrix& y, std::size_t step) {
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) {
      double v = y(i, j);
      if (!std::isfinite(v) || std::abs(v) > kOverflowLimit)
        throw DivergenceError(
            "angular_phase: iterate magnitude exceeded 1e100 at step " +
                std::to_string(step) + " (reduce eta)",
            step);
    }
}

}  // namespace

StepSizeReport compute_gamma(double eta, std::size_t n, std::size_t p,
                             double epsilon, double sigma_a_sq, double delta) {
  if (!(delta > 0.0)) throw ParameterError("compute_gamma: delta must be > 0");
  if (!(epsilon > 0.0 && epsilon < 1.0))
    throw ParameterError("compute_gamma: epsilon must be in (0, 1)");
  if (!(eta >= 0.0)) throw ParameterError("compute_gamma: eta must be >= 0");
  if (!(sigma_a_sq >= 0.0))
    throw ParameterError("compute_gamma: sigma_a_sq must be >= 0");
  if (p < 1) throw ParameterError("compute_gamma: p must be >= 1");

  double pd = static_cast<double>(p);
  double coeff = 2.0 * static_cast<double>(n) * sigma_a_sq * pd * pd *
                 (pd + epsilon) / (delta * epsilon);
  StepSizeReport r;
  r.gamma = coeff * eta;
  r.satisfied = r.gamma <= 1.0;
  r.eta_max = coeff > 0.0 ? 1.0 / coeff : std::numeric_limits<double>::infinity();
  return r;
}

SuccessCheck success_metric(const TallMatrix& y, const TallMatrix& basis,
                            double epsilon) {
  if (basis.rows() != y.rows())
    throw DimensionError("success_metric: dimension mismatch");
  TallMatrix c = transpose_times(basis, y);  // q x p
  SmallSymmetric m = gram(c);                // Y^T U Y
  SmallSymmetric gis = inv_sqrt_psd(gram(y));
  SuccessCheck out;
  out.lambda_min_ratio = small_eigs(sandwich(gis, m)).back();
  out.succeeded = out.lambda_min_ratio >= 1.0 - epsilon;
  return out;
}

double tau_metric(const TallMatrix& y, const TallMatrix& basis, double gamma,
                  std::size_t n, std::size_t p, std::size_t q) {
  if (basis.rows() != y.rows())
    throw DimensionError("tau_metric: dimension mismatch");
  double c = gamma * static_cast<double>(q) /
             (static_cast<double>(n) * static_cast<double>(p) *
              static_cast<double>(p));
  if (!(c > 0.0 && c <= 1.0))
    throw ParameterError("tau_metric: gamma q / (n p^2) must be in (0, 1]");
  TallMatrix cross = transpose_times(basis, y);
  SmallSymmetric num = gram(cross);  // Y^T U Y
  SmallSymmetric g = gram(y);
  SmallSymmetric den(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < g.size(); ++j)
      den(i, j) = c * g(i, j) + (1.0 - c) * num(i, j);
  double d = det_small(den);
  if (d <= 0.0)
    throw RankDeficiencyError("tau_metric: Y^T W Y numerically singular");
  double tau = det_small(num) / d;
  if (tau < 0.0) tau = 0.0;
  if (tau > 1.0) tau = 1.0;  // exact range; clamp float spill
  return tau;
}

AngularResult angular_phase(const Sampler& sampler, const AlectonConfig& config,
                            const TraceProbe* probe, double stop_rho) {
  const std::size_t n = sampler.dim();
  validate_config(config, n);
  if (config.p > 1 && sampler.stochastic_rank() > 1)
    throw ConfigError(
        "angular_phase: multi-term samples require p == 1 (rank condition)");
  if (probe && probe->dominant && probe->dominant->rows() != n)
    throw DimensionError("angular_phase: probe basis dimension mismatch");

  Rng rng_init = Rng::derive(config.seed, 0);
  Rng rng_draw = Rng::derive(config.seed, 1);
  TallMatrix y = random_orthonormal(n, config.p, rng_init);

  AngularResult out;
  const auto start = Clock::now();
  bool stopped = false;

  auto record = [&](std::size_t step) -> std::optional<double> {
    TraceRecord rec;
    rec.step = step;
    rec.wall_ms = ms_since(start);
    if (probe && probe->dominant) {
      rec.rho =
          success_metric(y, *probe->dominant, probe->epsilon).lambda_min_ratio;
      if (probe->tau_coefficient) {
        double c = *probe->tau_coefficient;
        // tau_metric re-derives c from (gamma, n, p, q); feed it c directly
        // through gamma = c * n p^2 / q.
        double gamma_equiv = c * static_cast<double>(n) *
                             static_cast<double>(config.p) *
                             static_cast<double>(config.p) /
                             static_cast<double>(config.q);
        rec.tau = tau_metric(y, *probe->dominant, gamma_equiv, n, config.p,
                             config.q);
      }
    }
    out.trace.records.push_back(rec);
    return rec.rho;
  };

  record(0);
  SampleOp op;
  std::size_t k = 0;
  for (k = 1; k <= config.k_steps; ++k) {
    sampler.draw(rng_draw, op);
    op.apply_scaled(y, config.eta);

    if (k % kOverflowCheckInterval == 0) check_finite(y, k);
    if (config.renorm_every > 0 && k % config.renorm_every == 0 &&
        k != config.k_steps) {
      check_finite(y, k);
      y = orthonormalize(y);
    }
    if (config.trace_every > 0 && k % config.trace_every == 0 &&
        k != config.k_steps) {
      check_finite(y, k);
      std::optional<double> rho = record(k);
      if (stop_rho >= 0.0 && rho && *rho >= stop_rho) {
        stopped = true;
        break;
      }
    }
  }
  if (!stopped) k = config.k_steps;
  check_finite(y, k);
  if (out.trace.records.back().step != k) record(k);
  out.steps_run = k;
  out.y_hat = orthonormalize(y);
  return out;
}

SmallSymmetric radial_phase(const Sampler& sampler, const TallMatrix& y_hat,
                            std::size_t l_steps, Rng& rng) {
  if (l_steps < 1) throw ParameterError("radial_phase: need l_steps >= 1");
  if (y_hat.rows() != sampler.dim())
    throw DimensionError("radial_phase: dimension mismatch");
  const std::size_t p = y_hat.cols();
  TallMatrix acc(p, p);
  SampleOp op;
  const double w = 1.0 / static_cast<double>(l_steps);
  for (std::size_t l = 0; l < l_steps; ++l) {
    sampler.draw(rng, op);
    op.accumulate_compressed(y_hat, acc, w);
  }
  return SmallSymmetric::from_dense(acc);
}

AssembleResult assemble(const TallMatrix& y_hat, const SmallSymmetric& r_bar) {
  if (y_hat.cols() != r_bar.size())
    throw DimensionError("assemble: rank mismatch");
  AssembleResult out;
  SmallSymmetric root = sqrt_psd_clipped(r_bar, &out.clipped);
  out.factor = times_small(y_hat, root);
  return out;
}

RecoveryResult recover(const Sampler& sampler, const AlectonConfig& config,
                       const RecoverOptions& opts) {
  const std::size_t n = sampler.dim();
  validate_config(config, n);

  RecoveryResult out;
  bool gate_evaluated = false;
  std::string gate_failure;
  try {
    double sigma_a_sq;
    if (opts.sigma_a_sq_override) {
      sigma_a_sq = *opts.sigma_a_sq_override;
    } else {
      VarianceParams vp = sampler.variance_params();
      sigma_a_sq = vp.sigma_a_sq;
    }
    double delta;
    if (opts.delta_override) {
      delta = *opts.delta_override;
    } else {
      std::optional<double> gap = sampler.truth().eigengap(config.q);
      if (!gap)
        throw ConfigError("recover: eigengap unavailable for this target");
      delta = *gap;
    }
    out.step_size =
        compute_gamma(config.eta, n, config.p, config.epsilon, sigma_a_sq, delta);
    gate_evaluated = true;
  } catch (const std::exception& e) {
    if (!opts.force) throw;
    gate_failure = e.what();
  }
  if (gate_evaluated && !out.step_size.satisfied && !opts.force)
    throw ConfigError(
        "recover: step-size condition violated (gamma = " +
        std::to_string(out.step_size.gamma) + " > 1, eta_max = " +
        std::to_string(out.step_size.eta_max) + "); pass force to override");
  if (!gate_evaluated) {
    out.step_size.gamma = std::numeric_limits<double>::quiet_NaN();
    out.step_size.satisfied = false;
    out.step_size.eta_max = std::numeric_limits<double>::quiet_NaN();
  }

  TraceProbe probe;
  std::optional<TallMatrix> dominant;
  if (opts.diagnostics) {
    dominant = sampler.truth().dominant_basis(config.q);
    if (dominant) {
      probe.dominant = &*dominant;
      probe.epsilon = config.epsilon;
      if (gate_evaluated && out.step_size.gamma > 0.0) {
        double c = out.step_size.gamma * static_cast<double>(config.q) /
                   (static_cast<double>(n) * static_cast<double>(config.p) *
                    static_cast<double>(config.p));
        if (c > 0.0 && c <= 1.0) probe.tau_coefficient = c;
      }
    }
  }

  AngularResult ang = angular_phase(
      sampler, config, probe.dominant ? &probe : nullptr, opts.stop_rho);
  out.y_hat = std::move(ang.y_hat);
  out.trace = std::move(ang.trace);
  out.steps_run = ang.steps_run;

  if (!opts.angular_only) {
    if (config.l_steps < 1)
      throw ParameterError("recover: l_steps must be >= 1 for the radial phase");
    Rng rng_radial = Rng::derive(config.seed, 2);
    out.r_bar = radial_phase(sampler, out.y_hat, config.l_steps, rng_radial);
    AssembleResult asm_out = assemble(out.y_hat, *out.r_bar);
    out.factor = std::move(asm_out.factor);
    out.clipped = asm_out.clipped;
  }
  return out;
}

OaatResult one_at_a_time(const Sampler& base, std::size_t count,
                         const AlectonConfig& config,
                         const RecoverOptions& opts) {
  if (config.p != 1)
    throw ConfigError("one_at_a_time: per-component recovery requires p == 1");
  if (count < 1) throw ParameterError("one_at_a_time: count must be >= 1");
  const GroundTruth& truth = base.truth();
  const std::size_t n = base.dim();

  // Ideal spectrum of the deflated target, for per-component step gates.
  auto lam = [&](std::size_t i) -> double {  // 0-indexed
    if (truth.kind() == GroundTruth::Kind::Rect) return 0.0;
    if (i >= truth.rank()) return 0.0;
    return truth.kind() == GroundTruth::Kind::Spectral ? truth.eigenvalues()[i]
                                                       : 1.0;
  };

  OaatResult out;
  const auto start = Clock::now();
  for (std::size_t c = 0; c < count; ++c) {
    Sampler deflated = base.deflated(out.components);
    AlectonConfig cc = config;
    cc.seed = splitmix64(config.seed ^ (0x0AA7ULL + c));

    RecoverOptions ro = opts;
    if (!ro.delta_override && truth.kind() != GroundTruth::Kind::Rect) {
      double gap = lam(c) - lam(c + 1);
      if (gap > 0.0) ro.delta_override = gap;
    }
    double t0 = ms_since(start);
    RecoveryResult rec = recover(deflated, cc, ro);
    if (!rec.factor)
      throw ConfigError("one_at_a_time: radial phase required per component");
    out.components.push_back(rec.factor->col(0));

    OaatComponent stat;
    stat.steps = rec.steps_run;
    stat.wall_ms = ms_since(start) - t0;

    // || sum_j y_j y_j^T - A ||_F via inner products; no n x n matrix.
    double cross = 0.0;
    for (const Vector& ya : out.components)
      for (const Vector& yb : out.components) {
        double d = dot(ya, yb);
        cross += d * d;
      }
    double mixed = 0.0;
    Vector tmp(n);
    for (const Vector& ya : out.components) {
      truth.matvec(ya, tmp);
      mixed += dot(ya, tmp);
    }
    double dist_sq = cross - 2.0 * mixed + truth.frob_sq();
    stat.residual_fro =
        std::sqrt(std::max(0.0, dist_sq)) / std::sqrt(truth.frob_sq());
    out.stats.push_back(stat);
  }
  return out;
}

}  // namespace alecton
