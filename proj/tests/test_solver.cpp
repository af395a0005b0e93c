#include <cmath>
#include <memory>

#include "alecton/solver.hpp"
#include "doctest.h"

using namespace alecton;

namespace {

std::shared_ptr<const GroundTruth> share(GroundTruth g) {
  return std::make_shared<const GroundTruth>(std::move(g));
}

TallMatrix identity_cols(std::size_t n, std::size_t p) {
  TallMatrix b(n, p);
  for (std::size_t j = 0; j < p; ++j) b(j, j) = 1.0;
  return b;
}

TallMatrix densify(const GroundTruth& g) {
  TallMatrix a(g.dim(), g.dim());
  for (std::size_t i = 0; i < g.dim(); ++i)
    for (std::size_t j = 0; j < g.dim(); ++j) a(i, j) = g.entry(i, j);
  return a;
}

TallMatrix dense_times(const TallMatrix& a, const TallMatrix& y) {
  TallMatrix out(y.rows(), y.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < y.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) acc += a(i, k) * y(k, j);
      out(i, j) = acc;
    }
  return out;
}

// capture the initial iterate of a run with this seed and width
TallMatrix initial_iterate(const Sampler& s, const AlectonConfig& base) {
  AlectonConfig c = base;
  c.k_steps = 0;
  return angular_phase(s, c).y_hat;
}

}  // namespace

TEST_CASE("compute_gamma applies the step-size rule") {
  StepSizeReport r = compute_gamma(1e-5, 100, 1, 0.1, 1.0, 1.0);
  // 2 * 100 * 1 * 1.1 * 1e-5 / (1 * 0.1)
  CHECK(r.gamma == doctest::Approx(0.022).epsilon(1e-12));
  CHECK(r.satisfied);
  CHECK(r.eta_max == doctest::Approx(1e-5 / 0.022).epsilon(1e-12));

  StepSizeReport at_max = compute_gamma(r.eta_max, 100, 1, 0.1, 1.0, 1.0);
  CHECK(at_max.gamma == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(at_max.satisfied);

  StepSizeReport doubled = compute_gamma(2e-5, 100, 1, 0.1, 1.0, 1.0);
  CHECK(doubled.gamma == doctest::Approx(2.0 * r.gamma).epsilon(1e-12));
  CHECK(doubled.satisfied);

  CHECK_FALSE(compute_gamma(0.1, 100, 1, 0.1, 1.0, 1.0).satisfied);

  CHECK_THROWS_AS(compute_gamma(1e-5, 100, 1, 0.1, 1.0, 0.0), ParameterError);
  CHECK_THROWS_AS(compute_gamma(1e-5, 100, 1, 0.1, 1.0, -1.0), ParameterError);
  CHECK_THROWS_AS(compute_gamma(1e-5, 100, 1, 1.5, 1.0, 1.0), ParameterError);
  CHECK_THROWS_AS(compute_gamma(-1e-5, 100, 1, 0.1, 1.0, 1.0), ParameterError);
}

TEST_CASE("success metric is the min Rayleigh quotient in the target space") {
  TallMatrix basis = identity_cols(2, 1);

  double theta = M_PI / 6.0;
  TallMatrix y(2, 1);
  y(0, 0) = std::cos(theta);
  y(1, 0) = std::sin(theta);
  SuccessCheck c = success_metric(y, basis, 0.1);
  CHECK(c.lambda_min_ratio == doctest::Approx(0.75).epsilon(1e-12));
  CHECK_FALSE(c.succeeded);

  y(0, 0) = -2.5;
  y(1, 0) = 0.0;
  c = success_metric(y, basis, 0.1);
  CHECK(c.lambda_min_ratio == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(c.succeeded);

  y(0, 0) = 0.0;
  y(1, 0) = 1.0;
  CHECK(success_metric(y, basis, 0.1).lambda_min_ratio ==
        doctest::Approx(0.0).epsilon(1e-12));

  // invariant under a change of basis of the iterate
  Rng rng(17);
  TallMatrix big = random_orthonormal(10, 3, rng);
  TallMatrix yy(10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    yy(i, 0) = big(i, 0) + 0.2 * big(i, 2);
    yy(i, 1) = big(i, 1) - 0.1 * big(i, 2);
  }
  TallMatrix target(10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    target(i, 0) = big(i, 0);
    target(i, 1) = big(i, 1);
  }
  double base_ratio = success_metric(yy, target, 0.1).lambda_min_ratio;
  TallMatrix mixed(10, 2);
  for (std::size_t i = 0; i < 10; ++i) {
    mixed(i, 0) = 2.0 * yy(i, 0) + yy(i, 1);
    mixed(i, 1) = -yy(i, 0) + 0.5 * yy(i, 1);
  }
  CHECK(success_metric(mixed, target, 0.1).lambda_min_ratio ==
        doctest::Approx(base_ratio).epsilon(1e-8));

  TallMatrix degenerate(10, 2);
  for (std::size_t i = 0; i < 10; ++i)
    degenerate(i, 0) = degenerate(i, 1) = big(i, 0);
  CHECK_THROWS_AS(success_metric(degenerate, target, 0.1),
                  RankDeficiencyError);
  CHECK_THROWS_AS(success_metric(yy, identity_cols(4, 2), 0.1),
                  DimensionError);
}

TEST_CASE("determinant diagnostic on fixed vectors") {
  TallMatrix basis = identity_cols(2, 1);
  double r2 = 1.0 / std::sqrt(2.0);
  TallMatrix y(2, 1);
  y(0, 0) = r2;
  y(1, 0) = r2;
  // c = gamma q / (n p^2) = 0.1; 0.5 / (0.1 + 0.9 * 0.5)
  CHECK(tau_metric(y, basis, 0.2, 2, 1, 1) ==
        doctest::Approx(0.9090909090909091).epsilon(1e-12));

  y(0, 0) = 1.0;
  y(1, 0) = 0.0;
  CHECK(tau_metric(y, basis, 0.2, 2, 1, 1) == doctest::Approx(1.0));
  y(0, 0) = 0.0;
  y(1, 0) = 3.0;
  CHECK(tau_metric(y, basis, 0.2, 2, 1, 1) == doctest::Approx(0.0));

  CHECK_THROWS_AS(tau_metric(y, basis, 0.0, 2, 1, 1), ParameterError);
  CHECK_THROWS_AS(tau_metric(y, basis, 30.0, 2, 1, 1), ParameterError);
}

TEST_CASE("angular phase is exact power iteration under exact sampling") {
  auto truth = share(GroundTruth::spectral({4.0, 1.0}, identity_cols(2, 2)));
  Sampler s = Sampler::exact(truth);

  AlectonConfig c;
  c.p = 1;
  c.q = 1;
  c.eta = 0.01;
  c.k_steps = 100;
  c.renorm_every = 0;
  c.seed = 2024;

  TallMatrix y0 = initial_iterate(s, c);
  AngularResult res = angular_phase(s, c);
  CHECK(res.steps_run == 100);

  double g0 = std::pow(1.04, 100.0) * y0(0, 0);
  double g1 = std::pow(1.01, 100.0) * y0(1, 0);
  double nrm = std::hypot(g0, g1);
  CHECK(res.y_hat(0, 0) == doctest::Approx(g0 / nrm).epsilon(1e-8));
  CHECK(res.y_hat(1, 0) == doctest::Approx(g1 / nrm).epsilon(1e-8));
}

TEST_CASE("angular phase matches a dense reference for p = 2") {
  Rng rng(55);
  auto truth = share(GroundTruth::spectral({4.0, 3.0, 2.0, 1.0},
                                           random_orthonormal(16, 4, rng)));
  Sampler s = Sampler::exact(truth);

  AlectonConfig c;
  c.p = 2;
  c.q = 2;
  c.eta = 1e-3;
  c.k_steps = 1000;
  c.renorm_every = 200;
  c.seed = 77;

  TallMatrix y = initial_iterate(s, c);
  AngularResult res = angular_phase(s, c);

  TallMatrix a = densify(*truth);
  for (std::size_t k = 0; k < c.k_steps; ++k) {
    TallMatrix ay = dense_times(a, y);
    for (std::size_t i = 0; i < 16; ++i)
      for (std::size_t j = 0; j < 2; ++j) y(i, j) += c.eta * ay(i, j);
  }
  TallMatrix q_ref = orthonormalize(y);
  CHECK(success_metric(res.y_hat, q_ref, 0.1).lambda_min_ratio >=
        1.0 - 1e-8);
}

TEST_CASE("zero step size returns the initial iterate") {
  auto truth = share(GroundTruth::spectral({2.0, 1.0}, identity_cols(3, 2)));
  Sampler s = Sampler::entrywise(truth);
  AlectonConfig c;
  c.p = 2;
  c.q = 1;
  c.eta = 0.0;
  c.k_steps = 5;
  c.seed = 5;
  // entrywise emits rank-1 samples, so p = 2 is allowed here
  TallMatrix y0 = initial_iterate(s, c);
  AngularResult res = angular_phase(s, c);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      CHECK(res.y_hat(i, j) == doctest::Approx(y0(i, j)).epsilon(1e-12));
}

TEST_CASE("renormalization cadence does not move the column space") {
  auto truth = share(GroundTruth::spectral({4.0, 1.0}, identity_cols(4, 2)));
  Sampler s = Sampler::exact(truth);
  AlectonConfig c;
  c.p = 2;
  c.q = 2;
  c.eta = 0.005;
  c.k_steps = 200;
  c.seed = 31;

  c.renorm_every = 0;
  TallMatrix never = angular_phase(s, c).y_hat;
  c.renorm_every = 10;
  TallMatrix often = angular_phase(s, c).y_hat;
  CHECK(success_metric(often, never, 0.1).lambda_min_ratio >= 1.0 - 1e-9);
}

TEST_CASE("multi-term samples are rejected for p > 1") {
  auto rect = share(GroundTruth::rect(2, 2, {{0, 0, 2.0}, {1, 1, 1.0}}));
  auto spec = share(GroundTruth::spectral({2.0, 1.0}, identity_cols(4, 2)));

  AlectonConfig c;
  c.p = 2;
  c.q = 1;
  c.eta = 1e-3;
  c.k_steps = 10;

  CHECK_THROWS_AS(angular_phase(Sampler::rect(rect), c), ConfigError);
  CHECK_THROWS_AS(
      angular_phase(Sampler::entrywise(spec).deflated({Vector(4, 0.5)}), c),
      ConfigError);
  CHECK_NOTHROW(angular_phase(Sampler::entrywise(spec), c));

  c.p = 1;
  CHECK_NOTHROW(angular_phase(Sampler::rect(rect), c));
}

TEST_CASE("determinant diagnostic never decreases under exact iteration") {
  auto truth = share(GroundTruth::spectral({4.0, 1.0}, identity_cols(2, 2)));
  Sampler s = Sampler::exact(truth);

  AlectonConfig c;
  c.p = 1;
  c.q = 1;
  c.eta = 0.05;
  c.k_steps = 300;
  c.trace_every = 1;
  c.seed = 8;

  TallMatrix dom = identity_cols(2, 1);
  TraceProbe probe;
  probe.dominant = &dom;
  probe.epsilon = 0.1;
  probe.tau_coefficient = 0.05;

  AngularResult res = angular_phase(s, c, &probe);
  REQUIRE(res.trace.records.size() >= 2);
  for (std::size_t i = 1; i < res.trace.records.size(); ++i) {
    REQUIRE(res.trace.records[i].tau.has_value());
    CHECK(*res.trace.records[i].tau >=
          *res.trace.records[i - 1].tau - 1e-12);
  }
  CHECK(*res.trace.records.back().tau > 0.99);
}

TEST_CASE("trace records cover start, cadence and final step") {
  auto truth = share(GroundTruth::spectral({2.0, 1.0}, identity_cols(2, 2)));
  Sampler s = Sampler::entrywise(truth);
  AlectonConfig c;
  c.eta = 1e-4;
  c.k_steps = 10;
  c.trace_every = 3;
  c.seed = 3;

  AngularResult res = angular_phase(s, c);
  REQUIRE(res.trace.records.size() == 5);
  CHECK(res.trace.records[0].step == 0);
  CHECK(res.trace.records[1].step == 3);
  CHECK(res.trace.records[2].step == 6);
  CHECK(res.trace.records[3].step == 9);
  CHECK(res.trace.records[4].step == 10);

  c.trace_every = 0;
  res = angular_phase(s, c);
  REQUIRE(res.trace.records.size() == 2);
  CHECK(res.trace.records[0].step == 0);
  CHECK(res.trace.records[1].step == 10);

  c.k_steps = 0;
  res = angular_phase(s, c);
  CHECK(res.trace.records.size() == 1);
  CHECK(res.steps_run == 0);
}

TEST_CASE("early stop fires at the first recorded success") {
  auto truth = share(GroundTruth::spectral({4.0, 1.0}, identity_cols(2, 2)));
  Sampler s = Sampler::exact(truth);
  AlectonConfig c;
  c.eta = 0.05;
  c.k_steps = 500;
  c.trace_every = 1;
  c.seed = 12;

  TallMatrix dom = identity_cols(2, 1);
  TraceProbe probe;
  probe.dominant = &dom;

  AngularResult res = angular_phase(s, c, &probe, 0.9);
  CHECK(res.steps_run < 500);
  CHECK(res.trace.records.back().step == res.steps_run);
  CHECK(*res.trace.records.back().rho >= 0.9);
}

TEST_CASE("unstable step sizes raise a divergence error") {
  auto truth = share(GroundTruth::spectral({4.0, 1.0}, identity_cols(2, 2)));
  Sampler s = Sampler::exact(truth);
  AlectonConfig c;
  c.eta = 100.0;
  c.k_steps = 300;
  c.renorm_every = 0;
  c.seed = 4;
  CHECK_THROWS_AS(angular_phase(s, c), DivergenceError);
}

TEST_CASE("radial phase averages the compressed measurements") {
  auto truth = share(GroundTruth::spectral({4.0, 1.0}, identity_cols(2, 2)));
  Sampler s = Sampler::exact(truth);
  TallMatrix y_hat = identity_cols(2, 1);
  Rng rng(6);
  SmallSymmetric r_bar = radial_phase(s, y_hat, 7, rng);
  CHECK(r_bar.size() == 1);
  CHECK(r_bar(0, 0) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK_THROWS_AS(radial_phase(s, y_hat, 0, rng), ParameterError);
}

TEST_CASE("assemble scales the basis by the matrix square root") {
  TallMatrix y_hat = identity_cols(2, 2);
  SmallSymmetric r_bar(2);
  r_bar(0, 0) = 4.0;
  r_bar(1, 1) = 1.0;
  AssembleResult res = assemble(y_hat, r_bar);
  CHECK(res.clipped == 0);
  CHECK(res.factor(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(res.factor(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(res.factor(0, 1) == doctest::Approx(0.0));

  SmallSymmetric neg(1);
  neg(0, 0) = -0.01;
  AssembleResult clipped = assemble(identity_cols(2, 1), neg);
  CHECK(clipped.clipped == 1);
  CHECK(clipped.factor(0, 0) == 0.0);
  CHECK(clipped.factor(1, 0) == 0.0);
}

TEST_CASE("recover rebuilds a low-rank target end to end") {
  Rng rng(91);
  auto truth = share(
      GroundTruth::spectral({4.0, 1.0}, random_orthonormal(6, 2, rng)));
  Sampler s = Sampler::exact(truth);

  AlectonConfig c;
  c.p = 2;
  c.q = 2;
  c.eta = 0.01;
  c.k_steps = 2000;
  c.l_steps = 50;
  c.renorm_every = 100;
  c.seed = 14;

  RecoveryResult res = recover(s, c);
  CHECK(res.step_size.satisfied);
  REQUIRE(res.factor.has_value());
  REQUIRE(res.r_bar.has_value());
  CHECK(res.clipped == 0);

  const TallMatrix& f = *res.factor;
  double err = 0.0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      double rec = 0.0;
      for (std::size_t k = 0; k < 2; ++k) rec += f(i, k) * f(j, k);
      double d = rec - truth->entry(i, j);
      err += d * d;
    }
  CHECK(std::sqrt(err / truth->frob_sq()) < 1e-6);
}

TEST_CASE("the step-size gate refuses infeasible runs unless forced") {
  auto truth = share(GroundTruth::spectral({2.0, 1.0}, identity_cols(2, 2)));
  Sampler s = Sampler::entrywise(truth);

  AlectonConfig c;
  c.eta = 0.01;  // gamma = 2*2*20*1.1*0.01 / 0.1 = 8.8
  c.k_steps = 50;
  c.l_steps = 5;
  c.seed = 2;

  CHECK_THROWS_AS(recover(s, c), ConfigError);

  RecoverOptions force;
  force.force = true;
  RecoveryResult res = recover(s, c, force);
  CHECK_FALSE(res.step_size.satisfied);
  CHECK(res.step_size.gamma == doctest::Approx(8.8).epsilon(1e-12));

  RecoverOptions overridden;
  overridden.sigma_a_sq_override = 1e-4;
  RecoveryResult ok = recover(s, c, overridden);
  CHECK(ok.step_size.satisfied);
}

TEST_CASE("recover needs an eigengap or an override for rect targets") {
  auto rect = share(GroundTruth::rect(2, 2, {{0, 0, 2.0}, {1, 1, 1.0}}));
  Sampler s = Sampler::rect(rect);

  AlectonConfig c;
  c.eta = 1e-4;
  c.k_steps = 100;
  c.l_steps = 10;
  c.seed = 3;

  CHECK_THROWS_AS(recover(s, c), ConfigError);

  RecoverOptions force;
  force.force = true;
  CHECK_NOTHROW(recover(s, c, force));

  RecoverOptions overridden;
  overridden.delta_override = 1.0;
  CHECK_NOTHROW(recover(s, c, overridden));
}

TEST_CASE("angular-only runs skip the radial phase") {
  auto truth = share(GroundTruth::spectral({4.0, 1.0}, identity_cols(2, 2)));
  Sampler s = Sampler::exact(truth);
  AlectonConfig c;
  c.eta = 0.01;
  c.k_steps = 20;
  c.l_steps = 0;
  c.seed = 7;

  RecoverOptions opts;
  opts.angular_only = true;
  RecoveryResult res = recover(s, c, opts);
  CHECK_FALSE(res.r_bar.has_value());
  CHECK_FALSE(res.factor.has_value());

  opts.angular_only = false;
  CHECK_THROWS_AS(recover(s, c, opts), ParameterError);  // l_steps = 0
}

TEST_CASE("sequential rank-1 recovery peels off the spectrum") {
  auto truth = share(GroundTruth::spectral({4.0, 1.0}, identity_cols(2, 2)));
  Sampler s = Sampler::exact(truth);

  AlectonConfig c;
  c.p = 1;
  c.q = 1;
  c.eta = 0.05;
  c.k_steps = 400;
  c.l_steps = 20;
  c.seed = 41;

  OaatResult res = one_at_a_time(s, 2, c);
  REQUIRE(res.components.size() == 2);
  REQUIRE(res.stats.size() == 2);

  CHECK(std::abs(res.components[0][0]) == doctest::Approx(2.0).epsilon(1e-4));
  CHECK(std::abs(res.components[0][1]) == doctest::Approx(0.0).epsilon(1e-4));
  CHECK(std::abs(res.components[1][1]) == doctest::Approx(1.0).epsilon(1e-4));

  CHECK(res.stats[0].residual_fro ==
        doctest::Approx(1.0 / std::sqrt(17.0)).epsilon(1e-4));
  CHECK(res.stats[1].residual_fro < 1e-4);
  CHECK(res.stats[1].residual_fro < res.stats[0].residual_fro);

  AlectonConfig bad = c;
  bad.p = 2;
  CHECK_THROWS_AS(one_at_a_time(s, 2, bad), ConfigError);
  CHECK_THROWS_AS(one_at_a_time(s, 0, c), ParameterError);
  AlectonConfig no_radial = c;
  no_radial.l_steps = 0;
  CHECK_THROWS_AS(one_at_a_time(s, 1, no_radial), ParameterError);
  RecoverOptions angular;
  angular.angular_only = true;
  CHECK_THROWS_AS(one_at_a_time(s, 1, c, angular), ConfigError);
}

TEST_CASE("config validation bounds") {
  auto truth = share(GroundTruth::spectral({2.0, 1.0}, identity_cols(2, 2)));
  Sampler s = Sampler::exact(truth);
  AlectonConfig c;
  c.eta = 0.01;
  c.k_steps = 1;

  c.p = 0;
  CHECK_THROWS_AS(angular_phase(s, c), ParameterError);
  c.p = 3;  // > n
  CHECK_THROWS_AS(angular_phase(s, c), ParameterError);
  c.p = 1;
  c.q = 2;  // > p
  CHECK_THROWS_AS(angular_phase(s, c), ParameterError);
  c.q = 1;
  c.epsilon = 1.0;
  CHECK_THROWS_AS(angular_phase(s, c), ParameterError);
  c.epsilon = 0.1;
  c.eta = -1.0;
  CHECK_THROWS_AS(angular_phase(s, c), ParameterError);
}
