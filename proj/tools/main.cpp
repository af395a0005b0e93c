#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "alecton/analysis.hpp"
#include "alecton/errors.hpp"
#include "alecton/io.hpp"
#include "alecton/sampling.hpp"
#include "alecton/solver.hpp"

using namespace alecton;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string ms_string(double ms) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", ms);
  return buf;
}

struct RunOpts {
  std::uint64_t seed = 0;
  std::string out;
  double eta = 0.0;
  std::size_t k_steps = 0;
  std::size_t l_steps = 1000;
  std::size_t p = 1;
  std::int64_t q = -1;  // -1: default to p
  double epsilon = 0.1;
  std::string sampler = "entrywise";
  double noise_add = 0.0, noise_mul = 0.0;
  std::size_t renorm_every = 1000;
  std::int64_t trace_every = -1;  // -1: k_steps / 1000
  bool angular_only = false;
  bool force = false;
  std::size_t threads = 1;
  std::string truth_path, triplets_path;
  std::size_t rows = 0, cols = 0;
  std::size_t m_keep = 0;
};

void add_target_flags(CLI::App* cmd, RunOpts& o) {
  cmd->add_option("--truth", o.truth_path,
                  "spectral ground-truth file (written by synth)");
  cmd->add_option("--triplets", o.triplets_path,
                  "row,col,value entry file (rect sampler only)");
  cmd->add_option("--rows", o.rows, "row count of the triplet matrix");
  cmd->add_option("--cols", o.cols, "column count of the triplet matrix");
  cmd->add_option("--sampler", o.sampler, "sampling model")
      ->check(CLI::IsMember({"exact", "entrywise", "rect", "trace", "trace-sym",
                             "subspace", "subspace-split"}))
      ->capture_default_str();
  cmd->add_option("--m-keep", o.m_keep,
                  "expected coordinates revealed per side (subspace samplers)");
  cmd->add_option("--noise-add", o.noise_add, "additive measurement noise sd")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  cmd->add_option("--noise-mul", o.noise_mul,
                  "multiplicative measurement noise sd")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

void add_run_flags(CLI::App* cmd, RunOpts& o, const char* p_help) {
  cmd->add_option("--seed", o.seed, "master seed; every stream derives from it")
      ->capture_default_str();
  cmd->add_option("--eta", o.eta, "step size")
      ->required()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--k-steps", o.k_steps, "angular iterations")
      ->required()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--l-steps", o.l_steps, "radial averaging draws")
      ->capture_default_str();
  cmd->add_option("--p", o.p, p_help)->capture_default_str();
  cmd->add_option("--q", o.q, "target eigenspace size (default: p)");
  cmd->add_option("--epsilon", o.epsilon, "success threshold is 1 - epsilon")
      ->capture_default_str();
  cmd->add_option("--renorm-every", o.renorm_every,
                  "orthonormalization cadence, 0 = never")
      ->capture_default_str();
  cmd->add_option("--trace-every", o.trace_every,
                  "trace record cadence (default: k-steps/1000)");
  cmd->add_flag("--angular-only", o.angular_only, "skip the radial phase");
  cmd->add_flag("--force", o.force,
                "run even when the step-size rule is unsatisfied or unknown");
  cmd->add_option("--threads", o.threads,
                  "worker threads for independent work items")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--out", o.out, "output CSV path");
}

AlectonConfig make_config(const RunOpts& o) {
  AlectonConfig c;
  c.p = o.p;
  c.q = o.q < 0 ? o.p : static_cast<std::size_t>(o.q);
  c.epsilon = o.epsilon;
  c.eta = o.eta;
  c.k_steps = o.k_steps;
  c.l_steps = o.l_steps;
  c.seed = o.seed;
  c.renorm_every = o.renorm_every;
  c.trace_every = o.trace_every < 0
                      ? std::max<std::size_t>(1, o.k_steps / 1000)
                      : static_cast<std::size_t>(o.trace_every);
  return c;
}

Sampler apply_noise(Sampler s, const RunOpts& o) {
  if (o.noise_add > 0.0 || o.noise_mul > 0.0)
    return s.with_noise(o.noise_add, o.noise_mul);
  return s;
}

Sampler build_sampler(const RunOpts& o, TripletData* td_out = nullptr) {
  if (o.sampler == "rect") {
    if (o.triplets_path.empty() || o.rows == 0 || o.cols == 0)
      throw ConfigError("rect sampling requires --triplets, --rows and --cols");
    TripletData td = read_triplets(o.triplets_path, o.rows, o.cols);
    auto truth = std::make_shared<GroundTruth>(
        GroundTruth::rect(td.rows, td.cols, td.entries));
    if (td_out) *td_out = std::move(td);
    return apply_noise(Sampler::rect(std::move(truth)), o);
  }
  if (!o.triplets_path.empty())
    throw ConfigError("--triplets is only consumed by --sampler rect");
  if (o.truth_path.empty())
    throw ConfigError("--truth <file> is required for sampler '" + o.sampler +
                      "'");
  GroundTruth spectral = read_spectral_truth(o.truth_path);

  if (o.sampler == "subspace" || o.sampler == "subspace-split") {
    for (double l : spectral.eigenvalues())
      if (std::abs(l - 1.0) > 1e-9)
        throw ConfigError(
            "subspace sampling treats the truth file's vectors as a subspace "
            "basis; every eigenvalue must be 1 (synth with --eigenvalues "
            "1,...,1)");
    if (o.m_keep == 0)
      throw ConfigError("subspace sampling requires --m-keep");
    auto truth = std::make_shared<GroundTruth>(
        GroundTruth::projection(spectral.basis()));
    return apply_noise(o.sampler == "subspace"
                           ? Sampler::subspace(std::move(truth), o.m_keep)
                           : Sampler::subspace_split(std::move(truth), o.m_keep),
                       o);
  }

  auto truth = std::make_shared<GroundTruth>(std::move(spectral));
  if (o.sampler == "exact") return apply_noise(Sampler::exact(std::move(truth)), o);
  if (o.sampler == "entrywise")
    return apply_noise(Sampler::entrywise(std::move(truth)), o);
  if (o.sampler == "trace") return apply_noise(Sampler::trace(std::move(truth)), o);
  if (o.sampler == "trace-sym")
    return apply_noise(Sampler::trace_symmetric(std::move(truth)), o);
  throw ConfigError("unknown sampler '" + o.sampler + "'");
}

std::vector<std::string> config_comments(const char* command, const RunOpts& o,
                                         const AlectonConfig& c,
                                         const Sampler& s) {
  std::vector<std::string> lines;
  lines.push_back(std::string("command=") + command);
  lines.push_back(std::string("sampler=") + sampler_kind_name(s.kind()));
  if (!o.truth_path.empty()) lines.push_back("truth=" + o.truth_path);
  if (!o.triplets_path.empty()) {
    lines.push_back("triplets=" + o.triplets_path);
    lines.push_back("rows=" + std::to_string(o.rows));
    lines.push_back("cols=" + std::to_string(o.cols));
  }
  lines.push_back("n=" + std::to_string(s.dim()));
  lines.push_back("p=" + std::to_string(c.p));
  lines.push_back("q=" + std::to_string(c.q));
  lines.push_back("epsilon=" + format_double(c.epsilon, 12));
  lines.push_back("eta=" + format_double(c.eta, 12));
  lines.push_back("k_steps=" + std::to_string(c.k_steps));
  lines.push_back("l_steps=" + std::to_string(c.l_steps));
  lines.push_back("seed=" + std::to_string(c.seed));
  lines.push_back("renorm_every=" + std::to_string(c.renorm_every));
  lines.push_back("trace_every=" + std::to_string(c.trace_every));
  if (s.m_keep() > 0) lines.push_back("m_keep=" + std::to_string(s.m_keep()));
  lines.push_back("noise_add=" + format_double(o.noise_add, 12));
  lines.push_back("noise_mul=" + format_double(o.noise_mul, 12));
  lines.push_back(std::string("angular_only=") +
                  (o.angular_only ? "true" : "false"));
  lines.push_back(std::string("force=") + (o.force ? "true" : "false"));
  return lines;
}

int run_command(const RunOpts& o) {
  Sampler s = build_sampler(o);
  AlectonConfig c = make_config(o);
  RecoverOptions ro;
  ro.force = o.force;
  ro.angular_only = o.angular_only;

  auto t0 = Clock::now();
  RecoveryResult res = recover(s, c, ro);
  double wall = ms_since(t0);

  if (!o.out.empty())
    write_text_atomic(o.out, trace_csv(res.trace, config_comments("run", o, c, s)));

  const TraceRecord& last = res.trace.records.back();
  bool converged = last.rho && *last.rho >= 1.0 - c.epsilon;
  std::string line = std::string("converged=") + (converged ? "true" : "false") +
                     " steps=" + std::to_string(res.steps_run) + " rho_final=" +
                     (last.rho ? format_double(*last.rho, 12) : "nan") +
                     " wall_ms=" + ms_string(wall);
  if (res.r_bar) {
    const SmallSymmetric& rb = *res.r_bar;
    double f = 0.0;
    for (std::size_t i = 0; i < rb.size(); ++i)
      for (std::size_t j = 0; j < rb.size(); ++j) f += rb(i, j) * rb(i, j);
    line += " rbar_fro=" + format_double(std::sqrt(f), 12) +
            " clipped=" + std::to_string(res.clipped);
  }
  std::puts(line.c_str());
  return 0;
}

int oaat_command(const RunOpts& o) {
  TripletData td;
  Sampler s = build_sampler(o, &td);
  const std::size_t count = o.p;
  AlectonConfig c = make_config(o);
  c.p = 1;
  c.q = 1;
  RecoverOptions ro;
  ro.force = o.force;

  OaatResult res = one_at_a_time(s, count, c, ro);

  if (s.kind() == SamplerKind::Rect) {
    // Train error over the revealed entries: the off-diagonal block of the
    // embedded estimate sum y y^T carries half of each component's weight,
    // so the entry estimate is 2 y_i y_{rows+j}.
    std::unordered_map<std::size_t, double> dedup;
    for (const Triplet& t : td.entries)
      dedup[t.row * td.cols + t.col] = t.value;
    std::vector<std::pair<std::size_t, double>> omega(dedup.begin(), dedup.end());
    std::sort(omega.begin(), omega.end());
    std::vector<double> est(omega.size(), 0.0);
    for (std::size_t comp = 0; comp < res.components.size(); ++comp) {
      const Vector& y = res.components[comp];
      double sq = 0.0;
      for (std::size_t k = 0; k < omega.size(); ++k) {
        std::size_t i = omega[k].first / td.cols;
        std::size_t j = omega[k].first % td.cols;
        est[k] += 2.0 * y[i] * y[td.rows + j];
        double d = est[k] - omega[k].second;
        sq += d * d;
      }
      res.stats[comp].residual_fro =
          std::sqrt(sq / static_cast<double>(omega.size()));
    }
  }

  if (!o.out.empty())
    write_text_atomic(o.out, oaat_csv(res.stats, config_comments("oaat", o, c, s)));
  for (std::size_t i = 0; i < res.stats.size(); ++i) {
    std::string line = "component=" + std::to_string(i + 1) +
                       " steps=" + std::to_string(res.stats[i].steps) +
                       " residual=" + format_double(res.stats[i].residual_fro, 12) +
                       " wall_ms=" + ms_string(res.stats[i].wall_ms);
    std::puts(line.c_str());
  }
  return 0;
}

struct SynthOpts {
  std::size_t n = 0, rank = 0;
  std::vector<double> eigenvalues;
  std::string coherence = "random";
  std::uint64_t seed = 0;
  std::string out;
};

int synth_command(const SynthOpts& o) {
  std::vector<double> lam = o.eigenvalues;
  if (lam.empty()) {
    lam.resize(o.rank);
    for (std::size_t i = 0; i < o.rank; ++i)
      lam[i] = static_cast<double>(o.rank - i);
  }
  if (lam.size() != o.rank)
    throw ConfigError("expected " + std::to_string(o.rank) +
                      " eigenvalues, got " + std::to_string(lam.size()));

  TallMatrix u(o.n, o.rank);
  if (o.coherence == "basis") {
    for (std::size_t j = 0; j < o.rank; ++j) u(j, j) = 1.0;
  } else {
    Rng rng = Rng::derive(o.seed, 0);
    u = random_orthonormal(o.n, o.rank, rng);
  }
  GroundTruth t = GroundTruth::spectral(std::move(lam), std::move(u));
  write_spectral_truth(o.out, t);
  std::string line = "wrote " + o.out + " n=" + std::to_string(o.n) +
                     " rank=" + std::to_string(o.rank);
  std::puts(line.c_str());
  return 0;
}

struct ZpOpts {
  std::vector<std::size_t> p_list{1, 2, 5, 20};
  std::vector<double> gammas;
  std::size_t samples = 100000;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string out;
};

int zp_command(const ZpOpts& o) {
  std::vector<double> gammas = o.gammas;
  if (gammas.empty())
    for (int i = 0; i <= 10; ++i) gammas.push_back(0.01 * i);

  struct Cell {
    std::size_t p;
    double gamma;
  };
  std::vector<Cell> cells;
  for (std::size_t p : o.p_list)
    for (double g : gammas) cells.push_back({p, g});

  std::vector<ZpEstimate> results(cells.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      Rng rng = Rng::derive(o.seed, i);
      results[i] = zp_monte_carlo(cells[i].p, cells[i].gamma, o.samples, rng);
    }
  };
  const std::size_t workers = std::min(o.threads, cells.size());
  if (workers <= 1) {
    work(0, cells.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (cells.size() + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      std::size_t begin = w * chunk;
      std::size_t end = std::min(cells.size(), begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
    for (std::thread& t : pool) t.join();
  }

  bool with_closed =
      std::find(o.p_list.begin(), o.p_list.end(), std::size_t{1}) !=
      o.p_list.end();
  std::vector<std::string> comments{
      "command=zp", "samples=" + std::to_string(o.samples),
      "seed=" + std::to_string(o.seed)};
  std::string csv = zp_csv(results, with_closed, comments);
  if (o.out.empty()) {
    std::fputs(csv.c_str(), stdout);
  } else {
    write_text_atomic(o.out, csv);
    std::puts(("wrote " + o.out).c_str());
  }
  return 0;
}

struct DemoOpts {
  std::string kind;
  std::uint64_t seed = 1;
  std::size_t trials = 500;
  std::size_t k_steps = 10000;
  std::size_t n = 32;
};

int demo_command(const DemoOpts& o) {
  bool pass = false;
  if (o.kind == "diverge") {
    DivergenceReport r = divergence_demo(1.0, 2.0, 2.0, 1000);
    pass = r.bound_held && r.overflowed;
    std::string line =
        "kind=diverge alpha=1 growth=2 x0=2 overflow_step=" +
        std::to_string(r.steps_to_overflow) +
        " bound_held=" + (r.bound_held ? "true" : "false");
    std::puts(line.c_str());
  } else if (o.kind == "stuck") {
    StuckReport r = stuck_demo([](std::size_t) { return 0.01; }, {0.0, 1.0},
                               o.k_steps);
    pass = r.first_coordinate_zero_throughout && r.final_distance >= 3.0;
    std::string line =
        "kind=stuck steps=" + std::to_string(o.k_steps) +
        " first_coordinate_zero=" +
        (r.first_coordinate_zero_throughout ? "true" : "false") +
        " final_distance=" + format_double(r.final_distance, 12);
    std::puts(line.c_str());
  } else {
    struct Schedule {
      const char* name;
      std::function<double(std::size_t)> eta;
    };
    const Schedule schedules[] = {
        {"constant", [](std::size_t) { return 0.02; }},
        {"decay", [](std::size_t k) { return 1.0 / static_cast<double>(k + 1); }},
        {"aggressive", [](std::size_t) { return 0.5; }},
    };
    pass = true;
    for (const Schedule& s : schedules) {
      LowerBoundReport r =
          lower_bound_experiment(o.n, o.k_steps, s.eta, o.trials, o.seed);
      pass = pass && r.floor_respected;
      std::string line = std::string("kind=lowerbound schedule=") + s.name +
                         " mean_rho=" + format_double(r.mean_rho, 12) +
                         " floor=" + format_double(r.floor, 12) +
                         " std_err=" + format_double(r.std_err, 12) +
                         " sigma_sq=" + format_double(r.sigma_sq, 12) +
                         " ok=" + (r.floor_respected ? "true" : "false");
      std::puts(line.c_str());
    }
  }
  std::puts(pass ? "PASS" : "FAIL");
  return pass ? 0 : 2;
}

struct IngestOpts {
  std::string triplets;
  std::size_t rows = 0, cols = 0;
};

int ingest_command(const IngestOpts& o) {
  TripletData td = read_triplets(o.triplets, o.rows, o.cols);
  GroundTruth t = GroundTruth::rect(td.rows, td.cols, td.entries);
  double frob = std::sqrt(t.frob_sq() / 2.0);
  std::string line = "rows=" + std::to_string(td.rows) +
                     " cols=" + std::to_string(td.cols) +
                     " count=" + std::to_string(td.entries.size()) +
                     " frob=" + format_double(frob, 12) +
                     " xi=" + format_double(t.rect_xi(), 12);
  std::puts(line.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "alecton: two-phase stochastic recovery of low-rank PSD matrices\n"
      "(angular eigenspace estimation, then radial magnitude averaging)"};
  app.require_subcommand(1);
  int rc = 0;

  RunOpts run_opts;
  CLI::App* run = app.add_subcommand(
      "run", "one full recovery (angular + radial), trace CSV + summary line");
  add_run_flags(run, run_opts, "recovery rank");
  add_target_flags(run, run_opts);
  run->callback([&] { rc = run_command(run_opts); });

  RunOpts oaat_opts;
  CLI::App* oaat = app.add_subcommand(
      "oaat", "recover --p components one at a time with deflation");
  add_run_flags(oaat, oaat_opts, "number of rank-1 components to recover");
  add_target_flags(oaat, oaat_opts);
  oaat->callback([&] { rc = oaat_command(oaat_opts); });

  SynthOpts synth_opts;
  CLI::App* synth = app.add_subcommand(
      "synth", "generate a synthetic spectral ground-truth file");
  synth->add_option("--n", synth_opts.n, "dimension")
      ->required()
      ->check(CLI::PositiveNumber);
  synth->add_option("--rank", synth_opts.rank, "number of positive eigenvalues")
      ->required()
      ->check(CLI::PositiveNumber);
  synth->add_option("--eigenvalues", synth_opts.eigenvalues,
                    "explicit eigenvalue list, descending (default: rank..1)")
      ->delimiter(',');
  synth->add_option("--coherence", synth_opts.coherence,
                    "eigenvector style: random orthogonal or standard basis")
      ->check(CLI::IsMember({"random", "basis"}))
      ->capture_default_str();
  synth->add_option("--seed", synth_opts.seed, "seed for the random basis")
      ->capture_default_str();
  synth->add_option("--out", synth_opts.out, "output file")->required();
  synth->callback([&] { rc = synth_command(synth_opts); });

  ZpOpts zp_opts;
  CLI::App* zp = app.add_subcommand(
      "zp", "tabulate the initialization constant Z_p(gamma) by Monte Carlo");
  zp->add_option("--p-list", zp_opts.p_list, "ranks to tabulate")
      ->delimiter(',')
      ->capture_default_str();
  zp->add_option("--gammas", zp_opts.gammas,
                 "gamma grid (default: 0,0.01,...,0.1)")
      ->delimiter(',');
  zp->add_option("--samples", zp_opts.samples, "Monte Carlo samples per cell")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  zp->add_option("--seed", zp_opts.seed, "master seed")->capture_default_str();
  zp->add_option("--threads", zp_opts.threads, "worker threads over grid cells")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  zp->add_option("--out", zp_opts.out, "output CSV (default: stdout)");
  zp->callback([&] { rc = zp_command(zp_opts); });

  DemoOpts demo_opts;
  CLI::App* demo = app.add_subcommand(
      "demo", "counterexample and bound demonstrations with pass/fail checks");
  demo->add_option("kind", demo_opts.kind, "diverge | stuck | lowerbound")
      ->required()
      ->check(CLI::IsMember({"diverge", "stuck", "lowerbound"}));
  demo->add_option("--seed", demo_opts.seed, "seed (lowerbound)")
      ->capture_default_str();
  demo->add_option("--trials", demo_opts.trials, "trials (lowerbound)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  demo->add_option("--k-steps", demo_opts.k_steps, "iterations (stuck, lowerbound)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  demo->add_option("--n", demo_opts.n, "dimension (lowerbound)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  demo->callback([&] { rc = demo_command(demo_opts); });

  IngestOpts ingest_opts;
  CLI::App* ingest = app.add_subcommand(
      "ingest", "validate a triplet file and print its sampling statistics");
  ingest->add_option("--triplets", ingest_opts.triplets, "entry file")
      ->required();
  ingest->add_option("--rows", ingest_opts.rows, "row count")
      ->required()
      ->check(CLI::PositiveNumber);
  ingest->add_option("--cols", ingest_opts.cols, "column count")
      ->required()
      ->check(CLI::PositiveNumber);
  ingest->callback([&] { rc = ingest_command(ingest_opts); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return rc;
}
