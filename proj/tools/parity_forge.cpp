// parity-forge command line.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "parity/bench.hpp"
#include "parity/checkpoint.hpp"
#include "parity/fourier.hpp"
#include "parity/progress.hpp"
#include "parity/svg.hpp"
#include "parity/theory.hpp"

using namespace parity;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0, kUsage = 1, kFailed = 2;

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  int jobs = 1;
  std::string preset = "ii";
  bool check = false;
};

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string slurp(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

// Writes to <out>/<name> if --out was given, otherwise to stdout.
struct Sink {
  std::ofstream file;
  std::ostream* os = &std::cout;
  Sink(const std::string& out, const std::string& name) {
    if (out.empty()) return;
    fs::create_directories(out);
    file.open(fs::path(out) / name);
    if (!file) throw std::runtime_error("cannot write " + (fs::path(out) / name).string());
    os = &file;
  }
  std::ostream& operator*() { return *os; }
};

void add_common(CLI::App* app, Common& c, bool preset = true) {
  app->add_option("--config", c.config, "key-value config file");
  app->add_option("--seed", c.seed, "base seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  if (preset) app->add_option("--preset", c.preset, "architecture setting, e.g. ii or (xv)");
  app->add_flag("--check", c.check, "exit 2 when the experiment's threshold is not met");
}

// ---- train -----------------------------------------------------------------------------------

struct TrainArgs {
  int n = 20, k = 3;
  double flip = 0.0;
  int batch = 32;
  std::optional<double> eta;
  double decay = 0.0;
  std::string init, loss = "hinge";
  std::int64_t max_iters = 100000;
  std::string save, load;
};

int cmd_train(const Common& c, const TrainArgs& a) {
  SweepSpec spec;
  if (!c.config.empty()) spec = SweepSpec::parse(slurp(c.config));
  spec.presets = {c.preset};
  spec.ns = {a.n};
  spec.ks = {a.k};
  spec.flips = {a.flip};
  spec.batches = {a.batch};
  spec.etas = a.eta ? std::vector<double>{*a.eta} : std::vector<double>{};
  spec.inits = a.init.empty() ? std::vector<std::string>{} : std::vector<std::string>{a.init};
  spec.losses = {a.loss};
  spec.decays = {a.decay};
  spec.base.max_iters = a.max_iters;
  spec.base_seed = c.seed;
  Cell cell = cell_at(spec, 0);
  RunSetup setup = run_setup(spec, cell, 0);
  RunRecord rec = a.load.empty() ? train(setup.model, setup.task, setup.config)
                                 : train_from(load_model(a.load), setup.task, setup.config);
  if (!c.out.empty()) {
    Sink sink(c.out, "run.csv");
    rec.write_csv(*sink);
    Sink summary(c.out, "summary.json");
    *summary << rec.summary_json() << '\n';
  }
  if (!a.save.empty()) save_model(a.save, rec.final_model);
  std::cout << rec.summary_json() << '\n';
  return c.check && !rec.t_c ? kFailed : kOk;
}

// ---- sweep / stats / fit ---------------------------------------------------------------------

int cmd_sweep(const Common& c, double min_success) {
  if (c.config.empty()) throw UsageError("sweep needs --config");
  SweepSpec spec = SweepSpec::parse(slurp(c.config));
  if (!c.out.empty()) spec.out_dir = c.out;
  spec.jobs = c.jobs;
  spec.base_seed = c.seed;
  auto rows = run_sweep(spec);
  auto table = stats(rows, c.seed);
  if (spec.out_dir.empty()) {
    write_results_csv(std::cout, rows);
  } else {
    Sink sink(spec.out_dir, "stats.csv");
    write_stats_csv(*sink, table);
  }
  write_stats_csv(std::cerr, table);
  if (c.check)
    for (const auto& s : table)
      if (s.success_rate < min_success) return kFailed;
  return kOk;
}

int cmd_stats(const Common& c, const std::string& input) {
  auto rows = read_results_csv(input);
  if (rows.empty()) throw UsageError("no rows in " + input);
  Sink sink(c.out, "stats.csv");
  write_stats_csv(*sink, stats(rows, c.seed));
  return kOk;
}

int cmd_fit(const Common& c, const std::string& input, bool use_median) {
  auto rows = read_results_csv(input);
  auto table = stats(rows, c.seed);
  // One fit per (label without n): group by preset, k and the remaining axes.
  std::map<std::string, std::vector<std::pair<int, double>>> groups;
  for (const auto& s : table) {
    auto q = use_median ? s.median : s.p10;
    if (!q) continue;
    std::string key = s.label;
    auto pos = key.find(" n=");
    key.erase(pos, key.find(' ', pos + 1) - pos);
    groups[key].push_back({s.n, *q});
  }
  Sink sink(c.out, "fit.csv");
  *sink << "group,c,alpha,n0\n";
  int failures = 0;
  for (const auto& [key, pts] : groups) {
    try {
      ScalingFit f = scaling_fit(pts);
      *sink << '"' << key << "\"," << f.c << ',' << f.alpha << ',' << f.n0 << '\n';
    } catch (const std::invalid_argument& e) {
      std::cerr << key << ": " << e.what() << '\n';
      ++failures;
    }
  }
  return c.check && failures ? kFailed : kOk;
}

// ---- fourier / gap ---------------------------------------------------------------------------

int cmd_fourier(const Common& c, int n) {
  check_enumerable(n);
  if (n % 2 == 0) throw UsageError("majority needs odd n");
  FourierSpectrum spec = full_spectrum(majority_table(n), n);
  Sink sink(c.out, "majority.csv");
  *sink << "k,closed_form,brute_force,abs_diff\n";
  double worst = 0.0;
  for (int k = 1; k <= n; ++k) {
    const double closed = majority_coefficient(n, k);
    const double brute = spec.coeffs[static_cast<Eigen::Index>(low_mask(k))];
    worst = std::max(worst, std::abs(closed - brute));
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.3g\n", k, closed, brute, std::abs(closed - brute));
    *sink << buf;
  }
  return c.check && worst > 1e-12 ? kFailed : kOk;
}

int cmd_gap(const Common& c, int n, int k) {
  const double bound = majority_gap_bound(n, k);
  FourierSpectrum spec = full_spectrum(majority_table(n), n);
  double worst = INFINITY;
  for (const auto& S : subsets_of_size(n, k)) worst = std::min(worst, fourier_gap(spec, S));
  Sink sink(c.out, "gap.csv");
  *sink << "n,k,min_gap,bound,holds\n"
        << n << ',' << k << ',' << worst << ',' << bound << ',' << (worst >= bound) << '\n';
  return c.check && worst < bound ? kFailed : kOk;
}

// ---- recover / flow / grok / figure ----------------------------------------------------------

int cmd_recover(const Common& c, int n, int k, int B, int trials) {
  if (B <= 0) B = recovery_batch_size(n, k);
  RecoveryResult r = single_step_recovery(n, k, B, trials, RngStream(c.seed, 0x7ec));
  Sink sink(c.out, "recover.csv");
  *sink << "trial,truth,found,success\n";
  for (std::size_t i = 0; i < r.trials.size(); ++i)
    *sink << i << ",\"" << r.trials[i].truth.str() << "\",\"" << r.trials[i].found.str() << "\","
          << r.trials[i].success << '\n';
  std::cerr << "B = " << B << ", success rate = " << r.rate << '\n';
  return c.check && r.rate < 0.95 ? kFailed : kOk;
}

FlowInit parse_flow_init(const std::string& s) {
  if (s == "all_ones" || s == "ones") return FlowInit::all_ones;
  if (s == "sign") return FlowInit::sign;
  if (s == "gaussian") return FlowInit::gaussian;
  throw UsageError("unknown flow init '" + s + "'");
}

int cmd_flow(const Common& c, int n_prime, int k, const std::string& init,
             const std::vector<double>& alphas) {
  FlowTrajectory tr = gradient_flow_disjoint(n_prime, k, parse_flow_init(init),
                                             RngStream(c.seed, 0xf10), alphas);
  Sink sink(c.out, "flow.csv");
  *sink << "# parity-forge v" << PARITY_FORGE_VERSION << " schema=1\n";
  *sink << "t";
  for (int i = 1; i <= k; ++i) *sink << ",v_" << i;
  *sink << ",product,error,lower,upper\n";
  for (const auto& s : tr.grid) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", s.t);
    *sink << buf;
    for (int i = 0; i < k; ++i) *sink << ',' << s.v[i];
    *sink << ',' << s.product << ',' << s.error << ',' << s.lower << ',' << s.upper << '\n';
  }
  for (const auto& [a, t] : tr.T)
    std::cerr << "T(" << a << ") = " << (t ? std::to_string(*t) : std::string("none")) << '\n';
  std::cerr << "termination: " << tr.termination << ", t_end = " << tr.t_end << '\n';
  FlowChecks checks = check_flow(tr);
  std::cerr << "checks: monotone=" << checks.monotone_product
            << " increments=" << checks.equal_increments << " (max dev "
            << checks.max_increment_deviation << ") q_bracketed=" << checks.q_bracketed
            << " time_bound=" << checks.time_bound << " symmetric=" << checks.symmetric << '\n';
  return c.check && !checks.all() ? kFailed : kOk;
}

int cmd_grok(const Common& c, int n, int k, std::int64_t m, double decay, int seeds,
             std::int64_t max_iters) {
  SweepSpec spec;
  if (!c.config.empty()) spec = SweepSpec::parse(slurp(c.config));
  spec.presets = {c.preset};
  spec.ns = {n};
  spec.ks = {k};
  spec.ms = {m};
  spec.decays = {decay};
  spec.seeds = seeds;
  spec.base.max_iters = max_iters;
  spec.base_seed = c.seed;
  spec.jobs = c.jobs;
  if (spec.etas.empty()) spec.etas = {0.1};
  auto rows = run_sweep(spec);
  Sink sink(c.out, "grok.csv");
  write_results_csv(*sink, rows);
  int grokked = 0;
  for (const auto& r : rows)
    if (r.t_train && r.t_test && *r.t_test >= 2 * *r.t_train) ++grokked;
  std::cerr << grokked << " of " << rows.size() << " seeds with t_test >= 2 t_train\n";
  return c.check && 2 * grokked < static_cast<int>(rows.size()) ? kFailed : kOk;
}

int cmd_figure(const Common& c, const std::string& name, double scale) {
  FigureOptions o;
  o.out_dir = c.out.empty() ? "." : c.out;
  o.jobs = c.jobs;
  o.seed = c.seed;
  o.scale = scale;
  for (const auto& p : figure_emit(name, o)) std::cout << p << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parity-forge: SGD on sparse parities"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("parity-forge ") + PARITY_FORGE_VERSION);
  Common c;

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "train one model");
  add_common(train_cmd, c);
  train_cmd->add_option("-n", ta.n, "input dimension");
  train_cmd->add_option("-k", ta.k, "parity degree");
  train_cmd->add_option("--flip", ta.flip, "label flip probability");
  train_cmd->add_option("--batch", ta.batch, "batch size")->check(CLI::PositiveNumber);
  train_cmd->add_option("--eta", ta.eta, "learning rate (default: preset's)");
  train_cmd->add_option("--decay", ta.decay, "weight decay per step");
  train_cmd->add_option("--init", ta.init, "uniform | gaussian | bernoulli | paired");
  train_cmd->add_option("--loss", ta.loss, "hinge | square | cross_entropy | correlation");
  train_cmd->add_option("--max-iters", ta.max_iters, "iteration cap");
  train_cmd->add_option("--save", ta.save, "write the final model here");
  train_cmd->add_option("--load", ta.load, "start from this checkpoint");

  double min_success = 0.2;
  auto* sweep_cmd = app.add_subcommand("sweep", "run a grid of training runs");
  add_common(sweep_cmd, c);
  sweep_cmd->add_option("--min-success", min_success, "per-cell success rate for --check");

  std::string input;
  auto* stats_cmd = app.add_subcommand("stats", "convergence statistics of a results CSV");
  add_common(stats_cmd, c, false);
  stats_cmd->add_option("results", input, "results.csv")->required();

  bool use_median = false;
  auto* fit_cmd = app.add_subcommand("fit", "scaling fit t_c <= c (n - 9)^alpha");
  add_common(fit_cmd, c, false);
  fit_cmd->add_option("results", input, "results.csv")->required();
  fit_cmd->add_flag("--median", use_median, "fit the median instead of the 10th percentile");

  int n = 11, k = 2;
  auto* fourier_cmd = app.add_subcommand("fourier", "majority spectrum, closed form vs brute force");
  add_common(fourier_cmd, c, false);
  fourier_cmd->add_option("-n", n, "odd dimension");

  auto* gap_cmd = app.add_subcommand("gap", "majority Fourier gap against its lower bound");
  add_common(gap_cmd, c, false);
  gap_cmd->add_option("-n", n, "odd dimension");
  gap_cmd->add_option("-k", k, "even degree");

  int B = 0, trials = 100;
  auto* recover_cmd = app.add_subcommand("recover", "single-step support recovery");
  add_common(recover_cmd, c, false);
  recover_cmd->add_option("-n", n, "odd dimension");
  recover_cmd->add_option("-k", k, "even degree");
  recover_cmd->add_option("--batch", B, "samples (default ceil(8 log n / gamma^2))");
  recover_cmd->add_option("--trials", trials, "trials")->check(CLI::PositiveNumber);

  int n_prime = 25;
  std::string flow_init = "all_ones";
  std::vector<double> alphas{0.49, 0.0};
  auto* flow_cmd = app.add_subcommand("flow", "disjoint-PolyNet gradient flow");
  add_common(flow_cmd, c, false);
  flow_cmd->add_option("--n-prime", n_prime, "block size");
  flow_cmd->add_option("-k", k, "number of blocks");
  flow_cmd->add_option("--init", flow_init, "all_ones | sign | gaussian");
  flow_cmd->add_option("--alpha", alphas, "error levels for T(alpha)");

  std::int64_t m = 1000, max_iters = 100000;
  double decay = 0.0;
  int seeds = 10;
  auto* grok_cmd = app.add_subcommand("grok", "finite-sample training with weight decay");
  add_common(grok_cmd, c);
  grok_cmd->add_option("-n", n, "input dimension");
  grok_cmd->add_option("-k", k, "parity degree");
  grok_cmd->add_option("-m", m, "training samples")->check(CLI::PositiveNumber);
  grok_cmd->add_option("--decay", decay, "weight decay per step");
  grok_cmd->add_option("--seeds", seeds, "seeds")->check(CLI::PositiveNumber);
  grok_cmd->add_option("--max-iters", max_iters, "iteration cap");

  std::string figure;
  double scale = 1.0;
  auto* figure_cmd = app.add_subcommand("figure", "emit figure data and an SVG plot");
  add_common(figure_cmd, c, false);
  figure_cmd->add_option("name", figure, "experiment")->required()->check(CLI::IsMember(figure_names()));
  figure_cmd->add_option("--scale", scale, "multiplier on trial counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(c, ta);
    if (*sweep_cmd) return cmd_sweep(c, min_success);
    if (*stats_cmd) return cmd_stats(c, input);
    if (*fit_cmd) return cmd_fit(c, input, use_median);
    if (*fourier_cmd) return cmd_fourier(c, n);
    if (*gap_cmd) return cmd_gap(c, n, k);
    if (*recover_cmd) return cmd_recover(c, n, k, B, trials);
    if (*flow_cmd) return cmd_flow(c, n_prime, k, flow_init, alphas);
    if (*grok_cmd) {
      if (grok_cmd->count("-n") == 0) n = 30;
      if (grok_cmd->count("-k") == 0) k = 3;
      return cmd_grok(c, n, k, m, decay, seeds, max_iters);
    }
    if (*figure_cmd) return cmd_figure(c, figure, scale);
  } catch (const std::invalid_argument& e) {  // DimensionError included
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailed;
  }
  return kUsage;
}
