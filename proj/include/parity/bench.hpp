#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "parity/train.hpp"

namespace parity {

// ---- presets ---------------------------------------------------------------------------------

struct Preset {
  std::string name;
  ModelSpec spec;
  double eta = 0.1;
  InitScheme init = InitScheme::uniform_xavier;
  int min_batch = 1;  // below this the setting is known to be unreliable
};

// "i".."xv", "*i", "*ii", "deep-quad-3", "deep-quad-4". Parentheses are accepted and ignored.
Preset make_preset(const std::string& name, int n, int k);
const std::vector<std::string>& preset_names();

// ---- sweeps ----------------------------------------------------------------------------------

struct SweepSpec {
  std::vector<std::string> presets{"ii"};
  std::vector<int> ns{10};
  std::vector<int> ks{2};
  std::vector<double> flips{0.0};
  std::vector<int> batches{32};
  std::vector<double> etas;  // empty: each preset's own eta
  std::vector<std::string> inits;  // empty: each preset's own init
  std::vector<std::string> losses{"hinge"};
  std::vector<std::int64_t> ms{0};  // 0: online
  std::vector<double> decays{0.0};
  int seeds = 1;
  std::uint64_t base_seed = 0;
  TrainConfig base;  // max_iters, eval cadence, rule and the like
  int jobs = 1;
  std::string out_dir;

  std::size_t cell_count() const;
  std::size_t run_count() const { return cell_count() * static_cast<std::size_t>(seeds); }

  // Key-value text: `key = value` or `key = a, b, c`; `#` starts a comment.
  static SweepSpec parse(const std::string& text);
  static SweepSpec load(const std::string& path);
};

struct Cell {
  std::size_t index = 0;
  std::string preset;
  int n = 0, k = 0;
  double flip = 0.0;
  int batch = 32;
  double eta = 0.0;
  std::string init, loss;
  std::int64_t m = 0;
  double decay = 0.0;
};

Cell cell_at(const SweepSpec& spec, std::size_t index);
// The exact ModelSpec, task and TrainConfig of one run.
struct RunSetup {
  ModelSpec model;
  ParityTask task;
  TrainConfig config;
};
RunSetup run_setup(const SweepSpec& spec, const Cell& cell, int seed_index);
std::uint64_t run_seed(std::uint64_t base_seed, int seed_index);

struct SweepRow {
  std::size_t cell = 0;
  int seed_index = 0;
  std::string preset;
  int n = 0, k = 0;
  double flip = 0.0;
  int batch = 0;
  double eta = 0.0;
  std::string init, loss;
  std::int64_t m = 0;
  double decay = 0.0;
  std::uint64_t seed = 0;
  std::string status;
  std::optional<std::int64_t> t_c, t_train, t_test;
  std::int64_t iterations = 0;
  double final_val_error = 0.0;
  double plateau_fraction = 0.0;  // share of pre-t_c curve points with val error >= 0.4
  std::uint64_t config_hash = 0;
};

SweepRow make_row(const Cell& cell, int seed_index, const RunSetup& setup, const RunRecord& rec);

// Share of curve points before t_c whose validation error is at least `level`.
double plateau_fraction(const RunRecord& rec, double level = 0.4);

using RunCallback = std::function<void(const SweepRow&, const RunRecord&)>;

// Runs every (cell, seed) on `jobs` threads. Rows come back in (cell, seed) order. With an
// out_dir, results.csv there is read first and rows whose config hash matches are reused.
std::vector<SweepRow> run_sweep(const SweepSpec& spec, const RunCallback& on_run = {});

// Generic deterministic parallel map over [0, count).
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn);

void write_results_csv(std::ostream& os, const std::vector<SweepRow>& rows);
std::vector<SweepRow> read_results_csv(std::istream& is);
std::vector<SweepRow> read_results_csv(const std::string& path);

// ---- statistics ------------------------------------------------------------------------------

struct ConvergenceStats {
  std::size_t cell = 0;
  std::string label;  // preset/n/k/... for humans
  int n = 0, k = 0;
  std::size_t trials = 0, converged = 0;
  double success_rate = 0.0;
  std::optional<double> median, p10, ci_lo, ci_hi, min, max;
};

// Linear-interpolation percentile of sorted data, q in [0, 1].
double percentile(const std::vector<double>& sorted, double q);

ConvergenceStats cell_stats(const std::vector<SweepRow>& rows, std::uint64_t bootstrap_seed = 0,
                            int resamples = 100);
// Groups rows by cell (throws on an empty input).
std::vector<ConvergenceStats> stats(const std::vector<SweepRow>& rows,
                                    std::uint64_t bootstrap_seed = 0);
void write_stats_csv(std::ostream& os, const std::vector<ConvergenceStats>& table);

struct ScalingFit {
  double c = 0.0;
  double alpha = 0.0;
  int n0 = 9;
};

// c = t(10); alpha = max over the other n of log(t(n)/c) / log(n - 9), floored at 0.
ScalingFit scaling_fit(const std::vector<std::pair<int, double>>& tc_by_n);

// ---- figures ---------------------------------------------------------------------------------

struct FigureOptions {
  std::string out_dir = ".";
  int jobs = 1;
  std::uint64_t seed = 0;
  double scale = 1.0;  // multiplies trial counts
};

const std::vector<std::string>& figure_names();
// Writes <name>.csv and <name>.svg into out_dir and returns the written paths.
std::vector<std::string> figure_emit(const std::string& name, const FigureOptions& opts);

}  // namespace parity
