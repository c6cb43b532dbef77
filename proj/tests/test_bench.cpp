#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "parity/bench.hpp"

using namespace parity;
namespace fs = std::filesystem;

namespace {

SweepSpec small_sweep() {
  return SweepSpec::parse(
      "# tiny\n"
      "preset = ii\n"
      "n = 8, 9\n"
      "k = 2\n"
      "batch = 16\n"
      "seeds = 3\n"
      "seed = 42\n"
      "max_iters = 400\n"
      "eval_size = 512\n");
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

SweepRow row_with(std::size_t cell, int seed, std::optional<std::int64_t> tc) {
  SweepRow r;
  r.cell = cell;
  r.seed_index = seed;
  r.preset = "ii";
  r.n = 10;
  r.k = 2;
  r.t_c = tc;
  r.status = tc ? "converged" : "max_iters";
  return r;
}

}  // namespace

TEST_CASE("sweep spec parsing and cell enumeration") {
  SweepSpec s = SweepSpec::parse("preset = ii, (iv)\nn = 10, 20, 30\nk = 2,3\nflip = 0, 0.1\n");
  CHECK(s.presets.size() == 2);
  CHECK(s.cell_count() == 2 * 3 * 2 * 2);
  Cell last = cell_at(s, s.cell_count() - 1);
  CHECK(last.preset == "(iv)");
  CHECK(last.n == 30);
  CHECK(last.flip == 0.1);
  Cell second = cell_at(s, 1);
  CHECK(second.flip == 0.1);
  CHECK(second.n == 10);
  CHECK_THROWS(SweepSpec::parse("bogus = 1\n"));
  CHECK_THROWS(SweepSpec::parse("n = ten\n"));
  CHECK_THROWS(cell_at(s, s.cell_count()));
}

TEST_CASE("presets resolve") {
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    Preset p = make_preset(name, 12, 3);
    CHECK(p.spec.n == 12);
    CHECK(p.eta > 0);
  }
  CHECK(make_preset("(ii)", 10, 2).name == make_preset("ii", 10, 2).name);
  CHECK_THROWS(make_preset("xvi", 10, 2));
}

TEST_CASE("run seeds are distinct and stable") {
  CHECK(run_seed(1, 0) == run_seed(1, 0));
  CHECK(run_seed(1, 0) != run_seed(1, 1));
  CHECK(run_seed(1, 0) != run_seed(2, 0));
}

TEST_CASE("sweep results do not depend on the thread count") {
  SweepSpec s = small_sweep();
  s.jobs = 1;
  auto a = run_sweep(s);
  s.jobs = 3;
  auto b = run_sweep(s);
  std::ostringstream oa, ob;
  write_results_csv(oa, a);
  write_results_csv(ob, b);
  CHECK(oa.str() == ob.str());
  CHECK(a.size() == s.run_count());
}

TEST_CASE("interrupted sweeps resume to identical output") {
  const fs::path dir = fs::temp_directory_path() / "parity_forge_resume_test";
  fs::remove_all(dir);
  SweepSpec s = small_sweep();
  s.out_dir = dir.string();
  run_sweep(s);
  const std::string full = slurp(dir / "results.csv");

  // Keep the header and two rows as if the process died mid-sweep.
  std::istringstream in(full);
  std::ostringstream partial;
  std::string line;
  int data_rows = 0;
  while (std::getline(in, line)) {
    bool data = !line.empty() && line[0] != '#' && line.rfind("cell,", 0) != 0;
    if (data && data_rows++ >= 2) break;
    if (data) partial << line << '\n';
  }
  fs::remove(dir / "results.csv");
  std::ofstream(dir / "results.csv.partial") << partial.str();

  std::atomic<int> rerun{0};
  run_sweep(s, [&](const SweepRow&, const RunRecord&) { ++rerun; });
  CHECK(rerun == static_cast<int>(s.run_count()) - 2);
  CHECK(slurp(dir / "results.csv") == full);
  CHECK(!fs::exists(dir / "results.csv.partial"));

  // A changed configuration invalidates the cached rows.
  rerun = 0;
  s.base.max_iters = 401;
  run_sweep(s, [&](const SweepRow&, const RunRecord&) { ++rerun; });
  CHECK(rerun == static_cast<int>(s.run_count()));
  fs::remove_all(dir);
}

TEST_CASE("results csv round trip") {
  auto rows = run_sweep(small_sweep());
  std::stringstream ss;
  write_results_csv(ss, rows);
  auto back = read_results_csv(ss);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].t_c == rows[i].t_c);
    CHECK(back[i].config_hash == rows[i].config_hash);
    CHECK(back[i].final_val_error == rows[i].final_val_error);
  }
  std::stringstream again;
  write_results_csv(again, back);
  std::stringstream first;
  write_results_csv(first, rows);
  CHECK(again.str() == first.str());
}

TEST_CASE("percentile interpolates linearly") {
  std::vector<double> v = {1, 2, 3, 4};
  CHECK(percentile(v, 0.0) == 1.0);
  CHECK(percentile(v, 1.0) == 4.0);
  CHECK(percentile(v, 0.5) == 2.5);
  CHECK(percentile(v, 0.1) == doctest::Approx(1.3));
  CHECK_THROWS(percentile({}, 0.5));
}

TEST_CASE("golden convergence statistics") {
  std::vector<SweepRow> rows = {row_with(0, 0, 300), row_with(0, 1, 100), row_with(0, 2, std::nullopt),
                                row_with(0, 3, 400), row_with(0, 4, 200)};
  ConvergenceStats s = cell_stats(rows, 7);
  CHECK(s.trials == 5);
  CHECK(s.converged == 4);
  CHECK(s.success_rate == doctest::Approx(0.8));
  CHECK(*s.median == doctest::Approx(250.0));
  CHECK(*s.p10 == doctest::Approx(130.0));
  CHECK(*s.min == 100.0);
  CHECK(*s.max == 400.0);
  CHECK(*s.ci_lo >= 100.0);
  CHECK(*s.ci_hi <= 400.0);
  CHECK(*s.ci_lo <= *s.median);
  CHECK(*s.ci_hi >= *s.median);
  ConvergenceStats again = cell_stats(rows, 7);
  CHECK(*again.ci_lo == *s.ci_lo);

  ConvergenceStats none = cell_stats({row_with(1, 0, std::nullopt)});
  CHECK(none.success_rate == 0.0);
  CHECK(!none.median);
}

TEST_CASE("scaling fit recovers a quadratic exponent") {
  std::vector<std::pair<int, double>> pts;
  for (int n : {10, 15, 20, 30, 40}) pts.push_back({n, 7.0 * (n - 9) * (n - 9)});
  ScalingFit f = scaling_fit(pts);
  CHECK(f.c == doctest::Approx(7.0));
  CHECK(f.alpha == doctest::Approx(2.0));
  std::vector<std::pair<int, double>> shrinking = {{10, 100.0}, {20, 50.0}};
  CHECK(scaling_fit(shrinking).alpha == 0.0);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
  std::vector<std::atomic<int>> hits(50);
  parallel_for(50, 4, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 2,
                               [](std::size_t i) {
                                 if (i == 5) throw std::runtime_error("boom");
                               }),
                  std::runtime_error);
}
