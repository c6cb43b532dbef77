#include "parity/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

namespace parity {

namespace fs = std::filesystem;

// ---- presets ---------------------------------------------------------------------------------

namespace {

std::string strip_parens(std::string s) {
  s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return c == '(' || c == ')'; }), s.end());
  return s;
}

Preset mlp(const std::string& name, int n, int k, int width, Activation act, double eta,
           bool train_u = true) {
  Preset p;
  p.name = name;
  p.spec.arch = Arch::mlp2;
  p.spec.n = n;
  p.spec.k = k;
  p.spec.width = width;
  p.spec.act = std::move(act);
  p.spec.train_u = train_u;
  p.eta = eta;
  return p;
}

}  // namespace

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{
      "i",   "ii",  "iii", "iv",  "v",  "vi",  "*i",  "*ii",         "vii",        "viii",
      "ix",  "x",   "xi",  "xii", "xiii", "xiv", "xv", "deep-quad-3", "deep-quad-4"};
  return names;
}

Preset make_preset(const std::string& raw, int n, int k) {
  const std::string name = strip_parens(raw);
  if (name == "i") return mlp(name, n, k, 10, Activation::relu(), 1.0);
  if (name == "ii") return mlp(name, n, k, 100, Activation::relu(), 1.0);
  if (name == "iii") return mlp(name, n, k, 1000, Activation::relu(), 1.0);
  if (name == "iv") return mlp(name, n, k, 10, Activation::poly(k), 0.01);
  if (name == "v") return mlp(name, n, k, 100, Activation::poly(k), 0.01);
  if (name == "vi") return mlp(name, n, k, 1000, Activation::poly(k), 0.01);
  if (name == "*i" || name == "*ii") {
    Preset p = name == "*i" ? mlp(name, n, k, k, Activation::relu(), 0.1)
                            : mlp(name, n, k, k, Activation::poly(k), 0.01);
    p.min_batch = 16;
    return p;
  }
  static const std::map<std::string, std::pair<std::string, double>> neurons{
      {"vii", {"k_zigzag", 0.2}},   {"viii", {"osc_poly", 0.01}}, {"ix", {"inf_zigzag", 0.1}},
      {"x", {"sinusoid", 0.01}},    {"xi", {"k_zigzag", 0.2}},    {"xii", {"osc_poly", 0.01}},
      {"xiii", {"inf_zigzag", 0.1}}, {"xiv", {"sinusoid", 0.01}}};
  if (auto it = neurons.find(name); it != neurons.end()) {
    const bool fixed_u = name == "xi" || name == "xii" || name == "xiii" || name == "xiv";
    return mlp(name, n, k, 1, Activation::parse(it->second.first, k), it->second.second, !fixed_u);
  }
  if (name == "xv") {
    Preset p;
    p.name = name;
    p.spec.arch = Arch::polynet;
    p.spec.n = n;
    p.spec.k = k;
    p.eta = 0.05;
    return p;
  }
  if (name == "deep-quad-3" || name == "deep-quad-4") {
    Preset p;
    p.name = name;
    p.spec.arch = Arch::deep_poly;
    p.spec.n = n;
    p.spec.k = k;
    p.spec.widths = name == "deep-quad-3" ? std::vector<int>{2, 1} : std::vector<int>{10, 10, 1};
    p.eta = 0.01;
    return p;
  }
  throw std::invalid_argument("unknown preset '" + raw + "'");
}

// ---- sweep spec ------------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T, typename F>
std::vector<T> map_list(const std::string& s, F f) {
  std::vector<T> out;
  for (const auto& item : split_list(s)) out.push_back(f(item));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

}  // namespace

std::size_t SweepSpec::cell_count() const {
  auto len = [](std::size_t s) { return std::max<std::size_t>(s, 1); };
  return presets.size() * ns.size() * ks.size() * flips.size() * batches.size() * len(etas.size()) *
         len(inits.size()) * losses.size() * ms.size() * decays.size();
}

SweepSpec SweepSpec::parse(const std::string& text) {
  SweepSpec s;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  auto to_int = [](const std::string& v) { return std::stoi(v); };
  auto to_i64 = [](const std::string& v) { return static_cast<std::int64_t>(std::stoll(v)); };
  auto to_double = [](const std::string& v) { return std::stod(v); };
  auto to_str = [](const std::string& v) { return v; };
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
    try {
      if (key == "preset" || key == "presets") s.presets = map_list<std::string>(val, to_str);
      else if (key == "n") s.ns = map_list<int>(val, to_int);
      else if (key == "k") s.ks = map_list<int>(val, to_int);
      else if (key == "flip" || key == "p") s.flips = map_list<double>(val, to_double);
      else if (key == "batch" || key == "B") s.batches = map_list<int>(val, to_int);
      else if (key == "eta") s.etas = map_list<double>(val, to_double);
      else if (key == "init") s.inits = map_list<std::string>(val, to_str);
      else if (key == "loss") s.losses = map_list<std::string>(val, to_str);
      else if (key == "m") s.ms = map_list<std::int64_t>(val, to_i64);
      else if (key == "decay" || key == "weight_decay") s.decays = map_list<double>(val, to_double);
      else if (key == "seeds") s.seeds = std::stoi(val);
      else if (key == "seed" || key == "base_seed") s.base_seed = std::stoull(val);
      else if (key == "jobs") s.jobs = std::stoi(val);
      else if (key == "out" || key == "out_dir") s.out_dir = val;
      else if (key == "max_iters") s.base.max_iters = std::stoll(val);
      else if (key == "eval_every") s.base.eval_every = std::stoi(val);
      else if (key == "eval_size") s.base.eval_size = std::stoi(val);
      else if (key == "curve_every") s.base.curve_every = std::stoi(val);
      else if (key == "screen_size") s.base.screen_size = std::stoi(val);
      else if (key == "target_error") s.base.target_error = std::stod(val);
      else if (key == "rule") {
        if (val == "full") s.base.rule = ConvergenceRule::full;
        else if (val == "weak") s.base.rule = ConvergenceRule::weak;
        else throw std::invalid_argument("rule must be full or weak");
      } else if (key == "weak_eval_size") s.base.weak_eval_size = std::stoi(val);
      else if (key == "weak_window") s.base.weak_window = std::stoi(val);
      else if (key == "weak_accuracy") s.base.weak_accuracy = std::stod(val);
      else throw std::invalid_argument("unknown key");
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + " (" + key +
                                  "): " + e.what());
    } catch (const std::out_of_range&) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + " (" + key +
                                  "): value out of range");
    }
  }
  if (s.seeds < 1) throw std::invalid_argument("seeds must be >= 1");
  for (const auto& p : s.presets) make_preset(p, 10, 2);  // validates names
  for (const auto& i : s.inits) parse_init(i);
  for (const auto& l : s.losses) parse_loss(l);
  return s;
}

SweepSpec SweepSpec::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot read config " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

Cell cell_at(const SweepSpec& spec, std::size_t index) {
  if (index >= spec.cell_count()) throw std::out_of_range("cell index out of range");
  Cell c;
  c.index = index;
  std::size_t rest = index;
  auto take = [&](std::size_t len) {
    std::size_t i = rest % std::max<std::size_t>(len, 1);
    rest /= std::max<std::size_t>(len, 1);
    return i;
  };
  // Last axis varies fastest.
  c.decay = spec.decays[take(spec.decays.size())];
  c.m = spec.ms[take(spec.ms.size())];
  c.loss = spec.losses[take(spec.losses.size())];
  const std::size_t init_i = take(spec.inits.size());
  const std::size_t eta_i = take(spec.etas.size());
  c.batch = spec.batches[take(spec.batches.size())];
  c.flip = spec.flips[take(spec.flips.size())];
  c.k = spec.ks[take(spec.ks.size())];
  c.n = spec.ns[take(spec.ns.size())];
  c.preset = spec.presets[take(spec.presets.size())];
  Preset p = make_preset(c.preset, c.n, c.k);
  c.init = spec.inits.empty() ? init_name(p.init) : spec.inits[init_i];
  c.eta = spec.etas.empty() ? p.eta : spec.etas[eta_i];
  return c;
}

std::uint64_t run_seed(std::uint64_t base_seed, int seed_index) {
  return hash64(base_seed, static_cast<std::uint64_t>(seed_index));
}

RunSetup run_setup(const SweepSpec& spec, const Cell& cell, int seed_index) {
  Preset p = make_preset(cell.preset, cell.n, cell.k);
  TrainConfig cfg = spec.base;
  cfg.batch = cell.batch;
  cfg.schedule = constant_schedule(cell.eta, cell.decay);
  cfg.init = parse_init(cell.init);
  cfg.loss = parse_loss(cell.loss);
  cfg.seed = run_seed(spec.base_seed, seed_index);
  if (cell.m > 0) {
    cfg.data = DataMode::finite;
    cfg.m = cell.m;
    cfg.track_train_error = true;
    cfg.stop_at_convergence = false;
  }
  return {p.spec, ParityTask(IndexSet::prefix(cell.n, cell.k), cell.flip), cfg};
}

double plateau_fraction(const RunRecord& rec, double level) {
  std::size_t total = 0, high = 0;
  for (const auto& p : rec.series) {
    if (std::isnan(p.val_error)) continue;
    if (rec.t_c && p.iter >= *rec.t_c) break;
    ++total;
    if (p.val_error >= level) ++high;
  }
  return total ? static_cast<double>(high) / static_cast<double>(total) : 0.0;
}

namespace {

std::uint64_t row_hash(const Cell& c, const RunSetup& s) {
  std::ostringstream os;
  os.precision(17);
  os << c.preset << '|' << c.n << '|' << c.k << '|' << c.flip << '|' << c.batch << '|' << c.eta
     << '|' << c.init << '|' << c.loss << '|' << c.m << '|' << c.decay << '|' << s.config.hash();
  return fnv(os.str());
}

}  // namespace

SweepRow make_row(const Cell& cell, int seed_index, const RunSetup& setup, const RunRecord& rec) {
  SweepRow r;
  r.cell = cell.index;
  r.seed_index = seed_index;
  r.preset = make_preset(cell.preset, cell.n, cell.k).name;
  r.n = cell.n;
  r.k = cell.k;
  r.flip = cell.flip;
  r.batch = cell.batch;
  r.eta = cell.eta;
  r.init = cell.init;
  r.loss = cell.loss;
  r.m = cell.m;
  r.decay = cell.decay;
  r.seed = setup.config.seed;
  r.status = rec.status;
  r.t_c = rec.t_c;
  r.t_train = rec.t_train;
  r.t_test = rec.t_test ? rec.t_test : (cell.m > 0 ? rec.t_c : std::nullopt);
  r.iterations = rec.iterations;
  r.final_val_error = rec.final_val_error;
  r.plateau_fraction = plateau_fraction(rec);
  r.config_hash = row_hash(cell, setup);
  return r;
}

void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  const std::size_t threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= count) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          next = count;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// ---- CSV -------------------------------------------------------------------------------------

namespace {

constexpr const char* kResultsHeader =
    "cell,seed_index,preset,n,k,flip,batch,eta,init,loss,m,decay,seed,status,t_c,t_train,t_test,"
    "iterations,final_val_error,plateau_fraction,config_hash";

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string opt(const std::optional<std::int64_t>& v) { return v ? std::to_string(*v) : ""; }

std::string row_line(const SweepRow& r) {
  std::ostringstream os;
  char hash[20];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.config_hash));
  os << r.cell << ',' << r.seed_index << ',' << r.preset << ',' << r.n << ',' << r.k << ','
     << g17(r.flip) << ',' << r.batch << ',' << g17(r.eta) << ',' << r.init << ',' << r.loss << ','
     << r.m << ',' << g17(r.decay) << ',' << r.seed << ',' << r.status << ',' << opt(r.t_c) << ','
     << opt(r.t_train) << ',' << opt(r.t_test) << ',' << r.iterations << ','
     << g17(r.final_val_error) << ',' << g17(r.plateau_fraction) << ',' << hash;
  return os.str();
}

std::optional<std::int64_t> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stoll(s);
}

SweepRow parse_row(const std::string& line) {
  std::vector<std::string> f;
  std::stringstream ss(line);
  std::string item;
  while (std::getline(ss, item, ',')) f.push_back(item);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  if (f.size() != 21) throw std::invalid_argument("results row has " + std::to_string(f.size()) + " fields");
  SweepRow r;
  r.cell = std::stoull(f[0]);
  r.seed_index = std::stoi(f[1]);
  r.preset = f[2];
  r.n = std::stoi(f[3]);
  r.k = std::stoi(f[4]);
  r.flip = std::stod(f[5]);
  r.batch = std::stoi(f[6]);
  r.eta = std::stod(f[7]);
  r.init = f[8];
  r.loss = f[9];
  r.m = std::stoll(f[10]);
  r.decay = std::stod(f[11]);
  r.seed = std::stoull(f[12]);
  r.status = f[13];
  r.t_c = parse_opt(f[14]);
  r.t_train = parse_opt(f[15]);
  r.t_test = parse_opt(f[16]);
  r.iterations = std::stoll(f[17]);
  r.final_val_error = std::stod(f[18]);
  r.plateau_fraction = std::stod(f[19]);
  r.config_hash = std::stoull(f[20], nullptr, 16);
  return r;
}

}  // namespace

void write_results_csv(std::ostream& os, const std::vector<SweepRow>& rows) {
  os << "# parity-forge v" << PARITY_FORGE_VERSION << " schema=1\n" << kResultsHeader << '\n';
  for (const auto& r : rows) os << row_line(r) << '\n';
}

std::vector<SweepRow> read_results_csv(std::istream& is) {
  std::vector<SweepRow> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("cell,", 0) == 0) continue;
    rows.push_back(parse_row(line));
  }
  return rows;
}

std::vector<SweepRow> read_results_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot read " + path);
  return read_results_csv(is);
}

// ---- sweep -----------------------------------------------------------------------------------

std::vector<SweepRow> run_sweep(const SweepSpec& spec, const RunCallback& on_run) {
  const std::size_t cells = spec.cell_count(), total = spec.run_count();
  std::vector<Cell> cell_list;
  for (std::size_t c = 0; c < cells; ++c) cell_list.push_back(cell_at(spec, c));

  std::map<std::pair<std::size_t, int>, SweepRow> done;
  fs::path final_path, partial_path;
  std::ofstream partial;
  if (!spec.out_dir.empty()) {
    fs::create_directories(spec.out_dir);
    final_path = fs::path(spec.out_dir) / "results.csv";
    partial_path = fs::path(spec.out_dir) / "results.csv.partial";
    for (const auto& p : {final_path, partial_path}) {
      if (!fs::exists(p)) continue;
      std::ifstream is(p);
      std::string line;
      while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("cell,", 0) == 0) continue;
        try {
          SweepRow r = parse_row(line);
          done[{r.cell, r.seed_index}] = r;
        } catch (const std::exception&) {
          // torn last line of an interrupted run
        }
      }
    }
    partial.open(partial_path, std::ios::app);
    if (!partial) throw std::runtime_error("cannot write " + partial_path.string());
  }

  std::vector<SweepRow> rows(total);
  std::vector<char> reuse(total, 0);
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t c = i / static_cast<std::size_t>(spec.seeds);
    const int s = static_cast<int>(i % static_cast<std::size_t>(spec.seeds));
    auto it = done.find({c, s});
    if (it == done.end()) continue;
    RunSetup setup = run_setup(spec, cell_list[c], s);
    if (it->second.config_hash == row_hash(cell_list[c], setup)) {
      rows[i] = it->second;
      reuse[i] = 1;
    }
  }

  std::mutex mu;
  parallel_for(total, spec.jobs, [&](std::size_t i) {
    if (reuse[i]) return;
    const std::size_t c = i / static_cast<std::size_t>(spec.seeds);
    const int s = static_cast<int>(i % static_cast<std::size_t>(spec.seeds));
    RunSetup setup = run_setup(spec, cell_list[c], s);
    RunRecord rec = train(setup.model, setup.task, setup.config);
    SweepRow row = make_row(cell_list[c], s, setup, rec);
    std::lock_guard lock(mu);
    rows[i] = row;
    if (partial.is_open()) partial << row_line(row) << '\n' << std::flush;
    if (on_run) on_run(row, rec);
  });

  if (!spec.out_dir.empty()) {
    partial.close();
    {
      std::ofstream os(final_path);
      if (!os) throw std::runtime_error("cannot write " + final_path.string());
      write_results_csv(os, rows);
    }
    fs::remove(partial_path);
  }
  return rows;
}

// ---- statistics ------------------------------------------------------------------------------

double percentile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("percentile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

ConvergenceStats cell_stats(const std::vector<SweepRow>& rows, std::uint64_t bootstrap_seed,
                            int resamples) {
  if (rows.empty()) throw std::invalid_argument("stats: empty cell");
  ConvergenceStats s;
  const SweepRow& f = rows.front();
  s.cell = f.cell;
  s.n = f.n;
  s.k = f.k;
  std::ostringstream label;
  label << f.preset << " n=" << f.n << " k=" << f.k << " B=" << f.batch << " eta=" << f.eta;
  if (f.flip > 0) label << " p=" << f.flip;
  if (f.m > 0) label << " m=" << f.m;
  if (f.decay > 0) label << " decay=" << f.decay;
  s.label = label.str();
  s.trials = rows.size();
  std::vector<double> tc;
  for (const auto& r : rows)
    if (r.t_c) tc.push_back(static_cast<double>(*r.t_c));
  s.converged = tc.size();
  s.success_rate = static_cast<double>(tc.size()) / static_cast<double>(rows.size());
  if (tc.empty()) return s;
  std::sort(tc.begin(), tc.end());
  s.median = percentile(tc, 0.5);
  s.p10 = percentile(tc, 0.1);
  s.min = tc.front();
  s.max = tc.back();
  RngStream rng(bootstrap_seed, 0x5eed0000ULL + s.cell);
  std::vector<double> medians, sample(tc.size());
  for (int b = 0; b < resamples; ++b) {
    for (auto& x : sample) x = tc[rng.below(tc.size())];
    std::sort(sample.begin(), sample.end());
    medians.push_back(percentile(sample, 0.5));
  }
  std::sort(medians.begin(), medians.end());
  s.ci_lo = percentile(medians, 0.025);
  s.ci_hi = percentile(medians, 0.975);
  return s;
}

std::vector<ConvergenceStats> stats(const std::vector<SweepRow>& rows, std::uint64_t bootstrap_seed) {
  if (rows.empty()) throw std::invalid_argument("stats: no rows");
  std::map<std::size_t, std::vector<SweepRow>> by_cell;
  for (const auto& r : rows) by_cell[r.cell].push_back(r);
  std::vector<ConvergenceStats> out;
  for (const auto& [c, rs] : by_cell) out.push_back(cell_stats(rs, bootstrap_seed));
  return out;
}

void write_stats_csv(std::ostream& os, const std::vector<ConvergenceStats>& table) {
  auto o = [](const std::optional<double>& v) { return v ? g17(*v) : std::string(); };
  os << "# parity-forge v" << PARITY_FORGE_VERSION << " schema=1\n";
  os << "cell,label,n,k,trials,converged,success_rate,median,p10,ci_lo,ci_hi,min,max\n";
  for (const auto& s : table)
    os << s.cell << ",\"" << s.label << "\"," << s.n << ',' << s.k << ',' << s.trials << ','
       << s.converged << ',' << g17(s.success_rate) << ',' << o(s.median) << ',' << o(s.p10) << ','
       << o(s.ci_lo) << ',' << o(s.ci_hi) << ',' << o(s.min) << ',' << o(s.max) << '\n';
}

ScalingFit scaling_fit(const std::vector<std::pair<int, double>>& tc_by_n) {
  ScalingFit fit;
  auto base = std::find_if(tc_by_n.begin(), tc_by_n.end(), [](const auto& p) { return p.first == 10; });
  if (base == tc_by_n.end()) throw std::invalid_argument("scaling_fit: missing n = 10");
  if (!(base->second > 0)) throw std::invalid_argument("scaling_fit: t_c(10) must be positive");
  fit.c = base->second;
  for (const auto& [n, t] : tc_by_n) {
    if (n <= 10) continue;
    if (!(t > 0)) throw std::invalid_argument("scaling_fit: t_c must be positive");
    fit.alpha = std::max(fit.alpha, std::log(t / fit.c) / std::log(static_cast<double>(n - fit.n0)));
  }
  return fit;
}

}  // namespace parity
