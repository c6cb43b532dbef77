#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "parity/bench.hpp"
#include "parity/progress.hpp"
#include "parity/svg.hpp"
#include "parity/theory.hpp"

namespace parity {

namespace fs = std::filesystem;

namespace {

struct Output {
  fs::path dir;
  std::string name;
  std::vector<std::string> written;

  std::ofstream csv(const std::string& header) {
    fs::path p = dir / (name + ".csv");
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << "# parity-forge v" << PARITY_FORGE_VERSION << " schema=1\n" << header << '\n';
    written.push_back(p.string());
    return os;
  }
  void plot(const svg::Plot& plot) {
    fs::path p = dir / (name + ".svg");
    svg::write(p.string(), plot);
    written.push_back(p.string());
  }
};

int scaled(double base, const FigureOptions& o) {
  return std::max(1, static_cast<int>(std::lround(base * o.scale)));
}

svg::Series curve_of(const std::string& label, const RunRecord& rec) {
  svg::Series s{label, {}, {}};
  for (const auto& p : rec.series)
    if (!std::isnan(p.val_error)) {
      s.x.push_back(static_cast<double>(p.iter));
      s.y.push_back(p.val_error);
    }
  return s;
}

void write_curve_rows(std::ostream& os, const std::string& label, const RunRecord& rec) {
  for (const auto& p : rec.series)
    if (!std::isnan(p.val_error))
      os << label << ',' << p.iter << ',' << p.train_loss << ',' << p.val_error << ',' << p.rho_inf
         << '\n';
}

std::vector<RunRecord> run_many(const ModelSpec& spec, const ParityTask& task, TrainConfig cfg,
                                int seeds, const FigureOptions& o) {
  std::vector<RunRecord> out(static_cast<std::size_t>(seeds));
  parallel_for(out.size(), o.jobs, [&](std::size_t i) {
    TrainConfig c = cfg;
    c.seed = run_seed(o.seed, static_cast<int>(i));
    out[i] = train(spec, task, c);
  });
  return out;
}

double median_tc(const std::vector<RunRecord>& runs) {
  std::vector<double> tc;
  for (const auto& r : runs)
    if (r.t_c) tc.push_back(static_cast<double>(*r.t_c));
  if (tc.empty()) return std::nan("");
  std::sort(tc.begin(), tc.end());
  return percentile(tc, 0.5);
}

TrainConfig preset_config(const Preset& p, int batch, std::int64_t max_iters) {
  TrainConfig cfg;
  cfg.batch = batch;
  cfg.schedule = constant_schedule(p.eta);
  cfg.init = p.init;
  cfg.max_iters = max_iters;
  return cfg;
}

void training_curves(Output& out, const FigureOptions& o) {
  const int n = 20, k = 3;
  ParityTask task(IndexSet::prefix(n, k));
  auto os = out.csv("series,iter,train_loss,val_error,rho_inf");
  svg::Plot plot{"Validation error, (20,3)", "iteration", "val error", false, false, {}};
  for (const std::string name : {"i", "ii", "iv", "xv"}) {
    Preset p = make_preset(name, n, k);
    TrainConfig cfg = preset_config(p, 32, 30000);
    cfg.seed = o.seed;
    cfg.curve_every = 50;
    RunRecord rec = train(p.spec, task, cfg);
    write_curve_rows(os, "(" + name + ")", rec);
    plot.series.push_back(curve_of("(" + name + ")", rec));
  }
  out.plot(plot);
}

void histograms(Output& out, const FigureOptions& o) {
  Preset p = make_preset("i", 15, 3);
  ParityTask task(IndexSet::prefix(15, 3));
  auto runs = run_many(p.spec, task, preset_config(p, 32, 100000), scaled(200, o), o);
  auto os = out.csv("seed_index,status,t_c");
  std::vector<double> tc;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    os << i << ',' << runs[i].status << ',' << (runs[i].t_c ? std::to_string(*runs[i].t_c) : "")
       << '\n';
    if (runs[i].t_c) tc.push_back(static_cast<double>(*runs[i].t_c));
  }
  std::sort(tc.begin(), tc.end());
  svg::Series cdf{"(i), (15,3)", {}, {}};
  for (std::size_t i = 0; i < tc.size(); ++i) {
    cdf.x.push_back(tc[i]);
    cdf.y.push_back(static_cast<double>(i + 1) / static_cast<double>(runs.size()));
  }
  out.plot({"Convergence time CDF", "t_c", "fraction converged", true, false, {cdf}});
}

void width(Output& out, const FigureOptions& o) {
  const int n = 20, k = 3;
  ParityTask task(IndexSet::prefix(n, k));
  auto os = out.csv("width,trials,converged,median_t_c");
  svg::Series s{"ReLU MLP, (20,3)", {}, {}};
  for (int r : {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 30, 100}) {
    ModelSpec spec = make_preset("ii", n, k).spec;
    spec.width = r;
    TrainConfig cfg;
    cfg.schedule = constant_schedule(0.1);
    cfg.max_iters = 100000;
    auto runs = run_many(spec, task, cfg, scaled(10, o), o);
    const double med = median_tc(runs);
    std::size_t conv = 0;
    for (const auto& rr : runs) conv += rr.t_c.has_value();
    os << r << ',' << runs.size() << ',' << conv << ',' << med << '\n';
    s.x.push_back(r);
    s.y.push_back(med);
  }
  out.plot({"Median t_c vs width", "width", "median t_c", true, true, {s}});
}

void grokking(Output& out, const FigureOptions& o) {
  const int n = 30, k = 3;
  ParityTask task(IndexSet::prefix(n, k));
  Preset p = make_preset("ii", n, k);
  auto os = out.csv("m,decay,seed_index,t_train,t_test");
  svg::Plot plot{"Test/train time ratio", "m", "median t_test / t_train", true, false, {}};
  for (double decay : {0.0, 0.01}) {
    svg::Series s{"decay " + std::to_string(decay).substr(0, 4), {}, {}};
    for (std::int64_t m : {500, 1000, 2000, 4000}) {
      std::vector<RunRecord> runs(static_cast<std::size_t>(scaled(3, o)));
      parallel_for(runs.size(), o.jobs, [&](std::size_t i) {
        TrainConfig cfg;
        cfg.schedule = constant_schedule(0.1);
        cfg.max_iters = 50000;
        cfg.seed = run_seed(o.seed, static_cast<int>(i));
        runs[i] = grok_train(p.spec, task, m, decay, cfg);
      });
      std::vector<double> ratios;
      for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& r = runs[i];
        os << m << ',' << decay << ',' << i << ',' << (r.t_train ? std::to_string(*r.t_train) : "")
           << ',' << (r.t_test ? std::to_string(*r.t_test) : "") << '\n';
        if (r.t_train && r.t_test && *r.t_train > 0)
          ratios.push_back(static_cast<double>(*r.t_test) / static_cast<double>(*r.t_train));
      }
      std::sort(ratios.begin(), ratios.end());
      s.x.push_back(static_cast<double>(m));
      s.y.push_back(ratios.empty() ? std::nan("") : percentile(ratios, 0.5));
    }
    plot.series.push_back(s);
  }
  out.plot(plot);
}

void noise(Output& out, const FigureOptions& o) {
  const int n = 20, k = 3;
  Preset p = make_preset("ii", n, k);
  auto os = out.csv("series,iter,train_loss,val_error,rho_inf");
  svg::Plot plot{"Clean validation error under label noise, (20,3)", "iteration", "val error",
                 false, false, {}};
  for (double flip : {0.0, 0.1, 0.2}) {
    TrainConfig cfg;
    cfg.batch = 128;
    cfg.schedule = constant_schedule(0.1);
    cfg.max_iters = 20000;
    cfg.stop_at_convergence = false;
    cfg.target_error = 0.01;
    cfg.seed = o.seed;
    RunRecord rec = train(p.spec, ParityTask(IndexSet::prefix(n, k), flip), cfg);
    const std::string label = "p=" + std::to_string(flip).substr(0, 3);
    write_curve_rows(os, label, rec);
    plot.series.push_back(curve_of(label, rec));
  }
  out.plot(plot);
}

void flow(Output& out, const FigureOptions&) {
  auto os = out.csv("k,n_prime,t,product,error,lower,upper");
  svg::Plot plot{"Disjoint-PolyNet gradient flow error", "t", "error", false, false, {}};
  for (auto [k, np] : {std::pair{3, 25}, std::pair{4, 25}}) {
    Eigen::MatrixXd W = Eigen::MatrixXd::Ones(k, np);
    FlowTrajectory tr = gradient_flow_disjoint(W, {0.49, 0.0});
    svg::Series s{"k=" + std::to_string(k) + ", n'=" + std::to_string(np), {}, {}};
    for (const auto& g : tr.grid) {
      os << k << ',' << np << ',' << g.t << ',' << g.product << ',' << g.error << ',' << g.lower
         << ',' << g.upper << '\n';
      s.x.push_back(g.t);
      s.y.push_back(g.error);
    }
    plot.series.push_back(s);
  }
  out.plot(plot);
}

void gaps(Output& out, const FigureOptions& o) {
  const int n = 15, k = 3;
  ParityTask task(IndexSet::prefix(n, k));
  Preset p = make_preset("xiv", n, k);
  p.spec.act = Activation::sinusoid(k, 2.0);
  auto os = out.csv("seed_index,iter,gap");
  svg::Plot plot{"Relaxed Fourier gap along the SGD path", "iteration", "gap", false, false, {}};
  for (int s = 0; s < scaled(3, o); ++s) {
    TrainConfig cfg = preset_config(p, 32, 2000);
    cfg.seed = run_seed(o.seed, s);
    cfg.keep_checkpoints = true;
    cfg.checkpoint_every = 50;
    cfg.stop_at_convergence = false;
    RunRecord rec = train(p.spec, task, cfg);
    auto path = gap_along_path(rec.checkpoints, task, cfg.loss);
    svg::Series series{"seed " + std::to_string(s), {}, {}};
    for (const auto& g : path) {
      os << s << ',' << g.iter << ',' << g.gap << '\n';
      series.x.push_back(static_cast<double>(g.iter));
      series.y.push_back(g.gap);
    }
    plot.series.push_back(series);
  }
  out.plot(plot);
}

void deep_quad(Output& out, const FigureOptions& o) {
  const int n = 10, k = 4;
  ParityTask task(IndexSet::prefix(n, k));
  auto os = out.csv("series,iter,train_loss,val_error,rho_inf");
  svg::Plot plot{"Deep quadratic MLP, (10,4)", "iteration", "val error", false, false, {}};
  for (const std::string name : {"deep-quad-3", "deep-quad-4"}) {
    Preset p = make_preset(name, n, k);
    TrainConfig cfg = preset_config(p, 32, 20000);
    cfg.seed = o.seed;
    RunRecord rec = train(p.spec, task, cfg);
    write_curve_rows(os, name, rec);
    plot.series.push_back(curve_of(name, rec));
  }
  out.plot(plot);
}

void no_plateau(Output& out, const FigureOptions& o) {
  const int n = 15, k = 3;
  ParityTask task(IndexSet::prefix(n, k));
  auto os = out.csv("series,iter,train_loss,val_error,rho_inf");
  svg::Plot plot{"Plateau comparison at B=256, (15,3)", "iteration", "val error", false, false, {}};
  for (const std::string name : {"iii", "vi"}) {
    Preset p = make_preset(name, n, k);
    TrainConfig cfg = preset_config(p, 256, 5000);
    cfg.seed = o.seed;
    cfg.curve_every = 20;
    RunRecord rec = train(p.spec, task, cfg);
    const std::string label = "(" + name + ") plateau " + std::to_string(plateau_fraction(rec)).substr(0, 4);
    write_curve_rows(os, "(" + name + ")", rec);
    plot.series.push_back(curve_of(label, rec));
  }
  out.plot(plot);
}

}  // namespace

const std::vector<std::string>& figure_names() {
  static const std::vector<std::string> names{"training-curves", "histograms", "width",
                                              "grokking",        "noise",      "flow",
                                              "gaps",            "deep-quad",  "no-plateau"};
  return names;
}

std::vector<std::string> figure_emit(const std::string& name, const FigureOptions& opts) {
  static const std::map<std::string, void (*)(Output&, const FigureOptions&)> table{
      {"training-curves", training_curves}, {"histograms", histograms}, {"width", width},
      {"grokking", grokking},               {"noise", noise},           {"flow", flow},
      {"gaps", gaps},                       {"deep-quad", deep_quad},   {"no-plateau", no_plateau}};
  auto it = table.find(name);
  if (it == table.end()) throw std::invalid_argument("unknown experiment '" + name + "'");
  fs::create_directories(opts.out_dir);
  Output out{opts.out_dir, name, {}};
  it->second(out, opts);
  return out.written;
}

}  // namespace parity
