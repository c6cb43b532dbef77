#include "parity/train.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "parity/fourier.hpp"
#include "parity/progress.hpp"
#include "parity/theory.hpp"

namespace parity {

GroupRate Schedule::rates(std::int64_t t, const GroupInfo& g) const {
  if (!g.trainable) return {0.0, 0.0};
  if (recipe == Recipe::theorem_b1) {
    if (t == 0) return {b1_eta0, g.is_bias() ? 0.0 : 1.0};
    if (g.role == Role::readout) return {b1_eta_readout, 0.0};
    return {0.0, 0.0};
  }
  GroupRate r{eta, decay};
  for (auto it = table.rbegin(); it != table.rend(); ++it)
    if (t >= it->from) {
      r = {it->eta, it->decay};
      break;
    }
  auto role_key = [&]() -> std::string {
    switch (g.role) {
      case Role::first_weight:
      case Role::first_bias:
        return "first";
      case Role::hidden_weight:
      case Role::hidden_bias:
        return "hidden";
      case Role::readout:
        return "readout";
    }
    return "";
  }();
  if (auto it = overrides.find(role_key); it != overrides.end()) r = it->second;
  if (auto it = overrides.find(g.name); it != overrides.end()) r = it->second;
  if (g.is_bias() && !decay_biases) r.decay = 0.0;
  return r;
}

std::string Schedule::describe() const {
  std::ostringstream os;
  os << std::setprecision(17);
  if (recipe == Recipe::theorem_b1) {
    os << "theorem_b1(eta0=" << b1_eta0 << ",eta_readout=" << b1_eta_readout << ")";
    return os.str();
  }
  os << "eta=" << eta << ",decay=" << decay << ",decay_biases=" << decay_biases;
  for (const auto& [k, v] : overrides) os << "," << k << ":" << v.eta << "/" << v.decay;
  for (const auto& s : table) os << ",@" << s.from << ":" << s.eta << "/" << s.decay;
  return os.str();
}

Schedule constant_schedule(double eta, double decay) {
  Schedule s;
  s.eta = eta;
  s.decay = decay;
  return s;
}

TheoremB1Recipe theorem_b1_schedule(int n, int k, int r, int B, std::int64_t T, double eps) {
  if (n % 2 == 0) throw std::invalid_argument("theorem_b1_schedule: n must be odd");
  if (k % 2 != 0 || k < 2) throw std::invalid_argument("theorem_b1_schedule: k must be even");
  if (r % 2 != 0 || r < 2) throw std::invalid_argument("theorem_b1_schedule: r must be even");
  if (B < 1) throw std::invalid_argument("theorem_b1_schedule: B must be >= 1");
  if (T < 2) throw std::invalid_argument("theorem_b1_schedule: T must be >= 2");
  if (!(eps > 0.0)) throw std::invalid_argument("theorem_b1_schedule: eps must be > 0");
  TheoremB1Recipe out;
  const double xi = majority_coefficient(n, k - 1);
  out.eta0 = 1.0 / (k * std::abs(xi));
  out.eta_readout =
      4.0 * std::pow(k, 1.5) / (n * std::sqrt(static_cast<double>(r) * static_cast<double>(T - 1)));
  out.schedule.recipe = Schedule::Recipe::theorem_b1;
  out.schedule.b1_eta0 = out.eta0;
  out.schedule.b1_eta_readout = out.eta_readout;
  return out;
}

void TrainConfig::validate() const {
  if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be >= 1");
  if (max_iters < 1) throw std::invalid_argument("TrainConfig: max_iters must be >= 1");
  if (eval_size < 1) throw std::invalid_argument("TrainConfig: eval_size must be >= 1");
  if (eval_every < 1) throw std::invalid_argument("TrainConfig: eval_every must be >= 1");
  if (data == DataMode::finite && m < 1)
    throw std::invalid_argument("TrainConfig: finite mode needs m >= 1");
}

std::string TrainConfig::echo() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "loss = " << loss_name(loss) << "\n"
     << "batch = " << batch << "\n"
     << "schedule = " << schedule.describe() << "\n"
     << "init = " << init_name(init) << "\n"
     << "seed = " << seed << "\n"
     << "max_iters = " << max_iters << "\n"
     << "eval_every = " << eval_every << "\n"
     << "eval_size = " << eval_size << "\n"
     << "rule = " << (rule == ConvergenceRule::full ? "full" : "weak") << "\n"
     << "target_error = " << target_error << "\n"
     << "data = " << (data == DataMode::online ? "online" : "finite") << "\n"
     << "m = " << m << "\n";
  return os.str();
}

std::uint64_t TrainConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : echo()) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

std::string RunRecord::summary_json() const {
  std::ostringstream os;
  os << "{\"t_c\": " << (t_c ? std::to_string(*t_c) : "null") << ", \"seed\": " << seed
     << ", \"config_hash\": \"" << std::hex << std::setw(16) << std::setfill('0') << config_hash
     << std::dec << "\", \"status\": \"" << status << "\", \"iterations\": " << iterations
     << ", \"t_train\": " << (t_train ? std::to_string(*t_train) : "null")
     << ", \"t_test\": " << (t_test ? std::to_string(*t_test) : "null") << "}";
  return os.str();
}

void RunRecord::write_csv(std::ostream& os) const {
  os << "# parity-forge v" << PARITY_FORGE_VERSION << " schema=1\n";
  os << "iter,train_loss,val_error,train_error,rho_inf,relevant_max,irrelevant_max,gap\n";
  for (const auto& p : series)
    os << p.iter << ',' << fmt(p.train_loss) << ',' << fmt(p.val_error) << ','
       << fmt(p.train_error) << ',' << fmt(p.rho_inf) << ',' << fmt(p.relevant_max) << ','
       << fmt(p.irrelevant_max) << ',' << fmt(p.gap) << '\n';
  os << "# " << summary_json() << '\n';
}

void sgd_step(Model& model, const Gradients& grads, const std::vector<GroupRate>& rates) {
  auto params = parameters(model);
  if (grads.groups.size() != params.size() || rates.size() != params.size())
    throw std::invalid_argument("sgd_step: gradient/rate shape mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].info.trainable) continue;
    const auto& g = grads.groups[i];
    if (g.size() != params[i].values.size())
      throw std::invalid_argument("sgd_step: gradient shape mismatch in " + params[i].info.name);
    if (!g.allFinite()) throw NonFiniteGradient("non-finite gradient in group " + params[i].info.name);
    const double eta = rates[i].eta, lambda = rates[i].decay;
    if (eta == 0.0 && lambda == 0.0) continue;
    if (lambda == 1.0)
      params[i].values = -eta * g;
    else
      params[i].values = (1.0 - lambda) * params[i].values - eta * g;
  }
}

double batch_loss_gradient(const Model& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           LossKind loss, Gradients& grads) {
  Tape<double> tape;
  Eigen::VectorXd f = forward_batch(model, X, &tape);
  const Eigen::Index B = X.cols();
  Eigen::VectorXd up(B);
  double total = 0.0;
  for (Eigen::Index j = 0; j < B; ++j) {
    total += loss_value(loss, y[j], f[j]);
    up[j] = loss_derivative(loss, y[j], f[j]) / static_cast<double>(B);
  }
  grads = backward_batch(model, X, up, &tape);
  return total / static_cast<double>(B);
}

namespace {

// Fixed evaluation set with prefix screening.
struct EvalSet {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;

  EvalSet() = default;
  EvalSet(const ParityTask& clean, int size, RngStream rng) {
    Batch b = sample_batch(clean, size, rng);
    X = to_matrix(b);
    y.resize(size);
    for (int j = 0; j < size; ++j) y[j] = b.labels[j];
  }

  int errors(const Model& model, Eigen::Index cols) const {
    Eigen::VectorXd f = forward_batch(model, Eigen::MatrixXd(X.leftCols(cols)));
    int wrong = 0;
    for (Eigen::Index j = 0; j < cols; ++j)
      if (!(f[j] * y[j] > 0.0)) ++wrong;
    return wrong;
  }
  double error(const Model& model) const {
    return static_cast<double>(errors(model, X.cols())) / static_cast<double>(X.cols());
  }
  // Exact full-batch error if it could be <= target, otherwise a value above target.
  double screened_error(const Model& model, int screen, double target) const {
    Eigen::Index s = std::min<Eigen::Index>(screen, X.cols());
    if (s < X.cols()) {
      int w = errors(model, s);
      // Full-batch errors are at least w.
      if (static_cast<double>(w) / static_cast<double>(X.cols()) > target) return 1.0;
    }
    return error(model);
  }
};

// Supplies training batches in online or finite mode.
class DataSource {
 public:
  DataSource(const ParityTask& task, const TrainConfig& cfg)
      : task_(task), cfg_(cfg), rng_(cfg.seed, streams::train) {
    if (cfg.data == DataMode::finite) {
      Batch all = sample_batch(task, static_cast<int>(cfg.m), rng_);
      words_ = std::move(all.inputs);
      labels_ = std::move(all.labels);
      order_.resize(words_.size());
      std::iota(order_.begin(), order_.end(), 0);
    }
  }

  void next(std::vector<std::uint64_t>& words, Eigen::VectorXd& y) {
    const int B = cfg_.batch;
    words.resize(B);
    y.resize(B);
    if (cfg_.data == DataMode::online) {
      for (int j = 0; j < B; ++j) {
        auto [bits, label] = sample_point(task_, rng_);
        words[j] = bits;
        y[j] = label;
      }
      return;
    }
    for (int j = 0; j < B; ++j) {
      if (pos_ == order_.size()) {
        pos_ = 0;
        ++epoch_;
        RngStream sh = RngStream(cfg_.seed, streams::shuffle).split(epoch_);
        for (std::size_t i = order_.size(); i > 1; --i) std::swap(order_[i - 1], order_[sh.below(i)]);
      }
      std::size_t idx = order_[pos_++];
      words[j] = words_[idx];
      y[j] = labels_[idx];
    }
  }

  const std::vector<std::uint64_t>& words() const { return words_; }
  const std::vector<int>& labels() const { return labels_; }

 private:
  ParityTask task_;
  const TrainConfig& cfg_;
  RngStream rng_;
  std::vector<std::uint64_t> words_;
  std::vector<int> labels_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  std::uint64_t epoch_ = 0;
};

}  // namespace

RunRecord train(const ModelSpec& spec, const ParityTask& task, const TrainConfig& config) {
  if (spec.n != task.n) throw DimensionError("train: model and task dimensions differ");
  RngStream rng(config.seed, streams::init);
  return train_from(init(spec, config.init, rng), task, config);
}

RunRecord train_from(Model model, const ParityTask& task, const TrainConfig& cfg) {
  cfg.validate();
  if (input_dim(model) != task.n) throw DimensionError("train: model and task dimensions differ");
  RunRecord rec;
  rec.seed = cfg.seed;
  rec.config_echo = cfg.echo();
  rec.config_hash = cfg.hash();
  rec.initial_model = model;

  const ParityTask clean(task.support, 0.0);
  EvalSet eval(clean, cfg.eval_size, RngStream(cfg.seed, streams::eval));
  RngStream weak_rng(cfg.seed, streams::weak);
  DataSource data(task, cfg);

  EvalSet train_set;
  if (cfg.data == DataMode::finite && cfg.track_train_error) {
    train_set.X = to_matrix(task.n, data.words().data(), data.words().size());
    train_set.y.resize(static_cast<Eigen::Index>(data.labels().size()));
    for (std::size_t j = 0; j < data.labels().size(); ++j)
      train_set.y[static_cast<Eigen::Index>(j)] = data.labels()[j];
  }

  const auto groups = group_info(model);
  std::vector<GroupRate> rates(groups.size());
  std::vector<std::uint64_t> words;
  Eigen::VectorXd y;
  Gradients grads;
  double window_loss = 0.0;
  std::int64_t window_count = 0;
  int weak_streak = 0;

  auto diagnostics = [&](EvalPoint& p, const Model& m) {
    p.rho_inf = weight_movement(m, rec.initial_model);
    p.relevant_max = relevant_max(m, task.support);
    p.irrelevant_max = irrelevant_max(m, task.support);
    if (cfg.gap_every > 0 && p.iter % cfg.gap_every == 0 && task.n <= enumeration_cap())
      p.gap = first_layer_gap(m, task, cfg.loss);
  };

  // Returns true when the run should stop.
  auto evaluate = [&](std::int64_t t) -> bool {
    const bool curve = cfg.curve_every > 0 && t % cfg.curve_every == 0;
    EvalPoint p;
    p.iter = t;
    if (window_count) p.train_loss = window_loss / static_cast<double>(window_count);
    bool met = false;
    if (cfg.rule == ConvergenceRule::full) {
      double err = curve ? eval.error(model) : eval.screened_error(model, cfg.screen_size, cfg.target_error);
      met = err <= cfg.target_error;
      if (curve || met) p.val_error = err;
    } else {
      EvalSet fresh(clean, cfg.weak_eval_size, weak_rng.split(static_cast<std::uint64_t>(t)));
      double acc = 1.0 - fresh.error(model);
      weak_streak = acc >= cfg.weak_accuracy ? weak_streak + 1 : 0;
      met = weak_streak >= cfg.weak_window;
      if (curve || met) p.val_error = eval.error(model);
    }
    if (cfg.data == DataMode::finite && cfg.track_train_error && !rec.t_train) {
      double terr = curve ? train_set.error(model) : train_set.screened_error(model, cfg.screen_size, 0.0);
      if (terr == 0.0) rec.t_train = t;
      if (curve || terr == 0.0) p.train_error = terr;
    } else if (cfg.data == DataMode::finite && cfg.track_train_error && curve) {
      p.train_error = train_set.error(model);
    }
    if (met && !rec.t_c) rec.t_c = t;
    if (curve || met) {
      diagnostics(p, model);
      rec.series.push_back(p);
      window_loss = 0.0;
      window_count = 0;
    }
    if (cfg.keep_checkpoints && t % cfg.checkpoint_every == 0) rec.checkpoints.emplace_back(t, model);
    return met && cfg.stop_at_convergence;
  };

  rec.status = "max_iters";
  bool stop = evaluate(0);
  std::int64_t t = 0;
  while (!stop && t < cfg.max_iters) {
    data.next(words, y);
    Eigen::MatrixXd X = to_matrix(task.n, words.data(), words.size());
    double loss = batch_loss_gradient(model, X, y, cfg.loss, grads);
    rec.last_batch_loss = loss;
    rec.min_batch_loss = std::min(rec.min_batch_loss, loss);
    if (!std::isfinite(loss) || loss > 1e12) {
      rec.status = "diverged";
      rec.failure = "loss " + std::to_string(loss) + " at iteration " + std::to_string(t);
      break;
    }
    window_loss += loss;
    ++window_count;
    for (std::size_t i = 0; i < groups.size(); ++i) rates[i] = cfg.schedule.rates(t, groups[i]);
    try {
      sgd_step(model, grads, rates);
    } catch (const NonFiniteGradient& e) {
      rec.status = "diverged";
      rec.failure = std::string(e.what()) + " at iteration " + std::to_string(t);
      break;
    }
    if (cfg.schedule.recipe == Schedule::Recipe::theorem_b1 && t == 0) {
      for (auto& p : parameters(model))
        if (p.info.role == Role::readout) p.values.setZero();
    }
    ++t;
    if (!parameters_finite(model)) {
      rec.status = "diverged";
      rec.failure = "non-finite parameters at iteration " + std::to_string(t);
      break;
    }
    if (t % cfg.eval_every == 0) stop = evaluate(t);
    if (cfg.data == DataMode::finite && cfg.track_train_error && rec.t_train && rec.t_c &&
        !cfg.stop_at_convergence)
      break;
  }
  rec.iterations = t;
  if (rec.status != "diverged" && rec.t_c) rec.status = "converged";
  if (rec.status != "diverged") {
    rec.final_val_error = eval.error(model);
    if (rec.series.empty() || rec.series.back().iter != t) {
      EvalPoint p;
      p.iter = t;
      if (window_count) p.train_loss = window_loss / static_cast<double>(window_count);
      p.val_error = rec.final_val_error;
      if (cfg.data == DataMode::finite && cfg.track_train_error) p.train_error = train_set.error(model);
      diagnostics(p, model);
      rec.series.push_back(p);
    }
  }
  rec.final_model = std::move(model);
  return rec;
}

RunRecord grok_train(const ModelSpec& spec, const ParityTask& task, std::int64_t m,
                     double weight_decay, TrainConfig config) {
  if (m < 1) throw std::invalid_argument("grok_train: m must be >= 1");
  config.data = DataMode::finite;
  config.m = m;
  config.track_train_error = true;
  config.stop_at_convergence = false;
  config.schedule.decay = weight_decay;
  RunRecord rec = train(spec, task, config);
  rec.t_test = rec.t_c;
  return rec;
}

}  // namespace parity
