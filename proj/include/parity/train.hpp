#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parity/loss.hpp"
#include "parity/models.hpp"

namespace parity {

struct GroupRate {
  double eta = 0.0;
  double decay = 0.0;
};

// Per-group eta_t and lambda_t. Lookup order: recipe, group-name override, role override
// ("first", "hidden", "readout", "bias"), table, defaults.
struct Schedule {
  enum class Recipe { none, theorem_b1 };

  double eta = 0.1;
  double decay = 0.0;
  bool decay_biases = true;
  std::map<std::string, GroupRate> overrides;
  struct Step {
    std::int64_t from;
    double eta, decay;
  };
  std::vector<Step> table;  // piecewise constant in t, sorted by `from`

  Recipe recipe = Recipe::none;
  double b1_eta0 = 0.0;         // first step, all groups
  double b1_eta_readout = 0.0;  // later steps, readout only

  GroupRate rates(std::int64_t t, const GroupInfo& g) const;
  std::string describe() const;
};

Schedule constant_schedule(double eta, double decay = 0.0);

struct TheoremB1Recipe {
  Schedule schedule;
  InitScheme init = InitScheme::symmetric_paired_sign;
  double eta0 = 0.0;
  double eta_readout = 0.0;
};

// Requires odd n, even k, even r, T >= 2.
TheoremB1Recipe theorem_b1_schedule(int n, int k, int r, int B, std::int64_t T, double eps);

enum class ConvergenceRule { full, weak };
enum class DataMode { online, finite };

struct TrainConfig {
  LossKind loss = LossKind::hinge;
  int batch = 32;
  Schedule schedule;
  InitScheme init = InitScheme::uniform_xavier;
  std::uint64_t seed = 0;
  std::int64_t max_iters = 100000;
  int eval_every = 10;
  int eval_size = 8192;
  ConvergenceRule rule = ConvergenceRule::full;
  double target_error = 0.0;  // full rule: converged when val error <= target
  int weak_eval_size = 128;
  int weak_window = 10;
  double weak_accuracy = 0.55;
  DataMode data = DataMode::online;
  std::int64_t m = 0;  // finite-mode sample count
  int curve_every = 100;      // full-batch val error recorded on this cadence
  int screen_size = 128;      // prefix of the eval batch checked before a full evaluation
  int gap_every = 0;          // population-gradient gap cadence, 0 disables
  bool stop_at_convergence = true;
  bool track_train_error = false;  // finite mode: record t_train
  bool keep_checkpoints = false;
  int checkpoint_every = 50;

  void validate() const;
  std::string echo() const;  // key = value lines
  std::uint64_t hash() const;
};

struct EvalPoint {
  std::int64_t iter = 0;
  double train_loss = std::numeric_limits<double>::quiet_NaN();
  double val_error = std::numeric_limits<double>::quiet_NaN();
  double train_error = std::numeric_limits<double>::quiet_NaN();
  double rho_inf = std::numeric_limits<double>::quiet_NaN();
  double relevant_max = std::numeric_limits<double>::quiet_NaN();
  double irrelevant_max = std::numeric_limits<double>::quiet_NaN();
  double gap = std::numeric_limits<double>::quiet_NaN();
};

struct RunRecord {
  std::vector<EvalPoint> series;
  std::optional<std::int64_t> t_c;
  std::optional<std::int64_t> t_train, t_test;
  std::string status;  // converged | max_iters | diverged
  std::string failure;
  std::int64_t iterations = 0;
  double min_batch_loss = std::numeric_limits<double>::infinity();
  double last_batch_loss = std::numeric_limits<double>::quiet_NaN();
  double final_val_error = std::numeric_limits<double>::quiet_NaN();
  Model initial_model;
  Model final_model;
  std::vector<std::pair<std::int64_t, Model>> checkpoints;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::string config_echo;

  std::string summary_json() const;
  void write_csv(std::ostream& os) const;
};

struct NonFiniteGradient : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One application of theta <- (1 - lambda) theta - eta * grad per trainable group.
void sgd_step(Model& model, const Gradients& grads, const std::vector<GroupRate>& rates);

// Mean loss over the batch and its gradient.
double batch_loss_gradient(const Model& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           LossKind loss, Gradients& grads);

// Runs minibatch SGD. Never throws on divergence; the record's status says so.
RunRecord train(const ModelSpec& spec, const ParityTask& task, const TrainConfig& config);
RunRecord train_from(Model initial, const ParityTask& task, const TrainConfig& config);

// Finite-sample training that records first 100% train accuracy and first 100% held-out
// accuracy. Runs until t_test or max_iters.
RunRecord grok_train(const ModelSpec& spec, const ParityTask& task, std::int64_t m,
                     double weight_decay, TrainConfig config);

// Stream ids used inside a run.
namespace streams {
inline constexpr std::uint64_t init = 1, train = 2, eval = 3, weak = 4, shuffle = 5;
}

}  // namespace parity
