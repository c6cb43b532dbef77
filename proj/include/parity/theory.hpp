#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parity/loss.hpp"
#include "parity/models.hpp"
#include "parity/train.hpp"

namespace parity {

// ---- population gradients and support recovery ---------------------------------------------

// E_{(x,y)}[grad l(y, f(x))] by enumeration. Label noise enters exactly as
// (1-p) grad l(chi, f) + p grad l(-chi, f).
Gradients population_gradient(const Model& model, const ParityTask& task, LossKind loss);

// First-layer population gradient as a (rows x n) matrix, see first_layer_weights.
Eigen::MatrixXd first_layer_population_gradient(const Model& model, const ParityTask& task,
                                                LossKind loss);

// Relaxed gap of the column-wise max |first-layer population gradient|.
double first_layer_gap(const Model& model, const ParityTask& task, LossKind loss);

// Closed-form first-layer gradient at a sign-init Mlp2 with zero output and |b| < 1, n odd:
// -1/2 u_i xi_{k-1} chi_{S\{j}}(w_i) on S, -1/2 u_i xi_{k+1} chi_{S+{j}}(w_i) off S.
Eigen::MatrixXd sign_init_gradient_closed_form(const Mlp2<double>& model, const IndexSet& S);

// Indices of the k largest |g_i|, ties to the lower index.
IndexSet recover_support(const Eigen::VectorXd& g, int k);

int recovery_batch_size(int n, int k, double constant = 8.0);

struct RecoveryTrial {
  IndexSet truth, found;
  bool success = false;
};

struct RecoveryResult {
  double rate = 0.0;
  std::vector<RecoveryTrial> trials;
};

// Per trial: fresh S, random sign neuron with b = 0, B-sample ReLU correlation-loss gradient,
// recover_support. n odd, k even, n >= 4k.
RecoveryResult single_step_recovery(int n, int k, int B, int trials, RngStream rng);

// ---- disjoint-PolyNet error ------------------------------------------------------------------

// Distribution of s = u . z for uniform z in {+-1}^m, as sorted atoms.
struct SumDistribution {
  std::vector<double> values, probs;
  double p_less(double t) const;
  double p_equal(double t) const;
  double p_greater(double t) const;
};

// Exact when the number of distinct atoms stays <= max_atoms, otherwise nullopt.
std::optional<SumDistribution> exact_sum_distribution(const Eigen::VectorXd& u,
                                                      std::size_t max_atoms = std::size_t{1} << 22);

struct DisjointError {
  double value = 0.0;
  double std_error = 0.0;  // 0 when exact
  bool exact = true;
};

// W is k x n'; column 0 of each row is the relevant weight v_i.
DisjointError exact_disjoint_error(const Eigen::MatrixXd& W, std::uint64_t mc_samples = 1000000,
                                   std::uint64_t mc_seed = 0);

struct ErrBounds {
  double lower = 0.0;
  double upper = 0.0;
  std::optional<double> exact;
};

inline constexpr double kBerryEsseen = 0.56;

ErrBounds err_bounds(const Eigen::MatrixXd& W, bool with_exact = true);

// ---- gradient flow ---------------------------------------------------------------------------

enum class FlowInit { all_ones, sign, gaussian };

struct FlowOptions {
  double rtol = 1e-9;
  double atol = 1e-12;
  double v_max = 1e6;
  double switch_at = 1e3;   // |v| at which the scalar q variable takes over
  double t_max = 1e6;
  double bisection_tol = 1e-6;
  bool force_positive = true;  // flip v_1's sign if prod v(0) < 0 (sign/gaussian init)
};

struct FlowSample {
  double t = 0.0;
  Eigen::VectorXd v;
  double product = 0.0;
  double q = 0.0;
  double error = 0.0;
  double lower = 0.0, upper = 0.0;
};

struct FlowTrajectory {
  int n_prime = 0, k = 0;
  Eigen::MatrixXd W0;  // k x n' initial weights
  std::vector<FlowSample> grid;
  std::map<double, std::optional<double>> T;  // alpha -> first time error <= alpha
  std::string termination;                    // error_target | weight_cap | time_cap
  double t_end = 0.0;
  bool positive_product = true;
  bool sign_flipped = false;
  double rtol = 1e-9;

  double v_bar_a() const;  // mean of v_i(0)^2
  double v_bar_g() const;  // geometric mean of v_i(0)^2
};

FlowTrajectory gradient_flow_disjoint(const Eigen::MatrixXd& W0, const std::vector<double>& alphas,
                                      const FlowOptions& opts = {});
FlowTrajectory gradient_flow_disjoint(int n_prime, int k, FlowInit init, RngStream rng,
                                      const std::vector<double>& alphas,
                                      const FlowOptions& opts = {});

// Alpha level that stands for "error 0": below one hypercube point.
double zero_error_level(int n);

struct FlowChecks {
  bool monotone_product = true;
  double max_increment_deviation = 0.0;  // relative to 1 + |q|
  bool equal_increments = true;
  bool q_bracketed = true;
  bool time_bound = true;  // lower bound on T_i(b)
  bool symmetric = true;   // equal v(0) => equal v(t)
  bool all() const {
    return monotone_product && equal_increments && q_bracketed && time_bound && symmetric;
  }
};

FlowChecks check_flow(const FlowTrajectory& traj);

// q(t) brackets (lower uses the geometric mean, upper the arithmetic mean); k = 2 is the
// exponential regime.
std::pair<double, double> q_brackets(double t, int k, double v_bar_g, double v_bar_a);
// Lower bound on the time for |v_i| to reach b, and upper bound on the time from b to blow-up.
double time_to_reach_lower_bound(double b, double v_i0, int k, double v_bar_a);
double time_to_blowup_upper_bound(double b, double v_i0, int k, double v_bar_g);

// ---- adaptive SGD ----------------------------------------------------------------------------

// Smallest T with T >= 6 log(2nT/delta) log(2k/eps) (3n'-2)^{2k-1}.
std::int64_t theorem_b4_horizon(int n_prime, int k, double eps, double delta);

struct AdaptiveRun {
  RunRecord record;        // series: val_error = exact error, irrelevant_max
  double final_error = 0.5;
  double max_irrelevant = 0.0;
  bool claim_upper = true;  // max_{j>1} |w_ij| <= 3/2 throughout
  std::int64_t claim_lower_violations = 0;
  int resamples = 0;       // init redraws to get prod sign(w_i1) > 0
  std::optional<std::int64_t> first_below_eps;
};

struct AdaptiveOptions {
  int B = 1;
  double eps = 0.01;
  double eta_scale = 1.0;  // 0 freezes the weights
  bool force_positive = true;
  std::int64_t log_every = 0;  // 0 picks ~200 points
};

AdaptiveRun adaptive_sgd_disjoint(int n_prime, int k, std::int64_t T, double delta, RngStream rng,
                                  const AdaptiveOptions& opts = {});

}  // namespace parity
