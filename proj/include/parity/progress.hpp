#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "parity/loss.hpp"
#include "parity/models.hpp"
#include "parity/train.hpp"

// Hidden-progress measures. Everything here that takes an IndexSet is a diagnostic: the
// training loop itself never sees S except through labels.

namespace parity {

// First-layer weights laid out as (units x n). Disjoint PolyNets give one row with block i
// in columns [i n', (i+1) n').
Eigen::MatrixXd first_layer_weights(const Model& model);

// ||W_t - W_0||_inf over first-layer weights, and per unit.
double weight_movement(const Model& model_t, const Model& model_0);
Eigen::VectorXd unit_movement(const Model& model_t, const Model& model_0);

double relevant_max(const Model& model, const IndexSet& S);
double irrelevant_max(const Model& model, const IndexSet& S);

struct GapPoint {
  std::int64_t iter;
  double gap;
};

// Relaxed gap of the first-layer population gradient at each checkpoint.
std::vector<GapPoint> gap_along_path(const std::vector<std::pair<std::int64_t, Model>>& checkpoints,
                                     const ParityTask& task, LossKind loss);

struct TrendStat {
  double s = 0.0;    // sum of sign(x_j - x_i) over i < j
  double tau = 0.0;  // s normalized by the pair count
  double z = 0.0;    // normal approximation, no tie correction
};

TrendStat mann_kendall(const std::vector<double>& series);

// Spearman correlation with average ranks for ties. nullopt if either side is constant.
std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b);

// rho at the last recorded point with iter <= t.
double rho_at(const RunRecord& run, std::int64_t t);

struct Predictiveness {
  std::optional<double> correlation;
  std::size_t runs = 0;
  double probe_iter = 0.0;
  std::string note;
};

struct InsufficientRuns : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Spearman correlation between rho at median(t_c)/2 and t_c over converged runs (>= 20).
Predictiveness progress_predictiveness(const std::vector<RunRecord>& runs);
// Same statistic with rho read from `probe_runs` (e.g. noise-trained twins) against the
// t_c of `runs`.
Predictiveness progress_predictiveness(const std::vector<RunRecord>& runs,
                                       const std::vector<RunRecord>& probe_runs);

}  // namespace parity
