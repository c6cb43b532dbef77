#include "parity/progress.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "parity/theory.hpp"

namespace parity {

Eigen::MatrixXd first_layer_weights(const Model& model) {
  return std::visit(
      [](const auto& m) -> Eigen::MatrixXd {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Mlp2<double>> || std::is_same_v<M, PolyNet<double>>) {
          return m.W;
        } else if constexpr (std::is_same_v<M, DisjointPolyNet<double>>) {
          Eigen::MatrixXd row(1, m.n());
          for (int i = 0; i < m.k(); ++i) row.block(0, i * m.block(), 1, m.block()) = m.W.row(i);
          return row;
        } else {
          return m.W.front();
        }
      },
      model);
}

Eigen::VectorXd unit_movement(const Model& model_t, const Model& model_0) {
  Eigen::MatrixXd a = first_layer_weights(model_t), b = first_layer_weights(model_0);
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw DimensionError("weight_movement: shape mismatch");
  return (a - b).cwiseAbs().rowwise().maxCoeff();
}

double weight_movement(const Model& model_t, const Model& model_0) {
  return unit_movement(model_t, model_0).maxCoeff();
}

namespace {

double column_max(const Model& model, const IndexSet& S, bool inside) {
  Eigen::MatrixXd W = first_layer_weights(model);
  if (W.cols() != S.n) throw DimensionError("relevant/irrelevant max: dimension mismatch");
  double best = 0.0;
  for (int i = 0; i < S.n; ++i)
    if (S.contains(i) == inside) best = std::max(best, W.col(i).cwiseAbs().maxCoeff());
  return best;
}

}  // namespace

double relevant_max(const Model& model, const IndexSet& S) { return column_max(model, S, true); }
double irrelevant_max(const Model& model, const IndexSet& S) { return column_max(model, S, false); }

std::vector<GapPoint> gap_along_path(const std::vector<std::pair<std::int64_t, Model>>& checkpoints,
                                     const ParityTask& task, LossKind loss) {
  check_enumerable(task.n);
  std::vector<GapPoint> out;
  for (const auto& [t, m] : checkpoints) out.push_back({t, first_layer_gap(m, task, loss)});
  return out;
}

TrendStat mann_kendall(const std::vector<double>& x) {
  TrendStat r;
  const std::size_t n = x.size();
  if (n < 2) return r;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) r.s += (x[j] > x[i]) - (x[j] < x[i]);
  const double nn = static_cast<double>(n);
  r.tau = r.s / (nn * (nn - 1) / 2.0);
  double var = nn * (nn - 1) * (2 * nn + 5) / 18.0;
  double s = r.s;
  r.z = s > 0 ? (s - 1) / std::sqrt(var) : (s < 0 ? (s + 1) / std::sqrt(var) : 0.0);
  return r;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t q = i; q <= j; ++q) r[idx[q]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) return std::nullopt;
  auto ra = ranks(a), rb = ranks(b);
  Eigen::Map<Eigen::VectorXd> x(ra.data(), ra.size()), y(rb.data(), rb.size());
  Eigen::VectorXd cx = x.array() - x.mean(), cy = y.array() - y.mean();
  double den = cx.norm() * cy.norm();
  if (den == 0.0) return std::nullopt;
  return cx.dot(cy) / den;
}

double rho_at(const RunRecord& run, std::int64_t t) {
  double v = 0.0;
  for (const auto& p : run.series) {
    if (p.iter > t) break;
    if (!std::isnan(p.rho_inf)) v = p.rho_inf;
  }
  return v;
}

Predictiveness progress_predictiveness(const std::vector<RunRecord>& runs,
                                       const std::vector<RunRecord>& probe_runs) {
  if (probe_runs.size() != runs.size())
    throw std::invalid_argument("progress_predictiveness: run lists differ in length");
  std::vector<double> tc;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < runs.size(); ++i)
    if (runs[i].t_c) {
      tc.push_back(static_cast<double>(*runs[i].t_c));
      idx.push_back(i);
    }
  if (tc.size() < 20)
    throw InsufficientRuns("progress_predictiveness: need >= 20 converged runs, have " +
                           std::to_string(tc.size()));
  std::vector<double> sorted = tc;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t h = sorted.size() / 2;
  double median = sorted.size() % 2 ? sorted[h] : 0.5 * (sorted[h - 1] + sorted[h]);
  Predictiveness out;
  out.probe_iter = median / 2.0;
  out.runs = tc.size();
  std::vector<double> rho;
  for (std::size_t i : idx)
    rho.push_back(rho_at(probe_runs[i], static_cast<std::int64_t>(out.probe_iter)));
  out.correlation = spearman(rho, tc);
  if (!out.correlation) out.note = "degenerate: constant rho or constant t_c";
  return out;
}

Predictiveness progress_predictiveness(const std::vector<RunRecord>& runs) {
  return progress_predictiveness(runs, runs);
}

}  // namespace parity
