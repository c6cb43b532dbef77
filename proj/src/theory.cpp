#include "parity/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "parity/fourier.hpp"

namespace parity {

Gradients population_gradient(const Model& model, const ParityTask& task, LossKind loss) {
  const int n = task.n;
  check_enumerable(n);
  if (input_dim(model) != n) throw DimensionError("population_gradient: dimension mismatch");
  const std::uint64_t N = std::uint64_t{1} << n;
  const std::uint64_t chunk = std::min<std::uint64_t>(N, 4096);
  const double p = task.flip_prob, w = std::ldexp(1.0, -n);
  Gradients total = zeros_like(model);
  std::vector<std::uint64_t> words(chunk);
  for (std::uint64_t start = 0; start < N; start += chunk) {
    for (std::uint64_t j = 0; j < chunk; ++j) words[j] = start + j;
    Eigen::MatrixXd X = to_matrix(n, words.data(), chunk);
    Tape<double> tape;
    Eigen::VectorXd f = forward_batch(model, X, &tape);
    Eigen::VectorXd up(static_cast<Eigen::Index>(chunk));
    for (std::uint64_t j = 0; j < chunk; ++j) {
      const double y = task.label(words[j]);
      const auto jj = static_cast<Eigen::Index>(j);
      double d = loss_derivative(loss, y, f[jj]);
      if (p > 0.0) d = (1.0 - p) * d + p * loss_derivative(loss, -y, f[jj]);
      up[jj] = d * w;
    }
    Gradients g = backward_batch(model, X, up, &tape);
    for (std::size_t i = 0; i < total.groups.size(); ++i) total.groups[i] += g.groups[i];
  }
  return total;
}

Eigen::MatrixXd first_layer_population_gradient(const Model& model, const ParityTask& task,
                                                LossKind loss) {
  Gradients g = population_gradient(model, task, loss);
  const Eigen::VectorXd& flat = g.groups.front();
  return std::visit(
      [&](const auto& m) -> Eigen::MatrixXd {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, DisjointPolyNet<double>>) {
          Eigen::MatrixXd blocks = Eigen::Map<const Eigen::MatrixXd>(flat.data(), m.k(), m.block());
          Eigen::MatrixXd row(1, m.n());
          for (int i = 0; i < m.k(); ++i) row.block(0, i * m.block(), 1, m.block()) = blocks.row(i);
          return row;
        } else if constexpr (std::is_same_v<M, DeepPolyMlp<double>>) {
          return Eigen::Map<const Eigen::MatrixXd>(flat.data(), m.W.front().rows(), m.n());
        } else {
          return Eigen::Map<const Eigen::MatrixXd>(flat.data(), m.W.rows(), m.n());
        }
      },
      model);
}

double first_layer_gap(const Model& model, const ParityTask& task, LossKind loss) {
  Eigen::MatrixXd G = first_layer_population_gradient(model, task, loss);
  Eigen::VectorXd g = G.cwiseAbs().colwise().maxCoeff().transpose();
  return relaxed_gap(g, task.support);
}

Eigen::MatrixXd sign_init_gradient_closed_form(const Mlp2<double>& model, const IndexSet& S) {
  const int n = model.n(), k = S.size();
  if (n % 2 == 0) throw std::invalid_argument("closed form requires odd n");
  const double xi_lo = majority_coefficient(n, k - 1 >= 1 ? k - 1 : 1);
  const double xi_hi = k + 1 <= n ? majority_coefficient(n, k + 1) : 0.0;
  Eigen::MatrixXd G(model.width(), n);
  for (int i = 0; i < model.width(); ++i) {
    std::uint64_t wbits = 0;
    for (int j = 0; j < n; ++j) {
      if (std::abs(model.W(i, j)) != 1.0) throw std::invalid_argument("closed form requires sign weights");
      if (model.W(i, j) < 0) wbits |= std::uint64_t{1} << j;
    }
    for (int j = 0; j < n; ++j) {
      const std::uint64_t bit = std::uint64_t{1} << j;
      if (S.contains(j))
        G(i, j) = -0.5 * model.u[i] * (k - 1 >= 1 ? xi_lo : 0.0) * chi_bits(S.mask & ~bit, wbits);
      else
        G(i, j) = -0.5 * model.u[i] * xi_hi * chi_bits(S.mask | bit, wbits);
    }
  }
  return G;
}

IndexSet recover_support(const Eigen::VectorXd& g, int k) {
  const int n = static_cast<int>(g.size());
  if (k < 1 || k >= n) throw std::invalid_argument("recover_support: need 1 <= k < n");
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return std::abs(g[a]) > std::abs(g[b]); });
  idx.resize(k);
  return IndexSet::of(n, idx);
}

int recovery_batch_size(int n, int k, double constant) {
  const double gamma = majority_gap_bound(n, k);
  return static_cast<int>(std::ceil(constant * std::log(static_cast<double>(n)) / (gamma * gamma)));
}

RecoveryResult single_step_recovery(int n, int k, int B, int trials, RngStream rng) {
  if (n % 2 == 0 || k % 2 != 0 || n < 4 * k)
    throw std::invalid_argument("single_step_recovery: requires odd n, even k, n >= 4k");
  if (B < 1 || trials < 1) throw std::invalid_argument("single_step_recovery: B, trials >= 1");
  RecoveryResult out;
  std::vector<std::int64_t> acc(n);
  for (int trial = 0; trial < trials; ++trial) {
    RngStream r = rng.split(static_cast<std::uint64_t>(trial));
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    for (int i = 0; i < k; ++i) std::swap(perm[i], perm[i + r.below(n - i)]);
    IndexSet S = IndexSet::of(n, std::vector<int>(perm.begin(), perm.begin() + k));
    const std::uint64_t w = r() & low_mask(n);  // neuron weights, bit set <=> w_i = -1
    std::fill(acc.begin(), acc.end(), 0);
    for (int s = 0; s < B; ++s) {
      const std::uint64_t x = r() & low_mask(n);
      const int dot = n - 2 * __builtin_popcountll(x ^ w);
      if (dot <= 0) continue;  // ReLU derivative 0
      const int y = chi_bits(S.mask, x);
      // gradient of -y relu(w.x) wrt w_i is -y x_i; accumulate y x_i and flip sign at the end
      for (int i = 0; i < n; ++i) acc[i] += ((x >> i) & 1u) ? -y : y;
    }
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) g[i] = -static_cast<double>(acc[i]) / B;
    IndexSet found = recover_support(g, k);
    out.trials.push_back({S, found, found == S});
  }
  out.rate = static_cast<double>(std::count_if(out.trials.begin(), out.trials.end(),
                                               [](const auto& t) { return t.success; })) /
             trials;
  return out;
}

// ---- disjoint error ---------------------------------------------------------------------------

double SumDistribution::p_less(double t) const {
  auto it = std::lower_bound(values.begin(), values.end(), t);
  return std::accumulate(probs.begin(), probs.begin() + (it - values.begin()), 0.0);
}

double SumDistribution::p_equal(double t) const {
  auto it = std::lower_bound(values.begin(), values.end(), t);
  return it != values.end() && *it == t ? probs[static_cast<std::size_t>(it - values.begin())] : 0.0;
}

double SumDistribution::p_greater(double t) const {
  auto it = std::upper_bound(values.begin(), values.end(), t);
  return std::accumulate(probs.begin() + (it - values.begin()), probs.end(), 0.0);
}

std::optional<SumDistribution> exact_sum_distribution(const Eigen::VectorXd& u,
                                                      std::size_t max_atoms) {
  SumDistribution d;
  d.values = {0.0};
  d.probs = {1.0};
  std::vector<double> nv, np;
  for (Eigen::Index j = 0; j < u.size(); ++j) {
    const double a = std::abs(u[j]);
    if (a == 0.0) continue;
    nv.clear();
    np.clear();
    std::size_t i = 0, q = 0, m = d.values.size();
    // merge (values - a) and (values + a), both sorted
    while (i < m || q < m) {
      double lo = i < m ? d.values[i] - a : INFINITY;
      double hi = q < m ? d.values[q] + a : INFINITY;
      double v;
      double p;
      if (lo < hi) {
        v = lo;
        p = 0.5 * d.probs[i++];
      } else if (hi < lo) {
        v = hi;
        p = 0.5 * d.probs[q++];
      } else {
        v = lo;
        p = 0.5 * (d.probs[i++] + d.probs[q++]);
      }
      if (!nv.empty() && nv.back() == v)
        np.back() += p;
      else {
        nv.push_back(v);
        np.push_back(p);
      }
    }
    if (nv.size() > max_atoms) return std::nullopt;
    d.values.swap(nv);
    d.probs.swap(np);
  }
  return d;
}

DisjointError exact_disjoint_error(const Eigen::MatrixXd& W, std::uint64_t mc_samples,
                                   std::uint64_t mc_seed) {
  const int k = static_cast<int>(W.rows()), nb = static_cast<int>(W.cols());
  if (k < 1 || nb < 1) throw std::invalid_argument("exact_disjoint_error: empty weights");
  std::vector<SumDistribution> dists;
  bool exact = true;
  for (int i = 0; i < k && exact; ++i) {
    auto d = exact_sum_distribution(W.row(i).tail(nb - 1).transpose());
    if (!d) exact = false;
    else dists.push_back(std::move(*d));
  }
  if (exact) {
    double nonzero = 1.0, signed_mass = 1.0;
    for (int i = 0; i < k; ++i) {
      const double t = -W(i, 0);
      nonzero *= 1.0 - dists[i].p_equal(t);
      signed_mass *= dists[i].p_greater(t) - dists[i].p_less(t);
    }
    double err = 1.0 - 0.5 * (nonzero + signed_mass);
    return {std::clamp(err, 0.0, 1.0), 0.0, true};
  }
  // Monte Carlo over the hypercube.
  if (k * nb > 64) throw DimensionError("exact_disjoint_error: Monte Carlo path needs n <= 64");
  DisjointPolyNet<double> net;
  net.W = W;
  Model model = net;
  ParityTask task(IndexSet::of(k * nb, [&] {
    std::vector<int> s;
    for (int i = 0; i < k; ++i) s.push_back(i * nb);
    return s;
  }()));
  RngStream rng(mc_seed, 0xd15);
  std::uint64_t wrong = 0;
  std::vector<std::uint64_t> words(4096);
  for (std::uint64_t done = 0; done < mc_samples; done += words.size()) {
    std::size_t c = static_cast<std::size_t>(std::min<std::uint64_t>(words.size(), mc_samples - done));
    for (std::size_t j = 0; j < c; ++j) words[j] = rng() & low_mask(task.n);
    Eigen::VectorXd f = forward_batch(model, to_matrix(task.n, words.data(), c));
    for (std::size_t j = 0; j < c; ++j)
      if (!(f[static_cast<Eigen::Index>(j)] * task.label(words[j]) > 0)) ++wrong;
  }
  double p = static_cast<double>(wrong) / static_cast<double>(mc_samples);
  return {p, std::sqrt(p * (1 - p) / static_cast<double>(mc_samples)), false};
}

ErrBounds err_bounds(const Eigen::MatrixXd& W, bool with_exact) {
  const int k = static_cast<int>(W.rows()), nb = static_cast<int>(W.cols());
  if (!(W.col(0).prod() > 0.0)) throw std::invalid_argument("err_bounds: requires prod v_i > 0");
  ErrBounds b;
  double prod = 1.0, sum = 0.0;
  for (int i = 0; i < k; ++i) {
    const double v = std::abs(W(i, 0));
    Eigen::VectorXd u = W.row(i).tail(nb - 1).transpose();
    const double n2 = u.norm();
    if (n2 == 0.0) continue;  // block is exactly v_i x_i: factor 1, no tail
    const double ninf = u.cwiseAbs().maxCoeff();
    prod *= std::erf(v / (n2 * std::sqrt(2.0))) + kBerryEsseen * ninf / (n2 * n2 * n2);
    sum += std::exp(-v * v / (n2 * n2));
  }
  b.lower = 0.5 - 0.5 * prod;
  b.upper = 2.0 * sum;
  if (with_exact) b.exact = exact_disjoint_error(W).value;
  return b;
}

// ---- adaptive SGD -------------------------------------------------------------------------------

std::int64_t theorem_b4_horizon(int n_prime, int k, double eps, double delta) {
  if (n_prime < 1 || k < 1 || !(eps > 0 && eps < 0.5) || !(delta > 0 && delta < 1))
    throw std::invalid_argument("theorem_b4_horizon: bad arguments");
  const double n = static_cast<double>(n_prime) * k;
  const double c = 6.0 * std::log(2.0 * k / eps) * std::pow(3.0 * n_prime - 2.0, 2.0 * k - 1.0);
  double T = c;
  for (int it = 0; it < 200; ++it) {
    double next = c * std::log(2.0 * n * T / delta);
    if (std::abs(next - T) < 0.5) {
      T = next;
      break;
    }
    T = next;
  }
  auto holds = [&](double t) { return t >= c * std::log(2.0 * n * t / delta); };
  auto out = static_cast<std::int64_t>(std::ceil(T));
  while (!holds(static_cast<double>(out))) ++out;
  while (out > 1 && holds(static_cast<double>(out - 1))) --out;
  return out;
}

AdaptiveRun adaptive_sgd_disjoint(int n_prime, int k, std::int64_t T, double delta, RngStream rng,
                                  const AdaptiveOptions& opts) {
  const int n = n_prime * k;
  if (n > 64) throw DimensionError("adaptive_sgd_disjoint: n must be <= 64");
  if (T < 1) throw std::invalid_argument("adaptive_sgd_disjoint: T must be >= 1");
  AdaptiveRun out;
  RngStream init_rng = rng.split(streams::init);
  RngStream data = rng.split(streams::train);
  Eigen::MatrixXd W(k, n_prime);
  for (;;) {
    for (int i = 0; i < k; ++i)
      for (int j = 0; j < n_prime; ++j) W(i, j) = init_rng.sign();
    if (!opts.force_positive || W.col(0).prod() > 0) break;
    ++out.resamples;
  }
  DisjointPolyNet<double> init_net;
  init_net.W = W;
  out.record.initial_model = init_net;

  const double log_term = std::log(2.0 * n * static_cast<double>(T) / delta);
  const double base = 1.0 / (2.0 * std::sqrt(2.0 * static_cast<double>(T) * log_term));
  const double lower_coef = std::pow(3.0 * n_prime - 2.0, 1.0 - k) / (4.0 * std::sqrt(2.0));
  const double lower_log = std::log(n * static_cast<double>(T) / delta);
  const std::int64_t log_every = opts.log_every > 0 ? opts.log_every : std::max<std::int64_t>(1, T / 200);

  std::uint64_t S_mask = 0;
  for (int i = 0; i < k; ++i) S_mask |= std::uint64_t{1} << (i * n_prime);

  Eigen::MatrixXd G(k, n_prime);
  Eigen::VectorXd a(k), l1(k);
  Eigen::MatrixXd xs(k, n_prime);

  auto log_point = [&](std::int64_t t) {
    EvalPoint p;
    p.iter = t;
    p.val_error = exact_disjoint_error(W).value;
    p.irrelevant_max = n_prime > 1 ? W.rightCols(n_prime - 1).cwiseAbs().maxCoeff() : 0.0;
    p.relevant_max = W.col(0).cwiseAbs().maxCoeff();
    out.record.series.push_back(p);
    if (p.val_error <= opts.eps && !out.first_below_eps) out.first_below_eps = t;
    if (t >= 1) {
      const double bound = 0.5 + lower_coef * std::sqrt(static_cast<double>(t - 1) / lower_log);
      for (int i = 0; i < k; ++i)
        if (std::abs(W(i, 0)) < bound) ++out.claim_lower_violations;
    }
  };

  log_point(0);
  for (std::int64_t t = 0; t < T; ++t) {
    G.setZero();
    for (int s = 0; s < opts.B; ++s) {
      const std::uint64_t x = data() & low_mask(n);
      const double y = chi_bits(S_mask, x);
      for (int i = 0; i < k; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n_prime; ++j) {
          double xv = ((x >> (i * n_prime + j)) & 1u) ? -1.0 : 1.0;
          xs(i, j) = xv;
          acc += W(i, j) * xv;
        }
        a[i] = acc;
      }
      for (int i = 0; i < k; ++i) {
        double others = 1.0;
        for (int l = 0; l < k; ++l)
          if (l != i) others *= a[l];
        // correlation loss: grad of -y f wrt w_i
        G.row(i) -= (y * others / opts.B) * xs.row(i);
      }
    }
    for (int i = 0; i < k; ++i) l1[i] = W.row(i).lpNorm<1>();
    for (int i = 0; i < k; ++i) {
      double others = 1.0;
      for (int l = 0; l < k; ++l)
        if (l != i) others *= l1[l];
      const double eta = opts.eta_scale * base / others;
      W.row(i) -= eta * G.row(i);
    }
    if (n_prime > 1) {
      double m = W.rightCols(n_prime - 1).cwiseAbs().maxCoeff();
      out.max_irrelevant = std::max(out.max_irrelevant, m);
    }
    if ((t + 1) % log_every == 0 || t + 1 == T) log_point(t + 1);
  }
  out.claim_upper = out.max_irrelevant <= 1.5;
  out.final_error = exact_disjoint_error(W).value;
  DisjointPolyNet<double> fin;
  fin.W = W;
  out.record.final_model = fin;
  out.record.iterations = T;
  out.record.final_val_error = out.final_error;
  out.record.status = out.final_error <= opts.eps ? "converged" : "max_iters";
  if (out.first_below_eps) out.record.t_c = out.first_below_eps;
  return out;
}

}  // namespace parity
