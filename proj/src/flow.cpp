#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/numeric/odeint.hpp>

#include "parity/theory.hpp"

namespace parity {

namespace ode = boost::numeric::odeint;

namespace {

using State = std::vector<double>;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Error of the disjoint net as a function of the relevant weights only; the irrelevant
// weights never move under the flow, so their sum distributions are built once.
class BlockError {
 public:
  explicit BlockError(const Eigen::MatrixXd& W0) : W_(W0) {
    for (Eigen::Index i = 0; i < W0.rows() && exact_; ++i) {
      auto d = exact_sum_distribution(W0.row(i).tail(W0.cols() - 1).transpose());
      if (d) dists_.push_back(std::move(*d));
      else exact_ = false;
    }
  }

  double operator()(const Eigen::VectorXd& v) {
    if (!exact_) {
      W_.col(0) = v;
      return exact_disjoint_error(W_, 100000, 17).value;
    }
    double nonzero = 1.0, signed_mass = 1.0;
    for (std::size_t i = 0; i < dists_.size(); ++i) {
      const double t = -v[static_cast<Eigen::Index>(i)];
      nonzero *= 1.0 - dists_[i].p_equal(t);
      signed_mass *= dists_[i].p_greater(t) - dists_[i].p_less(t);
    }
    return std::clamp(1.0 - 0.5 * (nonzero + signed_mass), 0.0, 1.0);
  }

  ErrBounds bounds(const Eigen::VectorXd& v) {
    W_.col(0) = v;
    if (!(v.prod() > 0.0)) return {kNaN, kNaN, std::nullopt};
    return err_bounds(W_, false);
  }

 private:
  Eigen::MatrixXd W_;
  std::vector<SumDistribution> dists_;
  bool exact_ = true;
};

double mean_sq(const Eigen::VectorXd& v0) { return v0.squaredNorm() / static_cast<double>(v0.size()); }

double geo_sq(const Eigen::VectorXd& v0) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v0.size(); ++i) s += std::log(v0[i] * v0[i]);
  return std::exp(s / static_cast<double>(v0.size()));
}

}  // namespace

double FlowTrajectory::v_bar_a() const { return mean_sq(W0.col(0)); }
double FlowTrajectory::v_bar_g() const { return geo_sq(W0.col(0)); }

double zero_error_level(int n) { return std::ldexp(1.0, -n) / 2.0; }

FlowTrajectory gradient_flow_disjoint(const Eigen::MatrixXd& W_in, const std::vector<double>& alphas,
                                      const FlowOptions& opts) {
  const int k = static_cast<int>(W_in.rows()), nb = static_cast<int>(W_in.cols());
  if (k < 2 || nb < 1) throw std::invalid_argument("gradient_flow_disjoint: need k >= 2, n' >= 1");
  FlowTrajectory traj;
  traj.n_prime = nb;
  traj.k = k;
  traj.rtol = opts.rtol;
  traj.W0 = W_in;
  if (opts.force_positive && traj.W0.col(0).prod() < 0.0) {
    traj.W0(0, 0) = -traj.W0(0, 0);
    traj.sign_flipped = true;
  }
  traj.positive_product = traj.W0.col(0).prod() > 0.0;

  const Eigen::VectorXd v0 = traj.W0.col(0);
  const int n = k * nb;
  BlockError err(traj.W0);

  std::vector<std::pair<double, double>> levels;  // (alpha key, threshold)
  for (double a : alphas) {
    levels.push_back({a, a <= 0.0 ? zero_error_level(n) : a});
    traj.T[a] = std::nullopt;
  }

  auto record = [&](double t, const Eigen::VectorXd& v) {
    FlowSample s;
    s.t = t;
    s.v = v;
    s.product = v.prod();
    s.q = v[0] * v[0] - v0[0] * v0[0];
    s.error = err(v);
    ErrBounds b = err.bounds(v);
    s.lower = b.lower;
    s.upper = b.upper;
    traj.grid.push_back(std::move(s));
  };

  // Bisect inside (t_lo, t_hi] for each level first met at t_hi.
  auto locate = [&](double t_lo, double t_hi, double err_hi, auto&& state_at) {
    for (auto& [a, thr] : levels) {
      if (traj.T[a] || err_hi > thr) continue;
      double lo = t_lo, hi = t_hi;
      while (hi - lo > opts.bisection_tol) {
        const double mid = 0.5 * (lo + hi);
        if (err(state_at(mid)) <= thr) hi = mid;
        else lo = mid;
      }
      traj.T[a] = hi;
    }
  };

  record(0.0, v0);
  locate(0.0, 0.0, traj.grid.back().error, [&](double) { return v0; });

  auto product_except = [k](const State& x, State& out) {
    double pre = 1.0;
    for (int i = 0; i < k; ++i) {
      out[i] = pre;
      pre *= x[i];
    }
    double suf = 1.0;
    for (int i = k - 1; i >= 0; --i) {
      out[i] *= suf;
      suf *= x[i];
    }
  };

  const std::size_t max_steps = 2000000;
  std::size_t steps = 0;
  double t = 0.0;
  traj.termination = "time_cap";

  // Phase 1: the k-dimensional system.
  {
    auto sys = [&](const State& x, State& dx, double) { product_except(x, dx); };
    auto stepper = ode::make_dense_output(opts.atol, opts.rtol, ode::runge_kutta_dopri5<State>());
    State x(v0.data(), v0.data() + k);
    stepper.initialize(x, 0.0, 1e-3);
    bool done = false;
    while (!done) {
      auto [t0, t1] = stepper.do_step(sys);
      ++steps;
      const State& cur = stepper.current_state();
      Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(cur.data(), k);
      record(t1, v);
      locate(t0, t1, traj.grid.back().error, [&](double tm) {
        State xm(k);
        stepper.calc_state(tm, xm);
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(xm.data(), k));
      });
      t = t1;
      const double vmax = v.cwiseAbs().maxCoeff();
      if (vmax >= opts.v_max) {
        traj.termination = "weight_cap";
        traj.t_end = t;
        return traj;
      }
      if (!std::isfinite(vmax) || t >= opts.t_max || steps >= max_steps) {
        traj.t_end = t;
        return traj;
      }
      if (vmax >= opts.switch_at && v.prod() > 0.0) done = true;
    }
  }

  // Phase 2: q = v_i^2 - v_i(0)^2, shared by every i.
  Eigen::VectorXd sgn = traj.grid.back().v.cwiseSign();
  const Eigen::VectorXd& vl = traj.grid.back().v;
  const double q_start = (vl.array().square() - v0.array().square()).mean();
  auto v_of_q = [&](double q) {
    Eigen::VectorXd v(k);
    for (int i = 0; i < k; ++i) v[i] = sgn[i] * std::sqrt(std::max(0.0, q + v0[i] * v0[i]));
    return v;
  };
  const double s_prod = sgn.prod();
  auto sys = [&](const State& x, State& dx, double) {
    double p = 2.0 * s_prod;
    for (int i = 0; i < k; ++i) p *= std::sqrt(std::max(0.0, x[0] + v0[i] * v0[i]));
    dx[0] = p;
  };
  auto stepper = ode::make_dense_output(opts.atol, opts.rtol, ode::runge_kutta_dopri5<State>());
  State x{q_start};
  stepper.initialize(x, t, 1e-3 * std::max(1e-12, t));
  for (;;) {
    auto [t0, t1] = stepper.do_step(sys);
    ++steps;
    const double q = stepper.current_state()[0];
    Eigen::VectorXd v = v_of_q(q);
    record(t1, v);
    traj.grid.back().q = q;
    locate(t0, t1, traj.grid.back().error, [&](double tm) {
      State xm(1);
      stepper.calc_state(tm, xm);
      return v_of_q(xm[0]);
    });
    t = t1;
    const double vmax = v.cwiseAbs().maxCoeff();
    if (vmax >= opts.v_max) {
      traj.termination = "weight_cap";
      break;
    }
    if (!std::isfinite(vmax) || t >= opts.t_max || steps >= max_steps) break;
  }
  traj.t_end = t;
  return traj;
}

FlowTrajectory gradient_flow_disjoint(int n_prime, int k, FlowInit init, RngStream rng,
                                      const std::vector<double>& alphas, const FlowOptions& opts) {
  Eigen::MatrixXd W(k, n_prime);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n_prime; ++j) {
      switch (init) {
        case FlowInit::all_ones: W(i, j) = 1.0; break;
        case FlowInit::sign: W(i, j) = rng.sign(); break;
        case FlowInit::gaussian: W(i, j) = rng.normal(); break;
      }
    }
  return gradient_flow_disjoint(W, alphas, opts);
}

std::pair<double, double> q_brackets(double t, int k, double v_bar_g, double v_bar_a) {
  if (k == 2) return {v_bar_g * std::expm1(2.0 * t), v_bar_a * std::expm1(2.0 * t)};
  const double e = k / 2.0 - 1.0;
  auto solve = [&](double vb) {
    const double base = std::pow(vb, -e) - (k - 2.0) * t;
    if (base <= 0.0) return std::numeric_limits<double>::infinity();
    return std::pow(base, -1.0 / e) - vb;
  };
  return {solve(v_bar_g), solve(v_bar_a)};
}

double time_to_reach_lower_bound(double b, double v_i0, int k, double v_bar_a) {
  const double reach = v_bar_a + b * b - v_i0 * v_i0;
  if (k == 2) return 0.5 * std::log(reach / v_bar_a);
  const double e = 1.0 - k / 2.0;
  return (std::pow(v_bar_a, e) - std::pow(reach, e)) / (k - 2.0);
}

double time_to_blowup_upper_bound(double b, double v_i0, int k, double v_bar_g) {
  if (k == 2) return std::numeric_limits<double>::infinity();
  return std::pow(v_bar_g + b * b - v_i0 * v_i0, 1.0 - k / 2.0) / (k - 2.0);
}

namespace {

// Time at which the bracket curve started from v_bar reaches q. Comparing in time keeps the
// check well conditioned near blow-up, where q is extremely sensitive to t.
double bracket_time(double q, int k, double v_bar) {
  if (k == 2) return 0.5 * std::log1p(q / v_bar);
  const double e = k / 2.0 - 1.0;
  return (std::pow(v_bar, -e) - std::pow(q + v_bar, -e)) / (k - 2.0);
}

}  // namespace

FlowChecks check_flow(const FlowTrajectory& traj) {
  FlowChecks c;
  const int k = traj.k;
  const Eigen::VectorXd v0 = traj.W0.col(0);
  const double va = traj.v_bar_a(), vg = traj.v_bar_g();
  double prev_product = -std::numeric_limits<double>::infinity();
  for (const auto& s : traj.grid) {
    Eigen::VectorXd inc = s.v.array().square() - v0.array().square();
    const double q = inc[0];
    for (int i = 1; i < k; ++i)
      c.max_increment_deviation =
          std::max(c.max_increment_deviation, std::abs(inc[i] - q) / (1.0 + std::abs(q)));
    for (int i = 0; i < k; ++i)
      for (int j = i + 1; j < k; ++j)
        if (v0[i] == v0[j] &&
            std::abs(s.v[i] - s.v[j]) > 1e-9 * (1.0 + std::abs(s.v[i])))
          c.symmetric = false;
    if (!traj.positive_product) continue;
    if (s.product < prev_product * (1.0 - 1e-12)) c.monotone_product = false;
    prev_product = s.product;
    // q_lo(t) <= q <= q_hi(t)  <=>  t_hi(q) <= t <= t_lo(q)
    const double slack = 10.0 * traj.rtol * (1.0 + s.t);
    if (s.t < bracket_time(s.q, k, va) - slack || s.t > bracket_time(s.q, k, vg) + slack)
      c.q_bracketed = false;
    for (int i = 0; i < k; ++i) {
      const double bound = time_to_reach_lower_bound(std::abs(s.v[i]), v0[i], k, va);
      if (s.t < bound - 1e-6 * (1.0 + s.t)) c.time_bound = false;
    }
  }
  c.equal_increments = c.max_increment_deviation <= 10.0 * traj.rtol;
  return c;
}

}  // namespace parity
