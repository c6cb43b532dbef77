#include <cmath>

#include "doctest.h"
#include "parity/fourier.hpp"
#include "parity/train.hpp"

using namespace parity;

namespace {

ModelSpec relu_spec(int n, int width) {
  ModelSpec s;
  s.n = n;
  s.k = 2;
  s.width = width;
  s.act = Activation::relu();
  return s;
}

// P[Binomial(n, 1/2) >= m]
double binomial_tail(int n, int m) {
  double p = 0.0;
  for (int j = m; j <= n; ++j)
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(j + 1.0) - std::lgamma(n - j + 1.0) -
                  n * std::log(2.0));
  return p;
}

}  // namespace

TEST_CASE("loss derivatives match finite differences") {
  for (LossKind kind : {LossKind::hinge, LossKind::square, LossKind::cross_entropy,
                        LossKind::correlation}) {
    CAPTURE(loss_name(kind));
    for (double y : {-1.0, 1.0})
      for (double f : {-2.3, -0.4, 0.2, 0.7, 1.9, 35.0}) {
        const double h = 1e-6;
        double fd = (loss_value(kind, y, f + h) - loss_value(kind, y, f - h)) / (2 * h);
        CHECK(std::abs(fd - loss_derivative(kind, y, f)) < 1e-6);
      }
    CHECK(parse_loss(loss_name(kind)) == kind);
  }
  CHECK(loss_derivative(LossKind::hinge, 1.0, 1.0) == 0.0);
  CHECK(std::isfinite(loss_value(LossKind::cross_entropy, 1.0, -1e4)));
}

TEST_CASE("sgd_step applies multiplicative decay per group") {
  ModelSpec s = relu_spec(4, 2);
  RngStream rng(1, 1);
  Model m = init(s, InitScheme::gaussian_kaiming, rng);
  Model before = m;
  Gradients g = zeros_like(m);
  for (auto& grp : g.groups) grp.setOnes();

  std::vector<GroupRate> frozen(3, GroupRate{0.0, 0.0});
  sgd_step(m, g, frozen);
  CHECK(std::get<Mlp2<double>>(m).W == std::get<Mlp2<double>>(before).W);

  std::vector<GroupRate> reset(3, GroupRate{0.5, 1.0});
  sgd_step(m, g, reset);
  CHECK((std::get<Mlp2<double>>(m).W.array() == -0.5).all());

  m = before;
  std::vector<GroupRate> r = {{0.1, 0.2}, {0.0, 0.0}, {0.0, 0.0}};
  sgd_step(m, g, r);
  Eigen::MatrixXd expect = 0.8 * std::get<Mlp2<double>>(before).W.array() - 0.1;
  CHECK((std::get<Mlp2<double>>(m).W - expect).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(std::get<Mlp2<double>>(m).b == std::get<Mlp2<double>>(before).b);

  g.groups[0][0] = std::nan("");
  CHECK_THROWS_AS(sgd_step(m, g, r), NonFiniteGradient);
}

TEST_CASE("schedule lookup order") {
  Schedule s = constant_schedule(0.1, 0.01);
  s.table = {{100, 0.05, 0.0}};
  s.overrides["readout"] = {0.2, 0.0};
  s.overrides["b"] = {0.3, 0.5};
  s.decay_biases = false;
  GroupInfo W{"W", Role::first_weight, true}, b{"b", Role::first_bias, true},
      u{"u", Role::readout, true};
  CHECK(s.rates(0, W).eta == 0.1);
  CHECK(s.rates(150, W).eta == 0.05);
  CHECK(s.rates(0, u).eta == 0.2);
  CHECK(s.rates(0, b).eta == 0.3);
  CHECK(s.rates(0, b).decay == 0.0);
}

TEST_CASE("sign-init recipe step sizes") {
  auto r = theorem_b1_schedule(11, 2, 10, 64, 101, 0.1);
  CHECK(r.init == InitScheme::symmetric_paired_sign);
  const double xi = majority_coefficient(11, 1);
  CHECK(r.eta0 == doctest::Approx(1.0 / (2.0 * std::abs(xi))).epsilon(1e-14));
  CHECK(r.eta_readout ==
        doctest::Approx(4.0 * std::pow(2.0, 1.5) / (11.0 * std::sqrt(10.0 * 100.0))).epsilon(1e-14));
  CHECK_THROWS(theorem_b1_schedule(11, 2, 10, 64, 1, 0.1));
  CHECK_THROWS(theorem_b1_schedule(10, 2, 10, 64, 100, 0.1));
  CHECK_THROWS(theorem_b1_schedule(11, 3, 10, 64, 100, 0.1));
  CHECK_THROWS(theorem_b1_schedule(11, 2, 9, 64, 100, 0.1));
}

TEST_CASE("training is deterministic given the seed") {
  ParityTask task(IndexSet::prefix(10, 2));
  TrainConfig cfg;
  cfg.schedule = constant_schedule(0.1);
  cfg.max_iters = 300;
  cfg.eval_size = 1024;
  cfg.seed = 77;
  RunRecord a = train(relu_spec(10, 16), task, cfg);
  RunRecord b = train(relu_spec(10, 16), task, cfg);
  CHECK(a.t_c == b.t_c);
  CHECK(a.iterations == b.iterations);
  CHECK(std::get<Mlp2<double>>(a.final_model).W == std::get<Mlp2<double>>(b.final_model).W);
  cfg.seed = 78;
  RunRecord c = train(relu_spec(10, 16), task, cfg);
  CHECK(std::get<Mlp2<double>>(a.initial_model).W != std::get<Mlp2<double>>(c.initial_model).W);
}

TEST_CASE("small sparse parity is learned") {
  ParityTask task(IndexSet::prefix(10, 2));
  TrainConfig cfg;
  cfg.schedule = constant_schedule(0.1);
  cfg.max_iters = 5000;
  cfg.eval_size = 2048;
  cfg.seed = 3;
  RunRecord r = train(relu_spec(10, 64), task, cfg);
  CHECK(r.status == "converged");
  REQUIRE(r.t_c);
  CHECK(r.final_val_error == 0.0);
}

TEST_CASE("an exact realization converges at t = 0") {
  IndexSet S = IndexSet::of(12, {2, 7, 9});
  TrainConfig cfg;
  cfg.max_iters = 10;
  RunRecord r = train_from(realize_parity("k_zigzag", 12, S).model, ParityTask(S), cfg);
  REQUIRE(r.t_c);
  CHECK(*r.t_c == 0);
  CHECK(r.iterations == 0);
}

TEST_CASE("weak rule false positive probability is tiny") {
  TrainConfig cfg;
  const int need = static_cast<int>(std::ceil(cfg.weak_accuracy * cfg.weak_eval_size));
  const double p = std::pow(binomial_tail(cfg.weak_eval_size, need), cfg.weak_window);
  CHECK(p < 1e-3);
}

TEST_CASE("finite-sample mode fits its training set") {
  ParityTask task(IndexSet::prefix(8, 2));
  TrainConfig cfg;
  cfg.schedule = constant_schedule(0.1);
  cfg.max_iters = 4000;
  cfg.eval_size = 256;
  cfg.seed = 5;
  RunRecord r = grok_train(relu_spec(8, 64), task, 200, 0.0, cfg);
  REQUIRE(r.t_train);
  CHECK(*r.t_train <= r.iterations);
  CHECK(r.t_test == r.t_c);
  bool any_train_point = false;
  for (const auto& p : r.series) any_train_point |= !std::isnan(p.train_error);
  CHECK(any_train_point);
}

TEST_CASE("divergence is recorded, not thrown") {
  ModelSpec s;
  s.n = 10;
  s.k = 3;
  s.width = 8;
  s.act = Activation::poly(5);
  TrainConfig cfg;
  cfg.loss = LossKind::square;
  cfg.schedule = constant_schedule(1e3);
  cfg.init = InitScheme::gaussian_kaiming;
  cfg.max_iters = 200;
  cfg.eval_size = 128;
  RunRecord r = train(s, ParityTask(IndexSet::prefix(10, 3)), cfg);
  CHECK(r.status == "diverged");
  CHECK(!r.failure.empty());
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.batch = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.batch = 4;
  cfg.data = DataMode::finite;
  cfg.m = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  TrainConfig a, b;
  b.batch = 64;
  CHECK(a.hash() != b.hash());
  CHECK(a.hash() == TrainConfig{}.hash());
}
