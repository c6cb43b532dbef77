#include <cmath>

#include "doctest.h"
#include "parity/progress.hpp"

using namespace parity;

TEST_CASE("weight movement is the sup-norm of first-layer change") {
  ModelSpec s;
  s.n = 5;
  s.width = 3;
  RngStream rng(1, 2);
  Model m0 = init(s, InitScheme::gaussian_kaiming, rng);
  Model m1 = m0;
  auto& mlp = std::get<Mlp2<double>>(m1);
  mlp.W(1, 3) += 0.75;
  mlp.W(2, 0) -= 0.25;
  mlp.u[0] += 10.0;  // readout does not count
  CHECK(weight_movement(m1, m0) == doctest::Approx(0.75));
  Eigen::VectorXd per = unit_movement(m1, m0);
  CHECK(per[0] == 0.0);
  CHECK(per[1] == doctest::Approx(0.75));
  CHECK(per[2] == doctest::Approx(0.25));
}

TEST_CASE("disjoint first-layer weights are laid out block by block") {
  DisjointPolyNet<double> d;
  d.W.resize(2, 3);
  d.W << 1, 2, 3, 4, 5, 6;
  Eigen::MatrixXd W = first_layer_weights(Model(d));
  REQUIRE(W.rows() == 1);
  REQUIRE(W.cols() == 6);
  CHECK(W(0, 3) == 4.0);
  IndexSet S = IndexSet::of(6, {0, 3});
  CHECK(relevant_max(Model(d), S) == 4.0);
  CHECK(irrelevant_max(Model(d), S) == 6.0);
}

TEST_CASE("Mann-Kendall trend statistic") {
  TrendStat up = mann_kendall({1, 2, 3, 4, 5});
  CHECK(up.s == 10.0);
  CHECK(up.tau == 1.0);
  CHECK(up.z > 0);
  TrendStat down = mann_kendall({5, 4, 3, 2, 1});
  CHECK(down.tau == -1.0);
  TrendStat flat = mann_kendall({1, 1, 1});
  CHECK(flat.s == 0.0);
  CHECK(flat.z == 0.0);
  // var(S) = n(n-1)(2n+5)/18 = 50/3 for n = 5
  CHECK(up.z == doctest::Approx(9.0 / std::sqrt(50.0 / 3.0)));
}

TEST_CASE("Spearman correlation with ties") {
  auto r = spearman({1, 2, 3, 4}, {10, 20, 30, 40});
  REQUIRE(r);
  CHECK(*r == doctest::Approx(1.0));
  auto inv = spearman({1, 2, 3, 4}, {4, 3, 2, 1});
  CHECK(*inv == doctest::Approx(-1.0));
  // ranks (1.5, 1.5, 3) against (1, 2, 3)
  auto tie = spearman({7, 7, 9}, {1, 2, 3});
  CHECK(*tie == doctest::Approx(0.8660254037844386));
  CHECK(!spearman({1, 1, 1}, {1, 2, 3}));
}

TEST_CASE("predictiveness needs twenty converged runs") {
  std::vector<RunRecord> runs(25);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (i < 10) runs[i].t_c = 100 * static_cast<std::int64_t>(i + 1);
    runs[i].series.push_back({});
  }
  CHECK_THROWS_AS(progress_predictiveness(runs), InsufficientRuns);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    runs[i].t_c = 100 * static_cast<std::int64_t>(i + 1);
    EvalPoint p;
    p.iter = 0;
    p.rho_inf = 1.0 / static_cast<double>(i + 1);
    runs[i].series = {p};
  }
  Predictiveness pr = progress_predictiveness(runs);
  REQUIRE(pr.correlation);
  CHECK(*pr.correlation == doctest::Approx(-1.0));
  CHECK(pr.runs == 25);
  CHECK(pr.probe_iter == doctest::Approx(650.0));
}

TEST_CASE("rho_at reads the last point at or before t") {
  RunRecord r;
  for (int t : {0, 10, 20}) {
    EvalPoint p;
    p.iter = t;
    p.rho_inf = t * 0.1;
    r.series.push_back(p);
  }
  CHECK(rho_at(r, 15) == doctest::Approx(1.0));
  CHECK(rho_at(r, 20) == doctest::Approx(2.0));
}
