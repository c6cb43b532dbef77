#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <set>

#include "parity/hypercube.hpp"

using namespace parity;

TEST_CASE("chi is multiplicative and matches the dense product") {
  const int n = 7;
  IndexSet S = IndexSet::of(n, {0, 2, 5}), T = IndexSet::of(n, {2, 3});
  for (const auto& x : all_inputs(n)) {
    Eigen::VectorXd d = x.dense();
    CHECK(chi(S, x) == static_cast<int>(d[0] * d[2] * d[5]));
    // chi_S chi_T = chi_{S xor T}
    CHECK(chi(S, x) * chi(T, x) == chi(IndexSet(n, S.mask ^ T.mask), x));
  }
  CHECK(chi(IndexSet(n, 0), InputVector(n, 0x55)) == 1);
}

TEST_CASE("parities are orthogonal") {
  const int n = 6;
  for (std::uint64_t a = 0; a < 64; a += 5)
    for (std::uint64_t b = 0; b < 64; b += 3) {
      const std::int64_t ip = parity_inner_product(IndexSet(n, a), IndexSet(n, b));
      CHECK(ip == (a == b ? 64 : 0));
    }
  CHECK(exact_correlation([](const InputVector& x) { return double(x[1] * x[4]); },
                          [](const InputVector& x) { return double(x[1] * x[4]); }, 8) == 1.0);
}

TEST_CASE("IndexSet basics") {
  IndexSet S = IndexSet::of(10, {9, 1, 4});
  CHECK(S.size() == 3);
  CHECK(S.members() == std::vector<int>{1, 4, 9});
  CHECK(S.str() == "{1,4,9}");
  CHECK(S.complement().size() == 7);
  CHECK_FALSE(S.complement().contains(4));
  CHECK(IndexSet::prefix(10, 3) == IndexSet::of(10, {0, 1, 2}));
  CHECK_THROWS_AS(IndexSet::of(4, {4}), DimensionError);
  CHECK_THROWS_AS(IndexSet::prefix(4, 5), DimensionError);
}

TEST_CASE("subsets_of_size enumerates binomial(n, k) distinct sets") {
  auto subsets = subsets_of_size(9, 4);
  CHECK(subsets.size() == 126);
  std::set<std::uint64_t> masks;
  for (const auto& s : subsets) {
    CHECK(s.size() == 4);
    masks.insert(s.mask);
  }
  CHECK(masks.size() == 126);
  CHECK(subsets_of_size(5, 0).size() == 1);
  CHECK(subsets_of_size(5, 5).size() == 1);
}

TEST_CASE("InputVector dense round trip") {
  InputVector x(12, 0b101100000011);
  InputVector y = InputVector::from_dense(x.dense());
  CHECK(y.n == 12);
  CHECK(y.bits == x.bits);
  CHECK(x[0] == -1);
  CHECK(x[2] == 1);
}

TEST_CASE("RngStream is counter-based and reproducible") {
  RngStream a(42, 7), b(42, 7), c(42, 8);
  for (int i = 0; i < 100; ++i) {
    auto va = a();
    CHECK(va == b());
    CHECK(va != c());
  }
  RngStream s1 = RngStream(1, 2).split(3), s2 = RngStream(1, 2).split(3);
  CHECK(s1() == s2());
  RngStream u(5, 5);
  double sum = 0.0;
  for (int i = 0; i < 20000; ++i) {
    double v = u.uniform();
    CHECK((v >= 0.0 && v < 1.0));
    sum += v;
  }
  CHECK(sum / 20000 == doctest::Approx(0.5).epsilon(0.02));
  for (int i = 0; i < 1000; ++i) CHECK(u.below(7) < 7);
}

TEST_CASE("normal draws have unit variance") {
  RngStream r(9, 9);
  double s = 0, s2 = 0;
  const int N = 40000;
  for (int i = 0; i < N; ++i) {
    double z = r.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / N) < 0.03);
  CHECK(s2 / N == doctest::Approx(1.0).epsilon(0.03));
}

TEST_CASE("sampling consumes two words per point regardless of noise") {
  ParityTask clean(IndexSet::prefix(20, 3)), noisy(IndexSet::prefix(20, 3), 0.3);
  RngStream a(3, 1), b(3, 1);
  for (int i = 0; i < 50; ++i) {
    auto [xa, ya] = sample_point(clean, a);
    auto [xb, yb] = sample_point(noisy, b);
    CHECK(xa == xb);
    CHECK(ya == clean.label(xa));
  }
  CHECK(a.counter() == b.counter());
}

TEST_CASE("label noise flips at the requested rate") {
  ParityTask noisy(IndexSet::prefix(15, 3), 0.2);
  RngStream r(11, 0);
  Batch b = sample_batch(noisy, 20000, r);
  int flips = 0;
  for (std::size_t j = 0; j < b.size(); ++j) flips += b.labels[j] != noisy.label(b.inputs[j]);
  CHECK(flips / 20000.0 == doctest::Approx(0.2).epsilon(0.05));
}

TEST_CASE("to_matrix packs +-1 columns") {
  std::uint64_t words[2] = {0b011, 0b100};
  Eigen::MatrixXd X = to_matrix(3, words, 2);
  CHECK(X.rows() == 3);
  CHECK(X.cols() == 2);
  CHECK(X(0, 0) == -1);
  CHECK(X(1, 0) == -1);
  CHECK(X(2, 0) == 1);
  CHECK(X(2, 1) == -1);
}

TEST_CASE("exact and Monte Carlo error of simple predictors") {
  ParityTask task(IndexSet::of(8, {1, 6}));
  auto truth = [&](const InputVector& x) { return double(chi(task.support, x)); };
  CHECK(exact_error(truth, task) == 0.0);
  CHECK(exact_error([&](const InputVector& x) { return -truth(x); }, task) == 1.0);
  CHECK(exact_error([](const InputVector&) { return 0.0; }, task) == 1.0);  // ties count as errors
  CHECK(exact_error([](const InputVector& x) { return double(x[1]); }, task) == 0.5);
  CHECK(mc_error(truth, task, 512, RngStream(1, 1)) == 0.0);
}

TEST_CASE("enumeration cap honours the environment override") {
  CHECK(enumeration_cap() >= 1);
  setenv("PARITY_FORGE_MAX_N", "10", 1);
  CHECK(enumeration_cap() == 10);
  CHECK_THROWS_AS(check_enumerable(11), DimensionError);
  CHECK_NOTHROW(check_enumerable(10));
  unsetenv("PARITY_FORGE_MAX_N");
  CHECK(enumeration_cap() == 24);
}
