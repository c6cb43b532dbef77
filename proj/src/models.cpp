#include "parity/models.hpp"

#include <cmath>
#include <limits>

namespace parity {

std::string arch_name(const Model& model) {
  return std::visit(
      [](const auto& m) -> std::string {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Mlp2<double>>)
          return "mlp2";
        else if constexpr (std::is_same_v<M, PolyNet<double>>)
          return "polynet";
        else if constexpr (std::is_same_v<M, DisjointPolyNet<double>>)
          return "disjoint_polynet";
        else
          return "deep_poly";
      },
      model);
}

bool parameters_finite(const Model& model) {
  Model copy = model;
  for (auto& p : parameters(copy))
    if (!p.values.allFinite()) return false;
  return true;
}

double kink_margin(const Model& model, const InputVector& x) {
  const auto* m = std::get_if<Mlp2<double>>(&model);
  if (!m || !m->act.piecewise_linear()) return std::numeric_limits<double>::infinity();
  Eigen::VectorXd z = m->W * x.dense() + m->b;
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < z.size(); ++i) best = std::min(best, m->act.kink_distance(z[i]));
  return best;
}

InitScheme parse_init(const std::string& name) {
  if (name == "uniform" || name == "uniform_xavier") return InitScheme::uniform_xavier;
  if (name == "gaussian" || name == "gaussian_kaiming") return InitScheme::gaussian_kaiming;
  if (name == "bernoulli" || name == "bernoulli_sign") return InitScheme::bernoulli_sign;
  if (name == "paired" || name == "symmetric_paired_sign") return InitScheme::symmetric_paired_sign;
  throw std::invalid_argument("unknown init scheme '" + name + "'");
}

std::string init_name(InitScheme s) {
  switch (s) {
    case InitScheme::uniform_xavier:
      return "uniform";
    case InitScheme::gaussian_kaiming:
      return "gaussian";
    case InitScheme::bernoulli_sign:
      return "bernoulli";
    case InitScheme::symmetric_paired_sign:
      return "paired";
  }
  return "?";
}

namespace {

// Fills every entry of a layer's parameters for the i.i.d. schemes.
void fill_layer(Eigen::MatrixXd& W, Eigen::VectorXd* b, int fan_in, int fan_out, InitScheme s,
                RngStream& rng) {
  const double c = std::sqrt(6.0 / (fan_in + fan_out));
  const double sd = std::sqrt(2.0 / fan_in);
  auto draw = [&]() {
    switch (s) {
      case InitScheme::uniform_xavier:
        return rng.uniform(-c, c);
      case InitScheme::gaussian_kaiming:
        return sd * rng.normal();
      case InitScheme::bernoulli_sign:
        return c * rng.sign();
      default:
        throw std::logic_error("fill_layer: scheme not i.i.d.");
    }
  };
  for (Eigen::Index j = 0; j < W.cols(); ++j)
    for (Eigen::Index i = 0; i < W.rows(); ++i) W(i, j) = draw();
  if (b)
    for (Eigen::Index i = 0; i < b->size(); ++i) (*b)[i] = draw();
}

}  // namespace

Model init(const ModelSpec& spec, InitScheme scheme, RngStream& rng) {
  if (spec.n < 1) throw std::invalid_argument("init: n must be >= 1");
  switch (spec.arch) {
    case Arch::mlp2: {
      const int r = spec.width, n = spec.n;
      if (r < 1) throw std::invalid_argument("init: width must be >= 1");
      Mlp2<double> m;
      m.act = spec.act;
      m.W.resize(r, n);
      m.b.resize(r);
      m.u.resize(r);
      m.train_u = spec.train_u;
      if (scheme == InitScheme::symmetric_paired_sign) {
        if (r % 2) throw std::invalid_argument("symmetric_paired_sign needs an even width");
        const int k = spec.k, h = r / 2;
        for (int i = 0; i < h; ++i) {
          for (int j = 0; j < n; ++j) m.W(i, j) = rng.sign();
          m.u[i] = rng.sign();
          // grid {-1 + 1/k, ..., 1 - 1/k}, 2k - 1 points
          m.b[i] = -1.0 + static_cast<double>(1 + rng.below(2 * k - 1)) / k;
          m.W.row(i + h) = m.W.row(i);
          m.b[i + h] = m.b[i];
          m.u[i + h] = -m.u[i];
        }
      } else {
        fill_layer(m.W, &m.b, n, r, scheme, rng);
        Eigen::MatrixXd U(r, 1);
        fill_layer(U, nullptr, r, 1, scheme, rng);
        m.u = U.col(0);
      }
      if (!spec.train_u) m.u.setOnes();
      return m;
    }
    case Arch::polynet: {
      if (scheme == InitScheme::symmetric_paired_sign)
        throw std::invalid_argument("symmetric_paired_sign applies to mlp2 only");
      PolyNet<double> m;
      m.W.resize(spec.k, spec.n);
      m.b.resize(spec.k);
      fill_layer(m.W, &m.b, spec.n, spec.k, scheme, rng);
      return m;
    }
    case Arch::disjoint_polynet: {
      if (scheme == InitScheme::symmetric_paired_sign)
        throw std::invalid_argument("symmetric_paired_sign applies to mlp2 only");
      if (spec.k < 1 || spec.n % spec.k)
        throw std::invalid_argument("disjoint_polynet: n must be divisible by k");
      DisjointPolyNet<double> m;
      m.W.resize(spec.k, spec.n / spec.k);
      fill_layer(m.W, nullptr, spec.n / spec.k, 1, scheme, rng);
      return m;
    }
    case Arch::deep_poly: {
      if (scheme == InitScheme::symmetric_paired_sign)
        throw std::invalid_argument("symmetric_paired_sign applies to mlp2 only");
      if (spec.widths.empty()) throw std::invalid_argument("deep_poly: needs hidden widths");
      DeepPolyMlp<double> m;
      int fan_in = spec.n;
      for (int r : spec.widths) {
        Eigen::MatrixXd W(r, fan_in);
        Eigen::VectorXd b(r);
        fill_layer(W, &b, fan_in, r, scheme, rng);
        m.W.push_back(W);
        m.b.push_back(b);
        fan_in = r;
      }
      Eigen::MatrixXd U(fan_in, 1);
      fill_layer(U, nullptr, fan_in, 1, scheme, rng);
      m.u = U.col(0);
      return m;
    }
  }
  throw std::logic_error("init: unknown arch");
}

namespace {

// Value of chi_S as a function of s = sum_{i in S} x_i.
double parity_of_sum(int k, int s) { return ((k - s) / 2) % 2 ? -1.0 : 1.0; }

Eigen::MatrixXd support_rows(int rows, int n, const IndexSet& S) {
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(rows, n);
  for (int i : S.members()) W.col(i).setOnes();
  return W;
}

void verify_realization(const Model& model, const IndexSet& S) {
  const int n = S.n;
  ParityTask task(S);
  std::uint64_t wrong = 0, total = 0;
  auto check = [&](const std::vector<std::uint64_t>& words) {
    Eigen::MatrixXd X = to_matrix(n, words.data(), words.size());
    Eigen::VectorXd f = forward_batch(model, X);
    for (std::size_t j = 0; j < words.size(); ++j)
      if (!(f[static_cast<Eigen::Index>(j)] * task.label(words[j]) > 0)) ++wrong;
    total += words.size();
  };
  std::vector<std::uint64_t> chunk;
  if (n <= 20) {
    for (std::uint64_t b = 0; b < (std::uint64_t{1} << n); ++b) {
      chunk.push_back(b);
      if (chunk.size() == 4096) check(chunk), chunk.clear();
    }
  } else {
    RngStream rng(0x5eed, 0xc0ffee);
    for (int j = 0; j < 100000; ++j) {
      chunk.push_back(rng() & low_mask(n));
      if (chunk.size() == 4096) check(chunk), chunk.clear();
    }
  }
  if (!chunk.empty()) check(chunk);
  if (wrong) throw std::logic_error("realize_parity: construction misclassifies " +
                                    std::to_string(wrong) + " of " + std::to_string(total));
}

Mlp2<double> width_one(int n, const IndexSet& S, Activation act) {
  Mlp2<double> m;
  m.act = std::move(act);
  m.W = support_rows(1, n, S);
  m.b = Eigen::VectorXd::Zero(1);
  m.u = Eigen::VectorXd::Ones(1);
  return m;
}

}  // namespace

bool explicit_relu_verifies(int k) {
  if (k < 2) return false;
  Eigen::VectorXd u(k), b(k);
  for (int i = 1; i <= k; ++i) {
    b[i - 1] = -0.5 + static_cast<double>(i + 1) / k;
    u[i - 1] = i <= k - 2 ? 8.0 * k * ((i + 1) % 2 ? -1.0 : 1.0) : (i == k - 1 ? 6.0 * k : -2.0 * k);
  }
  for (int s = -k; s <= k; s += 2) {
    double f = 0;
    for (int i = 0; i < k; ++i) f += u[i] * std::max(0.0, s / (2.0 * k) + b[i]);
    if (std::abs(f - 2.0 * parity_of_sum(k, s)) > 1e-9) return false;
  }
  return true;
}

Realization realize_parity(const std::string& kind, int n, const IndexSet& S) {
  if (S.n != n) throw DimensionError("realize_parity: dimension mismatch");
  const int k = S.size();
  if (k < 1) throw std::invalid_argument("realize_parity: S must be nonempty");
  Realization out;
  if (kind == "mlp2-relu") {
    if (explicit_relu_verifies(k)) {
      Mlp2<double> m;
      m.W = support_rows(k, n, S) / (2.0 * k);
      m.b.resize(k);
      m.u.resize(k);
      for (int i = 1; i <= k; ++i) {
        m.b[i - 1] = -0.5 + static_cast<double>(i + 1) / k;
        m.u[i - 1] =
            i <= k - 2 ? 8.0 * k * ((i + 1) % 2 ? -1.0 : 1.0) : (i == k - 1 ? 6.0 * k : -2.0 * k);
      }
      out = {m, "explicit"};
    } else {
      // Neuron m fires on s >= z_m - 1 with z_m = -k + 2m; solve the triangular
      // system so that f(z_j) = 2 chi at every reachable sum.
      const int r = k + 1;
      Mlp2<double> m;
      m.W = support_rows(r, n, S);
      m.b.resize(r);
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(r, r);
      Eigen::VectorXd t(r);
      for (int j = 0; j < r; ++j) {
        m.b[j] = k - 2.0 * j + 1.0;
        t[j] = 2.0 * parity_of_sum(k, -k + 2 * j);
        for (int q = 0; q <= j; ++q) A(j, q) = 2.0 * (j - q) + 1.0;
      }
      m.u = A.triangularView<Eigen::Lower>().solve(t);
      out = {m, "staircase"};
    }
  } else if (kind == "mlp2-poly") {
    // Shifted powers (s + c_j)^k span all degree-k polynomials in s.
    const int r = k + 1;
    Mlp2<double> m;
    m.act = Activation::poly(k);
    m.W = support_rows(r, n, S);
    m.b.resize(r);
    for (int j = 0; j < r; ++j) m.b[j] = j - k / 2.0;
    Eigen::MatrixXd A(r, r);
    Eigen::VectorXd t(r);
    for (int q = 0; q < r; ++q) {
      int s = -k + 2 * q;
      t[q] = parity_of_sum(k, s);
      for (int j = 0; j < r; ++j) A(q, j) = std::pow(s + m.b[j], k);
    }
    m.u = A.fullPivLu().solve(t);
    out = {m, "shifted_powers"};
  } else if (kind == "k_zigzag") {
    out = {width_one(n, S, Activation::k_zigzag(k)), "width1"};
  } else if (kind == "osc_poly") {
    out = {width_one(n, S, Activation::osc_poly(k)), "width1"};
  } else if (kind == "inf_zigzag") {
    out = {width_one(n, S, Activation::inf_zigzag(k)), "width1"};
  } else if (kind == "sinusoid") {
    out = {width_one(n, S, Activation::sinusoid(k)), "width1"};
  } else if (kind == "polynet") {
    PolyNet<double> m;
    m.W = Eigen::MatrixXd::Zero(k, n);
    m.b = Eigen::VectorXd::Zero(k);
    auto mem = S.members();
    for (int i = 0; i < k; ++i) m.W(i, mem[i]) = 1.0;
    out = {m, "basis"};
  } else if (kind == "disjoint_polynet") {
    if (n % k) throw std::domain_error("realize_parity: disjoint_polynet needs k | n");
    const int nb = n / k;
    DisjointPolyNet<double> m;
    m.W = Eigen::MatrixXd::Zero(k, nb);
    std::vector<int> hits(k, 0);
    for (int i : S.members()) {
      hits[i / nb]++;
      m.W(i / nb, i % nb) = 1.0;
    }
    for (int h : hits)
      if (h != 1) throw std::domain_error("realize_parity: S must hit every block exactly once");
    out = {m, "basis"};
  } else if (kind == "quadratic2") {
    if (k > 2) throw std::domain_error("realize_parity: 2-layer quadratic MLP has degree 2 < k");
    // (a + c)^2 - (a - c)^2 = 4ac with c = x_j (k = 2) or c = 1 (k = 1).
    auto mem = S.members();
    Mlp2<double> m;
    m.act = Activation::poly(2);
    m.W = Eigen::MatrixXd::Zero(2, n);
    m.b = Eigen::VectorXd::Zero(2);
    m.W.col(mem[0]).setOnes();
    if (k == 2) {
      m.W(0, mem[1]) = 1.0;
      m.W(1, mem[1]) = -1.0;
    } else {
      m.b << 1.0, -1.0;
    }
    m.u = Eigen::Vector2d(0.25, -0.25);
    out = {m, "difference_of_squares"};
  } else {
    throw std::domain_error("realize_parity: unrepresentable or unknown architecture '" + kind +
                            "'");
  }
  verify_realization(out.model, S);
  return out;
}

}  // namespace parity
