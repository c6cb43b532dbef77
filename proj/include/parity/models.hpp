#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "parity/activation.hpp"
#include "parity/hypercube.hpp"

namespace parity {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// f(x) = u . sigma(W x + b). Width 1 is the single-neuron family.
template <typename Scalar>
struct Mlp2 {
  MatrixX<Scalar> W;  // r x n
  VectorX<Scalar> b;  // r
  VectorX<Scalar> u;  // r
  Activation act;
  bool train_W = true, train_b = true, train_u = true;

  int n() const { return static_cast<int>(W.cols()); }
  int width() const { return static_cast<int>(W.rows()); }
};

// f(x) = prod_i (w_i . x + b_i); row i of W is w_i.
template <typename Scalar>
struct PolyNet {
  MatrixX<Scalar> W;  // k x n
  VectorX<Scalar> b;  // k
  bool train_b = true;

  int n() const { return static_cast<int>(W.cols()); }
  int factors() const { return static_cast<int>(W.rows()); }
};

// f(x) = prod_i <w_i, x_{P_i}>, P_i = [i n', (i+1) n'). Row i of W is w_i.
template <typename Scalar>
struct DisjointPolyNet {
  MatrixX<Scalar> W;  // k x n'

  int k() const { return static_cast<int>(W.rows()); }
  int block() const { return static_cast<int>(W.cols()); }
  int n() const { return k() * block(); }
};

// z_1 = W_1 x + b_1, h_l = z_l^2, z_{l+1} = W_{l+1} h_l + b_{l+1}, f = u . h_{L-1}.
template <typename Scalar>
struct DeepPolyMlp {
  std::vector<MatrixX<Scalar>> W;
  std::vector<VectorX<Scalar>> b;
  VectorX<Scalar> u;

  int n() const { return static_cast<int>(W.front().cols()); }
  int depth() const { return static_cast<int>(W.size()) + 1; }
};

template <typename Scalar>
using BasicModel =
    std::variant<Mlp2<Scalar>, PolyNet<Scalar>, DisjointPolyNet<Scalar>, DeepPolyMlp<Scalar>>;
using Model = BasicModel<double>;

enum class Role { first_weight, first_bias, hidden_weight, hidden_bias, readout };

struct GroupInfo {
  std::string name;
  Role role;
  bool trainable;
  bool is_bias() const { return role == Role::first_bias || role == Role::hidden_bias; }
  bool first_layer() const { return role == Role::first_weight || role == Role::first_bias; }
};

template <typename Scalar>
struct ParamView {
  GroupInfo info;
  Eigen::Map<VectorX<Scalar>> values;
};

// One flat vector per parameter group, in the order of parameters(model).
template <typename Scalar>
struct BasicGradients {
  std::vector<VectorX<Scalar>> groups;
  bool all_finite() const {
    for (const auto& g : groups)
      if (!g.allFinite()) return false;
    return true;
  }
};
using Gradients = BasicGradients<double>;

namespace detail {

template <typename Scalar, typename Derived>
Eigen::Map<VectorX<Scalar>> flat(Eigen::PlainObjectBase<Derived>& m) {
  return {m.data(), m.size()};
}

}  // namespace detail

template <typename Scalar>
std::vector<ParamView<Scalar>> parameters(BasicModel<Scalar>& model) {
  using detail::flat;
  std::vector<ParamView<Scalar>> out;
  std::visit(
      [&](auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Mlp2<Scalar>>) {
          out.push_back({{"W", Role::first_weight, m.train_W}, flat<Scalar>(m.W)});
          out.push_back({{"b", Role::first_bias, m.train_b}, flat<Scalar>(m.b)});
          out.push_back({{"u", Role::readout, m.train_u}, flat<Scalar>(m.u)});
        } else if constexpr (std::is_same_v<M, PolyNet<Scalar>>) {
          out.push_back({{"W", Role::first_weight, true}, flat<Scalar>(m.W)});
          out.push_back({{"b", Role::first_bias, m.train_b}, flat<Scalar>(m.b)});
        } else if constexpr (std::is_same_v<M, DisjointPolyNet<Scalar>>) {
          out.push_back({{"W", Role::first_weight, true}, flat<Scalar>(m.W)});
        } else {
          for (std::size_t l = 0; l < m.W.size(); ++l) {
            bool first = l == 0;
            out.push_back({{"W" + std::to_string(l + 1),
                            first ? Role::first_weight : Role::hidden_weight, true},
                           flat<Scalar>(m.W[l])});
            out.push_back({{"b" + std::to_string(l + 1),
                            first ? Role::first_bias : Role::hidden_bias, true},
                           flat<Scalar>(m.b[l])});
          }
          out.push_back({{"u", Role::readout, true}, flat<Scalar>(m.u)});
        }
      },
      model);
  return out;
}

template <typename Scalar>
std::vector<GroupInfo> group_info(const BasicModel<Scalar>& model) {
  auto copy = model;
  std::vector<GroupInfo> out;
  for (auto& p : parameters(copy)) out.push_back(p.info);
  return out;
}

template <typename Scalar>
BasicGradients<Scalar> zeros_like(const BasicModel<Scalar>& model) {
  auto copy = model;
  BasicGradients<Scalar> g;
  for (auto& p : parameters(copy)) g.groups.push_back(VectorX<Scalar>::Zero(p.values.size()));
  return g;
}

template <typename Scalar>
int input_dim(const BasicModel<Scalar>& model) {
  return std::visit([](const auto& m) { return m.n(); }, model);
}

std::string arch_name(const Model& model);

template <typename To, typename From>
BasicModel<To> cast_model(const BasicModel<From>& model) {
  return std::visit(
      [](const auto& m) -> BasicModel<To> {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Mlp2<From>>) {
          Mlp2<To> r;
          r.W = m.W.template cast<To>();
          r.b = m.b.template cast<To>();
          r.u = m.u.template cast<To>();
          r.act = m.act;
          r.train_W = m.train_W;
          r.train_b = m.train_b;
          r.train_u = m.train_u;
          return r;
        } else if constexpr (std::is_same_v<M, PolyNet<From>>) {
          PolyNet<To> r;
          r.W = m.W.template cast<To>();
          r.b = m.b.template cast<To>();
          r.train_b = m.train_b;
          return r;
        } else if constexpr (std::is_same_v<M, DisjointPolyNet<From>>) {
          DisjointPolyNet<To> r;
          r.W = m.W.template cast<To>();
          return r;
        } else {
          DeepPolyMlp<To> r;
          for (const auto& w : m.W) r.W.push_back(w.template cast<To>());
          for (const auto& b : m.b) r.b.push_back(b.template cast<To>());
          r.u = m.u.template cast<To>();
          return r;
        }
      },
      model);
}

// Intermediate values kept by forward for reuse in backward.
template <typename Scalar>
struct Tape {
  std::vector<MatrixX<Scalar>> Z, H;
};

namespace detail {

// P(i, j) = prod_{l != i} A(l, j), without division.
template <typename Scalar>
MatrixX<Scalar> leave_one_out_products(const MatrixX<Scalar>& A) {
  const Eigen::Index k = A.rows(), B = A.cols();
  MatrixX<Scalar> P(k, B);
  for (Eigen::Index j = 0; j < B; ++j) {
    Scalar run(1);
    for (Eigen::Index i = 0; i < k; ++i) {
      P(i, j) = run;
      run *= A(i, j);
    }
    run = Scalar(1);
    for (Eigen::Index i = k - 1; i >= 0; --i) {
      P(i, j) *= run;
      run *= A(i, j);
    }
  }
  return P;
}

template <typename Scalar>
void check_input(int expected, Eigen::Index got) {
  if (expected != got) throw DimensionError("model input dimension mismatch");
}

}  // namespace detail

// Column j of X is one input. Returns f on every column.
template <typename Scalar>
VectorX<Scalar> forward_batch(const BasicModel<Scalar>& model, const MatrixX<Scalar>& X,
                              Tape<Scalar>* tape = nullptr) {
  detail::check_input<Scalar>(input_dim(model), X.rows());
  return std::visit(
      [&](const auto& m) -> VectorX<Scalar> {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Mlp2<Scalar>>) {
          MatrixX<Scalar> Z = m.W * X;
          Z.colwise() += m.b;
          MatrixX<Scalar> H;
          m.act.apply(Z, H);
          VectorX<Scalar> f = H.transpose() * m.u;
          if (tape) {
            tape->Z = {std::move(Z)};
            tape->H = {std::move(H)};
          }
          return f;
        } else if constexpr (std::is_same_v<M, PolyNet<Scalar>>) {
          MatrixX<Scalar> A = m.W * X;
          A.colwise() += m.b;
          VectorX<Scalar> f = A.colwise().prod().transpose();
          if (tape) tape->Z = {std::move(A)};
          return f;
        } else if constexpr (std::is_same_v<M, DisjointPolyNet<Scalar>>) {
          const int k = m.k(), nb = m.block();
          MatrixX<Scalar> A(k, X.cols());
          for (int i = 0; i < k; ++i) A.row(i) = m.W.row(i) * X.middleRows(i * nb, nb);
          VectorX<Scalar> f = A.colwise().prod().transpose();
          if (tape) tape->Z = {std::move(A)};
          return f;
        } else {
          std::vector<MatrixX<Scalar>> Zs, Hs;
          const MatrixX<Scalar>* in = &X;
          for (std::size_t l = 0; l < m.W.size(); ++l) {
            MatrixX<Scalar> Z = m.W[l] * *in;
            Z.colwise() += m.b[l];
            Zs.push_back(std::move(Z));
            Hs.push_back(Zs.back().cwiseAbs2());
            in = &Hs.back();
          }
          VectorX<Scalar> f = Hs.back().transpose() * m.u;
          if (tape) {
            tape->Z = std::move(Zs);
            tape->H = std::move(Hs);
          }
          return f;
        }
      },
      model);
}

// sum_j upstream[j] * d f(X_j) / d theta. Reuses `tape` when forward_batch filled it.
template <typename Scalar>
BasicGradients<Scalar> backward_batch(const BasicModel<Scalar>& model, const MatrixX<Scalar>& X,
                                      const VectorX<Scalar>& upstream,
                                      const Tape<Scalar>* tape = nullptr) {
  Tape<Scalar> local;
  if (!tape || tape->Z.empty()) {
    forward_batch(model, X, &local);
    tape = &local;
  }
  BasicGradients<Scalar> g;
  std::visit(
      [&](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, Mlp2<Scalar>>) {
          const MatrixX<Scalar>& Z = tape->Z[0];
          const MatrixX<Scalar>& H = tape->H[0];
          MatrixX<Scalar> D;
          m.act.apply_derivative(Z, D);
          MatrixX<Scalar> G = D.cwiseProduct(m.u * upstream.transpose());
          MatrixX<Scalar> gW = G * X.transpose();
          VectorX<Scalar> gb = G.rowwise().sum();
          VectorX<Scalar> gu = H * upstream;
          g.groups = {Eigen::Map<VectorX<Scalar>>(gW.data(), gW.size()), gb, gu};
        } else if constexpr (std::is_same_v<M, PolyNet<Scalar>>) {
          MatrixX<Scalar> P = detail::leave_one_out_products(tape->Z[0]);
          P.array().rowwise() *= upstream.transpose().array();
          MatrixX<Scalar> gW = P * X.transpose();
          VectorX<Scalar> gb = P.rowwise().sum();
          g.groups = {Eigen::Map<VectorX<Scalar>>(gW.data(), gW.size()), gb};
        } else if constexpr (std::is_same_v<M, DisjointPolyNet<Scalar>>) {
          const int k = m.k(), nb = m.block();
          MatrixX<Scalar> P = detail::leave_one_out_products(tape->Z[0]);
          P.array().rowwise() *= upstream.transpose().array();
          MatrixX<Scalar> gW(k, nb);
          for (int i = 0; i < k; ++i)
            gW.row(i) = P.row(i) * X.middleRows(i * nb, nb).transpose();
          g.groups = {Eigen::Map<VectorX<Scalar>>(gW.data(), gW.size())};
        } else {
          const std::size_t L = m.W.size();
          std::vector<VectorX<Scalar>> parts(2 * L + 1);
          parts[2 * L] = tape->H[L - 1] * upstream;
          // dH: gradient wrt h_{L-1}, one column per input.
          MatrixX<Scalar> dH = m.u * upstream.transpose();
          for (std::size_t l = L; l-- > 0;) {
            MatrixX<Scalar> dZ = Scalar(2) * tape->Z[l].cwiseProduct(dH);
            const MatrixX<Scalar>& in = l == 0 ? X : tape->H[l - 1];
            MatrixX<Scalar> gW = dZ * in.transpose();
            parts[2 * l] = Eigen::Map<VectorX<Scalar>>(gW.data(), gW.size());
            parts[2 * l + 1] = dZ.rowwise().sum();
            if (l > 0) dH = m.W[l].transpose() * dZ;
          }
          g.groups = std::move(parts);
        }
      },
      model);
  return g;
}

template <typename Scalar>
Scalar forward(const BasicModel<Scalar>& model, const InputVector& x) {
  MatrixX<Scalar> X = x.dense().template cast<Scalar>();
  return forward_batch(model, X)[0];
}

template <typename Scalar>
BasicGradients<Scalar> backward(const BasicModel<Scalar>& model, const InputVector& x,
                                Scalar upstream) {
  MatrixX<Scalar> X = x.dense().template cast<Scalar>();
  VectorX<Scalar> up(1);
  up[0] = upstream;
  return backward_batch(model, X, up);
}

bool parameters_finite(const Model& model);

// Smallest distance of any pre-activation at x to a kink of a piecewise-linear activation.
double kink_margin(const Model& model, const InputVector& x);

// ---- construction -------------------------------------------------------------------------

enum class Arch { mlp2, polynet, disjoint_polynet, deep_poly };

struct ModelSpec {
  Arch arch = Arch::mlp2;
  int n = 0;
  int k = 1;                 // task sparsity; polynet factor count, poly degree, bias grid
  int width = 1;             // mlp2 width
  Activation act;            // mlp2 only
  bool train_u = true;       // false fixes u = 1 (single neurons without a second layer)
  std::vector<int> widths;   // deep_poly hidden widths r_1..r_{L-1}
};

enum class InitScheme { uniform_xavier, gaussian_kaiming, bernoulli_sign, symmetric_paired_sign };

InitScheme parse_init(const std::string& name);
std::string init_name(InitScheme s);

Model init(const ModelSpec& spec, InitScheme scheme, RngStream& rng);

struct Realization {
  Model model;
  std::string construction;
};

// arch_kind: mlp2-relu, mlp2-poly, k_zigzag, osc_poly, inf_zigzag, sinusoid, polynet,
// disjoint_polynet, quadratic2 (2-layer z^2 MLP).
Realization realize_parity(const std::string& arch_kind, int n, const IndexSet& S);

// Explicit coefficients (alternating 8k, then 6k, -2k) over h_i(s) = relu(s/(2k) + b_i);
// true iff they give 2 chi on all 2^k relevant sign patterns.
bool explicit_relu_verifies(int k);

}  // namespace parity
