#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "parity/models.hpp"

namespace parity::testing {

using LD = long double;

// ||analytic - central difference|| / max(||analytic||, ||fd||) over every parameter,
// computed in long double. nullopt when x sits within `kink_skip` of a kink.
inline std::optional<double> gradient_check(const Model& model, const InputVector& x,
                                            double h = 1e-5, double kink_skip = 1e-3) {
  if (kink_margin(model, x) < kink_skip) return std::nullopt;
  BasicModel<LD> m = cast_model<LD>(model);
  BasicGradients<LD> analytic = backward(m, x, LD(1));
  LD diff = 0, na = 0, nf = 0;
  auto params = parameters(m);
  for (std::size_t g = 0; g < params.size(); ++g) {
    auto& values = params[g].values;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      const LD saved = values[i];
      values[i] = saved + LD(h);
      const LD up = forward(m, x);
      values[i] = saved - LD(h);
      const LD down = forward(m, x);
      values[i] = saved;
      const LD fd = (up - down) / (2 * LD(h));
      const LD a = analytic.groups[g][i];
      diff += (a - fd) * (a - fd);
      na += a * a;
      nf += fd * fd;
    }
  }
  const LD den = std::max({std::sqrt(na), std::sqrt(nf), LD(1e-12)});
  return static_cast<double>(std::sqrt(diff) / den);
}

struct ArchCase {
  std::string name;
  ModelSpec spec;
};

// One spec per architecture/activation combination at input dimension n.
inline std::vector<ArchCase> all_arch_cases(int n = 8, int k = 3) {
  std::vector<ArchCase> out;
  auto mlp = [&](const std::string& name, Activation act, int width, bool train_u = true) {
    ModelSpec s;
    s.arch = Arch::mlp2;
    s.n = n;
    s.k = k;
    s.width = width;
    s.act = act;
    s.train_u = train_u;
    out.push_back({name, s});
  };
  mlp("mlp2-relu", Activation::relu(), 6);
  mlp("mlp2-poly", Activation::poly(k), 6);
  mlp("k_zigzag", Activation::k_zigzag(k), 1);
  mlp("osc_poly", Activation::osc_poly(k), 1);
  mlp("inf_zigzag", Activation::inf_zigzag(k), 1);
  mlp("sinusoid", Activation::sinusoid(k), 1);
  mlp("sinusoid2-fixed-u", Activation::sinusoid(k, 2.0), 1, false);
  ModelSpec p;
  p.arch = Arch::polynet;
  p.n = n;
  p.k = k;
  out.push_back({"polynet", p});
  ModelSpec d;
  d.arch = Arch::disjoint_polynet;
  d.n = n - n % k;
  d.k = k;
  out.push_back({"disjoint_polynet", d});
  ModelSpec q;
  q.arch = Arch::deep_poly;
  q.n = n;
  q.k = k;
  q.widths = {4, 3, 1};
  out.push_back({"deep_poly", q});
  return out;
}

}  // namespace parity::testing
