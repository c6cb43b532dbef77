#include "parity/activation.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace parity {

namespace {

constexpr double kHalfPi = std::numbers::pi / 2.0;

}  // namespace

Activation Activation::relu() { return {}; }

Activation Activation::poly(int degree) {
  if (degree < 1) throw std::invalid_argument("poly activation: degree must be >= 1");
  Activation a;
  a.kind = ActivationKind::poly;
  a.k = degree;
  return a;
}

Activation Activation::k_zigzag(int k) {
  if (k < 1) throw std::invalid_argument("k_zigzag: k must be >= 1");
  Activation a;
  a.kind = ActivationKind::k_zigzag;
  a.k = k;
  return a;
}

Activation Activation::osc_poly(int k) {
  if (k < 1) throw std::invalid_argument("osc_poly: k must be >= 1");
  Activation a;
  a.kind = ActivationKind::osc_poly;
  a.k = k;
  std::vector<double> c(k + 1);
  for (int j = 0; j <= k; ++j) c[j] = (j % 2) ? -1.0 : 1.0;
  // Nodes t_j = k - 2j. In-place divided differences.
  for (int lvl = 1; lvl <= k; ++lvl)
    for (int j = k; j >= lvl; --j) c[j] = (c[j] - c[j - 1]) / (-2.0 * lvl);
  a.newton = c;
  return a;
}

Activation Activation::inf_zigzag(int k) {
  if (k < 1) throw std::invalid_argument("inf_zigzag: k must be >= 1");
  Activation a;
  a.kind = ActivationKind::inf_zigzag;
  a.k = k;
  return a;
}

Activation Activation::sinusoid(int k, double scale) {
  Activation a = sinusoid_phase(kHalfPi - kHalfPi * k, scale);
  a.k = k;
  return a;
}

Activation Activation::sinusoid_phase(double phase, double scale) {
  Activation a;
  a.kind = ActivationKind::sinusoid;
  a.phase = phase;
  a.scale = scale;
  return a;
}

Activation Activation::parse(const std::string& name, int k) {
  if (name == "relu") return relu();
  if (name == "poly") return poly(k);
  if (name == "quadratic") return poly(2);
  if (name == "k_zigzag") return k_zigzag(k);
  if (name == "osc_poly") return osc_poly(k);
  if (name == "inf_zigzag") return inf_zigzag(k);
  if (name == "sinusoid") return sinusoid(k);
  if (name == "sinusoid2") return sinusoid(k, 2.0);
  throw std::invalid_argument("unknown activation '" + name + "'");
}

bool Activation::piecewise_linear() const {
  return kind == ActivationKind::relu || kind == ActivationKind::k_zigzag ||
         kind == ActivationKind::inf_zigzag;
}

std::string Activation::name() const {
  switch (kind) {
    case ActivationKind::relu:
      return "relu";
    case ActivationKind::poly:
      return k == 2 ? "quadratic" : "poly";
    case ActivationKind::k_zigzag:
      return "k_zigzag";
    case ActivationKind::osc_poly:
      return "osc_poly";
    case ActivationKind::inf_zigzag:
      return "inf_zigzag";
    case ActivationKind::sinusoid:
      return scale == 2.0 ? "sinusoid2" : "sinusoid";
  }
  return "?";
}

}  // namespace parity
