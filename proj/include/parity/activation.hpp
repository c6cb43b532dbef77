#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace parity {

enum class ActivationKind { relu, poly, k_zigzag, osc_poly, inf_zigzag, sinusoid };

// Scalar activation with its derivative. k_zigzag, osc_poly, inf_zigzag and sinusoid
// all pass through (k - 2j, (-1)^j) for j = 0..k, so a width-1 neuron on
// w = sum_{i in S} e_i computes chi_S.
struct Activation {
  ActivationKind kind = ActivationKind::relu;
  int k = 1;
  double scale = 1.0;  // sinusoid input scale
  double phase = 0.0;  // sinusoid phase
  std::vector<double> newton;  // osc_poly divided differences on nodes k, k-2, ..., -k

  static Activation relu();
  static Activation poly(int degree);
  static Activation k_zigzag(int k);
  static Activation osc_poly(int k);
  static Activation inf_zigzag(int k);
  static Activation sinusoid(int k, double scale = 1.0);
  static Activation sinusoid_phase(double phase, double scale = 1.0);
  static Activation parse(const std::string& name, int k);

  template <typename Scalar> Scalar value(Scalar z) const;
  template <typename Scalar> Scalar derivative(Scalar z) const;
  // Distance from z to the nearest point where the derivative jumps (inf if smooth).
  double kink_distance(double z) const;
  bool piecewise_linear() const;
  std::string name() const;

  template <typename Scalar>
  void apply(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& Z,
             Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& H) const;
  template <typename Scalar>
  void apply_derivative(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& Z,
                        Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& D) const;
};

namespace detail {

template <typename Scalar>
Scalar ipow(Scalar z, int k) {
  Scalar r(1);
  for (int i = 0; i < k; ++i) r *= z;
  return r;
}

// Period-2 triangle wave, tri(0) = 1, tri(+-1) = -1. Returns (value, slope).
template <typename Scalar>
std::pair<Scalar, Scalar> tri(Scalar t) {
  using std::abs;
  using std::floor;
  Scalar r = t - Scalar(2) * floor((t + Scalar(1)) / Scalar(2));
  return {Scalar(1) - Scalar(2) * abs(r), r > 0 ? Scalar(-2) : (r < 0 ? Scalar(2) : Scalar(0))};
}

}  // namespace detail

template <typename Scalar>
Scalar Activation::value(Scalar z) const {
  using std::floor;
  using std::sin;
  const Scalar half_pi = std::numbers::pi_v<long double> / 2;
  switch (kind) {
    case ActivationKind::relu:
      return z > 0 ? z : Scalar(0);
    case ActivationKind::poly:
      return detail::ipow(z, k);
    case ActivationKind::k_zigzag: {
      if (z >= k) return Scalar(1);
      if (z <= -k) return (k % 2) ? Scalar(-1) : Scalar(1);
      // Segment j is [k-2j-2, k-2j] with slope (-1)^j.
      int j = static_cast<int>(floor((Scalar(k) - z) / Scalar(2)));
      Scalar top = Scalar(k - 2 * j), sgn = (j % 2) ? Scalar(-1) : Scalar(1);
      return sgn * (Scalar(1) - (top - z));
    }
    case ActivationKind::osc_poly: {
      Scalar r = newton[k];
      for (int j = k - 1; j >= 0; --j) r = r * (z - Scalar(k - 2 * j)) + Scalar(newton[j]);
      return r;
    }
    case ActivationKind::inf_zigzag:
      return detail::tri<Scalar>((z - Scalar(k)) / Scalar(2)).first;
    case ActivationKind::sinusoid:
      return sin(half_pi * Scalar(scale) * z + Scalar(phase));
  }
  return Scalar(0);
}

template <typename Scalar>
Scalar Activation::derivative(Scalar z) const {
  using std::cos;
  using std::floor;
  const Scalar half_pi = std::numbers::pi_v<long double> / 2;
  switch (kind) {
    case ActivationKind::relu:
      return z > 0 ? Scalar(1) : Scalar(0);
    case ActivationKind::poly:
      return Scalar(k) * detail::ipow(z, k - 1);
    case ActivationKind::k_zigzag: {
      if (z >= k || z <= -k) return Scalar(0);
      int j = static_cast<int>(floor((Scalar(k) - z) / Scalar(2)));
      return (j % 2) ? Scalar(-1) : Scalar(1);
    }
    case ActivationKind::osc_poly: {
      Scalar r = newton[k], d(0);
      for (int j = k - 1; j >= 0; --j) {
        Scalar t = z - Scalar(k - 2 * j);
        d = d * t + r;
        r = r * t + Scalar(newton[j]);
      }
      return d;
    }
    case ActivationKind::inf_zigzag:
      return detail::tri<Scalar>((z - Scalar(k)) / Scalar(2)).second / Scalar(2);
    case ActivationKind::sinusoid:
      return half_pi * Scalar(scale) * cos(half_pi * Scalar(scale) * z + Scalar(phase));
  }
  return Scalar(0);
}

inline double Activation::kink_distance(double z) const {
  switch (kind) {
    case ActivationKind::relu:
      return std::abs(z);
    case ActivationKind::k_zigzag: {
      if (z >= k) return z - k;
      if (z <= -k) return -k - z;
      double t = (z - k) / 2.0;
      return 2.0 * std::abs(t - std::round(t));
    }
    case ActivationKind::inf_zigzag: {
      double t = (z - k) / 2.0;
      return 2.0 * std::abs(t - std::round(t));
    }
    default:
      return std::numeric_limits<double>::infinity();
  }
}

template <typename Scalar>
void Activation::apply(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& Z,
                       Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& H) const {
  if (kind == ActivationKind::relu)
    H = Z.cwiseMax(Scalar(0));
  else if (kind == ActivationKind::poly && k == 2)
    H = Z.cwiseAbs2();
  else
    H = Z.unaryExpr([this](Scalar z) { return value(z); });
}

template <typename Scalar>
void Activation::apply_derivative(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& Z,
                                  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& D) const {
  if (kind == ActivationKind::relu)
    D = (Z.array() > Scalar(0)).template cast<Scalar>().matrix();
  else if (kind == ActivationKind::poly && k == 2)
    D = Scalar(2) * Z;
  else
    D = Z.unaryExpr([this](Scalar z) { return derivative(z); });
}

}  // namespace parity
