#pragma once

#include <cmath>
#include <string>

namespace parity {

enum class LossKind { hinge, square, cross_entropy, correlation };

LossKind parse_loss(const std::string& name);
std::string loss_name(LossKind kind);

// l(y, yhat) and dl/dyhat. Hinge derivative at y*yhat = 1 is 0.
inline double loss_value(LossKind kind, double y, double yhat) {
  const double m = y * yhat;
  switch (kind) {
    case LossKind::hinge:
      return m < 1.0 ? 1.0 - m : 0.0;
    case LossKind::square:
      return (y - yhat) * (y - yhat);
    case LossKind::cross_entropy:
      // log(1 + e^{-m}) without overflow
      return m > 0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
    case LossKind::correlation:
      return -m;
  }
  return 0.0;
}

inline double loss_derivative(LossKind kind, double y, double yhat) {
  const double m = y * yhat;
  switch (kind) {
    case LossKind::hinge:
      return m < 1.0 ? -y : 0.0;
    case LossKind::square:
      return 2.0 * (yhat - y);
    case LossKind::cross_entropy: {
      // -y * sigmoid(-m)
      double s = m > 0 ? std::exp(-m) / (1.0 + std::exp(-m)) : 1.0 / (1.0 + std::exp(m));
      return -y * s;
    }
    case LossKind::correlation:
      return -y;
  }
  return 0.0;
}

}  // namespace parity
