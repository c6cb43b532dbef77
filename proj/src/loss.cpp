#include "parity/loss.hpp"

#include <stdexcept>

namespace parity {

LossKind parse_loss(const std::string& name) {
  if (name == "hinge") return LossKind::hinge;
  if (name == "square") return LossKind::square;
  if (name == "cross_entropy" || name == "ce") return LossKind::cross_entropy;
  if (name == "correlation") return LossKind::correlation;
  throw std::invalid_argument("unknown loss '" + name + "'");
}

std::string loss_name(LossKind kind) {
  switch (kind) {
    case LossKind::hinge:
      return "hinge";
    case LossKind::square:
      return "square";
    case LossKind::cross_entropy:
      return "cross_entropy";
    case LossKind::correlation:
      return "correlation";
  }
  return "?";
}

}  // namespace parity
