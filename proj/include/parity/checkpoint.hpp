#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>

#include "parity/models.hpp"

namespace parity {

struct CheckpointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key-value text. Array lines read `name = rows cols : v v v ...`, values row-major.
void save_model(std::ostream& os, const Model& model);
Model load_model(std::istream& is);

void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

}  // namespace parity
