#pragma once

#include <string>
#include <vector>

namespace parity::svg {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct Plot {
  std::string title, xlabel, ylabel;
  bool log_x = false, log_y = false;
  std::vector<Series> series;
};

// Self-contained line plot. Non-finite points (and non-positive ones on log axes) are skipped.
std::string render(const Plot& plot, int width = 640, int height = 420);
void write(const std::string& path, const Plot& plot);

}  // namespace parity::svg
