#pragma once

#include <algorithm>
#include <functional>
#include <span>

#include "wanes/common.hpp"

namespace wanes {

/// Euclidean projection of `y` onto the scaled simplex {x >= 0, sum x = mass}
/// by sorting and thresholding: x_i = max(0, y_i - theta).
inline Vector project_simplex(std::span<const double> y, double mass) {
  if (y.empty()) throw Error("project_simplex: empty input");
  if (!(mass >= 0.0)) throw Error("project_simplex: mass must be nonnegative");
  const std::size_t n = y.size();
  Vector sorted(y.begin(), y.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumsum = 0.0, theta = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cumsum += sorted[i];
    const double t = (cumsum - mass) / static_cast<double>(i + 1);
    if (i + 1 == n || sorted[i + 1] <= t) {
      theta = t;
      break;
    }
  }
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::max(0.0, y[i] - theta);
  return x;
}

}  // namespace wanes
