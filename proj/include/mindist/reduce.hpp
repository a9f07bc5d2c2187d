#pragma once

#include <span>

namespace mindist {

/// Pairwise-tree summation with a shape fixed by the length alone. Used for
/// every reduction whose result must not depend on the degree of parallelism.
inline double pairwise_sum(std::span<const double> values) {
  if (values.size() <= 8) {
    double total = 0.0;
    for (double v : values) total += v;
    return total;
  }
  std::size_t half = values.size() / 2;
  return pairwise_sum(values.subspan(0, half)) + pairwise_sum(values.subspan(half));
}

}  // namespace mindist
