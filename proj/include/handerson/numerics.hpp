#pragma once

#include <span>
#include <vector>

namespace handerson {

/// Pairwise (cascade) summation; result is a fixed function of the input order.
inline double pairwise_sum(std::span<const double> values) {
  if (values.empty()) return 0.0;
  if (values.size() <= 8) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

/// Sample mean and standard error of the mean (NaN error for fewer than two values).
struct MeanAndError {
  double mean;
  double stderr_;
};

MeanAndError mean_and_error(std::span<const double> values);

}  // namespace handerson
