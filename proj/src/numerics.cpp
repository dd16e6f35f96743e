#include "handerson/numerics.hpp"

#include <cmath>
#include <limits>

namespace handerson {

MeanAndError mean_and_error(std::span<const double> values) {
  const auto n = static_cast<double>(values.size());
  if (values.empty()) return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  const double mean = pairwise_sum(values) / n;
  if (values.size() < 2) return {mean, std::numeric_limits<double>::quiet_NaN()};
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) sq[i] = (values[i] - mean) * (values[i] - mean);
  const double var = pairwise_sum(sq) / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

}  // namespace handerson
