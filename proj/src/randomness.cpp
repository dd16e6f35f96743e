#include "handerson/randomness.hpp"

#include <cmath>
#include <numbers>

#include "handerson/errors.hpp"
#include "handerson/numerics.hpp"

namespace handerson {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(product);
  hi = static_cast<std::uint32_t>(product >> 32);
}

Rank rank_of_volume(const HierarchicalStructure& st, std::size_t volume) {
  for (Rank r = 0; r <= st.max_rank(); ++r) {
    if (st.volume(r) == volume) return r;
  }
  throw DimensionError("array length " + std::to_string(volume) + " is not the volume of a materialized cluster");
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
    std::uint32_t lo0, hi0, lo1, hi1;
    mulhilo(kPhiloxM0, ctr[0], lo0, hi0);
    mulhilo(kPhiloxM1, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t replica, Stream stream)
    : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
      stream_(static_cast<std::uint32_t>(stream)),
      replica_(replica) {}

void CounterRng::refill() {
  buffer_ = philox4x32({block_, stream_, static_cast<std::uint32_t>(replica_),
                        static_cast<std::uint32_t>(replica_ >> 32)},
                       key_);
  ++block_;
  if (block_ == 0) throw ResourceError("counter-based stream exhausted");
  used_ = 0;
}

std::uint64_t CounterRng::next_u64() {
  if (used_ > 2) refill();
  const std::uint64_t v = (static_cast<std::uint64_t>(buffer_[used_]) << 32) | buffer_[used_ + 1];
  used_ += 2;
  return v;
}

double CounterRng::uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double CounterRng::normal() {
  const double u1 = 1.0 - uniform01();  // (0, 1]
  const double u2 = uniform01();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

SingleSiteDistribution SingleSiteDistribution::uniform(double a, double b) {
  if (!std::isfinite(a) || !std::isfinite(b) || a > b) throw ValidationError("uniform(a, b) needs finite a <= b");
  return SingleSiteDistribution(Kind::uniform, a, b, 0.0, 1.0);
}

SingleSiteDistribution SingleSiteDistribution::two_point(double v_minus, double v_plus, double q) {
  if (!std::isfinite(v_minus) || !std::isfinite(v_plus) || v_minus > v_plus) {
    throw ValidationError("two_point needs finite v_minus <= v_plus");
  }
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("two_point weight q must lie in [0, 1]");
  return SingleSiteDistribution(Kind::two_point, v_minus, v_plus, q, 0.0);
}

SingleSiteDistribution SingleSiteDistribution::power_tail(double v_minus, double v_plus, double mu) {
  if (!std::isfinite(v_minus) || !std::isfinite(v_plus) || !(v_minus < v_plus)) {
    throw ValidationError("power_tail needs finite v_minus < v_plus");
  }
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ValidationError("power_tail exponent mu must be > 0");
  return SingleSiteDistribution(Kind::power_tail, v_minus, v_plus, 0.0, mu);
}

std::string SingleSiteDistribution::kind_name() const {
  switch (kind_) {
    case Kind::uniform: return "uniform";
    case Kind::two_point: return "two_point";
    case Kind::power_tail: return "power_tail";
  }
  return "unknown";
}

bool SingleSiteDistribution::is_degenerate() const noexcept {
  if (v_minus_ == v_plus_) return true;
  return kind_ == Kind::two_point && (q_ == 0.0 || q_ == 1.0);
}

double SingleSiteDistribution::quantile(double u) const {
  const double width = v_plus_ - v_minus_;
  switch (kind_) {
    case Kind::uniform: return std::min(v_minus_ + width * u, v_plus_);
    case Kind::two_point: return u < 1.0 - q_ ? v_minus_ : v_plus_;
    case Kind::power_tail: return std::max(v_plus_ - width * std::pow(u, 1.0 / mu_), v_minus_);
  }
  return v_minus_;
}

double SingleSiteDistribution::cdf(double v) const {
  if (v < v_minus_) return 0.0;
  if (v >= v_plus_) return 1.0;
  const double width = v_plus_ - v_minus_;
  switch (kind_) {
    case Kind::uniform: return (v - v_minus_) / width;
    case Kind::two_point: return 1.0 - q_;
    case Kind::power_tail: return 1.0 - std::pow((v_plus_ - v) / width, mu_);
  }
  return 0.0;
}

double SingleSiteDistribution::mean() const {
  const double width = v_plus_ - v_minus_;
  switch (kind_) {
    case Kind::uniform: return 0.5 * (v_minus_ + v_plus_);
    case Kind::two_point: return (1.0 - q_) * v_minus_ + q_ * v_plus_;
    case Kind::power_tail: return v_plus_ - width * mu_ / (mu_ + 1.0);
  }
  return 0.0;
}

double SingleSiteDistribution::variance() const {
  const double width = v_plus_ - v_minus_;
  switch (kind_) {
    case Kind::uniform: return width * width / 12.0;
    case Kind::two_point: return q_ * (1.0 - q_) * width * width;
    case Kind::power_tail: {
      // Y = U^{1/mu}: E[Y] = mu/(mu+1), E[Y^2] = mu/(mu+2).
      const double m1 = mu_ / (mu_ + 1.0);
      const double m2 = mu_ / (mu_ + 2.0);
      return width * width * (m2 - m1 * m1);
    }
  }
  return 0.0;
}

SingleSiteDistribution::TailConstants SingleSiteDistribution::tail_constants() const {
  const double width = v_plus_ - v_minus_;
  if (width == 0.0) return {1.0, 0.0};
  switch (kind_) {
    case Kind::uniform: return {1.0 / width, 1.0};
    case Kind::two_point: return {q_, 0.0};
    case Kind::power_tail: return {std::pow(width, -mu_), mu_};
  }
  return {0.0, 0.0};
}

PotentialSample sample_potential(const SingleSiteDistribution& dist, std::size_t volume, std::uint64_t master_seed,
                                 std::uint64_t replica) {
  if (volume == 0) throw ValidationError("potential volume must be >= 1");
  PotentialSample sample{std::vector<double>(volume), master_seed, replica};
  CounterRng rng(master_seed, replica, Stream::potential);
  for (double& v : sample.omega) v = dist.quantile(rng.uniform01());
  return sample;
}

std::vector<double> shift_window(const HierarchicalStructure& st, std::span<const double> omega, Index x,
                                 Rank kappa) {
  const Rank big = rank_of_volume(st, omega.size());
  if (kappa < 0 || kappa > big) throw RangeError("window rank exceeds the rank of the sampled cluster");
  if (x >= st.size()) throw RangeError("shift point outside the materialized structure");
  const auto window = static_cast<std::size_t>(st.volume(kappa));
  std::vector<double> out(window);
  for (std::size_t y = 0; y < window; ++y) {
    const Index target = group_add_index(st, x, y);
    if (target >= omega.size()) throw RangeError("shifted window escapes the sampled cluster");
    out[y] = omega[target];
  }
  return out;
}

std::vector<double> shift_window(const HierarchicalStructure& st, std::span<const double> omega, const Point& x,
                                 Rank kappa) {
  validate_point(st, x);
  return shift_window(st, omega, point_to_index(st, x), kappa);
}

double birkhoff_average(const HierarchicalStructure& st, std::span<const double> omega, Rank window_rank,
                        const WindowObservable& h) {
  const std::size_t count = omega.size();
  std::vector<double> values(count);
  for (std::size_t x = 0; x < count; ++x) values[x] = h(shift_window(st, omega, static_cast<Index>(x), window_rank));
  return pairwise_sum(values) / static_cast<double>(count);
}

}  // namespace handerson
