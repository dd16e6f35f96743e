#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "handerson/hierarchy.hpp"

namespace handerson {

/// Philox4x32-10 block function (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Independent streams for distinct purposes under one (seed, replica) key.
enum class Stream : std::uint32_t { potential = 0, test_vectors = 1, start_vector = 2 };

/// Counter-based generator: output depends only on (seed, replica, stream, draw index),
/// never on the order in which replicas are processed.
class CounterRng {
public:
  CounterRng(std::uint64_t seed, std::uint64_t replica, Stream stream = Stream::potential);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform01();
  /// Standard normal (Box-Muller on two uniforms).
  double normal();

private:
  void refill();

  std::array<std::uint32_t, 2> key_;
  std::uint32_t stream_;
  std::uint64_t replica_;
  std::uint32_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
};

/// Single-site law P_0 with compact support [v_minus, v_plus].
class SingleSiteDistribution {
public:
  enum class Kind { uniform, two_point, power_tail };

  static SingleSiteDistribution uniform(double a, double b);
  /// Mass q at v_plus, 1 - q at v_minus.
  static SingleSiteDistribution two_point(double v_minus, double v_plus, double q);
  static SingleSiteDistribution point_mass(double value) { return two_point(value, value, 1.0); }
  /// Law of v_plus - (v_plus - v_minus) U^{1/mu}: P_0([v_plus - eps, v_plus]) = (eps/(v_plus - v_minus))^mu.
  static SingleSiteDistribution power_tail(double v_minus, double v_plus, double mu);

  Kind kind() const noexcept { return kind_; }
  std::string kind_name() const;
  double v_minus() const noexcept { return v_minus_; }
  double v_plus() const noexcept { return v_plus_; }
  double q() const noexcept { return q_; }
  double mu() const noexcept { return mu_; }

  /// All mass at a single point (violates the non-degeneracy assumption of the tail theorem).
  bool is_degenerate() const noexcept;

  /// Inverse CDF at u in [0, 1).
  double quantile(double u) const;
  double cdf(double v) const;
  /// P_0(]a, b]).
  double prob_interval(double a, double b) const { return b <= a ? 0.0 : cdf(b) - cdf(a); }
  double mean() const;
  double variance() const;

  /// Realized constants with P_0([v_plus - eps, v_plus]) >= C eps^mu for small eps.
  struct TailConstants {
    double c;
    double mu;
  };
  TailConstants tail_constants() const;

  bool operator==(const SingleSiteDistribution&) const = default;

private:
  SingleSiteDistribution(Kind kind, double v_minus, double v_plus, double q, double mu)
      : kind_(kind), v_minus_(v_minus), v_plus_(v_plus), q_(q), mu_(mu) {}

  Kind kind_;
  double v_minus_;
  double v_plus_;
  double q_;
  double mu_;
};

struct PotentialSample {
  std::vector<double> omega;
  std::uint64_t master_seed;
  std::uint64_t replica;
};

PotentialSample sample_potential(const SingleSiteDistribution& dist, std::size_t volume, std::uint64_t master_seed,
                                 std::uint64_t replica);

/// tau_x(omega) restricted to Q_kappa(x_0): entry index(y) = omega[index(x + y)].
/// omega is given on Q_R(x_0), R determined by its length.
std::vector<double> shift_window(const HierarchicalStructure& st, std::span<const double> omega, const Point& x,
                                 Rank kappa);
std::vector<double> shift_window(const HierarchicalStructure& st, std::span<const double> omega, Index x,
                                 Rank kappa);

using WindowObservable = std::function<double(std::span<const double>)>;

/// (1/|Q_r|) sum_{x in Q_r(x_0)} h(tau_x(omega)|_{Q_window}), omega given on Q_r(x_0).
double birkhoff_average(const HierarchicalStructure& st, std::span<const double> omega, Rank window_rank,
                        const WindowObservable& h);

}  // namespace handerson
