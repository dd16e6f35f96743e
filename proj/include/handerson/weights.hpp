#pragma once

#include <optional>
#include <vector>

#include "handerson/hierarchy.hpp"

namespace handerson {

/// Absolute slack for boundary ties in log-space rank selection.
inline constexpr double kRankTieSlack = 1e-12;

/// Probability weights (p_s)_{s>=1} of the hierarchical Laplacian, p_0 = 0.
///
/// lambda(r) = sum_{s<=r} p_s are the Laplacian eigenvalues; tail(r) = 1 - lambda(r)
/// is kept exact (closed form for geometric weights, compensated sums for lists)
/// and never obtained by truncating the infinite series.
class WeightSequence {
public:
  enum class Kind { geometric, explicit_list };

  /// p_s = (rho - 1) rho^{-s}.
  static WeightSequence geometric(double rho);

  /// Listed p_1..p_L. The remaining mass 1 - sum is spread as a geometric
  /// continuation with base `continuation_rho`; without a continuation the list
  /// must already sum to 1 (within 1e-12).
  static WeightSequence explicit_list(std::vector<double> listed, std::optional<double> continuation_rho);

  Kind kind() const noexcept { return kind_; }
  double p(Rank s) const;
  double lambda(Rank r) const;
  double tail(Rank r) const;
  double log_tail(Rank r) const;

  /// Decay base: rho for geometric weights, the continuation base for lists (nullopt when rejected).
  std::optional<double> rho() const noexcept { return rho_; }
  const std::vector<double>& listed() const noexcept { return listed_; }

  /// Realized constants C_1 <= p_r rho^r <= C_2 over r in [1, up_to].
  struct DecayConstants {
    double c1;
    double c2;
  };
  DecayConstants decay_constants(double rho, Rank up_to) const;

private:
  WeightSequence() = default;

  Kind kind_ = Kind::geometric;
  std::optional<double> rho_;
  std::vector<double> listed_;
  // Explicit lists: lambda_[r] and tail_[r] for r in [0, L], compensated.
  std::vector<double> lambda_;
  std::vector<double> tail_;
};

struct SpectralDimension {
  int n;
  double rho;
  double d_s;
};

SpectralDimension spectral_dimension(int n, double rho);

/// max{r >= 1 : n^r <= (alpha E)^{-d_s/2}}. Throws DomainError if no rank qualifies.
Rank k_of_E(const SpectralDimension& dim, double E, double alpha);

/// min{r >= 1 : tail(r) < E/2}.
Rank K_of_E(const WeightSequence& w, double E);

}  // namespace handerson
