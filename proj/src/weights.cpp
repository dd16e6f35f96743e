#include "handerson/weights.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "handerson/errors.hpp"

namespace handerson {

namespace {

// Neumaier summation over a running list of terms.
class CompensatedSum {
public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

constexpr double kListSumSlack = 1e-12;

}  // namespace

WeightSequence WeightSequence::geometric(double rho) {
  if (!(rho > 1.0) || !std::isfinite(rho)) {
    throw ValidationError("geometric weights need rho > 1, got " + std::to_string(rho));
  }
  WeightSequence w;
  w.kind_ = Kind::geometric;
  w.rho_ = rho;
  return w;
}

WeightSequence WeightSequence::explicit_list(std::vector<double> listed, std::optional<double> continuation_rho) {
  if (listed.empty()) throw ValidationError("explicit weight list is empty");
  for (std::size_t i = 0; i < listed.size(); ++i) {
    if (!(listed[i] > 0.0 && listed[i] < 1.0)) {
      throw ValidationError("weight p_" + std::to_string(i + 1) + " must lie in (0, 1)");
    }
  }
  if (continuation_rho && !(*continuation_rho > 1.0)) {
    throw ValidationError("continuation rho must be > 1");
  }

  WeightSequence w;
  w.kind_ = Kind::explicit_list;
  w.rho_ = continuation_rho;
  w.listed_ = std::move(listed);

  CompensatedSum lambda;
  CompensatedSum tail;
  tail.add(1.0);
  w.lambda_.push_back(0.0);
  w.tail_.push_back(1.0);
  for (double p : w.listed_) {
    lambda.add(p);
    tail.add(-p);
    w.lambda_.push_back(lambda.value());
    w.tail_.push_back(tail.value());
  }
  const double rest = w.tail_.back();
  if (rest < -kListSumSlack) throw ValidationError("explicit weights sum to more than 1");
  if (continuation_rho) {
    if (rest <= 0.0) throw ValidationError("no mass left for the geometric continuation");
  } else if (rest > kListSumSlack) {
    throw ValidationError("explicit weights sum to " + std::to_string(1.0 - rest) +
                          " < 1 and no tail continuation was declared");
  } else {
    for (double& t : w.tail_) t = std::max(t, 0.0);
  }
  return w;
}

double WeightSequence::p(Rank s) const {
  if (s < 0) throw RangeError("negative rank");
  if (s == 0) return 0.0;
  if (kind_ == Kind::geometric) return (*rho_ - 1.0) * std::pow(*rho_, -s);
  const auto L = static_cast<Rank>(listed_.size());
  if (s <= L) return listed_[s - 1];
  if (!rho_) return 0.0;
  return tail_.back() * (*rho_ - 1.0) * std::pow(*rho_, -(s - L));
}

double WeightSequence::tail(Rank r) const {
  if (r < 0) throw RangeError("negative rank");
  if (kind_ == Kind::geometric) return std::pow(*rho_, -r);
  const auto L = static_cast<Rank>(listed_.size());
  if (r <= L) return tail_[r];
  if (!rho_) return tail_.back();
  return tail_.back() * std::pow(*rho_, -(r - L));
}

double WeightSequence::log_tail(Rank r) const {
  if (r < 0) throw RangeError("negative rank");
  if (kind_ == Kind::geometric) return -r * std::log(*rho_);
  const auto L = static_cast<Rank>(listed_.size());
  if (r <= L || !rho_) return std::log(tail(r));
  return std::log(tail_.back()) - (r - L) * std::log(*rho_);
}

double WeightSequence::lambda(Rank r) const {
  if (r < 0) throw RangeError("negative rank");
  if (kind_ == Kind::explicit_list && r <= static_cast<Rank>(listed_.size())) return lambda_[r];
  return 1.0 - tail(r);
}

WeightSequence::DecayConstants WeightSequence::decay_constants(double rho, Rank up_to) const {
  if (!(rho > 1.0)) throw ValidationError("decay base must be > 1");
  DecayConstants c{std::numeric_limits<double>::infinity(), 0.0};
  for (Rank r = 1; r <= up_to; ++r) {
    const double scaled = p(r) * std::pow(rho, r);
    c.c1 = std::min(c.c1, scaled);
    c.c2 = std::max(c.c2, scaled);
  }
  return c;
}

SpectralDimension spectral_dimension(int n, double rho) {
  if (n < 2) throw ValidationError("degree n must be >= 2");
  if (!(rho > 1.0) || !std::isfinite(rho)) throw ValidationError("rho must be > 1");
  return SpectralDimension{n, rho, 2.0 * std::log(static_cast<double>(n)) / std::log(rho)};
}

Rank k_of_E(const SpectralDimension& dim, double E, double alpha) {
  if (!(E > 0.0)) throw ValidationError("k(E) needs E > 0");
  if (!(alpha > 0.0)) throw ValidationError("k(E) needs alpha > 0");
  // n^r <= (alpha E)^{-d_s/2}  <=>  r ln n <= -(d_s/2) ln(alpha E)
  const double log_n = std::log(static_cast<double>(dim.n));
  const double bound = -0.5 * dim.d_s * std::log(alpha * E);
  if (log_n > bound + kRankTieSlack) {
    throw DomainError("k(E) undefined: (alpha E)^{-d_s/2} = " + std::to_string(std::exp(bound)) +
                      " < n = " + std::to_string(dim.n));
  }
  auto r = static_cast<Rank>(std::floor(bound / log_n));
  r = std::max(r, 1);
  while ((r + 1) * log_n <= bound + kRankTieSlack) ++r;
  while (r > 1 && r * log_n > bound + kRankTieSlack) --r;
  return r;
}

Rank K_of_E(const WeightSequence& w, double E) {
  if (!(E > 0.0)) throw ValidationError("K(E) needs E > 0");
  const double target = std::log(E / 2.0);
  for (Rank r = 1;; ++r) {
    const double lt = w.log_tail(r);
    if (lt < target - kRankTieSlack) return r;
    if (r > 1'000'000) throw DomainError("K(E) search did not terminate");
  }
}

}  // namespace handerson
