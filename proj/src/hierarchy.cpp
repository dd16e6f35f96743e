#include "handerson/hierarchy.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "handerson/errors.hpp"

namespace handerson {

namespace {

constexpr Index kMaxVolume = Index{1} << 62;

}  // namespace

HierarchicalStructure::HierarchicalStructure(std::vector<int> prefix, int degree, Rank max_rank)
    : prefix_(std::move(prefix)), degree_(degree), max_rank_(max_rank) {
  if (degree_ < 2) throw ValidationError("homogeneous degree must be >= 2, got " + std::to_string(degree_));
  for (int n : prefix_) {
    if (n < 2) throw ValidationError("branching factors must be >= 2, got " + std::to_string(n));
  }
  if (max_rank_ < 0) throw ValidationError("max_rank must be >= 0");
  volumes_.reserve(static_cast<std::size_t>(max_rank_) + 1);
  volumes_.push_back(1);
  for (Rank r = 1; r <= max_rank_; ++r) {
    const auto n = static_cast<Index>(branching(r));
    if (volumes_.back() > kMaxVolume / n) {
      throw ResourceError("volume of rank " + std::to_string(r) + " overflows the index type");
    }
    volumes_.push_back(volumes_.back() * n);
  }
}

HierarchicalStructure HierarchicalStructure::homogeneous(int degree, Rank max_rank) {
  return HierarchicalStructure({}, degree, max_rank);
}

HierarchicalStructure HierarchicalStructure::with_prefix(std::vector<int> prefix, int degree, Rank max_rank) {
  return HierarchicalStructure(std::move(prefix), degree, max_rank);
}

int HierarchicalStructure::branching(Rank r) const {
  if (r < 1) throw RangeError("branching factor n_r is defined for r >= 1");
  return static_cast<std::size_t>(r) <= prefix_.size() ? prefix_[r - 1] : degree_;
}

Index HierarchicalStructure::volume(Rank r) const {
  if (r < 0 || r > max_rank_) {
    throw RangeError("rank " + std::to_string(r) + " outside materialized range [0, " +
                     std::to_string(max_rank_) + "]");
  }
  return volumes_[r];
}

double HierarchicalStructure::inverse_volume(Rank r) const {
  if (r < 0) throw RangeError("negative rank");
  if (r <= max_rank_) return 1.0 / static_cast<double>(volumes_[r]);
  double inv = 1.0 / static_cast<double>(volumes_.back());
  for (Rank s = max_rank_ + 1; s <= r && inv > 0.0; ++s) inv /= branching(s);
  return inv;
}

double HierarchicalStructure::volume_real(Rank r) const {
  if (r < 0) throw RangeError("negative rank");
  if (r <= max_rank_) return static_cast<double>(volumes_[r]);
  double v = static_cast<double>(volumes_.back());
  for (Rank s = max_rank_ + 1; s <= r && std::isfinite(v); ++s) v *= branching(s);
  return v;
}

bool HierarchicalStructure::is_homogeneous() const noexcept {
  for (int n : prefix_) {
    if (n != degree_) return false;
  }
  return true;
}

HierarchicalStructure HierarchicalStructure::truncated(Rank max_rank) const {
  return HierarchicalStructure(prefix_, degree_, max_rank);
}

bool Point::operator==(const Point& other) const {
  const std::size_t len = std::max(digits_.size(), other.digits_.size());
  for (std::size_t i = 1; i <= len; ++i) {
    if (digit(static_cast<Rank>(i)) != other.digit(static_cast<Rank>(i))) return false;
  }
  return true;
}

void validate_point(const HierarchicalStructure& s, const Point& p) {
  const auto& d = p.digits();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const Rank r = static_cast<Rank>(i + 1);
    if (d[i] < 0 || d[i] >= s.branching(r)) {
      throw ValidationError("digit " + std::to_string(r) + " = " + std::to_string(d[i]) +
                            " outside [0, " + std::to_string(s.branching(r)) + ")");
    }
    if (r > s.max_rank() && d[i] != 0) {
      throw RangeError("point has a nonzero digit beyond max_rank");
    }
  }
}

Point index_to_point(const HierarchicalStructure& s, Index k) {
  if (k >= s.size()) {
    throw RangeError("index " + std::to_string(k) + " >= materialized volume " + std::to_string(s.size()));
  }
  std::vector<int> digits(static_cast<std::size_t>(s.max_rank()));
  for (Rank r = 1; r <= s.max_rank(); ++r) {
    const auto n = static_cast<Index>(s.branching(r));
    digits[r - 1] = static_cast<int>(k % n);
    k /= n;
  }
  return Point(std::move(digits));
}

Index point_to_index(const HierarchicalStructure& s, const Point& p) {
  validate_point(s, p);
  Index k = 0;
  const auto len = static_cast<Rank>(p.digits().size());
  for (Rank r = 1; r <= std::min(len, s.max_rank()); ++r) {
    k += static_cast<Index>(p.digit(r)) * s.volume(r - 1);
  }
  return k;
}

ClusterRef cluster_of(const HierarchicalStructure& s, Index k, Rank r) {
  if (r < 0 || r > s.max_rank()) throw RangeError("rank " + std::to_string(r) + " out of range");
  if (k >= s.size()) throw RangeError("index " + std::to_string(k) + " out of range");
  const Index size = s.volume(r);
  return ClusterRef{r, k / size, size};
}

Rank common_rank(const HierarchicalStructure& s, Index a, Index b) {
  if (a >= s.size() || b >= s.size()) throw RangeError("index out of range");
  Rank r = 0;
  while (a != b) {
    ++r;
    const auto n = static_cast<Index>(s.branching(r));
    a /= n;
    b /= n;
  }
  return r;
}

Point group_identity(const HierarchicalStructure& s) {
  return Point(std::vector<int>(static_cast<std::size_t>(s.max_rank()), 0));
}

Point group_add(const HierarchicalStructure& s, const Point& p, const Point& q) {
  validate_point(s, p);
  validate_point(s, q);
  std::vector<int> digits(static_cast<std::size_t>(s.max_rank()));
  for (Rank r = 1; r <= s.max_rank(); ++r) {
    digits[r - 1] = (p.digit(r) + q.digit(r)) % s.branching(r);
  }
  return Point(std::move(digits));
}

Point group_neg(const HierarchicalStructure& s, const Point& p) {
  validate_point(s, p);
  std::vector<int> digits(static_cast<std::size_t>(s.max_rank()));
  for (Rank r = 1; r <= s.max_rank(); ++r) {
    const int n = s.branching(r);
    digits[r - 1] = (n - p.digit(r)) % n;
  }
  return Point(std::move(digits));
}

Index group_add_index(const HierarchicalStructure& s, Index a, Index b) {
  if (a >= s.size() || b >= s.size()) throw RangeError("index out of range");
  Index result = 0;
  for (Rank r = 1; r <= s.max_rank(); ++r) {
    const auto n = static_cast<Index>(s.branching(r));
    result += ((a % n + b % n) % n) * s.volume(r - 1);
    a /= n;
    b /= n;
  }
  return result;
}

}  // namespace handerson
