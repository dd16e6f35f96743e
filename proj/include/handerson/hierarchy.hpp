#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace handerson {

using Index = std::uint64_t;
using Rank = int;

/// Nested partitions of the enumerated set X = {x_0, x_1, ...}.
///
/// A rank-r cluster is a union of n_r rank-(r-1) clusters. The branching
/// sequence is an explicit (possibly empty) prefix followed by a constant
/// degree n. Only the clusters up to max_rank are materialized; indices
/// beyond volume(max_rank) are out of range.
class HierarchicalStructure {
public:
  static HierarchicalStructure homogeneous(int degree, Rank max_rank);
  static HierarchicalStructure with_prefix(std::vector<int> prefix, int degree, Rank max_rank);

  /// n_r for r >= 1 (any r, including ranks beyond max_rank).
  int branching(Rank r) const;
  /// |Q_r|, r in [0, max_rank].
  Index volume(Rank r) const;
  /// 1/|Q_r| for any r >= 0, computed in floating point.
  double inverse_volume(Rank r) const;
  /// |Q_r| as a double for any r >= 0 (may be inf for huge r).
  double volume_real(Rank r) const;

  Rank max_rank() const noexcept { return max_rank_; }
  Index size() const noexcept { return volumes_.back(); }
  int degree() const noexcept { return degree_; }
  const std::vector<int>& prefix() const noexcept { return prefix_; }
  bool is_homogeneous() const noexcept;

  /// Same branching, different materialization depth.
  HierarchicalStructure truncated(Rank max_rank) const;

  bool operator==(const HierarchicalStructure&) const = default;

private:
  HierarchicalStructure(std::vector<int> prefix, int degree, Rank max_rank);

  std::vector<int> prefix_;
  int degree_ = 2;
  Rank max_rank_ = 0;
  std::vector<Index> volumes_;
};

/// Mixed-radix digits (xi_1, ..., xi_max_rank); xi_r in [0, n_r).
/// Digit r gives the position of Q_{r-1}(x) inside Q_r(x).
class Point {
public:
  Point() = default;
  explicit Point(std::vector<int> digits) : digits_(std::move(digits)) {}

  /// 1-based; digits past the stored length are zero.
  int digit(Rank r) const {
    return r >= 1 && static_cast<std::size_t>(r) <= digits_.size() ? digits_[r - 1] : 0;
  }
  const std::vector<int>& digits() const noexcept { return digits_; }

  bool operator==(const Point& other) const;

private:
  std::vector<int> digits_;
};

struct ClusterRef {
  Rank rank = 0;
  Index position = 0;  // counted from the left
  Index cluster_size = 1;

  Index first() const noexcept { return position * cluster_size; }
  Index end() const noexcept { return (position + 1) * cluster_size; }
  bool contains(Index k) const noexcept { return k >= first() && k < end(); }
};

Point index_to_point(const HierarchicalStructure& s, Index k);
Index point_to_index(const HierarchicalStructure& s, const Point& p);
void validate_point(const HierarchicalStructure& s, const Point& p);

ClusterRef cluster_of(const HierarchicalStructure& s, Index k, Rank r);

/// Smallest rank r with Q_r(x_a) = Q_r(x_b); 0 iff a == b.
Rank common_rank(const HierarchicalStructure& s, Index a, Index b);

Point group_identity(const HierarchicalStructure& s);
Point group_add(const HierarchicalStructure& s, const Point& p, const Point& q);
Point group_neg(const HierarchicalStructure& s, const Point& p);

/// Index-level shortcut for point_to_index(group_add(index_to_point(a), index_to_point(b))).
Index group_add_index(const HierarchicalStructure& s, Index a, Index b);

}  // namespace handerson
