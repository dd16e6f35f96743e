#include <doctest.h>

#include <set>

#include "handerson/errors.hpp"
#include "handerson/hierarchy.hpp"

using namespace handerson;

namespace {

HierarchicalStructure fig1() { return HierarchicalStructure::with_prefix({3, 2, 2}, 2, 3); }

}  // namespace

TEST_CASE("volumes") {
  const auto h = HierarchicalStructure::homogeneous(2, 10);
  for (Rank r = 0; r <= 10; ++r) CHECK(h.volume(r) == (Index{1} << r));
  const auto s = fig1();
  CHECK(s.volume(0) == 1);
  CHECK(s.volume(1) == 3);
  CHECK(s.volume(2) == 6);
  CHECK(s.volume(3) == 12);
  CHECK(s.branching(7) == 2);
  CHECK_FALSE(s.is_homogeneous());
  CHECK_THROWS_AS(s.volume(4), RangeError);
  CHECK_THROWS_AS(HierarchicalStructure::homogeneous(1, 3), ValidationError);
  CHECK_THROWS_AS(HierarchicalStructure::with_prefix({2, 1}, 2, 3), ValidationError);
  CHECK_THROWS_AS(HierarchicalStructure::homogeneous(2, 70), ResourceError);
}

TEST_CASE("index_to_point examples") {
  const auto s = fig1();
  CHECK(index_to_point(s, 5) == Point({2, 1, 0}));
  CHECK(index_to_point(s, 0) == group_identity(s));
  const auto h = HierarchicalStructure::homogeneous(2, 3);
  CHECK(index_to_point(h, 6) == Point({0, 1, 1}));
  CHECK_THROWS_AS(index_to_point(h, 8), RangeError);
}

TEST_CASE("point_to_index examples") {
  CHECK(point_to_index(fig1(), Point({2, 1, 0})) == 5);
  CHECK(point_to_index(fig1(), Point()) == 0);
  CHECK(point_to_index(HierarchicalStructure::homogeneous(3, 2), Point({1, 1})) == 4);
  CHECK_THROWS_AS(point_to_index(fig1(), Point({3, 0, 0})), ValidationError);
  CHECK_THROWS_AS(point_to_index(fig1(), Point({0, 2, 0})), ValidationError);
}

TEST_CASE("enumeration is a bijection") {
  for (const auto& s : {fig1(), HierarchicalStructure::homogeneous(3, 5), HierarchicalStructure::homogeneous(2, 9)}) {
    std::set<std::vector<int>> seen;
    for (Index k = 0; k < s.size(); ++k) {
      const auto p = index_to_point(s, k);
      CHECK(point_to_index(s, p) == k);
      // trailing zeros are implicit, so compare padded digits
      std::vector<int> d;
      for (Rank r = 1; r <= s.max_rank(); ++r) d.push_back(p.digit(r));
      seen.insert(d);
    }
    CHECK(seen.size() == s.size());
  }
}

TEST_CASE("cluster_of") {
  const auto h = HierarchicalStructure::homogeneous(2, 3);
  const auto c = cluster_of(h, 5, 2);
  CHECK(c.position == 1);
  CHECK(c.first() == 4);
  CHECK(c.end() == 8);
  const auto single = cluster_of(h, 6, 0);
  CHECK(single.first() == 6);
  CHECK(single.end() == 7);
  const auto f = cluster_of(fig1(), 7, 1);
  CHECK(f.position == 2);
  CHECK(f.first() == 6);
  CHECK(f.end() == 9);
  CHECK_THROWS_AS(cluster_of(h, 5, 4), RangeError);
}

TEST_CASE("clusters tile and nest") {
  const auto s = fig1();
  for (Rank r = 0; r <= s.max_rank(); ++r) {
    std::vector<int> hits(s.size(), 0);
    for (Index m = 0; m < s.size() / s.volume(r); ++m) {
      for (Index k = m * s.volume(r); k < (m + 1) * s.volume(r); ++k) ++hits[k];
    }
    for (int h : hits) CHECK(h == 1);
    for (Index k = 0; k < s.size(); ++k) {
      const auto c = cluster_of(s, k, r);
      CHECK(c.contains(k));
      if (r >= 1) {
        // each rank-r cluster is the union of n_r rank-(r-1) clusters
        std::set<Index> children;
        for (Index y = c.first(); y < c.end(); ++y) children.insert(cluster_of(s, y, r - 1).position);
        CHECK(children.size() == static_cast<std::size_t>(s.branching(r)));
      }
    }
  }
}

TEST_CASE("common rank matches the digit rule") {
  const auto s = fig1();
  for (Index a = 0; a < s.size(); ++a) {
    for (Index b = 0; b < s.size(); ++b) {
      const auto pa = index_to_point(s, a), pb = index_to_point(s, b);
      Rank expected = 0;
      for (Rank r = 1; r <= s.max_rank(); ++r) {
        if (pa.digit(r) != pb.digit(r)) expected = r;
      }
      CHECK(common_rank(s, a, b) == expected);
    }
  }
}

TEST_CASE("group examples") {
  const auto s = HierarchicalStructure::with_prefix({3, 2}, 2, 2);
  CHECK(group_add(s, Point({2, 1}), Point({2, 0})) == Point({1, 1}));
  const Point p({2, 1});
  CHECK(group_add(s, p, group_identity(s)) == p);
  CHECK(group_add(s, p, group_neg(s, p)) == group_identity(s));
}

TEST_CASE("group axioms exhaustively") {
  const auto s = fig1();
  const auto n = s.size();
  for (Index a = 0; a < n; ++a) {
    const auto pa = index_to_point(s, a);
    CHECK(group_add(s, pa, group_neg(s, pa)) == group_identity(s));
    for (Index b = 0; b < n; ++b) {
      const auto pb = index_to_point(s, b);
      CHECK(group_add(s, pa, pb) == group_add(s, pb, pa));
      CHECK(group_add_index(s, a, b) == point_to_index(s, group_add(s, pa, pb)));
      for (Index c = 0; c < n; c += 5) {
        const auto pc = index_to_point(s, c);
        CHECK(group_add(s, group_add(s, pa, pb), pc) == group_add(s, pa, group_add(s, pb, pc)));
      }
    }
  }
}

TEST_CASE("cluster translation identity") {
  const auto s = fig1();
  for (Index x = 0; x < s.size(); ++x) {
    for (Index y = 0; y < s.size(); ++y) {
      for (Rank r = 0; r <= s.max_rank(); ++r) {
        const auto target = cluster_of(s, group_add_index(s, x, y), r);
        const auto src = cluster_of(s, y, r);
        std::set<Index> image;
        for (Index w = src.first(); w < src.end(); ++w) image.insert(group_add_index(s, x, w));
        CHECK(image.size() == target.cluster_size);
        CHECK(*image.begin() == target.first());
        CHECK(*image.rbegin() == target.end() - 1);
      }
    }
  }
}
