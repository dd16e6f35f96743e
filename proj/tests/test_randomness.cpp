#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "handerson/errors.hpp"
#include "handerson/numerics.hpp"
#include "handerson/randomness.hpp"

using namespace handerson;

TEST_CASE("philox known answers") {
  // Reference vectors of the Random123 distribution (kat_vectors, philox4x32_10).
  const auto zero = philox4x32({0, 0, 0, 0}, {0, 0});
  CHECK(zero == std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  const auto ones = philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff});
  CHECK(ones == std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  const auto pi = philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0});
  CHECK(pi == std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("counter rng is reproducible and stream separated") {
  CounterRng a(42, 7), b(42, 7), c(42, 8), d(42, 7, Stream::test_vectors);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    CHECK(x != c.next_u64());
    CHECK(x != d.next_u64());
    seen.insert(x);
  }
  CHECK(seen.size() == 1000);
  CounterRng u(1, 0);
  for (int i = 0; i < 10000; ++i) {
    const double v = u.uniform01();
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("distribution validation and degeneracy") {
  CHECK_THROWS_AS(SingleSiteDistribution::uniform(0.0, -1.0), ValidationError);
  CHECK_THROWS_AS(SingleSiteDistribution::two_point(-1.0, 0.0, 1.5), ValidationError);
  CHECK_THROWS_AS(SingleSiteDistribution::power_tail(-1.0, 0.0, 0.0), ValidationError);
  CHECK(SingleSiteDistribution::point_mass(0.3).is_degenerate());
  CHECK(SingleSiteDistribution::two_point(-1, 0, 1.0).is_degenerate());
  CHECK(SingleSiteDistribution::uniform(0.2, 0.2).is_degenerate());
  CHECK_FALSE(SingleSiteDistribution::uniform(-1, 0).is_degenerate());
  CHECK_FALSE(SingleSiteDistribution::two_point(-1, 0, 0.3).is_degenerate());
}

TEST_CASE("sampling examples") {
  const auto zero = sample_potential(SingleSiteDistribution::two_point(-1, 0, 1.0), 64, 99, 3).omega;
  for (double v : zero) CHECK(v == 0.0);

  const auto u = SingleSiteDistribution::uniform(-1, 0);
  const auto big = sample_potential(u, 1'000'000, 2024, 0);
  CHECK(big.master_seed == 2024);
  const double mean = pairwise_sum(big.omega) / 1e6;
  CHECK(std::abs(mean + 0.5) <= 4.0 / std::sqrt(12.0 * 1e6));
  CHECK(*std::min_element(big.omega.begin(), big.omega.end()) >= -1.0);
  CHECK(*std::max_element(big.omega.begin(), big.omega.end()) <= 0.0);

  const auto pt = SingleSiteDistribution::power_tail(-1.0, 0.0, 2.0);
  const auto draws = sample_potential(pt, 1'000'000, 7, 0).omega;
  for (double eps : {0.1, 0.05, 0.02}) {
    const auto hits = std::count_if(draws.begin(), draws.end(), [&](double v) { return v >= -eps; });
    const double ratio = static_cast<double>(hits) / 1e6 / (eps * eps);
    CHECK(ratio == doctest::Approx(1.0).epsilon(0.1));
    CHECK(pt.prob_interval(-eps, 0.0) == doctest::Approx(eps * eps));
  }
  CHECK(pt.tail_constants().mu == 2.0);
  CHECK(pt.tail_constants().c == 1.0);
}

TEST_CASE("sample support and moments") {
  for (const auto& d : {SingleSiteDistribution::uniform(-2, 0.5), SingleSiteDistribution::two_point(-1, 0.25, 0.3),
                        SingleSiteDistribution::power_tail(-1.5, 0.0, 0.5)}) {
    const auto s = sample_potential(d, 200'000, 5, 1).omega;
    CHECK(*std::min_element(s.begin(), s.end()) >= d.v_minus());
    CHECK(*std::max_element(s.begin(), s.end()) <= d.v_plus());
    const auto me = mean_and_error(s);
    CHECK(std::abs(me.mean - d.mean()) <= 4.0 * std::sqrt(d.variance() / 2e5));
    CHECK(d.cdf(d.v_plus()) == 1.0);
    CHECK(d.cdf(d.v_minus() - 1.0) == 0.0);
  }
  const auto tp = SingleSiteDistribution::two_point(-1, 0, 0.3);
  CHECK(tp.prob_interval(-0.5, 0.0) == doctest::Approx(0.3));
  CHECK(tp.prob_interval(-1.5, 0.0) == doctest::Approx(1.0));
  const auto u = SingleSiteDistribution::uniform(-1, 0);
  CHECK(u.prob_interval(-1.0 / 16.0, 0.0) == 1.0 / 16.0);
}

TEST_CASE("smaller volumes are prefixes of the same potential") {
  const auto u = SingleSiteDistribution::uniform(-1, 0);
  const auto a = sample_potential(u, 1024, 17, 5).omega;
  const auto b = sample_potential(u, 16, 17, 5).omega;
  CHECK(std::equal(b.begin(), b.end(), a.begin()));
}

TEST_CASE("shift window") {
  const auto st = HierarchicalStructure::homogeneous(2, 6);
  const std::vector<double> omega{1, 2, 3, 4};
  CHECK(shift_window(st, omega, Point({1, 0}), 1) == std::vector<double>{2, 1});
  CHECK(shift_window(st, omega, Point(), 2) == omega);
  CHECK_THROWS_AS(shift_window(st, std::vector<double>{1, 2, 3}, Index{0}, 1), DimensionError);
  CHECK_THROWS_AS(shift_window(st, omega, Index{4}, 1), RangeError);
  CHECK_THROWS_AS(shift_window(st, omega, Index{0}, 3), RangeError);

  const auto w = sample_potential(SingleSiteDistribution::uniform(-1, 0), 32, 1, 0).omega;
  for (Index x = 0; x < 32; ++x) {
    const auto px = index_to_point(st, x);
    const auto there = shift_window(st, w, px, 5);
    CHECK(shift_window(st, there, group_neg(st, px), 5) == w);
    for (Index y = 0; y < 32; y += 3) {
      const auto py = index_to_point(st, y);
      CHECK(shift_window(st, there, py, 5) == shift_window(st, w, group_add(st, px, py), 5));
    }
  }
}

TEST_CASE("birkhoff average") {
  const auto st = HierarchicalStructure::homogeneous(2, 14);
  const auto w = sample_potential(SingleSiteDistribution::uniform(-1, 0), 256, 3, 0).omega;
  const double origin = birkhoff_average(st, w, 0, [](std::span<const double> v) { return v[0]; });
  CHECK(origin == doctest::Approx(pairwise_sum(w) / 256.0).epsilon(1e-14));
  CHECK(birkhoff_average(st, w, 2, [](std::span<const double>) { return 2.5; }) == 2.5);

  const auto big = sample_potential(SingleSiteDistribution::uniform(-1, 0), 1 << 14, 8, 0).omega;
  const double avg = birkhoff_average(st, big, 0, [](std::span<const double> v) { return v[0]; });
  CHECK(std::abs(avg + 0.5) <= 4.0 / std::sqrt(12.0 * (1 << 14)));
}
