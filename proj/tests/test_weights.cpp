#include <doctest.h>

#include <cmath>

#include "handerson/errors.hpp"
#include "handerson/weights.hpp"

using namespace handerson;

TEST_CASE("geometric weights") {
  const auto w = WeightSequence::geometric(2.0);
  CHECK(w.p(1) == 0.5);
  CHECK(w.p(2) == 0.25);
  CHECK(w.lambda(2) == 0.75);
  CHECK(w.tail(2) == 0.25);
  CHECK(w.lambda(0) == 0.0);
  CHECK(w.tail(0) == 1.0);
  for (Rank r = 1; r <= 50; ++r) {
    CHECK(w.lambda(r) == 1.0 - std::ldexp(1.0, -r));
    CHECK(w.tail(r) == std::ldexp(1.0, -r));
  }
  const auto w3 = WeightSequence::geometric(3.0);
  CHECK(w3.p(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(w3.tail(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(WeightSequence::geometric(1.0), ValidationError);
  CHECK_THROWS_AS(WeightSequence::geometric(0.5), ValidationError);
}

TEST_CASE("geometric partial sums agree with summation") {
  for (double rho : {1.5, 2.0, 3.0, 7.0}) {
    const auto w = WeightSequence::geometric(rho);
    double s = 0.0;
    for (Rank r = 1; r <= 30; ++r) {
      s += w.p(r);
      CHECK(std::abs(s - w.lambda(r)) <= 1e-14 * w.lambda(r));
      CHECK(w.lambda(r) >= w.lambda(r - 1));
      CHECK(w.tail(r) < w.tail(r - 1));
      CHECK(w.p(r) > 0.0);
      CHECK(w.p(r) < 1.0);
    }
    const auto dc = w.decay_constants(rho, 30);
    CHECK(dc.c1 == doctest::Approx(rho - 1.0));
    CHECK(dc.c2 == doctest::Approx(rho - 1.0));
  }
}

TEST_CASE("explicit lists") {
  const auto full = WeightSequence::explicit_list({0.5, 0.25, 0.25}, std::nullopt);
  CHECK(full.tail(3) == 0.0);
  CHECK(full.lambda(2) == 0.75);

  const auto cont = WeightSequence::explicit_list({0.5, 0.25}, 2.0);
  CHECK(cont.tail(2) == 0.25);
  double s = cont.lambda(2);
  for (Rank r = 3; r <= 40; ++r) {
    CHECK(cont.p(r) > 0.0);
    s += cont.p(r);
    CHECK(std::abs(1.0 - s - cont.tail(r)) <= 1e-15);
  }
  CHECK(cont.tail(40) > 0.0);

  CHECK_THROWS_AS(WeightSequence::explicit_list({0.5, 0.25}, std::nullopt), ValidationError);
  CHECK_THROWS_AS(WeightSequence::explicit_list({0.7, 0.4}, 2.0), ValidationError);
  CHECK_THROWS_AS(WeightSequence::explicit_list({0.5, -0.1}, 2.0), ValidationError);
  CHECK_THROWS_AS(WeightSequence::explicit_list({0.5, 0.5}, 2.0), ValidationError);
}

TEST_CASE("spectral dimension") {
  CHECK(spectral_dimension(2, 2.0).d_s == 2.0);
  CHECK(spectral_dimension(4, 2.0).d_s == 4.0);
  CHECK(spectral_dimension(2, 4.0).d_s == 1.0);
  for (int n : {2, 3, 5}) {
    for (double rho : {1.5, 2.0, 3.0}) {
      const auto d = spectral_dimension(n, rho);
      CHECK(d.d_s > 0.0);
      CHECK(std::pow(rho, d.d_s / 2.0) == doctest::Approx(n).epsilon(1e-14));
    }
  }
  CHECK_THROWS_AS(spectral_dimension(1, 2.0), ValidationError);
  CHECK_THROWS_AS(spectral_dimension(2, 1.0), ValidationError);
}

TEST_CASE("k_of_E") {
  const auto d = spectral_dimension(2, 2.0);
  CHECK(k_of_E(d, 1.0 / 8.0, 1.0) == 3);
  CHECK(k_of_E(d, 0.3, 1.0) == 1);
  CHECK(k_of_E(d, 0.5, 1.0) == 1);
  CHECK_THROWS_AS(k_of_E(d, 0.6, 1.0), DomainError);
  // With alpha = 6/C_1 + 1 = 7 no rank qualifies at E = 1/8.
  CHECK_THROWS_AS(k_of_E(d, 1.0 / 8.0, 7.0), DomainError);
  Rank prev = 1000;
  for (double E = 1e-6; E < 0.5; E *= 1.1) {
    const Rank r = k_of_E(d, E, 1.0);
    CHECK(r <= prev);
    CHECK(std::pow(2.0, r) <= 1.0 / E * (1.0 + 1e-12));
    CHECK(std::pow(2.0, r + 1) > 1.0 / E);
    prev = r;
  }
}

TEST_CASE("K_of_E") {
  const auto w = WeightSequence::geometric(2.0);
  CHECK(K_of_E(w, 1.0 / 8.0) == 5);
  CHECK(K_of_E(w, 1.0) == 2);
  CHECK(K_of_E(w, 1.99) == 1);
  CHECK(K_of_E(w, 0.5) == 3);
  CHECK(K_of_E(w, 0.25) == 4);
  CHECK(K_of_E(w, 1e-300) > 900);
  Rank prev = 0;
  for (double E = 1.99; E > 1e-8; E /= 1.3) {
    const Rank r = K_of_E(w, E);
    CHECK(r >= prev);
    CHECK(w.tail(r) < E / 2.0);
    if (r > 1) CHECK(w.tail(r - 1) >= E / 2.0 * (1.0 - 1e-12));
    prev = r;
  }
  CHECK_THROWS_AS(K_of_E(w, 0.0), ValidationError);
}
