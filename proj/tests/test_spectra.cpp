#include <doctest.h>

#include <cmath>

#include "handerson/errors.hpp"
#include "handerson/operators.hpp"
#include "handerson/randomness.hpp"
#include "handerson/spectra.hpp"

using namespace handerson;

namespace {

const auto kBinary = HierarchicalStructure::homogeneous(2, 12);
const auto kHalf = WeightSequence::geometric(2.0);

Eigen::MatrixXd random_symmetric(int n, std::uint64_t seed) {
  CounterRng rng(seed, 0, Stream::test_vectors);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  return 0.5 * (a + a.transpose());
}

}  // namespace

TEST_CASE("dense eigenvalues") {
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(4, 4);
  d.diagonal() << 3.0, -1.0, 2.0, 0.5;
  CHECK(eigenvalues_dense(d).values == std::vector<double>{-1.0, 0.5, 2.0, 3.0});

  const auto m = random_symmetric(30, 1);
  const auto e = eigenvalues_dense(m);
  const auto shifted = eigenvalues_dense(Eigen::MatrixXd(m + 0.75 * Eigen::MatrixXd::Identity(30, 30)));
  double trace = 0.0;
  for (std::size_t j = 0; j < e.dim(); ++j) {
    CHECK(std::abs(shifted.values[j] - e.values[j] - 0.75) < 1e-10);
    if (j > 0) CHECK(e.values[j] >= e.values[j - 1]);
    trace += e.values[j];
  }
  CHECK(std::abs(trace - m.trace()) <= 1e-10 * std::max(1.0, std::abs(m.trace())));

  Eigen::MatrixXd asym = m;
  asym(0, 1) += 1e-6;
  CHECK_THROWS_AS(eigenvalues_dense(asym), ValidationError);
  CHECK_THROWS_AS(eigenvalues_dense(m, 10), ResourceError);
  CHECK_THROWS_AS(eigenvalues_dense(Eigen::MatrixXd(2, 3)), DimensionError);
}

TEST_CASE("dense spectrum of the free Neumann operator") {
  const auto e = eigenvalues_dense(FiniteVolumeHamiltonian(kBinary, kHalf, 3, Boundary::neumann));
  const auto exact = exact_free_spectrum(kBinary, kHalf, 3, Boundary::neumann).expanded();
  for (std::size_t j = 0; j < exact.size(); ++j) CHECK(std::abs(e.values[j] - exact[j]) < 1e-10);
}

TEST_CASE("counting function") {
  const EigenvalueList e{{0.0, 0.0, 0.5, 1.0}};
  CHECK(counting_function(e, -0.1) == 0.0);
  CHECK(counting_function(e, 0.5) == 0.75);
  CHECK(counting_function(e, 1.0) == 1.0);
  CHECK(counting_function(e, 0.5 - 1e-13) == 0.75);
  CHECK(counting_function(e, 0.5 - 1e-9) == 0.5);
  const auto free3 = eigenvalues_dense(FiniteVolumeHamiltonian(kBinary, kHalf, 3, Boundary::neumann));
  CHECK(counting_function(free3, 0.5) == 0.75);
  double prev = 0.0;
  for (double E = -0.2; E < 1.2; E += 0.01) {
    const double v = counting_function(free3, E);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("iterative top eigenvalue") {
  const FiniteVolumeHamiltonian d(kBinary, kHalf, 10, Boundary::dirichlet);
  const auto rd = max_eigenvalue_iterative(as_matvec(d), d.dim(), 1e-10, 5000, 1);
  CHECK(rd.converged);
  CHECK(std::abs(rd.eigenvalue - 1.0) < 1e-10);
  CHECK(rd.residual <= 1e-10);

  const FiniteVolumeHamiltonian n(kBinary, kHalf, 8, Boundary::neumann);
  const auto rn = max_eigenvalue_iterative(as_matvec(n), n.dim(), 1e-10, 5000, 2);
  CHECK(rn.converged);
  CHECK(std::abs(rn.eigenvalue - (1.0 - std::ldexp(1.0, -8))) < 1e-10);

  for (std::uint64_t t = 0; t < 10; ++t) {
    const Rank k = 4 + static_cast<Rank>(t % 5);
    const auto omega = sample_potential(SingleSiteDistribution::uniform(-1, 0), kBinary.volume(k), 3, t).omega;
    const FiniteVolumeHamiltonian h(kBinary, kHalf, k, Boundary::dirichlet, omega);
    const double tol = 1e-9;
    const auto r = max_eigenvalue_iterative(as_matvec(h), h.dim(), tol, 20000, 10 + t);
    REQUIRE(r.converged);
    CHECK(r.residual <= tol);
    CHECK(std::abs(r.eigenvalue - eigenvalues_dense(h).max()) <= 10 * tol);
  }

  // a deterministic seed gives a deterministic answer
  const auto a = max_eigenvalue_iterative(as_matvec(n), n.dim(), 1e-10, 5000, 9);
  const auto b = max_eigenvalue_iterative(as_matvec(n), n.dim(), 1e-10, 5000, 9);
  CHECK(a.eigenvalue == b.eigenvalue);
  CHECK(a.matvecs == b.matvecs);
}

TEST_CASE("iterative solver reports failure instead of a wrong answer") {
  const auto omega = sample_potential(SingleSiteDistribution::uniform(-1, 0), 1024, 4, 0).omega;
  const FiniteVolumeHamiltonian h(kBinary, kHalf, 10, Boundary::neumann, omega);
  const auto r = max_eigenvalue_iterative(as_matvec(h), h.dim(), 1e-14, 3, 1, 3);
  CHECK_FALSE(r.converged);
  CHECK_FALSE(r.message.empty());
  CHECK_THROWS_AS(max_eigenvalue_iterative(as_matvec(h), h.dim(), 0.0, 10, 1), ValidationError);
}

TEST_CASE("temple bound examples") {
  CHECK(temple_bound({2.0, 4.0, 0.0}) == 2.0);
  CHECK(temple_bound({2.0, 5.0, 1.0}) == 3.0);
  CHECK(temple_bound({3.0, 9.0, 1.0}) == 3.0);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(3, 3);
  a.diagonal() << 0.0, 1.0, 3.0;
  const MatVec apply = [&](std::span<const double> x, std::span<double> y) {
    for (int i = 0; i < 3; ++i) y[i] = a(i, i) * x[i];
  };
  const double s = 1.0 / std::sqrt(2.0);
  const std::vector<double> psi{0.0, s, s};
  const auto t = temple_input(apply, psi, 1.0);
  CHECK(t.mean == doctest::Approx(2.0));
  CHECK(t.second_moment == doctest::Approx(5.0));
  const double bound = temple_bound(t);
  CHECK(bound == doctest::Approx(3.0));
  CHECK(eigenvalues_dense(a).max() <= bound + 1e-12);

  try {
    temple_bound({0.5, 0.5, 1.0});
    FAIL("expected a precondition error");
  } catch (const PreconditionError& e) {
    CHECK(e.deficit() == doctest::Approx(0.5));
  }
  CHECK_THROWS_AS(temple_bound({2.0, 3.0, 1.0}), ValidationError);
  CHECK_THROWS_AS(temple_input(apply, std::vector<double>{0.0, 1.0, 1.0}, 1.0), ValidationError);
}

TEST_CASE("temple bound is valid on random operators") {
  for (std::uint64_t t = 0; t < 200; ++t) {
    const auto omega = sample_potential(SingleSiteDistribution::uniform(-0.1, 0), 16, 21, t).omega;
    const FiniteVolumeHamiltonian h(kBinary, kHalf, 4, Boundary::dirichlet, omega);
    const std::vector<double> psi(16, 0.25);
    const auto in = temple_input(as_matvec(h), psi, 1.0 - kHalf.p(4));
    if (in.mean <= in.e1) continue;
    CHECK(eigenvalues_dense(h).max() <= temple_bound(in) + 1e-10);
  }
}

TEST_CASE("Weyl monotonicity on bracketing pairs") {
  for (std::uint64_t t = 0; t < 20; ++t) {
    const auto omega = sample_potential(SingleSiteDistribution::uniform(-1, 0), 32, 31, t).omega;
    const Rank r = static_cast<Rank>(t % 5);
    const auto full = dense_truncated_operator(kBinary, kHalf, 5, 5, 0.0, omega);
    const auto blocks = dense_truncated_operator(kBinary, kHalf, 5, r, 0.0, omega);
    const Eigen::MatrixXd diff = full - blocks;
    CHECK(eigenvalues_dense(diff).min() >= -1e-12);
    const auto ef = eigenvalues_dense(full), eb = eigenvalues_dense(blocks);
    for (std::size_t j = 0; j < ef.dim(); ++j) CHECK(ef.values[j] >= eb.values[j] - 1e-12);
  }
}
