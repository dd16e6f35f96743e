#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "handerson/operators.hpp"

namespace handerson {

/// Eigenvalues e(1) <= ... <= e(dim), repeated according to multiplicity.
struct EigenvalueList {
  std::vector<double> values;

  std::size_t dim() const noexcept { return values.size(); }
  double max() const { return values.back(); }
  double min() const { return values.front(); }
};

/// Full spectrum of a symmetric matrix (symmetric to 1e-12 relative to its largest entry).
EigenvalueList eigenvalues_dense(const Eigen::MatrixXd& m, std::size_t cap = kDefaultDenseCap);

EigenvalueList eigenvalues_dense(const FiniteVolumeHamiltonian& h, std::size_t cap = kDefaultDenseCap);

using MatVec = std::function<void(std::span<const double>, std::span<double>)>;

struct IterativeResult {
  bool converged = false;
  double eigenvalue = 0.0;
  /// ||A y - theta y|| for the returned unit Ritz vector y.
  double residual = 0.0;
  std::size_t matvecs = 0;
  std::string message;
};

/// Largest eigenvalue of a symmetric operator by restarted Lanczos with full
/// reorthogonalization. The start vector is drawn from `seed`.
IterativeResult max_eigenvalue_iterative(const MatVec& apply, std::size_t dim, double tol, std::size_t max_iter,
                                         std::uint64_t seed, std::size_t krylov_size = 64);

MatVec as_matvec(const FiniteVolumeHamiltonian& h);

/// Normalized eigenvalue counting function (1/dim) #{j : e(j) <= E}.
double counting_function(const EigenvalueList& eigs, double E);

struct TempleInput {
  double mean;           // <psi, A psi>
  double second_moment;  // <psi, A^2 psi>
  double e1;             // second-highest spectral value of A
};

/// Upper bound on E_max(A); requires <psi, A psi> > E_1 (PreconditionError otherwise).
double temple_bound(const TempleInput& t);

/// Moments of a unit vector psi under A.
TempleInput temple_input(const MatVec& apply, std::span<const double> psi, double e1);

}  // namespace handerson
