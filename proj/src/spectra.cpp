#include "handerson/spectra.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "handerson/errors.hpp"
#include "handerson/randomness.hpp"

namespace handerson {

namespace {

constexpr double kSymmetryTolerance = 1e-12;
constexpr double kCauchySchwarzSlack = 1e-12;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

}  // namespace

EigenvalueList eigenvalues_dense(const Eigen::MatrixXd& m, std::size_t cap) {
  if (m.rows() != m.cols()) throw DimensionError("eigenvalues_dense needs a square matrix");
  if (static_cast<std::size_t>(m.rows()) > cap) {
    throw ResourceError("dense dimension " + std::to_string(m.rows()) + " exceeds cap " + std::to_string(cap));
  }
  if (m.rows() == 0) return {};
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTolerance * scale) {
    throw ValidationError("matrix is not symmetric (max asymmetry " + std::to_string(asym) + ")");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("symmetric eigensolver did not converge");
  const auto& ev = solver.eigenvalues();
  EigenvalueList out{std::vector<double>(ev.data(), ev.data() + ev.size())};
  std::sort(out.values.begin(), out.values.end());
  return out;
}

EigenvalueList eigenvalues_dense(const FiniteVolumeHamiltonian& h, std::size_t cap) {
  return eigenvalues_dense(dense_matrix(h, cap), cap);
}

MatVec as_matvec(const FiniteVolumeHamiltonian& h) {
  return [&h](std::span<const double> in, std::span<double> out) { hamiltonian_apply<double>(h, in, out); };
}

IterativeResult max_eigenvalue_iterative(const MatVec& apply, std::size_t dim, double tol, std::size_t max_iter,
                                         std::uint64_t seed, std::size_t krylov_size) {
  if (!(tol > 0.0)) throw ValidationError("iterative tolerance must be > 0");
  if (dim == 0) throw DimensionError("operator dimension must be >= 1");
  IterativeResult result;

  std::vector<double> start(dim);
  CounterRng rng(seed, 0, Stream::start_vector);
  for (double& v : start) v = rng.normal();
  {
    const double nv = norm(start);
    for (double& v : start) v /= nv;
  }

  const std::size_t m_max = std::max<std::size_t>(1, std::min(dim, krylov_size));
  std::vector<std::vector<double>> basis;
  std::vector<double> w(dim);

  while (result.matvecs < max_iter) {
    basis.assign(1, start);
    std::vector<double> alpha;
    std::vector<double> beta;
    for (std::size_t j = 0; j < m_max && result.matvecs < max_iter; ++j) {
      apply(basis[j], w);
      ++result.matvecs;
      const double a = dot(w, basis[j]);
      alpha.push_back(a);
      // Two passes of classical Gram-Schmidt against the whole basis.
      for (int pass = 0; pass < 2; ++pass) {
        for (const auto& q : basis) {
          const double c = dot(w, q);
          for (std::size_t i = 0; i < dim; ++i) w[i] -= c * q[i];
        }
      }
      const double b = norm(w);
      if (j + 1 == m_max || b <= 1e-14 * std::max(1.0, std::abs(a))) break;
      beta.push_back(b);
      basis.emplace_back(dim);
      for (std::size_t i = 0; i < dim; ++i) basis.back()[i] = w[i] / b;
    }

    const auto k = static_cast<Eigen::Index>(alpha.size());
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
      t(i, i) = alpha[i];
      if (i + 1 < k) t(i, i + 1) = t(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(t);
    const double theta = small.eigenvalues()(k - 1);
    const Eigen::VectorXd s = small.eigenvectors().col(k - 1);

    std::vector<double> y(dim, 0.0);
    for (Eigen::Index i = 0; i < k; ++i) {
      for (std::size_t x = 0; x < dim; ++x) y[x] += s(i) * basis[i][x];
    }
    const double ny = norm(y);
    for (double& v : y) v /= ny;

    apply(y, w);
    ++result.matvecs;
    for (std::size_t x = 0; x < dim; ++x) w[x] -= theta * y[x];
    result.eigenvalue = theta;
    result.residual = norm(w);
    if (result.residual <= tol) {
      result.converged = true;
      return result;
    }
    start = std::move(y);
  }
  result.message = "no convergence within " + std::to_string(max_iter) + " matrix-vector products (residual " +
                   std::to_string(result.residual) + ")";
  return result;
}

double counting_function(const EigenvalueList& eigs, double E) {
  if (eigs.values.empty()) return 0.0;
  const auto it = std::upper_bound(eigs.values.begin(), eigs.values.end(), E + kSpectralTieSlack);
  return static_cast<double>(it - eigs.values.begin()) / static_cast<double>(eigs.values.size());
}

double temple_bound(const TempleInput& t) {
  if (!(t.mean > t.e1)) {
    throw PreconditionError("Temple precondition <psi, A psi> > E_1 violated", t.e1 - t.mean);
  }
  const double variance = t.second_moment - t.mean * t.mean;
  if (variance < -kCauchySchwarzSlack * std::max(1.0, t.mean * t.mean)) {
    throw ValidationError("moments violate Cauchy-Schwarz: <A^2> < <A>^2");
  }
  return t.mean + std::max(variance, 0.0) / (t.mean - t.e1);
}

TempleInput temple_input(const MatVec& apply, std::span<const double> psi, double e1) {
  const double nn = dot(psi, psi);
  if (std::abs(nn - 1.0) > 1e-12) throw ValidationError("Temple trial vector must be normalized");
  std::vector<double> a_psi(psi.size());
  apply(psi, a_psi);
  return TempleInput{dot(psi, a_psi), dot(a_psi, a_psi), e1};
}

}  // namespace handerson
