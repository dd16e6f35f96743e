#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "handerson/errors.hpp"
#include "handerson/hierarchy.hpp"
#include "handerson/weights.hpp"

namespace handerson {

enum class Boundary { neumann, dirichlet };

std::string to_string(Boundary b);
Boundary boundary_from_string(const std::string& s);

inline constexpr std::size_t kDefaultDenseCap = 4096;

/// Absolute slack on closed half-line counts e <= E (eigenvalues at grid energies count).
inline constexpr double kSpectralTieSlack = 1e-12;

/// H^omega_{X,kappa} = Delta_{X,kappa} + V^omega on l^2(Q_kappa(x_0)).
///
/// Delta_N = sum_{s=1}^{kappa} p_s E_s restricted to the cluster,
/// Delta_D = Delta_N + tail(kappa). An empty potential means the free operator.
class FiniteVolumeHamiltonian {
public:
  FiniteVolumeHamiltonian(HierarchicalStructure structure, WeightSequence weights, Rank kappa,
                          Boundary boundary, std::vector<double> potential = {});

  const HierarchicalStructure& structure() const noexcept { return structure_; }
  const WeightSequence& weights() const noexcept { return weights_; }
  Rank kappa() const noexcept { return kappa_; }
  Boundary boundary() const noexcept { return boundary_; }
  const std::vector<double>& potential() const noexcept { return potential_; }
  bool is_free() const noexcept { return potential_.empty(); }
  std::size_t dim() const noexcept { return dim_; }

  /// tail(kappa) for Dirichlet, 0 for Neumann.
  double identity_shift() const;

private:
  HierarchicalStructure structure_;
  WeightSequence weights_;
  Rank kappa_;
  Boundary boundary_;
  std::vector<double> potential_;
  std::size_t dim_;
};

namespace detail {

// out = (sum_{s=1}^{top} p_s E_s) psi + shift psi + omega .* psi on l^2(Q_kappa).
// For top < kappa the operator is the direct sum over the rank-top blocks.
template <class T>
void truncated_laplacian_apply(const HierarchicalStructure& st, const WeightSequence& w, Rank kappa, Rank top,
                               double shift, std::span<const double> omega, std::span<const T> psi,
                               std::span<T> out) {
  const std::size_t dim = static_cast<std::size_t>(st.volume(kappa));
  if (psi.size() != dim || out.size() != dim) throw DimensionError("state vector length does not match |Q_kappa|");
  if (!omega.empty() && omega.size() != dim) throw DimensionError("potential length does not match |Q_kappa|");
  if (top < 0 || top > kappa) throw RangeError("top rank outside [0, kappa]");

  // sums[s] holds the cluster sums of psi at rank s (s = 1..top).
  std::vector<std::vector<T>> sums(static_cast<std::size_t>(top) + 1);
  const T* below = psi.data();
  std::size_t below_count = dim;
  for (Rank s = 1; s <= top; ++s) {
    const auto n = static_cast<std::size_t>(st.branching(s));
    auto& level = sums[s];
    level.assign(below_count / n, T{});
    for (std::size_t j = 0; j < level.size(); ++j) {
      T acc{};
      for (std::size_t i = 0; i < n; ++i) acc += below[j * n + i];
      level[j] = acc;
    }
    below = level.data();
    below_count = level.size();
  }

  // Accumulate sum_{s' >= s} p_{s'} (mean over Q_{s'}) top-down.
  std::vector<T> acc;
  if (top >= 1) {
    acc.assign(sums[top].size(), T{});
    for (Rank s = top; s >= 1; --s) {
      const double scale = w.p(s) / static_cast<double>(st.volume(s));
      std::vector<T> next(sums[s].size());
      const std::size_t ratio = s < top ? static_cast<std::size_t>(st.branching(s + 1)) : 1;
      for (std::size_t j = 0; j < next.size(); ++j) {
        const T parent = s < top ? acc[j / ratio] : T{};
        next[j] = parent + scale * sums[s][j];
      }
      acc = std::move(next);
    }
  }
  const std::size_t ratio1 = top >= 1 ? static_cast<std::size_t>(st.branching(1)) : 1;
  for (std::size_t x = 0; x < dim; ++x) {
    const double diag = shift + (omega.empty() ? 0.0 : omega[x]);
    out[x] = (top >= 1 ? acc[x / ratio1] : T{}) + diag * psi[x];
  }
}

}  // namespace detail

/// (E_s psi)(x) = mean of psi over Q_s(x), psi on l^2(Q_kappa).
template <class T>
std::vector<T> averaging_apply(const HierarchicalStructure& st, Rank s, Rank kappa, std::span<const T> psi) {
  if (s < 0 || s > kappa) throw RangeError("averaging rank must lie in [0, kappa]");
  if (psi.size() != st.volume(kappa)) throw DimensionError("state vector length does not match |Q_kappa|");
  const auto block = static_cast<std::size_t>(st.volume(s));
  std::vector<T> out(psi.size());
  for (std::size_t b = 0; b < psi.size(); b += block) {
    T acc{};
    for (std::size_t i = 0; i < block; ++i) acc += psi[b + i];
    const T mean = acc / static_cast<double>(block);
    for (std::size_t i = 0; i < block; ++i) out[b + i] = mean;
  }
  return out;
}

template <class T>
void hamiltonian_apply(const FiniteVolumeHamiltonian& h, std::span<const T> psi, std::span<T> out) {
  detail::truncated_laplacian_apply<T>(h.structure(), h.weights(), h.kappa(), h.kappa(), h.identity_shift(),
                                       h.potential(), psi, out);
}

template <class T>
std::vector<T> hamiltonian_apply(const FiniteVolumeHamiltonian& h, std::span<const T> psi) {
  std::vector<T> out(psi.size());
  hamiltonian_apply<T>(h, psi, std::span<T>(out));
  return out;
}

/// Dense matrix of sum_{s=1}^{top} p_s E_s + shift + diag(omega) on l^2(Q_kappa).
Eigen::MatrixXd dense_truncated_operator(const HierarchicalStructure& st, const WeightSequence& w, Rank kappa,
                                         Rank top, double shift, std::span<const double> omega,
                                         std::size_t cap = kDefaultDenseCap);

Eigen::MatrixXd dense_matrix(const FiniteVolumeHamiltonian& h, std::size_t cap = kDefaultDenseCap);

struct SpectralAtom {
  double eigenvalue;
  std::size_t multiplicity;
};

/// Eigenvalues with multiplicities, strictly increasing.
struct ExactSpectrum {
  std::vector<SpectralAtom> atoms;

  std::size_t total_multiplicity() const;
  /// Expanded into a sorted list with repetitions.
  std::vector<double> expanded() const;
};

ExactSpectrum exact_free_spectrum(const HierarchicalStructure& st, const WeightSequence& w, Rank kappa,
                                  Boundary boundary);

/// Closed-form IDS N_0(E) of the infinite-volume Laplacian.
double ids_free(const HierarchicalStructure& st, const WeightSequence& w, double E);

}  // namespace handerson
