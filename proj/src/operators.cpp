#include "handerson/operators.hpp"

#include <cmath>

namespace handerson {

std::string to_string(Boundary b) { return b == Boundary::neumann ? "neumann" : "dirichlet"; }

Boundary boundary_from_string(const std::string& s) {
  if (s == "neumann" || s == "N") return Boundary::neumann;
  if (s == "dirichlet" || s == "D") return Boundary::dirichlet;
  throw ValidationError("unknown boundary '" + s + "'");
}

FiniteVolumeHamiltonian::FiniteVolumeHamiltonian(HierarchicalStructure structure, WeightSequence weights,
                                                 Rank kappa, Boundary boundary, std::vector<double> potential)
    : structure_(std::move(structure)),
      weights_(std::move(weights)),
      kappa_(kappa),
      boundary_(boundary),
      potential_(std::move(potential)) {
  if (kappa_ < 0 || kappa_ > structure_.max_rank()) {
    throw RangeError("kappa = " + std::to_string(kappa_) + " exceeds the materialized rank " +
                     std::to_string(structure_.max_rank()));
  }
  dim_ = static_cast<std::size_t>(structure_.volume(kappa_));
  if (!potential_.empty() && potential_.size() != dim_) {
    throw DimensionError("potential has " + std::to_string(potential_.size()) + " entries, |Q_kappa| = " +
                         std::to_string(dim_));
  }
  for (double v : potential_) {
    if (!std::isfinite(v)) throw ValidationError("potential entries must be finite");
  }
}

double FiniteVolumeHamiltonian::identity_shift() const {
  return boundary_ == Boundary::dirichlet ? weights_.tail(kappa_) : 0.0;
}

Eigen::MatrixXd dense_truncated_operator(const HierarchicalStructure& st, const WeightSequence& w, Rank kappa,
                                         Rank top, double shift, std::span<const double> omega,
                                         std::size_t cap) {
  const auto dim = static_cast<std::size_t>(st.volume(kappa));
  if (dim > cap) {
    throw ResourceError("dense dimension " + std::to_string(dim) + " exceeds cap " + std::to_string(cap));
  }
  if (top < 0 || top > kappa) throw RangeError("top rank outside [0, kappa]");
  if (!omega.empty() && omega.size() != dim) throw DimensionError("potential length does not match |Q_kappa|");

  // coupling[d] = sum_{s=max(d,1)}^{top} p_s / |Q_s| for points whose smallest common rank is d.
  std::vector<double> coupling(static_cast<std::size_t>(top) + 2, 0.0);
  for (Rank d = top; d >= 0; --d) {
    const double term = d >= 1 ? w.p(d) / static_cast<double>(st.volume(d)) : 0.0;
    coupling[d] = coupling[d + 1] + term;
  }

  const auto n = static_cast<Eigen::Index>(dim);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index x = 0; x < n; ++x) {
    for (Eigen::Index y = 0; y <= x; ++y) {
      const Rank d = common_rank(st, static_cast<Index>(x), static_cast<Index>(y));
      const double v = d <= top ? coupling[d] : 0.0;
      m(x, y) = v;
      m(y, x) = v;
    }
    m(x, x) += shift + (omega.empty() ? 0.0 : omega[static_cast<std::size_t>(x)]);
  }
  return m;
}

Eigen::MatrixXd dense_matrix(const FiniteVolumeHamiltonian& h, std::size_t cap) {
  return dense_truncated_operator(h.structure(), h.weights(), h.kappa(), h.kappa(), h.identity_shift(),
                                  h.potential(), cap);
}

std::size_t ExactSpectrum::total_multiplicity() const {
  std::size_t total = 0;
  for (const auto& a : atoms) total += a.multiplicity;
  return total;
}

std::vector<double> ExactSpectrum::expanded() const {
  std::vector<double> out;
  out.reserve(total_multiplicity());
  for (const auto& a : atoms) out.insert(out.end(), a.multiplicity, a.eigenvalue);
  return out;
}

ExactSpectrum exact_free_spectrum(const HierarchicalStructure& st, const WeightSequence& w, Rank kappa,
                                  Boundary boundary) {
  if (kappa < 0 || kappa > st.max_rank()) throw RangeError("kappa outside the materialized range");
  const Index volume = st.volume(kappa);
  const double shift = boundary == Boundary::dirichlet ? w.tail(kappa) : 0.0;

  // Eigenspace of lambda_r inside Q_kappa: functions constant on rank-r clusters with
  // zero sum over every rank-(r+1) cluster; dimension |Q_kappa|/|Q_r| - |Q_kappa|/|Q_{r+1}|.
  ExactSpectrum spec;
  auto push = [&](double value, std::size_t mult) {
    if (mult == 0) return;
    if (!spec.atoms.empty() && spec.atoms.back().eigenvalue == value) {
      spec.atoms.back().multiplicity += mult;
    } else {
      spec.atoms.push_back({value, mult});
    }
  };
  for (Rank r = 0; r < kappa; ++r) {
    push(w.lambda(r) + shift, static_cast<std::size_t>(volume / st.volume(r) - volume / st.volume(r + 1)));
  }
  push(w.lambda(kappa) + shift, 1);
  return spec;
}

double ids_free(const HierarchicalStructure& st, const WeightSequence& w, double E) {
  if (E < -kSpectralTieSlack) return 0.0;
  if (E >= 1.0) return 1.0;
  // r(E) = max{r : lambda_r <= E}; lambda_r increases to 1 so the loop terminates
  // once 1/|Q_{r+1}| vanishes in floating point at the latest.
  Rank r = 0;
  while (true) {
    const double inv_next = st.inverse_volume(r + 1);
    if (inv_next == 0.0) return 1.0;
    if (!(w.lambda(r + 1) <= E + kSpectralTieSlack)) return 1.0 - inv_next;
    // Explicit lists without continuation reach lambda = 1 after finitely many ranks.
    if (w.tail(r + 1) == 0.0) return 1.0;
    ++r;
  }
}

}  // namespace handerson
