#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "handerson/hierarchy.hpp"
#include "handerson/operators.hpp"
#include "handerson/randomness.hpp"
#include "handerson/spectra.hpp"
#include "handerson/weights.hpp"

namespace handerson {

struct ExecutionOptions {
  unsigned threads = 1;  // 0 = hardware concurrency
  std::size_t dense_cap = kDefaultDenseCap;
  double iterative_tol = 1e-10;
  std::size_t iterative_max_matvecs = 20000;
};

unsigned resolve_threads(unsigned requested);

/// Runs body(i) for i in [0, count) on `threads` workers. Each index is
/// processed exactly once; the lowest-index exception is rethrown.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body);

// ---------------------------------------------------------------------------
// Monte Carlo IDS

struct IdsEstimate {
  std::vector<double> energies;
  std::vector<double> mean;
  std::vector<double> stderr_;
  std::size_t replicas = 0;
  Boundary boundary = Boundary::neumann;
  Rank kappa = 0;
  std::vector<std::string> warnings;
};

/// E[N^omega_{X,kappa}(E)] on a grid from `replicas` independent potentials.
IdsEstimate mc_ids(Boundary boundary, Rank kappa, const SingleSiteDistribution& dist, const WeightSequence& w,
                   const HierarchicalStructure& st, std::span<const double> grid, std::size_t replicas,
                   std::uint64_t master_seed, const ExecutionOptions& opts = {});

/// Linear grid on [e_min, e_max] (cell midpoints) moved off the atoms lambda_r + {v_-, v_+}.
std::vector<double> continuity_grid(const WeightSequence& w, const SingleSiteDistribution& dist, double e_min,
                                    double e_max, std::size_t count, Rank max_rank = 40);

// ---------------------------------------------------------------------------
// Dirichlet-Neumann decoupling

struct BracketingReport {
  Rank kappa = 0;
  Rank r = 0;
  // Quadratic forms: max over random unit psi of the amount by which
  // <psi, H_N psi> >= <psi, (+)H_N psi> resp. <psi, H_D psi> <= <psi, (+)H_D psi> fails.
  double form_violation_neumann = 0.0;
  double form_violation_dirichlet = 0.0;
  // Sorted eigenvalues: max_j of e_{(+)N}(j) - e_{N}(j) resp. e_{D}(j) - e_{(+)D}(j), clipped at 0.
  double eig_violation_neumann = 0.0;
  double eig_violation_dirichlet = 0.0;
  // max_j |e_D(j) - e_N(j) - tail(kappa)|.
  double dirichlet_neumann_gap_deviation = 0.0;
  EigenvalueList neumann, dirichlet, blocks_neumann, blocks_dirichlet;

  double max_violation() const;
};

BracketingReport bracketing_check(const HierarchicalStructure& st, const WeightSequence& w, Rank kappa, Rank r,
                                  std::span<const double> omega, std::size_t psi_count, std::uint64_t seed,
                                  std::size_t dense_cap = kDefaultDenseCap);

// ---------------------------------------------------------------------------
// Tail estimates near the upper edge (energies measured in the v_+ = 0 frame)

enum class TailMethod { mc_neumann_lower, mc_dirichlet_upper, analytic_lower, temple_upper };
std::string to_string(TailMethod m);

struct TailEstimate {
  double E = 0.0;          // distance below the upper edge 1 + v_+
  double value = 0.0;      // estimate of 1 - N(1 + v_+ - E)
  double log_value = 0.0;  // natural log of value, finite even when value underflows
  double stderr_ = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  TailMethod method = TailMethod::analytic_lower;
  Rank kappa = 0;
  std::size_t replicas = 0;
};

/// (1/|Q_K|) P_0(]-E/2, 0])^{|Q_K|} with K = K_of_E(E); carried in log space.
TailEstimate tail_lower_analytic(double E, const SingleSiteDistribution& dist, const WeightSequence& w,
                                 const HierarchicalStructure& st);

struct KappaRule {
  enum class Kind { fixed, k_of_E, K_of_E };
  Kind kind = Kind::K_of_E;
  Rank kappa = 0;
  double alpha = 1.0;

  Rank resolve(double E, const HierarchicalStructure& st, const WeightSequence& w) const;
};

struct TailMcPoint {
  double E = 0.0;
  Rank kappa = 0;
  TailEstimate neumann_lower;
  TailEstimate dirichlet_upper;
  // Empirical P[E_max(H_N) > 1 - E].
  double emax_frequency = 0.0;
  double emax_frequency_stderr = 0.0;
  // Replicas with E_max(H_N) < lambda_kappa + mean(omega) - 1e-10 (trial-function bound).
  std::size_t trial_bound_violations = 0;
  double min_trial_slack = 0.0;
};

std::vector<TailMcPoint> tail_mc(std::span<const double> energies, const SingleSiteDistribution& dist,
                                 const WeightSequence& w, const HierarchicalStructure& st, const KappaRule& rule,
                                 std::size_t replicas, std::uint64_t master_seed, const ExecutionOptions& opts = {});

struct TempleReplica {
  bool precondition_passed = false;
  double trial_energy = 0.0;       // <psi_0, H~ psi_0>
  double temple_bound = 0.0;       // full Temple bound for H~
  double averaged_bound = 0.0;     // 1 + (1/(2|Q|)) sum_x V_kappa(x)
  double emax_truncated = 0.0;     // E_max(H~_{D,kappa})
  double emax = 0.0;               // E_max(H_{D,kappa})
  double mean_truncated_potential = 0.0;
  double chain_violation = 0.0;    // largest failure of emax <= emax~ <= temple <= averaged
  bool exceeds_edge = false;       // emax > 1 - E
  bool large_deviation_event = false;  // mean V_kappa > -2E
  bool iterative = false;
};

/// Bernoulli coarse-graining diagnostics of the large-deviation step.
struct BernoulliDiagnostics {
  bool available = false;
  double c1 = 0.0;
  double gamma = 0.0;
  double q = 0.0;  // P_0(]gamma, 0])
  double z = 0.0;  // 1 - 6/(alpha C_1)
  double t0 = 0.0;
  double f_t0 = 0.0;  // max over the scanned t of t z - ln(1 - q + q e^t)
  bool z_positive = false;
  bool q_below_z = false;
  bool f_positive = false;
  double log_probability_bound = 0.0;  // -|Q_kappa| f(t0)
};

struct TailUpperResult {
  Rank kappa = 0;
  double p_kappa = 0.0;
  double truncation_floor = 0.0;  // -p_kappa / 3
  double e1 = 0.0;                // 1 - p_kappa
  TailEstimate estimate;          // temple-upper: P[E_max(H_D) > 1 - E]
  double event_frequency = 0.0;   // P[mean V_kappa > -2E]
  std::size_t replicas = 0;
  std::size_t precondition_passes = 0;
  std::size_t chain_violations = 0;
  double max_chain_violation = 0.0;
  std::vector<TempleReplica> per_replica;
  BernoulliDiagnostics bernoulli;

  double pass_rate() const { return replicas ? static_cast<double>(precondition_passes) / replicas : 0.0; }
};

inline constexpr double kTempleChainTolerance = 1e-10;

/// Default alpha = 6/C_1 + 1 with C_1 = rho - 1 (geometric weights).
double default_alpha(const WeightSequence& w);

TailUpperResult tail_upper_pipeline(double E, double alpha, const SingleSiteDistribution& dist,
                                    const WeightSequence& w, const HierarchicalStructure& st, std::size_t replicas,
                                    std::uint64_t master_seed, const ExecutionOptions& opts = {});

// ---------------------------------------------------------------------------
// Exponent fits

enum class FitTransform { van_hove, lifshits };
std::string to_string(FitTransform t);

struct ExponentFit {
  FitTransform transform = FitTransform::van_hove;
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;  // RMS deviation from the fitted line
  double e_min = 0.0;
  double e_max = 0.0;
  std::size_t points = 0;
};

/// Least squares of ln(value) (van Hove) or ln|ln value| (Lifshits) against ln E.
ExponentFit exponent_fit(std::span<const std::pair<double, double>> points, FitTransform transform);
/// Same, with values given as natural logs.
ExponentFit exponent_fit_log(std::span<const std::pair<double, double>> log_points, FitTransform transform);

/// ln(value) / ln(E).
double pointwise_exponent(double E, double value);

// ---------------------------------------------------------------------------
// Ergodic structure

/// max |K^{tau_x omega}_kappa(y, y') - K^omega_kappa(x + y, x + y')| over Q_R, where
/// K^omega_kappa = sum_{s<=kappa} p_s E_s + V^omega and omega lives on Q_R(x_0).
double covariance_check(const HierarchicalStructure& st, const WeightSequence& w, Rank kappa, Rank R,
                        std::span<const double> omega, const Point& x);

struct BirkhoffReport {
  double average = 0.0;
  double expected = 0.0;
  double sigma = 0.0;
  double z_score = 0.0;
};

/// Birkhoff average of the origin value over Q_r(x_0) for one sampled potential.
BirkhoffReport birkhoff_origin_mean(const HierarchicalStructure& st, const SingleSiteDistribution& dist, Rank r,
                                    std::uint64_t master_seed);

/// Largest distance of any eigenvalue outside [v_-, 1 + v_+].
double spectral_range_excess(const EigenvalueList& eigs, const SingleSiteDistribution& dist);

}  // namespace handerson
