#include "handerson/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>

#include "handerson/errors.hpp"
#include "handerson/numerics.hpp"

namespace handerson {

namespace {

std::vector<double> column(const std::vector<std::vector<double>>& rows, std::size_t j) {
  std::vector<double> out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = rows[i][j];
  return out;
}

// Potential sampled on Q_kappa and shifted so that sup supp P_0 = 0.
std::vector<double> shifted_potential(const SingleSiteDistribution& dist, std::size_t volume, std::uint64_t seed,
                                      std::uint64_t replica) {
  auto omega = sample_potential(dist, volume, seed, replica).omega;
  for (double& v : omega) v -= dist.v_plus();
  return omega;
}

double mean_of(std::span<const double> v) { return pairwise_sum(v) / static_cast<double>(v.size()); }

TailEstimate mc_estimate(double E, std::span<const double> samples, TailMethod method, Rank kappa) {
  const auto me = mean_and_error(samples);
  TailEstimate t;
  t.E = E;
  t.value = me.mean;
  t.log_value = std::log(me.mean);
  t.stderr_ = me.stderr_;
  const double half = std::isfinite(me.stderr_) ? 1.96 * me.stderr_ : 0.0;
  t.ci_low = std::max(0.0, me.mean - half);
  t.ci_high = std::min(1.0, me.mean + half);
  t.method = method;
  t.kappa = kappa;
  t.replicas = samples.size();
  return t;
}

struct TopEigenvalue {
  double value;
  double error;
  bool iterative;
};

TopEigenvalue top_eigenvalue(const FiniteVolumeHamiltonian& h, const ExecutionOptions& opts, std::uint64_t seed) {
  if (h.dim() <= opts.dense_cap) return {eigenvalues_dense(h, opts.dense_cap).max(), 0.0, false};
  const auto res = max_eigenvalue_iterative(as_matvec(h), h.dim(), opts.iterative_tol, opts.iterative_max_matvecs, seed);
  if (!res.converged) throw std::runtime_error("iterative top eigenvalue failed: " + res.message);
  return {res.eigenvalue, res.residual, true};
}

SpectralDimension dimension_of(const HierarchicalStructure& st, const WeightSequence& w) {
  if (!st.is_homogeneous()) throw ValidationError("rank rule k(E) needs a homogeneous structure");
  if (!w.rho()) throw ValidationError("rank rule k(E) needs a decay base rho");
  return spectral_dimension(st.degree(), *w.rho());
}

}  // namespace

unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& body) {
  threads = std::max(1u, std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::mutex mutex;
  std::size_t failed_index = std::numeric_limits<std::size_t>::max();
  std::exception_ptr failure;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += threads) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(mutex);
          if (i < failed_index) {
            failed_index = i;
            failure = std::current_exception();
          }
          return;
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------

IdsEstimate mc_ids(Boundary boundary, Rank kappa, const SingleSiteDistribution& dist, const WeightSequence& w,
                   const HierarchicalStructure& st, std::span<const double> grid, std::size_t replicas,
                   std::uint64_t master_seed, const ExecutionOptions& opts) {
  if (replicas == 0) throw ValidationError("mc_ids needs at least one replica");
  const auto model = st.truncated(std::max(kappa, 0));
  const auto volume = static_cast<std::size_t>(model.volume(kappa));
  if (volume > opts.dense_cap) {
    throw ResourceError("|Q_kappa| = " + std::to_string(volume) + " exceeds the dense cap");
  }

  IdsEstimate est;
  est.energies.assign(grid.begin(), grid.end());
  est.replicas = replicas;
  est.boundary = boundary;
  est.kappa = kappa;
  if (dist.is_degenerate()) est.warnings.push_back("single-site distribution is degenerate (point mass)");

  std::vector<std::vector<double>> rows(replicas);
  parallel_for(replicas, opts.threads, [&](std::size_t i) {
    auto omega = sample_potential(dist, volume, master_seed, i).omega;
    const FiniteVolumeHamiltonian h(model, w, kappa, boundary, std::move(omega));
    const auto eigs = eigenvalues_dense(h, opts.dense_cap);
    auto& row = rows[i];
    row.resize(grid.size());
    for (std::size_t g = 0; g < grid.size(); ++g) row[g] = counting_function(eigs, grid[g]);
  });

  est.mean.resize(grid.size());
  est.stderr_.resize(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto col = column(rows, g);
    const auto me = mean_and_error(col);
    est.mean[g] = me.mean;
    est.stderr_[g] = me.stderr_;
  }
  return est;
}

std::vector<double> continuity_grid(const WeightSequence& w, const SingleSiteDistribution& dist, double e_min,
                                    double e_max, std::size_t count, Rank max_rank) {
  if (count == 0 || !(e_max > e_min)) throw ValidationError("continuity grid needs count >= 1 and e_max > e_min");
  std::vector<double> atoms;
  for (Rank r = 0; r <= max_rank; ++r) {
    atoms.push_back(w.lambda(r) + dist.v_minus());
    atoms.push_back(w.lambda(r) + dist.v_plus());
  }
  atoms.push_back(1.0 + dist.v_minus());
  atoms.push_back(1.0 + dist.v_plus());
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());

  const double step = (e_max - e_min) / static_cast<double>(count);
  const double clash = 1e-9 * std::max(1.0, e_max - e_min);
  std::vector<double> grid(count);
  for (std::size_t i = 0; i < count; ++i) {
    double e = e_min + (static_cast<double>(i) + 0.5) * step;
    auto it = std::lower_bound(atoms.begin(), atoms.end(), e - clash);
    if (it != atoms.end() && std::abs(*it - e) <= clash) {
      // Midpoint of the widest gap between consecutive atoms inside the cell.
      const double lo = e - 0.5 * step, hi = e + 0.5 * step;
      std::vector<double> marks{lo};
      for (auto a = std::upper_bound(atoms.begin(), atoms.end(), lo); a != atoms.end() && *a < hi; ++a) {
        marks.push_back(*a);
      }
      marks.push_back(hi);
      std::size_t best = 0;
      for (std::size_t j = 1; j + 1 < marks.size(); ++j) {
        if (marks[j + 1] - marks[j] > marks[best + 1] - marks[best]) best = j;
      }
      e = 0.5 * (marks[best] + marks[best + 1]);
    }
    grid[i] = e;
  }
  return grid;
}

// ---------------------------------------------------------------------------

double BracketingReport::max_violation() const {
  return std::max({form_violation_neumann, form_violation_dirichlet, eig_violation_neumann,
                   eig_violation_dirichlet});
}

BracketingReport bracketing_check(const HierarchicalStructure& st, const WeightSequence& w, Rank kappa, Rank r,
                                  std::span<const double> omega, std::size_t psi_count, std::uint64_t seed,
                                  std::size_t dense_cap) {
  if (r < 0 || r > kappa) throw RangeError("decoupling rank must satisfy 0 <= r <= kappa");
  const auto model = st.truncated(kappa);
  const double tail_k = w.tail(kappa);
  const double tail_r = w.tail(r);

  const Eigen::MatrixXd hn = dense_truncated_operator(model, w, kappa, kappa, 0.0, omega, dense_cap);
  const Eigen::MatrixXd hd = dense_truncated_operator(model, w, kappa, kappa, tail_k, omega, dense_cap);
  const Eigen::MatrixXd bn = dense_truncated_operator(model, w, kappa, r, 0.0, omega, dense_cap);
  const Eigen::MatrixXd bd = dense_truncated_operator(model, w, kappa, r, tail_r, omega, dense_cap);

  BracketingReport rep;
  rep.kappa = kappa;
  rep.r = r;

  const auto dim = static_cast<std::size_t>(hn.rows());
  CounterRng rng(seed, 0, Stream::test_vectors);
  Eigen::VectorXd psi(static_cast<Eigen::Index>(dim));
  for (std::size_t k = 0; k < psi_count; ++k) {
    for (Eigen::Index i = 0; i < psi.size(); ++i) psi(i) = rng.normal();
    psi.normalize();
    const double dn = psi.dot((hn - bn) * psi);  // >= 0
    const double dd = psi.dot((bd - hd) * psi);  // >= 0
    rep.form_violation_neumann = std::max(rep.form_violation_neumann, -dn);
    rep.form_violation_dirichlet = std::max(rep.form_violation_dirichlet, -dd);
  }

  rep.neumann = eigenvalues_dense(hn, dense_cap);
  rep.dirichlet = eigenvalues_dense(hd, dense_cap);
  rep.blocks_neumann = eigenvalues_dense(bn, dense_cap);
  rep.blocks_dirichlet = eigenvalues_dense(bd, dense_cap);
  for (std::size_t j = 0; j < dim; ++j) {
    rep.eig_violation_neumann =
        std::max(rep.eig_violation_neumann, rep.blocks_neumann.values[j] - rep.neumann.values[j]);
    rep.eig_violation_dirichlet =
        std::max(rep.eig_violation_dirichlet, rep.dirichlet.values[j] - rep.blocks_dirichlet.values[j]);
    rep.dirichlet_neumann_gap_deviation =
        std::max(rep.dirichlet_neumann_gap_deviation,
                 std::abs(rep.dirichlet.values[j] - rep.neumann.values[j] - tail_k));
  }
  return rep;
}

// ---------------------------------------------------------------------------

std::string to_string(TailMethod m) {
  switch (m) {
    case TailMethod::mc_neumann_lower: return "MC-Neumann-lower";
    case TailMethod::mc_dirichlet_upper: return "MC-Dirichlet-upper";
    case TailMethod::analytic_lower: return "analytic-lower";
    case TailMethod::temple_upper: return "temple-upper";
  }
  return "unknown";
}

TailEstimate tail_lower_analytic(double E, const SingleSiteDistribution& dist, const WeightSequence& w,
                                 const HierarchicalStructure& st) {
  const Rank K = K_of_E(w, E);
  const double volume = st.volume_real(K);
  // P_0(]v_+ - E/2, v_+]) in the original frame.
  const double prob = dist.prob_interval(dist.v_plus() - E / 2.0, dist.v_plus());
  TailEstimate t;
  t.E = E;
  t.method = TailMethod::analytic_lower;
  t.kappa = K;
  t.log_value = prob > 0.0 ? -std::log(volume) + volume * std::log(prob) : -std::numeric_limits<double>::infinity();
  t.value = std::exp(t.log_value);
  t.ci_low = t.ci_high = t.value;
  return t;
}

Rank KappaRule::resolve(double E, const HierarchicalStructure& st, const WeightSequence& w) const {
  switch (kind) {
    case Kind::fixed: return kappa;
    case Kind::k_of_E: return k_of_E(dimension_of(st, w), E, alpha);
    case Kind::K_of_E: return K_of_E(w, E);
  }
  return kappa;
}

std::vector<TailMcPoint> tail_mc(std::span<const double> energies, const SingleSiteDistribution& dist,
                                 const WeightSequence& w, const HierarchicalStructure& st, const KappaRule& rule,
                                 std::size_t replicas, std::uint64_t master_seed, const ExecutionOptions& opts) {
  if (replicas == 0) throw ValidationError("tail_mc needs at least one replica");
  std::vector<TailMcPoint> out;
  for (double E : energies) {
    if (!(E > 0.0)) throw ValidationError("tail energies must be > 0");
    const Rank kappa = rule.resolve(E, st, w);
    const auto model = st.truncated(kappa);
    const auto volume = static_cast<std::size_t>(model.volume(kappa));
    if (volume > opts.dense_cap) throw ResourceError("|Q_kappa| exceeds the dense cap in tail_mc");
    const double level = 1.0 - E;
    const double lambda_k = w.lambda(kappa);

    std::vector<double> lower(replicas), upper(replicas), exceed(replicas), slack(replicas);
    parallel_for(replicas, opts.threads, [&](std::size_t i) {
      auto omega = shifted_potential(dist, volume, master_seed, i);
      const double avg = mean_of(omega);
      const FiniteVolumeHamiltonian hn(model, w, kappa, Boundary::neumann, omega);
      const FiniteVolumeHamiltonian hd(model, w, kappa, Boundary::dirichlet, std::move(omega));
      const auto en = eigenvalues_dense(hn, opts.dense_cap);
      const auto ed = eigenvalues_dense(hd, opts.dense_cap);
      lower[i] = 1.0 - counting_function(en, level);
      upper[i] = 1.0 - counting_function(ed, level);
      exceed[i] = en.max() > level ? 1.0 : 0.0;
      slack[i] = en.max() - (lambda_k + avg);
    });

    TailMcPoint p;
    p.E = E;
    p.kappa = kappa;
    p.neumann_lower = mc_estimate(E, lower, TailMethod::mc_neumann_lower, kappa);
    p.dirichlet_upper = mc_estimate(E, upper, TailMethod::mc_dirichlet_upper, kappa);
    const auto fe = mean_and_error(exceed);
    p.emax_frequency = fe.mean;
    p.emax_frequency_stderr = fe.stderr_;
    p.min_trial_slack = *std::min_element(slack.begin(), slack.end());
    p.trial_bound_violations = static_cast<std::size_t>(
        std::count_if(slack.begin(), slack.end(), [](double s) { return s < -kTempleChainTolerance; }));
    out.push_back(std::move(p));
  }
  return out;
}

double default_alpha(const WeightSequence& w) {
  if (w.kind() != WeightSequence::Kind::geometric) {
    throw ValidationError("default alpha is defined for geometric weights only");
  }
  return 6.0 / (*w.rho() - 1.0) + 1.0;
}

TailUpperResult tail_upper_pipeline(double E, double alpha, const SingleSiteDistribution& dist,
                                    const WeightSequence& w, const HierarchicalStructure& st, std::size_t replicas,
                                    std::uint64_t master_seed, const ExecutionOptions& opts) {
  if (replicas == 0) throw ValidationError("tail_upper_pipeline needs at least one replica");
  const auto dim = dimension_of(st, w);
  const Rank kappa = k_of_E(dim, E, alpha);
  const auto model = st.truncated(kappa);
  const auto volume = static_cast<std::size_t>(model.volume(kappa));

  TailUpperResult res;
  res.kappa = kappa;
  res.p_kappa = w.p(kappa);
  res.truncation_floor = -res.p_kappa / 3.0;
  res.e1 = 1.0 - res.p_kappa;
  res.replicas = replicas;
  res.per_replica.resize(replicas);

  const std::vector<double> psi0(volume, 1.0 / std::sqrt(static_cast<double>(volume)));

  parallel_for(replicas, opts.threads, [&](std::size_t i) {
    TempleReplica& rep = res.per_replica[i];
    auto omega = shifted_potential(dist, volume, master_seed, i);
    std::vector<double> truncated(volume);
    for (std::size_t x = 0; x < volume; ++x) truncated[x] = std::max(omega[x], res.truncation_floor);
    rep.mean_truncated_potential = mean_of(truncated);
    rep.averaged_bound = 1.0 + 0.5 * rep.mean_truncated_potential;
    rep.large_deviation_event = rep.mean_truncated_potential > -2.0 * E;

    const FiniteVolumeHamiltonian h(model, w, kappa, Boundary::dirichlet, std::move(omega));
    const FiniteVolumeHamiltonian h_trunc(model, w, kappa, Boundary::dirichlet, std::move(truncated));

    const auto moments = temple_input(as_matvec(h_trunc), psi0, res.e1);
    rep.trial_energy = moments.mean;
    rep.precondition_passed = moments.mean > res.e1;

    const auto top = top_eigenvalue(h, opts, master_seed ^ (0x9E3779B97F4A7C15ull * (i + 1)));
    const auto top_trunc = top_eigenvalue(h_trunc, opts, master_seed ^ (0xC2B2AE3D27D4EB4Full * (i + 1)));
    rep.emax = top.value;
    rep.emax_truncated = top_trunc.value;
    rep.iterative = top.iterative || top_trunc.iterative;
    rep.exceeds_edge = rep.emax > 1.0 - E;

    if (rep.precondition_passed) {
      rep.temple_bound = temple_bound(moments);
      const double slack = kTempleChainTolerance + top.error + top_trunc.error;
      rep.chain_violation = std::max({0.0, rep.emax - rep.emax_truncated - slack,
                                      rep.emax_truncated - rep.temple_bound - slack,
                                      rep.temple_bound - rep.averaged_bound - kTempleChainTolerance,
                                      rep.emax - rep.averaged_bound - slack});
    }
  });

  std::vector<double> exceed(replicas), event(replicas);
  for (std::size_t i = 0; i < replicas; ++i) {
    const auto& rep = res.per_replica[i];
    exceed[i] = rep.exceeds_edge ? 1.0 : 0.0;
    event[i] = rep.large_deviation_event ? 1.0 : 0.0;
    if (rep.precondition_passed) ++res.precondition_passes;
    if (rep.chain_violation > 0.0) ++res.chain_violations;
    res.max_chain_violation = std::max(res.max_chain_violation, rep.chain_violation);
  }
  res.estimate = mc_estimate(E, exceed, TailMethod::temple_upper, kappa);
  res.event_frequency = mean_of(event);

  // Large-deviation diagnostics; reported, never asserted against Monte Carlo.
  auto& b = res.bernoulli;
  std::optional<double> c1;
  if (w.kind() == WeightSequence::Kind::geometric) {
    c1 = *w.rho() - 1.0;
  } else if (w.rho()) {
    c1 = w.decay_constants(*w.rho(), static_cast<Rank>(w.listed().size()) + 8).c1;
  }
  const double width = dist.v_plus() - dist.v_minus();
  if (c1 && width > 0.0) {
    b.available = true;
    b.c1 = *c1;
    b.z = 1.0 - 6.0 / (alpha * b.c1);
    b.gamma = std::max(res.truncation_floor, -0.5 * width);
    b.q = dist.prob_interval(dist.v_plus() + b.gamma, dist.v_plus());
    b.z_positive = b.z > 0.0;
    b.q_below_z = b.q < b.z;
    b.f_t0 = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 1000; ++k) {
      const double t = 0.01 * k;
      const double f = t * b.z - std::log(1.0 - b.q + b.q * std::exp(t));
      if (f > b.f_t0) {
        b.f_t0 = f;
        b.t0 = t;
      }
    }
    b.f_positive = b.f_t0 > 0.0;
    b.log_probability_bound = -static_cast<double>(volume) * b.f_t0;
  }
  return res;
}

// ---------------------------------------------------------------------------

std::string to_string(FitTransform t) { return t == FitTransform::van_hove ? "van_hove" : "lifshits"; }

ExponentFit exponent_fit_log(std::span<const std::pair<double, double>> log_points, FitTransform transform) {
  if (log_points.size() < 4) throw ValidationError("exponent fit needs at least 4 points");
  std::vector<double> xs, ys;
  ExponentFit fit;
  fit.transform = transform;
  fit.points = log_points.size();
  fit.e_min = std::numeric_limits<double>::infinity();
  fit.e_max = -std::numeric_limits<double>::infinity();
  for (const auto& [E, log_value] : log_points) {
    if (!(E > 0.0)) throw DomainError("exponent fit needs E > 0");
    if (!(log_value < 0.0) || !std::isfinite(log_value)) {
      throw DomainError("exponent fit needs values strictly inside (0, 1)");
    }
    xs.push_back(std::log(E));
    ys.push_back(transform == FitTransform::van_hove ? log_value : std::log(-log_value));
    fit.e_min = std::min(fit.e_min, E);
    fit.e_max = std::max(fit.e_max, E);
  }
  const auto n = static_cast<double>(xs.size());
  const double mx = pairwise_sum(xs) / n;
  const double my = pairwise_sum(ys) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0.0) throw DomainError("exponent fit needs at least two distinct energies");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double d = ys[i] - (fit.intercept + fit.slope * xs[i]);
    ss += d * d;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

ExponentFit exponent_fit(std::span<const std::pair<double, double>> points, FitTransform transform) {
  std::vector<std::pair<double, double>> logs;
  logs.reserve(points.size());
  for (const auto& [E, value] : points) {
    if (!(value > 0.0 && value < 1.0)) throw DomainError("exponent fit needs values strictly inside (0, 1)");
    logs.emplace_back(E, std::log(value));
  }
  return exponent_fit_log(logs, transform);
}

double pointwise_exponent(double E, double value) {
  if (!(E > 0.0 && E != 1.0) || !(value > 0.0)) throw DomainError("pointwise exponent undefined");
  return std::log(value) / std::log(E);
}

// ---------------------------------------------------------------------------

double covariance_check(const HierarchicalStructure& st, const WeightSequence& w, Rank kappa, Rank R,
                        std::span<const double> omega, const Point& x) {
  if (kappa < 0 || kappa > R) throw RangeError("covariance check needs 0 <= kappa <= R");
  const auto model = st.truncated(R);
  if (omega.size() != model.volume(R)) throw DimensionError("omega must live on Q_R");
  const Index shift = point_to_index(model, x);

  const Eigen::MatrixXd k = dense_truncated_operator(model, w, R, kappa, 0.0, omega, model.volume(R));
  const auto shifted = shift_window(model, omega, shift, R);
  const Eigen::MatrixXd k_shifted = dense_truncated_operator(model, w, R, kappa, 0.0, shifted, model.volume(R));

  const auto dim = static_cast<Index>(model.volume(R));
  std::vector<Index> image(dim);
  for (Index y = 0; y < dim; ++y) image[y] = group_add_index(model, shift, y);
  double dev = 0.0;
  for (Index a = 0; a < dim; ++a) {
    for (Index b = 0; b < dim; ++b) {
      const double lhs = k_shifted(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      const double rhs = k(static_cast<Eigen::Index>(image[a]), static_cast<Eigen::Index>(image[b]));
      dev = std::max(dev, std::abs(lhs - rhs));
    }
  }
  return dev;
}

BirkhoffReport birkhoff_origin_mean(const HierarchicalStructure& st, const SingleSiteDistribution& dist, Rank r,
                                    std::uint64_t master_seed) {
  const auto model = st.truncated(r);
  const auto volume = static_cast<std::size_t>(model.volume(r));
  const auto omega = sample_potential(dist, volume, master_seed, 0).omega;
  BirkhoffReport rep;
  rep.average = birkhoff_average(model, omega, 0, [](std::span<const double> window) { return window[0]; });
  rep.expected = dist.mean();
  rep.sigma = std::sqrt(dist.variance() / static_cast<double>(volume));
  rep.z_score = rep.sigma > 0.0 ? (rep.average - rep.expected) / rep.sigma : 0.0;
  return rep;
}

double spectral_range_excess(const EigenvalueList& eigs, const SingleSiteDistribution& dist) {
  if (eigs.values.empty()) return 0.0;
  return std::max({0.0, dist.v_minus() - eigs.min(), eigs.max() - (1.0 + dist.v_plus())});
}

}  // namespace handerson
