#include "handerson/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>

#include "handerson/errors.hpp"
#include "handerson/numerics.hpp"

namespace handerson {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kBracketTol = 1e-10;
constexpr double kGapTol = 1e-12;
constexpr double kOrderSigmas = 3.0;

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string short_fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string tag(Boundary b) { return b == Boundary::neumann ? "N" : "D"; }

double combined(double a, double b) {
  const double s = std::sqrt(a * a + b * b);
  return std::isfinite(s) ? s : 0.0;
}

class Context {
public:
  Context(const std::string& subcommand, const ExperimentConfig& c)
      : cfg(c),
        st(c.structure()),
        w(c.weights()),
        opts(c.execution()),
        name(c.experiment.empty() ? subcommand : c.experiment),
        hash(c.param_hash()) {
    opts.threads = resolve_threads(c.threads);
  }

  const ExperimentConfig& cfg;
  HierarchicalStructure st;
  WeightSequence w;
  ExecutionOptions opts;
  std::string name;
  std::string hash;
  RunResult out;

  ResultRecord& row(double E, double value, double err, const std::string& method, Rank kappa,
                    std::size_t replicas) {
    ResultRecord r;
    r.experiment = name;
    r.param_hash = hash;
    r.E = E;
    r.value = value;
    r.stderr_ = err;
    r.method = method;
    r.kappa = kappa;
    r.replicas = replicas;
    out.rows.push_back(std::move(r));
    return out.rows.back();
  }

  // Records "measured <= threshold".
  void check(const std::string& name, double measured, double threshold, std::string detail = {}) {
    out.invariants.push_back({name, measured <= threshold, measured, threshold, std::move(detail)});
    out.rows.push_back({this->name, hash, kNaN, measured, kNaN, "invariant:" + name, 0, 0, std::nullopt});
  }

  void require_dense(Rank kappa) const {
    if (st.volume_real(kappa) > static_cast<double>(opts.dense_cap)) {
      throw ResourceError("|Q_" + std::to_string(kappa) + "| exceeds dense_cap " + std::to_string(opts.dense_cap));
    }
  }

  std::vector<double> positive_grid() const {
    auto grid = cfg.energy_grid();
    for (double E : grid) {
      if (!(E > 0.0)) throw ValidationError("this experiment needs energies E > 0 (distance below the upper edge)");
    }
    return grid;
  }

  void warn(std::string msg) {
    if (std::find(out.warnings.begin(), out.warnings.end(), msg) == out.warnings.end()) {
      out.warnings.push_back(std::move(msg));
    }
  }
};

// ---------------------------------------------------------------------------
// Shared pieces

std::vector<SpectralAtom> cluster_atoms(const std::vector<double>& sorted, double tol) {
  std::vector<SpectralAtom> atoms;
  for (double v : sorted) {
    if (!atoms.empty() && std::abs(v - atoms.back().eigenvalue) <= tol) {
      ++atoms.back().multiplicity;
    } else {
      atoms.push_back({v, 1});
    }
  }
  return atoms;
}

// max |exact - dense| over the expanded spectra, +inf when multiplicities disagree.
double free_spectrum_mismatch(const HierarchicalStructure& st, const WeightSequence& w, Rank kappa, Boundary b,
                              std::size_t cap) {
  const auto exact = exact_free_spectrum(st, w, kappa, b);
  const auto dense = eigenvalues_dense(FiniteVolumeHamiltonian(st, w, kappa, b), cap);
  const auto expanded = exact.expanded();
  if (expanded.size() != dense.dim()) return std::numeric_limits<double>::infinity();
  double dev = 0.0;
  for (std::size_t j = 0; j < expanded.size(); ++j) dev = std::max(dev, std::abs(expanded[j] - dense.values[j]));
  const auto atoms = cluster_atoms(dense.values, 1e-8);
  if (atoms.size() != exact.atoms.size()) return std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < atoms.size(); ++a) {
    if (atoms[a].multiplicity != exact.atoms[a].multiplicity) return std::numeric_limits<double>::infinity();
  }
  return dev;
}

// Point-mass reduction: below lambda_kappa the finite-volume IDS coincides with N_0.
double point_mass_mismatch(const Context& ctx, const IdsEstimate& est, double c) {
  const double shift = est.boundary == Boundary::dirichlet ? ctx.w.tail(est.kappa) : 0.0;
  double dev = 0.0;
  for (std::size_t g = 0; g < est.energies.size(); ++g) {
    const double x = est.energies[g] - c - shift;
    if (x >= ctx.w.lambda(est.kappa) - kSpectralTieSlack) continue;
    dev = std::max(dev, std::abs(est.mean[g] - ids_free(ctx.st, ctx.w, x)));
  }
  return dev;
}

double monotonicity_excess(const IdsEstimate& est) {
  double worst = 0.0;
  for (std::size_t g = 0; g + 1 < est.energies.size(); ++g) {
    const double drop = est.mean[g] - est.mean[g + 1];
    worst = std::max(worst, drop - 2.0 * combined(est.stderr_[g], est.stderr_[g + 1]));
  }
  return worst;
}

double range_excess(const IdsEstimate& est) {
  double worst = 0.0;
  for (double m : est.mean) worst = std::max({worst, -m, m - 1.0});
  return worst;
}

// Largest value of (lower - upper) / combined sigma; zero sigma counts only strict excess.
double ordering_excess(const IdsEstimate& lower, const IdsEstimate& upper) {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < lower.mean.size(); ++g) {
    const double gap = lower.mean[g] - upper.mean[g];
    const double sigma = combined(lower.stderr_[g], upper.stderr_[g]);
    double z;
    if (sigma > 0.0) {
      z = gap / sigma;
    } else {
      z = gap > 1e-12 ? std::numeric_limits<double>::infinity() : 0.0;
    }
    worst = std::max(worst, z);
  }
  return worst;
}

void ids_rows(Context& ctx, const IdsEstimate& est, const std::string& prefix) {
  for (std::size_t g = 0; g < est.energies.size(); ++g) {
    ctx.row(est.energies[g], est.mean[g], est.stderr_[g], prefix + tag(est.boundary), est.kappa, est.replicas);
  }
  for (const auto& msg : est.warnings) ctx.warn(msg);
}

struct BracketingAggregate {
  double eig_n = 0.0, eig_d = 0.0, form_n = 0.0, form_d = 0.0, gap = 0.0;
};

BracketingAggregate bracketing_sweep(const Context& ctx, Rank kappa, Rank r, std::size_t samples,
                                     std::size_t psi_count, std::uint64_t seed) {
  const auto volume = static_cast<std::size_t>(ctx.st.volume(kappa));
  std::vector<BracketingReport> reps(samples);
  parallel_for(samples, ctx.opts.threads, [&](std::size_t i) {
    const auto omega = sample_potential(ctx.cfg.distribution, volume, seed, i).omega;
    reps[i] = bracketing_check(ctx.st, ctx.w, kappa, r, omega, psi_count, derive_seed(seed, i), ctx.opts.dense_cap);
  });
  BracketingAggregate agg;
  for (const auto& rep : reps) {
    agg.eig_n = std::max(agg.eig_n, rep.eig_violation_neumann);
    agg.eig_d = std::max(agg.eig_d, rep.eig_violation_dirichlet);
    agg.form_n = std::max(agg.form_n, rep.form_violation_neumann);
    agg.form_d = std::max(agg.form_d, rep.form_violation_dirichlet);
    agg.gap = std::max(agg.gap, rep.dirichlet_neumann_gap_deviation);
  }
  return agg;
}

void check_bracketing(Context& ctx, Rank kappa, Rank r, const BracketingAggregate& agg, std::size_t samples) {
  const std::string s = "kappa=" + std::to_string(kappa) + ";r=" + std::to_string(r);
  const double E = r;
  ctx.row(E, agg.eig_n, kNaN, "eig-violation-N", kappa, samples);
  ctx.row(E, agg.eig_d, kNaN, "eig-violation-D", kappa, samples);
  ctx.row(E, agg.form_n, kNaN, "form-violation-N", kappa, samples);
  ctx.row(E, agg.form_d, kNaN, "form-violation-D", kappa, samples);
  ctx.row(E, agg.gap, kNaN, "gap-deviation", kappa, samples);
  ctx.check("eigenvalue-dominance[" + s + "]", std::max(agg.eig_n, agg.eig_d), kBracketTol);
  ctx.check("form-dominance[" + s + "]", std::max(agg.form_n, agg.form_d), kBracketTol);
  ctx.check("dirichlet-neumann-gap[" + s + "]", agg.gap, kGapTol);
}

// Expectation sandwich between ranks r < kappa.
void check_sandwich(Context& ctx, Rank r, Rank kappa, std::span<const double> grid, std::size_t replicas) {
  auto ids = [&](Boundary b, Rank k) {
    return mc_ids(b, k, ctx.cfg.distribution, ctx.w, ctx.st, grid, replicas, ctx.cfg.seed, ctx.opts);
  };
  const auto nr = ids(Boundary::neumann, r), dr = ids(Boundary::dirichlet, r);
  const auto nk = ids(Boundary::neumann, kappa), dk = ids(Boundary::dirichlet, kappa);
  for (const auto* e : {&nr, &dr, &nk, &dk}) ids_rows(ctx, *e, "MC-");
  const std::string s = "r=" + std::to_string(r) + ";kappa=" + std::to_string(kappa);
  ctx.check("sandwich D_kappa<=N_r[" + s + "] (sigmas)", ordering_excess(dk, nr), kOrderSigmas);
  ctx.check("sandwich D_r<=N_kappa[" + s + "] (sigmas)", ordering_excess(dr, nk), kOrderSigmas);
  ctx.check("sandwich D_r<=N_r[" + s + "] (sigmas)", ordering_excess(dr, nr), kOrderSigmas);
  ctx.check("sandwich D_kappa<=N_kappa[" + s + "] (sigmas)", ordering_excess(dk, nk), kOrderSigmas);
}

void tail_rows(Context& ctx, const TailEstimate& t, const std::string& method) {
  auto& r = ctx.row(t.E, t.value, t.stderr_, method, t.kappa, t.replicas);
  r.log_value = t.log_value;
}

void run_tail_mc(Context& ctx, std::span<const double> grid, const KappaRule& rule, json& extra) {
  const auto points = tail_mc(grid, ctx.cfg.distribution, ctx.w, ctx.st, rule, ctx.cfg.replicas, ctx.cfg.seed, ctx.opts);
  double order = -std::numeric_limits<double>::infinity();
  double analytic_order = -std::numeric_limits<double>::infinity();
  std::size_t trial_violations = 0;
  double min_trial_slack = std::numeric_limits<double>::infinity();
  for (const auto& p : points) {
    tail_rows(ctx, p.neumann_lower, to_string(TailMethod::mc_neumann_lower));
    tail_rows(ctx, p.dirichlet_upper, to_string(TailMethod::mc_dirichlet_upper));
    ctx.row(p.E, p.emax_frequency, p.emax_frequency_stderr, "emax-frequency-N", p.kappa, ctx.cfg.replicas);
    const auto analytic = tail_lower_analytic(p.E, ctx.cfg.distribution, ctx.w, ctx.st);
    tail_rows(ctx, analytic, to_string(TailMethod::analytic_lower));

    const double sigma = combined(p.neumann_lower.stderr_, p.dirichlet_upper.stderr_);
    const double gap = p.neumann_lower.value - p.dirichlet_upper.value;
    order = std::max(order, sigma > 0.0 ? gap / sigma : (gap > 1e-12 ? INFINITY : 0.0));
    // Comparable only when both bounds refer to the same rank and are not negligibly small.
    if (analytic.kappa == p.kappa && analytic.value > 1e-6 && p.neumann_lower.value > 1e-6) {
      const double s = p.neumann_lower.stderr_;
      const double g = analytic.value - p.neumann_lower.value;
      analytic_order = std::max(analytic_order, s > 0.0 ? g / s : (g > 1e-12 ? INFINITY : 0.0));
    }
    trial_violations += p.trial_bound_violations;
    min_trial_slack = std::min(min_trial_slack, p.min_trial_slack);
    extra["tail_mc"].push_back({{"E", p.E},
                                {"kappa", p.kappa},
                                {"trial_bound_violations", p.trial_bound_violations},
                                {"min_trial_slack", p.min_trial_slack},
                                {"emax_frequency", p.emax_frequency}});
  }
  ctx.check("tail order neumann-lower<=dirichlet-upper (sigmas)", order, kOrderSigmas);
  if (std::isfinite(analytic_order)) {
    ctx.check("tail order analytic-lower<=neumann-lower (sigmas)", analytic_order, kOrderSigmas);
  }
  ctx.check("trial-function lower bound violations", static_cast<double>(trial_violations), 0.0,
            "min slack " + short_fmt(min_trial_slack));
}

void run_temple(Context& ctx, double E, double alpha, json& extra) {
  TailUpperResult res;
  try {
    res = tail_upper_pipeline(E, alpha, ctx.cfg.distribution, ctx.w, ctx.st, ctx.cfg.replicas, ctx.cfg.seed, ctx.opts);
  } catch (const DomainError& e) {
    ctx.warn("temple pipeline skipped at E=" + short_fmt(E) + ", alpha=" + short_fmt(alpha) + ": " + e.what());
    ctx.out.partial = true;
    return;
  }
  tail_rows(ctx, res.estimate, to_string(TailMethod::temple_upper));
  ctx.row(E, res.pass_rate(), kNaN, "temple-precondition-pass-rate", res.kappa, res.replicas);
  ctx.row(E, res.event_frequency, kNaN, "large-deviation-event-frequency", res.kappa, res.replicas);
  const auto& b = res.bernoulli;
  if (b.available) {
    auto& r = ctx.row(E, std::exp(b.log_probability_bound), kNaN, "bernoulli-rate-bound", res.kappa, res.replicas);
    r.log_value = b.log_probability_bound;
  }
  ctx.check("temple chain violations[E=" + short_fmt(E) + "]", static_cast<double>(res.chain_violations), 0.0,
            "max violation " + short_fmt(res.max_chain_violation) + ", pass rate " + short_fmt(res.pass_rate()));
  extra["temple"].push_back({{"E", E},
                             {"alpha", alpha},
                             {"kappa", res.kappa},
                             {"p_kappa", res.p_kappa},
                             {"truncation_floor", res.truncation_floor},
                             {"e1", res.e1},
                             {"precondition_passes", res.precondition_passes},
                             {"pass_rate", res.pass_rate()},
                             {"chain_violations", res.chain_violations},
                             {"max_chain_violation", res.max_chain_violation},
                             {"bernoulli",
                              {{"available", b.available},
                               {"c1", b.c1},
                               {"gamma", b.gamma},
                               {"q", b.q},
                               {"z", b.z},
                               {"t0", b.t0},
                               {"f_t0", b.f_t0},
                               {"z_positive", b.z_positive},
                               {"q_below_z", b.q_below_z},
                               {"f_positive", b.f_positive},
                               {"log_probability_bound", b.log_probability_bound}}}});
}

double van_hove_target(const Context& ctx) {
  if (!ctx.st.is_homogeneous() || !ctx.w.rho()) return kNaN;
  return spectral_dimension(ctx.st.degree(), *ctx.w.rho()).d_s / 2.0;
}

ExponentFit run_van_hove(Context& ctx, std::span<const double> grid) {
  std::vector<std::pair<double, double>> pts;
  for (double E : grid) {
    const double v = 1.0 - ids_free(ctx.st, ctx.w, 1.0 - E);
    pts.emplace_back(E, v);
    ctx.row(E, v, 0.0, "van-hove-point", 0, 0);
    if (E != 1.0 && v > 0.0) ctx.row(E, pointwise_exponent(E, v), 0.0, "van-hove-pointwise", 0, 0);
  }
  const auto fit = exponent_fit(pts, FitTransform::van_hove);
  ctx.row(fit.e_min, fit.slope, fit.residual, "van-hove-slope", 0, fit.points);
  return fit;
}

json fit_json(const ExponentFit& f, double target) {
  return {{"transform", to_string(f.transform)}, {"slope", f.slope},   {"intercept", f.intercept},
          {"residual", f.residual},              {"e_min", f.e_min},   {"e_max", f.e_max},
          {"points", f.points},                  {"target", target}};
}

Rank largest_rank_within(const HierarchicalStructure& st, double cap, Rank limit) {
  Rank r = 0;
  while (r < limit && st.volume_real(r + 1) <= cap) ++r;
  return r;
}

// ---------------------------------------------------------------------------
// Subcommands

void cmd_spectrum(Context& ctx) {
  const Rank kappa = ctx.cfg.kappa;
  ctx.require_dense(kappa);
  for (Boundary b : ctx.cfg.boundaries()) {
    const auto exact = exact_free_spectrum(ctx.st, ctx.w, kappa, b);
    for (const auto& a : exact.atoms) {
      ctx.row(a.eigenvalue, static_cast<double>(a.multiplicity), 0.0, "exact-free-" + tag(b), kappa, 0);
    }
    const auto dense = eigenvalues_dense(FiniteVolumeHamiltonian(ctx.st, ctx.w, kappa, b), ctx.opts.dense_cap);
    for (const auto& a : cluster_atoms(dense.values, 1e-8)) {
      ctx.row(a.eigenvalue, static_cast<double>(a.multiplicity), 0.0, "dense-free-" + tag(b), kappa, 0);
    }
    ctx.check("exact-vs-dense free spectrum " + tag(b),
              free_spectrum_mismatch(ctx.st, ctx.w, kappa, b, ctx.opts.dense_cap), 1e-10);
  }

  const std::size_t samples = std::min<std::size_t>(ctx.cfg.replicas, 10);
  const auto volume = static_cast<std::size_t>(ctx.st.volume(kappa));
  double range = 0.0, gap = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    const auto omega = sample_potential(ctx.cfg.distribution, volume, ctx.cfg.seed, i).omega;
    const auto en = eigenvalues_dense(FiniteVolumeHamiltonian(ctx.st, ctx.w, kappa, Boundary::neumann, omega),
                                      ctx.opts.dense_cap);
    const auto ed = eigenvalues_dense(FiniteVolumeHamiltonian(ctx.st, ctx.w, kappa, Boundary::dirichlet, omega),
                                      ctx.opts.dense_cap);
    for (Boundary b : ctx.cfg.boundaries()) {
      const auto& e = b == Boundary::neumann ? en : ed;
      for (std::size_t j = 0; j < e.dim(); ++j) {
        ctx.row(e.values[j], static_cast<double>(j + 1) / e.dim(), kNaN, "sample-" + tag(b), kappa, i);
      }
    }
    range = std::max({range, spectral_range_excess(en, ctx.cfg.distribution),
                      spectral_range_excess(ed, ctx.cfg.distribution)});
    for (std::size_t j = 0; j < en.dim(); ++j) {
      gap = std::max(gap, std::abs(ed.values[j] - en.values[j] - ctx.w.tail(kappa)));
    }
  }
  if (samples > 0) {
    ctx.check("sample spectra inside [v_-, 1 + v_+]", range, 1e-10);
    ctx.check("sample dirichlet-neumann gap", gap, kGapTol);
  }
}

void cmd_ids(Context& ctx) {
  const Rank kappa = ctx.cfg.kappa;
  ctx.require_dense(kappa);
  const auto grid = ctx.cfg.energy_grid();
  const auto& dist = ctx.cfg.distribution;
  for (double E : grid) ctx.row(E, ids_free(ctx.st, ctx.w, E), 0.0, "free-closed-form", 0, 0);

  std::map<Boundary, IdsEstimate> est;
  for (Boundary b : ctx.cfg.boundaries()) {
    est[b] = mc_ids(b, kappa, dist, ctx.w, ctx.st, grid, ctx.cfg.replicas, ctx.cfg.seed, ctx.opts);
    ids_rows(ctx, est[b], "MC-");
    ctx.check("ids in [0,1] " + tag(b), range_excess(est[b]), 0.0);
    ctx.check("ids nondecreasing within 2 stderr " + tag(b), monotonicity_excess(est[b]), 0.0);
    if (dist.is_degenerate()) {
      ctx.check("point-mass reduction to N_0 " + tag(b), point_mass_mismatch(ctx, est[b], dist.v_plus()), 0.0);
    }
  }
  if (est.size() == 2) {
    ctx.check("dirichlet<=neumann (sigmas)", ordering_excess(est[Boundary::dirichlet], est[Boundary::neumann]),
              kOrderSigmas);
  }
}

void cmd_bracketing(Context& ctx) {
  const Rank kappa = ctx.cfg.kappa;
  ctx.require_dense(kappa);
  const auto grid = ctx.cfg.energy_grid();
  for (Rank r : ctx.cfg.ranks) {
    const auto agg = bracketing_sweep(ctx, kappa, r, ctx.cfg.replicas, ctx.cfg.psi_count, ctx.cfg.seed);
    check_bracketing(ctx, kappa, r, agg, ctx.cfg.replicas);
  }
  for (Rank r : ctx.cfg.ranks) {
    if (r < kappa) check_sandwich(ctx, r, kappa, grid, ctx.cfg.replicas);
  }
}

void cmd_tail(Context& ctx) {
  const auto grid = ctx.positive_grid();
  if (ctx.cfg.distribution.is_degenerate()) {
    ctx.warn("degenerate single-site distribution: the Lifshits tail theorem does not apply");
  }
  run_tail_mc(ctx, grid, ctx.cfg.kappa_rule(), ctx.out.extra);
  for (double E : grid) run_temple(ctx, E, ctx.cfg.alpha(), ctx.out.extra);
}

void cmd_exponent(Context& ctx) {
  const auto grid = ctx.positive_grid();
  const double target = van_hove_target(ctx);
  const auto vh = run_van_hove(ctx, grid);
  ctx.out.extra["van_hove"] = fit_json(vh, target);
  if (std::isfinite(target)) {
    ctx.check("van hove slope relative deviation", std::abs(vh.slope - target) / target, 0.15,
              "slope " + short_fmt(vh.slope) + ", target " + short_fmt(target));
  }

  // Lifshits transform of the rigorous lower bound; reported, not asserted.
  std::vector<std::pair<double, double>> logs;
  for (double E : grid) {
    const auto t = tail_lower_analytic(E, ctx.cfg.distribution, ctx.w, ctx.st);
    tail_rows(ctx, t, to_string(TailMethod::analytic_lower));
    if (std::isfinite(t.log_value) && t.log_value < 0.0) logs.emplace_back(E, t.log_value);
  }
  if (logs.size() >= 4) {
    const auto lf = exponent_fit_log(logs, FitTransform::lifshits);
    ctx.row(lf.e_min, lf.slope, lf.residual, "lifshits-slope-analytic-lower", 0, lf.points);
    ctx.out.extra["lifshits_analytic_lower"] = fit_json(lf, -target);
  } else {
    ctx.warn("fewer than 4 usable analytic-lower values; lifshits fit skipped");
  }
}

void cmd_ergodic(Context& ctx) {
  const Rank R = ctx.cfg.big_rank;
  const Rank k = ctx.cfg.truncation_rank;
  ctx.require_dense(R);
  const auto volume = static_cast<std::size_t>(ctx.st.volume(R));
  const std::size_t shifts = std::min<std::size_t>(volume, 64);
  const auto model = ctx.st.truncated(R);
  std::vector<double> dev(ctx.cfg.covariance_samples, 0.0);
  parallel_for(dev.size(), ctx.opts.threads, [&](std::size_t i) {
    const auto omega = sample_potential(ctx.cfg.distribution, volume, ctx.cfg.seed, i).omega;
    for (std::size_t s = 0; s < shifts; ++s) {
      const Index x = static_cast<Index>(s * volume / shifts);
      dev[i] = std::max(dev[i], covariance_check(model, ctx.w, k, R, omega, index_to_point(model, x)));
    }
  });
  for (std::size_t i = 0; i < dev.size(); ++i) ctx.row(static_cast<double>(i), dev[i], kNaN, "covariance-deviation", k, shifts);
  if (!dev.empty()) ctx.check("covariance max deviation", *std::max_element(dev.begin(), dev.end()), 1e-14);

  const Rank br = ctx.cfg.birkhoff_rank;
  if (ctx.st.volume_real(br) > 1 << 26) throw ResourceError("birkhoff volume exceeds 2^26 sites");
  const std::size_t seeds = ctx.cfg.birkhoff_seeds;
  std::vector<BirkhoffReport> reps(seeds);
  parallel_for(seeds, ctx.opts.threads, [&](std::size_t s) {
    reps[s] = birkhoff_origin_mean(ctx.st, ctx.cfg.distribution, br, derive_seed(ctx.cfg.seed, s));
  });
  std::size_t passes = 0;
  for (std::size_t s = 0; s < seeds; ++s) {
    ctx.row(static_cast<double>(s), reps[s].average, reps[s].sigma, "birkhoff-origin-mean", br, 1);
    if (std::abs(reps[s].z_score) <= 4.0 && std::abs(reps[s].average - reps[s].expected) <= 4.0 * reps[s].sigma + 1e-12) {
      ++passes;
    }
  }
  if (seeds > 0) {
    const auto allowed = seeds - static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(seeds)));
    ctx.check("birkhoff seeds outside 4 sigma", static_cast<double>(seeds - passes), static_cast<double>(allowed),
              std::to_string(passes) + "/" + std::to_string(seeds) + " within 4 sigma of " +
                  short_fmt(reps[0].expected));
  }
}

void cmd_selfcheck(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto& dist = cfg.distribution;
  const Rank kappa = cfg.kappa;
  ctx.require_dense(kappa);

  // Free spectra, all ranks with small volume.
  const Rank exact_top = largest_rank_within(ctx.st, std::min<double>(ctx.opts.dense_cap, 512), 12);
  double worst = 0.0;
  for (Rank k = 0; k <= exact_top; ++k) {
    for (Boundary b : {Boundary::neumann, Boundary::dirichlet}) {
      worst = std::max(worst, free_spectrum_mismatch(ctx.st, ctx.w, k, b, ctx.opts.dense_cap));
    }
  }
  ctx.check("exact-vs-dense free spectra kappa<=" + std::to_string(exact_top), worst, 1e-10);

  // Free IDS identity at the eigenvalues lambda_r, r < kappa'.
  worst = 0.0;
  for (Rank k = 1; k <= exact_top; ++k) {
    const auto eigs = eigenvalues_dense(FiniteVolumeHamiltonian(ctx.st, ctx.w, k, Boundary::neumann), ctx.opts.dense_cap);
    for (Rank r = 0; r < k; ++r) {
      worst = std::max(worst, std::abs(counting_function(eigs, ctx.w.lambda(r)) - ids_free(ctx.st, ctx.w, ctx.w.lambda(r))));
    }
  }
  ctx.check("free counting function equals N_0 at lambda_r", worst, 1e-15);

  // Matrix-free application against the dense product.
  const Rank mv_top = largest_rank_within(ctx.st, 1024, 10);
  worst = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    const Rank k = static_cast<Rank>(i % (mv_top + 1));
    const auto volume = static_cast<std::size_t>(ctx.st.volume(k));
    auto omega = sample_potential(dist, volume, derive_seed(cfg.seed, 100 + i), 0).omega;
    CounterRng rng(cfg.seed, i, Stream::test_vectors);
    Eigen::VectorXd psi(static_cast<Eigen::Index>(volume));
    for (Eigen::Index j = 0; j < psi.size(); ++j) psi(j) = rng.normal();
    const FiniteVolumeHamiltonian h(ctx.st, ctx.w, k, i % 2 ? Boundary::dirichlet : Boundary::neumann, omega);
    const Eigen::VectorXd ref = dense_matrix(h, 1 << 12) * psi;
    const auto fast = hamiltonian_apply<double>(h, std::span<const double>(psi.data(), volume));
    double num = 0.0;
    for (std::size_t j = 0; j < volume; ++j) num = std::max(num, std::abs(fast[j] - ref(static_cast<Eigen::Index>(j))));
    worst = std::max(worst, num / std::max(1e-300, ref.cwiseAbs().maxCoeff()));
  }
  ctx.check("matrix-free apply relative error", worst, 1e-12);

  // Van Hove curve.
  if (std::isfinite(van_hove_target(ctx))) {
    std::vector<double> grid;
    for (int m = 14; m >= 4; --m) grid.push_back(std::ldexp(1.0, -m));
    const auto fit = run_van_hove(ctx, grid);
    const double target = van_hove_target(ctx);
    ctx.check("van hove slope relative deviation", std::abs(fit.slope - target) / target, 0.15);
  }

  // Deterministic bracketing and the expectation sandwich.
  const std::size_t bracket_samples = std::min<std::size_t>(cfg.replicas, 100);
  for (Rank r : cfg.ranks) {
    check_bracketing(ctx, kappa, r, bracketing_sweep(ctx, kappa, r, bracket_samples, cfg.psi_count, cfg.seed),
                     bracket_samples);
  }
  const auto grid = continuity_grid(ctx.w, dist, dist.v_minus(), 1.0 + dist.v_plus(), 20);
  for (Rank r : cfg.ranks) {
    if (r < kappa) check_sandwich(ctx, r, kappa, grid, cfg.replicas);
  }

  // Point-mass reduction.
  {
    const auto pm = SingleSiteDistribution::point_mass(0.0);
    for (Boundary b : {Boundary::neumann, Boundary::dirichlet}) {
      const auto est = mc_ids(b, kappa, pm, ctx.w, ctx.st, grid, 3, cfg.seed, ctx.opts);
      double sd = 0.0;
      for (double s : est.stderr_) sd = std::max(sd, s);
      ctx.check("point-mass reduction to N_0 " + tag(b), std::max(point_mass_mismatch(ctx, est, 0.0), sd), 0.0);
    }
  }

  // Tails at moderate E and the Temple chain.
  if (!dist.is_degenerate()) {
    const std::vector<double> moderate{0.5, 0.25};
    KappaRule rule;
    rule.kind = KappaRule::Kind::K_of_E;
    json extra;
    run_tail_mc(ctx, moderate, rule, extra);
    ctx.out.extra["tail_mc"] = extra["tail_mc"];
    if (ctx.st.is_homogeneous() && ctx.w.rho()) {
      const double alpha = cfg.alpha();
      // Largest E with k_of_E(E) = kappa under this alpha, pulled inside by a relative 1e-6.
      const double E = std::pow(*ctx.w.rho(), -kappa) / alpha * (1.0 - 1e-6);
      run_temple(ctx, E, alpha, ctx.out.extra);
    } else {
      ctx.warn("temple pipeline needs a homogeneous structure with a decay base rho; skipped");
    }
  }

  // Covariance under the group action.
  {
    const Rank R = std::min<Rank>(cfg.big_rank, largest_rank_within(ctx.st, 256, cfg.big_rank));
    const Rank k = std::min(cfg.truncation_rank, R);
    const auto model = ctx.st.truncated(R);
    const auto volume = static_cast<std::size_t>(model.volume(R));
    double dev = 0.0;
    for (std::size_t i = 0; i < cfg.covariance_samples; ++i) {
      const auto omega = sample_potential(dist, volume, derive_seed(cfg.seed, 200), i).omega;
      for (Index x = 0; x < volume; ++x) {
        dev = std::max(dev, covariance_check(model, ctx.w, k, R, omega, index_to_point(model, x)));
      }
    }
    ctx.check("covariance max deviation", dev, 1e-14);
  }

  // Thread-count independence of the Monte Carlo output.
  {
    auto single = ctx.opts;
    single.threads = 1;
    auto many = ctx.opts;
    many.threads = 4;
    const std::size_t reps = std::min<std::size_t>(cfg.replicas, 200);
    const auto a = mc_ids(Boundary::neumann, kappa, dist, ctx.w, ctx.st, grid, reps, cfg.seed, single);
    const auto b = mc_ids(Boundary::neumann, kappa, dist, ctx.w, ctx.st, grid, reps, cfg.seed, many);
    const bool same = a.mean == b.mean && a.stderr_ == b.stderr_;
    ctx.check("thread-count independence (mismatches)", same ? 0.0 : 1.0, 0.0);
  }
}

}  // namespace

bool RunResult::all_passed() const {
  return std::all_of(invariants.begin(), invariants.end(), [](const InvariantResult& r) { return r.passed; });
}

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"spectrum", "ids",     "bracketing", "tail",
                                              "exponent", "ergodic", "selfcheck"};
  return names;
}

RunResult execute(const std::string& subcommand, const ExperimentConfig& config) {
  config.validate();
  Context ctx(subcommand, config);
  if (subcommand == "spectrum") {
    cmd_spectrum(ctx);
  } else if (subcommand == "ids") {
    cmd_ids(ctx);
  } else if (subcommand == "bracketing") {
    cmd_bracketing(ctx);
  } else if (subcommand == "tail") {
    cmd_tail(ctx);
  } else if (subcommand == "exponent") {
    cmd_exponent(ctx);
  } else if (subcommand == "ergodic") {
    cmd_ergodic(ctx);
  } else if (subcommand == "selfcheck") {
    cmd_selfcheck(ctx);
  } else {
    throw ValidationError("unknown subcommand '" + subcommand + "'");
  }
  return std::move(ctx.out);
}

std::string render_csv(const std::vector<ResultRecord>& rows) {
  std::string out = "experiment,param_hash,E,value,stderr,method,kappa,replicas,sign_log10\n";
  for (const auto& r : rows) {
    std::string log_col;
    if (r.log_value) {
      const double l10 = *r.log_value / std::log(10.0);
      if (std::abs(l10) > 300.0 || (r.value == 0.0 && std::isfinite(l10))) log_col = "+1/" + fmt(l10);
    }
    out += r.experiment + ',' + r.param_hash + ',' + fmt(r.E) + ',' + fmt(r.value) + ',' + fmt(r.stderr_) + ',' +
           r.method + ',' + std::to_string(r.kappa) + ',' + std::to_string(r.replicas) + ',' + log_col + '\n';
  }
  return out;
}

json summary_json(const std::string& subcommand, const ExperimentConfig& config, const RunResult& result,
                  double wall_seconds) {
  json inv = json::array();
  for (const auto& i : result.invariants) {
    inv.push_back({{"name", i.name},
                   {"passed", i.passed},
                   {"measured", i.measured},
                   {"threshold", i.threshold},
                   {"detail", i.detail}});
  }
  const bool ok = result.all_passed();
  return {{"experiment", config.experiment.empty() ? subcommand : config.experiment},
          {"subcommand", subcommand},
          {"param_hash", config.param_hash()},
          {"seed", config.seed},
          {"threads", resolve_threads(config.threads)},
          {"wall_time_seconds", wall_seconds},
          {"config", to_json(config)},
          {"invariants", inv},
          {"all_invariants_passed", ok},
          {"warnings", result.warnings},
          {"partial", result.partial},
          {"status", !ok ? "invariant_failure" : result.partial ? "partial" : "ok"},
          {"details", result.extra}};
}

json plot_json(const RunResult& result) {
  json series = json::object();
  for (const auto& r : result.rows) {
    if (r.method.rfind("invariant:", 0) == 0) continue;
    const std::string key = r.method + "/kappa=" + std::to_string(r.kappa);
    auto& s = series[key];
    s["E"].push_back(r.E);
    s["value"].push_back(r.value);
    s["stderr"].push_back(std::isfinite(r.stderr_) ? json(r.stderr_) : json(nullptr));
    if (r.log_value) s["log_value"].push_back(std::isfinite(*r.log_value) ? json(*r.log_value) : json(nullptr));
  }
  return series;
}

namespace {

void write_atomically(const std::filesystem::path& path, const std::string& body) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ResourceError("cannot write " + tmp);
    f << body;
    if (!f.flush()) throw ResourceError("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

int run(const std::string& subcommand, const ExperimentConfig& config) {
  const std::string name = config.experiment.empty() ? subcommand : config.experiment;
  const std::filesystem::path dir(config.out_dir);
  const auto start = std::chrono::steady_clock::now();
  RunResult result;
  std::string error;
  try {
    result = execute(subcommand, config);
  } catch (const std::exception& e) {
    error = e.what();
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  try {
    std::filesystem::create_directories(dir);
    if (error.empty()) {
      write_atomically(dir / (name + ".csv"), render_csv(result.rows));
      if (config.emit_plot_data) write_atomically(dir / (name + ".plot.json"), plot_json(result).dump(2) + "\n");
    }
    auto summary = summary_json(subcommand, config, result, wall);
    if (!error.empty()) {
      summary["status"] = "error";
      summary["error"] = error;
      summary["partial"] = true;
    }
    write_atomically(dir / (name + ".summary.json"), summary.dump(2) + "\n");
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }

  if (!error.empty()) {
    std::cerr << "error: " << error << "\n";
    return kExitInvalid;
  }
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
  std::size_t failed = 0;
  for (const auto& i : result.invariants) {
    if (!i.passed) {
      ++failed;
      std::cerr << "FAIL " << i.name << ": measured " << i.measured << " > " << i.threshold
                << (i.detail.empty() ? "" : " (" + i.detail + ")") << "\n";
    }
  }
  std::cout << name << ": " << result.rows.size() << " rows, " << result.invariants.size() - failed << "/"
            << result.invariants.size() << " invariants passed" << (result.partial ? ", partial" : "") << " -> "
            << (dir / (name + ".csv")).string() << "\n";
  if (failed > 0) return kExitInvariantFailure;
  return result.partial ? kExitInvalid : kExitOk;
}

}  // namespace handerson
