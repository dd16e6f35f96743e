#include "handerson/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "handerson/errors.hpp"

namespace handerson {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ValidationError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("bad value for '") + key + "': " + e.what());
    }
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

json to_json(const SingleSiteDistribution& d) {
  switch (d.kind()) {
    case SingleSiteDistribution::Kind::uniform:
      return {{"kind", "uniform"}, {"a", d.v_minus()}, {"b", d.v_plus()}};
    case SingleSiteDistribution::Kind::two_point:
      return {{"kind", "two_point"}, {"v_minus", d.v_minus()}, {"v_plus", d.v_plus()}, {"q", d.q()}};
    case SingleSiteDistribution::Kind::power_tail:
      return {{"kind", "power_tail"}, {"v_minus", d.v_minus()}, {"v_plus", d.v_plus()}, {"mu", d.mu()}};
  }
  return {};
}

SingleSiteDistribution distribution_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ValidationError("distribution needs a 'kind'");
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "uniform") {
    reject_unknown(j, {"kind", "a", "b"}, "distribution");
    double a = -1.0, b = 0.0;
    read(j, "a", a);
    read(j, "b", b);
    return SingleSiteDistribution::uniform(a, b);
  }
  if (kind == "two_point") {
    reject_unknown(j, {"kind", "v_minus", "v_plus", "q"}, "distribution");
    double lo = -1.0, hi = 0.0, q = 0.5;
    read(j, "v_minus", lo);
    read(j, "v_plus", hi);
    read(j, "q", q);
    return SingleSiteDistribution::two_point(lo, hi, q);
  }
  if (kind == "power_tail") {
    reject_unknown(j, {"kind", "v_minus", "v_plus", "mu"}, "distribution");
    double lo = -1.0, hi = 0.0, mu = 1.0;
    read(j, "v_minus", lo);
    read(j, "v_plus", hi);
    read(j, "mu", mu);
    return SingleSiteDistribution::power_tail(lo, hi, mu);
  }
  if (kind == "point_mass") {
    reject_unknown(j, {"kind", "value"}, "distribution");
    double v = 0.0;
    read(j, "value", v);
    return SingleSiteDistribution::point_mass(v);
  }
  throw ValidationError("unknown distribution kind '" + kind + "'");
}

json to_json(const ExperimentConfig& c) {
  json model = {{"n", c.model.n}, {"rho", c.model.rho}, {"branching", c.model.branching},
                {"weights", c.model.weights}, {"weights_tail", c.model.weights_tail}};
  json energies = {{"kind", c.energies.kind},         {"min", c.energies.min},
                   {"max", c.energies.max},           {"count", c.energies.count},
                   {"min_exponent", c.energies.min_exponent}, {"max_exponent", c.energies.max_exponent},
                   {"values", c.energies.values}};
  json rule = {{"kind", c.rank_rule.kind}};
  rule["alpha"] = c.rank_rule.alpha ? json(*c.rank_rule.alpha) : json(nullptr);
  return {{"experiment", c.experiment},
          {"model", model},
          {"distribution", to_json(c.distribution)},
          {"boundary", c.boundary},
          {"kappa", c.kappa},
          {"rank_rule", rule},
          {"energies", energies},
          {"replicas", c.replicas},
          {"seed", c.seed},
          {"threads", c.threads},
          {"dense_cap", c.dense_cap},
          {"out_dir", c.out_dir},
          {"emit_plot_data", c.emit_plot_data},
          {"ranks", c.ranks},
          {"psi_count", c.psi_count},
          {"big_rank", c.big_rank},
          {"truncation_rank", c.truncation_rank},
          {"covariance_samples", c.covariance_samples},
          {"birkhoff_rank", c.birkhoff_rank},
          {"birkhoff_seeds", c.birkhoff_seeds}};
}

ExperimentConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  reject_unknown(j,
                 {"experiment", "model", "distribution", "boundary", "kappa", "rank_rule", "energies", "replicas",
                  "seed", "threads", "dense_cap", "out_dir", "emit_plot_data", "ranks", "psi_count", "big_rank",
                  "truncation_rank", "covariance_samples", "birkhoff_rank", "birkhoff_seeds"},
                 "config");
  ExperimentConfig c;
  read(j, "experiment", c.experiment);
  if (j.contains("model")) {
    const auto& m = j.at("model");
    reject_unknown(m, {"n", "rho", "branching", "weights", "weights_tail"}, "model");
    read(m, "n", c.model.n);
    read(m, "rho", c.model.rho);
    read(m, "branching", c.model.branching);
    read(m, "weights", c.model.weights);
    read(m, "weights_tail", c.model.weights_tail);
  }
  if (j.contains("distribution")) c.distribution = distribution_from_json(j.at("distribution"));
  read(j, "boundary", c.boundary);
  read(j, "kappa", c.kappa);
  if (j.contains("rank_rule")) {
    const auto& r = j.at("rank_rule");
    reject_unknown(r, {"kind", "alpha"}, "rank_rule");
    read(r, "kind", c.rank_rule.kind);
    if (r.contains("alpha") && !r.at("alpha").is_null()) c.rank_rule.alpha = r.at("alpha").get<double>();
  }
  if (j.contains("energies")) {
    const auto& e = j.at("energies");
    reject_unknown(e, {"kind", "min", "max", "count", "min_exponent", "max_exponent", "values"}, "energies");
    read(e, "kind", c.energies.kind);
    read(e, "min", c.energies.min);
    read(e, "max", c.energies.max);
    read(e, "count", c.energies.count);
    read(e, "min_exponent", c.energies.min_exponent);
    read(e, "max_exponent", c.energies.max_exponent);
    read(e, "values", c.energies.values);
  }
  read(j, "replicas", c.replicas);
  read(j, "seed", c.seed);
  read(j, "threads", c.threads);
  read(j, "dense_cap", c.dense_cap);
  read(j, "out_dir", c.out_dir);
  read(j, "emit_plot_data", c.emit_plot_data);
  read(j, "ranks", c.ranks);
  read(j, "psi_count", c.psi_count);
  read(j, "big_rank", c.big_rank);
  read(j, "truncation_rank", c.truncation_rank);
  read(j, "covariance_samples", c.covariance_samples);
  read(j, "birkhoff_rank", c.birkhoff_rank);
  read(j, "birkhoff_seeds", c.birkhoff_seeds);
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j);
}

void ExperimentConfig::validate() const {
  // Construction of the model objects runs their own validation.
  const auto st = structure();
  const auto w = weights();
  boundaries();
  kappa_rule();
  if (kappa < 0) throw ValidationError("kappa must be >= 0");
  if (st.volume_real(kappa) > static_cast<double>(dense_cap)) {
    throw ValidationError("|Q_kappa| = " + std::to_string(st.volume_real(kappa)) + " exceeds dense_cap " +
                          std::to_string(dense_cap));
  }
  if (replicas == 0) throw ValidationError("replicas must be >= 1");
  if (dense_cap == 0) throw ValidationError("dense_cap must be >= 1");
  if (model.weights_tail != "geometric" && model.weights_tail != "rejected") {
    throw ValidationError("weights_tail must be 'geometric' or 'rejected'");
  }
  for (Rank r : ranks) {
    if (r < 0 || r > kappa) throw ValidationError("bracketing ranks must lie in [0, kappa]");
  }
  if (big_rank < 0 || big_rank > 12) throw ValidationError("big_rank must lie in [0, 12]");
  if (truncation_rank < 0 || truncation_rank > big_rank) throw ValidationError("truncation_rank must lie in [0, big_rank]");
  if (birkhoff_rank < 0 || birkhoff_rank > 30) throw ValidationError("birkhoff_rank must lie in [0, 30]");
  if (alpha() <= 0.0) throw ValidationError("alpha must be > 0");
  energy_grid();
}

HierarchicalStructure ExperimentConfig::structure() const {
  // Volumes are cheap to tabulate, so materialize every rank that fits.
  if (model.n < 2) throw ValidationError("degree n must be >= 2");
  Rank depth = 0;
  long double volume = 1.0L;
  while (depth < 62) {
    const auto next = static_cast<std::size_t>(depth) < model.branching.size() ? model.branching[depth] : model.n;
    if (next < 2) throw ValidationError("branching numbers must be >= 2");
    volume *= next;
    if (volume > 4611686018427387904.0L) break;
    ++depth;
  }
  depth = std::max(depth, static_cast<Rank>(model.branching.size()));
  return HierarchicalStructure::with_prefix(model.branching, model.n, depth);
}

WeightSequence ExperimentConfig::weights() const {
  if (model.weights.empty()) return WeightSequence::geometric(model.rho);
  std::optional<double> cont;
  if (model.weights_tail == "geometric") cont = model.rho;
  return WeightSequence::explicit_list(model.weights, cont);
}

std::vector<Boundary> ExperimentConfig::boundaries() const {
  if (boundary == "both") return {Boundary::neumann, Boundary::dirichlet};
  return {boundary_from_string(boundary)};
}

std::vector<double> ExperimentConfig::energy_grid() const {
  const auto& e = energies;
  std::vector<double> grid;
  if (e.kind == "list") {
    if (e.values.empty()) throw ValidationError("energy list is empty");
    grid = e.values;
    std::sort(grid.begin(), grid.end());
  } else if (e.kind == "linear") {
    if (e.count == 0 || !(e.max >= e.min)) throw ValidationError("linear grid needs count >= 1 and max >= min");
    for (std::size_t i = 0; i < e.count; ++i) {
      grid.push_back(e.count == 1 ? e.min : e.min + (e.max - e.min) * static_cast<double>(i) / (e.count - 1));
    }
  } else if (e.kind == "continuity") {
    grid = continuity_grid(weights(), distribution, e.min, e.max, e.count);
  } else if (e.kind == "log") {
    if (e.count < 2 || !(e.min > 0.0) || !(e.max > e.min)) {
      throw ValidationError("log grid needs count >= 2 and 0 < min < max");
    }
    const double a = std::log(e.min), b = std::log(e.max);
    for (std::size_t i = 0; i < e.count; ++i) grid.push_back(std::exp(a + (b - a) * i / (e.count - 1)));
  } else if (e.kind == "log2") {
    if (e.min_exponent > e.max_exponent) throw ValidationError("log2 grid needs min_exponent <= max_exponent");
    for (int m = e.max_exponent; m >= e.min_exponent; --m) grid.push_back(std::ldexp(1.0, -m));
  } else {
    throw ValidationError("unknown energy grid kind '" + e.kind + "'");
  }
  for (double v : grid) {
    if (!std::isfinite(v)) throw ValidationError("energy grid contains a non-finite value");
  }
  return grid;
}

KappaRule ExperimentConfig::kappa_rule() const {
  KappaRule rule;
  if (rank_rule.kind == "fixed") {
    rule.kind = KappaRule::Kind::fixed;
  } else if (rank_rule.kind == "k_of_E") {
    rule.kind = KappaRule::Kind::k_of_E;
  } else if (rank_rule.kind == "K_of_E") {
    rule.kind = KappaRule::Kind::K_of_E;
  } else {
    throw ValidationError("unknown rank rule '" + rank_rule.kind + "'");
  }
  rule.kappa = kappa;
  rule.alpha = rank_rule.alpha ? *rank_rule.alpha : 6.0 / (model.rho - 1.0) + 1.0;
  return rule;
}

double ExperimentConfig::alpha() const { return kappa_rule().alpha; }

ExecutionOptions ExperimentConfig::execution() const {
  ExecutionOptions opts;
  opts.threads = threads;
  opts.dense_cap = dense_cap;
  return opts;
}

std::string ExperimentConfig::param_hash() const {
  json j = to_json(*this);
  // Fields that must not change CSV content.
  j.erase("threads");
  j.erase("out_dir");
  j.erase("emit_plot_data");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

}  // namespace handerson
