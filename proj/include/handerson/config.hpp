#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "handerson/analysis.hpp"
#include "handerson/hierarchy.hpp"
#include "handerson/randomness.hpp"
#include "handerson/weights.hpp"

namespace handerson {

struct ModelConfig {
  int n = 2;
  double rho = 2.0;
  std::vector<int> branching;   // explicit prefix n_1, n_2, ...; continues with n
  std::vector<double> weights;  // explicit p_1, p_2, ...; empty = geometric(rho)
  std::string weights_tail = "geometric";  // "geometric" (continuation with rho) or "rejected"
};

struct EnergyGridConfig {
  std::string kind = "continuity";  // linear | continuity | log | log2 | list
  double min = -1.0;
  double max = 1.0;
  std::size_t count = 20;
  int min_exponent = 4;   // log2: E = 2^{-m}, m in [min_exponent, max_exponent]
  int max_exponent = 14;
  std::vector<double> values;
};

struct RankRuleConfig {
  std::string kind = "K_of_E";  // fixed | k_of_E | K_of_E
  std::optional<double> alpha;  // default 6/(rho - 1) + 1
};

/// Everything one CLI run needs. validate() checks every field before any computation.
struct ExperimentConfig {
  std::string experiment;  // defaults to the subcommand name
  ModelConfig model;
  SingleSiteDistribution distribution = SingleSiteDistribution::uniform(-1.0, 0.0);
  std::string boundary = "both";  // neumann | dirichlet | both
  Rank kappa = 3;
  RankRuleConfig rank_rule;
  EnergyGridConfig energies;
  std::size_t replicas = 1000;
  std::uint64_t seed = 12345;
  unsigned threads = 0;
  std::size_t dense_cap = kDefaultDenseCap;
  std::string out_dir = "out";
  bool emit_plot_data = false;

  // bracketing
  std::vector<Rank> ranks{1, 2};
  std::size_t psi_count = 100;
  // ergodic
  Rank big_rank = 3;
  Rank truncation_rank = 2;
  std::size_t covariance_samples = 10;
  Rank birkhoff_rank = 14;
  std::size_t birkhoff_seeds = 20;

  void validate() const;

  HierarchicalStructure structure() const;
  WeightSequence weights() const;
  std::vector<Boundary> boundaries() const;
  std::vector<double> energy_grid() const;
  KappaRule kappa_rule() const;
  double alpha() const;
  ExecutionOptions execution() const;

  /// Stable hash of every field that can influence CSV content.
  std::string param_hash() const;
};

nlohmann::json to_json(const SingleSiteDistribution& d);
SingleSiteDistribution distribution_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExperimentConfig& c);
/// Missing keys take the defaults above; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

}  // namespace handerson
