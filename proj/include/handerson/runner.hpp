#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "handerson/config.hpp"

namespace handerson {

/// One CSV row: (experiment, E, statistic).
struct ResultRecord {
  std::string experiment;
  std::string param_hash;
  double E = 0.0;
  double value = 0.0;
  double stderr_ = 0.0;
  std::string method;
  Rank kappa = 0;
  std::size_t replicas = 0;
  // Natural log of value when it may underflow; serialized only beyond 1e+-300.
  std::optional<double> log_value;
};

struct InvariantResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double threshold = 0.0;
  std::string detail;
};

struct RunResult {
  std::vector<ResultRecord> rows;
  std::vector<InvariantResult> invariants;
  std::vector<std::string> warnings;
  nlohmann::json extra = nlohmann::json::object();
  bool partial = false;

  bool all_passed() const;
};

enum ExitCode : int { kExitOk = 0, kExitInvariantFailure = 1, kExitInvalid = 2 };

const std::vector<std::string>& subcommands();

/// Runs one experiment in memory. Throws on invalid input.
RunResult execute(const std::string& subcommand, const ExperimentConfig& config);

std::string render_csv(const std::vector<ResultRecord>& rows);

nlohmann::json summary_json(const std::string& subcommand, const ExperimentConfig& config, const RunResult& result,
                            double wall_seconds);

nlohmann::json plot_json(const RunResult& result);

/// execute() plus output files; returns the process exit status.
int run(const std::string& subcommand, const ExperimentConfig& config);

}  // namespace handerson
