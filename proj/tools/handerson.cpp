#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "handerson/config.hpp"
#include "handerson/errors.hpp"
#include "handerson/runner.hpp"

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicas;
  std::optional<std::string> out_dir;
  std::optional<unsigned> threads;
  std::optional<std::size_t> dense_cap;
  bool emit_plot_data = false;
};

// Precedence for the worker count: --threads, then HANDERSON_THREADS, then the config field.
void apply(handerson::ExperimentConfig& c, const Overrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.replicas) c.replicas = *o.replicas;
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.dense_cap) c.dense_cap = *o.dense_cap;
  if (o.emit_plot_data) c.emit_plot_data = true;
  if (o.threads) {
    c.threads = *o.threads;
  } else if (const char* env = std::getenv("HANDERSON_THREADS"); env && *env) {
    try {
      c.threads = static_cast<unsigned>(std::stoul(env));
    } catch (const std::exception&) {
      throw handerson::ValidationError(std::string("HANDERSON_THREADS is not a number: ") + env);
    }
  }
}

std::string describe(const std::string& name) {
  if (name == "spectrum") return "exact free spectra, dense cross-checks and sample spectra";
  if (name == "ids") return "integrated density of states, closed form and Monte Carlo";
  if (name == "bracketing") return "Neumann/Dirichlet bracketing and sandwich orderings";
  if (name == "tail") return "Lifshits tail: Monte Carlo, analytic lower bound, Temple upper bound";
  if (name == "exponent") return "van Hove and Lifshits exponent fits";
  if (name == "ergodic") return "covariance under shifts and Birkhoff averages over seeds";
  if (name == "selfcheck") return "fast end-to-end consistency checks";
  return "";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monte Carlo and exact spectral experiments for the hierarchical Anderson model"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides o;
  for (const auto& name : handerson::subcommands()) {
    auto* sub = app.add_subcommand(name, describe(name));
    sub->add_option("config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--replicas", o.replicas, "number of Monte Carlo replicas");
    sub->add_option("--out-dir", o.out_dir, "output directory");
    sub->add_option("--threads", o.threads, "worker threads (0 = all cores)");
    sub->add_option("--dense-cap", o.dense_cap, "largest matrix dimension for dense diagonalization");
    sub->add_flag("--emit-plot-data", o.emit_plot_data, "also write <experiment>.plot.json");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : handerson::kExitInvalid;
  }

  const std::string subcommand = app.get_subcommands().front()->get_name();
  handerson::ExperimentConfig config;
  try {
    config = handerson::load_config(config_path);
    apply(config, o);
    config.validate();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return handerson::kExitInvalid;
  }
  return handerson::run(subcommand, config);
}
