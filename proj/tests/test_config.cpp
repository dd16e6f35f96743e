#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "handerson/config.hpp"
#include "handerson/errors.hpp"

using namespace handerson;
using nlohmann::json;

TEST_CASE("defaults validate") {
  const ExperimentConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.structure().is_homogeneous());
  CHECK(c.weights().p(1) == 0.5);
  CHECK(c.boundaries().size() == 2);
  CHECK(c.alpha() == 7.0);
  CHECK(c.energy_grid().size() == 20);
}

TEST_CASE("round trip is lossless") {
  ExperimentConfig c;
  c.experiment = "demo";
  c.model.n = 3;
  c.model.rho = 2.5;
  c.model.branching = {3, 2};
  c.model.weights = {0.5, 0.25};
  c.distribution = SingleSiteDistribution::power_tail(-2.0, 0.5, 1.5);
  c.boundary = "dirichlet";
  c.kappa = 2;
  c.rank_rule.kind = "k_of_E";
  c.rank_rule.alpha = 0.1;
  c.energies.kind = "list";
  c.energies.values = {0.1, 0.2, 0.30000000000000004};
  c.replicas = 17;
  c.seed = 0xFFFFFFFFFFFFFFFFull;
  c.threads = 3;
  c.ranks = {0, 1};
  const auto j = to_json(c);
  const auto back = config_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.distribution == c.distribution);
  CHECK(back.seed == c.seed);
  CHECK(back.energies.values == c.energies.values);
  CHECK(back.param_hash() == c.param_hash());
  // through text
  CHECK(to_json(config_from_json(json::parse(j.dump()))) == j);

  for (const auto& d : {SingleSiteDistribution::uniform(-1, 0), SingleSiteDistribution::two_point(-1, 0.1, 0.3),
                        SingleSiteDistribution::point_mass(0.25)}) {
    CHECK(distribution_from_json(to_json(d)) == d);
  }
}

TEST_CASE("unknown keys and bad values are rejected") {
  CHECK_THROWS_AS(config_from_json(json{{"kappa", 3}, {"replicaz", 2}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"model", {{"n", 2}, {"depth", 3}}}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"kappa", "three"}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"model", {{"n", 1}}}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"model", {{"rho", 1.0}}}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"boundary", "periodic"}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"replicas", 0}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"kappa", 13}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"distribution", {{"kind", "gaussian"}}}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"distribution", {{"kind", "uniform"}, {"a", 1}, {"b", 0}}}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"rank_rule", {{"kind", "magic"}}}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"energies", {{"kind", "log"}, {"min", 0.0}}}}), ValidationError);
  CHECK_THROWS_AS(config_from_json(json{{"model", {{"weights", {0.5, 0.25}}, {"weights_tail", "rejected"}}}}),
                  ValidationError);
  CHECK_THROWS_AS(config_from_json(json::array()), ValidationError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ValidationError);
}

TEST_CASE("param hash ignores execution-only fields") {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.threads = 8;
  b.out_dir = "elsewhere";
  b.emit_plot_data = true;
  CHECK(a.param_hash() == b.param_hash());
  b.seed += 1;
  CHECK(a.param_hash() != b.param_hash());
  CHECK(a.param_hash().size() == 16);
}

TEST_CASE("energy grids") {
  ExperimentConfig c;
  c.energies.kind = "log2";
  c.energies.min_exponent = 4;
  c.energies.max_exponent = 14;
  const auto g = c.energy_grid();
  CHECK(g.size() == 11);
  CHECK(g.front() == std::ldexp(1.0, -14));
  CHECK(g.back() == 1.0 / 16.0);

  c.energies.kind = "linear";
  c.energies.min = 0.0;
  c.energies.max = 1.0;
  c.energies.count = 5;
  CHECK(c.energy_grid() == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});

  c.energies.kind = "log";
  c.energies.min = 0.01;
  c.energies.max = 1.0;
  c.energies.count = 3;
  const auto l = c.energy_grid();
  CHECK(l[1] == doctest::Approx(0.1));

  c.energies.kind = "list";
  c.energies.values = {0.5, 0.25};
  CHECK(c.energy_grid() == std::vector<double>{0.25, 0.5});
}

TEST_CASE("load from file") {
  const char* path = "handerson_test_config.json";
  {
    std::ofstream f(path);
    f << R"({"kappa": 4, "model": {"n": 3, "rho": 3}, "distribution": {"kind": "two_point", "q": 0.25}})";
  }
  const auto c = load_config(path);
  CHECK(c.kappa == 4);
  CHECK(c.model.n == 3);
  CHECK(c.distribution.q() == 0.25);
  {
    std::ofstream f(path);
    f << "{ not json";
  }
  CHECK_THROWS_AS(load_config(path), ValidationError);
  std::remove(path);
}
