#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "relaygen/config.hpp"

using namespace relaygen;

TEST_CASE("desk profile trims budgets and networks") {
  const ExperimentConfig hop = default_config("desk", "planar-hopper-v1");
  CHECK(hop.total_steps == 300000);
  CHECK(hop.seeds == std::vector<uint64_t>{0, 1, 2, 3, 4});
  CHECK(hop.sac.hidden == std::vector<int>{64, 64});
  CHECK(hop.td3.hidden == std::vector<int>{64, 64});
  CHECK(hop.sac.start_steps == 1000);
  CHECK(hop.sac.update_after == 1000);
  CHECK(hop.relay.m_trajs == 50);
  CHECK(hop.relay.k_per_traj == 5);
  CHECK(hop.relay.horizon == 200);

  const ExperimentConfig cart = default_config("desk", "cartpole-balance-v1");
  CHECK(cart.total_steps == 100000);

  const ExperimentConfig paper = default_config("paper", "planar-hopper-v1");
  CHECK(paper.total_steps == 3000000);
  CHECK(paper.seeds.size() == 10);
  CHECK(paper.sac.hidden == std::vector<int>{256, 256});
  CHECK(paper.relay.m_trajs == 200);
  CHECK(paper.relay.horizon == 500);

  CHECK_THROWS_AS((void)default_config("prod", "planar-hopper-v1"), std::invalid_argument);
}

TEST_CASE("an empty config parses to the desk hopper defaults") {
  const ExperimentConfig cfg = parse_config("{}");
  CHECK(cfg.profile == "desk");
  CHECK(cfg.env_id == "planar-hopper-v1");
  CHECK(cfg.algorithm == "sac");
  CHECK(cfg.variant == "ordinary");
  CHECK(cfg.master_seed == 1);
  CHECK(cfg.total_steps == 300000);
  CHECK(cfg.relay_ordinary_episodes == 20);
  CHECK(cfg.export_n_states == 5000);
  CHECK(cfg.relay_horizons.empty());
  CHECK(cfg.sta.p0 == 0.9);
  CHECK(cfg.naive.n_pretrained == 16);
  CHECK(cfg.hparam_ranges.size() == 2);
  CHECK(cfg.hparam_ranges.at("lr")[0] == 1e-4);
}

TEST_CASE("overrides reach every section") {
  const char* text = R"({
    "master_seed": 42,
    "env": {"id": "cartpole-balance-v1", "params": {"gravity": 9.0, "x_bound": 3.0}},
    "algorithm": "td3",
    "variant": "sta",
    "total_steps": 12345,
    "seeds": [7, 9],
    "out_dir": "elsewhere",
    "sac": {"lr": 0.001, "hidden": [32]},
    "td3": {"policy_delay": 3},
    "sta": {"p0": 0.5, "scoring_mode": "average-remaining", "n_candidates": 2},
    "naive": {"n_pretrained": 4, "pool_path": "pool.rgsa"},
    "relay": {"m_trajs": 8, "horizons": [50, 100], "ordinary_episodes": 0},
    "hparam_ranges": {"lr": [1e-5, 1e-2]},
    "export": {"n_states": 17}
  })";
  const ExperimentConfig cfg = parse_config(text);
  CHECK(cfg.master_seed == 42);
  CHECK(cfg.env_id == "cartpole-balance-v1");
  CHECK(cfg.env_params.at("gravity") == 9.0);
  CHECK(cfg.algorithm == "td3");
  CHECK(cfg.variant == "sta");
  CHECK(cfg.total_steps == 12345);
  CHECK(cfg.seeds == std::vector<uint64_t>{7, 9});
  CHECK(cfg.out_dir == "elsewhere");
  CHECK(cfg.sac.lr == 0.001);
  CHECK(cfg.sac.hidden == std::vector<int>{32});
  CHECK(cfg.td3.policy_delay == 3);
  CHECK(cfg.td3.hidden == std::vector<int>{64, 64});  // desk default untouched
  CHECK(cfg.sta.p0 == 0.5);
  CHECK(cfg.sta.scoring_mode == ScoringMode::kAverageRemaining);
  CHECK(cfg.sta.n_candidates == 2);
  CHECK(cfg.naive.n_pretrained == 4);
  CHECK(cfg.naive.pool_path == "pool.rgsa");
  CHECK(cfg.relay.m_trajs == 8);
  CHECK(cfg.relay_horizons == std::vector<int>{50, 100});
  CHECK(cfg.relay_ordinary_episodes == 0);
  CHECK(cfg.hparam_ranges.size() == 1);
  CHECK(cfg.hparam_ranges.at("lr")[1] == 1e-2);
  CHECK(cfg.export_n_states == 17);
}

TEST_CASE("unknown keys are rejected at every level") {
  CHECK_THROWS_AS((void)parse_config(R"({"banana": 1})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"sac": {"banana": 1}})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"td3": {"alpha": 1}})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"sta": {"horizon": 1}})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"naive": {"m": 1}})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"relay": {"L": 1}})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"env": {"name": "x"}})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"export": {"n": 1}})"), std::invalid_argument);
  // Misspelled env params die in env construction.
  CHECK_THROWS_AS((void)parse_config(R"({"env": {"params": {"gravitee": 9.0}}})"),
                  std::invalid_argument);
}

TEST_CASE("seed lists and n_seeds are mutually exclusive and must be distinct") {
  CHECK(parse_config(R"({"n_seeds": 3})").seeds == std::vector<uint64_t>{0, 1, 2});
  CHECK_THROWS_AS((void)parse_config(R"({"n_seeds": 3, "seeds": [1]})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"n_seeds": 0})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"seeds": []})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"seeds": [3, 3]})"), std::invalid_argument);
}

TEST_CASE("validation rejects bad enum values and degenerate ranges") {
  CHECK_THROWS_AS((void)parse_config(R"({"algorithm": "ppo"})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"variant": "fancy"})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"profile": "prod"})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"total_steps": 0})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"out_dir": ""})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"env": {"id": "lunar-lander"}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"relay": {"ordinary_episodes": -1}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"relay": {"horizons": [100, 0]}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"export": {"n_states": 0}})"), std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"sta": {"scoring_mode": "best"}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"relay": {"failure_mode": "sideways"}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"hparam_ranges": {"lr": [0.1, 0.1]}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"hparam_ranges": {"tau": [0.0, 0.1]}})"),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)parse_config(R"({"hparam_ranges": {"lr": [0.1]}})"),
                  std::invalid_argument);
}

TEST_CASE("the profile override outranks the file") {
  const ExperimentConfig cfg = parse_config(R"({"profile": "desk"})", "paper");
  CHECK(cfg.profile == "paper");
  CHECK(cfg.total_steps == 3000000);
}

TEST_CASE("the expanded config text is a parse fixed point") {
  const ExperimentConfig cfg = parse_config(
      R"({"algorithm": "td3", "variant": "naive", "seeds": [2, 5], "relay": {"thresholds": [1.5, 2]}})");
  const std::string text = effective_config_text(cfg);
  CHECK(text.back() == '\n');
  const ExperimentConfig reparsed = parse_config(text);
  CHECK(effective_config_text(reparsed) == text);
  CHECK(config_hash(reparsed) == config_hash(cfg));
  CHECK(reparsed.relay_thresholds == std::vector<double>{1.5, 2.0});
}

TEST_CASE("the config fingerprint is standard 64-bit FNV-1a") {
  CHECK(fnv1a64("") == 14695981039346656037ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64("foobar") == 0x85944171f73967e8ull);

  const ExperimentConfig cfg = parse_config("{}");
  const std::string h = config_hash(cfg);
  REQUIRE(h.size() == 8 + 16);
  CHECK(h.substr(0, 8) == "fnv1a64:");
  for (char c : h.substr(8)) CHECK(std::string("0123456789abcdef").find(c) != std::string::npos);
  char expect[32];
  std::snprintf(expect, sizeof(expect), "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(effective_config_text(cfg))));
  CHECK(h == expect);

  ExperimentConfig other = cfg;
  other.master_seed = 2;
  CHECK(config_hash(other) != h);
}
