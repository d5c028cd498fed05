#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "relaygen/archive.hpp"
#include "relaygen/relay.hpp"
#include "relaygen/sac.hpp"
#include "relaygen/td3.hpp"

namespace relaygen {

// One experiment: an agent fleet (env x algorithm x variant x seeds) plus
// the relay-evaluation settings.  Loaded from a JSON file on top of profile
// defaults; the fully expanded config is re-emitted next to results.
struct ExperimentConfig {
  uint64_t master_seed = 1;
  std::string env_id = "planar-hopper-v1";
  std::map<std::string, double> env_params;  // named overrides, default none

  std::string algorithm = "sac";  // sac | td3
  std::string variant = "ordinary";  // ordinary | sta | naive | infinite-buffer | random-hparams
  std::string profile = "desk";   // desk | paper

  uint64_t total_steps = 0;
  std::vector<uint64_t> seeds;  // also the run indices; distinct

  std::string out_dir = "out";

  SacHyperparams sac;
  Td3Hyperparams td3;
  StaConfig sta;
  NaiveConfig naive;

  RelayConfig relay;
  int relay_ordinary_episodes = 20;     // 0 disables the d0 self-evaluation
  std::vector<int> relay_horizons;      // optional L sweep (empty: single L)
  std::vector<double> relay_thresholds; // optional threshold sweep

  // random-hparams variant: key -> [lo, hi]; lr and tau draw log-uniformly.
  std::map<std::string, std::array<double, 2>> hparam_ranges;

  int export_n_states = 5000;
};

// Profile defaults with nothing else applied.  desk: (64,64) nets, reduced
// budgets (hopper 300k / cartpole 100k), 5 seeds, M=50 K=5 L=200.  paper:
// (256,256) nets, 3M steps, 10 seeds, M=200 K=5 L=500.
ExperimentConfig default_config(const std::string& profile, const std::string& env_id);

// Parse a config JSON text over the profile defaults.  Unknown keys are
// rejected.  profile_override, when nonempty, wins over the file's value.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& profile_override = "");
ExperimentConfig load_config_file(const std::string& path,
                                  const std::string& profile_override = "");

// Canonical fully expanded dump (sorted keys, 2-space indent, trailing
// newline); reparsing it reproduces the config exactly.
std::string effective_config_text(const ExperimentConfig& cfg);

uint64_t fnv1a64(const std::string& bytes);

// "fnv1a64:<16 hex digits>" over effective_config_text(cfg).
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace relaygen
