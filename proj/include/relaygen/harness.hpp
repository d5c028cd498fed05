#pragma once

#include <string>
#include <vector>

#include "relaygen/checkpoint.hpp"
#include "relaygen/config.hpp"
#include "relaygen/relay.hpp"
#include "relaygen/report.hpp"
#include "relaygen/train.hpp"

namespace relaygen {

inline constexpr int kManifestSchemaVersion = 1;

struct RunRecord {
  int run_index = 0;
  uint64_t seed = 0;
  std::string agent_id;
  std::string status = "ok";  // "ok" or "error: <reason>"
  std::string checkpoint;     // out_dir-relative
  std::string log;
  std::string archive;  // sta runs only, else empty
  uint64_t total_env_steps = 0;
  double wall_seconds = 0.0;
  uint64_t episodes = 0;
  uint64_t updates = 0;
  uint64_t d0_starts = 0;
  uint64_t archive_starts = 0;
  uint64_t pool_starts = 0;
  uint64_t fallback_starts = 0;
  double final_alpha = 0.0;
};

struct RunManifest {
  int schema = kManifestSchemaVersion;
  std::string config_hash;
  std::string env_id;
  std::string algorithm;
  std::string variant;
  std::string profile;
  uint64_t total_steps = 0;
  std::vector<RunRecord> runs;

  bool all_ok() const;
};

// Canonical JSON (sorted keys, trailing newline).  wall_seconds is the one
// field reruns may not reproduce; mask_wall_seconds zeroes it for
// byte-comparisons.
std::string manifest_text(const RunManifest& m);
RunManifest parse_manifest(const std::string& text);
RunManifest load_manifest(const std::string& path);
void save_manifest(const std::string& path, const RunManifest& m);
std::string mask_wall_seconds(const std::string& manifest_json);

// "sac-sta-s3" style run id and the table grouping label ("sac" for the
// ordinary variant, "sta-sac" etc. otherwise).
std::string run_agent_id(const std::string& algorithm, const std::string& variant,
                         uint64_t seed);
std::string variant_label(const std::string& algorithm, const std::string& variant);

// Trains one agent per seed (failures recorded per run; the rest continue),
// writes checkpoints/logs/archives plus the effective config and the
// manifest under cfg.out_dir.  Runs already completed under the same config
// hash are reused, so the command is resumable and idempotent.
RunManifest cmd_train(const ExperimentConfig& cfg);

struct LoadedAgent {
  std::string id;
  AgentCheckpoint cp;
};

struct LoadedFleet {
  std::string env_id;
  std::string algorithm;
  std::string variant;
  std::string label;  // grouping label for tables
  std::vector<LoadedAgent> agents;  // ok runs only
  int skipped_runs = 0;

  std::vector<AgentRef> refs() const;
};

// Loads every ok run of a manifest (checkpoint paths resolve relative to the
// manifest's directory) and cross-checks env, algorithm, and step counts.
LoadedFleet load_fleet(const std::string& manifest_path);

struct RelayArtifacts {
  std::vector<std::string> matrix_csvs;
  std::vector<std::string> state_csvs;
  std::vector<std::string> table_txts;
  std::string ordinary_csv;  // empty when ordinary evaluation is disabled
  std::string manifest_path;
  int holes = 0;  // matrix cells that failed to evaluate
};

// Relay-evaluates the test fleet on the stranger fleet's states (the test
// fleet itself when strangers_manifest is empty): one matrix per horizon in
// cfg.relay_horizons (or the single cfg.relay.horizon), plus one
// return-threshold matrix per cfg.relay_thresholds entry, each written as
// matrix/states CSVs and a rendered text table under out_dir.
RelayArtifacts cmd_relay(const ExperimentConfig& cfg, const std::string& tests_manifest,
                         const std::string& strangers_manifest, const std::string& out_dir,
                         int jobs);

struct SweepRow {
  double value = 0.0;
  std::string dir;
  std::string status = "ok";
  double off_diag_failure = 0.0;  // mean over non-self pairs
  double ordinary_return = 0.0;   // mean over the trained fleet
};

struct SweepResult {
  std::string axis;
  std::vector<SweepRow> rows;
  std::string summary_path;

  bool all_ok() const;
};

// Trains and relay-evaluates one fleet per axis value (axes: n_pretrained
// for the naive variant; l_r, gamma_ratio, n_candidates for sta), optionally
// against a shared stranger fleet, and writes a comparison table.  Each
// value is isolated: one value failing leaves the others standing.
SweepResult cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
                      const std::vector<double>& values,
                      const std::string& strangers_manifest, int jobs);

// source ending in .rgsa: archive/pool export with score and epoch columns.
// Otherwise source is a training manifest: cfg.export_n_states observations
// per agent from fresh deterministic rollouts, labeled by agent id.
void cmd_export_states(const ExperimentConfig& cfg, const std::string& source_path,
                       const std::string& out_csv);

// Reads matrix and ordinary-evaluation CSVs (recognized by their metadata
// lines) and renders the merged grouped tables.
std::string cmd_report(const std::vector<std::string>& paths);

}  // namespace relaygen
