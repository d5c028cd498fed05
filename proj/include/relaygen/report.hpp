#pragma once

#include <string>
#include <vector>

#include "relaygen/relay.hpp"

namespace relaygen {

inline constexpr int kReportSchemaVersion = 1;

std::string failure_mode_name(FailureMode mode);

struct MatrixRow {
  std::string test_id;
  std::string stranger_id;
  std::string test_algo;
  std::string stranger_algo;
  int n_states = 0;
  double failure_rate = 0.0;
  double failure_std = 0.0;
  double mean_return = 0.0;
  double return_std = 0.0;
  double reference_rate = 0.0;  // stranger's own self-pair rate; nan if unknown
};

struct MatrixReport {
  int schema_version = kReportSchemaVersion;
  std::string env_id;
  int horizon = 0;
  std::string failure_mode;  // "termination" | "return-threshold"
  double return_threshold = 0.0;
  std::vector<MatrixRow> rows;
};

struct OrdinaryRow {
  std::string agent_id;
  std::string algorithm_id;
  int n_episodes = 0;
  double mean_return = 0.0;
  double return_std = 0.0;
  double failure_rate = 0.0;
  double mean_length = 0.0;
};

// Matrix CSV, one row per evaluated (test, stranger) pair (holes are
// omitted).  Starts with a "# relay-matrix-csv v1; ..." metadata line
// carrying env, horizon, and failure definition.
void write_matrix_csv(const std::string& path, const RelayMatrix& matrix,
                      const std::string& env_id, double return_threshold);
MatrixReport read_matrix_csv(const std::string& path);

// One row per relayed controllable state.
void write_per_state_csv(const std::string& path, const RelayMatrix& matrix);

void write_ordinary_csv(const std::string& path, const std::vector<OrdinaryRow>& rows);
std::vector<OrdinaryRow> read_ordinary_csv(const std::string& path);

// Merge matrix reports (same schema version, env, horizon, and failure
// definition required; mixed horizons are rejected) and render the grouped
// plain-text tables: failure rates by (stranger algorithm x test algorithm)
// with a Reference column from self-pairs, then the matching return table,
// then per-agent ordinary evaluation rows when provided.  Group cells list
// mean, across-pair std, and pooled across-state std, labeled.
std::string render_grouped_tables(const std::vector<MatrixReport>& reports,
                                  const std::vector<OrdinaryRow>& ordinary = {});

}  // namespace relaygen
