#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "relaygen/agent.hpp"
#include "relaygen/env.hpp"
#include "relaygen/trajectory.hpp"

namespace relaygen {

enum class ScoringMode {
  kNextLambdaSum,     // sum of the next lambda rewards (partial near a failure)
  kAverageRemaining,  // mean reward from t to the end of the trajectory
};

struct StaConfig {
  double p0 = 0.9;         // probability of an archive start
  int l_r = 100;           // horizon of archive-started episodes
  int l_max = 1000;        // horizon of d0-started episodes
  int lambda = 50;         // score lookahead
  double eta_sta = 0.75;   // qualification ratio per epoch
  double gamma_ratio = 1.6;
  int n_candidates = 5;
  ScoringMode scoring_mode = ScoringMode::kNextLambdaSum;
  uint64_t epoch_steps = 10000;  // omega update cadence in env steps
  size_t capacity = 0;           // archive cap, 0 = unbounded
};

struct NaiveConfig {
  int n_pretrained = 16;
  double eta_naive = 0.75;
  double p0 = 0.9;
  int l_r = 100;
  int l_max = 1000;
  std::string pool_path;
};

struct ScoredState {
  EnvState env_state;
  Observation observation;
  double score = 0.0;
  uint32_t epoch = 0;
  double q_at_insert = 0.0;  // diagnostic only
};

// Archive of scored historical states plus the qualification thresholds.
// Entries are append-only (optionally reservoir-capped); omega is the
// per-epoch qualification threshold and omega_max its running maximum.
class StateArchive {
 public:
  explicit StateArchive(size_t capacity = 0) : capacity_(capacity) {}

  // Append subject to qualification having been checked by the caller.
  // With a capacity cap, a full archive evicts a uniformly random entry
  // (reservoir-style; consumes rng only when full).
  void add(ScoredState entry, Rng& rng);

  void record_epoch_score(double score) { latest_epoch_scores_.push_back(score); }

  // omega := k-th largest of the latest epoch's scores, k = ceil(eta * n);
  // omega_max := max(omega_max, omega); the epoch score list is cleared.
  // With no scores gathered this epoch, omega is unchanged.
  void update_threshold(double eta_sta);

  // True before the first threshold update (bootstrap epoch: qualify all),
  // afterwards true iff score >= omega.
  bool is_qualified(double score) const {
    return !has_omega_ || score >= omega_;
  }

  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const ScoredState& operator[](size_t i) const { return entries_[i]; }
  const std::vector<ScoredState>& entries() const { return entries_; }
  double omega() const { return omega_; }
  double omega_max() const { return omega_max_; }
  bool has_omega() const { return has_omega_; }
  size_t capacity() const { return capacity_; }
  const std::vector<double>& latest_epoch_scores() const { return latest_epoch_scores_; }

 private:
  size_t capacity_;
  std::vector<ScoredState> entries_;
  std::vector<double> latest_epoch_scores_;
  double omega_ = 0.0;
  double omega_max_ = 0.0;
  bool has_omega_ = false;
};

// Scores for the eligible states of a finished trajectory, as
// (state_index, score) pairs.  Next-lambda-sum mode: score(t) is the sum of
// rewards t .. min(t+lambda, T)-1; in a truncated trajectory the indices
// t > T - lambda are excluded (no fair lookahead), while near a terminal
// failure the partial (low) sum is kept.  Average-remaining mode: mean
// reward from t to the end, all indices eligible.  The state after the last
// step is never scored.
std::vector<std::pair<size_t, double>> score_trajectory_states(const Trajectory& traj,
                                                               int lambda, ScoringMode mode);

// Uniformly sample up to n_candidates distinct archive entries satisfying
// score * gamma_ratio >= omega_max (rejection sampling capped at
// 50 * n_candidates attempts, then a full scan; a smaller eligible pool is
// taken whole) and return the index of the candidate minimizing
// q_value(s, act(s, deterministic)).  With n_candidates = 1 the single
// sampled state is returned without touching the critics.  Returns nullopt
// (fall back to d0) when the archive is empty or nothing qualifies.
std::optional<size_t> select_start_state(const StateArchive& archive, const Agent& agent,
                                         int n_candidates, double gamma_ratio, Rng& rng);

// State-pool / archive file ("RGSA"):
//   magic "RGSA" | u16 version | string env_id | u64 count
//   | per entry: EnvState blob ("RGEV") | f32 score | u32 epoch | f32 q_at_insert
// Observations are recomputed through the env on load.
inline constexpr uint16_t kArchiveFormatVersion = 1;

void write_state_pool(std::ostream& out, const std::string& env_id,
                      const std::vector<ScoredState>& entries);
std::vector<ScoredState> read_state_pool(std::istream& in, const Env& env);

void save_state_pool(const std::string& path, const std::string& env_id,
                     const std::vector<ScoredState>& entries);
std::vector<ScoredState> load_state_pool(const std::string& path, const Env& env);

// CSV export: one row per entry — epoch, score, q, then the observation
// components.  Used for external embedding / visualization.
void export_pool_csv(const std::string& path, const std::vector<ScoredState>& entries);

}  // namespace relaygen
