#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relaygen/agent.hpp"
#include "relaygen/env.hpp"
#include "relaygen/rng.hpp"
#include "relaygen/trajectory.hpp"

namespace relaygen {

enum class FailureMode {
  kTermination,      // failed iff the episode terminates before the horizon
  kReturnThreshold,  // failed iff the realized return stays below a threshold
};

struct RelayConfig {
  int m_trajs = 200;     // trajectories harvested per stranger
  double eta = 0.5;      // keep the top ceil(eta * m_trajs) by return
  int k_per_traj = 5;    // takeover points sampled per kept trajectory
  int horizon = 500;     // relay length L
  FailureMode failure_mode = FailureMode::kTermination;
  double return_threshold = 0.0;  // kReturnThreshold only
  bool sample_without_replacement = true;
  // Optional absolute floor on kept-trajectory returns, applied after the
  // top-eta cut ("high return" is otherwise only relative).  Off by default.
  bool use_return_floor = false;
  double return_floor = 0.0;
  bool stochastic_eval = false;  // stochastic policies during harvest + relay
};

// A takeover point: a mid-trajectory state of the stranger policy together
// with what the stranger itself went on to collect from there.
struct ControllableState {
  EnvState env_state;
  Observation observation;
  uint64_t t_index = 0;       // takeover step within the source trajectory
  int source_traj = 0;        // kept-trajectory rank (0 = best return)
  double source_return = 0.0; // stranger's full-episode return
  double stranger_remaining_return = 0.0;  // stranger's return over the next horizon steps
};

struct HarvestResult {
  std::vector<ControllableState> states;
  int kept_trajectories = 0;
  int skipped_short = 0;  // kept trajectories with no takeover index (T <= horizon)
  int skipped_floor = 0;  // kept trajectories dropped by the absolute return floor
};

// Roll m_trajs episodes of the stranger from fresh d0 seeds, keep the top
// ceil(eta * m_trajs) by return, and from each kept trajectory with T >
// horizon sample k_per_traj takeover indices uniformly from {1 .. T -
// horizon}.  Without replacement the draw is distinct indices, with shorter
// ranges taken whole; with replacement duplicates may repeat.
HarvestResult harvest_controllable_states(const Env& env, const Agent& stranger,
                                          const RelayConfig& cfg, Rng& rng);

// The selection stage of the harvest on already-collected trajectories
// (exactly m_trajs of them).
HarvestResult select_takeover_states(const std::vector<Trajectory>& trajs,
                                     const RelayConfig& cfg, Rng& rng);

struct RelayOutcome {
  bool valid = true;  // false: the state could not be restored; excluded from rates
  bool failed = false;
  int steps_survived = 0;  // counts the terminating step itself
  double test_return = 0.0;
  double q_at_takeover = 0.0;  // test agent's Q(s, own action) at handover
};

// Hand the state to the test agent for at most cfg.horizon steps.  In
// termination mode a failure is a health termination strictly before step
// horizon; surviving the full horizon passes even if the very last step
// terminates.  In return-threshold mode the episode cannot continue past a
// termination, so the return accumulated up to it stands in for the full-
// horizon sum; failure is a realized return below the threshold.
RelayOutcome relay_rollout(const Env& env, const Agent& test_agent, const ControllableState& cs,
                           const RelayConfig& cfg, Rng& rng);

struct RelayCellStats {
  int n_states = 0;  // valid outcomes only
  int n_errors = 0;  // invalid (unrestorable) states, excluded from the rates
  double failure_rate = 0.0;
  double failure_std = 0.0;  // sample std (ddof = 1) of the 0/1 failure indicator
  double mean_return = 0.0;
  double return_std = 0.0;
};

RelayCellStats aggregate_outcomes(const std::vector<RelayOutcome>& outcomes);

struct RelayCell {
  int test_index = 0;
  int stranger_index = 0;
  RelayCellStats stats;
  std::vector<RelayOutcome> outcomes;  // one per controllable state, harvest order
  std::string error;  // nonempty marks a hole: this pair failed to evaluate
};

struct AgentRef {
  std::string id;    // e.g. "sac-seed3"
  std::string algo;  // grouping label, e.g. "sta-sac"; agent's algorithm_id if empty
  const Agent* agent = nullptr;
};

struct RelayMatrix {
  std::vector<std::string> test_ids;
  std::vector<std::string> test_algos;
  std::vector<std::string> stranger_ids;
  std::vector<std::string> stranger_algos;
  std::vector<HarvestResult> harvests;  // indexed by stranger
  std::vector<RelayCell> cells;         // test-major, n_tests x n_strangers
  int horizon = 0;
  FailureMode failure_mode = FailureMode::kTermination;

  const RelayCell& cell(int test_index, int stranger_index) const {
    return cells[static_cast<size_t>(test_index) * stranger_ids.size() + stranger_index];
  }
  // Failure rate of the stranger itself on its own states (the reference
  // diagonal), or -1 when the stranger is not among the test agents or its
  // self-cell is a hole.
  double reference_rate(int stranger_index) const;
};

// Full pairwise relay: every test agent is evaluated on every stranger's
// states.  When the fleets coincide the diagonal self-pairs provide the
// reference rates.  Harvests are done once per stranger and shared across
// test agents.  Cells are computed on jobs threads; per-cell errors leave a
// hole instead of aborting.  Results are byte-identical for any jobs value.
RelayMatrix relay_matrix(const Env& env, const std::vector<AgentRef>& tests,
                         const std::vector<AgentRef>& strangers, const RelayConfig& cfg,
                         const Rng& base_rng, int jobs = 1);

struct OrdinaryEvalStats {
  int n_episodes = 0;
  double mean_return = 0.0;
  double return_std = 0.0;
  double failure_rate = 0.0;  // fraction of episodes ending in termination
  double mean_length = 0.0;
};

// Plain evaluation from d0 resets with the deterministic policy.
OrdinaryEvalStats evaluate_ordinary(const Env& env, const Agent& agent, int n_episodes,
                                    int max_steps, Rng& rng);

struct BootstrapDelta {
  int n_a = 0;
  int n_b = 0;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double std_a = 0.0;
  double std_b = 0.0;
  double delta = 0.0;     // mean_a - mean_b
  double ci_lower = 0.0;  // one-sided 95% bootstrap lower bound on delta
};

BootstrapDelta bootstrap_mean_difference(const std::vector<double>& a,
                                         const std::vector<double>& b, int n_resamples,
                                         Rng& rng);

struct QFailureAnalysis {
  BootstrapDelta succeeded_vs_failed;  // takeover Q on stranger states, by outcome
  BootstrapDelta own_vs_stranger_success;
  double mean_ref_failed = 0.0;      // stranger remaining return where the test failed
  double std_ref_failed = 0.0;
  double mean_ref_succeeded = 0.0;
  double std_ref_succeeded = 0.0;
  double mean_return_failed = 0.0;   // test agent's realized relay return
  double std_return_failed = 0.0;
  double mean_return_succeeded = 0.0;
  double std_return_succeeded = 0.0;
};

// Does the test agent's own critic see the handover trouble coming?  Pools
// q_at_takeover over off-diagonal outcomes split by failure, and compares
// own-state (diagonal, test_id == stranger_id) Q against Q at stranger
// states the agent went on to survive.  test_index restricts the pooling to
// one test agent; -1 pools the whole matrix.  Throws std::invalid_argument
// when a partition is empty.
QFailureAnalysis q_failure_analysis(const RelayMatrix& matrix, int n_resamples, Rng& rng,
                                    int test_index = -1);

}  // namespace relaygen
