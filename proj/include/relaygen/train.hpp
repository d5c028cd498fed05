#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "relaygen/agent.hpp"
#include "relaygen/archive.hpp"
#include "relaygen/env.hpp"
#include "relaygen/rng.hpp"
#include "relaygen/trajectory.hpp"

namespace relaygen {

enum class EpisodeStartKind { kD0, kArchive, kPool, kFallbackD0 };
enum class EpisodeEndCause { kTerminated, kTruncated, kBudget };

struct EpisodeLogEntry {
  uint64_t end_step = 0;  // global env-step counter at episode end
  double episode_return = 0.0;
  int length = 0;
  EpisodeEndCause cause = EpisodeEndCause::kTruncated;
  EpisodeStartKind start = EpisodeStartKind::kD0;
};

struct TrainLog {
  std::vector<EpisodeLogEntry> episodes;
  uint64_t env_steps = 0;  // exactly the configured budget
  uint64_t updates = 0;
  uint64_t d0_starts = 0;
  uint64_t archive_starts = 0;
  uint64_t pool_starts = 0;
  uint64_t fallback_starts = 0;
  double wall_seconds = 0.0;
  double final_alpha = 0.0;
};

// Trainer-side schedule knobs (the agent's own copy of these is carried in
// its hyperparameter block; the trainer receives them explicitly).
struct TrainerOptions {
  int batch_size = 256;
  uint64_t start_steps = 10000;   // uniform random actions before this step
  uint64_t update_after = 1000;   // first gradient step once this many steps stored
  uint64_t replay_capacity = 1000000;  // 0 = unbounded
};

// Supplies the start state and horizon of every training episode and sees
// each finished episode (the STA scheduler scores and archives from there).
class StartScheduler {
 public:
  struct Start {
    EnvState state;
    Observation obs;
    int horizon = 0;
    EpisodeStartKind kind = EpisodeStartKind::kD0;
  };

  virtual ~StartScheduler() = default;
  virtual Start next_start(const Env& env, const Agent& agent, Rng& rng) = 0;
  virtual void on_episode_end(const Trajectory& episode, const Agent& agent,
                              uint64_t global_env_steps) {
    (void)episode;
    (void)agent;
    (void)global_env_steps;
  }
};

// Plain d0 resets with the env's full horizon.
class D0StartScheduler : public StartScheduler {
 public:
  explicit D0StartScheduler(int horizon) : horizon_(horizon) {}
  Start next_start(const Env& env, const Agent& agent, Rng& rng) override;

 private:
  int horizon_;
};

// Self-trajectory-augmentation scheduler: with probability p0 restore a
// low-Q qualified archive state (horizon l_r), otherwise reset from d0
// (horizon l_max).
// Finished episodes are scored; qualified states enter the archive; omega
// updates once per epoch_steps env steps.  With p0 = 0 the trainer rng
// stream is consumed exactly as by D0StartScheduler, so training is
// bit-identical to the ordinary loop.
class StaStartScheduler : public StartScheduler {
 public:
  StaStartScheduler(const StaConfig& cfg, Rng archive_rng);
  Start next_start(const Env& env, const Agent& agent, Rng& rng) override;
  void on_episode_end(const Trajectory& episode, const Agent& agent,
                      uint64_t global_env_steps) override;

  const StateArchive& archive() const { return archive_; }
  StateArchive take_archive() { return std::move(archive_); }

 private:
  StaConfig cfg_;
  StateArchive archive_;
  Rng archive_rng_;  // private stream for capped-archive eviction only
  uint64_t epochs_completed_ = 0;
};

// Naive-baseline scheduler: uniform draws from a fixed pretrained pool.
class PoolStartScheduler : public StartScheduler {
 public:
  PoolStartScheduler(const NaiveConfig& cfg, std::vector<ScoredState> pool);
  Start next_start(const Env& env, const Agent& agent, Rng& rng) override;

 private:
  NaiveConfig cfg_;
  std::vector<ScoredState> pool_;
};

// The one training loop every variant runs through: act (uniform during
// start_steps, stochastic after), store, one update per env step after
// update_after, episode bookkeeping through the scheduler.  Consumes exactly
// total_steps env interactions regardless of scheduler.
TrainLog train_loop(Agent& agent, const Env& env, uint64_t total_steps,
                    const TrainerOptions& opt, StartScheduler& scheduler, Rng& rng);

TrainLog train_ordinary(Agent& agent, const Env& env, uint64_t total_steps,
                        const TrainerOptions& opt, Rng& rng);

struct StaTrainResult {
  TrainLog log;
  StateArchive archive;
};

StaTrainResult sta_train(Agent& agent, const Env& env, uint64_t total_steps,
                         const TrainerOptions& opt, const StaConfig& cfg, Rng& rng);

TrainLog naive_train(Agent& agent, const Env& env, uint64_t total_steps,
                     const TrainerOptions& opt, const NaiveConfig& cfg,
                     std::vector<ScoredState> pool, Rng& rng);

// Roll m_trajs deterministic trajectories per checkpoint, keep the top
// ceil(eta_naive * m_trajs) by return, and pool every state of the kept
// trajectories with diagnostic next-lambda partial-sum scores.  Unreadable
// checkpoints are skipped (collected in *warnings) and the rest proceed.
std::vector<ScoredState> build_pretrained_pool(const std::vector<std::string>& checkpoint_paths,
                                               const Env& env, int m_trajs, double eta_naive,
                                               int lambda, Rng& rng,
                                               std::vector<std::string>* warnings = nullptr);

}  // namespace relaygen
