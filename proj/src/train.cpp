#include "relaygen/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "relaygen/checkpoint.hpp"
#include "relaygen/replay_buffer.hpp"

namespace relaygen {

namespace {

std::vector<float> to_f32(const std::vector<double>& v) {
  std::vector<float> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = static_cast<float>(v[i]);
  return out;
}

StartScheduler::Start d0_start(const Env& env, Rng& rng, int horizon, EpisodeStartKind kind) {
  const uint64_t seed = rng.next_u64();
  auto [obs, state] = env.reset(seed);
  return {std::move(state), std::move(obs), horizon, kind};
}

}  // namespace

StartScheduler::Start D0StartScheduler::next_start(const Env& env, const Agent& agent, Rng& rng) {
  (void)agent;
  return d0_start(env, rng, horizon_, EpisodeStartKind::kD0);
}

StaStartScheduler::StaStartScheduler(const StaConfig& cfg, Rng archive_rng)
    : cfg_(cfg), archive_(cfg.capacity), archive_rng_(archive_rng) {
  if (cfg_.p0 < 0.0 || cfg_.p0 > 1.0) throw std::invalid_argument("p0 must be in [0, 1]");
  if (cfg_.l_r <= 0 || cfg_.l_max <= 0) throw std::invalid_argument("horizons must be positive");
  if (cfg_.lambda <= 0) throw std::invalid_argument("lambda must be positive");
  if (cfg_.epoch_steps == 0) throw std::invalid_argument("epoch_steps must be positive");
}

StartScheduler::Start StaStartScheduler::next_start(const Env& env, const Agent& agent,
                                                    Rng& rng) {
  // The p0 > 0 guard keeps the rng stream untouched when archive starts are
  // disabled, so a p0 = 0 run replays the ordinary trainer bit for bit.
  if (cfg_.p0 > 0.0) {
    const double x = rng.uniform01();
    if (x <= cfg_.p0) {
      auto pick = select_start_state(archive_, agent, cfg_.n_candidates, cfg_.gamma_ratio, rng);
      if (pick.has_value()) {
        const ScoredState& e = archive_[*pick];
        return {e.env_state, e.observation, cfg_.l_r, EpisodeStartKind::kArchive};
      }
      // Empty archive or nothing currently eligible: fall back to d0.
      return d0_start(env, rng, cfg_.l_max, EpisodeStartKind::kFallbackD0);
    }
  }
  return d0_start(env, rng, cfg_.l_max, EpisodeStartKind::kD0);
}

void StaStartScheduler::on_episode_end(const Trajectory& episode, const Agent& agent,
                                       uint64_t global_env_steps) {
  const auto scored = score_trajectory_states(episode, cfg_.lambda, cfg_.scoring_mode);
  for (const auto& [idx, score] : scored) {
    archive_.record_epoch_score(score);
    if (!archive_.is_qualified(score)) continue;
    const TrajectoryStep& s = episode.steps[idx];
    // Diagnostic value estimate at insertion time; deterministic act leaves
    // the rng untouched.
    const ActionVector a = agent.act(s.obs, ActMode::kDeterministic, archive_rng_);
    const double q = agent.q_value(s.obs, a);
    archive_.add({s.state, s.obs, score, static_cast<uint32_t>(epochs_completed_), q},
                 archive_rng_);
  }
  while (epochs_completed_ < global_env_steps / cfg_.epoch_steps) {
    archive_.update_threshold(cfg_.eta_sta);
    ++epochs_completed_;
  }
}

PoolStartScheduler::PoolStartScheduler(const NaiveConfig& cfg, std::vector<ScoredState> pool)
    : cfg_(cfg), pool_(std::move(pool)) {
  if (cfg_.p0 < 0.0 || cfg_.p0 > 1.0) throw std::invalid_argument("p0 must be in [0, 1]");
  if (cfg_.p0 > 0.0 && pool_.empty())
    throw std::invalid_argument("restart pool is empty but p0 > 0");
}

StartScheduler::Start PoolStartScheduler::next_start(const Env& env, const Agent& agent,
                                                     Rng& rng) {
  (void)agent;
  if (cfg_.p0 > 0.0) {
    const double x = rng.uniform01();
    if (x <= cfg_.p0) {
      const ScoredState& e = pool_[rng.below(pool_.size())];
      return {e.env_state, e.observation, cfg_.l_r, EpisodeStartKind::kPool};
    }
  }
  return d0_start(env, rng, cfg_.l_max, EpisodeStartKind::kD0);
}

TrainLog train_loop(Agent& agent, const Env& env, uint64_t total_steps,
                    const TrainerOptions& opt, StartScheduler& scheduler, Rng& rng) {
  if (opt.batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
  if (agent.env_id() != env.env_id())
    throw std::invalid_argument("agent was built for env '" + agent.env_id() + "', not '" +
                                env.env_id() + "'");
  TrainLog log;
  if (total_steps == 0) return log;

  const auto wall_start = std::chrono::steady_clock::now();
  const int act_dim = agent.act_dim();
  ReplayBuffer buffer(opt.replay_capacity);

  auto count_start = [&log](EpisodeStartKind kind) {
    switch (kind) {
      case EpisodeStartKind::kD0: ++log.d0_starts; break;
      case EpisodeStartKind::kArchive: ++log.archive_starts; break;
      case EpisodeStartKind::kPool: ++log.pool_starts; break;
      case EpisodeStartKind::kFallbackD0: ++log.fallback_starts; break;
    }
  };

  StartScheduler::Start start = scheduler.next_start(env, agent, rng);
  count_start(start.kind);
  EnvState state = start.state;
  Observation obs = start.obs;
  Trajectory episode;
  UpdateDiagnostics last_diag;

  for (uint64_t step = 0; step < total_steps; ++step) {
    ActionVector action;
    if (step < opt.start_steps) {
      action.values.resize(act_dim);
      for (int i = 0; i < act_dim; ++i) action.values[i] = rng.uniform(-1.0, 1.0);
    } else {
      action = agent.act(obs, ActMode::kStochastic, rng);
    }

    StepResult r = env.step(state, action);
    buffer.add({to_f32(obs.values), to_f32(action.values), static_cast<float>(r.reward),
                to_f32(r.observation.values), r.terminated});
    episode.steps.push_back({state, obs, action, r.reward});
    state = std::move(r.state);
    obs = std::move(r.observation);

    if (step + 1 >= opt.update_after && buffer.size() >= static_cast<size_t>(opt.batch_size)) {
      last_diag = agent.update(buffer.sample(opt.batch_size, rng), rng);
      ++log.updates;
      if (!std::isfinite(last_diag.critic_loss) || !std::isfinite(last_diag.actor_loss))
        throw std::runtime_error("training diverged: non-finite loss at env step " +
                                 std::to_string(step + 1));
    }

    const bool horizon_hit = static_cast<int>(episode.steps.size()) >= start.horizon;
    const bool budget_hit = step + 1 == total_steps;
    if (r.terminated || r.truncated || horizon_hit || budget_hit) {
      episode.terminated = r.terminated;
      episode.truncated = !r.terminated;
      episode.final_state = state;
      scheduler.on_episode_end(episode, agent, step + 1);
      EpisodeEndCause cause = EpisodeEndCause::kTruncated;
      if (r.terminated) {
        cause = EpisodeEndCause::kTerminated;
      } else if (budget_hit && !r.truncated && !horizon_hit) {
        cause = EpisodeEndCause::kBudget;
      }
      log.episodes.push_back({step + 1, episode.total_return(),
                              static_cast<int>(episode.steps.size()), cause, start.kind});
      episode = Trajectory{};
      if (!budget_hit) {
        start = scheduler.next_start(env, agent, rng);
        count_start(start.kind);
        state = start.state;
        obs = start.obs;
      }
    }
  }

  log.env_steps = total_steps;
  log.final_alpha = last_diag.alpha;
  log.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  return log;
}

TrainLog train_ordinary(Agent& agent, const Env& env, uint64_t total_steps,
                        const TrainerOptions& opt, Rng& rng) {
  D0StartScheduler scheduler(env.spec().max_episode_steps);
  return train_loop(agent, env, total_steps, opt, scheduler, rng);
}

StaTrainResult sta_train(Agent& agent, const Env& env, uint64_t total_steps,
                         const TrainerOptions& opt, const StaConfig& cfg, Rng& rng) {
  // The eviction stream is split off without consuming from the trainer rng.
  StaStartScheduler scheduler(cfg, rng.split(stream_tag::kStartScheduler));
  StaTrainResult result;
  result.log = train_loop(agent, env, total_steps, opt, scheduler, rng);
  result.archive = scheduler.take_archive();
  return result;
}

TrainLog naive_train(Agent& agent, const Env& env, uint64_t total_steps,
                     const TrainerOptions& opt, const NaiveConfig& cfg,
                     std::vector<ScoredState> pool, Rng& rng) {
  PoolStartScheduler scheduler(cfg, std::move(pool));
  return train_loop(agent, env, total_steps, opt, scheduler, rng);
}

std::vector<ScoredState> build_pretrained_pool(const std::vector<std::string>& checkpoint_paths,
                                               const Env& env, int m_trajs, double eta_naive,
                                               int lambda, Rng& rng,
                                               std::vector<std::string>* warnings) {
  if (m_trajs <= 0) throw std::invalid_argument("m_trajs must be positive");
  if (!(eta_naive > 0.0 && eta_naive <= 1.0))
    throw std::invalid_argument("eta_naive must be in (0, 1]");
  if (lambda <= 0) throw std::invalid_argument("lambda must be positive");

  const int keep = static_cast<int>(std::ceil(eta_naive * m_trajs));
  std::vector<ScoredState> pool;
  for (const std::string& path : checkpoint_paths) {
    AgentCheckpoint ck;
    try {
      ck = load_agent_checkpoint(path);
      if (ck.agent->env_id() != env.env_id())
        throw std::invalid_argument("checkpoint is for env '" + ck.agent->env_id() + "'");
    } catch (const std::exception& e) {
      if (warnings) warnings->push_back(path + ": " + e.what());
      continue;
    }

    std::vector<Trajectory> trajs;
    trajs.reserve(m_trajs);
    for (int m = 0; m < m_trajs; ++m) {
      const uint64_t seed = rng.next_u64();
      trajs.push_back(rollout_from_reset(env, *ck.agent, seed, env.spec().max_episode_steps,
                                         ActMode::kDeterministic, rng));
    }
    std::vector<int> order(trajs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&trajs](int a, int b) {
      return trajs[a].total_return() > trajs[b].total_return();
    });

    for (int k = 0; k < keep && k < static_cast<int>(order.size()); ++k) {
      const Trajectory& traj = trajs[order[k]];
      const size_t t_len = traj.length();
      for (size_t t = 0; t < t_len; ++t) {
        // Diagnostic partial lookahead sum; the naive pool itself samples
        // uniformly and never consults these.
        double score = 0.0;
        for (size_t i = t; i < std::min(t + static_cast<size_t>(lambda), t_len); ++i)
          score += traj.steps[i].reward;
        pool.push_back({traj.steps[t].state, traj.steps[t].obs, score, 0,
                        std::numeric_limits<double>::quiet_NaN()});
      }
    }
  }
  return pool;
}

}  // namespace relaygen
