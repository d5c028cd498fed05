#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>
#include <vector>

#include "doctest.h"
#include "relaygen/cartpole.hpp"
#include "relaygen/checkpoint.hpp"
#include "relaygen/sac.hpp"
#include "relaygen/train.hpp"

using namespace relaygen;
namespace fs = std::filesystem;

namespace {

struct FakeAgent : Agent {
  std::string algo = "fake";
  std::string env = "cartpole-balance-v1";
  const std::string& algorithm_id() const override { return algo; }
  const std::string& env_id() const override { return env; }
  int obs_dim() const override { return 4; }
  int act_dim() const override { return 1; }
  ActionVector act(const Observation&, ActMode, Rng&) const override {
    return ActionVector{{0.0}};
  }
  double q_value(const Observation& obs, const ActionVector&) const override {
    return obs.values[0];
  }
  UpdateDiagnostics update(const TransitionBatch&, Rng&) override { return {}; }
  std::string hyperparams_text() const override { return "{}"; }
  void write_body(std::ostream&) const override {}
};

SacHyperparams micro_sac() {
  SacHyperparams hp;
  hp.hidden = {8};
  hp.batch_size = 16;
  hp.start_steps = 50;
  hp.update_after = 60;
  return hp;
}

TrainerOptions micro_options() {
  TrainerOptions opt;
  opt.batch_size = 16;
  opt.start_steps = 50;
  opt.update_after = 60;
  opt.replay_capacity = 0;
  return opt;
}

// A synthetic but restorable episode: real reset states with scripted rewards.
Trajectory scripted_episode(const Env& env, int length, double reward) {
  Trajectory traj;
  for (int t = 0; t < length; ++t) {
    TrajectoryStep s;
    s.state = env.reset(1000 + t).second;
    s.obs = env.observe(s.state);
    s.reward = reward;
    traj.steps.push_back(std::move(s));
  }
  traj.truncated = true;
  return traj;
}

}  // namespace

TEST_CASE("training consumes exactly the configured env-step budget") {
  CartPoleBalanceEnv env;
  Rng init(4);
  SacAgent agent(env.env_id(), 4, 1, micro_sac(), init);
  Rng rng = make_run_stream(3, 0, stream_tag::kTrainer);
  const TrainLog log = train_ordinary(agent, env, 500, micro_options(), rng);

  CHECK(log.env_steps == 500);
  uint64_t length_sum = 0;
  for (const auto& e : log.episodes) length_sum += e.length;
  CHECK(length_sum == 500);
  CHECK(log.episodes.back().end_step == 500);

  // One update per env step once update_after transitions are in.
  CHECK(log.updates == 500 - 60 + 1);
  CHECK(log.d0_starts == log.episodes.size());
  CHECK(log.archive_starts == 0);
  CHECK(log.final_alpha > 0.0);
  CHECK(log.episodes.size() > 3);  // untrained cartpole dies well within 500 steps
}

TEST_CASE("training rejects a mismatched env and an empty budget is a no-op") {
  CartPoleBalanceEnv env;
  Rng init(4);
  SacAgent wrong("planar-hopper-v1", 6, 2, micro_sac(), init);
  Rng rng(1);
  CHECK_THROWS_AS((void)train_ordinary(wrong, env, 100, micro_options(), rng),
                  std::invalid_argument);

  SacAgent agent(env.env_id(), 4, 1, micro_sac(), init);
  const uint64_t counter = rng.state().counter;
  const TrainLog log = train_ordinary(agent, env, 0, micro_options(), rng);
  CHECK(log.env_steps == 0);
  CHECK(log.episodes.empty());
  CHECK(rng.state().counter == counter);
}

TEST_CASE("sta training with p0 = 0 replays ordinary training bit for bit") {
  CartPoleBalanceEnv env;
  Rng ia(55), ib(55);
  SacAgent ordinary_agent(env.env_id(), 4, 1, micro_sac(), ia);
  SacAgent sta_agent(env.env_id(), 4, 1, micro_sac(), ib);

  Rng ra = make_run_stream(7, 2, stream_tag::kTrainer);
  Rng rb = make_run_stream(7, 2, stream_tag::kTrainer);

  const TrainLog a = train_ordinary(ordinary_agent, env, 600, micro_options(), ra);

  StaConfig cfg;
  cfg.p0 = 0.0;
  cfg.l_max = env.spec().max_episode_steps;  // match the d0 horizon
  cfg.l_r = 30;
  cfg.lambda = 10;
  const StaTrainResult b = sta_train(sta_agent, env, 600, micro_options(), cfg, rb);

  CHECK(ra.state() == rb.state());
  CHECK(a.updates == b.log.updates);
  REQUIRE(a.episodes.size() == b.log.episodes.size());
  for (size_t i = 0; i < a.episodes.size(); ++i) {
    CHECK(a.episodes[i].end_step == b.log.episodes[i].end_step);
    CHECK(a.episodes[i].episode_return == b.log.episodes[i].episode_return);
    CHECK(a.episodes[i].length == b.log.episodes[i].length);
  }
  for (size_t l = 0; l < ordinary_agent.policy().layer_count(); ++l) {
    CHECK(ordinary_agent.policy().weights[l] == sta_agent.policy().weights[l]);
    CHECK(ordinary_agent.critic1().weights[l] == sta_agent.critic1().weights[l]);
    CHECK(ordinary_agent.critic2().weights[l] == sta_agent.critic2().weights[l]);
  }
  CHECK(ordinary_agent.alpha() == sta_agent.alpha());

  // The archive still filled up from the episodes it watched.
  CHECK(b.archive.size() > 0);
  // All starts were plain d0 — the scheduler never spent an extra draw.
  CHECK(b.log.d0_starts == a.d0_starts);
  CHECK(b.log.archive_starts == 0);
  CHECK(b.log.fallback_starts == 0);
}

TEST_CASE("sta scheduler mixes archive and d0 starts at rate p0") {
  CartPoleBalanceEnv env;
  FakeAgent agent;
  StaConfig cfg;
  cfg.p0 = 0.9;
  cfg.l_r = 25;
  cfg.l_max = 200;
  cfg.lambda = 5;
  StaStartScheduler scheduler(cfg, Rng(99));

  // Before anything is archived, archive draws fall back to d0 at l_max.
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    const auto start = scheduler.next_start(env, agent, rng);
    CHECK((start.kind == EpisodeStartKind::kFallbackD0 ||
           start.kind == EpisodeStartKind::kD0));
    CHECK(start.horizon == 200);
  }

  const Trajectory episode = scripted_episode(env, 40, 1.0);
  scheduler.on_episode_end(episode, agent, 40);
  // Truncated episode, lambda 5: states 0..35 are scorable, all qualify in
  // the bootstrap epoch.
  CHECK(scheduler.archive().size() == 36);
  CHECK_FALSE(scheduler.archive().has_omega());

  int archive_starts = 0, d0_starts = 0;
  for (int i = 0; i < 3000; ++i) {
    const auto start = scheduler.next_start(env, agent, rng);
    if (start.kind == EpisodeStartKind::kArchive) {
      ++archive_starts;
      CHECK(start.horizon == 25);
    } else {
      REQUIRE(start.kind == EpisodeStartKind::kD0);
      ++d0_starts;
      CHECK(start.horizon == 200);
    }
  }
  CHECK(archive_starts + d0_starts == 3000);
  CHECK(archive_starts > 2600);  // expected 2700, bound is ~6 sigma
  CHECK(archive_starts < 2800);
}

TEST_CASE("sta scheduler raises the bar once an epoch completes") {
  CartPoleBalanceEnv env;
  FakeAgent agent;
  StaConfig cfg;
  cfg.p0 = 0.9;
  cfg.lambda = 5;
  cfg.eta_sta = 0.5;
  cfg.epoch_steps = 100;
  StaStartScheduler scheduler(cfg, Rng(1));

  scheduler.on_episode_end(scripted_episode(env, 40, 1.0), agent, 40);
  CHECK_FALSE(scheduler.archive().has_omega());  // epoch not finished yet

  scheduler.on_episode_end(scripted_episode(env, 40, 1.0), agent, 150);
  CHECK(scheduler.archive().has_omega());  // crossed the 100-step epoch line
  const double omega = scheduler.archive().omega();
  CHECK(omega == 5.0);  // every full 5-step lookahead of reward 1.0

  // A bad stretch no longer makes it into the archive.
  const size_t before = scheduler.archive().size();
  scheduler.on_episode_end(scripted_episode(env, 40, -1.0), agent, 190);
  CHECK(scheduler.archive().size() == before);
}

TEST_CASE("pool scheduler draws restart states uniformly at rate p0") {
  CartPoleBalanceEnv env;
  FakeAgent agent;
  NaiveConfig cfg;
  cfg.p0 = 0.9;
  cfg.l_r = 10;
  cfg.l_max = 77;

  std::vector<ScoredState> pool;
  for (int i = 0; i < 20; ++i) {
    ScoredState e;
    e.env_state = env.reset(i).second;
    e.observation = env.observe(e.env_state);
    pool.push_back(std::move(e));
  }
  PoolStartScheduler scheduler(cfg, pool);

  Rng rng(23);
  int pool_starts = 0, d0_starts = 0;
  std::set<uint64_t> seen;  // which pool entries came back (tagged by reset draw)
  for (int i = 0; i < 2000; ++i) {
    const auto start = scheduler.next_start(env, agent, rng);
    if (start.kind == EpisodeStartKind::kPool) {
      ++pool_starts;
      CHECK(start.horizon == 10);
      for (int j = 0; j < 20; ++j)
        if (start.state == pool[j].env_state) seen.insert(j);
    } else {
      REQUIRE(start.kind == EpisodeStartKind::kD0);
      ++d0_starts;
      CHECK(start.horizon == 77);
    }
  }
  CHECK(pool_starts + d0_starts == 2000);
  CHECK(pool_starts > 1700);
  CHECK(pool_starts < 1900);
  CHECK(seen.size() == 20);  // every pool entry is reachable

  CHECK_THROWS_AS(PoolStartScheduler(cfg, {}), std::invalid_argument);
  NaiveConfig d0_only = cfg;
  d0_only.p0 = 0.0;
  PoolStartScheduler no_pool(d0_only, {});
  CHECK(no_pool.next_start(env, agent, rng).kind == EpisodeStartKind::kD0);
}

TEST_CASE("naive training respects the pool horizon") {
  CartPoleBalanceEnv env;
  Rng init(9);
  SacAgent agent(env.env_id(), 4, 1, micro_sac(), init);

  NaiveConfig cfg;
  cfg.p0 = 0.9;
  cfg.l_r = 20;
  cfg.l_max = env.spec().max_episode_steps;

  std::vector<ScoredState> pool;
  for (int i = 0; i < 10; ++i) {
    ScoredState e;
    e.env_state = env.reset(i).second;
    e.observation = env.observe(e.env_state);
    pool.push_back(std::move(e));
  }

  Rng rng = make_run_stream(11, 0, stream_tag::kTrainer);
  const TrainLog log = naive_train(agent, env, 400, micro_options(), cfg, pool, rng);
  CHECK(log.env_steps == 400);
  CHECK(log.pool_starts > 0);
  for (const auto& e : log.episodes)
    if (e.start == EpisodeStartKind::kPool) CHECK(e.length <= 20);
}

TEST_CASE("pretrained pool keeps every state of the top trajectories") {
  CartPoleBalanceEnv env;
  const fs::path dir = fs::path("unit_work") / "train";
  fs::create_directories(dir);

  std::vector<std::string> paths;
  for (int i = 0; i < 2; ++i) {
    Rng init(100 + i);
    SacAgent agent(env.env_id(), 4, 1, micro_sac(), init);
    const std::string path = (dir / ("ck" + std::to_string(i) + ".stac")).string();
    save_agent_checkpoint(path, agent, 0, RngState{});
    paths.push_back(path);
  }

  Rng rng(7);
  std::vector<std::string> warnings;
  const std::vector<ScoredState> pool =
      build_pretrained_pool(paths, env, 4, 0.5, 10, rng, &warnings);
  CHECK(warnings.empty());

  // Replicate the harvest: same seeds, same policies, same keep rule.
  Rng replica(7);
  size_t expected = 0;
  EnvState first_kept_state;
  bool first_recorded = false;
  for (const std::string& path : paths) {
    AgentCheckpoint ck = load_agent_checkpoint(path);
    std::vector<Trajectory> trajs;
    for (int m = 0; m < 4; ++m) {
      const uint64_t seed = replica.next_u64();
      trajs.push_back(rollout_from_reset(env, *ck.agent, seed, env.spec().max_episode_steps,
                                         ActMode::kDeterministic, replica));
    }
    std::vector<int> order = {0, 1, 2, 3};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return trajs[a].total_return() > trajs[b].total_return();
    });
    for (int k = 0; k < 2; ++k) {
      expected += trajs[order[k]].length();
      if (!first_recorded) {
        first_kept_state = trajs[order[k]].steps[0].state;
        first_recorded = true;
      }
    }
  }
  CHECK(pool.size() == expected);
  REQUIRE(!pool.empty());
  CHECK(pool[0].env_state == first_kept_state);

  // Unreadable checkpoints are skipped with a warning, not fatal.
  std::vector<std::string> with_bogus = paths;
  with_bogus.insert(with_bogus.begin(), (dir / "missing.stac").string());
  Rng rng2(7);
  std::vector<std::string> warnings2;
  const auto pool2 = build_pretrained_pool(with_bogus, env, 4, 0.5, 10, rng2, &warnings2);
  REQUIRE(warnings2.size() == 1);
  CHECK(warnings2[0].find("missing.stac") != std::string::npos);
  CHECK(pool2.size() == pool.size());

  CHECK_THROWS_AS((void)build_pretrained_pool(paths, env, 0, 0.5, 10, rng, nullptr),
                  std::invalid_argument);
  CHECK_THROWS_AS((void)build_pretrained_pool(paths, env, 4, 0.0, 10, rng, nullptr),
                  std::invalid_argument);
}
