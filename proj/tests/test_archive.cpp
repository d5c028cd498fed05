#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "relaygen/archive.hpp"
#include "relaygen/binary_io.hpp"
#include "relaygen/cartpole.hpp"

using namespace relaygen;
namespace fs = std::filesystem;

namespace {

// Policy stub whose value function is just the first observation component,
// so value-ordering in tests is fully scripted.
struct FakeAgent : Agent {
  std::string algo = "fake";
  std::string env = "cartpole-balance-v1";
  mutable int q_calls = 0;

  const std::string& algorithm_id() const override { return algo; }
  const std::string& env_id() const override { return env; }
  int obs_dim() const override { return 2; }
  int act_dim() const override { return 1; }
  ActionVector act(const Observation&, ActMode, Rng&) const override {
    return ActionVector{{0.0}};
  }
  double q_value(const Observation& obs, const ActionVector&) const override {
    ++q_calls;
    return obs.values[0];
  }
  UpdateDiagnostics update(const TransitionBatch&, Rng&) override { return {}; }
  std::string hyperparams_text() const override { return "{}"; }
  void write_body(std::ostream&) const override {}
};

ScoredState entry_with(double score, double obs0) {
  ScoredState e;
  e.score = score;
  e.observation.values = {obs0, 0.0};
  return e;
}

Trajectory ramp_trajectory(int t_count, bool terminated) {
  Trajectory traj;
  for (int t = 0; t < t_count; ++t) {
    TrajectoryStep s;
    s.reward = static_cast<double>(t);
    traj.steps.push_back(s);
  }
  traj.terminated = terminated;
  traj.truncated = !terminated;
  return traj;
}

}  // namespace

TEST_CASE("qualification threshold is the k-th largest epoch score") {
  StateArchive archive;
  CHECK_FALSE(archive.has_omega());
  CHECK(archive.is_qualified(-1e9));  // bootstrap epoch: everything qualifies

  // An epoch with no scores leaves the bootstrap state alone.
  archive.update_threshold(0.5);
  CHECK_FALSE(archive.has_omega());

  for (double s : {4.0, 9.0, 1.0, 7.0, 3.0, 10.0, 2.0, 8.0, 5.0, 6.0})
    archive.record_epoch_score(s);
  archive.update_threshold(0.3);  // k = ceil(0.3 * 10) = 3 -> third largest
  CHECK(archive.has_omega());
  CHECK(archive.omega() == 8.0);
  CHECK(archive.omega_max() == 8.0);
  CHECK(archive.latest_epoch_scores().empty());

  CHECK(archive.is_qualified(8.0));  // the boundary score qualifies
  CHECK(archive.is_qualified(9.5));
  CHECK_FALSE(archive.is_qualified(7.999));

  // A weaker epoch lowers omega but not its running max.
  archive.record_epoch_score(1.0);
  archive.record_epoch_score(2.0);
  archive.update_threshold(0.3);  // k = 1 -> largest = 2
  CHECK(archive.omega() == 2.0);
  CHECK(archive.omega_max() == 8.0);

  // eta = 1 keeps everything: omega is the minimum.
  archive.record_epoch_score(5.0);
  archive.record_epoch_score(3.0);
  archive.update_threshold(1.0);
  CHECK(archive.omega() == 3.0);
}

TEST_CASE("archive add honors the capacity cap") {
  Rng rng(3);
  StateArchive unbounded(0);
  for (int i = 0; i < 100; ++i) unbounded.add(entry_with(i, 0.0), rng);
  CHECK(unbounded.size() == 100);

  StateArchive capped(2);
  const uint64_t before = rng.state().counter;
  capped.add(entry_with(1.0, 0.0), rng);
  capped.add(entry_with(2.0, 0.0), rng);
  CHECK(rng.state().counter == before);  // no eviction draws while below cap

  capped.add(entry_with(3.0, 0.0), rng);
  CHECK(rng.state().counter > before);
  CHECK(capped.size() == 2);

  CHECK_THROWS_AS(capped.add(entry_with(std::nan(""), 0.0), rng), std::invalid_argument);
}

TEST_CASE("next-lambda-sum scoring truncates fairly") {
  const int lambda = 3;

  // Terminal trajectory: every state is scored; sums near the end are
  // partial, which is exactly the low-score signal the archive wants.
  const Trajectory dead = ramp_trajectory(10, true);
  const auto scores = score_trajectory_states(dead, lambda, ScoringMode::kNextLambdaSum);
  REQUIRE(scores.size() == 10);
  for (int t = 0; t < 10; ++t) {
    CHECK(scores[t].first == static_cast<size_t>(t));
    double expected = 0.0;
    for (int u = t; u < std::min(t + lambda, 10); ++u) expected += u;
    CHECK(scores[t].second == expected);
  }
  CHECK(scores[9].second == 9.0);  // the partial one-step sum survives

  // Truncated trajectory: indices without a full lambda lookahead are
  // excluded instead of being scored low.
  const Trajectory cut = ramp_trajectory(10, false);
  const auto cut_scores = score_trajectory_states(cut, lambda, ScoringMode::kNextLambdaSum);
  REQUIRE(cut_scores.size() == 8);  // t = 0..7
  CHECK(cut_scores.back().first == 7);
  CHECK(cut_scores.back().second == 7.0 + 8.0 + 9.0);

  // Too short to score at all when truncated.
  CHECK(score_trajectory_states(ramp_trajectory(2, false), lambda,
                                ScoringMode::kNextLambdaSum)
            .empty());
  // ...but a terminal stub still is.
  CHECK(score_trajectory_states(ramp_trajectory(1, true), lambda, ScoringMode::kNextLambdaSum)
            .size() == 1);
}

TEST_CASE("average-remaining scoring covers every state") {
  const Trajectory traj = ramp_trajectory(4, false);  // rewards 0 1 2 3
  const auto scores = score_trajectory_states(traj, 50, ScoringMode::kAverageRemaining);
  REQUIRE(scores.size() == 4);
  CHECK(scores[0].second == (0.0 + 1.0 + 2.0 + 3.0) / 4.0);
  CHECK(scores[1].second == (1.0 + 2.0 + 3.0) / 3.0);
  CHECK(scores[3].second == 3.0);
}

TEST_CASE("start-state selection takes the lowest-value qualified candidate") {
  StateArchive archive;
  Rng rng(5);
  // Set omega_max = 10 through a single-score epoch.
  archive.record_epoch_score(10.0);
  archive.update_threshold(1.0);
  CHECK(archive.omega_max() == 10.0);

  // gamma_ratio 1.6: entries need score >= 10 / 1.6 = 6.25 to be revisited.
  archive.add(entry_with(10.0, 5.0), rng);  // eligible, q = 5
  archive.add(entry_with(7.0, 1.0), rng);   // eligible, q = 1  <- lowest value
  archive.add(entry_with(5.0, -9.0), rng);  // filtered out by gamma_ratio

  FakeAgent agent;
  const auto pick = select_start_state(archive, agent, 5, 1.6, rng);
  REQUIRE(pick.has_value());
  CHECK(*pick == 1);
  CHECK(agent.q_calls >= 2);  // both eligible candidates were valued

  // n_candidates = 1 samples without ever touching the critic.
  FakeAgent blind;
  const auto single = select_start_state(archive, blind, 1, 1.6, rng);
  REQUIRE(single.has_value());
  CHECK(blind.q_calls == 0);
  CHECK(*single != 2);  // the filtered entry can never come back
}

TEST_CASE("start-state selection falls back when nothing qualifies") {
  Rng rng(1);
  FakeAgent agent;
  StateArchive empty;
  CHECK_FALSE(select_start_state(empty, agent, 5, 1.6, rng).has_value());

  StateArchive weak;
  weak.record_epoch_score(100.0);
  weak.update_threshold(1.0);  // omega_max = 100
  weak.add(entry_with(10.0, 0.0), rng);
  weak.add(entry_with(20.0, 0.0), rng);
  CHECK_FALSE(select_start_state(weak, agent, 5, 1.6, rng).has_value());
}

TEST_CASE("state pool file round trips") {
  CartPoleBalanceEnv env;
  std::vector<ScoredState> entries;
  Rng rng(8);
  for (int i = 0; i < 5; ++i) {
    ScoredState e;
    EnvState s = env.reset(i).second;
    for (int k = 0; k < i; ++k) s = env.step(s, ActionVector{{0.25}}).state;
    e.env_state = s;
    e.observation = env.observe(s);
    e.score = -2.25 + i;  // exactly representable in f32
    e.epoch = 3 + i;
    e.q_at_insert = 0.5 * i;
    entries.push_back(e);
  }

  std::ostringstream out;
  write_state_pool(out, env.env_id(), entries);
  std::istringstream in(out.str());
  const std::vector<ScoredState> back = read_state_pool(in, env);
  REQUIRE(back.size() == entries.size());
  for (size_t i = 0; i < back.size(); ++i) {
    CHECK(back[i].env_state == entries[i].env_state);
    CHECK(back[i].observation.values == env.observe(entries[i].env_state).values);
    CHECK(back[i].score == entries[i].score);
    CHECK(back[i].epoch == entries[i].epoch);
    CHECK(back[i].q_at_insert == entries[i].q_at_insert);
  }

  // A pool written for one env refuses to load into another.
  std::istringstream in2(out.str());
  const auto hopper = make_env("planar-hopper-v1");
  CHECK_THROWS_AS((void)read_state_pool(in2, *hopper), FormatError);

  // File-level helpers agree with the stream form.
  const fs::path dir = fs::path("unit_work") / "archive";
  fs::create_directories(dir);
  const std::string path = (dir / "pool.rgsa").string();
  save_state_pool(path, env.env_id(), entries);
  const std::vector<ScoredState> from_file = load_state_pool(path, env);
  CHECK(from_file.size() == entries.size());
  CHECK(from_file[2].score == entries[2].score);
}

TEST_CASE("pool csv export carries one labeled row per entry") {
  CartPoleBalanceEnv env;
  std::vector<ScoredState> entries;
  for (int i = 0; i < 3; ++i) {
    ScoredState e;
    e.env_state = env.reset(i).second;
    e.observation = env.observe(e.env_state);
    e.score = 1.5 * i;
    e.epoch = i;
    e.q_at_insert = -0.25;
    entries.push_back(e);
  }
  const fs::path dir = fs::path("unit_work") / "archive";
  fs::create_directories(dir);
  const std::string path = (dir / "pool.csv").string();
  export_pool_csv(path, entries);

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "epoch,score,q_at_insert,obs0,obs1,obs2,obs3");
  int rows = 0;
  while (std::getline(in, line)) {
    if (!line.empty()) ++rows;
    if (rows == 2) CHECK(line.substr(0, 6) == "1,1.5,");
  }
  CHECK(rows == 3);
}
