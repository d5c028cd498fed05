#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "relaygen/cartpole.hpp"
#include "relaygen/relay.hpp"

using namespace relaygen;

namespace {

// Constant-force policy; the force value doubles as the agent's identity.
struct ConstAgent : Agent {
  std::string algo = "fake";
  std::string env = "cartpole-balance-v1";
  double force = 0.0;
  explicit ConstAgent(double f) : force(f) {}

  const std::string& algorithm_id() const override { return algo; }
  const std::string& env_id() const override { return env; }
  int obs_dim() const override { return 4; }
  int act_dim() const override { return 1; }
  ActionVector act(const Observation&, ActMode, Rng&) const override {
    return ActionVector{{force}};
  }
  double q_value(const Observation& obs, const ActionVector&) const override {
    return obs.values[0];
  }
  UpdateDiagnostics update(const TransitionBatch&, Rng&) override { return {}; }
  std::string hyperparams_text() const override { return "{}"; }
  void write_body(std::ostream&) const override {}
};

struct ThrowingAgent : ConstAgent {
  ThrowingAgent() : ConstAgent(0.0) {}
  ActionVector act(const Observation&, ActMode, Rng&) const override {
    throw std::runtime_error("synthetic act failure");
  }
};

Trajectory synthetic_traj(const Env& env, int t_count, double step_reward) {
  Trajectory traj;
  for (int t = 0; t < t_count; ++t) {
    TrajectoryStep s;
    s.state = env.reset(90000 + t).second;
    s.state.step_index = static_cast<uint64_t>(t);
    s.obs = env.observe(s.state);
    s.reward = step_reward;
    traj.steps.push_back(std::move(s));
  }
  traj.terminated = true;
  return traj;
}

ControllableState takeover_from_reset(const Env& env, uint64_t seed) {
  ControllableState cs;
  cs.env_state = env.reset(seed).second;
  cs.observation = env.observe(cs.env_state);
  return cs;
}

RelayOutcome ok_outcome(double q) {
  RelayOutcome o;
  o.failed = false;
  o.q_at_takeover = q;
  return o;
}

RelayOutcome failed_outcome(double q) {
  RelayOutcome o;
  o.failed = true;
  o.q_at_takeover = q;
  return o;
}

}  // namespace

// ---- takeover selection ----------------------------------------------------

TEST_CASE("takeover indices cover exactly the window that leaves a full horizon") {
  CartPoleBalanceEnv env;
  RelayConfig cfg;
  cfg.m_trajs = 3;
  cfg.eta = 1.0;
  cfg.k_per_traj = 5;
  cfg.horizon = 20;

  // T = horizon + 1 leaves exactly one legal index: t = 1.
  std::vector<Trajectory> trajs = {synthetic_traj(env, 21, 1.0), synthetic_traj(env, 24, 2.0),
                                   synthetic_traj(env, 20, 3.0)};
  Rng rng(5);
  const HarvestResult h = select_takeover_states(trajs, cfg, rng);
  CHECK(h.kept_trajectories == 3);
  CHECK(h.skipped_short == 1);  // the T = 20 trajectory has no room

  int from_short = 0;
  std::set<uint64_t> short_indices;
  for (const auto& cs : h.states) {
    CHECK(cs.t_index >= 1);
    if (cs.source_return == 21.0) {  // the T = 21 trajectory (reward 1/step)
      ++from_short;
      CHECK(cs.t_index == 1);
    } else {
      CHECK(cs.source_return == 48.0);  // T = 24, reward 2/step
      CHECK(cs.t_index <= 4);           // 1 .. T - horizon
      short_indices.insert(cs.t_index);
    }
  }
  CHECK(from_short == 1);           // a 1-element range is taken whole
  CHECK(short_indices.size() == 4); // k = 5 > range of 4: all distinct, all used
  CHECK(h.states.size() == 5);
}

TEST_CASE("the absolute return floor drops kept trajectories") {
  CartPoleBalanceEnv env;
  RelayConfig cfg;
  cfg.m_trajs = 3;
  cfg.eta = 1.0;
  cfg.k_per_traj = 1;
  cfg.horizon = 5;
  cfg.use_return_floor = true;
  cfg.return_floor = 25.0;

  std::vector<Trajectory> trajs = {synthetic_traj(env, 30, 1.0),   // return 30, kept
                                   synthetic_traj(env, 30, 0.5),   // return 15, floored
                                   synthetic_traj(env, 30, 2.0)};  // return 60, kept
  Rng rng(2);
  const HarvestResult h = select_takeover_states(trajs, cfg, rng);
  CHECK(h.kept_trajectories == 3);
  CHECK(h.skipped_floor == 1);
  CHECK(h.states.size() == 2);
  for (const auto& cs : h.states) CHECK(cs.source_return >= 25.0);
}

TEST_CASE("harvest ranks strangers' trajectories by return and is reproducible") {
  CartPoleBalanceEnv env;
  ConstAgent stranger(0.0);
  RelayConfig cfg;
  cfg.m_trajs = 10;
  cfg.eta = 0.5;
  cfg.k_per_traj = 2;
  cfg.horizon = 15;

  Rng rng(9);
  const HarvestResult h = harvest_controllable_states(env, stranger, cfg, rng);
  CHECK(h.kept_trajectories == 5);
  CHECK(h.states.size() <= 10);
  CHECK(!h.states.empty());

  // Ranks index the kept list in descending return order.
  double prev_best = 1e18;
  int prev_rank = -1;
  for (const auto& cs : h.states) {
    CHECK(cs.source_traj >= 0);
    CHECK(cs.source_traj < 5);
    if (cs.source_traj != prev_rank) {
      CHECK(cs.source_return <= prev_best);
      prev_best = cs.source_return;
      prev_rank = cs.source_traj;
    }
    CHECK(cs.t_index >= 1);
    CHECK(cs.env_state.step_index == cs.t_index);
  }

  Rng rng2(9);
  const HarvestResult again = harvest_controllable_states(env, stranger, cfg, rng2);
  REQUIRE(again.states.size() == h.states.size());
  for (size_t i = 0; i < h.states.size(); ++i) {
    CHECK(again.states[i].env_state == h.states[i].env_state);
    CHECK(again.states[i].stranger_remaining_return == h.states[i].stranger_remaining_return);
  }
}

// ---- relay rollouts ----------------------------------------------------------

TEST_CASE("surviving the full horizon passes even when the last step terminates") {
  CartPoleBalanceEnv env;
  ConstAgent agent(0.0);
  const ControllableState cs = takeover_from_reset(env, 3);

  RelayConfig cfg;
  cfg.horizon = 500;
  Rng rng(1);
  const RelayOutcome doomed = relay_rollout(env, agent, cs, cfg, rng);
  REQUIRE(doomed.valid);
  CHECK(doomed.failed);  // a passive cartpole cannot stand for 500 steps
  const int t_star = doomed.steps_survived;
  CHECK(t_star < 500);
  CHECK(doomed.test_return == doctest::Approx(double(t_star)));  // reward 1, zero action

  cfg.horizon = t_star;  // termination lands exactly on the horizon: pass
  const RelayOutcome edge = relay_rollout(env, agent, cs, cfg, rng);
  CHECK_FALSE(edge.failed);
  CHECK(edge.steps_survived == t_star);

  cfg.horizon = t_star + 1;  // one more required step: fail again
  const RelayOutcome fail = relay_rollout(env, agent, cs, cfg, rng);
  CHECK(fail.failed);
  CHECK(fail.steps_survived == t_star);

  // The takeover value probe is the agent's own conservative estimate.
  CHECK(fail.q_at_takeover == cs.observation.values[0]);
}

TEST_CASE("return-threshold mode judges the realized return") {
  CartPoleBalanceEnv env;
  ConstAgent agent(0.0);
  const ControllableState cs = takeover_from_reset(env, 3);

  RelayConfig cfg;
  cfg.horizon = 10;  // passive balance survives 10 steps from a gentle start
  cfg.failure_mode = FailureMode::kReturnThreshold;
  Rng rng(1);

  cfg.return_threshold = 9.5;
  const RelayOutcome pass = relay_rollout(env, agent, cs, cfg, rng);
  CHECK_FALSE(pass.failed);
  CHECK(pass.test_return == doctest::Approx(10.0));

  cfg.return_threshold = 10.5;
  const RelayOutcome fail = relay_rollout(env, agent, cs, cfg, rng);
  CHECK(fail.failed);
}

TEST_CASE("unrestorable takeover states are marked invalid") {
  CartPoleBalanceEnv env;
  ConstAgent agent(0.0);
  ControllableState alien = takeover_from_reset(env, 1);
  alien.env_state.env_id = "planar-hopper-v1";
  RelayConfig cfg;
  cfg.horizon = 10;
  Rng rng(1);
  const RelayOutcome o = relay_rollout(env, agent, alien, cfg, rng);
  CHECK_FALSE(o.valid);
}

TEST_CASE("outcome aggregation excludes invalid states and uses sample std") {
  std::vector<RelayOutcome> outcomes = {failed_outcome(0), ok_outcome(0), ok_outcome(0),
                                        ok_outcome(0)};
  outcomes[0].test_return = 2.0;
  outcomes[1].test_return = 4.0;
  outcomes[2].test_return = 6.0;
  outcomes[3].test_return = 8.0;
  const RelayCellStats s = aggregate_outcomes(outcomes);
  CHECK(s.n_states == 4);
  CHECK(s.failure_rate == 0.25);
  CHECK(s.failure_std == doctest::Approx(0.5));  // ddof = 1 over {1,0,0,0}
  CHECK(s.mean_return == doctest::Approx(5.0));

  RelayOutcome invalid;
  invalid.valid = false;
  outcomes.push_back(invalid);
  const RelayCellStats s2 = aggregate_outcomes(outcomes);
  CHECK(s2.n_states == 4);
  CHECK(s2.n_errors == 1);
  CHECK(s2.failure_rate == 0.25);

  const RelayCellStats single = aggregate_outcomes({failed_outcome(1.0)});
  CHECK(single.n_states == 1);
  CHECK(single.failure_rate == 1.0);
  CHECK(single.failure_std == 0.0);

  const RelayCellStats none = aggregate_outcomes({invalid});
  CHECK(none.n_states == 0);
  CHECK(none.failure_rate == 0.0);
}

// ---- full matrix -------------------------------------------------------------

TEST_CASE("relay matrix evaluates every pair and its results are thread-count invariant") {
  CartPoleBalanceEnv env;
  ConstAgent a(0.0), b(0.12);
  const std::vector<AgentRef> fleet = {{"agent-a", "", &a}, {"agent-b", "", &b}};

  RelayConfig cfg;
  cfg.m_trajs = 6;
  cfg.eta = 0.5;
  cfg.k_per_traj = 2;
  cfg.horizon = 12;

  const RelayMatrix m1 = relay_matrix(env, fleet, fleet, cfg, Rng(77), 1);
  REQUIRE(m1.cells.size() == 4);
  for (const RelayCell& cell : m1.cells) {
    CHECK(cell.error.empty());
    CHECK(cell.outcomes.size() == m1.harvests[cell.stranger_index].states.size());
    CHECK(cell.stats.n_states == static_cast<int>(cell.outcomes.size()));
  }

  // Reference rates are the diagonal self-pairs.
  CHECK(m1.reference_rate(0) == m1.cell(0, 0).stats.failure_rate);
  CHECK(m1.reference_rate(1) == m1.cell(1, 1).stats.failure_rate);

  const RelayMatrix m3 = relay_matrix(env, fleet, fleet, cfg, Rng(77), 3);
  for (size_t c = 0; c < m1.cells.size(); ++c) {
    CHECK(m1.cells[c].stats.failure_rate == m3.cells[c].stats.failure_rate);
    CHECK(m1.cells[c].stats.mean_return == m3.cells[c].stats.mean_return);
    REQUIRE(m1.cells[c].outcomes.size() == m3.cells[c].outcomes.size());
    for (size_t i = 0; i < m1.cells[c].outcomes.size(); ++i) {
      CHECK(m1.cells[c].outcomes[i].steps_survived == m3.cells[c].outcomes[i].steps_survived);
      CHECK(m1.cells[c].outcomes[i].q_at_takeover == m3.cells[c].outcomes[i].q_at_takeover);
    }
  }

  CHECK_THROWS_AS((void)relay_matrix(env, {}, fleet, cfg, Rng(1), 1), std::invalid_argument);
  const std::vector<AgentRef> dup = {{"same", "", &a}, {"same", "", &b}};
  CHECK_THROWS_AS((void)relay_matrix(env, dup, dup, cfg, Rng(1), 1), std::invalid_argument);
}

TEST_CASE("a failing test agent leaves a hole, not a crash") {
  CartPoleBalanceEnv env;
  ConstAgent good(0.0);
  ThrowingAgent bad;
  const std::vector<AgentRef> tests = {{"good", "", &good}, {"bad", "", &bad}};
  const std::vector<AgentRef> strangers = {{"good", "", &good}};

  RelayConfig cfg;
  cfg.m_trajs = 4;
  cfg.eta = 0.5;
  cfg.k_per_traj = 1;
  cfg.horizon = 10;

  const RelayMatrix m = relay_matrix(env, tests, strangers, cfg, Rng(3), 2);
  CHECK(m.cell(0, 0).error.empty());
  CHECK(m.cell(0, 0).stats.n_states > 0);
  CHECK_FALSE(m.cell(1, 0).error.empty());
  CHECK(m.cell(1, 0).outcomes.empty());
}

// ---- q-failure analysis --------------------------------------------------------

namespace {

RelayMatrix synthetic_matrix() {
  RelayMatrix m;
  m.test_ids = {"X", "Y"};
  m.test_algos = {"fake", "fake"};
  m.stranger_ids = {"X", "Y"};
  m.stranger_algos = {"fake", "fake"};
  m.horizon = 10;
  m.harvests.resize(2);
  auto state_with_ref = [](double ref) {
    ControllableState cs;
    cs.stranger_remaining_return = ref;
    return cs;
  };
  m.harvests[0].states = {state_with_ref(5.0), state_with_ref(6.0)};
  m.harvests[1].states = {state_with_ref(20.0), state_with_ref(3.0), state_with_ref(18.0),
                          state_with_ref(4.0)};

  m.cells.resize(4);
  auto fill = [&m](int t, int s, std::vector<RelayOutcome> outcomes) {
    RelayCell& cell = m.cells[static_cast<size_t>(t) * 2 + s];
    cell.test_index = t;
    cell.stranger_index = s;
    cell.outcomes = std::move(outcomes);
    cell.stats = aggregate_outcomes(cell.outcomes);
  };
  fill(0, 0, {ok_outcome(8.0), ok_outcome(9.0)});                     // X on its own states
  fill(0, 1, {ok_outcome(10.0), failed_outcome(1.0), ok_outcome(9.0), failed_outcome(2.0)});
  fill(1, 0, {ok_outcome(9.5), failed_outcome(1.5)});                 // Y on X's states
  fill(1, 1, {ok_outcome(7.0), ok_outcome(7.0), ok_outcome(7.0), ok_outcome(7.0)});
  return m;
}

}  // namespace

TEST_CASE("q-failure analysis pools takeover values by outcome") {
  const RelayMatrix m = synthetic_matrix();
  Rng rng(41);
  const QFailureAnalysis a = q_failure_analysis(m, 2000, rng);

  // succeeded {10, 9, 9.5} vs failed {1, 2, 1.5}.
  CHECK(a.succeeded_vs_failed.mean_a == doctest::Approx(9.5));
  CHECK(a.succeeded_vs_failed.mean_b == doctest::Approx(1.5));
  CHECK(a.succeeded_vs_failed.delta == doctest::Approx(8.0));
  CHECK(a.succeeded_vs_failed.ci_lower > 0.0);
  CHECK(a.succeeded_vs_failed.n_a == 3);
  CHECK(a.succeeded_vs_failed.n_b == 3);

  // own {8, 9, 7*4} against stranger-success {10, 9, 9.5}.
  CHECK(a.own_vs_stranger_success.mean_a == doctest::Approx((8 + 9 + 7 * 4.0) / 6));
  CHECK(a.own_vs_stranger_success.mean_b == doctest::Approx(9.5));

  // Reference returns split by the test agent's outcome.
  CHECK(a.mean_ref_failed == doctest::Approx((3.0 + 4.0 + 6.0) / 3));
  CHECK(a.mean_ref_succeeded == doctest::Approx((20.0 + 18.0 + 5.0) / 3));

  // Restricting to one test agent drops the other rows.
  Rng rng2(41);
  const QFailureAnalysis ax = q_failure_analysis(m, 2000, rng2, 0);
  CHECK(ax.succeeded_vs_failed.n_a == 2);  // {10, 9}
  CHECK(ax.mean_ref_failed == doctest::Approx(3.5));

  // Same seed, same bootstrap interval.
  Rng rng3(41);
  const QFailureAnalysis again = q_failure_analysis(m, 2000, rng3);
  CHECK(again.succeeded_vs_failed.ci_lower == a.succeeded_vs_failed.ci_lower);
}

TEST_CASE("q-failure analysis demands both outcome partitions") {
  RelayMatrix m = synthetic_matrix();
  for (RelayCell& cell : m.cells)
    for (RelayOutcome& o : cell.outcomes) o.failed = false;
  Rng rng(1);
  CHECK_THROWS_AS((void)q_failure_analysis(m, 100, rng), std::invalid_argument);
}

// ---- bootstrap and ordinary evaluation -------------------------------------------

TEST_CASE("bootstrap separates clearly distinct samples") {
  const std::vector<double> a = {5.0, 5.1, 4.9, 5.2, 4.8, 5.05};
  const std::vector<double> b = {1.0, 1.1, 0.9, 1.05};
  Rng rng(7);
  const BootstrapDelta d = bootstrap_mean_difference(a, b, 5000, rng);
  CHECK(d.n_a == 6);
  CHECK(d.n_b == 4);
  CHECK(d.delta == doctest::Approx(4.0).epsilon(0.01));
  CHECK(d.ci_lower > 3.5);
  CHECK(d.ci_lower < d.delta);

  // Degenerate equal samples: every resample gives exactly zero difference.
  const std::vector<double> c = {2.0, 2.0, 2.0};
  Rng rng2(9);
  const BootstrapDelta z = bootstrap_mean_difference(c, c, 1000, rng2);
  CHECK(z.delta == 0.0);
  CHECK(z.ci_lower == 0.0);
}

TEST_CASE("ordinary evaluation reports d0 behavior of the deterministic policy") {
  CartPoleBalanceEnv env;
  ConstAgent agent(0.0);
  Rng rng(31);
  const OrdinaryEvalStats s = evaluate_ordinary(env, agent, 6, 200, rng);
  CHECK(s.n_episodes == 6);
  CHECK(s.failure_rate == 1.0);  // passive balancing always tips over
  CHECK(s.mean_length > 5.0);
  CHECK(s.mean_length < 200.0);
  // Unit reward per step and no action cost: return equals episode length.
  CHECK(s.mean_return == doctest::Approx(s.mean_length));
}
