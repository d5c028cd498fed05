#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "relaygen/binary_io.hpp"
#include "relaygen/checkpoint.hpp"
#include "relaygen/replay_buffer.hpp"
#include "relaygen/sac.hpp"
#include "relaygen/td3.hpp"

using namespace relaygen;

namespace {

TransitionBatch make_batch(int obs_dim, int act_dim, int n, Rng& rng, double done_value) {
  TransitionBatch b;
  b.size = n;
  b.obs.resize(obs_dim, n);
  b.actions.resize(act_dim, n);
  b.next_obs.resize(obs_dim, n);
  b.rewards.resize(n);
  b.done.resize(n);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < obs_dim; ++i) b.obs(i, k) = static_cast<real_t>(rng.normal());
    for (int i = 0; i < obs_dim; ++i) b.next_obs(i, k) = static_cast<real_t>(rng.normal());
    for (int i = 0; i < act_dim; ++i) b.actions(i, k) = static_cast<real_t>(rng.uniform(-1, 1));
    b.rewards(k) = static_cast<real_t>(rng.normal());
    b.done(k) = static_cast<real_t>(done_value);
  }
  return b;
}

MatX normal_mat(int rows, int cols, Rng& rng) {
  MatX m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = static_cast<real_t>(rng.normal());
  return m;
}

SacHyperparams small_sac() {
  SacHyperparams hp;
  hp.hidden = {8, 8};
  hp.batch_size = 16;
  return hp;
}

Td3Hyperparams small_td3() {
  Td3Hyperparams hp;
  hp.hidden = {8, 8};
  hp.batch_size = 16;
  return hp;
}

Observation random_obs(int d, Rng& rng) {
  Observation o;
  for (int i = 0; i < d; ++i) o.values.push_back(rng.normal());
  return o;
}

}  // namespace

// ---- replay buffer ---------------------------------------------------------

TEST_CASE("replay buffer grows unbounded at capacity zero") {
  ReplayBuffer buf(0);
  for (int i = 0; i < 5000; ++i)
    buf.add(Transition{{float(i)}, {0.0f}, float(i), {float(i)}, false});
  CHECK(buf.size() == 5000);
  CHECK(buf[4999].reward == 4999.0f);
}

TEST_CASE("replay buffer evicts the oldest entries ring-style") {
  ReplayBuffer buf(3);
  for (int i = 0; i < 3; ++i)
    buf.add(Transition{{float(i)}, {0.0f}, float(i), {float(i)}, false});
  CHECK(buf.size() == 3);

  buf.add(Transition{{3.0f}, {0.0f}, 3.0f, {3.0f}, false});
  CHECK(buf.size() == 3);
  CHECK(buf[0].reward == 3.0f);  // slot of the oldest entry
  CHECK(buf[1].reward == 1.0f);
  CHECK(buf[2].reward == 2.0f);

  buf.add(Transition{{4.0f}, {0.0f}, 4.0f, {4.0f}, false});
  CHECK(buf[1].reward == 4.0f);
}

TEST_CASE("replay sampling is uniform-with-replacement in batch order") {
  ReplayBuffer buf(0);
  for (int i = 0; i < 7; ++i)
    buf.add(Transition{{float(10 + i), float(20 + i)}, {float(i) / 10}, float(i),
                       {float(30 + i), float(40 + i)}, i % 2 == 0});

  Rng rng(3), replica(3);
  const TransitionBatch b = buf.sample(12, rng);
  REQUIRE(b.size == 12);
  REQUIRE(b.obs.rows() == 2);
  for (int k = 0; k < 12; ++k) {
    const int idx = static_cast<int>(replica.below(7));
    CHECK(b.obs(0, k) == real_t(10 + idx));
    CHECK(b.obs(1, k) == real_t(20 + idx));
    CHECK(b.next_obs(1, k) == real_t(40 + idx));
    CHECK(b.rewards(k) == real_t(idx));
    CHECK(b.done(k) == (idx % 2 == 0 ? real_t(1) : real_t(0)));
  }
}

TEST_CASE("replay sampling rejects bad arguments") {
  ReplayBuffer empty(0);
  Rng rng(1);
  CHECK_THROWS_AS((void)empty.sample(4, rng), std::logic_error);
  empty.add(Transition{{1.0f}, {0.0f}, 0.0f, {1.0f}, false});
  CHECK_THROWS_AS((void)empty.sample(0, rng), std::invalid_argument);
}

// ---- sac -------------------------------------------------------------------

TEST_CASE("sac targets reduce to the reward on terminal transitions") {
  Rng init(11);
  SacAgent agent("cartpole-balance-v1", 3, 2, small_sac(), init);
  Rng rng(5);
  const TransitionBatch batch = make_batch(3, 2, 16, rng, 1.0);
  const MatX noise = normal_mat(2, 16, rng);
  const SacCriticGrads cg = agent.compute_critic_grads(batch, noise);
  REQUIRE(cg.targets.size() == 16);
  for (int k = 0; k < 16; ++k)
    CHECK(cg.targets(k) == static_cast<double>(batch.rewards(k)));
}

TEST_CASE("sac target critics start as exact copies") {
  Rng init(2);
  SacAgent agent("cartpole-balance-v1", 4, 1, small_sac(), init);
  const SacAgent& a = agent;
  CHECK(a.target_critic1().weights[0] == agent.critic1().weights[0]);
  CHECK(a.target_critic1().weights[2] == agent.critic1().weights[2]);
  CHECK(a.target_critic2().biases[1] == agent.critic2().biases[1]);
}

TEST_CASE("sac q_value is the min of the twin critics") {
  Rng init(8);
  SacAgent agent("cartpole-balance-v1", 3, 1, small_sac(), init);
  Rng rng(4);
  const Observation obs = random_obs(3, rng);
  const ActionVector act{{0.37}};

  VecX in(4);
  for (int i = 0; i < 3; ++i) in(i) = static_cast<real_t>(obs.values[i]);
  in(3) = real_t(0.37);
  const double q1 = static_cast<double>(mlp_forward(agent.critic1(), in)(0));
  const double q2 = static_cast<double>(mlp_forward(agent.critic2(), in)(0));
  CHECK(agent.q_value(obs, act) == std::min(q1, q2));
}

TEST_CASE("sac deterministic act is the squashed policy mean and uses no rng") {
  Rng init(3);
  SacAgent agent("cartpole-balance-v1", 4, 2, small_sac(), init);
  Rng rng(9);
  const Observation obs = random_obs(4, rng);

  const uint64_t counter_before = rng.state().counter;
  const ActionVector a = agent.act(obs, ActMode::kDeterministic, rng);
  CHECK(rng.state().counter == counter_before);

  VecX x(4);
  for (int i = 0; i < 4; ++i) x(i) = static_cast<real_t>(obs.values[i]);
  const VecX head = mlp_forward(agent.policy(), x);
  CHECK(a.values[0] == std::tanh(static_cast<double>(head(0))));
  CHECK(a.values[1] == std::tanh(static_cast<double>(head(1))));

  // Stochastic mode consumes exactly two uniforms per action dimension.
  const ActionVector s = agent.act(obs, ActMode::kStochastic, rng);
  CHECK(rng.state().counter == counter_before + 4);
  for (double v : s.values) {
    CHECK(v > -1.0);
    CHECK(v < 1.0);
  }
}

TEST_CASE("sac updates are a pure function of weights, batch, and rng") {
  Rng ia(55), ib(55);
  SacAgent a("cartpole-balance-v1", 4, 1, small_sac(), ia);
  SacAgent b("cartpole-balance-v1", 4, 1, small_sac(), ib);

  Rng data(77);
  const double init_alpha = a.alpha();
  for (int k = 0; k < 25; ++k) {
    const TransitionBatch batch = make_batch(4, 1, 16, data, k % 4 == 0 ? 1.0 : 0.0);
    Rng ua = make_run_stream(9, k, 1), ub = make_run_stream(9, k, 1);
    const UpdateDiagnostics da = a.update(batch, ua);
    const UpdateDiagnostics db = b.update(batch, ub);
    CHECK(da.critic_loss == db.critic_loss);
    CHECK(da.actor_loss == db.actor_loss);
    CHECK(da.alpha == db.alpha);
  }
  for (size_t l = 0; l < a.policy().layer_count(); ++l) {
    CHECK(a.policy().weights[l] == b.policy().weights[l]);
    CHECK(a.critic1().weights[l] == b.critic1().weights[l]);
  }
  CHECK(a.alpha() == b.alpha());
  CHECK(a.alpha() != init_alpha);  // the temperature is actually learning
}

TEST_CASE("sac polyak moves the targets by tau toward the stepped critics") {
  Rng init(21);
  SacHyperparams hp = small_sac();
  hp.tau = 0.25;  // large so the motion dominates float noise
  SacAgent agent("cartpole-balance-v1", 3, 1, hp, init);

  const MatX target_before = agent.target_critic1().weights[0];
  Rng data(6);
  const TransitionBatch batch = make_batch(3, 1, 16, data, 0.0);
  Rng u(13);
  (void)agent.update(batch, u);

  const MatX& critic_after = agent.critic1().weights[0];
  const MatX& target_after = agent.target_critic1().weights[0];
  for (int i = 0; i < target_after.rows(); ++i) {
    for (int j = 0; j < target_after.cols(); ++j) {
      const double expected = 0.75 * static_cast<double>(target_before(i, j)) +
                              0.25 * static_cast<double>(critic_after(i, j));
      CHECK(static_cast<double>(target_after(i, j)) == doctest::Approx(expected).epsilon(1e-5));
    }
  }
}

// ---- td3 -------------------------------------------------------------------

TEST_CASE("td3 act modes: greedy tanh head, clamped exploration noise") {
  Rng init(14);
  Td3Agent agent("cartpole-balance-v1", 3, 2, small_td3(), init);
  Rng rng(25);
  const Observation obs = random_obs(3, rng);

  const uint64_t before = rng.state().counter;
  const ActionVector det = agent.act(obs, ActMode::kDeterministic, rng);
  CHECK(rng.state().counter == before);

  VecX x(3);
  for (int i = 0; i < 3; ++i) x(i) = static_cast<real_t>(obs.values[i]);
  const VecX head = mlp_forward(agent.policy(), x);
  CHECK(det.values[0] == std::tanh(static_cast<double>(head(0))));
  CHECK(det.values[1] == std::tanh(static_cast<double>(head(1))));

  Rng noise_rng(31), replica(31);
  const ActionVector expl = agent.act(obs, ActMode::kStochastic, noise_rng);
  for (int i = 0; i < 2; ++i) {
    const double expected = std::clamp(det.values[i] + 0.1 * replica.normal(), -1.0, 1.0);
    CHECK(expl.values[i] == expected);
  }
}

TEST_CASE("td3 delays policy and target updates") {
  Rng init(5);
  Td3Agent agent("cartpole-balance-v1", 3, 1, small_td3(), init);  // policy_delay 2
  const MatX policy_w0 = agent.policy().weights[0];
  const MatX target_q1_w0 = agent.target_critic1().weights[0];
  const MatX critic_w0 = agent.critic1().weights[0];

  Rng data(41);
  const TransitionBatch batch = make_batch(3, 1, 16, data, 0.0);
  Rng u(1);
  (void)agent.update(batch, u);

  // Odd update: critics stepped, policy and all targets untouched.
  CHECK(agent.critic1().weights[0] != critic_w0);
  CHECK(agent.policy().weights[0] == policy_w0);
  CHECK(agent.target_critic1().weights[0] == target_q1_w0);

  (void)agent.update(batch, u);
  CHECK(agent.policy().weights[0] != policy_w0);
  CHECK(agent.target_critic1().weights[0] != target_q1_w0);
}

TEST_CASE("td3 terminal transitions bootstrap nothing") {
  Rng init(33);
  Td3Agent agent("cartpole-balance-v1", 4, 1, small_td3(), init);
  Rng rng(2);
  const TransitionBatch batch = make_batch(4, 1, 8, rng, 1.0);
  MatD noise_raw(1, 8);
  for (int k = 0; k < 8; ++k) noise_raw(0, k) = rng.normal();
  const Td3CriticGrads cg = agent.compute_critic_grads(batch, noise_raw);
  for (int k = 0; k < 8; ++k)
    CHECK(cg.targets(k) == static_cast<double>(batch.rewards(k)));
}

TEST_CASE("td3 updates are deterministic given the rng") {
  Rng ia(19), ib(19);
  Td3Agent a("planar-hopper-v1", 6, 2, small_td3(), ia);
  Td3Agent b("planar-hopper-v1", 6, 2, small_td3(), ib);
  Rng data(3);
  for (int k = 0; k < 10; ++k) {
    const TransitionBatch batch = make_batch(6, 2, 16, data, 0.0);
    Rng ua(100 + k), ub(100 + k);
    const UpdateDiagnostics da = a.update(batch, ua);
    const UpdateDiagnostics db = b.update(batch, ub);
    CHECK(da.critic_loss == db.critic_loss);
  }
  CHECK(a.policy().weights[0] == b.policy().weights[0]);
  CHECK(a.critic2().weights[1] == b.critic2().weights[1]);
}

// ---- hyperparameter text and checkpoints ------------------------------------

TEST_CASE("hyperparameter text round trips through from_text") {
  SacHyperparams hp = small_sac();
  hp.lr = 7e-4;
  hp.init_alpha = 0.11;
  const std::string text = hp.canonical_text("sac");
  const SacHyperparams back = SacHyperparams::from_text(text);
  CHECK(back.canonical_text("sac") == text);
  CHECK(back.lr == hp.lr);
  CHECK(back.hidden == hp.hidden);

  Td3Hyperparams td = small_td3();
  td.policy_delay = 3;
  const std::string td_text = td.canonical_text("td3");
  CHECK(Td3Hyperparams::from_text(td_text).canonical_text("td3") == td_text);
}

TEST_CASE("agent checkpoints round trip byte for byte") {
  for (const bool use_td3 : {false, true}) {
    Rng init(61);
    std::unique_ptr<Agent> agent;
    if (use_td3)
      agent = std::make_unique<Td3Agent>("planar-hopper-v1", 6, 2, small_td3(), init);
    else
      agent = std::make_unique<SacAgent>("planar-hopper-v1", 6, 2, small_sac(), init);

    // A couple of updates so optimizer moments are non-trivial.
    Rng data(8), u(9);
    for (int k = 0; k < 4; ++k) (void)agent->update(make_batch(6, 2, 16, data, 0.0), u);

    std::ostringstream out;
    const RngState trainer_rng{123, 456};
    write_agent_checkpoint(out, *agent, 10000, trainer_rng);
    const std::string bytes = out.str();

    std::istringstream in(bytes);
    AgentCheckpoint cp = read_agent_checkpoint(in);
    CHECK(cp.total_env_steps == 10000);
    CHECK(cp.trainer_rng == trainer_rng);
    CHECK(cp.agent->algorithm_id() == agent->algorithm_id());
    CHECK(cp.agent->env_id() == "planar-hopper-v1");
    CHECK(cp.agent->hyperparams_text() == agent->hyperparams_text());

    std::ostringstream out2;
    write_agent_checkpoint(out2, *cp.agent, cp.total_env_steps, cp.trainer_rng);
    CHECK(out2.str() == bytes);

    // The loaded policy behaves identically.
    Rng orng(5);
    const Observation obs = random_obs(6, orng);
    Rng r1(3), r2(3);
    CHECK(agent->act(obs, ActMode::kStochastic, r1).values ==
          cp.agent->act(obs, ActMode::kStochastic, r2).values);
    const ActionVector act{{0.2, -0.4}};
    CHECK(agent->q_value(obs, act) == cp.agent->q_value(obs, act));
  }
}

TEST_CASE("checkpoint reader rejects corrupted headers") {
  Rng init(1);
  SacAgent agent("cartpole-balance-v1", 4, 1, small_sac(), init);
  std::ostringstream out;
  write_agent_checkpoint(out, agent, 0, RngState{});
  std::string bytes = out.str();
  bytes[0] = 'Z';
  std::istringstream in(bytes);
  CHECK_THROWS_AS((void)read_agent_checkpoint(in), FormatError);

  std::istringstream truncated(out.str().substr(0, out.str().size() / 2));
  CHECK_THROWS_AS((void)read_agent_checkpoint(truncated), FormatError);
}
