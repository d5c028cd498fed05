#pragma once

#include "relaygen/agent.hpp"

namespace relaygen {

struct Td3Hyperparams {
  std::vector<int> hidden = {256, 256};
  double lr = 3e-4;
  double gamma = 0.99;
  double tau = 0.005;
  double expl_noise = 0.1;    // stddev of exploration noise on the action
  double target_noise = 0.2;  // stddev of smoothing noise on target actions
  double noise_clip = 0.5;
  int policy_delay = 2;
  int batch_size = 256;
  uint64_t start_steps = 10000;
  uint64_t update_after = 1000;
  uint64_t replay_capacity = 1000000;

  std::string canonical_text(const std::string& algorithm_id) const;
  static Td3Hyperparams from_text(const std::string& text);
};

// Gradient bundles mirroring the two phases of Td3Agent::update(). On delayed
// steps update() is exactly: critic gradients -> Adam, then actor gradients at
// the stepped critics -> Adam, Polyak on all three targets. `noise_raw` holds
// unscaled unit normals; scaling by target_noise and clipping happen inside.
struct Td3CriticGrads {
  double critic_loss = 0.0;
  double mean_q = 0.0;  // mean of min(Q1, Q2) on the batch actions
  VecD targets;
  MlpGrads q1_grad, q2_grad;
};

struct Td3ActorGrads {
  double actor_loss = 0.0;
  MlpGrads policy_grad;
};

// Twin-delayed deterministic actor-critic: same interface as SacAgent with a
// deterministic tanh policy, clipped target smoothing and a delayed actor.
class Td3Agent : public Agent {
 public:
  static constexpr const char* kAlgorithmId = "td3";

  Td3Agent(const std::string& env_id, int obs_dim, int act_dim, const Td3Hyperparams& hp,
           Rng& init_rng);

  const std::string& algorithm_id() const override { return algo_id_; }
  const std::string& env_id() const override { return env_id_; }
  int obs_dim() const override { return obs_dim_; }
  int act_dim() const override { return act_dim_; }
  const Td3Hyperparams& hyperparams() const { return hp_; }

  ActionVector act(const Observation& obs, ActMode mode, Rng& rng) const override;
  double q_value(const Observation& obs, const ActionVector& action) const override;
  UpdateDiagnostics update(const TransitionBatch& batch, Rng& rng) override;
  // The two gradient phases of update(), at the current weights. `noise_raw`
  // is act_dim x batch of unit normals consumed in column-major batch order.
  Td3CriticGrads compute_critic_grads(const TransitionBatch& batch, const MatD& noise_raw) const;
  Td3ActorGrads compute_actor_grads(const TransitionBatch& batch) const;
  std::string hyperparams_text() const override;
  void write_body(std::ostream& out) const override;
  static std::unique_ptr<Td3Agent> read_body(std::istream& in, const std::string& env_id,
                                             const std::string& hyper_text);

  // Exposed for tests (gradient checks drive the nets directly).
  Mlp& policy() { return policy_; }
  Mlp& critic1() { return q1_; }
  Mlp& critic2() { return q2_; }
  const Mlp& target_policy() const { return policy_target_; }
  const Mlp& target_critic1() const { return q1_target_; }
  const Mlp& target_critic2() const { return q2_target_; }

 private:
  Td3Agent(const std::string& env_id, const Td3Hyperparams& hp);

  std::string algo_id_ = kAlgorithmId;
  std::string env_id_;
  int obs_dim_ = 0;
  int act_dim_ = 0;
  Td3Hyperparams hp_;

  Mlp policy_, policy_target_;  // obs -> pre-tanh action
  Mlp q1_, q2_, q1_target_, q2_target_;
  AdamState policy_opt_, q1_opt_, q2_opt_;
  uint64_t update_count_ = 0;
  AdamParams adam_;
};

}  // namespace relaygen
