#pragma once

#include <optional>

#include "relaygen/agent.hpp"

namespace relaygen {

struct SacHyperparams {
  std::vector<int> hidden = {256, 256};
  double lr = 3e-4;
  double gamma = 0.99;
  double tau = 0.005;  // Polyak rate for the target critics
  double init_alpha = 0.2;
  bool learn_alpha = true;
  double target_entropy = 0.0;  // 0 selects the default of -act_dim
  // Trainer-side knobs carried with the agent so a checkpoint is
  // self-describing.
  int batch_size = 256;
  uint64_t start_steps = 10000;
  uint64_t update_after = 1000;
  uint64_t replay_capacity = 1000000;  // 0 = unbounded

  std::string canonical_text(const std::string& algorithm_id) const;
  static SacHyperparams from_text(const std::string& text);
};

// Loss values and analytic parameter gradients at the current weights, with
// the per-update sampling noise passed in explicitly (column b holds the
// standard-normal draws for batch element b).  update() is exactly: critic
// gradients -> Adam, then actor gradients at the stepped critics -> Adam,
// temperature step, Polyak.  Exposed so gradient checks can probe the
// production gradients directly.
struct SacCriticGrads {
  double critic_loss = 0.0;
  double mean_q = 0.0;  // mean of min(Q1, Q2) on the batch actions
  VecD targets;
  MlpGrads q1_grad, q2_grad;
};

struct SacActorGrads {
  double actor_loss = 0.0;
  double alpha_grad = 0.0;  // gradient of the temperature loss wrt log_alpha
  double mean_logp = 0.0;
  MlpGrads policy_grad;
};

// Soft actor-critic with twin critics, a tanh-squashed Gaussian policy and a
// learned temperature.
class SacAgent : public Agent {
 public:
  static constexpr const char* kAlgorithmId = "sac";

  SacAgent(const std::string& env_id, int obs_dim, int act_dim, const SacHyperparams& hp,
           Rng& init_rng);

  const std::string& algorithm_id() const override { return algo_id_; }
  const std::string& env_id() const override { return env_id_; }
  int obs_dim() const override { return obs_dim_; }
  int act_dim() const override { return act_dim_; }
  const SacHyperparams& hyperparams() const { return hp_; }
  double alpha() const { return std::exp(log_alpha_); }

  ActionVector act(const Observation& obs, ActMode mode, Rng& rng) const override;
  double q_value(const Observation& obs, const ActionVector& action) const override;
  UpdateDiagnostics update(const TransitionBatch& batch, Rng& rng) override;
  SacCriticGrads compute_critic_grads(const TransitionBatch& batch,
                                      const MatX& noise_target) const;
  SacActorGrads compute_actor_grads(const TransitionBatch& batch, const MatX& noise_actor) const;
  std::string hyperparams_text() const override;
  void write_body(std::ostream& out) const override;
  static std::unique_ptr<SacAgent> read_body(std::istream& in, const std::string& env_id,
                                             const std::string& hyper_text);

  // Exposed for tests (gradient checks drive the nets directly).
  Mlp& policy() { return policy_; }
  Mlp& critic1() { return q1_; }
  Mlp& critic2() { return q2_; }
  const Mlp& target_critic1() const { return q1_target_; }
  const Mlp& target_critic2() const { return q2_target_; }

 private:
  SacAgent(const std::string& env_id, const SacHyperparams& hp);  // deserialization shell

  std::string algo_id_ = kAlgorithmId;
  std::string env_id_;
  int obs_dim_ = 0;
  int act_dim_ = 0;
  SacHyperparams hp_;
  double target_entropy_ = 0.0;

  Mlp policy_;  // obs -> (mean, log_std), rows [0,d) and [d,2d)
  Mlp q1_, q2_, q1_target_, q2_target_;
  AdamState policy_opt_, q1_opt_, q2_opt_;
  double log_alpha_ = 0.0;
  ScalarAdam alpha_opt_;
  AdamParams adam_;
};

// Shared helper: soft target update dst = (1 - tau) * dst + tau * src.
void polyak_update(Mlp& dst, const Mlp& src, double tau);

}  // namespace relaygen
