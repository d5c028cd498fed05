#pragma once

#include <memory>
#include <ostream>
#include <string>

#include "relaygen/env.hpp"
#include "relaygen/mlp.hpp"
#include "relaygen/rng.hpp"

namespace relaygen {

enum class ActMode {
  kDeterministic,  // policy mean / greedy action
  kStochastic,     // exploration action
};

struct TransitionBatch {
  MatX obs;       // obs_dim x batch
  MatX actions;   // act_dim x batch
  MatX next_obs;  // obs_dim x batch
  VecX rewards;   // batch
  VecX done;      // 1.0 where the transition terminated (time limits excluded)
  int size = 0;
};

struct UpdateDiagnostics {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
  double mean_q = 0.0;
};

// A trainable policy with critics.  act() and q_value() are const so a
// loaded agent can be evaluated from many threads concurrently.
class Agent {
 public:
  virtual ~Agent() = default;

  virtual const std::string& algorithm_id() const = 0;
  virtual const std::string& env_id() const = 0;
  virtual int obs_dim() const = 0;
  virtual int act_dim() const = 0;

  virtual ActionVector act(const Observation& obs, ActMode mode, Rng& rng) const = 0;

  // Conservative value estimate: min over the twin critics of Q(s, a).
  virtual double q_value(const Observation& obs, const ActionVector& action) const = 0;

  virtual UpdateDiagnostics update(const TransitionBatch& batch, Rng& rng) = 0;

  // Canonical hyperparameter text (sorted-key JSON) used in checkpoints.
  virtual std::string hyperparams_text() const = 0;

  // Algorithm-specific checkpoint body (everything after the common header).
  virtual void write_body(std::ostream& out) const = 0;
};

}  // namespace relaygen
