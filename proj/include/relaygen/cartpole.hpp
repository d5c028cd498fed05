#pragma once

#include "relaygen/env.hpp"

namespace relaygen {

struct CartPoleBalanceParams {
  double m_cart = 1.0;
  double m_pole = 0.1;
  double half_length = 0.5;  // pivot to pole center of mass
  double gravity = 9.8;
  double force_max = 10.0;   // Newtons at |action| = 1
  double dt = 0.02;
  double theta_bound = 0.2095;  // rad, ~12 degrees
  double x_bound = 2.4;
  double action_cost = 0.01;
  int max_episode_steps = 1000;
};

// Continuous-force cartpole balance.  Action is a 1-vector in [-1, 1] scaled
// to a horizontal force on the cart; reward is 1 per step minus a quadratic
// action cost; the episode terminates when the pole or cart leaves its
// healthy interval.
class CartPoleBalanceEnv : public Env {
 public:
  static constexpr const char* kId = "cartpole-balance-v1";

  explicit CartPoleBalanceEnv(const CartPoleBalanceParams& params = {});

  const std::string& env_id() const override { return id_; }
  const EnvSpec& spec() const override { return spec_; }
  const CartPoleBalanceParams& params() const { return params_; }

  std::pair<Observation, EnvState> reset(uint64_t seed) const override;
  StepResult step(const EnvState& state, const ActionVector& action) const override;
  Observation observe(const EnvState& state) const override;
  std::unique_ptr<Env> clone() const override;

 private:
  void validate(const EnvState& state) const;
  bool violates_health(const EnvState& state) const;

  std::string id_ = kId;
  CartPoleBalanceParams params_;
  EnvSpec spec_;
};

}  // namespace relaygen
