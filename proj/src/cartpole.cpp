#include "relaygen/cartpole.hpp"

#include <cmath>
#include <stdexcept>

namespace relaygen {

CartPoleBalanceEnv::CartPoleBalanceEnv(const CartPoleBalanceParams& params) : params_(params) {
  spec_.obs_dim = 4;
  spec_.act_dim = 1;
  spec_.max_episode_steps = params_.max_episode_steps;
  spec_.health_bounds = {
      {"x", {-params_.x_bound, params_.x_bound}},
      {"theta", {-params_.theta_bound, params_.theta_bound}},
  };
  spec_.start_distribution = {{"uniform_half_width", 0.05}};
}

std::pair<Observation, EnvState> CartPoleBalanceEnv::reset(uint64_t seed) const {
  Rng rng = Rng(seed).split(stream_tag::kEnvReset);
  EnvState s;
  s.env_id = id_;
  // Draw order: x, xdot, theta, thetadot.
  const double w = spec_.start_distribution.at("uniform_half_width");
  const double x = rng.uniform(-w, w);
  const double xdot = rng.uniform(-w, w);
  const double theta = rng.uniform(-w, w);
  const double thetadot = rng.uniform(-w, w);
  s.q = {x, theta};
  s.qdot = {xdot, thetadot};
  s.phase = 0;
  s.step_index = 0;
  s.rng_state = rng.state();
  return {observe(s), s};
}

Observation CartPoleBalanceEnv::observe(const EnvState& state) const {
  validate(state);
  return Observation{{state.q[0], state.qdot[0], state.q[1], state.qdot[1]}};
}

void CartPoleBalanceEnv::validate(const EnvState& state) const {
  if (state.env_id != id_)
    throw std::invalid_argument("state belongs to '" + state.env_id + "', not '" + id_ + "'");
  if (state.q.size() != 2 || state.qdot.size() != 2)
    throw std::invalid_argument("cartpole state must carry 2 coordinates and 2 velocities");
}

bool CartPoleBalanceEnv::violates_health(const EnvState& state) const {
  // Bounds are closed: a state exactly on a bound is still healthy.
  return std::abs(state.q[0]) > params_.x_bound || std::abs(state.q[1]) > params_.theta_bound;
}

StepResult CartPoleBalanceEnv::step(const EnvState& state, const ActionVector& action) const {
  validate(state);
  const std::vector<double> a = clamped_action(action, spec_.act_dim);
  const double force = a[0] * params_.force_max;

  double x = state.q[0];
  double theta = state.q[1];
  double xdot = state.qdot[0];
  double thetadot = state.qdot[1];

  // A state already out of bounds stays frozen and just reports terminated.
  const bool dead_on_entry = violates_health(state);
  if (!dead_on_entry) {
    const double total_mass = params_.m_cart + params_.m_pole;
    const double pole_ml = params_.m_pole * params_.half_length;

    const double sin_t = std::sin(theta);
    const double cos_t = std::cos(theta);
    const double temp = (force + pole_ml * thetadot * thetadot * sin_t) / total_mass;
    const double theta_acc =
        (params_.gravity * sin_t - cos_t * temp) /
        (params_.half_length * (4.0 / 3.0 - params_.m_pole * cos_t * cos_t / total_mass));
    const double x_acc = temp - pole_ml * theta_acc * cos_t / total_mass;

    // Semi-implicit Euler: velocities first, then positions.
    xdot += params_.dt * x_acc;
    x += params_.dt * xdot;
    thetadot += params_.dt * theta_acc;
    theta += params_.dt * thetadot;
  }

  StepResult r;
  r.state.env_id = id_;
  r.state.q = {x, theta};
  r.state.qdot = {xdot, thetadot};
  r.state.phase = 0;
  r.state.step_index = state.step_index + 1;
  r.state.rng_state = state.rng_state;

  r.reward = 1.0 - params_.action_cost * a[0] * a[0];
  r.terminated = dead_on_entry || violates_health(r.state);
  r.truncated = !r.terminated &&
                r.state.step_index >= static_cast<uint64_t>(params_.max_episode_steps);
  r.observation = observe(r.state);
  return r;
}

std::unique_ptr<Env> CartPoleBalanceEnv::clone() const {
  return std::make_unique<CartPoleBalanceEnv>(params_);
}

}  // namespace relaygen
