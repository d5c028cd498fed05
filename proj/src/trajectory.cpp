#include "relaygen/trajectory.hpp"

namespace relaygen {

Trajectory rollout(const Env& env, const Agent& agent, const EnvState& start, int max_steps,
                   ActMode mode, Rng& rng) {
  if (max_steps <= 0) throw std::invalid_argument("rollout: max_steps must be positive");
  Trajectory traj;
  EnvState state = start;
  Observation obs = env.restore(state);
  for (int t = 0; t < max_steps; ++t) {
    TrajectoryStep step;
    step.state = state;
    step.obs = obs;
    step.action = agent.act(obs, mode, rng);
    StepResult r = env.step(state, step.action);
    step.reward = r.reward;
    traj.steps.push_back(std::move(step));
    state = std::move(r.state);
    obs = std::move(r.observation);
    if (r.terminated) {
      traj.terminated = true;
      break;
    }
    if (r.truncated) {
      traj.truncated = true;
      break;
    }
  }
  if (!traj.terminated && !traj.truncated) traj.truncated = true;  // horizon cut
  traj.final_state = std::move(state);
  return traj;
}

Trajectory rollout_from_reset(const Env& env, const Agent& agent, uint64_t reset_seed,
                              int max_steps, ActMode mode, Rng& rng) {
  auto [obs, state] = env.reset(reset_seed);
  (void)obs;
  return rollout(env, agent, state, max_steps, mode, rng);
}

}  // namespace relaygen
