#pragma once

#include <vector>

#include "relaygen/agent.hpp"
#include "relaygen/env.hpp"

namespace relaygen {

struct TrajectoryStep {
  EnvState state;  // the state the action was taken from
  Observation obs;
  ActionVector action;
  double reward = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;  // length T
  EnvState final_state;
  bool terminated = false;  // ended in a health failure
  bool truncated = false;   // ended by a time limit / horizon / budget cut

  size_t length() const { return steps.size(); }
  double total_return() const {
    double r = 0.0;
    for (const auto& s : steps) r += s.reward;
    return r;
  }
};

// Roll a policy from a given state for at most max_steps control steps.  The
// rollout stops early on termination or env truncation; hitting max_steps
// marks the trajectory truncated.
Trajectory rollout(const Env& env, const Agent& agent, const EnvState& start, int max_steps,
                   ActMode mode, Rng& rng);

Trajectory rollout_from_reset(const Env& env, const Agent& agent, uint64_t reset_seed,
                              int max_steps, ActMode mode, Rng& rng);

}  // namespace relaygen
