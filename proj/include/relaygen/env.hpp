#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "relaygen/rng.hpp"

namespace relaygen {

// Complete simulator state.  Restoring one of these and replaying the same
// action sequence reproduces a rollout bit for bit; nothing about an episode
// lives outside this struct.
struct EnvState {
  std::string env_id;
  std::vector<double> q;     // generalized coordinates
  std::vector<double> qdot;  // velocities, same length as q
  uint32_t phase = 0;        // discrete mode bits (e.g. contact), 0 if unused
  uint64_t step_index = 0;   // steps taken since reset
  RngState rng_state;        // per-episode noise stream, unused by these envs

  bool operator==(const EnvState&) const = default;
};

struct Observation {
  std::vector<double> values;
};

struct ActionVector {
  std::vector<double> values;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool terminated = false;  // health violation; the state is a failure state
  bool truncated = false;   // time limit only; never set together with terminated
  EnvState state;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct EnvSpec {
  int obs_dim = 0;
  int act_dim = 0;
  int max_episode_steps = 1000;
  // Named health variables with their closed healthy intervals.  A state
  // exactly on a bound is healthy; strictly outside is terminal.
  std::vector<std::pair<std::string, Interval>> health_bounds;
  // Named parameters of the start-state distribution, for config dumps.
  std::map<std::string, double> start_distribution;
};

// Stateless simulator: all episode state is carried in EnvState, so a single
// Env instance can serve many concurrent rollouts.
class Env {
 public:
  virtual ~Env() = default;

  virtual const std::string& env_id() const = 0;
  virtual const EnvSpec& spec() const = 0;

  // Draw a start state from the initial distribution.
  virtual std::pair<Observation, EnvState> reset(uint64_t seed) const = 0;

  // Advance one control step.  Actions are validated (finite, right arity)
  // and then clamped to [-1, 1]^d before dynamics.  Stepping from a state
  // that is already in violation of health bounds simply reports
  // terminated = true again.
  virtual StepResult step(const EnvState& state, const ActionVector& action) const = 0;

  virtual Observation observe(const EnvState& state) const = 0;

  // Validate a deserialized or externally produced state and return its
  // observation.  Throws std::invalid_argument on a state this env cannot
  // adopt (wrong env_id, wrong arity, non-finite coordinates).
  Observation restore(const EnvState& state) const;

  virtual std::unique_ptr<Env> clone() const = 0;

 protected:
  static std::vector<double> clamped_action(const ActionVector& action, int act_dim);
};

// Portable environment-state blob ("RGEV"):
//   magic "RGEV" | u16 version | string env_id | u32 n | f64 coords[2n]
//   | u32 phase | u64 step_index | u64 rng_key | u64 rng_counter
// coords carries q followed by qdot (n each), little-endian.
inline constexpr uint16_t kEnvStateFormatVersion = 1;

void write_env_state(std::ostream& out, const EnvState& state);
EnvState read_env_state(std::istream& in);

std::string serialize_env_state(const EnvState& state);
EnvState deserialize_env_state(const std::string& bytes);

// Construct a toy env by id with default parameters.  Known ids:
// "cartpole-balance-v1", "planar-hopper-v1".
std::unique_ptr<Env> make_env(const std::string& env_id);

// Same, with named parameter overrides (unknown names are rejected).
std::unique_ptr<Env> make_env(const std::string& env_id,
                              const std::map<std::string, double>& param_overrides);

}  // namespace relaygen
