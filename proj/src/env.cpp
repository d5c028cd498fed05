#include "relaygen/env.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "relaygen/binary_io.hpp"
#include "relaygen/cartpole.hpp"
#include "relaygen/hopper.hpp"

namespace relaygen {

Observation Env::restore(const EnvState& state) const {
  if (state.env_id != env_id())
    throw std::invalid_argument("cannot restore state for '" + state.env_id + "' into '" +
                                env_id() + "'");
  if (state.q.size() != state.qdot.size())
    throw std::invalid_argument("state q/qdot arity mismatch");
  for (double v : state.q)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite coordinate in state");
  for (double v : state.qdot)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite velocity in state");
  return observe(state);
}

std::vector<double> Env::clamped_action(const ActionVector& action, int act_dim) {
  if (static_cast<int>(action.values.size()) != act_dim)
    throw std::invalid_argument("action has arity " + std::to_string(action.values.size()) +
                                ", expected " + std::to_string(act_dim));
  std::vector<double> a(action.values.size());
  for (size_t i = 0; i < a.size(); ++i) {
    const double v = action.values[i];
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite action component");
    a[i] = std::clamp(v, -1.0, 1.0);
  }
  return a;
}

void write_env_state(std::ostream& out, const EnvState& state) {
  if (state.q.size() != state.qdot.size())
    throw std::invalid_argument("cannot serialize state with q/qdot arity mismatch");
  io::write_magic(out, "RGEV");
  io::write_u16(out, kEnvStateFormatVersion);
  io::write_string(out, state.env_id);
  io::write_u32(out, static_cast<uint32_t>(state.q.size()));
  io::write_f64_array(out, state.q);
  io::write_f64_array(out, state.qdot);
  io::write_u32(out, state.phase);
  io::write_u64(out, state.step_index);
  io::write_u64(out, state.rng_state.key);
  io::write_u64(out, state.rng_state.counter);
}

EnvState read_env_state(std::istream& in) {
  io::expect_magic(in, "RGEV", "env state");
  io::expect_version(in, kEnvStateFormatVersion, "env state");
  EnvState s;
  s.env_id = io::read_string(in, 4096);
  const uint32_t n = io::read_u32(in);
  if (n == 0 || n > 1u << 16) throw FormatError("env state coordinate count out of range");
  s.q = io::read_f64_array(in, n);
  s.qdot = io::read_f64_array(in, n);
  s.phase = io::read_u32(in);
  s.step_index = io::read_u64(in);
  s.rng_state.key = io::read_u64(in);
  s.rng_state.counter = io::read_u64(in);
  return s;
}

std::string serialize_env_state(const EnvState& state) {
  std::ostringstream out(std::ios::binary);
  write_env_state(out, state);
  return out.str();
}

EnvState deserialize_env_state(const std::string& bytes) {
  std::istringstream in(bytes, std::ios::binary);
  EnvState s = read_env_state(in);
  return s;
}

std::unique_ptr<Env> make_env(const std::string& env_id) {
  return make_env(env_id, {});
}

namespace {

void apply_override(const std::string& env_id, const std::string& name, double value,
                    const std::map<std::string, double*>& fields,
                    const std::map<std::string, int*>& int_fields) {
  if (auto it = fields.find(name); it != fields.end()) {
    *it->second = value;
    return;
  }
  if (auto it = int_fields.find(name); it != int_fields.end()) {
    *it->second = static_cast<int>(value);
    return;
  }
  throw std::invalid_argument("unknown parameter '" + name + "' for env '" + env_id + "'");
}

}  // namespace

std::unique_ptr<Env> make_env(const std::string& env_id,
                              const std::map<std::string, double>& param_overrides) {
  if (env_id == CartPoleBalanceEnv::kId) {
    CartPoleBalanceParams p;
    const std::map<std::string, double*> fields = {
        {"m_cart", &p.m_cart},       {"m_pole", &p.m_pole},
        {"half_length", &p.half_length}, {"gravity", &p.gravity},
        {"force_max", &p.force_max}, {"dt", &p.dt},
        {"theta_bound", &p.theta_bound}, {"x_bound", &p.x_bound},
        {"action_cost", &p.action_cost}};
    const std::map<std::string, int*> int_fields = {{"max_episode_steps", &p.max_episode_steps}};
    for (const auto& [k, v] : param_overrides) apply_override(env_id, k, v, fields, int_fields);
    return std::make_unique<CartPoleBalanceEnv>(p);
  }
  if (env_id == PlanarHopperEnv::kId) {
    PlanarHopperParams p;
    const std::map<std::string, double*> fields = {
        {"m_body", &p.m_body},
        {"leg_rest_length", &p.leg_rest_length},
        {"spring_k", &p.spring_k},
        {"thrust_max", &p.thrust_max},
        {"gravity", &p.gravity},
        {"dt_physics", &p.dt_physics},
        {"touchdown_angle_max", &p.touchdown_angle_max},
        {"leg_servo_rate", &p.leg_servo_rate},
        {"z_min", &p.z_min},
        {"z_max", &p.z_max},
        {"compression_min", &p.compression_min},
        {"forward_weight", &p.forward_weight},
        {"speed_cap", &p.speed_cap},
        {"alive_bonus", &p.alive_bonus},
        {"action_cost", &p.action_cost}};
    const std::map<std::string, int*> int_fields = {{"action_repeat", &p.action_repeat},
                                                    {"max_episode_steps", &p.max_episode_steps}};
    for (const auto& [k, v] : param_overrides) apply_override(env_id, k, v, fields, int_fields);
    return std::make_unique<PlanarHopperEnv>(p);
  }
  throw std::invalid_argument("unknown env id '" + env_id + "'");
}

}  // namespace relaygen
