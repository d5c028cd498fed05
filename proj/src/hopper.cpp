#include "relaygen/hopper.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relaygen {

namespace {
constexpr int kX = 0, kZ = 1, kAngle = 2, kFootDx = 3, kFootZ = 4;
constexpr int kVx = 0, kVz = 1;
}  // namespace

PlanarHopperEnv::PlanarHopperEnv(const PlanarHopperParams& params) : params_(params) {
  spec_.obs_dim = 6;
  spec_.act_dim = 2;
  spec_.max_episode_steps = params_.max_episode_steps;
  spec_.health_bounds = {
      {"z", {params_.z_min, params_.z_max}},
      {"leg_length", {params_.compression_min, 2.0 * params_.leg_rest_length}},
  };
  spec_.start_distribution = {
      {"z_lo", 1.1}, {"z_hi", 1.3}, {"vx_lo", -0.1}, {"vx_hi", 0.1}};
}

std::pair<Observation, EnvState> PlanarHopperEnv::reset(uint64_t seed) const {
  Rng rng = Rng(seed).split(stream_tag::kEnvReset);
  EnvState s;
  s.env_id = id_;
  // Draw order: z, vx.  Body starts in flight with a vertical leg.
  const double z = rng.uniform(spec_.start_distribution.at("z_lo"),
                               spec_.start_distribution.at("z_hi"));
  const double vx = rng.uniform(spec_.start_distribution.at("vx_lo"),
                                spec_.start_distribution.at("vx_hi"));
  s.q = {0.0, z, 0.0, 0.0, z - params_.leg_rest_length};
  s.qdot = {vx, 0.0, 0.0, 0.0, 0.0};
  s.phase = kPhaseFlight;
  s.step_index = 0;
  s.rng_state = rng.state();
  return {observe(s), s};
}

void PlanarHopperEnv::validate(const EnvState& state) const {
  if (state.env_id != id_)
    throw std::invalid_argument("state belongs to '" + state.env_id + "', not '" + id_ + "'");
  if (state.q.size() != 5 || state.qdot.size() != 5)
    throw std::invalid_argument("hopper state must carry 5 coordinates and 5 velocities");
  if (state.phase != kPhaseFlight && state.phase != kPhaseStance)
    throw std::invalid_argument("hopper phase must be 0 (flight) or 1 (stance)");
}

double PlanarHopperEnv::leg_length(const EnvState& state) const {
  if (state.phase == kPhaseFlight) return params_.leg_rest_length;
  const double lx = -state.q[kFootDx];
  const double lz = state.q[kZ] - state.q[kFootZ];
  return std::sqrt(lx * lx + lz * lz);
}

double PlanarHopperEnv::mechanical_energy(const EnvState& state) const {
  validate(state);
  const double vx = state.qdot[kVx], vz = state.qdot[kVz];
  const double kinetic = 0.5 * params_.m_body * (vx * vx + vz * vz);
  const double gravitational = params_.m_body * params_.gravity * state.q[kZ];
  const double compression = std::max(params_.leg_rest_length - leg_length(state), 0.0);
  const double spring = 0.5 * params_.spring_k * compression * compression;
  return kinetic + gravitational + spring;
}

Observation PlanarHopperEnv::observe(const EnvState& state) const {
  validate(state);
  const double stance = state.phase == kPhaseStance ? 1.0 : 0.0;
  return Observation{{state.q[kZ], state.qdot[kVx], state.qdot[kVz], state.q[kAngle],
                      leg_length(state), stance}};
}

bool PlanarHopperEnv::violates_health(const EnvState& state) const {
  const double z = state.q[kZ];
  if (z < params_.z_min || z > params_.z_max) return true;
  if (state.phase == kPhaseStance && leg_length(state) < params_.compression_min) return true;
  return false;
}

StepResult PlanarHopperEnv::step(const EnvState& state, const ActionVector& action) const {
  validate(state);
  const std::vector<double> a = clamped_action(action, spec_.act_dim);
  const double target_angle = a[0] * params_.touchdown_angle_max;
  const double thrust = std::max(a[1], 0.0) * params_.thrust_max;

  const double dt = params_.dt_physics;
  const double g = params_.gravity;
  const double m = params_.m_body;
  const double l0 = params_.leg_rest_length;

  double x = state.q[kX], z = state.q[kZ], angle = state.q[kAngle];
  double foot_dx = state.q[kFootDx], foot_z = state.q[kFootZ];
  double vx = state.qdot[kVx], vz = state.qdot[kVz];
  uint32_t phase = state.phase;

  double progress = 0.0;  // sum of the x increments, used for the reward
  bool terminated = violates_health(state);

  auto spring_pe = [&](double len) {
    const double c = std::max(l0 - len, 0.0);
    return 0.5 * params_.spring_k * c * c;
  };

  for (int sub = 0; sub < params_.action_repeat && !terminated; ++sub) {
    if (phase == kPhaseFlight) {
      // Swing the leg toward its target at a bounded rate, then apply the
      // closed-form ballistic update.
      const double max_swing = params_.leg_servo_rate * dt;
      angle += std::clamp(target_angle - angle, -max_swing, max_swing);
      const double dx = vx * dt;
      z += vz * dt - 0.5 * g * dt * dt;
      vz -= g * dt;
      x += dx;
      progress += dx;
      foot_dx = l0 * std::sin(angle);
      foot_z = z - l0 * std::cos(angle);
      if (foot_z <= 0.0 && vz < 0.0) phase = kPhaseStance;  // foot pinned where it landed
    } else {
      // Stance: spring plus thrust along the leg, foot pinned to the ground.
      double leg_x = -foot_dx;
      double leg_z = z - foot_z;
      double len = std::sqrt(leg_x * leg_x + leg_z * leg_z);
      if (len < 1e-9) {
        terminated = true;
        break;
      }
      const double e_before = 0.5 * m * (vx * vx + vz * vz) + m * g * z + spring_pe(len);
      const double force = params_.spring_k * std::max(l0 - len, 0.0) + thrust;
      const double ax = force * (leg_x / len) / m;
      const double az = force * (leg_z / len) / m - g;
      vx += ax * dt;
      vz += az * dt;
      const double dx = vx * dt;
      x += dx;
      z += vz * dt;
      progress += dx;
      foot_dx -= dx;  // foot stays put while the body moves

      leg_x = -foot_dx;
      leg_z = z - foot_z;
      const double len_after = std::sqrt(leg_x * leg_x + leg_z * leg_z);

      // Energy projection: the only permitted energy change across a stance
      // substep is the thrust work thrust * d(len).  Rescale speed to pin
      // total mechanical energy to that budget, which keeps the spring
      // exactly conservative regardless of step size.
      const double e_target = e_before + thrust * (len_after - len);
      const double ke_needed = e_target - (m * g * z + spring_pe(len_after));
      const double ke_after = 0.5 * m * (vx * vx + vz * vz);
      if (ke_needed <= 0.0) {
        vx = 0.0;
        vz = 0.0;
      } else if (ke_after > 1e-12) {
        const double scale = std::sqrt(ke_needed / ke_after);
        vx *= scale;
        vz *= scale;
      }

      angle = std::atan2(foot_dx, leg_z);
      if (len_after >= l0) {
        phase = kPhaseFlight;  // leg back at rest length: lift off
        foot_dx = l0 * std::sin(angle);
        foot_z = z - l0 * std::cos(angle);
      }
    }

    if (z < params_.z_min || z > params_.z_max) terminated = true;
    if (phase == kPhaseStance) {
      const double lx = -foot_dx, lz = z - foot_z;
      if (std::sqrt(lx * lx + lz * lz) < params_.compression_min) terminated = true;
    }
  }

  StepResult r;
  r.state.env_id = id_;
  r.state.q = {x, z, angle, foot_dx, foot_z};
  r.state.qdot = {vx, vz, 0.0, 0.0, 0.0};
  r.state.phase = phase;
  r.state.step_index = state.step_index + 1;
  r.state.rng_state = state.rng_state;

  // The velocity term saturates at speed_cap: without the cap the achievable
  // return grows with raw speed, and value estimates track speed instead of
  // how survivable a state is.
  const double control_dt = dt * params_.action_repeat;
  const double velocity = std::min(progress / control_dt, params_.speed_cap);
  r.reward = params_.forward_weight * velocity + params_.alive_bonus -
             params_.action_cost * (a[0] * a[0] + a[1] * a[1]);
  r.terminated = terminated;
  r.truncated = !terminated &&
                r.state.step_index >= static_cast<uint64_t>(params_.max_episode_steps);
  r.observation = observe(r.state);
  return r;
}

std::unique_ptr<Env> PlanarHopperEnv::clone() const {
  return std::make_unique<PlanarHopperEnv>(params_);
}

}  // namespace relaygen
