#pragma once

#include "relaygen/env.hpp"

namespace relaygen {

struct PlanarHopperParams {
  double m_body = 1.0;          // point-mass body; the leg is massless
  double leg_rest_length = 1.0;
  double spring_k = 300.0;      // one-sided: pushes only while compressed
  double thrust_max = 60.0;     // extra leg force at a2 = 1; a2 <= 0 gives none
  double gravity = 9.8;
  double dt_physics = 0.01;
  int action_repeat = 5;        // physics substeps per control step
  double touchdown_angle_max = 0.5;  // rad; a1 scales the flight leg target
  double leg_servo_rate = 10.0;      // rad/s, flight-phase leg swing speed
  double z_min = 0.35;
  double z_max = 4.0;
  double compression_min = 0.4;  // minimum healthy leg length in stance
  double forward_weight = 1.0;
  double speed_cap = 2.0;  // m/s; the velocity reward term saturates here
  double alive_bonus = 1.0;
  double action_cost = 0.005;
  int max_episode_steps = 1000;
};

// Planar spring-loaded hopper: a point-mass body on a massless springy leg.
// Action: a1 steers the flight-phase leg angle target, a2 adds thrust along
// the leg during stance.  Reward is forward velocity plus an alive bonus
// minus a quadratic action cost.
//
// State layout (q / qdot, equal arity for serialization):
//   q    = (x, z, leg_angle, foot_dx, foot_z)
//   qdot = (vx, vz, 0, 0, 0)
// foot_dx is the foot's horizontal offset from the body (foot_x - x), so the
// dynamics never read absolute x; shifting q[0] translates a rollout exactly
// without perturbing anything else.  phase: 0 = flight, 1 = stance.
//
// Integration: flight uses the closed-form ballistic update, so mechanical
// energy is conserved to rounding.  Stance uses semi-implicit Euler followed
// by an energy projection that rescales velocity so total mechanical energy
// changes only by the thrust work thrust * d(leg_length) each substep.  The
// net effect is that a passive hop cycle cannot gain energy, so apex heights
// are non-increasing under zero thrust.
class PlanarHopperEnv : public Env {
 public:
  static constexpr const char* kId = "planar-hopper-v1";

  explicit PlanarHopperEnv(const PlanarHopperParams& params = {});

  const std::string& env_id() const override { return id_; }
  const EnvSpec& spec() const override { return spec_; }
  const PlanarHopperParams& params() const { return params_; }

  std::pair<Observation, EnvState> reset(uint64_t seed) const override;
  StepResult step(const EnvState& state, const ActionVector& action) const override;
  Observation observe(const EnvState& state) const override;
  std::unique_ptr<Env> clone() const override;

  // Mechanical energy of a state: kinetic + gravitational + spring.
  double mechanical_energy(const EnvState& state) const;
  double leg_length(const EnvState& state) const;

  static constexpr uint32_t kPhaseFlight = 0;
  static constexpr uint32_t kPhaseStance = 1;

 private:
  void validate(const EnvState& state) const;
  bool violates_health(const EnvState& state) const;

  std::string id_ = kId;
  PlanarHopperParams params_;
  EnvSpec spec_;
};

}  // namespace relaygen
