#pragma once

#include <istream>
#include <memory>
#include <ostream>
#include <string>

#include "relaygen/agent.hpp"

namespace relaygen {

// Agent checkpoint ("STAC"):
//   magic "STAC" | u16 version | string algorithm_id | string env_id
//   | string canonical hyperparam text | algorithm-specific body
//   | u64 rng_key | u64 rng_counter | u64 total_env_steps
// Bodies carry network shape tables with f32 parameters, Adam moments, and
// for sac the temperature as a one-parameter network.  save -> load -> save
// reproduces the byte stream exactly.
inline constexpr uint16_t kCheckpointFormatVersion = 1;

struct AgentCheckpoint {
  std::unique_ptr<Agent> agent;
  uint64_t total_env_steps = 0;
  RngState trainer_rng;
};

void write_agent_checkpoint(std::ostream& out, const Agent& agent, uint64_t total_env_steps,
                            const RngState& trainer_rng);
AgentCheckpoint read_agent_checkpoint(std::istream& in);

void save_agent_checkpoint(const std::string& path, const Agent& agent,
                           uint64_t total_env_steps, const RngState& trainer_rng);
AgentCheckpoint load_agent_checkpoint(const std::string& path);

}  // namespace relaygen
