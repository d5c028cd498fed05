#include "relaygen/checkpoint.hpp"

#include <fstream>

#include "relaygen/binary_io.hpp"
#include "relaygen/sac.hpp"
#include "relaygen/td3.hpp"

namespace relaygen {

void write_agent_checkpoint(std::ostream& out, const Agent& agent, uint64_t total_env_steps,
                            const RngState& trainer_rng) {
  io::write_magic(out, "STAC");
  io::write_u16(out, kCheckpointFormatVersion);
  io::write_string(out, agent.algorithm_id());
  io::write_string(out, agent.env_id());
  io::write_string(out, agent.hyperparams_text());
  agent.write_body(out);
  io::write_u64(out, trainer_rng.key);
  io::write_u64(out, trainer_rng.counter);
  io::write_u64(out, total_env_steps);
}

AgentCheckpoint read_agent_checkpoint(std::istream& in) {
  io::expect_magic(in, "STAC", "agent checkpoint");
  io::expect_version(in, kCheckpointFormatVersion, "agent checkpoint");
  const std::string algorithm = io::read_string(in, 256);
  const std::string env_id = io::read_string(in, 4096);
  const std::string hyper_text = io::read_string(in, 1u << 16);
  AgentCheckpoint ck;
  if (algorithm == SacAgent::kAlgorithmId) {
    ck.agent = SacAgent::read_body(in, env_id, hyper_text);
  } else if (algorithm == Td3Agent::kAlgorithmId) {
    ck.agent = Td3Agent::read_body(in, env_id, hyper_text);
  } else {
    throw FormatError("checkpoint carries unknown algorithm id '" + algorithm + "'");
  }
  ck.trainer_rng.key = io::read_u64(in);
  ck.trainer_rng.counter = io::read_u64(in);
  ck.total_env_steps = io::read_u64(in);
  return ck;
}

void save_agent_checkpoint(const std::string& path, const Agent& agent,
                           uint64_t total_env_steps, const RngState& trainer_rng) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_agent_checkpoint(out, agent, total_env_steps, trainer_rng);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

AgentCheckpoint load_agent_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_agent_checkpoint(in);
}

}  // namespace relaygen
