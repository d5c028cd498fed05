#include "relaygen/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "relaygen/env.hpp"
#include "relaygen/report.hpp"

namespace relaygen {

using nlohmann::json;

namespace {

void require_keys(const json& j, const std::string& where,
                  const std::set<std::string>& allowed) {
  if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key()))
      throw std::invalid_argument("unknown key \"" + it.key() + "\" in " + where);
  }
}

std::vector<int> int_list(const json& j, const std::string& where) {
  if (!j.is_array()) throw std::invalid_argument(where + " must be an array");
  std::vector<int> out;
  for (const auto& v : j) out.push_back(v.get<int>());
  return out;
}

ScoringMode scoring_mode_from_name(const std::string& name) {
  if (name == "next-lambda-sum") return ScoringMode::kNextLambdaSum;
  if (name == "average-remaining") return ScoringMode::kAverageRemaining;
  throw std::invalid_argument("unknown scoring mode \"" + name + "\"");
}

std::string scoring_mode_name(ScoringMode m) {
  return m == ScoringMode::kNextLambdaSum ? "next-lambda-sum" : "average-remaining";
}

FailureMode failure_mode_from_name(const std::string& name) {
  if (name == "termination") return FailureMode::kTermination;
  if (name == "return-threshold") return FailureMode::kReturnThreshold;
  throw std::invalid_argument("unknown failure mode \"" + name + "\"");
}

void apply_sac(SacHyperparams& hp, const json& j) {
  require_keys(j, "sac", {"hidden", "lr", "gamma", "tau", "init_alpha", "learn_alpha",
                          "target_entropy", "batch_size", "start_steps", "update_after",
                          "replay_capacity"});
  if (j.contains("hidden")) hp.hidden = int_list(j["hidden"], "sac.hidden");
  if (j.contains("lr")) hp.lr = j["lr"].get<double>();
  if (j.contains("gamma")) hp.gamma = j["gamma"].get<double>();
  if (j.contains("tau")) hp.tau = j["tau"].get<double>();
  if (j.contains("init_alpha")) hp.init_alpha = j["init_alpha"].get<double>();
  if (j.contains("learn_alpha")) hp.learn_alpha = j["learn_alpha"].get<bool>();
  if (j.contains("target_entropy")) hp.target_entropy = j["target_entropy"].get<double>();
  if (j.contains("batch_size")) hp.batch_size = j["batch_size"].get<int>();
  if (j.contains("start_steps")) hp.start_steps = j["start_steps"].get<uint64_t>();
  if (j.contains("update_after")) hp.update_after = j["update_after"].get<uint64_t>();
  if (j.contains("replay_capacity")) hp.replay_capacity = j["replay_capacity"].get<uint64_t>();
}

void apply_td3(Td3Hyperparams& hp, const json& j) {
  require_keys(j, "td3", {"hidden", "lr", "gamma", "tau", "expl_noise", "target_noise",
                          "noise_clip", "policy_delay", "batch_size", "start_steps",
                          "update_after", "replay_capacity"});
  if (j.contains("hidden")) hp.hidden = int_list(j["hidden"], "td3.hidden");
  if (j.contains("lr")) hp.lr = j["lr"].get<double>();
  if (j.contains("gamma")) hp.gamma = j["gamma"].get<double>();
  if (j.contains("tau")) hp.tau = j["tau"].get<double>();
  if (j.contains("expl_noise")) hp.expl_noise = j["expl_noise"].get<double>();
  if (j.contains("target_noise")) hp.target_noise = j["target_noise"].get<double>();
  if (j.contains("noise_clip")) hp.noise_clip = j["noise_clip"].get<double>();
  if (j.contains("policy_delay")) hp.policy_delay = j["policy_delay"].get<int>();
  if (j.contains("batch_size")) hp.batch_size = j["batch_size"].get<int>();
  if (j.contains("start_steps")) hp.start_steps = j["start_steps"].get<uint64_t>();
  if (j.contains("update_after")) hp.update_after = j["update_after"].get<uint64_t>();
  if (j.contains("replay_capacity")) hp.replay_capacity = j["replay_capacity"].get<uint64_t>();
}

void apply_sta(StaConfig& cfg, const json& j) {
  require_keys(j, "sta", {"p0", "l_r", "l_max", "lambda", "eta", "gamma_ratio",
                          "n_candidates", "scoring_mode", "epoch_steps", "capacity"});
  if (j.contains("p0")) cfg.p0 = j["p0"].get<double>();
  if (j.contains("l_r")) cfg.l_r = j["l_r"].get<int>();
  if (j.contains("l_max")) cfg.l_max = j["l_max"].get<int>();
  if (j.contains("lambda")) cfg.lambda = j["lambda"].get<int>();
  if (j.contains("eta")) cfg.eta_sta = j["eta"].get<double>();
  if (j.contains("gamma_ratio")) cfg.gamma_ratio = j["gamma_ratio"].get<double>();
  if (j.contains("n_candidates")) cfg.n_candidates = j["n_candidates"].get<int>();
  if (j.contains("scoring_mode"))
    cfg.scoring_mode = scoring_mode_from_name(j["scoring_mode"].get<std::string>());
  if (j.contains("epoch_steps")) cfg.epoch_steps = j["epoch_steps"].get<uint64_t>();
  if (j.contains("capacity")) cfg.capacity = j["capacity"].get<size_t>();
}

void apply_naive(NaiveConfig& cfg, const json& j) {
  require_keys(j, "naive", {"n_pretrained", "eta", "p0", "l_r", "l_max", "pool_path"});
  if (j.contains("n_pretrained")) cfg.n_pretrained = j["n_pretrained"].get<int>();
  if (j.contains("eta")) cfg.eta_naive = j["eta"].get<double>();
  if (j.contains("p0")) cfg.p0 = j["p0"].get<double>();
  if (j.contains("l_r")) cfg.l_r = j["l_r"].get<int>();
  if (j.contains("l_max")) cfg.l_max = j["l_max"].get<int>();
  if (j.contains("pool_path")) cfg.pool_path = j["pool_path"].get<std::string>();
}

void apply_relay(ExperimentConfig& cfg, const json& j) {
  require_keys(j, "relay",
               {"m_trajs", "eta", "k_per_traj", "horizon", "failure_mode", "return_threshold",
                "sample_without_replacement", "use_return_floor", "return_floor",
                "stochastic_eval", "ordinary_episodes", "horizons", "thresholds"});
  RelayConfig& rc = cfg.relay;
  if (j.contains("m_trajs")) rc.m_trajs = j["m_trajs"].get<int>();
  if (j.contains("eta")) rc.eta = j["eta"].get<double>();
  if (j.contains("k_per_traj")) rc.k_per_traj = j["k_per_traj"].get<int>();
  if (j.contains("horizon")) rc.horizon = j["horizon"].get<int>();
  if (j.contains("failure_mode"))
    rc.failure_mode = failure_mode_from_name(j["failure_mode"].get<std::string>());
  if (j.contains("return_threshold")) rc.return_threshold = j["return_threshold"].get<double>();
  if (j.contains("sample_without_replacement"))
    rc.sample_without_replacement = j["sample_without_replacement"].get<bool>();
  if (j.contains("use_return_floor")) rc.use_return_floor = j["use_return_floor"].get<bool>();
  if (j.contains("return_floor")) rc.return_floor = j["return_floor"].get<double>();
  if (j.contains("stochastic_eval")) rc.stochastic_eval = j["stochastic_eval"].get<bool>();
  if (j.contains("ordinary_episodes"))
    cfg.relay_ordinary_episodes = j["ordinary_episodes"].get<int>();
  if (j.contains("horizons")) cfg.relay_horizons = int_list(j["horizons"], "relay.horizons");
  if (j.contains("thresholds")) {
    cfg.relay_thresholds.clear();
    for (const auto& v : j["thresholds"]) cfg.relay_thresholds.push_back(v.get<double>());
  }
}

void validate(const ExperimentConfig& cfg) {
  if (cfg.algorithm != "sac" && cfg.algorithm != "td3")
    throw std::invalid_argument("algorithm must be sac or td3");
  static const std::set<std::string> kVariants = {"ordinary", "sta", "naive",
                                                  "infinite-buffer", "random-hparams"};
  if (!kVariants.count(cfg.variant))
    throw std::invalid_argument("unknown variant \"" + cfg.variant + "\"");
  if (cfg.profile != "desk" && cfg.profile != "paper")
    throw std::invalid_argument("profile must be desk or paper");
  if (cfg.total_steps == 0) throw std::invalid_argument("total_steps must be positive");
  if (cfg.seeds.empty()) throw std::invalid_argument("at least one seed is required");
  std::set<uint64_t> distinct(cfg.seeds.begin(), cfg.seeds.end());
  if (distinct.size() != cfg.seeds.size())
    throw std::invalid_argument("seeds must be distinct");
  if (cfg.out_dir.empty()) throw std::invalid_argument("out_dir must be nonempty");
  if (cfg.relay_ordinary_episodes < 0)
    throw std::invalid_argument("relay.ordinary_episodes must be >= 0");
  if (cfg.export_n_states < 1) throw std::invalid_argument("export.n_states must be positive");
  for (int h : cfg.relay_horizons)
    if (h < 1) throw std::invalid_argument("relay.horizons entries must be positive");
  for (const auto& [key, range] : cfg.hparam_ranges) {
    if (!(range[0] < range[1]))
      throw std::invalid_argument("hparam range for \"" + key + "\" must have lo < hi");
    if ((key == "lr" || key == "tau") && range[0] <= 0)
      throw std::invalid_argument("hparam range for \"" + key + "\" must be positive");
  }
  // Instantiating the env validates both the id and every param name.
  make_env(cfg.env_id, cfg.env_params);
}

}  // namespace

ExperimentConfig default_config(const std::string& profile, const std::string& env_id) {
  ExperimentConfig cfg;
  cfg.profile = profile;
  cfg.env_id = env_id;
  cfg.hparam_ranges = {{"lr", {1e-4, 1e-3}}, {"tau", {2e-3, 2e-2}}};
  if (profile == "paper") {
    cfg.total_steps = 3000000;
    cfg.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    cfg.relay.m_trajs = 200;
    cfg.relay.k_per_traj = 5;
    cfg.relay.horizon = 500;
  } else if (profile == "desk") {
    cfg.total_steps = env_id == "cartpole-balance-v1" ? 100000 : 300000;
    cfg.seeds = {0, 1, 2, 3, 4};
    for (std::vector<int>* hidden : {&cfg.sac.hidden, &cfg.td3.hidden}) *hidden = {64, 64};
    cfg.sac.start_steps = cfg.td3.start_steps = 1000;
    cfg.sac.update_after = cfg.td3.update_after = 1000;
    cfg.relay.m_trajs = 50;
    cfg.relay.k_per_traj = 5;
    cfg.relay.horizon = 200;
  } else {
    throw std::invalid_argument("profile must be desk or paper");
  }
  return cfg;
}

ExperimentConfig parse_config(const std::string& json_text,
                              const std::string& profile_override) {
  json j = json::parse(json_text);
  require_keys(j, "config",
               {"master_seed", "env", "algorithm", "variant", "profile", "total_steps",
                "n_seeds", "seeds", "out_dir", "sac", "td3", "sta", "naive", "relay",
                "hparam_ranges", "export"});

  std::string profile = profile_override.empty()
                            ? j.value("profile", std::string("desk"))
                            : profile_override;
  std::string env_id = "planar-hopper-v1";
  if (j.contains("env")) {
    require_keys(j["env"], "env", {"id", "params"});
    if (j["env"].contains("id")) env_id = j["env"]["id"].get<std::string>();
  }

  ExperimentConfig cfg = default_config(profile, env_id);

  if (j.contains("env") && j["env"].contains("params")) {
    const json& p = j["env"]["params"];
    if (!p.is_object()) throw std::invalid_argument("env.params must be a JSON object");
    for (auto it = p.begin(); it != p.end(); ++it)
      cfg.env_params[it.key()] = it.value().get<double>();
  }
  if (j.contains("master_seed")) cfg.master_seed = j["master_seed"].get<uint64_t>();
  if (j.contains("algorithm")) cfg.algorithm = j["algorithm"].get<std::string>();
  if (j.contains("variant")) cfg.variant = j["variant"].get<std::string>();
  if (j.contains("total_steps")) cfg.total_steps = j["total_steps"].get<uint64_t>();
  if (j.contains("n_seeds") && j.contains("seeds"))
    throw std::invalid_argument("give n_seeds or seeds, not both");
  if (j.contains("n_seeds")) {
    int n = j["n_seeds"].get<int>();
    if (n < 1) throw std::invalid_argument("n_seeds must be positive");
    cfg.seeds.clear();
    for (int s = 0; s < n; ++s) cfg.seeds.push_back(static_cast<uint64_t>(s));
  }
  if (j.contains("seeds")) {
    cfg.seeds.clear();
    for (const auto& v : j["seeds"]) cfg.seeds.push_back(v.get<uint64_t>());
  }
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("sac")) apply_sac(cfg.sac, j["sac"]);
  if (j.contains("td3")) apply_td3(cfg.td3, j["td3"]);
  if (j.contains("sta")) apply_sta(cfg.sta, j["sta"]);
  if (j.contains("naive")) apply_naive(cfg.naive, j["naive"]);
  if (j.contains("relay")) apply_relay(cfg, j["relay"]);
  if (j.contains("hparam_ranges")) {
    const json& r = j["hparam_ranges"];
    if (!r.is_object()) throw std::invalid_argument("hparam_ranges must be a JSON object");
    cfg.hparam_ranges.clear();
    for (auto it = r.begin(); it != r.end(); ++it) {
      if (!it.value().is_array() || it.value().size() != 2)
        throw std::invalid_argument("hparam_ranges entries must be [lo, hi]");
      cfg.hparam_ranges[it.key()] = {it.value()[0].get<double>(),
                                     it.value()[1].get<double>()};
    }
  }
  if (j.contains("export")) {
    require_keys(j["export"], "export", {"n_states"});
    if (j["export"].contains("n_states"))
      cfg.export_n_states = j["export"]["n_states"].get<int>();
  }

  validate(cfg);
  return cfg;
}

ExperimentConfig load_config_file(const std::string& path,
                                  const std::string& profile_override) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), profile_override);
}

std::string effective_config_text(const ExperimentConfig& cfg) {
  json j;
  j["master_seed"] = cfg.master_seed;
  j["env"] = {{"id", cfg.env_id}, {"params", cfg.env_params}};
  j["algorithm"] = cfg.algorithm;
  j["variant"] = cfg.variant;
  j["profile"] = cfg.profile;
  j["total_steps"] = cfg.total_steps;
  j["seeds"] = cfg.seeds;
  j["out_dir"] = cfg.out_dir;
  j["sac"] = {{"hidden", cfg.sac.hidden},
              {"lr", cfg.sac.lr},
              {"gamma", cfg.sac.gamma},
              {"tau", cfg.sac.tau},
              {"init_alpha", cfg.sac.init_alpha},
              {"learn_alpha", cfg.sac.learn_alpha},
              {"target_entropy", cfg.sac.target_entropy},
              {"batch_size", cfg.sac.batch_size},
              {"start_steps", cfg.sac.start_steps},
              {"update_after", cfg.sac.update_after},
              {"replay_capacity", cfg.sac.replay_capacity}};
  j["td3"] = {{"hidden", cfg.td3.hidden},
              {"lr", cfg.td3.lr},
              {"gamma", cfg.td3.gamma},
              {"tau", cfg.td3.tau},
              {"expl_noise", cfg.td3.expl_noise},
              {"target_noise", cfg.td3.target_noise},
              {"noise_clip", cfg.td3.noise_clip},
              {"policy_delay", cfg.td3.policy_delay},
              {"batch_size", cfg.td3.batch_size},
              {"start_steps", cfg.td3.start_steps},
              {"update_after", cfg.td3.update_after},
              {"replay_capacity", cfg.td3.replay_capacity}};
  j["sta"] = {{"p0", cfg.sta.p0},
              {"l_r", cfg.sta.l_r},
              {"l_max", cfg.sta.l_max},
              {"lambda", cfg.sta.lambda},
              {"eta", cfg.sta.eta_sta},
              {"gamma_ratio", cfg.sta.gamma_ratio},
              {"n_candidates", cfg.sta.n_candidates},
              {"scoring_mode", scoring_mode_name(cfg.sta.scoring_mode)},
              {"epoch_steps", cfg.sta.epoch_steps},
              {"capacity", cfg.sta.capacity}};
  j["naive"] = {{"n_pretrained", cfg.naive.n_pretrained},
                {"eta", cfg.naive.eta_naive},
                {"p0", cfg.naive.p0},
                {"l_r", cfg.naive.l_r},
                {"l_max", cfg.naive.l_max},
                {"pool_path", cfg.naive.pool_path}};
  j["relay"] = {{"m_trajs", cfg.relay.m_trajs},
                {"eta", cfg.relay.eta},
                {"k_per_traj", cfg.relay.k_per_traj},
                {"horizon", cfg.relay.horizon},
                {"failure_mode", failure_mode_name(cfg.relay.failure_mode)},
                {"return_threshold", cfg.relay.return_threshold},
                {"sample_without_replacement", cfg.relay.sample_without_replacement},
                {"use_return_floor", cfg.relay.use_return_floor},
                {"return_floor", cfg.relay.return_floor},
                {"stochastic_eval", cfg.relay.stochastic_eval},
                {"ordinary_episodes", cfg.relay_ordinary_episodes},
                {"horizons", cfg.relay_horizons},
                {"thresholds", cfg.relay_thresholds}};
  json ranges = json::object();
  for (const auto& [key, range] : cfg.hparam_ranges) ranges[key] = {range[0], range[1]};
  j["hparam_ranges"] = ranges;
  j["export"] = {{"n_states", cfg.export_n_states}};
  return j.dump(2) + "\n";
}

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(effective_config_text(cfg))));
  return buf;
}

}  // namespace relaygen
