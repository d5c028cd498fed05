#include "relaygen/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "relaygen/sac.hpp"
#include "relaygen/td3.hpp"

namespace fs = std::filesystem;

namespace relaygen {

using nlohmann::json;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string fmt_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

std::string cause_name(EpisodeEndCause c) {
  switch (c) {
    case EpisodeEndCause::kTerminated: return "terminated";
    case EpisodeEndCause::kTruncated: return "truncated";
    case EpisodeEndCause::kBudget: return "budget";
  }
  return "?";
}

std::string start_name(EpisodeStartKind k) {
  switch (k) {
    case EpisodeStartKind::kD0: return "d0";
    case EpisodeStartKind::kArchive: return "archive";
    case EpisodeStartKind::kPool: return "pool";
    case EpisodeStartKind::kFallbackD0: return "fallback-d0";
  }
  return "?";
}

json run_to_json(const RunRecord& r) {
  json j;
  j["run_index"] = r.run_index;
  j["seed"] = r.seed;
  j["agent_id"] = r.agent_id;
  j["status"] = r.status;
  j["checkpoint"] = r.checkpoint;
  j["log"] = r.log;
  j["archive"] = r.archive;
  j["total_env_steps"] = r.total_env_steps;
  j["wall_seconds"] = r.wall_seconds;
  j["episodes"] = r.episodes;
  j["updates"] = r.updates;
  j["d0_starts"] = r.d0_starts;
  j["archive_starts"] = r.archive_starts;
  j["pool_starts"] = r.pool_starts;
  j["fallback_starts"] = r.fallback_starts;
  j["final_alpha"] = r.final_alpha;
  return j;
}

RunRecord run_from_json(const json& j) {
  RunRecord r;
  r.run_index = j.at("run_index").get<int>();
  r.seed = j.at("seed").get<uint64_t>();
  r.agent_id = j.at("agent_id").get<std::string>();
  r.status = j.at("status").get<std::string>();
  r.checkpoint = j.at("checkpoint").get<std::string>();
  r.log = j.at("log").get<std::string>();
  r.archive = j.at("archive").get<std::string>();
  r.total_env_steps = j.at("total_env_steps").get<uint64_t>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.episodes = j.at("episodes").get<uint64_t>();
  r.updates = j.at("updates").get<uint64_t>();
  r.d0_starts = j.at("d0_starts").get<uint64_t>();
  r.archive_starts = j.at("archive_starts").get<uint64_t>();
  r.pool_starts = j.at("pool_starts").get<uint64_t>();
  r.fallback_starts = j.at("fallback_starts").get<uint64_t>();
  r.final_alpha = j.at("final_alpha").get<double>();
  return r;
}

void write_train_log(const std::string& path, const std::string& agent_id, uint64_t seed,
                     const TrainLog& log) {
  json j;
  j["agent_id"] = agent_id;
  j["seed"] = seed;
  j["env_steps"] = log.env_steps;
  j["updates"] = log.updates;
  j["d0_starts"] = log.d0_starts;
  j["archive_starts"] = log.archive_starts;
  j["pool_starts"] = log.pool_starts;
  j["fallback_starts"] = log.fallback_starts;
  j["wall_seconds"] = log.wall_seconds;
  j["final_alpha"] = log.final_alpha;
  json eps = json::array();
  for (const auto& e : log.episodes)
    eps.push_back({e.end_step, e.episode_return, e.length, cause_name(e.cause),
                   start_name(e.start)});
  j["episode_log"] = eps;
  spit(path, j.dump(2) + "\n");
}

double draw_hparam(const std::string& key, const std::array<double, 2>& range, Rng& rng) {
  if (key == "lr" || key == "tau")
    return std::exp(rng.uniform(std::log(range[0]), std::log(range[1])));
  return rng.uniform(range[0], range[1]);
}

void draw_sac_hparams(SacHyperparams& hp,
                      const std::map<std::string, std::array<double, 2>>& ranges, Rng& rng) {
  for (const auto& [key, range] : ranges) {
    const double v = draw_hparam(key, range, rng);
    if (key == "lr") hp.lr = v;
    else if (key == "tau") hp.tau = v;
    else if (key == "gamma") hp.gamma = v;
    else if (key == "init_alpha") hp.init_alpha = v;
    else throw std::invalid_argument("hparam range \"" + key + "\" not applicable to sac");
  }
}

void draw_td3_hparams(Td3Hyperparams& hp,
                      const std::map<std::string, std::array<double, 2>>& ranges, Rng& rng) {
  for (const auto& [key, range] : ranges) {
    const double v = draw_hparam(key, range, rng);
    if (key == "lr") hp.lr = v;
    else if (key == "tau") hp.tau = v;
    else if (key == "gamma") hp.gamma = v;
    else if (key == "expl_noise") hp.expl_noise = v;
    else throw std::invalid_argument("hparam range \"" + key + "\" not applicable to td3");
  }
}

// Naive pool: either a ready .rgsa pool or a pretrained fleet's manifest to
// harvest from (the first n_pretrained usable checkpoints, m_trajs rollouts
// each, top eta_naive kept).  A freshly built pool is saved under out_dir
// for reuse.
std::vector<ScoredState> resolve_naive_pool(const ExperimentConfig& cfg, const Env& env) {
  if (cfg.naive.pool_path.empty())
    throw std::invalid_argument("naive variant requires naive.pool_path");
  const std::string& src = cfg.naive.pool_path;
  if (src.size() > 5 && src.substr(src.size() - 5) == ".rgsa")
    return load_state_pool(src, env);

  RunManifest m = load_manifest(src);
  if (m.env_id != cfg.env_id)
    throw std::invalid_argument("pretrained fleet env " + m.env_id + " != " + cfg.env_id);
  const fs::path base = fs::path(src).parent_path();
  std::vector<std::string> paths;
  for (const auto& r : m.runs) {
    if (r.status != "ok") continue;
    paths.push_back((base / r.checkpoint).string());
    if (static_cast<int>(paths.size()) == cfg.naive.n_pretrained) break;
  }
  if (static_cast<int>(paths.size()) < cfg.naive.n_pretrained)
    throw std::runtime_error("pretrained fleet has " + std::to_string(paths.size()) +
                             " usable runs, need " + std::to_string(cfg.naive.n_pretrained));
  Rng rng = Rng(cfg.master_seed).split(stream_tag::kHarvest).split(fnv1a64("naive-pool"));
  std::vector<std::string> warnings;
  auto pool = build_pretrained_pool(paths, env, cfg.relay.m_trajs, cfg.naive.eta_naive,
                                    cfg.sta.lambda, rng, &warnings);
  for (const auto& w : warnings) std::fprintf(stderr, "naive pool: %s\n", w.c_str());
  const std::string saved = (fs::path(cfg.out_dir) / "pool.rgsa").string();
  save_state_pool(saved, cfg.env_id, pool);
  return pool;
}

// Mean of a metric over matrix rows selected by a predicate.
template <typename Pred>
double mean_over_rows(const std::vector<MatrixRow>& rows, Pred pred,
                      double MatrixRow::*field) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : rows)
    if (pred(r)) {
      sum += r.*field;
      ++n;
    }
  return n > 0 ? sum / n : 0.0;
}

}  // namespace

bool RunManifest::all_ok() const {
  if (runs.empty()) return false;
  for (const auto& r : runs)
    if (r.status != "ok") return false;
  return true;
}

std::string manifest_text(const RunManifest& m) {
  json j;
  j["schema"] = m.schema;
  j["config_hash"] = m.config_hash;
  j["env_id"] = m.env_id;
  j["algorithm"] = m.algorithm;
  j["variant"] = m.variant;
  j["profile"] = m.profile;
  j["total_steps"] = m.total_steps;
  json runs = json::array();
  for (const auto& r : m.runs) runs.push_back(run_to_json(r));
  j["runs"] = runs;
  return j.dump(2) + "\n";
}

RunManifest parse_manifest(const std::string& text) {
  json j = json::parse(text);
  RunManifest m;
  m.schema = j.at("schema").get<int>();
  if (m.schema != kManifestSchemaVersion)
    throw std::runtime_error("unsupported manifest schema " + std::to_string(m.schema));
  m.config_hash = j.at("config_hash").get<std::string>();
  m.env_id = j.at("env_id").get<std::string>();
  m.algorithm = j.at("algorithm").get<std::string>();
  m.variant = j.at("variant").get<std::string>();
  m.profile = j.at("profile").get<std::string>();
  m.total_steps = j.at("total_steps").get<uint64_t>();
  for (const auto& r : j.at("runs")) m.runs.push_back(run_from_json(r));
  return m;
}

RunManifest load_manifest(const std::string& path) { return parse_manifest(slurp(path)); }

void save_manifest(const std::string& path, const RunManifest& m) {
  spit(path, manifest_text(m));
}

std::string mask_wall_seconds(const std::string& manifest_json) {
  json j = json::parse(manifest_json);
  for (auto& r : j.at("runs")) r["wall_seconds"] = 0.0;
  return j.dump(2) + "\n";
}

std::string run_agent_id(const std::string& algorithm, const std::string& variant,
                         uint64_t seed) {
  return algorithm + "-" + variant + "-s" + std::to_string(seed);
}

std::string variant_label(const std::string& algorithm, const std::string& variant) {
  return variant == "ordinary" ? algorithm : variant + "-" + algorithm;
}

RunManifest cmd_train(const ExperimentConfig& cfg) {
  const fs::path out(cfg.out_dir);
  fs::create_directories(out / "checkpoints");
  fs::create_directories(out / "logs");
  if (cfg.variant == "sta") fs::create_directories(out / "archives");

  const std::string cfg_text = effective_config_text(cfg);
  const std::string hash = config_hash(cfg);
  const std::string cfg_path = (out / "effective_config.json").string();
  if (fs::exists(cfg_path)) {
    if (slurp(cfg_path) != cfg_text)
      throw std::runtime_error(cfg.out_dir + " already holds a different config");
  } else {
    spit(cfg_path, cfg_text);
  }

  // Completed runs of the same config are reused verbatim.
  std::map<uint64_t, RunRecord> reusable;
  const std::string manifest_path = (out / "manifest.json").string();
  if (fs::exists(manifest_path)) {
    RunManifest prev = load_manifest(manifest_path);
    if (prev.config_hash != hash)
      throw std::runtime_error(cfg.out_dir + " already holds runs for a different config");
    for (const auto& r : prev.runs) {
      if (r.status != "ok") continue;
      if (!fs::exists(out / r.checkpoint) || !fs::exists(out / r.log)) continue;
      if (!r.archive.empty() && !fs::exists(out / r.archive)) continue;
      reusable[r.seed] = r;
    }
  }

  RunManifest m;
  m.config_hash = hash;
  m.env_id = cfg.env_id;
  m.algorithm = cfg.algorithm;
  m.variant = cfg.variant;
  m.profile = cfg.profile;
  m.total_steps = cfg.total_steps;

  auto env = make_env(cfg.env_id, cfg.env_params);
  const int obs_dim = env->spec().obs_dim;
  const int act_dim = env->spec().act_dim;

  std::vector<ScoredState> pool;
  if (cfg.variant == "naive") pool = resolve_naive_pool(cfg, *env);

  for (size_t i = 0; i < cfg.seeds.size(); ++i) {
    const uint64_t seed = cfg.seeds[i];
    if (auto it = reusable.find(seed); it != reusable.end()) {
      RunRecord rec = it->second;
      rec.run_index = static_cast<int>(i);
      m.runs.push_back(std::move(rec));
      continue;
    }

    RunRecord rec;
    rec.run_index = static_cast<int>(i);
    rec.seed = seed;
    rec.agent_id = run_agent_id(cfg.algorithm, cfg.variant, seed);
    rec.checkpoint = "checkpoints/" + rec.agent_id + ".stac";
    rec.log = "logs/" + rec.agent_id + ".json";
    if (cfg.variant == "sta") rec.archive = "archives/" + rec.agent_id + ".rgsa";
    try {
      SacHyperparams sac_hp = cfg.sac;
      Td3Hyperparams td3_hp = cfg.td3;
      if (cfg.variant == "infinite-buffer") {
        sac_hp.replay_capacity = 0;
        td3_hp.replay_capacity = 0;
      }
      if (cfg.variant == "random-hparams") {
        Rng hp_rng = make_run_stream(cfg.master_seed, seed, stream_tag::kHyperparams);
        if (cfg.algorithm == "sac") draw_sac_hparams(sac_hp, cfg.hparam_ranges, hp_rng);
        else draw_td3_hparams(td3_hp, cfg.hparam_ranges, hp_rng);
      }

      Rng init_rng = make_run_stream(cfg.master_seed, seed, stream_tag::kInit);
      std::unique_ptr<Agent> agent;
      TrainerOptions opt;
      if (cfg.algorithm == "sac") {
        agent = std::make_unique<SacAgent>(cfg.env_id, obs_dim, act_dim, sac_hp, init_rng);
        opt = {sac_hp.batch_size, sac_hp.start_steps, sac_hp.update_after,
               sac_hp.replay_capacity};
      } else {
        agent = std::make_unique<Td3Agent>(cfg.env_id, obs_dim, act_dim, td3_hp, init_rng);
        opt = {td3_hp.batch_size, td3_hp.start_steps, td3_hp.update_after,
               td3_hp.replay_capacity};
      }

      Rng trainer_rng = make_run_stream(cfg.master_seed, seed, stream_tag::kTrainer);
      TrainLog log;
      if (cfg.variant == "sta") {
        StaTrainResult res =
            sta_train(*agent, *env, cfg.total_steps, opt, cfg.sta, trainer_rng);
        log = std::move(res.log);
        save_state_pool((out / rec.archive).string(), cfg.env_id, res.archive.entries());
      } else if (cfg.variant == "naive") {
        log = naive_train(*agent, *env, cfg.total_steps, opt, cfg.naive, pool, trainer_rng);
      } else {
        log = train_ordinary(*agent, *env, cfg.total_steps, opt, trainer_rng);
      }

      save_agent_checkpoint((out / rec.checkpoint).string(), *agent, log.env_steps,
                            trainer_rng.state());
      write_train_log((out / rec.log).string(), rec.agent_id, seed, log);

      rec.total_env_steps = log.env_steps;
      rec.wall_seconds = log.wall_seconds;
      rec.episodes = log.episodes.size();
      rec.updates = log.updates;
      rec.d0_starts = log.d0_starts;
      rec.archive_starts = log.archive_starts;
      rec.pool_starts = log.pool_starts;
      rec.fallback_starts = log.fallback_starts;
      rec.final_alpha = log.final_alpha;
    } catch (const std::exception& e) {
      rec.status = std::string("error: ") + e.what();
    }
    m.runs.push_back(std::move(rec));
  }

  save_manifest(manifest_path, m);
  return m;
}

std::vector<AgentRef> LoadedFleet::refs() const {
  std::vector<AgentRef> out;
  out.reserve(agents.size());
  for (const auto& a : agents) out.push_back({a.id, label, a.cp.agent.get()});
  return out;
}

LoadedFleet load_fleet(const std::string& manifest_path) {
  RunManifest m = load_manifest(manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();

  LoadedFleet fleet;
  fleet.env_id = m.env_id;
  fleet.algorithm = m.algorithm;
  fleet.variant = m.variant;
  fleet.label = variant_label(m.algorithm, m.variant);

  std::set<std::string> seen;
  for (const auto& r : m.runs) {
    if (r.status != "ok") {
      ++fleet.skipped_runs;
      continue;
    }
    if (r.agent_id.empty() || !seen.insert(r.agent_id).second)
      throw std::runtime_error("manifest has missing or duplicate agent id \"" + r.agent_id +
                               "\"");
    AgentCheckpoint cp = load_agent_checkpoint((base / r.checkpoint).string());
    if (cp.agent->env_id() != m.env_id)
      throw std::runtime_error(r.agent_id + ": checkpoint env " + cp.agent->env_id() +
                               " != manifest env " + m.env_id);
    if (cp.agent->algorithm_id() != m.algorithm)
      throw std::runtime_error(r.agent_id + ": checkpoint algorithm " +
                               cp.agent->algorithm_id() + " != manifest " + m.algorithm);
    if (cp.total_env_steps != r.total_env_steps)
      throw std::runtime_error(r.agent_id + ": checkpoint step count " +
                               std::to_string(cp.total_env_steps) + " != manifest " +
                               std::to_string(r.total_env_steps));
    fleet.agents.push_back({r.agent_id, std::move(cp)});
  }
  if (fleet.agents.empty())
    throw std::runtime_error("no usable runs in " + manifest_path);
  return fleet;
}

RelayArtifacts cmd_relay(const ExperimentConfig& cfg, const std::string& tests_manifest,
                         const std::string& strangers_manifest, const std::string& out_dir,
                         int jobs) {
  LoadedFleet tests = load_fleet(tests_manifest);
  const bool self_relay = strangers_manifest.empty() || strangers_manifest == tests_manifest;
  LoadedFleet strangers_store;
  if (!self_relay) strangers_store = load_fleet(strangers_manifest);
  const LoadedFleet& strangers = self_relay ? tests : strangers_store;

  if (tests.env_id != cfg.env_id || strangers.env_id != cfg.env_id)
    throw std::invalid_argument("manifest env does not match the config env " + cfg.env_id);
  if (!self_relay) {
    std::set<std::string> test_ids;
    for (const auto& a : tests.agents) test_ids.insert(a.id);
    for (const auto& a : strangers.agents)
      if (test_ids.count(a.id))
        throw std::invalid_argument("agent id \"" + a.id + "\" appears in both fleets");
  }

  auto env = make_env(cfg.env_id, cfg.env_params);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  const std::vector<AgentRef> test_refs = tests.refs();
  const std::vector<AgentRef> stranger_refs = strangers.refs();

  RelayArtifacts art;

  // Ordinary d0 self-evaluation of every distinct agent involved.
  std::vector<OrdinaryRow> ordinary;
  if (cfg.relay_ordinary_episodes > 0) {
    std::set<std::string> seen;
    auto eval_fleet = [&](const LoadedFleet& fleet) {
      for (const auto& a : fleet.agents) {
        if (!seen.insert(a.id).second) continue;
        Rng rng = Rng(cfg.master_seed).split(stream_tag::kEval).split(fnv1a64(a.id));
        OrdinaryEvalStats st =
            evaluate_ordinary(*env, *a.cp.agent, cfg.relay_ordinary_episodes,
                              env->spec().max_episode_steps, rng);
        ordinary.push_back({a.id, fleet.label, st.n_episodes, st.mean_return, st.return_std,
                            st.failure_rate, st.mean_length});
      }
    };
    eval_fleet(tests);
    if (!self_relay) eval_fleet(strangers);
    art.ordinary_csv = (out / "ordinary.csv").string();
    write_ordinary_csv(art.ordinary_csv, ordinary);
    ordinary = read_ordinary_csv(art.ordinary_csv);  // tables render from file truth
  }

  const Rng base(cfg.master_seed);
  auto run_one = [&](const RelayConfig& rc, const std::string& tag) {
    RelayMatrix matrix = relay_matrix(*env, test_refs, stranger_refs, rc, base, jobs);
    for (const auto& cell : matrix.cells)
      if (!cell.error.empty()) ++art.holes;
    const std::string matrix_path = (out / ("matrix_" + tag + ".csv")).string();
    const std::string states_path = (out / ("states_" + tag + ".csv")).string();
    const std::string table_path = (out / ("tables_" + tag + ".txt")).string();
    write_matrix_csv(matrix_path, matrix, cfg.env_id, rc.return_threshold);
    write_per_state_csv(states_path, matrix);
    MatrixReport report = read_matrix_csv(matrix_path);
    spit(table_path, render_grouped_tables({report}, ordinary));
    art.matrix_csvs.push_back(matrix_path);
    art.state_csvs.push_back(states_path);
    art.table_txts.push_back(table_path);
  };

  std::vector<int> horizons =
      cfg.relay_horizons.empty() ? std::vector<int>{cfg.relay.horizon} : cfg.relay_horizons;
  for (int L : horizons) {
    RelayConfig rc = cfg.relay;
    rc.horizon = L;
    run_one(rc, "L" + std::to_string(L));
  }
  for (double th : cfg.relay_thresholds) {
    RelayConfig rc = cfg.relay;
    rc.failure_mode = FailureMode::kReturnThreshold;
    rc.return_threshold = th;
    run_one(rc, "L" + std::to_string(rc.horizon) + "_th" + fmt_g(th));
  }

  json j;
  j["schema"] = kManifestSchemaVersion;
  j["config_hash"] = config_hash(cfg);
  j["env_id"] = cfg.env_id;
  j["tests_manifest"] = tests_manifest;
  j["strangers_manifest"] = self_relay ? tests_manifest : strangers_manifest;
  j["horizons"] = horizons;
  j["thresholds"] = cfg.relay_thresholds;
  j["ordinary_episodes"] = cfg.relay_ordinary_episodes;
  j["holes"] = art.holes;
  j["matrix_csvs"] = art.matrix_csvs;
  j["state_csvs"] = art.state_csvs;
  j["table_txts"] = art.table_txts;
  j["ordinary_csv"] = art.ordinary_csv;
  art.manifest_path = (out / "relay_manifest.json").string();
  spit(art.manifest_path, j.dump(2) + "\n");
  return art;
}

bool SweepResult::all_ok() const {
  if (rows.empty()) return false;
  for (const auto& r : rows)
    if (r.status != "ok") return false;
  return true;
}

SweepResult cmd_sweep(const ExperimentConfig& cfg, const std::string& axis,
                      const std::vector<double>& values,
                      const std::string& strangers_manifest, int jobs) {
  static const std::set<std::string> kIntAxes = {"n_pretrained", "l_r", "n_candidates"};
  static const std::set<std::string> kAxes = {"n_pretrained", "l_r", "gamma_ratio",
                                              "n_candidates"};
  if (!kAxes.count(axis)) throw std::invalid_argument("unknown sweep axis \"" + axis + "\"");
  const std::string required = axis == "n_pretrained" ? "naive" : "sta";
  if (cfg.variant != required)
    throw std::invalid_argument(axis + " sweep requires variant " + required);
  if (values.empty()) throw std::invalid_argument("sweep needs at least one value");

  SweepResult result;
  result.axis = axis;
  for (double v : values) {
    if (kIntAxes.count(axis) && (v < 1 || v != std::floor(v)))
      throw std::invalid_argument(axis + " values must be positive integers");

    SweepRow row;
    row.value = v;
    ExperimentConfig sub = cfg;
    if (axis == "n_pretrained") sub.naive.n_pretrained = static_cast<int>(v);
    else if (axis == "l_r") sub.sta.l_r = static_cast<int>(v);
    else if (axis == "gamma_ratio") sub.sta.gamma_ratio = v;
    else sub.sta.n_candidates = static_cast<int>(v);
    sub.out_dir = (fs::path(cfg.out_dir) / "sweep" / axis / fmt_g(v)).string();
    row.dir = sub.out_dir;

    try {
      RunManifest m = cmd_train(sub);
      for (const auto& r : m.runs)
        if (r.status != "ok") throw std::runtime_error(r.agent_id + " " + r.status);
      RelayArtifacts art =
          cmd_relay(sub, (fs::path(sub.out_dir) / "manifest.json").string(),
                    strangers_manifest, (fs::path(sub.out_dir) / "relay").string(), jobs);
      MatrixReport rep = read_matrix_csv(art.matrix_csvs.at(0));
      row.off_diag_failure = mean_over_rows(
          rep.rows, [](const MatrixRow& r) { return r.test_id != r.stranger_id; },
          &MatrixRow::failure_rate);
      if (!art.ordinary_csv.empty()) {
        std::set<std::string> fleet_ids;
        for (const auto& r : m.runs) fleet_ids.insert(r.agent_id);
        double sum = 0.0;
        int n = 0;
        for (const auto& r : read_ordinary_csv(art.ordinary_csv))
          if (fleet_ids.count(r.agent_id)) {
            sum += r.mean_return;
            ++n;
          }
        row.ordinary_return = n > 0 ? sum / n : 0.0;
      }
    } catch (const std::exception& e) {
      row.status = std::string("error: ") + e.what();
    }
    result.rows.push_back(std::move(row));
  }

  std::ostringstream table;
  table << "Sweep over " << axis << " (failure rates over non-self pairs, x100)\n";
  char line[160];
  std::snprintf(line, sizeof(line), "%12s  %14s  %16s  %s\n", axis.c_str(), "failure-%",
                "ordinary-return", "status");
  table << line;
  for (const auto& r : result.rows) {
    std::snprintf(line, sizeof(line), "%12s  %14.2f  %16.1f  %s\n", fmt_g(r.value).c_str(),
                  100.0 * r.off_diag_failure, r.ordinary_return, r.status.c_str());
    table << line;
  }
  const fs::path dir = fs::path(cfg.out_dir) / "sweep" / axis;
  fs::create_directories(dir);
  result.summary_path = (dir / "summary.txt").string();
  spit(result.summary_path, table.str());
  return result;
}

void cmd_export_states(const ExperimentConfig& cfg, const std::string& source_path,
                       const std::string& out_csv) {
  auto env = make_env(cfg.env_id, cfg.env_params);
  const fs::path parent = fs::path(out_csv).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  if (source_path.size() > 5 && source_path.substr(source_path.size() - 5) == ".rgsa") {
    export_pool_csv(out_csv, load_state_pool(source_path, *env));
    return;
  }

  LoadedFleet fleet = load_fleet(source_path);
  if (fleet.env_id != cfg.env_id)
    throw std::invalid_argument("manifest env does not match the config env " + cfg.env_id);

  std::ofstream csv(out_csv, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write " + out_csv);
  csv << "# agent-states-csv v1; env=" << cfg.env_id << "\n";
  csv << "agent_id,state_id,t_index";
  for (int d = 0; d < env->spec().obs_dim; ++d) csv << ",obs_" << d;
  csv << "\n";
  char num[40];
  for (const auto& a : fleet.agents) {
    Rng rng = Rng(cfg.master_seed).split(stream_tag::kHarvest).split(fnv1a64(a.id));
    int emitted = 0;
    while (emitted < cfg.export_n_states) {
      Trajectory traj = rollout_from_reset(*env, *a.cp.agent, rng.next_u64(),
                                           env->spec().max_episode_steps,
                                           ActMode::kDeterministic, rng);
      for (size_t t = 0; t < traj.steps.size() && emitted < cfg.export_n_states; ++t) {
        csv << a.id << "," << emitted << "," << t;
        for (double x : traj.steps[t].obs.values) {
          std::snprintf(num, sizeof(num), "%.10g", x);
          csv << "," << num;
        }
        csv << "\n";
        ++emitted;
      }
    }
  }
  if (!csv) throw std::runtime_error("write failed for " + out_csv);
}

std::string cmd_report(const std::vector<std::string>& paths) {
  if (paths.empty()) throw std::invalid_argument("report needs at least one CSV");
  std::vector<MatrixReport> reports;
  std::vector<OrdinaryRow> ordinary;
  for (const auto& p : paths) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + p);
    std::string first;
    std::getline(in, first);
    if (first.rfind("# relay-matrix-csv", 0) == 0) {
      reports.push_back(read_matrix_csv(p));
    } else if (first.rfind("# ordinary-eval-csv", 0) == 0) {
      for (auto& r : read_ordinary_csv(p)) ordinary.push_back(std::move(r));
    } else {
      throw std::invalid_argument(p + " is neither a matrix nor an ordinary-eval CSV");
    }
  }
  return render_grouped_tables(reports, ordinary);
}

}  // namespace relaygen
