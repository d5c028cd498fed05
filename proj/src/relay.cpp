#include "relaygen/relay.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>

namespace relaygen {

namespace {

void validate_config(const RelayConfig& cfg) {
  if (cfg.m_trajs <= 0) throw std::invalid_argument("m_trajs must be positive");
  if (!(cfg.eta > 0.0 && cfg.eta <= 1.0)) throw std::invalid_argument("eta must be in (0, 1]");
  if (cfg.k_per_traj <= 0) throw std::invalid_argument("k_per_traj must be positive");
  if (cfg.horizon <= 0) throw std::invalid_argument("horizon must be positive");
}

// k takeover indices from {1 .. n}, ascending.  Without replacement the
// whole range is returned when n <= k; with replacement duplicates stay.
std::vector<uint64_t> sample_takeover_indices(int64_t n, int k, bool without_replacement,
                                              Rng& rng) {
  std::vector<uint64_t> out;
  if (without_replacement) {
    std::vector<uint64_t> pool(n);
    std::iota(pool.begin(), pool.end(), uint64_t{1});
    if (n <= k) {
      out = std::move(pool);
    } else {
      for (int i = 0; i < k; ++i) {
        const uint64_t j = i + rng.below(static_cast<uint64_t>(n - i));
        std::swap(pool[i], pool[j]);
      }
      pool.resize(k);
      out = std::move(pool);
    }
  } else {
    out.reserve(k);
    for (int i = 0; i < k; ++i) out.push_back(1 + rng.below(static_cast<uint64_t>(n)));
  }
  std::sort(out.begin(), out.end());
  return out;
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (static_cast<double>(xs.size()) - 1.0));
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

}  // namespace

HarvestResult harvest_controllable_states(const Env& env, const Agent& stranger,
                                          const RelayConfig& cfg, Rng& rng) {
  validate_config(cfg);
  const ActMode mode = cfg.stochastic_eval ? ActMode::kStochastic : ActMode::kDeterministic;
  const int max_steps = env.spec().max_episode_steps;

  std::vector<Trajectory> trajs;
  trajs.reserve(cfg.m_trajs);
  for (int m = 0; m < cfg.m_trajs; ++m) {
    const uint64_t seed = rng.next_u64();
    trajs.push_back(rollout_from_reset(env, stranger, seed, max_steps, mode, rng));
  }
  return select_takeover_states(trajs, cfg, rng);
}

HarvestResult select_takeover_states(const std::vector<Trajectory>& trajs,
                                     const RelayConfig& cfg, Rng& rng) {
  validate_config(cfg);
  if (trajs.size() != static_cast<size_t>(cfg.m_trajs))
    throw std::invalid_argument("expected m_trajs trajectories");

  std::vector<int> order(trajs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&trajs](int a, int b) {
    return trajs[a].total_return() > trajs[b].total_return();
  });
  const int keep = static_cast<int>(std::ceil(cfg.eta * cfg.m_trajs));

  HarvestResult out;
  out.kept_trajectories = keep;
  for (int rank = 0; rank < keep; ++rank) {
    const Trajectory& traj = trajs[order[rank]];
    const double full_return = traj.total_return();
    if (cfg.use_return_floor && full_return < cfg.return_floor) {
      ++out.skipped_floor;
      continue;
    }
    const int64_t n_avail = static_cast<int64_t>(traj.length()) - cfg.horizon;
    if (n_avail <= 0) {
      ++out.skipped_short;
      continue;
    }
    for (uint64_t t :
         sample_takeover_indices(n_avail, cfg.k_per_traj, cfg.sample_without_replacement, rng)) {
      double remaining = 0.0;
      for (uint64_t i = t; i < t + static_cast<uint64_t>(cfg.horizon); ++i)
        remaining += traj.steps[i].reward;
      out.states.push_back(
          {traj.steps[t].state, traj.steps[t].obs, t, rank, full_return, remaining});
    }
  }
  return out;
}

RelayOutcome relay_rollout(const Env& env, const Agent& test_agent, const ControllableState& cs,
                           const RelayConfig& cfg, Rng& rng) {
  RelayOutcome o;
  try {
    env.restore(cs.env_state);
  } catch (const std::invalid_argument&) {
    o.valid = false;
    return o;
  }
  // Value probe with the deterministic policy action; consumes no rng.
  const ActionVector probe = test_agent.act(cs.observation, ActMode::kDeterministic, rng);
  o.q_at_takeover = test_agent.q_value(cs.observation, probe);

  const ActMode mode = cfg.stochastic_eval ? ActMode::kStochastic : ActMode::kDeterministic;
  const Trajectory traj = rollout(env, test_agent, cs.env_state, cfg.horizon, mode, rng);
  o.steps_survived = static_cast<int>(traj.length());
  o.test_return = traj.total_return();
  switch (cfg.failure_mode) {
    case FailureMode::kTermination:
      // Termination on the final relay step still counts as surviving the
      // handover; only an earlier collapse is a failure.
      o.failed = traj.terminated && o.steps_survived < cfg.horizon;
      break;
    case FailureMode::kReturnThreshold:
      o.failed = o.test_return < cfg.return_threshold;
      break;
  }
  return o;
}

RelayCellStats aggregate_outcomes(const std::vector<RelayOutcome>& outcomes) {
  RelayCellStats s;
  std::vector<double> fails, returns;
  fails.reserve(outcomes.size());
  returns.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    if (!o.valid) {
      ++s.n_errors;
      continue;
    }
    fails.push_back(o.failed ? 1.0 : 0.0);
    returns.push_back(o.test_return);
  }
  s.n_states = static_cast<int>(fails.size());
  if (fails.empty()) return s;
  s.failure_rate = mean_of(fails);
  s.failure_std = sample_std(fails, s.failure_rate);
  s.mean_return = mean_of(returns);
  s.return_std = sample_std(returns, s.mean_return);
  return s;
}

double RelayMatrix::reference_rate(int stranger_index) const {
  const std::string& sid = stranger_ids[stranger_index];
  for (size_t t = 0; t < test_ids.size(); ++t) {
    if (test_ids[t] != sid) continue;
    const RelayCell& self = cell(static_cast<int>(t), stranger_index);
    if (!self.error.empty()) return -1.0;
    return self.stats.failure_rate;
  }
  return -1.0;
}

RelayMatrix relay_matrix(const Env& env, const std::vector<AgentRef>& tests,
                         const std::vector<AgentRef>& strangers, const RelayConfig& cfg,
                         const Rng& base_rng, int jobs) {
  validate_config(cfg);
  if (tests.empty() || strangers.empty())
    throw std::invalid_argument("relay matrix needs at least one test and one stranger agent");
  if (jobs < 1) throw std::invalid_argument("jobs must be positive");
  for (const auto* fleet : {&tests, &strangers}) {
    std::set<std::string> ids;
    for (const auto& a : *fleet) {
      if (a.agent == nullptr) throw std::invalid_argument("null agent in relay matrix");
      if (!ids.insert(a.id).second)
        throw std::invalid_argument("duplicate agent id '" + a.id + "'");
    }
  }

  const size_t n_tests = tests.size();
  const size_t n_strangers = strangers.size();
  RelayMatrix m;
  m.horizon = cfg.horizon;
  m.failure_mode = cfg.failure_mode;
  for (const auto& a : tests) {
    m.test_ids.push_back(a.id);
    m.test_algos.push_back(a.algo.empty() ? a.agent->algorithm_id() : a.algo);
  }
  for (const auto& a : strangers) {
    m.stranger_ids.push_back(a.id);
    m.stranger_algos.push_back(a.algo.empty() ? a.agent->algorithm_id() : a.algo);
  }

  std::vector<std::string> harvest_errors(n_strangers);
  m.harvests.resize(n_strangers);
  for (size_t s = 0; s < n_strangers; ++s) {
    try {
      Rng hrng = base_rng.split(stream_tag::kHarvest).split(s);
      m.harvests[s] = harvest_controllable_states(env, *strangers[s].agent, cfg, hrng);
    } catch (const std::exception& e) {
      harvest_errors[s] = e.what();
    }
  }

  m.cells.resize(n_tests * n_strangers);
  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t c = next.fetch_add(1);
      if (c >= m.cells.size()) break;
      RelayCell& cell = m.cells[c];
      cell.test_index = static_cast<int>(c / n_strangers);
      cell.stranger_index = static_cast<int>(c % n_strangers);
      if (!harvest_errors[cell.stranger_index].empty()) {
        cell.error = "harvest failed: " + harvest_errors[cell.stranger_index];
        continue;
      }
      try {
        Rng crng = base_rng.split(stream_tag::kEval).split(c);
        const Agent& test = *tests[cell.test_index].agent;
        const auto& states = m.harvests[cell.stranger_index].states;
        cell.outcomes.reserve(states.size());
        for (const auto& cs : states)
          cell.outcomes.push_back(relay_rollout(env, test, cs, cfg, crng));
        cell.stats = aggregate_outcomes(cell.outcomes);
      } catch (const std::exception& e) {
        cell.error = e.what();
        cell.outcomes.clear();
        cell.stats = RelayCellStats{};
      }
    }
  };

  const int n_threads = std::min<int>(jobs, static_cast<int>(m.cells.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return m;
}

OrdinaryEvalStats evaluate_ordinary(const Env& env, const Agent& agent, int n_episodes,
                                    int max_steps, Rng& rng) {
  if (n_episodes <= 0) throw std::invalid_argument("n_episodes must be positive");
  if (max_steps <= 0) throw std::invalid_argument("max_steps must be positive");
  std::vector<double> returns;
  returns.reserve(n_episodes);
  double failures = 0.0;
  double length_sum = 0.0;
  for (int e = 0; e < n_episodes; ++e) {
    const uint64_t seed = rng.next_u64();
    const Trajectory traj =
        rollout_from_reset(env, agent, seed, max_steps, ActMode::kDeterministic, rng);
    returns.push_back(traj.total_return());
    if (traj.terminated) failures += 1.0;
    length_sum += static_cast<double>(traj.length());
  }
  OrdinaryEvalStats s;
  s.n_episodes = n_episodes;
  s.mean_return = mean_of(returns);
  s.return_std = sample_std(returns, s.mean_return);
  s.failure_rate = failures / n_episodes;
  s.mean_length = length_sum / n_episodes;
  return s;
}

BootstrapDelta bootstrap_mean_difference(const std::vector<double>& a,
                                         const std::vector<double>& b, int n_resamples,
                                         Rng& rng) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("bootstrap_mean_difference needs nonempty samples");
  if (n_resamples <= 0) throw std::invalid_argument("n_resamples must be positive");
  BootstrapDelta d;
  d.n_a = static_cast<int>(a.size());
  d.n_b = static_cast<int>(b.size());
  d.mean_a = mean_of(a);
  d.mean_b = mean_of(b);
  d.std_a = sample_std(a, d.mean_a);
  d.std_b = sample_std(b, d.mean_b);
  d.delta = d.mean_a - d.mean_b;

  std::vector<double> deltas;
  deltas.reserve(n_resamples);
  for (int r = 0; r < n_resamples; ++r) {
    double sa = 0.0, sb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) sa += a[rng.below(a.size())];
    for (size_t i = 0; i < b.size(); ++i) sb += b[rng.below(b.size())];
    deltas.push_back(sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size()));
  }
  std::sort(deltas.begin(), deltas.end());
  const size_t idx = static_cast<size_t>(0.05 * n_resamples);
  d.ci_lower = deltas[std::min(idx, deltas.size() - 1)];
  return d;
}

QFailureAnalysis q_failure_analysis(const RelayMatrix& matrix, int n_resamples, Rng& rng,
                                    int test_index) {
  std::vector<double> q_failed, q_succeeded, q_own;
  std::vector<double> ref_failed, ref_succeeded, ret_failed, ret_succeeded;
  for (const RelayCell& cell : matrix.cells) {
    if (!cell.error.empty()) continue;
    if (test_index >= 0 && cell.test_index != test_index) continue;
    const bool own =
        matrix.test_ids[cell.test_index] == matrix.stranger_ids[cell.stranger_index];
    const auto& states = matrix.harvests[cell.stranger_index].states;
    for (size_t i = 0; i < cell.outcomes.size(); ++i) {
      const RelayOutcome& o = cell.outcomes[i];
      if (!o.valid) continue;
      if (own) {
        q_own.push_back(o.q_at_takeover);
        continue;
      }
      if (o.failed) {
        q_failed.push_back(o.q_at_takeover);
        ref_failed.push_back(states[i].stranger_remaining_return);
        ret_failed.push_back(o.test_return);
      } else {
        q_succeeded.push_back(o.q_at_takeover);
        ref_succeeded.push_back(states[i].stranger_remaining_return);
        ret_succeeded.push_back(o.test_return);
      }
    }
  }
  if (q_failed.empty() || q_succeeded.empty())
    throw std::invalid_argument("q_failure_analysis needs both failed and succeeded handovers");
  if (q_own.empty())
    throw std::invalid_argument("q_failure_analysis needs self-pair (own-state) outcomes");

  QFailureAnalysis a;
  a.succeeded_vs_failed = bootstrap_mean_difference(q_succeeded, q_failed, n_resamples, rng);
  a.own_vs_stranger_success = bootstrap_mean_difference(q_own, q_succeeded, n_resamples, rng);
  a.mean_ref_failed = mean_of(ref_failed);
  a.std_ref_failed = sample_std(ref_failed, a.mean_ref_failed);
  a.mean_ref_succeeded = mean_of(ref_succeeded);
  a.std_ref_succeeded = sample_std(ref_succeeded, a.mean_ref_succeeded);
  a.mean_return_failed = mean_of(ret_failed);
  a.std_return_failed = sample_std(ret_failed, a.mean_return_failed);
  a.mean_return_succeeded = mean_of(ret_succeeded);
  a.std_return_succeeded = sample_std(ret_succeeded, a.mean_return_succeeded);
  return a;
}

}  // namespace relaygen
