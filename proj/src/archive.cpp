#include "relaygen/archive.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "relaygen/binary_io.hpp"

namespace relaygen {

void StateArchive::add(ScoredState entry, Rng& rng) {
  if (!std::isfinite(entry.score))
    throw std::invalid_argument("archive entry must carry a finite score");
  if (capacity_ == 0 || entries_.size() < capacity_) {
    entries_.push_back(std::move(entry));
  } else {
    entries_[rng.below(entries_.size())] = std::move(entry);
  }
}

void StateArchive::update_threshold(double eta_sta) {
  if (eta_sta <= 0.0 || eta_sta > 1.0)
    throw std::invalid_argument("eta_sta must be in (0, 1]");
  if (latest_epoch_scores_.empty()) return;  // empty epoch: omega unchanged
  const size_t n = latest_epoch_scores_.size();
  const size_t k = static_cast<size_t>(std::ceil(eta_sta * static_cast<double>(n)));
  std::vector<double> sorted = latest_epoch_scores_;
  std::sort(sorted.begin(), sorted.end(), std::greater<double>());
  omega_ = sorted[k - 1];  // k-th largest
  omega_max_ = has_omega_ ? std::max(omega_max_, omega_) : omega_;
  has_omega_ = true;
  latest_epoch_scores_.clear();
}

std::vector<std::pair<size_t, double>> score_trajectory_states(const Trajectory& traj,
                                                               int lambda, ScoringMode mode) {
  if (lambda <= 0) throw std::invalid_argument("lambda must be positive");
  std::vector<std::pair<size_t, double>> out;
  const size_t T = traj.length();
  if (T == 0) return out;
  if (mode == ScoringMode::kNextLambdaSum) {
    // Truncated trajectories give no fair lookahead to their last lambda-1
    // states; terminal failures keep their (low) partial sums.
    const size_t last = traj.terminated
                            ? T - 1
                            : (T >= static_cast<size_t>(lambda)
                                   ? T - static_cast<size_t>(lambda)
                                   : static_cast<size_t>(-1));
    if (last == static_cast<size_t>(-1)) return out;
    out.reserve(last + 1);
    for (size_t t = 0; t <= last; ++t) {
      const size_t end = std::min(t + static_cast<size_t>(lambda), T);
      double s = 0.0;
      for (size_t i = t; i < end; ++i) s += traj.steps[i].reward;
      out.emplace_back(t, s);
    }
  } else {
    out.reserve(T);
    double tail = 0.0;
    std::vector<double> tails(T);
    for (size_t t = T; t-- > 0;) {
      tail += traj.steps[t].reward;
      tails[t] = tail;
    }
    for (size_t t = 0; t < T; ++t)
      out.emplace_back(t, tails[t] / static_cast<double>(T - t));
  }
  return out;
}

std::optional<size_t> select_start_state(const StateArchive& archive, const Agent& agent,
                                         int n_candidates, double gamma_ratio, Rng& rng) {
  if (n_candidates < 1) throw std::invalid_argument("n_candidates must be >= 1");
  if (archive.empty()) return std::nullopt;

  auto eligible = [&](size_t i) {
    return archive[i].score * gamma_ratio >= archive.omega_max();
  };

  std::vector<size_t> candidates;
  candidates.reserve(static_cast<size_t>(n_candidates));
  const int max_attempts = 50 * n_candidates;
  for (int attempt = 0;
       attempt < max_attempts && candidates.size() < static_cast<size_t>(n_candidates);
       ++attempt) {
    const size_t i = rng.below(archive.size());
    if (!eligible(i)) continue;
    if (std::find(candidates.begin(), candidates.end(), i) != candidates.end()) continue;
    candidates.push_back(i);
  }
  if (candidates.size() < static_cast<size_t>(n_candidates)) {
    // Rejection budget exhausted: scan for the true eligible pool.  A pool
    // no larger than n_candidates is taken whole; otherwise top up by
    // sampling the scan result without replacement.
    std::vector<size_t> pool;
    for (size_t i = 0; i < archive.size(); ++i)
      if (eligible(i)) pool.push_back(i);
    if (pool.empty()) return std::nullopt;
    if (pool.size() <= static_cast<size_t>(n_candidates)) {
      candidates = pool;
    } else {
      candidates.clear();
      for (int k = 0; k < n_candidates; ++k) {
        const size_t j = k + rng.below(pool.size() - k);
        std::swap(pool[k], pool[j]);
        candidates.push_back(pool[k]);
      }
    }
  }

  if (candidates.size() == 1) return candidates[0];

  size_t best = candidates[0];
  double best_q = std::numeric_limits<double>::infinity();
  for (size_t idx : candidates) {
    const ScoredState& e = archive[idx];
    Rng dummy(0);  // deterministic action: rng unused
    const ActionVector a = agent.act(e.observation, ActMode::kDeterministic, dummy);
    const double q = agent.q_value(e.observation, a);
    if (q < best_q) {
      best_q = q;
      best = idx;
    }
  }
  return best;
}

void write_state_pool(std::ostream& out, const std::string& env_id,
                      const std::vector<ScoredState>& entries) {
  io::write_magic(out, "RGSA");
  io::write_u16(out, kArchiveFormatVersion);
  io::write_string(out, env_id);
  io::write_u64(out, entries.size());
  for (const ScoredState& e : entries) {
    if (e.env_state.env_id != env_id)
      throw std::invalid_argument("pool entry env_id mismatch");
    write_env_state(out, e.env_state);
    io::write_f32(out, static_cast<float>(e.score));
    io::write_u32(out, e.epoch);
    io::write_f32(out, static_cast<float>(e.q_at_insert));
  }
}

std::vector<ScoredState> read_state_pool(std::istream& in, const Env& env) {
  io::expect_magic(in, "RGSA", "state pool");
  io::expect_version(in, kArchiveFormatVersion, "state pool");
  const std::string env_id = io::read_string(in, 4096);
  if (env_id != env.env_id())
    throw FormatError("state pool belongs to '" + env_id + "', not '" + env.env_id() + "'");
  const uint64_t count = io::read_u64(in);
  std::vector<ScoredState> entries;
  entries.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    ScoredState e;
    e.env_state = read_env_state(in);
    e.observation = env.restore(e.env_state);
    e.score = static_cast<double>(io::read_f32(in));
    e.epoch = io::read_u32(in);
    e.q_at_insert = static_cast<double>(io::read_f32(in));
    entries.push_back(std::move(e));
  }
  return entries;
}

void save_state_pool(const std::string& path, const std::string& env_id,
                     const std::vector<ScoredState>& entries) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_state_pool(out, env_id, entries);
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<ScoredState> load_state_pool(const std::string& path, const Env& env) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_state_pool(in, env);
}

void export_pool_csv(const std::string& path, const std::vector<ScoredState>& entries) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  const size_t d_obs = entries.empty() ? 0 : entries.front().observation.values.size();
  out << "epoch,score,q_at_insert";
  for (size_t i = 0; i < d_obs; ++i) out << ",obs" << i;
  out << "\n";
  std::ostringstream row;
  row.precision(10);
  for (const ScoredState& e : entries) {
    row.str("");
    row << e.epoch << "," << e.score << "," << e.q_at_insert;
    for (double v : e.observation.values) row << "," << v;
    out << row.str() << "\n";
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace relaygen
