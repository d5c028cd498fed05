#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "relaygen/agent.hpp"
#include "relaygen/rng.hpp"

namespace relaygen {

struct Transition {
  std::vector<float> obs;
  std::vector<float> action;
  float reward = 0.0f;
  std::vector<float> next_obs;
  bool terminated = false;  // false for time-limit ends: those still bootstrap
};

// Uniform-sampling replay store.  capacity == 0 means unbounded (keep
// everything); otherwise the oldest transition is overwritten ring-style.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity) : capacity_(capacity) {}

  void add(Transition t) {
    if (capacity_ == 0 || data_.size() < capacity_) {
      data_.push_back(std::move(t));
    } else {
      data_[next_slot_] = std::move(t);
      next_slot_ = (next_slot_ + 1) % capacity_;
    }
  }

  size_t size() const { return data_.size(); }
  size_t capacity() const { return capacity_; }
  const Transition& operator[](size_t i) const { return data_[i]; }

  // Uniform with replacement.  Index draws come in batch order from rng, so
  // equal buffer contents plus an equal rng state give a bitwise-equal batch.
  TransitionBatch sample(int batch_size, Rng& rng) const {
    if (data_.empty()) throw std::logic_error("cannot sample from an empty replay buffer");
    if (batch_size <= 0) throw std::invalid_argument("batch_size must be positive");
    const int d_obs = static_cast<int>(data_[0].obs.size());
    const int d_act = static_cast<int>(data_[0].action.size());
    TransitionBatch b;
    b.size = batch_size;
    b.obs.resize(d_obs, batch_size);
    b.actions.resize(d_act, batch_size);
    b.next_obs.resize(d_obs, batch_size);
    b.rewards.resize(batch_size);
    b.done.resize(batch_size);
    for (int k = 0; k < batch_size; ++k) {
      const Transition& t = data_[rng.below(data_.size())];
      for (int i = 0; i < d_obs; ++i) b.obs(i, k) = static_cast<real_t>(t.obs[i]);
      for (int i = 0; i < d_act; ++i) b.actions(i, k) = static_cast<real_t>(t.action[i]);
      for (int i = 0; i < d_obs; ++i) b.next_obs(i, k) = static_cast<real_t>(t.next_obs[i]);
      b.rewards(k) = static_cast<real_t>(t.reward);
      b.done(k) = t.terminated ? real_t(1) : real_t(0);
    }
    return b;
  }

 private:
  size_t capacity_;
  size_t next_slot_ = 0;
  std::vector<Transition> data_;
};

}  // namespace relaygen
