#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace relaygen {

// 16-byte serializable generator state: (key, counter).
struct RngState {
  uint64_t key = 0;
  uint64_t counter = 0;

  bool operator==(const RngState&) const = default;
};

// Counter-based generator in the splitmix64 family.  The i-th output is a
// bijective hash of key + i*phi, so the stream is a pure function of the
// (key, counter) pair and restoring the pair restores the stream exactly.
// split(tag) derives an independent child stream without disturbing the
// parent, which lets every consumer (env resets, action noise, batch
// sampling, ...) own an addressable stream keyed by purpose.
class Rng {
 public:
  Rng() = default;

  explicit Rng(uint64_t seed) : state_{mix(seed + kPhi), 0} {}

  static Rng from_state(const RngState& s) {
    Rng r;
    r.state_ = s;
    return r;
  }

  const RngState& state() const { return state_; }

  // Child stream addressed by tag; the parent's counter is not consumed.
  Rng split(uint64_t tag) const {
    Rng child;
    child.state_.key = mix(state_.key ^ mix(tag * kPhi + 0x632BE59BD9B4E019ULL));
    child.state_.counter = 0;
    return child;
  }

  uint64_t next_u64() { return mix(state_.key + kPhi * ++state_.counter); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n).
  uint64_t below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Standard normal via Box-Muller.  Always consumes exactly two uniforms and
  // never caches the sine branch, so the draw count per call is fixed and the
  // (key, counter) state fully determines every future sample.
  double normal() {
    const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  static constexpr uint64_t kPhi = 0x9E3779B97F4A7C15ULL;
  static constexpr double kPi = 3.141592653589793238462643383279502884;

  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  RngState state_;
};

// Canonical stream derivation for experiment runs: every piece of randomness
// in a run hangs off (master_seed, run_index, purpose_tag).
inline Rng make_run_stream(uint64_t master_seed, uint64_t run_index, uint64_t purpose_tag) {
  return Rng(master_seed).split(run_index).split(purpose_tag);
}

// Purpose tags used across the workbench.  Kept in one place so two
// subsystems can never collide on a stream by accident.
namespace stream_tag {
constexpr uint64_t kEnvReset = 1;
constexpr uint64_t kActionNoise = 2;
constexpr uint64_t kBatchSampling = 3;
constexpr uint64_t kInit = 4;
constexpr uint64_t kStartScheduler = 5;
constexpr uint64_t kHarvest = 6;
constexpr uint64_t kEval = 7;
constexpr uint64_t kHyperparams = 8;
constexpr uint64_t kTrainer = 9;
}  // namespace stream_tag

}  // namespace relaygen
