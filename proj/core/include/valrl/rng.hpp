#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace valrl {

// Seeded pseudo-random stream. The distribution helpers are written out by
// hand (rather than using std::*_distribution) so sequences are identical
// across standard library implementations, and the full engine state can be
// saved into checkpoints.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  // Independent stream derived from a master seed and a stream name, e.g.
  // substream(seed, "env"). Changing how one component consumes randomness
  // never perturbs another component's stream.
  static Rng substream(std::uint64_t master_seed, std::string_view name);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be positive.
  std::size_t uniform_index(std::size_t n);

  bool bernoulli(double p) { return uniform() < p; }

  std::string state() const;
  void set_state(std::string_view state);

  friend bool operator==(const Rng& a, const Rng& b) { return a.engine_ == b.engine_; }

 private:
  std::mt19937_64 engine_;
};

// 64-bit FNV-1a, used for stream naming and config fingerprints.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace valrl
