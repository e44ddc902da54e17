#include "valrl/rng.hpp"

#include <sstream>

#include "valrl/errors.hpp"

namespace valrl {

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

Rng Rng::substream(std::uint64_t master_seed, std::string_view name) {
  const std::uint64_t tag = fnv1a64(name);
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(tag),
                    static_cast<std::uint32_t>(tag >> 32)};
  Rng rng;
  rng.engine_.seed(seq);
  return rng;
}

std::size_t Rng::uniform_index(std::size_t n) {
  if (n == 0) throw ContractViolation("uniform_index: empty range");
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  // Reject the low remainder so every residue is equally likely.
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t x = engine_();
    if (x >= threshold) return static_cast<std::size_t>(x % bound);
  }
}

std::string Rng::state() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::set_state(std::string_view state) {
  std::istringstream in{std::string(state)};
  std::mt19937_64 engine;
  in >> engine;
  if (in.fail()) throw RestoreError("rng: malformed engine state");
  engine_ = engine;
}

}  // namespace valrl
