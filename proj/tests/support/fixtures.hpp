#pragma once

// Small helpers shared by the unit and acceptance tests.

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "valrl/replay.hpp"
#include "valrl/rng.hpp"
#include "valrl/warnings.hpp"

namespace fixtures {

// Collects warnings for the lifetime of the object.
class CaptureWarnings {
 public:
  CaptureWarnings() {
    previous_ = valrl::set_warning_sink([this](const std::string& m) { messages.push_back(m); });
  }
  ~CaptureWarnings() { valrl::set_warning_sink(previous_); }
  CaptureWarnings(const CaptureWarnings&) = delete;
  CaptureWarnings& operator=(const CaptureWarnings&) = delete;

  bool any_contains(const std::string& needle) const {
    for (const auto& m : messages) {
      if (m.find(needle) != std::string::npos) return true;
    }
    return false;
  }

  std::vector<std::string> messages;

 private:
  valrl::WarningSink previous_;
};

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("valrl-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// A batch with random states, rewards, horizons and terminal flags, as the
// store would hand it out. Terminal rows get all-zero next states.
inline valrl::replay::ReplayBatch random_batch(std::size_t size, std::size_t state_size, std::size_t num_actions,
                                               std::size_t max_horizon, valrl::Rng& rng, bool prioritized = false) {
  valrl::replay::ReplayBatch b;
  b.size = size;
  b.state_size = state_size;
  b.states.resize(size * state_size);
  b.next_states.assign(size * state_size, 0.0);
  for (auto& v : b.states) v = rng.uniform();
  for (std::size_t i = 0; i < size; ++i) {
    b.actions.push_back(static_cast<int>(rng.uniform_index(num_actions)));
    b.n_step_returns.push_back(rng.uniform(-1.5, 1.5));
    const bool terminal = rng.bernoulli(0.25);
    b.terminal_within_n.push_back(terminal ? 1 : 0);
    b.horizon_used.push_back(1 + rng.uniform_index(max_horizon));
    if (!terminal) {
      for (std::size_t j = 0; j < state_size; ++j) b.next_states[i * state_size + j] = rng.uniform();
    }
    b.sample_indices.push_back(i);
    b.sampling_probabilities.push_back(1.0 / static_cast<double>(size));
    b.importance_weights.push_back(prioritized ? rng.uniform(0.2, 1.0) : 1.0);
  }
  return b;
}

inline std::vector<double> uniform_vector(std::size_t n, valrl::Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform();
  return v;
}

}  // namespace fixtures
