#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "valrl/archive.hpp"
#include "valrl/envs.hpp"
#include "valrl/rng.hpp"

namespace valrl::replay {

// Complete binary tree over leaf priorities; every internal node holds the
// sum of its two children, so prefix-sum sampling costs O(log n).
class SumTree {
 public:
  // Leaf count is rounded up to a power of two.
  explicit SumTree(std::size_t min_leaves);

  std::size_t capacity() const { return leaves_; }

  // O(log capacity) node writes. Priority must be finite and >= 0.
  void set_priority(std::size_t leaf, double priority);
  double priority(std::size_t leaf) const { return nodes_[leaves_ - 1 + leaf]; }
  double total() const { return nodes_[0]; }
  double max_recorded_priority() const { return max_recorded_; }

  // The leaf whose running prefix sum first exceeds u, for u in [0, total).
  std::size_t query_prefix(double u) const;

  // One draw per equal-mass stratum of [0, total). Throws ReplayNotReady when
  // the tree holds no mass.
  std::vector<std::size_t> stratified_sample(std::size_t batch_size, Rng& rng) const;
  // A single uniform draw inside stratum `index` of `count`.
  std::size_t sample_stratum(std::size_t index, std::size_t count, Rng& rng) const;

  const std::vector<double>& nodes() const { return nodes_; }
  // Replaces all nodes (checkpoint restore); sizes must match.
  void restore(std::vector<double> nodes, double max_recorded);

  friend bool operator==(const SumTree&, const SumTree&) = default;

 private:
  std::size_t leaves_;
  std::vector<double> nodes_;
  double max_recorded_ = 0.0;
};

struct StoreConfig {
  std::size_t capacity = 100000;  // frames
  std::size_t frame_width = 1;
  std::size_t frame_height = 1;
  std::size_t stack_size = 1;
  std::size_t update_horizon = 1;
  double gamma = 0.99;
  double importance_exponent = 0.5;  // beta in w_i ∝ (1/p_i)^beta
  std::size_t max_sample_attempts = 1000;

  friend bool operator==(const StoreConfig&, const StoreConfig&) = default;
};

struct ReplayBatch {
  std::size_t size = 0;
  std::size_t state_size = 0;
  std::vector<double> states;       // size x state_size
  std::vector<int> actions;
  std::vector<double> n_step_returns;
  std::vector<double> next_states;  // size x state_size
  std::vector<std::uint8_t> terminal_within_n;
  std::vector<std::size_t> horizon_used;
  std::vector<std::uint64_t> sample_indices;  // logical (ever-increasing) indices
  std::vector<double> sampling_probabilities;
  std::vector<double> importance_weights;  // normalized by the batch max; all 1 for uniform

  std::span<const double> state(std::size_t i) const { return {states.data() + i * state_size, state_size}; }
  std::span<const double> next_state(std::size_t i) const {
    return {next_states.data() + i * state_size, state_size};
  }
};

// What an index expands to when it is valid.
struct Horizon {
  std::size_t steps = 0;  // m <= n
  bool terminal = false;
};

// Circular store of single frames with actions, rewards and replay-terminal
// flags. Stacks of `stack_size` frames are rebuilt at sampling time and
// zero-padded at episode starts; n-step returns are assembled on demand.
//
// Indices are logical: the i-th added transition has index i forever, and
// lives in slot i % capacity until overwritten.
class TransitionStore {
 public:
  explicit TransitionStore(const StoreConfig& config);

  const StoreConfig& config() const { return config_; }
  std::size_t capacity() const { return config_.capacity; }
  std::size_t count() const { return total_adds_ < config_.capacity ? total_adds_ : config_.capacity; }
  std::uint64_t total_adds() const { return total_adds_; }
  std::size_t write_cursor() const { return total_adds_ % config_.capacity; }
  std::uint64_t oldest_index() const { return total_adds_ - count(); }
  std::size_t state_size() const { return config_.stack_size * frame_size_; }

  // Appends a transition: the frame observed before acting, the action, the
  // reward received, and whether the replay episode ended with this step.
  void add(const envs::Frame& frame, int action, double reward, bool replay_terminal);
  // The next add starts a new episode even though no terminal was stored
  // (an episode cut short by a step cap).
  void mark_episode_boundary() { pending_start_ = true; }

  // Valid iff the stack and the n-step lookahead stay inside stored data and
  // inside one episode (a lookahead may end at a terminal).
  bool is_valid(std::uint64_t index, Horizon* horizon = nullptr) const;

  std::vector<double> stack_at(std::uint64_t index) const;
  double n_step_return(std::uint64_t index, std::size_t steps) const;

  ReplayBatch sample_uniform(std::size_t batch_size, Rng& rng) const;
  // One stratified draw per row; a row whose draw is invalid is redrawn
  // from the whole tree.
  ReplayBatch sample_prioritized(std::size_t batch_size, Rng& rng) const;
  ReplayBatch batch_for(std::span<const std::uint64_t> indices) const;

  // Priorities for logical indices; stale (overwritten) indices are skipped.
  void update_priorities(std::span<const std::uint64_t> indices, std::span<const double> priorities);
  double priority(std::uint64_t index) const { return tree_.priority(slot(index)); }
  const SumTree& tree() const { return tree_; }

  // Raw slot access for tests and tooling.
  int action_at(std::uint64_t index) const { return static_cast<int>(actions_[slot(index)]); }
  double reward_at(std::uint64_t index) const { return rewards_[slot(index)]; }
  bool terminal_at(std::uint64_t index) const { return flags_[slot(index)] & kTerminal; }
  bool episode_start_at(std::uint64_t index) const { return flags_[slot(index)] & kEpisodeStart; }

  archive::Bytes checkpoint() const;
  static TransitionStore restore(std::span<const std::uint8_t> bytes);

  friend bool operator==(const TransitionStore&, const TransitionStore&) = default;

 private:
  static constexpr std::uint8_t kTerminal = 1;
  static constexpr std::uint8_t kEpisodeStart = 2;

  std::size_t slot(std::uint64_t index) const { return static_cast<std::size_t>(index % config_.capacity); }
  std::uint64_t index_of_slot(std::size_t slot) const;
  void fill(ReplayBatch& batch, std::size_t row, std::uint64_t index, const Horizon& h) const;
  ReplayBatch make_batch(std::size_t batch_size) const;

  StoreConfig config_;
  std::size_t frame_size_;
  std::vector<std::uint8_t> frames_;
  std::vector<std::int64_t> actions_;
  std::vector<double> rewards_;
  std::vector<std::uint8_t> flags_;
  std::uint64_t total_adds_ = 0;
  bool pending_start_ = true;
  SumTree tree_;
  double max_priority_ = 1.0;
};

}  // namespace valrl::replay
