#include "valrl/replay.hpp"

#include <algorithm>
#include <cmath>

#include "valrl/errors.hpp"

namespace valrl::replay {

TransitionStore::TransitionStore(const StoreConfig& config)
    : config_(config),
      frame_size_(config.frame_width * config.frame_height),
      frames_(config.capacity * frame_size_, 0),
      actions_(config.capacity, 0),
      rewards_(config.capacity, 0.0),
      flags_(config.capacity, 0),
      tree_(config.capacity) {
  if (config.capacity == 0) throw ContractViolation("TransitionStore: capacity must be positive");
  if (frame_size_ == 0) throw ContractViolation("TransitionStore: empty frame shape");
  if (config.stack_size == 0 || config.update_horizon == 0) {
    throw ContractViolation("TransitionStore: stack size and update horizon must be >= 1");
  }
  if (!(config.gamma >= 0.0 && config.gamma <= 1.0)) throw ContractViolation("TransitionStore: gamma outside [0,1]");
}

void TransitionStore::add(const envs::Frame& frame, int action, double reward, bool replay_terminal) {
  if (frame.width() != config_.frame_width || frame.height() != config_.frame_height) {
    throw ContractViolation("TransitionStore::add: frame is " + std::to_string(frame.width()) + "x" +
                            std::to_string(frame.height()) + ", store expects " +
                            std::to_string(config_.frame_width) + "x" + std::to_string(config_.frame_height));
  }
  const std::size_t s = write_cursor();
  auto pixels = frame.pixels();
  std::copy(pixels.begin(), pixels.end(), frames_.begin() + static_cast<std::ptrdiff_t>(s * frame_size_));
  actions_[s] = action;
  rewards_[s] = reward;
  flags_[s] = static_cast<std::uint8_t>((replay_terminal ? kTerminal : 0) | (pending_start_ ? kEpisodeStart : 0));
  tree_.set_priority(s, max_priority_);
  pending_start_ = replay_terminal;
  ++total_adds_;
}

std::uint64_t TransitionStore::index_of_slot(std::size_t s) const {
  if (total_adds_ <= config_.capacity) return s;
  const std::size_t cursor = write_cursor();
  return total_adds_ - config_.capacity + (s + config_.capacity - cursor) % config_.capacity;
}

bool TransitionStore::is_valid(std::uint64_t index, Horizon* horizon) const {
  if (index < oldest_index() || index >= total_adds_) return false;

  // The stack walks back to an episode start or k-1 frames, whichever comes
  // first, and must not need overwritten frames.
  for (std::size_t j = 0; j + 1 < config_.stack_size; ++j) {
    if (flags_[slot(index - j)] & kEpisodeStart) break;
    if (index - j == oldest_index()) return false;
  }

  const std::size_t n = config_.update_horizon;
  for (std::size_t j = 0; j < n; ++j) {
    const std::uint64_t i = index + j;
    if (i >= total_adds_) return false;
    const std::uint8_t f = flags_[slot(i)];
    if (j > 0 && (f & kEpisodeStart)) return false;  // episode was cut without a terminal
    if (f & kTerminal) {
      if (horizon) *horizon = Horizon{j + 1, true};
      return true;
    }
  }
  const std::uint64_t next = index + n;
  if (next >= total_adds_) return false;
  if (flags_[slot(next)] & kEpisodeStart) return false;
  if (horizon) *horizon = Horizon{n, false};
  return true;
}

std::vector<double> TransitionStore::stack_at(std::uint64_t index) const {
  const std::size_t k = config_.stack_size;
  std::vector<double> out(k * frame_size_, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    const std::uint64_t i = index - j;
    const std::uint8_t* src = frames_.data() + slot(i) * frame_size_;
    double* dst = out.data() + (k - 1 - j) * frame_size_;
    for (std::size_t p = 0; p < frame_size_; ++p) dst[p] = src[p] / 255.0;
    if (flags_[slot(i)] & kEpisodeStart) break;
    if (i == 0) break;
  }
  return out;
}

double TransitionStore::n_step_return(std::uint64_t index, std::size_t steps) const {
  double total = 0.0;
  for (std::size_t j = 0; j < steps; ++j) total += std::pow(config_.gamma, static_cast<double>(j)) * rewards_[slot(index + j)];
  return total;
}

ReplayBatch TransitionStore::make_batch(std::size_t batch_size) const {
  ReplayBatch b;
  b.size = batch_size;
  b.state_size = state_size();
  b.states.resize(batch_size * b.state_size);
  b.next_states.resize(batch_size * b.state_size);
  b.actions.resize(batch_size);
  b.n_step_returns.resize(batch_size);
  b.terminal_within_n.resize(batch_size);
  b.horizon_used.resize(batch_size);
  b.sample_indices.resize(batch_size);
  b.sampling_probabilities.assign(batch_size, 1.0);
  b.importance_weights.assign(batch_size, 1.0);
  return b;
}

void TransitionStore::fill(ReplayBatch& b, std::size_t row, std::uint64_t index, const Horizon& h) const {
  const auto state = stack_at(index);
  std::copy(state.begin(), state.end(), b.states.begin() + static_cast<std::ptrdiff_t>(row * b.state_size));
  if (!h.terminal) {
    const auto next = stack_at(index + h.steps);
    std::copy(next.begin(), next.end(), b.next_states.begin() + static_cast<std::ptrdiff_t>(row * b.state_size));
  }
  b.actions[row] = static_cast<int>(actions_[slot(index)]);
  b.n_step_returns[row] = n_step_return(index, h.steps);
  b.terminal_within_n[row] = h.terminal ? 1 : 0;
  b.horizon_used[row] = h.steps;
  b.sample_indices[row] = index;
}

ReplayBatch TransitionStore::sample_uniform(std::size_t batch_size, Rng& rng) const {
  if (count() == 0) throw ReplayNotReady("replay: store is empty");
  ReplayBatch b = make_batch(batch_size);
  const double p = 1.0 / static_cast<double>(count());
  for (std::size_t row = 0; row < batch_size; ++row) {
    Horizon h;
    std::size_t attempts = 0;
    std::uint64_t index = 0;
    do {
      if (attempts++ == config_.max_sample_attempts) {
        throw ReplayNotReady("replay: no valid transition after " + std::to_string(config_.max_sample_attempts) +
                             " draws");
      }
      index = oldest_index() + rng.uniform_index(count());
    } while (!is_valid(index, &h));
    fill(b, row, index, h);
    b.sampling_probabilities[row] = p;
  }
  return b;
}

ReplayBatch TransitionStore::sample_prioritized(std::size_t batch_size, Rng& rng) const {
  if (count() == 0) throw ReplayNotReady("replay: store is empty");
  if (!(tree_.total() > 0.0)) throw ReplayNotReady("replay: no priority mass");
  ReplayBatch b = make_batch(batch_size);
  const double total = tree_.total();
  for (std::size_t row = 0; row < batch_size; ++row) {
    Horizon h;
    std::size_t attempts = 0;
    std::size_t leaf = 0;
    for (;;) {
      if (attempts++ == config_.max_sample_attempts) {
        throw ReplayNotReady("replay: no valid transition after " + std::to_string(config_.max_sample_attempts) +
                             " prioritized draws");
      }
      // The first draw comes from this row's stratum; retries sample the
      // whole tree, since a stratum may hold no valid transition at all.
      leaf = attempts == 1 ? tree_.sample_stratum(row, batch_size, rng) : tree_.sample_stratum(0, 1, rng);
      if (leaf < config_.capacity && leaf < total_adds_ && is_valid(index_of_slot(leaf), &h)) break;
    }
    fill(b, row, index_of_slot(leaf), h);
    b.sampling_probabilities[row] = tree_.priority(leaf) / total;
  }
  double max_weight = 0.0;
  for (std::size_t row = 0; row < batch_size; ++row) {
    b.importance_weights[row] = std::pow(1.0 / b.sampling_probabilities[row], config_.importance_exponent);
    max_weight = std::max(max_weight, b.importance_weights[row]);
  }
  for (auto& w : b.importance_weights) w /= max_weight;
  return b;
}

ReplayBatch TransitionStore::batch_for(std::span<const std::uint64_t> indices) const {
  ReplayBatch b = make_batch(indices.size());
  for (std::size_t row = 0; row < indices.size(); ++row) {
    Horizon h;
    if (!is_valid(indices[row], &h)) {
      throw ContractViolation("replay: index " + std::to_string(indices[row]) + " is not a valid transition");
    }
    fill(b, row, indices[row], h);
  }
  return b;
}

void TransitionStore::update_priorities(std::span<const std::uint64_t> indices, std::span<const double> priorities) {
  if (indices.size() != priorities.size()) throw ContractViolation("update_priorities: size mismatch");
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] < oldest_index() || indices[i] >= total_adds_) continue;
    tree_.set_priority(slot(indices[i]), priorities[i]);
    max_priority_ = std::max(max_priority_, priorities[i]);
  }
}

archive::Bytes TransitionStore::checkpoint() const {
  archive::Writer w;
  const std::uint64_t cfg[] = {config_.capacity, config_.frame_width, config_.frame_height, config_.stack_size,
                               config_.update_horizon, config_.max_sample_attempts};
  w.add_u64("config", cfg);
  const double cfg_f[] = {config_.gamma, config_.importance_exponent};
  w.add_f64("config_f64", cfg_f);
  w.add_scalar("total_adds", total_adds_);
  w.add_scalar("pending_start", pending_start_ ? 1 : 0);
  w.add_scalar_f64("max_priority", max_priority_);
  w.add_u8("frames", frames_, {config_.capacity, config_.frame_height, config_.frame_width});
  w.add_i64("actions", actions_);
  w.add_f64("rewards", rewards_);
  w.add_u8("flags", flags_);
  w.add_f64("priorities", tree_.nodes());
  w.add_scalar_f64("tree_max", tree_.max_recorded_priority());
  return w.finish();
}

TransitionStore TransitionStore::restore(std::span<const std::uint8_t> bytes) {
  archive::Reader r(bytes);
  const auto cfg = r.u64("config");
  const auto cfg_f = r.f64("config_f64");
  if (cfg.size() != 6 || cfg_f.size() != 2) throw RestoreError("replay: malformed store config record");
  StoreConfig config;
  config.capacity = cfg[0];
  config.frame_width = cfg[1];
  config.frame_height = cfg[2];
  config.stack_size = cfg[3];
  config.update_horizon = cfg[4];
  config.max_sample_attempts = cfg[5];
  config.gamma = cfg_f[0];
  config.importance_exponent = cfg_f[1];
  TransitionStore store(config);
  store.total_adds_ = r.scalar("total_adds");
  store.pending_start_ = r.scalar("pending_start") != 0;
  store.max_priority_ = r.scalar_f64("max_priority");
  store.frames_ = r.u8("frames");
  store.actions_ = r.i64("actions");
  store.rewards_ = r.f64("rewards");
  store.flags_ = r.u8("flags");
  if (store.frames_.size() != config.capacity * store.frame_size_ || store.actions_.size() != config.capacity ||
      store.rewards_.size() != config.capacity || store.flags_.size() != config.capacity) {
    throw RestoreError("replay: array sizes do not match capacity");
  }
  store.tree_.restore(r.f64("priorities"), r.scalar_f64("tree_max"));
  return store;
}

}  // namespace valrl::replay
