#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "valrl/rng.hpp"

namespace valrl::envs {

// A width x height grid of intensities in [0, 1], held as 8-bit levels the
// same way the replay memory stores it.
class Frame {
 public:
  Frame() = default;
  Frame(std::size_t width, std::size_t height) : width_(width), height_(height), pixels_(width * height, 0) {}

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return pixels_.size(); }

  double at(std::size_t x, std::size_t y) const { return pixels_[y * width_ + x] / 255.0; }
  // Intensity must lie in [0, 1]; it is rounded to the nearest 1/255 level.
  void set(std::size_t x, std::size_t y, double intensity);

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> mutable_pixels() { return pixels_; }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

using Observation = Frame;

struct StepResult {
  Frame observation;
  double reward = 0.0;
  bool game_over = false;
  bool life_lost = false;
  int lives_remaining = 0;
};

class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::string name() const = 0;
  virtual std::size_t num_actions() const = 0;
  virtual std::size_t frame_width() const = 0;
  virtual std::size_t frame_height() const = 0;

  virtual Frame reset() = 0;
  // Throws ContractViolation for an out-of-range action or when the game is
  // over (reset first).
  virtual StepResult step(int action) = 0;

  // Opaque state (game position plus any internal rng) for checkpoints.
  virtual std::string save_state() const = 0;
  virtual void restore_state(std::string_view state) = 0;
};

// N states on a line, actions {LEFT, RIGHT}. Reaching the right end pays +1
// and ends the game; every other step pays 0. The game also ends after
// 4N steps.
class ChainMdp final : public Environment {
 public:
  enum Action : int { kLeft = 0, kRight = 1 };

  explicit ChainMdp(std::size_t num_states = 10);

  std::string name() const override { return "ChainMDP"; }
  std::size_t num_actions() const override { return 2; }
  std::size_t frame_width() const override { return num_states_; }
  std::size_t frame_height() const override { return 1; }

  Frame reset() override;
  StepResult step(int action) override;
  std::string save_state() const override;
  void restore_state(std::string_view state) override;

  std::size_t position() const { return position_; }
  std::size_t max_steps() const { return 4 * num_states_; }
  // Puts the walker at `position` without touching the step counter.
  void set_position(std::size_t position);

 private:
  Frame render() const;

  std::size_t num_states_;
  std::size_t position_ = 0;
  std::size_t steps_ = 0;
  bool game_over_ = false;
};

// Balls drop one at a time down a 10x10 board; a 3-cell paddle on the bottom
// row moves LEFT / STAY / RIGHT. A catch pays +1, a miss pays -1 and costs a
// life. The game ends when the lives run out or every ball has been dropped.
// A new ball appears on the top row (random column) on the step after the
// previous one resolves, so each ball takes exactly `kStepsPerBall` steps.
class CatchLives final : public Environment {
 public:
  enum Action : int { kLeft = 0, kStay = 1, kRight = 2 };
  static constexpr std::size_t kSize = 10;
  static constexpr std::size_t kPaddleWidth = 3;
  static constexpr std::size_t kStepsPerBall = kSize;

  explicit CatchLives(std::uint64_t seed = 0, int lives = 3, int balls_per_game = 10);

  std::string name() const override { return "CatchLives"; }
  std::size_t num_actions() const override { return 3; }
  std::size_t frame_width() const override { return kSize; }
  std::size_t frame_height() const override { return kSize; }

  Frame reset() override;
  StepResult step(int action) override;
  std::string save_state() const override;
  void restore_state(std::string_view state) override;

  int lives() const { return lives_; }
  int max_lives() const { return max_lives_; }
  int balls_per_game() const { return balls_per_game_; }
  std::size_t paddle_left() const { return paddle_left_; }
  bool ball_in_flight() const { return ball_in_flight_; }
  std::size_t ball_x() const { return ball_x_; }
  std::size_t ball_y() const { return ball_y_; }

 private:
  Frame render() const;

  Rng rng_;
  int max_lives_;
  int balls_per_game_;
  int lives_ = 0;
  int balls_dropped_ = 0;
  std::size_t paddle_left_ = 0;
  std::size_t ball_x_ = 0;
  std::size_t ball_y_ = 0;
  bool ball_in_flight_ = false;
  bool game_over_ = false;
};

std::unique_ptr<Environment> make_environment(std::string_view name, std::uint64_t seed,
                                              std::size_t chain_states = 10, int catch_lives = 3,
                                              int catch_balls = 10);

enum class TerminationMode { kGameOver, kLifeLoss };

TerminationMode parse_termination_mode(std::string_view name);
const char* to_string(TerminationMode mode);

// Whether this step closes an episode in the replay memory. The environment
// itself is only reset on game over, in both modes.
bool terminal_for_replay(const StepResult& result, TerminationMode mode);

struct StickyConfig {
  double stickiness = 0.0;
  std::optional<int> previous_action;
};

// With probability `stickiness` repeats the previously executed action (if
// any) instead of `chosen_action`. Records the executed action in
// `sticky.previous_action` and, when non-null, in `*executed`.
StepResult sticky_step(Environment& env, int chosen_action, StickyConfig& sticky, Rng& rng,
                       int* executed = nullptr);

// Environment decorator applying sticky_step on every step and clearing the
// previous action on reset.
class StickyActionEnvironment final : public Environment {
 public:
  StickyActionEnvironment(std::unique_ptr<Environment> inner, double stickiness, Rng rng);

  std::string name() const override { return inner_->name(); }
  std::size_t num_actions() const override { return inner_->num_actions(); }
  std::size_t frame_width() const override { return inner_->frame_width(); }
  std::size_t frame_height() const override { return inner_->frame_height(); }

  Frame reset() override;
  StepResult step(int action) override;
  std::string save_state() const override;
  void restore_state(std::string_view state) override;

  // Disabled stickiness passes actions straight through without consuming
  // randomness.
  void set_enabled(bool enabled) { enabled_ = enabled; }
  bool enabled() const { return enabled_; }
  double stickiness() const { return sticky_.stickiness; }
  std::optional<int> last_executed_action() const { return sticky_.previous_action; }
  Environment& inner() { return *inner_; }

 private:
  std::unique_ptr<Environment> inner_;
  StickyConfig sticky_;
  Rng rng_;
  bool enabled_ = true;
};

// The k most recent frames, oldest first, flattened to intensities; missing
// history (episode start) is zero-padded at the front.
std::vector<double> stack_frames(std::span<const Frame> history, std::size_t k, std::size_t width,
                                 std::size_t height);

class FrameStack {
 public:
  FrameStack(std::size_t k, std::size_t width, std::size_t height);

  void reset();
  void push(const Frame& frame);
  std::vector<double> stacked() const;

  std::size_t depth() const { return k_; }
  std::size_t state_size() const { return k_ * width_ * height_; }
  const std::vector<Frame>& history() const { return history_; }

 private:
  std::size_t k_, width_, height_;
  std::vector<Frame> history_;  // at most k frames, oldest first
};

}  // namespace valrl::envs
