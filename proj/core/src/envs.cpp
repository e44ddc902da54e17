#include "valrl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "valrl/errors.hpp"

namespace valrl::envs {

void Frame::set(std::size_t x, std::size_t y, double intensity) {
  if (x >= width_ || y >= height_) throw ContractViolation("Frame::set: coordinates out of range");
  if (!(intensity >= 0.0 && intensity <= 1.0)) throw ContractViolation("Frame::set: intensity outside [0,1]");
  pixels_[y * width_ + x] = static_cast<std::uint8_t>(std::lround(intensity * 255.0));
}

// --- ChainMdp ---------------------------------------------------------------

ChainMdp::ChainMdp(std::size_t num_states) : num_states_(num_states) {
  if (num_states < 2) throw ContractViolation("ChainMDP needs at least 2 states");
}

Frame ChainMdp::render() const {
  Frame f(num_states_, 1);
  f.set(position_, 0, 1.0);
  return f;
}

Frame ChainMdp::reset() {
  position_ = 0;
  steps_ = 0;
  game_over_ = false;
  return render();
}

void ChainMdp::set_position(std::size_t position) {
  if (position >= num_states_) throw ContractViolation("ChainMDP: position out of range");
  position_ = position;
}

StepResult ChainMdp::step(int action) {
  if (action < 0 || action >= static_cast<int>(num_actions())) {
    throw ContractViolation("ChainMDP: action " + std::to_string(action) + " out of range");
  }
  if (game_over_) throw ContractViolation("ChainMDP: step after game over; call reset()");
  if (action == kRight) {
    ++position_;
  } else if (position_ > 0) {
    --position_;
  }
  ++steps_;
  StepResult result;
  if (position_ == num_states_ - 1) {
    result.reward = 1.0;
    game_over_ = true;
  } else if (steps_ >= max_steps()) {
    game_over_ = true;
  }
  result.game_over = game_over_;
  result.lives_remaining = game_over_ ? 0 : 1;
  result.observation = render();
  return result;
}

std::string ChainMdp::save_state() const {
  std::ostringstream out;
  out << position_ << ' ' << steps_ << ' ' << game_over_;
  return out.str();
}

void ChainMdp::restore_state(std::string_view state) {
  std::istringstream in{std::string(state)};
  std::size_t position = 0, steps = 0;
  bool game_over = false;
  in >> position >> steps >> game_over;
  if (in.fail() || position >= num_states_) throw RestoreError("ChainMDP: malformed state");
  position_ = position;
  steps_ = steps;
  game_over_ = game_over;
}

// --- CatchLives -------------------------------------------------------------

CatchLives::CatchLives(std::uint64_t seed, int lives, int balls_per_game)
    : rng_(seed), max_lives_(lives), balls_per_game_(balls_per_game) {
  if (lives < 1 || balls_per_game < 1) throw ContractViolation("CatchLives: lives and balls must be positive");
}

Frame CatchLives::render() const {
  Frame f(kSize, kSize);
  for (std::size_t i = 0; i < kPaddleWidth; ++i) f.set(paddle_left_ + i, kSize - 1, 1.0);
  if (ball_in_flight_) f.set(ball_x_, ball_y_, 1.0);
  return f;
}

Frame CatchLives::reset() {
  lives_ = max_lives_;
  balls_dropped_ = 0;
  paddle_left_ = (kSize - kPaddleWidth) / 2;
  ball_in_flight_ = false;
  ball_x_ = ball_y_ = 0;
  game_over_ = false;
  return render();
}

StepResult CatchLives::step(int action) {
  if (action < 0 || action >= static_cast<int>(num_actions())) {
    throw ContractViolation("CatchLives: action " + std::to_string(action) + " out of range");
  }
  if (game_over_) throw ContractViolation("CatchLives: step after game over; call reset()");

  if (action == kLeft && paddle_left_ > 0) --paddle_left_;
  if (action == kRight && paddle_left_ + kPaddleWidth < kSize) ++paddle_left_;

  StepResult result;
  if (!ball_in_flight_) {
    ball_in_flight_ = true;
    ball_x_ = rng_.uniform_index(kSize);
    ball_y_ = 0;
  } else if (++ball_y_ == kSize - 1) {
    ball_in_flight_ = false;
    ++balls_dropped_;
    if (ball_x_ >= paddle_left_ && ball_x_ < paddle_left_ + kPaddleWidth) {
      result.reward = 1.0;
    } else {
      result.reward = -1.0;
      result.life_lost = true;
      --lives_;
    }
    game_over_ = lives_ == 0 || balls_dropped_ == balls_per_game_;
  }
  result.game_over = game_over_;
  result.lives_remaining = lives_;
  result.observation = render();
  return result;
}

std::string CatchLives::save_state() const {
  std::ostringstream out;
  out << lives_ << ' ' << balls_dropped_ << ' ' << paddle_left_ << ' ' << ball_x_ << ' ' << ball_y_ << ' '
      << ball_in_flight_ << ' ' << game_over_ << '\n'
      << rng_.state();
  return out.str();
}

void CatchLives::restore_state(std::string_view state) {
  std::istringstream in{std::string(state)};
  in >> lives_ >> balls_dropped_ >> paddle_left_ >> ball_x_ >> ball_y_ >> ball_in_flight_ >> game_over_;
  if (in.fail()) throw RestoreError("CatchLives: malformed state");
  std::string rest;
  std::getline(in, rest);
  std::ostringstream rng_state;
  rng_state << in.rdbuf();
  rng_.set_state(rng_state.str());
}

std::unique_ptr<Environment> make_environment(std::string_view name, std::uint64_t seed,
                                              std::size_t chain_states, int catch_lives, int catch_balls) {
  if (name == "ChainMDP") return std::make_unique<ChainMdp>(chain_states);
  if (name == "CatchLives") return std::make_unique<CatchLives>(seed, catch_lives, catch_balls);
  throw ConfigError("unknown environment '" + std::string(name) + "' (expected ChainMDP or CatchLives)");
}

// --- termination ------------------------------------------------------------

TerminationMode parse_termination_mode(std::string_view name) {
  if (name == "GameOver") return TerminationMode::kGameOver;
  if (name == "LifeLoss") return TerminationMode::kLifeLoss;
  throw ConfigError("unknown termination mode '" + std::string(name) + "' (expected GameOver or LifeLoss)");
}

const char* to_string(TerminationMode mode) {
  return mode == TerminationMode::kGameOver ? "GameOver" : "LifeLoss";
}

bool terminal_for_replay(const StepResult& result, TerminationMode mode) {
  if (result.game_over) return true;
  return mode == TerminationMode::kLifeLoss && result.life_lost;
}

// --- sticky actions ---------------------------------------------------------

StepResult sticky_step(Environment& env, int chosen_action, StickyConfig& sticky, Rng& rng, int* executed) {
  if (!(sticky.stickiness >= 0.0 && sticky.stickiness <= 1.0)) {
    throw ContractViolation("sticky_step: stickiness must lie in [0,1]");
  }
  int action = chosen_action;
  if (rng.bernoulli(sticky.stickiness) && sticky.previous_action) action = *sticky.previous_action;
  StepResult result = env.step(action);
  sticky.previous_action = action;
  if (executed) *executed = action;
  return result;
}

StickyActionEnvironment::StickyActionEnvironment(std::unique_ptr<Environment> inner, double stickiness, Rng rng)
    : inner_(std::move(inner)), sticky_{stickiness, std::nullopt}, rng_(std::move(rng)) {
  if (!(stickiness >= 0.0 && stickiness <= 1.0)) throw ContractViolation("stickiness must lie in [0,1]");
}

Frame StickyActionEnvironment::reset() {
  sticky_.previous_action.reset();
  return inner_->reset();
}

StepResult StickyActionEnvironment::step(int action) {
  if (!enabled_) {
    StepResult result = inner_->step(action);
    sticky_.previous_action = action;
    return result;
  }
  return sticky_step(*inner_, action, sticky_, rng_);
}

std::string StickyActionEnvironment::save_state() const {
  std::ostringstream out;
  out << (sticky_.previous_action ? *sticky_.previous_action : -1) << '\n' << rng_.state() << '\n' << inner_->save_state();
  return out.str();
}

void StickyActionEnvironment::restore_state(std::string_view state) {
  const std::size_t first = state.find('\n');
  const std::size_t second = first == std::string_view::npos ? first : state.find('\n', first + 1);
  if (second == std::string_view::npos) throw RestoreError("sticky env: malformed state");
  const int prev = std::stoi(std::string(state.substr(0, first)));
  if (prev >= 0) {
    sticky_.previous_action = prev;
  } else {
    sticky_.previous_action.reset();
  }
  rng_.set_state(state.substr(first + 1, second - first - 1));
  inner_->restore_state(state.substr(second + 1));
}

// --- frame stacking ---------------------------------------------------------

std::vector<double> stack_frames(std::span<const Frame> history, std::size_t k, std::size_t width,
                                 std::size_t height) {
  if (k == 0) throw ContractViolation("stack_frames: k must be >= 1");
  const std::size_t frame_size = width * height;
  std::vector<double> out(k * frame_size, 0.0);
  const std::size_t available = std::min(k, history.size());
  const std::size_t pad = k - available;
  for (std::size_t i = 0; i < available; ++i) {
    const Frame& f = history[history.size() - available + i];
    if (f.size() != frame_size) throw ContractViolation("stack_frames: frame size mismatch");
    auto pixels = f.pixels();
    double* dst = out.data() + (pad + i) * frame_size;
    for (std::size_t j = 0; j < frame_size; ++j) dst[j] = pixels[j] / 255.0;
  }
  return out;
}

FrameStack::FrameStack(std::size_t k, std::size_t width, std::size_t height) : k_(k), width_(width), height_(height) {
  if (k == 0) throw ContractViolation("FrameStack: depth must be >= 1");
}

void FrameStack::reset() { history_.clear(); }

void FrameStack::push(const Frame& frame) {
  if (frame.width() != width_ || frame.height() != height_) throw ContractViolation("FrameStack: frame size mismatch");
  if (history_.size() == k_) history_.erase(history_.begin());
  history_.push_back(frame);
}

std::vector<double> FrameStack::stacked() const { return stack_frames(history_, k_, width_, height_); }

}  // namespace valrl::envs
