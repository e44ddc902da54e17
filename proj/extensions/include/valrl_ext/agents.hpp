#pragma once

// Agents built on top of the framework without touching it. Both register
// themselves by name ("random_dqn", "sticky") when this library is linked.

#include <optional>

#include "valrl/agents.hpp"

namespace valrl_ext {

// DQN that acts uniformly at random; everything else (storage, learning,
// bundling) is inherited unchanged.
class RandomDqnAgent : public valrl::agents::DqnAgent {
 public:
  using DqnAgent::DqnAgent;
  std::string name() const override { return "random_dqn"; }

 protected:
  int select_action() override;
};

// Implements only the runner-facing contract: repeats its previous action
// with probability `repeat_probability`, otherwise picks uniformly. Learns
// nothing.
class StickyAgent : public valrl::agents::AgentCore {
 public:
  explicit StickyAgent(const valrl::agents::AgentContext& context);
  StickyAgent(std::size_t num_actions, double repeat_probability, std::uint64_t seed);

  std::string name() const override { return "sticky"; }
  int begin_episode(const valrl::envs::Frame& observation) override;
  int step(double reward, const valrl::envs::Frame& observation) override;
  void end_episode(double reward, bool terminal = true) override;
  valrl::archive::Bytes bundle() const override;
  void unbundle(std::span<const std::uint8_t> bytes) override;

  double repeat_probability() const { return repeat_probability_; }

 private:
  int act();

  std::size_t num_actions_;
  double repeat_probability_;
  valrl::Rng rng_;
  std::optional<int> previous_;
};

}  // namespace valrl_ext
