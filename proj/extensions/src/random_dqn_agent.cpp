#include "valrl_ext/agents.hpp"

namespace valrl_ext {

int RandomDqnAgent::select_action() {
  return static_cast<int>(exploration_rng().uniform_index(num_actions()));
}

namespace {
const valrl::agents::AgentRegistrar kRegistrar("random_dqn", [](const valrl::agents::AgentContext& c) {
  return std::make_unique<RandomDqnAgent>(c);
});
}  // namespace

}  // namespace valrl_ext
