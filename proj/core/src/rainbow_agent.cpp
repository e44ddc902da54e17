#include "valrl/agents.hpp"
#include "valrl/errors.hpp"
#include "valrl/warnings.hpp"

namespace valrl::agents {
namespace {

const config::ConfigSet& config_or_empty(const AgentContext& context) {
  static const config::ConfigSet empty;
  return context.config ? *context.config : empty;
}

DQNConfig rainbow_config(const AgentContext& context, RainbowAgent::Variant variant) {
  DQNConfig defaults;
  defaults.update_horizon = variant == RainbowAgent::Variant::kC51 ? 1 : 3;
  DQNConfig cfg = read_dqn_config(context, "RainbowAgent", defaults);
  config::ConfigReader reader(config_or_empty(context), context.registry, "RainbowAgent");
  const std::string scheme =
      reader.get_identifier("replay_scheme", variant == RainbowAgent::Variant::kC51 ? "uniform" : "prioritized");
  if (scheme != "uniform" && scheme != "prioritized") {
    throw ConfigError("RainbowAgent.replay_scheme must be uniform or prioritized, got '" + scheme + "'");
  }
  cfg.prioritized = scheme == "prioritized";
  if (variant == RainbowAgent::Variant::kC51) {
    if (cfg.update_horizon != 1 || cfg.prioritized) {
      warn("c51 always uses update_horizon 1 and uniform replay; ignoring RainbowAgent overrides");
    }
    cfg.update_horizon = 1;
    cfg.prioritized = false;
  }
  return cfg;
}

}  // namespace

RainbowAgent::RainbowAgent(const AgentContext& context, Variant variant)
    : DqnAgent(context, rainbow_config(context, variant), Uninitialized{}), variant_(variant) {
  config::ConfigReader reader(config_or_empty(context), context.registry, "RainbowAgent");
  const auto atoms = reader.get_int("num_atoms", static_cast<std::int64_t>(categorical_.num_atoms));
  if (atoms < 2) throw ConfigError("RainbowAgent.num_atoms must be >= 2");
  categorical_.num_atoms = static_cast<std::size_t>(atoms);
  categorical_.v_min = reader.get_double("v_min", categorical_.v_min);
  categorical_.v_max = reader.get_double("v_max", categorical_.v_max);
  if (!(categorical_.v_min < categorical_.v_max)) throw ConfigError("RainbowAgent needs v_min < v_max");
  Rng rng = network_rng(context);
  set_network(net::init_mlp(mlp_spec(num_actions() * categorical_.num_atoms), rng));
}

std::vector<double> RainbowAgent::action_values(std::span<const double> state) {
  net::Tensor input({1, state.size()}, std::vector<double>(state.begin(), state.end()));
  const auto logits = net::forward(online_params(), mlp_spec(num_actions() * categorical_.num_atoms), input);
  return categorical_expected_values(categorical_, logits.values(), num_actions());
}

LossResult RainbowAgent::compute_loss(const replay::ReplayBatch& batch) {
  return categorical_loss(batch, online_params(), target_params(), mlp_spec(num_actions() * categorical_.num_atoms),
                          categorical_, num_actions(), config().gamma);
}

}  // namespace valrl::agents
