#include "valrl/agents.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "valrl/errors.hpp"

namespace valrl::agents {
namespace {

struct Registry {
  std::mutex mutex;
  std::map<std::string, AgentFactory, std::less<>> factories;
};

Registry& registry() {
  static Registry* r = [] {
    auto* reg = new Registry;
    reg->factories["dqn"] = [](const AgentContext& c) { return std::make_unique<DqnAgent>(c); };
    reg->factories["rainbow"] = [](const AgentContext& c) { return std::make_unique<RainbowAgent>(c); };
    reg->factories["c51"] = [](const AgentContext& c) {
      return std::make_unique<RainbowAgent>(c, RainbowAgent::Variant::kC51);
    };
    reg->factories["iqn"] = [](const AgentContext& c) { return std::make_unique<ImplicitQuantileAgent>(c); };
    return reg;
  }();
  return *r;
}

const config::ConfigSet& empty_config() {
  static const config::ConfigSet empty;
  return empty;
}

}  // namespace

void register_agent(const std::string& name, AgentFactory factory) {
  Registry& r = registry();
  std::lock_guard lock(r.mutex);
  if (!factory) throw ContractViolation("register_agent: empty factory for '" + name + "'");
  if (!r.factories.emplace(name, std::move(factory)).second) {
    throw ContractViolation("register_agent: '" + name + "' is already registered");
  }
}

bool agent_registered(std::string_view name) {
  Registry& r = registry();
  std::lock_guard lock(r.mutex);
  return r.factories.find(name) != r.factories.end();
}

std::vector<std::string> registered_agents() {
  Registry& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> names;
  for (const auto& [name, _] : r.factories) names.push_back(name);
  return names;
}

std::unique_ptr<AgentCore> make_agent(std::string_view name, const AgentContext& context) {
  AgentFactory factory;
  {
    Registry& r = registry();
    std::lock_guard lock(r.mutex);
    auto it = r.factories.find(name);
    if (it == r.factories.end()) {
      std::string known;
      for (const auto& [n, _] : r.factories) known += (known.empty() ? "" : ", ") + n;
      throw ConfigError("unknown agent '" + std::string(name) + "' (registered: " + known + ")");
    }
    factory = it->second;
  }
  return factory(context);
}

// --- exploration --------------------------------------------------------------

double linearly_decaying_epsilon(std::uint64_t decay_period, std::uint64_t step, std::uint64_t warmup,
                                 double epsilon_final) {
  if (decay_period == 0) throw ContractViolation("linearly_decaying_epsilon: decay_period must be positive");
  const double steps_left =
      static_cast<double>(decay_period) + static_cast<double>(warmup) - static_cast<double>(step);
  const double bonus = (1.0 - epsilon_final) * steps_left / static_cast<double>(decay_period);
  return epsilon_final + std::clamp(bonus, 0.0, 1.0 - epsilon_final);
}

int argmax(std::span<const double> values) {
  if (values.empty()) throw ContractViolation("argmax: no values");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return static_cast<int>(best);
}

int epsilon_greedy(double epsilon, std::size_t num_actions, Rng& rng,
                   const std::function<std::vector<double>()>& values) {
  if (rng.uniform() < epsilon) return static_cast<int>(rng.uniform_index(num_actions));
  const auto v = values();
  if (v.size() != num_actions) throw ContractViolation("epsilon_greedy: value count differs from action count");
  return argmax(v);
}

// --- DQN loss -----------------------------------------------------------------

net::Tensor batch_states(const replay::ReplayBatch& batch, bool next) {
  return net::Tensor({batch.size, batch.state_size}, next ? batch.next_states : batch.states);
}

std::vector<double> dqn_target(const replay::ReplayBatch& batch, const net::ParameterSet& target_params,
                               const net::MlpSpec& spec, double gamma) {
  const net::Tensor q_next = net::forward(target_params, spec, batch_states(batch, true));
  std::vector<double> y(batch.size);
  for (std::size_t i = 0; i < batch.size; ++i) {
    y[i] = batch.n_step_returns[i];
    if (!batch.terminal_within_n[i]) {
      const auto row = q_next.row(i);
      y[i] += std::pow(gamma, static_cast<double>(batch.horizon_used[i])) * *std::max_element(row.begin(), row.end());
    }
  }
  return y;
}

LossResult dqn_loss(const replay::ReplayBatch& batch, const net::ParameterSet& online_params,
                    const net::ParameterSet& target_params, const net::MlpSpec& spec, double gamma,
                    double kappa) {
  const auto y = dqn_target(batch, target_params, spec, gamma);
  net::Tape tape(online_params);
  const auto q_node = net::mlp_forward(tape, tape.input(batch_states(batch, false)), spec);
  const net::Tensor& q = tape.value(q_node);

  LossResult out;
  out.per_sample.resize(batch.size);
  net::Tensor grad = net::Tensor::matrix(q.rows(), q.cols());
  const double scale = 1.0 / static_cast<double>(batch.size);
  for (std::size_t i = 0; i < batch.size; ++i) {
    const auto a = static_cast<std::size_t>(batch.actions[i]);
    const double u = y[i] - q(i, a);
    out.per_sample[i] = net::huber_loss(u, kappa);
    out.loss += out.per_sample[i] * scale;
    grad(i, a) = -net::huber_loss_grad(u, kappa) * scale;
  }
  out.grads = tape.backward(q_node, grad);
  return out;
}

// --- config -------------------------------------------------------------------

void DQNConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("agent config: " + m); };
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("gamma must lie in [0, 1]");
  if (update_horizon < 1) fail("update_horizon must be >= 1");
  if (update_period < 1) fail("update_period must be >= 1");
  if (target_update_period < 1) fail("target_update_period must be >= 1");
  if (!(epsilon_train >= 0.0 && epsilon_train <= 1.0)) fail("epsilon_train must lie in [0, 1]");
  if (!(epsilon_eval >= 0.0 && epsilon_eval <= 1.0)) fail("epsilon_eval must lie in [0, 1]");
  if (epsilon_decay_period < 1) fail("epsilon_decay_period must be >= 1");
  if (epsilon_fn != "linear" && epsilon_fn != "constant") fail("epsilon_fn must be linear or constant");
  if (hidden_units < 1 || num_layers < 1) fail("network needs at least one hidden layer of width >= 1");
  if (optimizer != "adam" && optimizer != "rmsprop") fail("Optimizer.name must be adam or rmsprop");
  if (replay_capacity < 1 || batch_size < 1) fail("replay capacity and batch size must be >= 1");
}

DQNConfig read_dqn_config(const AgentContext& context, const std::string& component, const DQNConfig& d) {
  const config::ConfigSet& cfg = context.config ? *context.config : empty_config();
  auto as_size = [](std::int64_t v, const char* what) {
    if (v < 0) throw ConfigError(std::string(what) + " must be non-negative");
    return static_cast<std::uint64_t>(v);
  };
  config::ConfigReader agent(cfg, context.registry, component);
  DQNConfig c = d;
  c.gamma = agent.get_double("gamma", d.gamma);
  c.update_horizon = as_size(agent.get_int("update_horizon", static_cast<std::int64_t>(d.update_horizon)),
                             "update_horizon");
  c.min_replay_history = as_size(
      agent.get_int("min_replay_history", static_cast<std::int64_t>(d.min_replay_history)), "min_replay_history");
  c.update_period = as_size(agent.get_int("update_period", static_cast<std::int64_t>(d.update_period)),
                            "update_period");
  c.target_update_period = as_size(
      agent.get_int("target_update_period", static_cast<std::int64_t>(d.target_update_period)),
      "target_update_period");
  c.epsilon_train = agent.get_double("epsilon_train", d.epsilon_train);
  c.epsilon_eval = agent.get_double("epsilon_eval", d.epsilon_eval);
  c.epsilon_decay_period = as_size(
      agent.get_int("epsilon_decay_period", static_cast<std::int64_t>(d.epsilon_decay_period)),
      "epsilon_decay_period");
  c.epsilon_fn = agent.get_identifier("epsilon_fn", d.epsilon_fn);
  c.freeze_learning = agent.get_bool("freeze_learning", d.freeze_learning);

  config::ConfigReader network(cfg, context.registry, "Network");
  c.hidden_units = as_size(network.get_int("hidden_units", static_cast<std::int64_t>(d.hidden_units)),
                           "Network.hidden_units");
  c.num_layers = as_size(network.get_int("num_layers", static_cast<std::int64_t>(d.num_layers)),
                         "Network.num_layers");

  config::ConfigReader opt(cfg, context.registry, "Optimizer");
  c.optimizer = opt.get_identifier("name", d.optimizer);
  const double lr = opt.get_double("learning_rate", c.optimizer == "adam" ? d.adam.learning_rate
                                                                          : d.rmsprop.learning_rate);
  const double eps = opt.get_double("epsilon", c.optimizer == "adam" ? d.adam.epsilon : d.rmsprop.epsilon);
  if (c.optimizer == "adam") {
    c.adam.learning_rate = lr;
    c.adam.epsilon = eps;
    c.adam.beta1 = opt.get_double("beta1", d.adam.beta1);
    c.adam.beta2 = opt.get_double("beta2", d.adam.beta2);
  } else {
    c.rmsprop.learning_rate = lr;
    c.rmsprop.epsilon = eps;
    c.rmsprop.decay = opt.get_double("decay", d.rmsprop.decay);
    c.rmsprop.momentum = opt.get_double("momentum", d.rmsprop.momentum);
    c.rmsprop.centered = opt.get_bool("centered", d.rmsprop.centered);
  }

  config::ConfigReader replay(cfg, context.registry, "ReplayBuffer");
  c.replay_capacity = as_size(replay.get_int("capacity", static_cast<std::int64_t>(d.replay_capacity)),
                              "ReplayBuffer.capacity");
  c.batch_size = as_size(replay.get_int("batch_size", static_cast<std::int64_t>(d.batch_size)),
                         "ReplayBuffer.batch_size");
  c.importance_exponent = replay.get_double("importance_exponent", d.importance_exponent);
  c.validate();
  return c;
}

std::unique_ptr<net::Optimizer> make_optimizer(const DQNConfig& cfg, const net::ParameterSet& params) {
  if (cfg.optimizer == "adam") return std::make_unique<net::Adam>(params, cfg.adam);
  if (cfg.optimizer == "rmsprop") return std::make_unique<net::RmsProp>(params, cfg.rmsprop);
  throw ConfigError("unknown optimizer '" + cfg.optimizer + "'");
}

}  // namespace valrl::agents
