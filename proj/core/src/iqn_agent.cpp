#include <cmath>
#include <numbers>

#include "valrl/agents.hpp"
#include "valrl/errors.hpp"

namespace valrl::agents {
namespace {

net::Tensor cosine_features(std::span<const double> taus, std::size_t dim) {
  net::Tensor f = net::Tensor::matrix(taus.size(), dim);
  for (std::size_t r = 0; r < taus.size(); ++r) {
    for (std::size_t i = 0; i < dim; ++i) f(r, i) = std::cos(std::numbers::pi * static_cast<double>(i) * taus[r]);
  }
  return f;
}

std::vector<double> draw_taus(std::size_t n, Rng& rng) {
  std::vector<double> t(n);
  for (auto& v : t) v = rng.uniform();
  return t;
}

}  // namespace

void IQNConfig::validate() const {
  if (num_tau_samples < 1 || num_tau_prime_samples < 1 || num_quantile_samples < 1 || embedding_dim < 1) {
    throw ConfigError("IQN sample counts and embedding dimension must be >= 1");
  }
  if (!(kappa > 0.0)) throw ConfigError("IQN kappa must be positive");
}

net::ParameterSet init_iqn(const IqnNetwork& spec, Rng& rng) {
  if (spec.layers < 1) throw ContractViolation("IQN torso needs at least one layer");
  net::ParameterSet params;
  std::size_t inputs = spec.inputs;
  for (std::size_t i = 0; i < spec.layers; ++i) {
    net::init_dense(params, "hidden" + std::to_string(i), inputs, spec.hidden, rng);
    inputs = spec.hidden;
  }
  net::init_dense(params, "embed", spec.embedding_dim, spec.hidden, rng);
  net::init_dense(params, "merge", spec.hidden, spec.hidden, rng);
  net::init_dense(params, "head", spec.hidden, spec.num_actions, rng);
  return params;
}

net::Tape::Node iqn_forward(net::Tape& tape, const IqnNetwork& spec, const net::Tensor& states,
                            std::span<const double> taus, std::size_t taus_per_state) {
  if (taus.size() != states.rows() * taus_per_state) throw ContractViolation("iqn_forward: tau count mismatch");
  auto x = tape.input(states);
  for (std::size_t i = 0; i < spec.layers; ++i) x = tape.relu(tape.dense(x, "hidden" + std::to_string(i)));
  const auto psi = tape.repeat_rows(x, taus_per_state);
  const auto phi = tape.relu(tape.dense(tape.input(cosine_features(taus, spec.embedding_dim)), "embed"));
  const auto merged = tape.relu(tape.dense(tape.mul(psi, phi), "merge"));
  return tape.dense(merged, "head");
}

std::vector<double> iqn_action_values(const net::ParameterSet& params, const IqnNetwork& spec,
                                      std::span<const double> state, std::size_t k, Rng& rng) {
  const auto taus = draw_taus(k, rng);
  net::Tape tape(params);
  const net::Tensor input({1, state.size()}, std::vector<double>(state.begin(), state.end()));
  const net::Tensor& z = tape.value(iqn_forward(tape, spec, input, taus, k));
  std::vector<double> values(spec.num_actions, 0.0);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t a = 0; a < spec.num_actions; ++a) values[a] += z(j, a);
  }
  for (auto& v : values) v /= static_cast<double>(k);
  return values;
}

double quantile_huber(double u, double tau, double kappa) {
  return std::abs(tau - (u < 0.0 ? 1.0 : 0.0)) * net::huber_loss(u, kappa) / kappa;
}

LossResult iqn_loss(const replay::ReplayBatch& batch, const net::ParameterSet& online_params,
                    const net::ParameterSet& target_params, const IqnNetwork& spec, const IQNConfig& cfg,
                    double gamma, Rng& rng) {
  const auto taus = draw_taus(batch.size * cfg.num_tau_samples, rng);
  const auto tau_primes = draw_taus(batch.size * cfg.num_tau_prime_samples, rng);
  const auto action_taus = draw_taus(batch.size * cfg.num_quantile_samples, rng);
  return iqn_loss_with_taus(batch, online_params, target_params, spec, cfg, gamma, taus, tau_primes, action_taus);
}

LossResult iqn_loss_with_taus(const replay::ReplayBatch& batch, const net::ParameterSet& online_params,
                              const net::ParameterSet& target_params, const IqnNetwork& spec,
                              const IQNConfig& cfg, double gamma, std::span<const double> taus,
                              std::span<const double> tau_primes, std::span<const double> action_taus) {
  cfg.validate();
  const std::size_t b = batch.size, n = cfg.num_tau_samples, np = cfg.num_tau_prime_samples,
                    k = cfg.num_quantile_samples, na = spec.num_actions;
  const net::Tensor next = batch_states(batch, true);

  // Greedy next action from the target net's mean over K quantiles.
  std::vector<std::size_t> next_action(b);
  {
    net::Tape tape(target_params);
    const net::Tensor& z = tape.value(iqn_forward(tape, spec, next, action_taus, k));
    for (std::size_t i = 0; i < b; ++i) {
      std::vector<double> mean(na, 0.0);
      for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t a = 0; a < na; ++a) mean[a] += z(i * k + j, a);
      }
      for (auto& m : mean) m /= static_cast<double>(k);
      next_action[i] = static_cast<std::size_t>(argmax(mean));
    }
  }
  std::vector<double> targets(b * np);
  {
    net::Tape tape(target_params);
    const net::Tensor& z = tape.value(iqn_forward(tape, spec, next, tau_primes, np));
    for (std::size_t i = 0; i < b; ++i) {
      const double gamma_eff =
          batch.terminal_within_n[i] ? 0.0 : std::pow(gamma, static_cast<double>(batch.horizon_used[i]));
      for (std::size_t j = 0; j < np; ++j) {
        targets[i * np + j] = batch.n_step_returns[i] + gamma_eff * z(i * np + j, next_action[i]);
      }
    }
  }

  net::Tape tape(online_params);
  const auto out_node = iqn_forward(tape, spec, batch_states(batch, false), taus, n);
  const net::Tensor& z = tape.value(out_node);
  net::Tensor grad = net::Tensor::matrix(z.rows(), z.cols());

  LossResult out;
  out.per_sample.resize(b);
  const double pair_scale = 1.0 / static_cast<double>(n * np);
  const double batch_scale = 1.0 / static_cast<double>(b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto a = static_cast<std::size_t>(batch.actions[i]);
    const double w = batch.importance_weights[i];
    double sample_loss = 0.0;
    for (std::size_t q = 0; q < n; ++q) {
      const double tau = taus[i * n + q];
      const double zq = z(i * n + q, a);
      double dz = 0.0;
      for (std::size_t j = 0; j < np; ++j) {
        const double u = targets[i * np + j] - zq;
        const double weight = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
        sample_loss += weight * net::huber_loss(u, cfg.kappa) / cfg.kappa;
        dz -= weight * net::huber_loss_grad(u, cfg.kappa) / cfg.kappa;
      }
      grad(i * n + q, a) = dz * pair_scale * batch_scale * w;
    }
    out.per_sample[i] = sample_loss * pair_scale;
    out.loss += w * out.per_sample[i] * batch_scale;
  }
  out.grads = tape.backward(out_node, grad);
  return out;
}

// --- agent --------------------------------------------------------------------

namespace {

const config::ConfigSet& config_or_empty(const AgentContext& context) {
  static const config::ConfigSet empty;
  return context.config ? *context.config : empty;
}

}  // namespace

ImplicitQuantileAgent::ImplicitQuantileAgent(const AgentContext& context)
    : DqnAgent(context, read_dqn_config(context, "ImplicitQuantileAgent"), Uninitialized{}) {
  config::ConfigReader reader(config_or_empty(context), context.registry, "ImplicitQuantileAgent");
  auto count = [&](const char* param, std::size_t d) {
    const auto v = reader.get_int(param, static_cast<std::int64_t>(d));
    if (v < 1) throw ConfigError(std::string("ImplicitQuantileAgent.") + param + " must be >= 1");
    return static_cast<std::size_t>(v);
  };
  iqn_.num_tau_samples = count("num_tau_samples", iqn_.num_tau_samples);
  iqn_.num_tau_prime_samples = count("num_tau_prime_samples", iqn_.num_tau_prime_samples);
  iqn_.num_quantile_samples = count("num_quantile_samples", iqn_.num_quantile_samples);
  iqn_.embedding_dim = count("quantile_embedding_dim", iqn_.embedding_dim);
  iqn_.kappa = reader.get_double("kappa", iqn_.kappa);
  iqn_.validate();

  network_.inputs = mlp_spec(1).inputs;
  network_.hidden = config().hidden_units;
  network_.layers = config().num_layers;
  network_.num_actions = num_actions();
  network_.embedding_dim = iqn_.embedding_dim;
  Rng rng = network_rng(context);
  set_network(init_iqn(network_, rng));
}

std::vector<double> ImplicitQuantileAgent::action_values(std::span<const double> state) {
  return iqn_action_values(online_params(), network_, state, iqn_.num_quantile_samples, tau_rng());
}

LossResult ImplicitQuantileAgent::compute_loss(const replay::ReplayBatch& batch) {
  return iqn_loss(batch, online_params(), target_params(), network_, iqn_, config().gamma, tau_rng());
}

}  // namespace valrl::agents
