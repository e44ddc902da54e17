#include <algorithm>
#include <cmath>

#include "valrl/agents.hpp"
#include "valrl/errors.hpp"

namespace valrl::agents {

void CategoricalConfig::validate() const {
  if (num_atoms < 2) throw ContractViolation("categorical head needs at least 2 atoms");
  if (!(v_min < v_max)) throw ContractViolation("categorical support needs v_min < v_max");
}

std::vector<double> CategoricalConfig::support() const {
  std::vector<double> z(num_atoms);
  for (std::size_t i = 0; i < num_atoms; ++i) z[i] = v_min + static_cast<double>(i) * delta();
  return z;
}

std::vector<double> categorical_projection(const CategoricalConfig& cfg, std::span<const double> probs,
                                           double reward, double gamma_eff) {
  cfg.validate();
  if (probs.size() != cfg.num_atoms) throw ContractViolation("categorical_projection: probs size differs from atom count");
  double mass = 0.0;
  for (double p : probs) mass += p;
  if (std::abs(mass - 1.0) > 1e-9) throw ContractViolation("categorical_projection: input is not normalized");

  const auto z = cfg.support();
  const double dz = cfg.delta();
  std::vector<double> tz(cfg.num_atoms);
  for (std::size_t j = 0; j < cfg.num_atoms; ++j) tz[j] = std::clamp(reward + gamma_eff * z[j], cfg.v_min, cfg.v_max);

  // out_i = Σ_j clip(1 - |Tz_j - z_i| / Δz, 0, 1) p_j
  std::vector<double> out(cfg.num_atoms, 0.0);
  for (std::size_t i = 0; i < cfg.num_atoms; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cfg.num_atoms; ++j) {
      const double w = 1.0 - std::abs(tz[j] - z[i]) / dz;
      if (w > 0.0) acc += std::min(w, 1.0) * probs[j];
    }
    out[i] = acc;
  }
  return out;
}

std::vector<double> categorical_expected_values(const CategoricalConfig& cfg, std::span<const double> logits,
                                                std::size_t num_actions) {
  if (logits.size() != num_actions * cfg.num_atoms) {
    throw ContractViolation("categorical_expected_values: expected " + std::to_string(num_actions * cfg.num_atoms) +
                            " logits");
  }
  const auto z = cfg.support();
  std::vector<double> p(cfg.num_atoms);
  std::vector<double> values(num_actions);
  for (std::size_t a = 0; a < num_actions; ++a) {
    net::softmax(logits.subspan(a * cfg.num_atoms, cfg.num_atoms), p);
    double v = 0.0;
    for (std::size_t i = 0; i < cfg.num_atoms; ++i) v += z[i] * p[i];
    values[a] = v;
  }
  return values;
}

LossResult categorical_loss(const replay::ReplayBatch& batch, const net::ParameterSet& online_params,
                            const net::ParameterSet& target_params, const net::MlpSpec& spec,
                            const CategoricalConfig& cfg, std::size_t num_actions, double gamma) {
  cfg.validate();
  const std::size_t nz = cfg.num_atoms;
  if (spec.outputs != num_actions * nz) throw ContractViolation("categorical_loss: head width is not actions x atoms");

  const net::Tensor target_logits = net::forward(target_params, spec, batch_states(batch, true));
  net::Tape tape(online_params);
  const auto logits_node = net::mlp_forward(tape, tape.input(batch_states(batch, false)), spec);
  const net::Tensor& logits = tape.value(logits_node);

  LossResult out;
  out.per_sample.resize(batch.size);
  net::Tensor grad = net::Tensor::matrix(logits.rows(), logits.cols());
  const double scale = 1.0 / static_cast<double>(batch.size);
  std::vector<double> target_probs(nz), atom_grad(nz);
  for (std::size_t i = 0; i < batch.size; ++i) {
    const auto next_logits = target_logits.row(i);
    const auto next_action = static_cast<std::size_t>(argmax(categorical_expected_values(cfg, next_logits, num_actions)));
    net::softmax(next_logits.subspan(next_action * nz, nz), target_probs);
    const double gamma_eff =
        batch.terminal_within_n[i] ? 0.0 : std::pow(gamma, static_cast<double>(batch.horizon_used[i]));
    const auto projected = categorical_projection(cfg, target_probs, batch.n_step_returns[i], gamma_eff);

    const auto a = static_cast<std::size_t>(batch.actions[i]);
    const double ce = net::softmax_cross_entropy(logits.row(i).subspan(a * nz, nz), projected, atom_grad);
    const double w = batch.importance_weights[i];
    out.per_sample[i] = ce;
    out.loss += w * ce * scale;
    for (std::size_t k = 0; k < nz; ++k) grad(i, a * nz + k) = w * scale * atom_grad[k];
  }
  out.grads = tape.backward(logits_node, grad);
  return out;
}

}  // namespace valrl::agents
