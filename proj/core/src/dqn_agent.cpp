#include <algorithm>
#include <cmath>

#include "valrl/agents.hpp"
#include "valrl/errors.hpp"

namespace valrl::agents {

DqnAgent::DqnAgent(const AgentContext& context)
    : DqnAgent(context, read_dqn_config(context, "DQNAgent"), Uninitialized{}) {
  Rng rng = network_rng(context);
  set_network(net::init_mlp(mlp_spec(num_actions_), rng));
}

DqnAgent::DqnAgent(const AgentContext& context, DQNConfig cfg, Uninitialized)
    : cfg_(std::move(cfg)),
      num_actions_(context.num_actions),
      frame_width_(context.frame_width),
      frame_height_(context.frame_height),
      exploration_rng_(Rng::substream(context.seed, "agent")),
      replay_rng_(Rng::substream(context.seed, "replay")),
      tau_rng_(Rng::substream(context.seed, "iqn_tau")),
      frames_(context.stack_size, context.frame_width, context.frame_height) {
  if (num_actions_ < 1) throw ContractViolation("agent: environment reports no actions");
  cfg_.validate();
  spec_ = mlp_spec(num_actions_);
  replay::StoreConfig store;
  store.capacity = cfg_.replay_capacity;
  store.frame_width = frame_width_;
  store.frame_height = frame_height_;
  store.stack_size = context.stack_size;
  store.update_horizon = cfg_.update_horizon;
  store.gamma = cfg_.gamma;
  store.importance_exponent = cfg_.importance_exponent;
  store_ = std::make_unique<replay::TransitionStore>(store);
}

net::MlpSpec DqnAgent::mlp_spec(std::size_t outputs) const {
  return net::MlpSpec{frames_.state_size(), std::vector<std::size_t>(cfg_.num_layers, cfg_.hidden_units), outputs};
}

void DqnAgent::set_network(net::ParameterSet params) {
  online_ = std::move(params);
  target_ = online_;
  optimizer_ = make_optimizer(cfg_, online_);
}

double DqnAgent::epsilon() const {
  if (eval_mode_) return cfg_.epsilon_eval;
  if (cfg_.epsilon_fn == "constant") return cfg_.epsilon_train;
  return linearly_decaying_epsilon(cfg_.epsilon_decay_period, training_steps_, cfg_.min_replay_history,
                                   cfg_.epsilon_train);
}

std::vector<double> DqnAgent::action_values(std::span<const double> state) {
  net::Tensor input({1, state.size()}, std::vector<double>(state.begin(), state.end()));
  auto q = net::forward(online_, spec_, input);
  return {q.values().begin(), q.values().end()};
}

int DqnAgent::select_action() {
  return epsilon_greedy(epsilon(), num_actions_, exploration_rng_, [this] { return action_values(current_state()); });
}

LossResult DqnAgent::compute_loss(const replay::ReplayBatch& batch) {
  return dqn_loss(batch, online_, target_, spec_, cfg_.gamma);
}

int DqnAgent::begin_episode(const envs::Frame& observation) {
  frames_.reset();
  frames_.push(observation);
  last_frame_ = observation;
  in_episode_ = true;
  last_action_ = select_action();
  return last_action_;
}

int DqnAgent::step(double reward, const envs::Frame& observation) {
  if (!in_episode_) throw ContractViolation(name() + ": step() called outside an episode (begin_episode first)");
  if (!eval_mode_) {
    store_transition(reward, false);
    train_step();
  }
  frames_.push(observation);
  last_frame_ = observation;
  last_action_ = select_action();
  return last_action_;
}

void DqnAgent::end_episode(double reward, bool terminal) {
  if (!in_episode_) throw ContractViolation(name() + ": end_episode() called outside an episode");
  if (!eval_mode_) {
    store_transition(reward, terminal);
    if (!terminal) store_->mark_episode_boundary();
    train_step();
  }
  in_episode_ = false;
}

void DqnAgent::store_transition(double reward, bool terminal) {
  store_->add(last_frame_, last_action_, std::clamp(reward, -1.0, 1.0), terminal);
  ++training_steps_;
}

void DqnAgent::train_step() {
  if (cfg_.freeze_learning) return;
  const std::uint64_t f = training_steps_;
  if (f > cfg_.min_replay_history && (f - cfg_.min_replay_history) % cfg_.update_period == 0) {
    try {
      const auto batch = cfg_.prioritized ? store_->sample_prioritized(cfg_.batch_size, replay_rng_)
                                          : store_->sample_uniform(cfg_.batch_size, replay_rng_);
      LossResult result = compute_loss(batch);
      if (!std::isfinite(result.loss)) throw TrainingError(name() + ": non-finite loss");
      optimizer_->apply(online_, result.grads);
      if (cfg_.prioritized) {
        std::vector<double> priorities(result.per_sample.size());
        for (std::size_t i = 0; i < priorities.size(); ++i) {
          priorities[i] = std::max(std::sqrt(result.per_sample[i]), 1e-6);
        }
        store_->update_priorities(batch.sample_indices, priorities);
      }
      last_loss_ = result.loss;
      ++num_updates_;
    } catch (const ReplayNotReady&) {
      // Too few valid transitions yet (e.g. a tiny store at the start);
      // the next update period tries again.
    }
  }
  if (f % cfg_.target_update_period == 0) {
    target_ = online_;
    ++num_target_syncs_;
  }
}

archive::Bytes DqnAgent::bundle() const {
  if (in_episode_) throw ContractViolation(name() + ": bundle() is only supported between episodes");
  archive::Writer w;
  w.add_string("agent", name());
  w.add_scalar("training_steps", training_steps_);
  w.add_scalar("num_updates", num_updates_);
  w.add_scalar("num_target_syncs", num_target_syncs_);
  w.add_scalar("eval_mode", eval_mode_ ? 1 : 0);
  w.add_scalar_f64("last_loss", last_loss_);
  online_.write(w, "online/");
  target_.write(w, "target/");
  w.add_string("optimizer", optimizer_->name());
  optimizer_->write(w, "opt/");
  w.add_bytes("replay", store_->checkpoint());
  w.add_string("rng/exploration", exploration_rng_.state());
  w.add_string("rng/replay", replay_rng_.state());
  w.add_string("rng/tau", tau_rng_.state());
  write_extra(w);
  return w.finish();
}

void DqnAgent::unbundle(std::span<const std::uint8_t> bytes) {
  archive::Reader r(bytes);
  if (r.string("agent") != name()) {
    throw RestoreError("bundle belongs to agent '" + r.string("agent") + "', not '" + name() + "'");
  }
  if (r.string("optimizer") != optimizer_->name()) throw RestoreError("bundle optimizer differs from config");
  training_steps_ = r.scalar("training_steps");
  num_updates_ = r.scalar("num_updates");
  num_target_syncs_ = r.scalar("num_target_syncs");
  eval_mode_ = r.scalar("eval_mode") != 0;
  last_loss_ = r.scalar_f64("last_loss");
  online_.read(r, "online/");
  target_.read(r, "target/");
  optimizer_->read(r, "opt/");
  auto restored = replay::TransitionStore::restore(r.bytes("replay"));
  if (!(restored.config() == store_->config())) throw RestoreError("bundle replay config differs from config");
  *store_ = std::move(restored);
  exploration_rng_.set_state(r.string("rng/exploration"));
  replay_rng_.set_state(r.string("rng/replay"));
  tau_rng_.set_state(r.string("rng/tau"));
  read_extra(r);
  frames_.reset();
  in_episode_ = false;
}

}  // namespace valrl::agents
