#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "valrl/archive.hpp"
#include "valrl/config.hpp"
#include "valrl/envs.hpp"
#include "valrl/net.hpp"
#include "valrl/replay.hpp"
#include "valrl/rng.hpp"

namespace valrl::agents {

// What the Runner needs from an agent. Calls arrive in the cycle
//   begin_episode (step)* end_episode
// and an agent may be bundled/unbundled between episodes.
class AgentCore {
 public:
  virtual ~AgentCore() = default;

  virtual std::string name() const = 0;
  virtual int begin_episode(const envs::Frame& observation) = 0;
  virtual int step(double reward, const envs::Frame& observation) = 0;
  // `terminal` is false when the episode was cut short (step cap) rather
  // than ended by the environment.
  virtual void end_episode(double reward, bool terminal = true) = 0;

  virtual archive::Bytes bundle() const = 0;
  virtual void unbundle(std::span<const std::uint8_t> bytes) = 0;

  virtual void set_eval_mode(bool eval) { eval_mode_ = eval; }
  bool eval_mode() const { return eval_mode_; }

 protected:
  bool eval_mode_ = false;
};

// Everything an agent factory gets to build an agent.
struct AgentContext {
  std::size_t num_actions = 0;
  std::size_t frame_width = 0;
  std::size_t frame_height = 0;
  std::size_t stack_size = 1;
  std::uint64_t seed = 0;
  const config::ConfigSet* config = nullptr;      // may be null: all defaults
  config::ParameterRegistry* registry = nullptr;  // may be null
};

using AgentFactory = std::function<std::unique_ptr<AgentCore>(const AgentContext&)>;

// Built-in names: dqn, c51, rainbow, iqn. Registering an existing name
// throws ContractViolation.
void register_agent(const std::string& name, AgentFactory factory);
bool agent_registered(std::string_view name);
std::vector<std::string> registered_agents();
// Throws ConfigError listing the known names for an unknown agent.
std::unique_ptr<AgentCore> make_agent(std::string_view name, const AgentContext& context);

// Registers a factory at static-initialization time:
//   static valrl::agents::AgentRegistrar reg("my_agent", factory);
struct AgentRegistrar {
  AgentRegistrar(const std::string& name, AgentFactory factory) { register_agent(name, std::move(factory)); }
};

// --- exploration --------------------------------------------------------------

// 1.0 up to `warmup`, then linear down to `epsilon_final` over
// `decay_period` steps, then flat.
double linearly_decaying_epsilon(std::uint64_t decay_period, std::uint64_t step, std::uint64_t warmup,
                                 double epsilon_final);

// Lowest index among the maxima.
int argmax(std::span<const double> values);

// Draws u ~ U[0,1) every call; u < epsilon picks a uniform action, otherwise
// argmax of values() (only evaluated when needed).
int epsilon_greedy(double epsilon, std::size_t num_actions, Rng& rng,
                   const std::function<std::vector<double>()>& values);

// --- losses -----------------------------------------------------------------

struct LossResult {
  double loss = 0.0;                // batch scalar
  std::vector<double> per_sample;  // unweighted per-sample losses
  net::ParameterSet grads;         // d loss / d online params
};

// Rows of `states` (batch.size x state_size) through an MLP.
net::Tensor batch_states(const replay::ReplayBatch& batch, bool next);

// y = R_n + γ^m (1 - terminal) max_a Q_target(s', a).
std::vector<double> dqn_target(const replay::ReplayBatch& batch, const net::ParameterSet& target_params,
                               const net::MlpSpec& spec, double gamma);

// Mean over the batch of Huber(y - Q(s, a)).
LossResult dqn_loss(const replay::ReplayBatch& batch, const net::ParameterSet& online_params,
                    const net::ParameterSet& target_params, const net::MlpSpec& spec, double gamma,
                    double kappa = 1.0);

struct CategoricalConfig {
  std::size_t num_atoms = 51;
  double v_min = -1.0;
  double v_max = 1.0;

  // Throws ContractViolation unless num_atoms >= 2 and v_min < v_max.
  void validate() const;
  double delta() const { return (v_max - v_min) / static_cast<double>(num_atoms - 1); }
  std::vector<double> support() const;
};

// Projects the distribution `probs` shifted to R + γ_eff·z back onto the
// fixed support. Throws ContractViolation if probs is not normalized within
// 1e-9.
std::vector<double> categorical_projection(const CategoricalConfig& cfg, std::span<const double> probs,
                                           double reward, double gamma_eff);

// Per-action expected values Σ z_i p_i(a) from logits laid out [A x N_z].
std::vector<double> categorical_expected_values(const CategoricalConfig& cfg, std::span<const double> logits,
                                                std::size_t num_actions);

// Cross-entropy between the projected target distribution (at the target
// net's greedy action) and the online distribution at the taken action.
// Batch loss is the importance-weighted mean.
LossResult categorical_loss(const replay::ReplayBatch& batch, const net::ParameterSet& online_params,
                            const net::ParameterSet& target_params, const net::MlpSpec& spec,
                            const CategoricalConfig& cfg, std::size_t num_actions, double gamma);

struct IQNConfig {
  std::size_t num_tau_samples = 8;         // N
  std::size_t num_tau_prime_samples = 8;   // N'
  std::size_t num_quantile_samples = 32;   // K
  std::size_t embedding_dim = 64;          // d_e
  double kappa = 1.0;

  void validate() const;
};

// Torso of `layers` ReLU layers of width `hidden`, a cosine quantile
// embedding merged multiplicatively, one more ReLU layer, linear head.
struct IqnNetwork {
  std::size_t inputs = 0;
  std::size_t hidden = 512;
  std::size_t layers = 2;
  std::size_t num_actions = 0;
  std::size_t embedding_dim = 64;
};

net::ParameterSet init_iqn(const IqnNetwork& spec, Rng& rng);
// Quantile values for every (state, tau) pair: output rows are
// b * taus_per_state + j, columns are actions.
net::Tape::Node iqn_forward(net::Tape& tape, const IqnNetwork& spec, const net::Tensor& states,
                            std::span<const double> taus, std::size_t taus_per_state);
// Mean over K sampled quantiles per action, for one state.
std::vector<double> iqn_action_values(const net::ParameterSet& params, const IqnNetwork& spec,
                                      std::span<const double> state, std::size_t k, Rng& rng);

double quantile_huber(double u, double tau, double kappa);

// Draws τ (B x N), then τ' (B x N'), then the K target-side action samples
// (B x K) from `rng`, in that order.
LossResult iqn_loss(const replay::ReplayBatch& batch, const net::ParameterSet& online_params,
                    const net::ParameterSet& target_params, const IqnNetwork& spec, const IQNConfig& cfg,
                    double gamma, Rng& rng);

// Same as iqn_loss but with every τ supplied explicitly (rows of B).
LossResult iqn_loss_with_taus(const replay::ReplayBatch& batch, const net::ParameterSet& online_params,
                              const net::ParameterSet& target_params, const IqnNetwork& spec,
                              const IQNConfig& cfg, double gamma, std::span<const double> taus,
                              std::span<const double> tau_primes, std::span<const double> action_taus);

// --- value-based agents ---------------------------------------------------

struct DQNConfig {
  double gamma = 0.99;
  std::size_t update_horizon = 1;
  std::uint64_t min_replay_history = 80000;
  std::uint64_t update_period = 4;
  std::uint64_t target_update_period = 32000;
  double epsilon_train = 0.01;
  double epsilon_eval = 0.001;
  std::uint64_t epsilon_decay_period = 1000000;
  // linear | constant (epsilon_train throughout training)
  std::string epsilon_fn = "linear";
  // Acts and stores transitions but never updates parameters.
  bool freeze_learning = false;
  bool prioritized = false;

  // Shared components.
  std::size_t hidden_units = 512;
  std::size_t num_layers = 2;
  std::string optimizer = "adam";
  net::AdamConfig adam;
  net::RmsPropConfig rmsprop;
  std::size_t replay_capacity = 100000;
  std::size_t batch_size = 32;
  double importance_exponent = 0.5;

  void validate() const;
};

// Reads `<component>.*` agent parameters plus Network.*, Optimizer.* and
// ReplayBuffer.*.
DQNConfig read_dqn_config(const AgentContext& context, const std::string& component,
                          const DQNConfig& defaults = {});

std::unique_ptr<net::Optimizer> make_optimizer(const DQNConfig& cfg, const net::ParameterSet& params);

// DQN and the shared machinery of every replay-based agent: frame stacking,
// ε-greedy acting, transition storage, the update/target-sync schedule and
// bundling. Subclasses supply the network, the action values and the loss.
class DqnAgent : public AgentCore {
 public:
  explicit DqnAgent(const AgentContext& context);

  std::string name() const override { return "dqn"; }
  int begin_episode(const envs::Frame& observation) override;
  int step(double reward, const envs::Frame& observation) override;
  void end_episode(double reward, bool terminal = true) override;
  archive::Bytes bundle() const override;
  void unbundle(std::span<const std::uint8_t> bytes) override;

  const DQNConfig& config() const { return cfg_; }
  std::size_t num_actions() const { return num_actions_; }
  std::uint64_t training_steps() const { return training_steps_; }
  std::uint64_t num_updates() const { return num_updates_; }
  std::uint64_t num_target_syncs() const { return num_target_syncs_; }
  double epsilon() const;

  const net::ParameterSet& online_params() const { return online_; }
  const net::ParameterSet& target_params() const { return target_; }
  const replay::TransitionStore& store() const { return *store_; }
  const net::Optimizer& optimizer() const { return *optimizer_; }

  // Values the greedy policy maximizes for a stacked state.
  virtual std::vector<double> action_values(std::span<const double> state);

  double last_loss() const { return last_loss_; }

 protected:
  struct Uninitialized {};
  // For subclasses: reads the config but leaves the network to
  // set_network().
  DqnAgent(const AgentContext& context, DQNConfig cfg, Uninitialized);
  void set_network(net::ParameterSet params);

  virtual int select_action();
  virtual LossResult compute_loss(const replay::ReplayBatch& batch);
  // Extra bundle records for subclasses.
  virtual void write_extra(archive::Writer&) const {}
  virtual void read_extra(const archive::Reader&) {}

  Rng& exploration_rng() { return exploration_rng_; }
  Rng& tau_rng() { return tau_rng_; }
  std::vector<double> current_state() const { return frames_.stacked(); }
  static Rng network_rng(const AgentContext& context) { return Rng::substream(context.seed, "network"); }
  net::MlpSpec mlp_spec(std::size_t outputs) const;

 private:
  void store_transition(double reward, bool terminal);
  void train_step();

  DQNConfig cfg_;
  std::size_t num_actions_;
  std::size_t frame_width_, frame_height_;
  net::MlpSpec spec_;
  net::ParameterSet online_, target_;
  std::unique_ptr<net::Optimizer> optimizer_;
  std::unique_ptr<replay::TransitionStore> store_;
  Rng exploration_rng_, replay_rng_, tau_rng_;
  envs::FrameStack frames_;

  bool in_episode_ = false;
  envs::Frame last_frame_;
  int last_action_ = 0;
  std::uint64_t training_steps_ = 0;
  std::uint64_t num_updates_ = 0;
  std::uint64_t num_target_syncs_ = 0;
  double last_loss_ = 0.0;
};

// Rainbow here is n-step returns + prioritized replay + the categorical
// head. C51 is the same agent with n = 1 and uniform replay.
class RainbowAgent : public DqnAgent {
 public:
  enum class Variant { kRainbow, kC51 };
  explicit RainbowAgent(const AgentContext& context, Variant variant = Variant::kRainbow);

  std::string name() const override { return variant_ == Variant::kC51 ? "c51" : "rainbow"; }
  std::vector<double> action_values(std::span<const double> state) override;
  const CategoricalConfig& categorical() const { return categorical_; }

 protected:
  LossResult compute_loss(const replay::ReplayBatch& batch) override;

 private:
  Variant variant_;
  CategoricalConfig categorical_;
};

class ImplicitQuantileAgent : public DqnAgent {
 public:
  explicit ImplicitQuantileAgent(const AgentContext& context);

  std::string name() const override { return "iqn"; }
  std::vector<double> action_values(std::span<const double> state) override;
  const IQNConfig& iqn_config() const { return iqn_; }
  const IqnNetwork& network() const { return network_; }

 protected:
  LossResult compute_loss(const replay::ReplayBatch& batch) override;

 private:
  IQNConfig iqn_;
  IqnNetwork network_;
};

}  // namespace valrl::agents
