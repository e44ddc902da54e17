#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "valrl/agents.hpp"
#include "valrl/config.hpp"
#include "valrl/envs.hpp"
#include "valrl/telemetry.hpp"

namespace valrl::runner {

enum class Schedule { kTrain, kTrainAndEval };
Schedule parse_schedule(std::string_view name);
const char* to_string(Schedule schedule);

struct RunnerConfig {
  std::string agent_name = "dqn";
  std::string environment = "CatchLives";
  bool sticky_actions = true;
  double sticky_prob = 0.25;
  // Whether evaluation runs keep the sticky wrapper active.
  bool eval_sticky_actions = true;
  envs::TerminationMode termination_mode = envs::TerminationMode::kGameOver;
  std::size_t stack_size = 1;
  Schedule schedule = Schedule::kTrain;
  std::uint64_t seed = 0;
  std::uint64_t num_iterations = 50;
  std::uint64_t training_steps = 2000;    // frames per training phase (rounded up to an episode)
  std::uint64_t evaluation_steps = 500;   // frames per evaluation phase
  std::uint64_t max_steps_per_episode = 27000;
  std::size_t keep_last = 3;
  bool allow_fresh_start = false;  // restart when every checkpoint is corrupt
  // Environment parameters.
  std::size_t chain_states = 10;
  int catch_lives = 3;
  int catch_balls = 10;

  void validate() const;
};

// Reads Runner.*, ChainMDP.* and CatchLives.*.
RunnerConfig read_runner_config(const config::ConfigSet& cfg, config::ParameterRegistry* registry);

// Instrumentation for tests: every reset, step and agent episode boundary.
struct RunnerEvent {
  enum class Kind { kEnvReset, kEnvStep, kAgentBegin, kAgentEnd };
  Kind kind;
  const envs::StepResult* step = nullptr;  // kEnvStep
  bool terminal = false;                   // kAgentEnd: value passed to end_episode
};
using Observer = std::function<void(const RunnerEvent&)>;

struct EpisodeResult {
  double total_return = 0.0;  // raw (unclipped) rewards
  std::uint64_t length = 0;
};

// One game from reset to game over (or the step cap). In LifeLoss mode a
// lost life closes the agent's episode (terminal) and opens a new one
// without resetting the environment.
EpisodeResult run_one_episode(agents::AgentCore& agent, envs::Environment& env, envs::TerminationMode mode,
                              std::uint64_t max_steps, const Observer& observer = {});

// Episodes until at least `min_frames` frames; the last episode is never cut
// for the quota.
telemetry::PhaseStatistics run_phase(agents::AgentCore& agent, envs::Environment& env, envs::TerminationMode mode,
                                     std::uint64_t min_frames, std::uint64_t max_steps,
                                     const Observer& observer = {});

// Owns the environment, agent, log and checkpoints of one experiment rooted
// at `base_dir`:
//   base_dir/log.bin       binary iteration log
//   base_dir/log.csv       readable mirror
//   base_dir/timings.csv   wall clock per iteration
//   base_dir/config.gin    effective configuration
//   base_dir/checkpoints/  see checkpoint.hpp
class Runner {
 public:
  Runner(const config::ConfigSet& cfg, std::filesystem::path base_dir);

  // Resumes from the latest valid checkpoint, then runs the remaining
  // iterations, logging and checkpointing after each one.
  void run_experiment();

  // Training phase, then (train_and_eval) an evaluation phase.
  telemetry::IterationStatistics run_one_iteration(std::uint64_t iteration);

  // Restores the latest checkpoint if present; returns the next iteration.
  std::uint64_t resume();

  const RunnerConfig& config() const { return cfg_; }
  agents::AgentCore& agent() { return *agent_; }
  envs::StickyActionEnvironment& environment() { return *env_; }
  const std::string& effective_config() const { return dump_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }
  void set_observer(Observer observer) { observer_ = std::move(observer); }

 private:
  void save_checkpoint(std::uint64_t iteration);

  config::ConfigSet config_set_;
  config::ParameterRegistry registry_;
  RunnerConfig cfg_;
  std::filesystem::path base_dir_;
  std::unique_ptr<envs::StickyActionEnvironment> env_;
  std::unique_ptr<agents::AgentCore> agent_;
  std::string dump_;
  Observer observer_;
};

}  // namespace valrl::runner
