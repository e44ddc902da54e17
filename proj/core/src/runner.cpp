#include "valrl/runner.hpp"

#include <chrono>
#include <fstream>

#include "valrl/checkpoint.hpp"
#include "valrl/errors.hpp"
#include "valrl/io.hpp"
#include "valrl/warnings.hpp"

namespace valrl::runner {

Schedule parse_schedule(std::string_view name) {
  if (name == "train") return Schedule::kTrain;
  if (name == "train_and_eval") return Schedule::kTrainAndEval;
  throw ConfigError("unknown schedule '" + std::string(name) + "' (expected train or train_and_eval)");
}

const char* to_string(Schedule schedule) { return schedule == Schedule::kTrain ? "train" : "train_and_eval"; }

void RunnerConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("Runner: " + m); };
  if (num_iterations < 1) fail("num_iterations must be positive");
  if (training_steps < 1) fail("training_steps must be positive");
  if (schedule == Schedule::kTrainAndEval && evaluation_steps < 1) fail("evaluation_steps must be positive");
  if (max_steps_per_episode < 1) fail("max_steps_per_episode must be positive");
  if (!(sticky_prob >= 0.0 && sticky_prob <= 1.0)) fail("sticky_prob must lie in [0, 1]");
  if (stack_size < 1) fail("stack_size must be >= 1");
  if (keep_last < 1) fail("keep_last must be >= 1");
  if (chain_states < 2) fail("ChainMDP.num_states must be >= 2");
  if (catch_lives < 1 || catch_balls < 1) fail("CatchLives lives and balls must be >= 1");
}

RunnerConfig read_runner_config(const config::ConfigSet& cfg, config::ParameterRegistry* registry) {
  RunnerConfig d, c;
  auto non_negative = [](std::int64_t v, const char* what) {
    if (v < 0) throw ConfigError(std::string(what) + " must be non-negative");
    return static_cast<std::uint64_t>(v);
  };
  config::ConfigReader r(cfg, registry, "Runner");
  c.agent_name = r.get_string("agent_name", d.agent_name);
  c.environment = r.get_string("environment", d.environment);
  c.sticky_actions = r.get_bool("sticky_actions", d.sticky_actions);
  c.sticky_prob = r.get_double("sticky_prob", d.sticky_prob);
  c.eval_sticky_actions = r.get_bool("eval_sticky_actions", d.eval_sticky_actions);
  c.termination_mode = envs::parse_termination_mode(r.get_identifier("termination_mode", to_string(d.termination_mode)));
  c.stack_size = non_negative(r.get_int("stack_size", static_cast<std::int64_t>(d.stack_size)), "Runner.stack_size");
  c.schedule = parse_schedule(r.get_identifier("schedule", to_string(d.schedule)));
  c.seed = non_negative(r.get_int("seed", static_cast<std::int64_t>(d.seed)), "Runner.seed");
  c.num_iterations = non_negative(r.get_int("num_iterations", static_cast<std::int64_t>(d.num_iterations)),
                                  "Runner.num_iterations");
  c.training_steps = non_negative(r.get_int("training_steps", static_cast<std::int64_t>(d.training_steps)),
                                  "Runner.training_steps");
  c.evaluation_steps = non_negative(r.get_int("evaluation_steps", static_cast<std::int64_t>(d.evaluation_steps)),
                                    "Runner.evaluation_steps");
  c.max_steps_per_episode = non_negative(
      r.get_int("max_steps_per_episode", static_cast<std::int64_t>(d.max_steps_per_episode)),
      "Runner.max_steps_per_episode");
  c.keep_last = non_negative(r.get_int("keep_last", static_cast<std::int64_t>(d.keep_last)), "Runner.keep_last");
  c.allow_fresh_start = r.get_bool("allow_fresh_start", d.allow_fresh_start);

  config::ConfigReader chain(cfg, registry, "ChainMDP");
  c.chain_states = non_negative(chain.get_int("num_states", static_cast<std::int64_t>(d.chain_states)),
                                "ChainMDP.num_states");
  config::ConfigReader catcher(cfg, registry, "CatchLives");
  c.catch_lives = static_cast<int>(catcher.get_int("lives", d.catch_lives));
  c.catch_balls = static_cast<int>(catcher.get_int("balls_per_game", d.catch_balls));
  c.validate();
  return c;
}

EpisodeResult run_one_episode(agents::AgentCore& agent, envs::Environment& env, envs::TerminationMode mode,
                              std::uint64_t max_steps, const Observer& observer) {
  auto emit = [&](RunnerEvent e) {
    if (observer) observer(e);
  };
  EpisodeResult result;
  envs::Frame obs = env.reset();
  emit({RunnerEvent::Kind::kEnvReset});
  emit({RunnerEvent::Kind::kAgentBegin});
  int action = agent.begin_episode(obs);
  for (;;) {
    const envs::StepResult r = env.step(action);
    ++result.length;
    result.total_return += r.reward;
    emit({RunnerEvent::Kind::kEnvStep, &r});
    if (r.game_over) {
      emit({RunnerEvent::Kind::kAgentEnd, nullptr, true});
      agent.end_episode(r.reward, true);
      break;
    }
    if (result.length >= max_steps) {
      emit({RunnerEvent::Kind::kAgentEnd, nullptr, false});
      agent.end_episode(r.reward, false);
      break;
    }
    if (envs::terminal_for_replay(r, mode)) {
      emit({RunnerEvent::Kind::kAgentEnd, nullptr, true});
      agent.end_episode(r.reward, true);
      emit({RunnerEvent::Kind::kAgentBegin});
      action = agent.begin_episode(r.observation);
    } else {
      action = agent.step(r.reward, r.observation);
    }
  }
  return result;
}

telemetry::PhaseStatistics run_phase(agents::AgentCore& agent, envs::Environment& env, envs::TerminationMode mode,
                                     std::uint64_t min_frames, std::uint64_t max_steps, const Observer& observer) {
  telemetry::PhaseStatistics stats;
  while (stats.frames < min_frames) {
    const auto e = run_one_episode(agent, env, mode, max_steps, observer);
    stats.episode_returns.push_back(e.total_return);
    stats.episode_lengths.push_back(e.length);
    stats.frames += e.length;
  }
  return stats;
}

Runner::Runner(const config::ConfigSet& cfg, std::filesystem::path base_dir)
    : config_set_(cfg), cfg_(read_runner_config(config_set_, &registry_)), base_dir_(std::move(base_dir)) {
  const std::uint64_t env_seed = Rng::substream(cfg_.seed, "env").next_u64();
  auto inner = envs::make_environment(cfg_.environment, env_seed, cfg_.chain_states, cfg_.catch_lives,
                                      cfg_.catch_balls);
  env_ = std::make_unique<envs::StickyActionEnvironment>(
      std::move(inner), cfg_.sticky_actions ? cfg_.sticky_prob : 0.0, Rng::substream(cfg_.seed, "sticky"));

  agents::AgentContext context;
  context.num_actions = env_->num_actions();
  context.frame_width = env_->frame_width();
  context.frame_height = env_->frame_height();
  context.stack_size = cfg_.stack_size;
  context.seed = cfg_.seed;
  context.config = &config_set_;
  context.registry = &registry_;
  agent_ = agents::make_agent(cfg_.agent_name, context);

  dump_ = config::dump_effective_config(config_set_, registry_);
  config::report_unknown_bindings(config_set_, registry_);
}

telemetry::IterationStatistics Runner::run_one_iteration(std::uint64_t iteration) {
  using Clock = std::chrono::steady_clock;
  telemetry::IterationStatistics stats;
  stats.iteration = iteration;
  try {
    agent_->set_eval_mode(false);
    env_->set_enabled(true);
    auto t0 = Clock::now();
    stats.train = run_phase(*agent_, *env_, cfg_.termination_mode, cfg_.training_steps, cfg_.max_steps_per_episode,
                            observer_);
    stats.train_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    if (cfg_.schedule == Schedule::kTrainAndEval) {
      agent_->set_eval_mode(true);
      env_->set_enabled(cfg_.eval_sticky_actions);
      t0 = Clock::now();
      stats.eval = run_phase(*agent_, *env_, cfg_.termination_mode, cfg_.evaluation_steps,
                             cfg_.max_steps_per_episode, observer_);
      stats.eval_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
      agent_->set_eval_mode(false);
      env_->set_enabled(true);
    }
  } catch (const ContractViolation& e) {
    throw ContractViolation("agent '" + cfg_.agent_name + "' broke the runner contract: " + e.what());
  }
  return stats;
}

void Runner::save_checkpoint(std::uint64_t iteration) {
  archive::Writer w;
  w.add_scalar("iteration", iteration);
  w.add_scalar("fingerprint", fnv1a64(dump_));
  checkpoint::Components components;
  components.emplace_back("agent", agent_->bundle());
  const std::string env_state = env_->save_state();
  components.emplace_back("env", archive::Bytes(env_state.begin(), env_state.end()));
  components.emplace_back("runner", w.finish());
  checkpoint::save(base_dir_, iteration, components);
}

std::uint64_t Runner::resume() {
  const auto cp = checkpoint::restore_latest(base_dir_, cfg_.allow_fresh_start);
  if (!cp) return 0;
  archive::Reader r(cp->get("runner"));
  if (r.scalar("fingerprint") != fnv1a64(dump_)) {
    throw RestoreError("checkpoint in '" + base_dir_.string() + "' was written with a different configuration");
  }
  agent_->unbundle(cp->get("agent"));
  const auto& env = cp->get("env");
  env_->restore_state(std::string(env.begin(), env.end()));
  return cp->iteration + 1;
}

void Runner::run_experiment() {
  std::error_code ec;
  std::filesystem::create_directories(base_dir_, ec);
  if (ec || !std::filesystem::is_directory(base_dir_)) {
    throw IoError("cannot create base directory '" + base_dir_.string() + "'");
  }
  const std::uint64_t start = resume();

  telemetry::LogHeader header;
  header.run_id = cfg_.agent_name + "-" + cfg_.environment + "-seed" + std::to_string(cfg_.seed);
  header.config_dump = dump_;
  header.environment = cfg_.environment;
  header.agent = cfg_.agent_name;
  header.seed = cfg_.seed;
  telemetry::LogWriter log(base_dir_ / "log.bin", header, start);
  io::atomic_write(base_dir_ / "config.gin", dump_);
  if (start > 0) {
    // A crash after the last checkpoint can leave GC or the csv mirror
    // unfinished, and there may be no iteration left to redo them.
    checkpoint::garbage_collect(base_dir_, cfg_.keep_last);
    io::atomic_write(base_dir_ / "log.csv", telemetry::log_to_csv(telemetry::read_log(log.path())));
  }

  for (std::uint64_t it = start; it < cfg_.num_iterations; ++it) {
    const auto stats = run_one_iteration(it);
    log.append(stats);
    save_checkpoint(it);
    checkpoint::garbage_collect(base_dir_, cfg_.keep_last);
    io::atomic_write(base_dir_ / "log.csv", telemetry::log_to_csv(telemetry::read_log(log.path())));
    std::ofstream timings(base_dir_ / "timings.csv", std::ios::app);
    timings << it << "," << stats.train_seconds << "," << stats.eval_seconds << "\n";
  }
}

}  // namespace valrl::runner
