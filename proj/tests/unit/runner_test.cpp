#include <gtest/gtest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "valrl/checkpoint.hpp"
#include "valrl/errors.hpp"
#include "valrl/io.hpp"
#include "valrl/runner.hpp"

namespace {

using namespace valrl::runner;
using valrl::envs::Frame;
namespace fs = std::filesystem;

// Records the call sequence; always plays action `action`.
class ScriptedAgent : public valrl::agents::AgentCore {
 public:
  explicit ScriptedAgent(int action = 0) : action_(action) {}
  std::string name() const override { return "scripted"; }
  int begin_episode(const Frame&) override {
    calls.push_back("begin");
    return action_;
  }
  int step(double reward, const Frame&) override {
    calls.push_back("step:" + std::to_string(static_cast<int>(reward)));
    return action_;
  }
  void end_episode(double reward, bool terminal) override {
    calls.push_back(std::string(terminal ? "end:" : "cut:") + std::to_string(static_cast<int>(reward)));
  }
  valrl::archive::Bytes bundle() const override { return {}; }
  void unbundle(std::span<const std::uint8_t>) override {}

  std::vector<std::string> calls;

 private:
  int action_;
};

TEST(RunOneEpisode, ChainReachesGoal) {
  valrl::envs::ChainMdp env(3);
  ScriptedAgent agent(valrl::envs::ChainMdp::kRight);
  const auto r = run_one_episode(agent, env, valrl::envs::TerminationMode::kGameOver, 100);
  EXPECT_EQ(r.length, 2u);
  EXPECT_DOUBLE_EQ(r.total_return, 1.0);
  EXPECT_EQ(agent.calls, (std::vector<std::string>{"begin", "step:0", "end:1"}));
}

TEST(RunOneEpisode, StepCapCutsWithoutTerminal) {
  valrl::envs::ChainMdp env(10);
  ScriptedAgent agent(valrl::envs::ChainMdp::kLeft);
  const auto r = run_one_episode(agent, env, valrl::envs::TerminationMode::kGameOver, 3);
  EXPECT_EQ(r.length, 3u);
  EXPECT_EQ(agent.calls.back(), "cut:0");
}

TEST(RunOneEpisode, LifeLossSplitsAgentEpisodesWithoutReset) {
  valrl::envs::CatchLives env(1, 2, 50);
  ScriptedAgent agent(valrl::envs::CatchLives::kLeft);
  int resets = 0, begins = 0, terminal_ends = 0;
  const auto r = run_one_episode(agent, env, valrl::envs::TerminationMode::kLifeLoss, 100000,
                                 [&](const RunnerEvent& e) {
                                   resets += e.kind == RunnerEvent::Kind::kEnvReset;
                                   begins += e.kind == RunnerEvent::Kind::kAgentBegin;
                                   terminal_ends += e.kind == RunnerEvent::Kind::kAgentEnd && e.terminal;
                                 });
  EXPECT_EQ(resets, 1);
  EXPECT_EQ(begins, 2);  // one per life
  EXPECT_EQ(terminal_ends, 2);
  EXPECT_GT(r.length, 0u);
}

TEST(RunPhase, StopsAtFirstEpisodeBoundaryPastQuota) {
  valrl::envs::ChainMdp env(4);
  ScriptedAgent agent(valrl::envs::ChainMdp::kRight);
  const auto stats = run_phase(agent, env, valrl::envs::TerminationMode::kGameOver, 7, 100);
  EXPECT_EQ(stats.episode_returns.size(), 3u);
  EXPECT_EQ(stats.frames, 9u);
}

TEST(RunnerConfigTest, DefaultsAndErrors) {
  valrl::config::ParameterRegistry registry;
  const auto cfg = read_runner_config(valrl::config::ConfigSet{}, &registry);
  EXPECT_EQ(cfg.agent_name, "dqn");
  EXPECT_EQ(cfg.environment, "CatchLives");
  EXPECT_TRUE(cfg.sticky_actions);
  EXPECT_DOUBLE_EQ(cfg.sticky_prob, 0.25);
  EXPECT_EQ(cfg.termination_mode, valrl::envs::TerminationMode::kGameOver);
  EXPECT_EQ(cfg.keep_last, 3u);
  for (const char* bad : {"Runner.schedule = sometimes", "Runner.sticky_prob = 1.5", "Runner.num_iterations = 0",
                          "Runner.termination_mode = Never", "Runner.stack_size = -1"}) {
    EXPECT_THROW(read_runner_config(valrl::config::parse_config(bad), nullptr), valrl::ConfigError) << bad;
  }
}

const char* kTiny = R"(
Runner.agent_name = "dqn"
Runner.environment = "ChainMDP"
Runner.schedule = train_and_eval
Runner.num_iterations = 3
Runner.training_steps = 200
Runner.evaluation_steps = 50
ChainMDP.num_states = 5
DQNAgent.min_replay_history = 50
DQNAgent.target_update_period = 50
DQNAgent.epsilon_decay_period = 100
Network.hidden_units = 16
ReplayBuffer.capacity = 1000
)";

TEST(RunnerTest, ExperimentWritesAllArtifacts) {
  fixtures::TempDir dir("runner");
  Runner runner(valrl::config::parse_config(kTiny), dir.path());
  runner.run_experiment();
  for (const char* f : {"log.bin", "log.csv", "config.gin", "timings.csv"}) {
    EXPECT_TRUE(fs::exists(dir.path() / f)) << f;
  }
  const auto log = valrl::telemetry::read_log(dir.path() / "log.bin");
  ASSERT_EQ(log.records.size(), 3u);
  EXPECT_TRUE(log.records[0].eval.has_value());
  EXPECT_GE(log.records[0].train.frames, 200u);
  EXPECT_EQ(valrl::io::read_text(dir.path() / "config.gin"), runner.effective_config());
  EXPECT_EQ(valrl::checkpoint::manifest_iterations(dir.path()), (std::vector<std::uint64_t>{0, 1, 2}));
  // Re-parsing the dump reproduces the configuration.
  Runner again(valrl::config::parse_config(runner.effective_config()), dir.path() / "again");
  EXPECT_EQ(again.effective_config(), runner.effective_config());
}

TEST(RunnerTest, ResumeRefusesOtherConfigs) {
  fixtures::TempDir dir("runner");
  Runner(valrl::config::parse_config(kTiny), dir.path()).run_experiment();
  Runner other(valrl::config::parse_config(std::string(kTiny) + "DQNAgent.gamma = 0.5\n"), dir.path());
  EXPECT_THROW(other.run_experiment(), valrl::RestoreError);
}

TEST(RunnerTest, FinishedRunIsANoOp) {
  fixtures::TempDir dir("runner");
  Runner(valrl::config::parse_config(kTiny), dir.path()).run_experiment();
  const auto before = valrl::io::read_file(dir.path() / "log.bin");
  Runner(valrl::config::parse_config(kTiny), dir.path()).run_experiment();
  EXPECT_EQ(valrl::io::read_file(dir.path() / "log.bin"), before);
}

TEST(RunnerTest, ResumeRefreshesCsvLeftStaleByCrash) {
  fixtures::TempDir ref("runner");
  Runner(valrl::config::parse_config(kTiny), ref.path()).run_experiment();
  fixtures::TempDir dir("runner");
  int csv_writes = 0;
  auto previous = valrl::io::set_write_hook([&](const valrl::io::WriteEvent& e) {
    if (e.kind == valrl::io::WriteEvent::Kind::kTempCreated && e.path.filename() == "log.csv.tmp" &&
        ++csv_writes == 3) {
      throw valrl::io::SimulatedCrash("last csv write");
    }
  });
  EXPECT_THROW(Runner(valrl::config::parse_config(kTiny), dir.path()).run_experiment(), valrl::io::SimulatedCrash);
  valrl::io::set_write_hook(previous);
  Runner(valrl::config::parse_config(kTiny), dir.path()).run_experiment();
  EXPECT_EQ(valrl::io::read_text(dir.path() / "log.csv"), valrl::io::read_text(ref.path() / "log.csv"));
}

TEST(RunnerTest, UnknownBindingsWarn) {
  fixtures::CaptureWarnings capture;
  fixtures::TempDir dir("runner");
  Runner runner(valrl::config::parse_config(std::string(kTiny) + "DQNAgent.epsilon_trian = 0.2\n"), dir.path());
  EXPECT_TRUE(capture.any_contains("epsilon_trian"));
}

TEST(RunnerTest, SeedsChangeResults) {
  fixtures::TempDir dir("runner");
  Runner a(valrl::config::parse_config(std::string(kTiny) + "Runner.environment = \"CatchLives\"\n"), dir.path() / "a");
  Runner b(valrl::config::parse_config(std::string(kTiny) + "Runner.environment = \"CatchLives\"\nRunner.seed = 1\n"),
           dir.path() / "b");
  EXPECT_NE(a.run_one_iteration(0).train.episode_returns, b.run_one_iteration(0).train.episode_returns);
}

}  // namespace
