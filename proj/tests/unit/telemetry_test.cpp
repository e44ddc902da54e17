#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "fixtures.hpp"
#include "valrl/errors.hpp"
#include "valrl/io.hpp"
#include "valrl/telemetry.hpp"

namespace {

using namespace valrl::telemetry;
namespace fs = std::filesystem;

LogHeader header_for(const std::string& agent, std::uint64_t seed, const std::string& env = "CatchLives") {
  LogHeader h;
  h.run_id = agent + std::to_string(seed);
  h.config_dump = "Runner.agent_name = \"" + agent + "\"\nRunner.environment = \"" + env +
                  "\"\nRunner.seed = " + std::to_string(seed) + "\n";
  h.environment = env;
  h.agent = agent;
  h.seed = seed;
  return h;
}

IterationStatistics stats_for(std::uint64_t it, double ret, bool eval = false) {
  IterationStatistics s;
  s.iteration = it;
  s.train.episode_returns = {ret, ret + 1.0};
  s.train.episode_lengths = {10, 12};
  s.train.frames = 22;
  if (eval) {
    PhaseStatistics e;
    e.episode_returns = {ret * 2};
    e.episode_lengths = {5};
    e.frames = 5;
    s.eval = e;
  }
  return s;
}

fs::path write_log(const fs::path& dir, const LogHeader& h, const std::vector<double>& returns) {
  fs::create_directories(dir);
  LogWriter w(dir / "log.bin", h, 0);
  for (std::size_t i = 0; i < returns.size(); ++i) w.append(stats_for(i, returns[i], true));
  return dir / "log.bin";
}

TEST(Log, RoundTripAndOrder) {
  fixtures::TempDir dir("log");
  const auto h = header_for("dqn", 1);
  const auto path = write_log(dir.path(), h, {1.0, 2.0, 3.0});
  const auto log = read_log(path);
  EXPECT_EQ(log.header, h);
  ASSERT_EQ(log.records.size(), 3u);
  EXPECT_EQ(log.records[1], stats_for(1, 2.0, true));
  EXPECT_DOUBLE_EQ(log.records[2].train.mean_return(), 3.5);
  LogWriter again(path, h, 3);
  EXPECT_THROW(again.append(stats_for(7, 0.0)), valrl::ContractViolation);
}

TEST(Log, TornTailIsIgnoredAndTruncated) {
  fixtures::TempDir dir("log");
  const auto h = header_for("dqn", 1);
  const auto path = write_log(dir.path(), h, {1.0, 2.0});
  const auto full = fs::file_size(path);
  {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    out << "\x40\x00\x00\x00garbage";
  }
  EXPECT_EQ(read_log(path).records.size(), 2u);
  LogWriter w(path, h, 1);
  EXPECT_LT(fs::file_size(path), full);
  w.append(stats_for(1, 9.0));
  EXPECT_DOUBLE_EQ(read_log(path).records[1].train.episode_returns[0], 9.0);
}

TEST(Log, HeaderMismatchAndMissingRecords) {
  fixtures::TempDir dir("log");
  const auto path = write_log(dir.path(), header_for("dqn", 1), {1.0});
  EXPECT_THROW(LogWriter(path, header_for("dqn", 2), 0), valrl::RestoreError);
  EXPECT_THROW(LogWriter(path, header_for("dqn", 1), 5), valrl::RestoreError);
  EXPECT_THROW(LogWriter(dir.path() / "none.bin", header_for("dqn", 1), 2), valrl::RestoreError);
  std::ofstream(dir.path() / "bad.bin") << "nope";
  EXPECT_THROW(read_log(dir.path() / "bad.bin"), valrl::RestoreError);
}

TEST(Log, FingerprintIgnoresSeedOnly) {
  EXPECT_EQ(header_for("dqn", 1).fingerprint(), header_for("dqn", 2).fingerprint());
  EXPECT_NE(header_for("dqn", 1).fingerprint(), header_for("iqn", 1).fingerprint());
}

TEST(Log, CsvMirror) {
  fixtures::TempDir dir("log");
  const auto log = read_log(write_log(dir.path(), header_for("dqn", 1), {1.0}));
  const auto csv = log_to_csv(log);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,phase,episodes,frames,return_mean,length_mean");
  EXPECT_NE(csv.find("0,train,2,22,1.5,11"), std::string::npos);
  EXPECT_NE(csv.find("0,eval,1,5,2,5"), std::string::npos);
}

TEST(Metrics, Values) {
  const auto s = stats_for(0, 1.0, true);
  EXPECT_DOUBLE_EQ(metric_value(s, Metric::kTrainReturnMean), 1.5);
  EXPECT_DOUBLE_EQ(metric_value(s, Metric::kEvalReturnMean), 2.0);
  EXPECT_DOUBLE_EQ(metric_value(s, Metric::kEpisodeLengthMean), 11.0);
  EXPECT_THROW(metric_value(stats_for(0, 1.0), Metric::kEvalReturnMean), valrl::ContractViolation);
  EXPECT_EQ(parse_metric(to_string(Metric::kEvalReturnMean)), Metric::kEvalReturnMean);
  EXPECT_THROW(parse_metric("loss"), valrl::ConfigError);
}

ExperimentLog fake_log(const std::string& agent, std::uint64_t seed, std::vector<double> returns) {
  ExperimentLog log;
  log.header = header_for(agent, seed);
  log.path = agent + std::to_string(seed);
  for (std::size_t i = 0; i < returns.size(); ++i) log.records.push_back(stats_for(i, returns[i]));
  return log;
}

TEST(Aggregate, MinMaxAndStdErr) {
  RunSet runs{{"g", {fake_log("a", 0, {0.0, 1.0}), fake_log("a", 1, {2.0, 5.0})}}};
  const auto mm = aggregate(runs, Metric::kTrainReturnMean, Band::kMinMax);
  ASSERT_EQ(mm.size(), 1u);
  EXPECT_DOUBLE_EQ(mm[0].mean[0], 1.5);
  EXPECT_DOUBLE_EQ(mm[0].lo[0], 0.5);
  EXPECT_DOUBLE_EQ(mm[0].hi[1], 5.5);
  const auto se = aggregate(runs, Metric::kTrainReturnMean, Band::kStdErr);
  // Means 0.5 and 2.5: sd = sqrt(2), se = 1.
  EXPECT_NEAR(se[0].lo[0], 0.5, 1e-12);
  EXPECT_NEAR(se[0].hi[0], 2.5, 1e-12);
  EXPECT_THROW(aggregate({{"empty", {}}}, Metric::kTrainReturnMean, Band::kMinMax), valrl::ContractViolation);
}

TEST(Aggregate, TruncatesToShortestRun) {
  fixtures::CaptureWarnings capture;
  RunSet runs{{"g", {fake_log("a", 0, {1, 2, 3}), fake_log("a", 1, {1, 2})}}};
  EXPECT_EQ(aggregate(runs, Metric::kTrainReturnMean, Band::kMinMax)[0].mean.size(), 2u);
  EXPECT_TRUE(capture.any_contains("truncated"));
}

TEST(Aggregate, GroupByBinding) {
  fixtures::CaptureWarnings capture;
  const auto groups = group_by({fake_log("dqn", 0, {1}), fake_log("iqn", 0, {1}), fake_log("dqn", 1, {1})},
                               "Runner.agent_name");
  ASSERT_EQ(groups.size(), 2u);
  EXPECT_EQ(groups[0].first, "dqn");
  EXPECT_EQ(groups[0].second.size(), 2u);
  EXPECT_TRUE(capture.messages.empty());
  EXPECT_THROW(group_by({}, "nodot"), valrl::ConfigError);
}

TEST(Plot, CsvFormatAndSvgDeterminism) {
  RunSet runs{{"a", {fake_log("a", 0, {0.1, 0.2})}}, {"b", {fake_log("b", 0, {1, 2})}}};
  const auto curves = aggregate(runs, Metric::kTrainReturnMean, Band::kMinMax);
  const auto csv = render_csv(curves);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,group,mean,lo,hi");
  EXPECT_NE(csv.find("0,a,0.60000000000000009"), std::string::npos);
  EXPECT_EQ(render_svg(curves, "Return"), render_svg(curves, "Return"));
  EXPECT_NE(render_svg(curves, "Return").find("<svg"), std::string::npos);
  fixtures::TempDir dir("plot");
  EXPECT_THROW(plot({}, dir.path() / "x.svg", Format::kSvg), valrl::ContractViolation);
  EXPECT_FALSE(fs::exists(dir.path() / "x.svg"));
  plot(curves, dir.path() / "x.csv", Format::kCsv);
  EXPECT_EQ(valrl::io::read_text(dir.path() / "x.csv"), csv);
}

TEST(Summary, FinalTenPercent) {
  Curve c;
  c.group = "g";
  c.runs = 1;
  for (int i = 0; i < 20; ++i) c.mean.push_back(i);
  const auto rows = summarize({c});
  EXPECT_DOUBLE_EQ(rows[0].final_mean, 18.5);
  c.mean = {4.0};
  EXPECT_DOUBLE_EQ(summarize({c})[0].final_mean, 4.0);
}

TEST(Compare, OverlaysBaselinesAndWarnsOnEnvironment) {
  fixtures::TempDir dir("compare");
  write_log(dir.path() / "base" / "dqn" / "0", header_for("dqn", 0), {1, 2});
  write_log(dir.path() / "base" / "dqn" / "1", header_for("dqn", 1), {1, 3});
  write_log(dir.path() / "base" / "chain" / "0", header_for("dqn", 0, "ChainMDP"), {0, 1});
  const auto fresh = read_log(write_log(dir.path() / "new" / "x", header_for("sticky", 0), {0, 0}));
  fixtures::CaptureWarnings capture;
  const auto rows = compare_against_baseline({fresh}, dir.path() / "base", dir.path() / "out" / "cmp.svg");
  EXPECT_TRUE(capture.any_contains("ChainMDP"));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].group, "sticky");
  EXPECT_EQ(rows[1].group, "baseline/dqn");
  EXPECT_EQ(rows[1].runs, 3u);
  EXPECT_TRUE(fs::exists(dir.path() / "out" / "cmp.svg"));
  EXPECT_TRUE(fs::exists(dir.path() / "out" / "cmp.svg.summary.csv"));
  EXPECT_EQ(find_logs(dir.path() / "base").size(), 3u);
}

}  // namespace
