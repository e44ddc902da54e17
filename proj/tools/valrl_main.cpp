// valrl train | plot | compare

#include <glob.h>

#include <CLI11.hpp>
#include <algorithm>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "valrl/config.hpp"
#include "valrl/errors.hpp"
#include "valrl/runner.hpp"
#include "valrl/telemetry.hpp"

namespace fs = std::filesystem;
using namespace valrl;

namespace {

// Each pattern may name log files or run directories (searched for
// log.bin).
std::vector<fs::path> expand_runs(const std::vector<std::string>& patterns) {
  std::vector<fs::path> out;
  for (const auto& pattern : patterns) {
    glob_t g{};
    if (::glob(pattern.c_str(), 0, nullptr, &g) == 0) {
      for (std::size_t i = 0; i < g.gl_pathc; ++i) {
        const fs::path p(g.gl_pathv[i]);
        if (fs::is_directory(p)) {
          for (auto& log : telemetry::find_logs(p)) out.push_back(log);
        } else {
          out.push_back(p);
        }
      }
    }
    globfree(&g);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw IoError("no experiment logs match the given --runs patterns");
  return out;
}

std::vector<telemetry::ExperimentLog> read_logs(const std::vector<fs::path>& paths) {
  std::vector<telemetry::ExperimentLog> logs;
  for (const auto& p : paths) logs.push_back(telemetry::read_log(p));
  return logs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"valrl: value-based reinforcement learning experiments"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "run (or resume) an experiment");
  std::string config_path, base_dir, schedule;
  std::vector<std::string> bindings;
  std::int64_t seed = -1;
  train->add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  train->add_option("--binding", bindings, "override, Component.param=value (repeatable)");
  train->add_option("--base-dir", base_dir, "experiment directory")->required();
  train->add_option("--schedule", schedule, "train or train_and_eval")->check(CLI::IsMember({"train", "train_and_eval"}));
  train->add_option("--seed", seed, "master seed")->check(CLI::NonNegativeNumber);

  auto* plot = app.add_subcommand("plot", "aggregate runs into a CSV or SVG plot");
  std::vector<std::string> runs;
  std::string group_by = "Runner.agent_name", metric = "train_return_mean", out, format = "svg", band = "stderr";
  plot->add_option("--runs", runs, "log files or run directories (globs)")->required();
  plot->add_option("--group-by", group_by, "binding whose value names each group");
  plot->add_option("--metric", metric, "train_return_mean | eval_return_mean | episode_length_mean");
  plot->add_option("--out", out, "output path")->required();
  plot->add_option("--format", format, "csv | svg")->check(CLI::IsMember({"csv", "svg"}));
  plot->add_option("--band", band, "minmax | stderr")->check(CLI::IsMember({"minmax", "stderr"}));

  auto* compare = app.add_subcommand("compare", "plot runs against shipped baselines");
  std::string baselines;
  compare->add_option("--runs", runs, "log files or run directories (globs)")->required();
  compare->add_option("--baselines", baselines, "baseline directory")->required();
  compare->add_option("--out", out, "plot path (.svg or .csv)")->required();
  compare->add_option("--metric", metric, "metric to compare");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      config::ConfigSet cfg = config::load_config_file(config_path);
      for (const auto& b : bindings) cfg.append(config::parse_binding(b));
      if (!schedule.empty()) cfg.append(config::parse_binding("Runner.schedule = " + schedule));
      if (seed >= 0) cfg.append(config::parse_binding("Runner.seed = " + std::to_string(seed)));
      runner::Runner r(cfg, base_dir);
      r.run_experiment();
      std::cout << "finished " << r.config().num_iterations << " iterations in " << base_dir << "\n";
    } else if (*plot) {
      const auto logs = read_logs(expand_runs(runs));
      const auto curves = telemetry::aggregate(telemetry::group_by(logs, group_by), telemetry::parse_metric(metric),
                                               telemetry::parse_band(band));
      telemetry::plot(curves, out, telemetry::parse_format(format), metric);
      std::cout << "wrote " << out << " (" << curves.size() << " groups)\n";
    } else if (*compare) {
      const auto logs = read_logs(expand_runs(runs));
      const auto rows = telemetry::compare_against_baseline(logs, baselines, out, telemetry::parse_metric(metric));
      std::cout << telemetry::render_summary(rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "valrl: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
