#pragma once

// Experiment logs and the aggregation/plotting used to compare runs.
//
// Log file layout: header record, then one record per iteration. Each record
// is u32 payload length | u32 crc32(payload) | payload, where payloads are
// archive-format bytes. A torn final record (crash mid-append) is ignored by
// readers and cut off by writers reopening the file.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace valrl::telemetry {

struct PhaseStatistics {
  std::vector<double> episode_returns;
  std::vector<std::uint64_t> episode_lengths;
  std::uint64_t frames = 0;

  double mean_return() const;
  double mean_length() const;
  friend bool operator==(const PhaseStatistics&, const PhaseStatistics&) = default;
};

struct IterationStatistics {
  std::uint64_t iteration = 0;
  PhaseStatistics train;
  std::optional<PhaseStatistics> eval;
  // Wall clock is kept out of the log (it would break bit-identical reruns)
  // and written to timings.csv instead.
  double train_seconds = 0.0;
  double eval_seconds = 0.0;

  friend bool operator==(const IterationStatistics& a, const IterationStatistics& b) {
    return a.iteration == b.iteration && a.train == b.train && a.eval == b.eval;
  }
};

struct LogHeader {
  std::string run_id;
  std::string config_dump;
  std::string environment;
  std::string agent;
  std::uint64_t seed = 0;

  // Hash of the config dump without its Runner.seed line, so seeds of one
  // setting share a fingerprint.
  std::uint64_t fingerprint() const;
  friend bool operator==(const LogHeader&, const LogHeader&) = default;
};

struct ExperimentLog {
  LogHeader header;
  std::vector<IterationStatistics> records;
  std::filesystem::path path;
};

class LogWriter {
 public:
  // Creates the log (header written atomically) or reopens an existing one,
  // whose header must match, keeping its first `keep_records` records and
  // truncating anything after them.
  LogWriter(std::filesystem::path path, const LogHeader& header, std::uint64_t keep_records);

  // stats.iteration must equal size(); otherwise ContractViolation.
  void append(const IterationStatistics& stats);
  std::uint64_t size() const { return records_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::uint64_t records_ = 0;
};

// Reads every complete record. Throws IoError/RestoreError if the header is
// unreadable.
ExperimentLog read_log(const std::filesystem::path& path);

// One row per (iteration, phase) with the per-iteration means.
std::string log_to_csv(const ExperimentLog& log);

enum class Metric { kTrainReturnMean, kEvalReturnMean, kEpisodeLengthMean };
Metric parse_metric(std::string_view name);
const char* to_string(Metric metric);
// Throws ContractViolation if the record lacks the phase.
double metric_value(const IterationStatistics& stats, Metric metric);

enum class Band { kMinMax, kStdErr };
Band parse_band(std::string_view name);

struct Curve {
  std::string group;
  std::size_t runs = 0;
  std::vector<double> mean, lo, hi;  // one entry per iteration
};

using RunSet = std::vector<std::pair<std::string, std::vector<ExperimentLog>>>;

// Cross-run mean per iteration with a min-max or mean ± standard-error band.
// Groups are truncated to their shortest run (with a warning). Throws
// ContractViolation for an empty group.
std::vector<Curve> aggregate(const RunSet& runs, Metric metric, Band band);

// Groups logs by the value a binding (e.g. Runner.agent_name) has in each
// log's effective config, in first-seen order. Also warns when fingerprints
// inside a group differ.
RunSet group_by(const std::vector<ExperimentLog>& logs, std::string_view binding);

// `iteration,group,mean,lo,hi` rows at 17 significant digits.
std::string render_csv(const std::vector<Curve>& curves);
std::string render_svg(const std::vector<Curve>& curves, const std::string& y_label);

enum class Format { kCsv, kSvg };
Format parse_format(std::string_view name);
// Throws ContractViolation (and writes nothing) for an empty curve list.
void plot(const std::vector<Curve>& curves, const std::filesystem::path& out, Format format,
          const std::string& y_label = "Return");

struct SummaryRow {
  std::string group;
  std::size_t runs = 0;
  std::size_t iterations = 0;
  double final_mean = 0.0;  // mean over the last 10% of iterations (at least one)
};

std::vector<SummaryRow> summarize(const std::vector<Curve>& curves);
std::string render_summary(const std::vector<SummaryRow>& rows);

// Overlays the new runs (grouped by agent) on baseline logs found under
// `baseline_dir` (also grouped by agent, labelled "baseline/<agent>"), for
// the environment(s) the new runs use. Writes the plot to `out` (format from
// its extension, svg unless .csv) and the summary table to
// `<out>.summary.csv`. Returns the summary.
std::vector<SummaryRow> compare_against_baseline(const std::vector<ExperimentLog>& new_runs,
                                                 const std::filesystem::path& baseline_dir,
                                                 const std::filesystem::path& out,
                                                 Metric metric = Metric::kTrainReturnMean);

// All `log.bin` files below `dir`, sorted.
std::vector<std::filesystem::path> find_logs(const std::filesystem::path& dir);

}  // namespace valrl::telemetry
