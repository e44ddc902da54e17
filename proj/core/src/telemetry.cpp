#include "valrl/telemetry.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

#include "valrl/archive.hpp"
#include "valrl/errors.hpp"
#include "valrl/io.hpp"
#include "valrl/rng.hpp"

namespace valrl::telemetry {
namespace {

constexpr char kMagic[4] = {'V', 'R', 'L', 'G'};
constexpr std::uint32_t kLogVersion = 1;

void put_u32(archive::Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

archive::Bytes frame_record(const archive::Bytes& payload) {
  archive::Bytes out;
  out.reserve(payload.size() + 8);
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  put_u32(out, archive::crc32(payload));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

archive::Bytes encode_header(const LogHeader& h) {
  archive::Writer w;
  w.add_string("run_id", h.run_id);
  w.add_string("config", h.config_dump);
  w.add_string("environment", h.environment);
  w.add_string("agent", h.agent);
  w.add_scalar("seed", h.seed);
  w.add_scalar("fingerprint", h.fingerprint());
  return w.finish();
}

LogHeader decode_header(std::span<const std::uint8_t> bytes) {
  archive::Reader r(bytes);
  LogHeader h;
  h.run_id = r.string("run_id");
  h.config_dump = r.string("config");
  h.environment = r.string("environment");
  h.agent = r.string("agent");
  h.seed = r.scalar("seed");
  return h;
}

void write_phase(archive::Writer& w, const std::string& prefix, const PhaseStatistics& p) {
  w.add_f64(prefix + "returns", p.episode_returns);
  w.add_u64(prefix + "lengths", p.episode_lengths);
  w.add_scalar(prefix + "frames", p.frames);
}

PhaseStatistics read_phase(const archive::Reader& r, const std::string& prefix) {
  PhaseStatistics p;
  p.episode_returns = r.f64(prefix + "returns");
  p.episode_lengths = r.u64(prefix + "lengths");
  p.frames = r.scalar(prefix + "frames");
  return p;
}

archive::Bytes encode_stats(const IterationStatistics& s) {
  archive::Writer w;
  w.add_scalar("iteration", s.iteration);
  write_phase(w, "train/", s.train);
  w.add_scalar("has_eval", s.eval ? 1 : 0);
  if (s.eval) write_phase(w, "eval/", *s.eval);
  return w.finish();
}

IterationStatistics decode_stats(std::span<const std::uint8_t> bytes) {
  archive::Reader r(bytes);
  IterationStatistics s;
  s.iteration = r.scalar("iteration");
  s.train = read_phase(r, "train/");
  if (r.scalar("has_eval")) s.eval = read_phase(r, "eval/");
  return s;
}

// Splits a log file into complete records. `ends[i]` is the byte offset
// just past record i (record 0 is the header).
struct Scan {
  std::vector<std::span<const std::uint8_t>> payloads;
  std::vector<std::size_t> ends;
};

Scan scan(const archive::Bytes& file, const std::filesystem::path& path) {
  if (file.size() < 8 || std::memcmp(file.data(), kMagic, 4) != 0) {
    throw RestoreError("'" + path.string() + "' is not an experiment log");
  }
  if (get_u32(file.data() + 4) != kLogVersion) throw RestoreError("'" + path.string() + "': unsupported log version");
  Scan s;
  std::size_t pos = 8;
  while (pos + 8 <= file.size()) {
    const std::uint32_t len = get_u32(file.data() + pos);
    const std::uint32_t crc = get_u32(file.data() + pos + 4);
    if (file.size() - pos - 8 < len) break;
    std::span<const std::uint8_t> payload(file.data() + pos + 8, len);
    if (archive::crc32(payload) != crc) break;
    s.payloads.push_back(payload);
    pos += 8 + len;
    s.ends.push_back(pos);
  }
  if (s.payloads.empty()) throw RestoreError("'" + path.string() + "': missing log header");
  return s;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double PhaseStatistics::mean_return() const { return mean(episode_returns); }

double PhaseStatistics::mean_length() const {
  std::vector<double> l(episode_lengths.begin(), episode_lengths.end());
  return mean(l);
}

std::uint64_t LogHeader::fingerprint() const {
  std::istringstream in(config_dump);
  std::string line, kept;
  while (std::getline(in, line)) {
    if (line.rfind("Runner.seed ", 0) == 0 || line.rfind("Runner.seed=", 0) == 0) continue;
    kept += line + "\n";
  }
  return fnv1a64(kept);
}

LogWriter::LogWriter(std::filesystem::path path, const LogHeader& header, std::uint64_t keep_records)
    : path_(std::move(path)) {
  std::error_code ec;
  if (!std::filesystem::exists(path_, ec)) {
    if (keep_records > 0) {
      throw RestoreError("log '" + path_.string() + "' is missing but " + std::to_string(keep_records) +
                         " records were expected");
    }
    archive::Bytes file(kMagic, kMagic + 4);
    put_u32(file, kLogVersion);
    const auto rec = frame_record(encode_header(header));
    file.insert(file.end(), rec.begin(), rec.end());
    io::atomic_write(path_, file);
    records_ = 0;
    return;
  }
  const auto file = io::read_file(path_);
  const Scan s = scan(file, path_);
  if (!(decode_header(s.payloads[0]) == header)) {
    throw RestoreError("log '" + path_.string() + "' was written by a different configuration");
  }
  const std::uint64_t complete = s.payloads.size() - 1;
  if (complete < keep_records) {
    throw RestoreError("log '" + path_.string() + "' has " + std::to_string(complete) + " records, expected at least " +
                       std::to_string(keep_records));
  }
  const std::size_t end = s.ends[keep_records];
  if (end != file.size()) std::filesystem::resize_file(path_, end);
  records_ = keep_records;
}

void LogWriter::append(const IterationStatistics& stats) {
  if (stats.iteration != records_) {
    throw ContractViolation("log: expected iteration " + std::to_string(records_) + ", got " +
                            std::to_string(stats.iteration));
  }
  io::append(path_, frame_record(encode_stats(stats)));
  ++records_;
}

ExperimentLog read_log(const std::filesystem::path& path) {
  const auto file = io::read_file(path);
  const Scan s = scan(file, path);
  ExperimentLog log;
  log.path = path;
  log.header = decode_header(s.payloads[0]);
  for (std::size_t i = 1; i < s.payloads.size(); ++i) log.records.push_back(decode_stats(s.payloads[i]));
  return log;
}

std::string log_to_csv(const ExperimentLog& log) {
  std::ostringstream out;
  out << "iteration,phase,episodes,frames,return_mean,length_mean\n";
  char buf[256];
  auto row = [&](std::uint64_t it, const char* phase, const PhaseStatistics& p) {
    std::snprintf(buf, sizeof buf, "%llu,%s,%zu,%llu,%.17g,%.17g\n", static_cast<unsigned long long>(it), phase,
                  p.episode_returns.size(), static_cast<unsigned long long>(p.frames), p.mean_return(),
                  p.mean_length());
    out << buf;
  };
  for (const auto& r : log.records) {
    row(r.iteration, "train", r.train);
    if (r.eval) row(r.iteration, "eval", *r.eval);
  }
  return out.str();
}

Metric parse_metric(std::string_view name) {
  if (name == "train_return_mean") return Metric::kTrainReturnMean;
  if (name == "eval_return_mean") return Metric::kEvalReturnMean;
  if (name == "episode_length_mean") return Metric::kEpisodeLengthMean;
  throw ConfigError("unknown metric '" + std::string(name) +
                    "' (expected train_return_mean, eval_return_mean or episode_length_mean)");
}

const char* to_string(Metric metric) {
  switch (metric) {
    case Metric::kTrainReturnMean: return "train_return_mean";
    case Metric::kEvalReturnMean: return "eval_return_mean";
    case Metric::kEpisodeLengthMean: return "episode_length_mean";
  }
  return "?";
}

double metric_value(const IterationStatistics& stats, Metric metric) {
  switch (metric) {
    case Metric::kTrainReturnMean: return stats.train.mean_return();
    case Metric::kEvalReturnMean:
      if (!stats.eval) throw ContractViolation("iteration " + std::to_string(stats.iteration) + " has no eval phase");
      return stats.eval->mean_return();
    case Metric::kEpisodeLengthMean: return stats.train.mean_length();
  }
  return 0.0;
}

std::vector<std::filesystem::path> find_logs(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> out;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename() == "log.bin") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace valrl::telemetry
