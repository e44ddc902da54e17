#include "valrl/checkpoint.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <regex>
#include <sstream>

#include "valrl/errors.hpp"
#include "valrl/io.hpp"
#include "valrl/warnings.hpp"

namespace valrl::checkpoint {
namespace {

bool valid_component_name(const std::string& name) {
  return !name.empty() && std::all_of(name.begin(), name.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
  });
}

std::string manifest_name(std::uint64_t iteration) { return "manifest-" + std::to_string(iteration) + ".txt"; }

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Iteration encoded in a checkpoint file name, for manifests, payloads and
// their temp files.
std::optional<std::uint64_t> iteration_of(const std::string& filename) {
  static const std::regex pattern(R"(^(?:manifest|[A-Za-z0-9_]+)-(\d+)\.(?:txt|bin)(?:\.tmp)?$)");
  std::smatch m;
  if (!std::regex_match(filename, m, pattern)) return std::nullopt;
  std::uint64_t it = 0;
  const std::string digits = m[1];
  auto [p, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), it);
  if (ec != std::errc()) return std::nullopt;
  return it;
}

std::uint64_t parse_u64(const std::string& s, int base = 10) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, base);
  if (ec != std::errc() || p != s.data() + s.size()) throw RestoreError("manifest: bad number '" + s + "'");
  return v;
}

}  // namespace

std::string Manifest::to_text() const {
  std::ostringstream out;
  out << "format_version " << format_version << "\n";
  out << "iteration " << iteration << "\n";
  out << "created " << created << "\n";
  for (const auto& e : entries) {
    char crc[9];
    std::snprintf(crc, sizeof crc, "%08x", e.crc32);
    out << "component " << e.component << " " << e.file << " " << crc << " " << e.bytes << "\n";
  }
  out << "end\n";
  return out.str();
}

Manifest Manifest::parse(const std::string& text) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  bool have_version = false, have_iteration = false, ended = false;
  while (std::getline(in, line)) {
    if (ended) throw RestoreError("manifest: content after end marker");
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    if (key == "format_version") {
      std::string v;
      fields >> v;
      m.format_version = static_cast<int>(parse_u64(v));
      have_version = true;
    } else if (key == "iteration") {
      std::string v;
      fields >> v;
      m.iteration = parse_u64(v);
      have_iteration = true;
    } else if (key == "created") {
      fields >> m.created;
    } else if (key == "component") {
      ManifestEntry e;
      std::string crc, bytes;
      if (!(fields >> e.component >> e.file >> crc >> bytes)) throw RestoreError("manifest: short component line");
      e.crc32 = static_cast<std::uint32_t>(parse_u64(crc, 16));
      e.bytes = parse_u64(bytes);
      m.entries.push_back(std::move(e));
    } else if (key == "end") {
      ended = true;
    } else {
      throw RestoreError("manifest: unexpected line '" + line + "'");
    }
  }
  // The end marker guards against a manifest cut short.
  if (!have_version || !have_iteration || !ended) throw RestoreError("manifest: incomplete");
  if (m.format_version != kManifestVersion) {
    throw RestoreError("manifest: unsupported format version " + std::to_string(m.format_version));
  }
  return m;
}

const archive::Bytes& Checkpoint::get(const std::string& component) const {
  for (const auto& [name, bytes] : components) {
    if (name == component) return bytes;
  }
  throw RestoreError("checkpoint " + std::to_string(iteration) + " has no component '" + component + "'");
}

std::filesystem::path checkpoint_dir(const std::filesystem::path& base_dir) { return base_dir / "checkpoints"; }

std::filesystem::path save(const std::filesystem::path& base_dir, std::uint64_t iteration,
                           const Components& components) {
  const auto dir = checkpoint_dir(base_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

  Manifest manifest;
  manifest.iteration = iteration;
  manifest.created = utc_now();
  for (const auto& [name, bytes] : components) {
    if (!valid_component_name(name)) throw ContractViolation("checkpoint: bad component name '" + name + "'");
    ManifestEntry e;
    e.component = name;
    e.file = name + "-" + std::to_string(iteration) + ".bin";
    e.crc32 = archive::crc32(bytes);
    e.bytes = bytes.size();
    io::atomic_write(dir / e.file, bytes);
    manifest.entries.push_back(std::move(e));
  }
  const auto path = dir / manifest_name(iteration);
  io::atomic_write(path, manifest.to_text());
  return path;
}

std::optional<Checkpoint> load(const std::filesystem::path& base_dir, std::uint64_t iteration) {
  const auto dir = checkpoint_dir(base_dir);
  try {
    const Manifest m = Manifest::parse(io::read_text(dir / manifest_name(iteration)));
    if (m.iteration != iteration) return std::nullopt;
    Checkpoint cp;
    cp.iteration = iteration;
    for (const auto& e : m.entries) {
      auto bytes = io::read_file(dir / e.file);
      if (bytes.size() != e.bytes || archive::crc32(bytes) != e.crc32) return std::nullopt;
      cp.components.emplace_back(e.component, std::move(bytes));
    }
    return cp;
  } catch (const RestoreError&) {
    return std::nullopt;
  } catch (const IoError&) {
    return std::nullopt;
  }
}

std::vector<std::uint64_t> manifest_iterations(const std::filesystem::path& base_dir) {
  std::vector<std::uint64_t> out;
  const auto dir = checkpoint_dir(base_dir);
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("manifest-", 0) != 0 || name.ends_with(".tmp")) continue;
    if (auto it = iteration_of(name)) out.push_back(*it);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<Checkpoint> restore_latest(const std::filesystem::path& base_dir, bool allow_fresh_start) {
  const auto iterations = manifest_iterations(base_dir);
  if (iterations.empty()) return std::nullopt;
  for (auto it = iterations.rbegin(); it != iterations.rend(); ++it) {
    if (auto cp = load(base_dir, *it)) {
      if (it != iterations.rbegin()) {
        warn("checkpoint " + std::to_string(iterations.back()) + " failed verification; restored iteration " +
             std::to_string(*it) + " instead");
      }
      return cp;
    }
  }
  if (allow_fresh_start) {
    warn("no checkpoint in '" + checkpoint_dir(base_dir).string() + "' verifies; starting from scratch");
    return std::nullopt;
  }
  throw RestoreError("every checkpoint in '" + checkpoint_dir(base_dir).string() +
                     "' is corrupt (pass the fresh-start flag to start over)");
}

std::vector<std::filesystem::path> garbage_collect(const std::filesystem::path& base_dir, std::size_t keep_last) {
  if (keep_last < 1) throw ContractViolation("garbage_collect: keep_last must be >= 1");
  const auto iterations = manifest_iterations(base_dir);
  std::vector<std::uint64_t> kept;
  for (auto it = iterations.rbegin(); it != iterations.rend() && kept.size() < keep_last; ++it) {
    if (load(base_dir, *it)) kept.push_back(*it);
  }
  std::vector<std::filesystem::path> removed;
  if (kept.size() < keep_last) return removed;
  const std::uint64_t oldest_kept = kept.back();

  const auto dir = checkpoint_dir(base_dir);
  std::vector<std::pair<std::uint64_t, std::filesystem::path>> doomed;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto it = iteration_of(entry.path().filename().string());
    if (it && *it < oldest_kept) doomed.emplace_back(*it, entry.path());
  }
  // Manifests go first so a half-collected checkpoint is never mistaken for
  // a valid one.
  std::sort(doomed.begin(), doomed.end(), [](const auto& a, const auto& b) {
    const bool am = a.second.filename().string().rfind("manifest-", 0) == 0;
    const bool bm = b.second.filename().string().rfind("manifest-", 0) == 0;
    if (a.first != b.first) return a.first < b.first;
    if (am != bm) return am;
    return a.second < b.second;
  });
  for (const auto& [it, path] : doomed) {
    if (io::remove_file(path)) {
      removed.push_back(path);
    } else {
      warn("garbage_collect: could not remove '" + path.string() + "'");
    }
  }
  return removed;
}

}  // namespace valrl::checkpoint
