#pragma once

// Directory layout under a base directory:
//   checkpoints/manifest-<iter>.txt
//   checkpoints/<component>-<iter>.bin
//
// Payloads go to temp names and are renamed into place; the manifest is
// written last, so a checkpoint is either complete or invisible.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "valrl/archive.hpp"

namespace valrl::checkpoint {

inline constexpr int kManifestVersion = 1;

struct ManifestEntry {
  std::string component;
  std::string file;  // relative to the checkpoints directory
  std::uint32_t crc32 = 0;
  std::uint64_t bytes = 0;

  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

struct Manifest {
  int format_version = kManifestVersion;
  std::uint64_t iteration = 0;
  std::string created;  // UTC, ISO 8601
  std::vector<ManifestEntry> entries;

  std::string to_text() const;
  // Throws RestoreError on malformed text.
  static Manifest parse(const std::string& text);
};

using Components = std::vector<std::pair<std::string, archive::Bytes>>;

struct Checkpoint {
  std::uint64_t iteration = 0;
  Components components;

  // Throws RestoreError if absent.
  const archive::Bytes& get(const std::string& component) const;
};

std::filesystem::path checkpoint_dir(const std::filesystem::path& base_dir);

// Component names are [A-Za-z0-9_]+. Throws IoError on write failure;
// existing checkpoints are left alone.
std::filesystem::path save(const std::filesystem::path& base_dir, std::uint64_t iteration,
                           const Components& components);

// Loads one checkpoint and verifies every checksum; nullopt if missing or
// invalid.
std::optional<Checkpoint> load(const std::filesystem::path& base_dir, std::uint64_t iteration);

// Iterations with a manifest file (valid or not), ascending.
std::vector<std::uint64_t> manifest_iterations(const std::filesystem::path& base_dir);

// The highest-iteration checkpoint that verifies, warning about any newer
// ones skipped. nullopt for a directory without manifests. If manifests
// exist but none verifies, throws RestoreError unless `allow_fresh_start`.
std::optional<Checkpoint> restore_latest(const std::filesystem::path& base_dir, bool allow_fresh_start = false);

// Keeps the newest `keep_last` valid checkpoints and removes files of older
// iterations. Newer (possibly in-progress) files are never touched. Returns
// the removed paths; failures are warned about and skipped.
std::vector<std::filesystem::path> garbage_collect(const std::filesystem::path& base_dir, std::size_t keep_last);

}  // namespace valrl::checkpoint
