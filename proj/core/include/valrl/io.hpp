#pragma once

// File writes used by checkpoints and logs. Every durable write passes
// through a few named boundaries where a test hook can simulate a crash by
// throwing.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace valrl::io {

struct WriteEvent {
  enum class Kind {
    kTempCreated,   // temp file exists, nothing written
    kTempPartial,   // roughly half the bytes written
    kTempComplete,  // all bytes written and synced, not yet renamed
    kRenamed,       // rename to the final name done
    kBeforeDelete,
    kAfterDelete,
    kAppendPartial,   // an append is half written
    kAppendComplete,  // an append is fully written and synced
  };
  Kind kind;
  std::filesystem::path path;
};

const char* to_string(WriteEvent::Kind kind);

using WriteHook = std::function<void(const WriteEvent&)>;

// Process-wide; returns the previous hook. Meant for fault-injection tests.
WriteHook set_write_hook(WriteHook hook);

// Thrown by test hooks to stop a run at a write boundary.
class SimulatedCrash : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Writes `<path>.tmp`, syncs it, then renames over `path`.
void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void atomic_write(const std::filesystem::path& path, const std::string& text);

// Appends and syncs. Reports kAppendPartial/kAppendComplete.
void append(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

// Removes a file, reporting kBeforeDelete/kAfterDelete. Returns false (and
// does not throw) if the file could not be removed.
bool remove_file(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

}  // namespace valrl::io
