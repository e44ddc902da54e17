#include "valrl/io.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>

#include "valrl/errors.hpp"

namespace valrl::io {
namespace {

WriteHook& hook() {
  static WriteHook h;
  return h;
}

void emit(WriteEvent::Kind kind, const std::filesystem::path& path) {
  if (hook()) hook()(WriteEvent{kind, path});
}

[[noreturn]] void fail(const std::string& what, const std::filesystem::path& path) {
  throw IoError(what + " '" + path.string() + "': " + std::strerror(errno));
}

class Fd {
 public:
  Fd(const std::filesystem::path& path, int flags) : fd_(::open(path.c_str(), flags, 0644)) {
    if (fd_ < 0) fail("cannot open", path);
  }
  ~Fd() {
    if (fd_ >= 0) ::close(fd_);
  }
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;

  void write_all(const std::uint8_t* data, std::size_t n, const std::filesystem::path& path) {
    while (n > 0) {
      const ssize_t w = ::write(fd_, data, n);
      if (w < 0) {
        if (errno == EINTR) continue;
        fail("write failed for", path);
      }
      data += w;
      n -= static_cast<std::size_t>(w);
    }
  }
  void sync(const std::filesystem::path& path) {
    if (::fsync(fd_) != 0) fail("fsync failed for", path);
  }

 private:
  int fd_;
};

void sync_directory(const std::filesystem::path& dir) {
  const int fd = ::open(dir.empty() ? "." : dir.c_str(), O_RDONLY | O_DIRECTORY);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

}  // namespace

const char* to_string(WriteEvent::Kind kind) {
  switch (kind) {
    case WriteEvent::Kind::kTempCreated: return "temp-created";
    case WriteEvent::Kind::kTempPartial: return "temp-partial";
    case WriteEvent::Kind::kTempComplete: return "temp-complete";
    case WriteEvent::Kind::kRenamed: return "renamed";
    case WriteEvent::Kind::kBeforeDelete: return "before-delete";
    case WriteEvent::Kind::kAfterDelete: return "after-delete";
    case WriteEvent::Kind::kAppendPartial: return "append-partial";
    case WriteEvent::Kind::kAppendComplete: return "append-complete";
  }
  return "?";
}

WriteHook set_write_hook(WriteHook h) {
  WriteHook previous = std::move(hook());
  hook() = std::move(h);
  return previous;
}

void atomic_write(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    Fd fd(tmp, O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC);
    emit(WriteEvent::Kind::kTempCreated, tmp);
    const std::size_t half = bytes.size() / 2;
    fd.write_all(bytes.data(), half, tmp);
    emit(WriteEvent::Kind::kTempPartial, tmp);
    fd.write_all(bytes.data() + half, bytes.size() - half, tmp);
    fd.sync(tmp);
  }
  emit(WriteEvent::Kind::kTempComplete, tmp);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " + ec.message());
  sync_directory(path.parent_path());
  emit(WriteEvent::Kind::kRenamed, path);
}

void atomic_write(const std::filesystem::path& path, const std::string& text) {
  atomic_write(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void append(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  Fd fd(path, O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC);
  const std::size_t half = bytes.size() / 2;
  fd.write_all(bytes.data(), half, path);
  emit(WriteEvent::Kind::kAppendPartial, path);
  fd.write_all(bytes.data() + half, bytes.size() - half, path);
  fd.sync(path);
  emit(WriteEvent::Kind::kAppendComplete, path);
}

bool remove_file(const std::filesystem::path& path) {
  emit(WriteEvent::Kind::kBeforeDelete, path);
  std::error_code ec;
  const bool removed = std::filesystem::remove(path, ec);
  if (ec) return false;
  emit(WriteEvent::Kind::kAfterDelete, path);
  return removed;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace valrl::io
