#pragma once

// Named-array byte format used for replay memories, network parameters and
// every checkpoint payload.
//
// Layout (all integers little-endian):
//   header, 16 bytes: magic "VRLA" | u32 version | u32 record count | u32 flags
//   per record:       u16 name length | name | u8 dtype | u8 rank | u64 dims[rank]
//                     | u64 raw bytes | u64 compressed bytes | u32 crc32(raw)
//                     | deflate-compressed payload
//
// Records keep insertion order, so equal inputs give byte-identical output.

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace valrl::archive {

inline constexpr std::uint32_t kFormatVersion = 1;

enum class DType : std::uint8_t { kFloat64 = 1, kInt64 = 2, kUInt64 = 3, kUInt8 = 4 };

using Bytes = std::vector<std::uint8_t>;

class Writer {
 public:
  void add_f64(std::string name, std::span<const double> values, std::vector<std::uint64_t> shape = {});
  void add_i64(std::string name, std::span<const std::int64_t> values, std::vector<std::uint64_t> shape = {});
  void add_u64(std::string name, std::span<const std::uint64_t> values, std::vector<std::uint64_t> shape = {});
  void add_u8(std::string name, std::span<const std::uint8_t> values, std::vector<std::uint64_t> shape = {});
  void add_string(std::string name, std::string_view text);
  void add_scalar(std::string name, std::uint64_t value) { add_u64(std::move(name), std::span(&value, 1)); }
  void add_scalar_f64(std::string name, double value) { add_f64(std::move(name), std::span(&value, 1)); }
  // Nested archive stored as an opaque u8 record.
  void add_bytes(std::string name, std::span<const std::uint8_t> bytes) { add_u8(std::move(name), bytes); }

  Bytes finish() const;

 private:
  struct Record {
    std::string name;
    DType dtype;
    std::vector<std::uint64_t> shape;
    Bytes raw;
  };
  void add_raw(std::string name, DType dtype, std::vector<std::uint64_t> shape, const void* data,
               std::size_t bytes, std::size_t count);

  std::vector<Record> records_;
};

class Reader {
 public:
  // Decodes and verifies every record. Throws RestoreError on bad magic,
  // unsupported version, truncation or checksum mismatch.
  explicit Reader(std::span<const std::uint8_t> bytes);

  bool has(std::string_view name) const { return records_.count(std::string(name)) > 0; }
  std::vector<std::string> names() const;
  const std::vector<std::uint64_t>& shape(std::string_view name) const;

  std::vector<double> f64(std::string_view name) const;
  std::vector<std::int64_t> i64(std::string_view name) const;
  std::vector<std::uint64_t> u64(std::string_view name) const;
  std::vector<std::uint8_t> u8(std::string_view name) const;
  std::string string(std::string_view name) const;
  std::uint64_t scalar(std::string_view name) const;
  double scalar_f64(std::string_view name) const;
  Bytes bytes(std::string_view name) const { return u8(name); }

 private:
  struct Record {
    DType dtype;
    std::vector<std::uint64_t> shape;
    Bytes raw;
  };
  const Record& get(std::string_view name, DType dtype) const;

  std::map<std::string, Record> records_;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace valrl::archive
