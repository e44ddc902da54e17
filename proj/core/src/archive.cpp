#include "valrl/archive.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>

#include "valrl/errors.hpp"

namespace valrl::archive {
namespace {

constexpr char kMagic[4] = {'V', 'R', 'L', 'A'};
constexpr std::uint32_t kFlagDeflate = 1;

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::kFloat64:
    case DType::kInt64:
    case DType::kUInt64: return 8;
    case DType::kUInt8: return 1;
  }
  return 0;
}

const char* dtype_name(DType d) {
  switch (d) {
    case DType::kFloat64: return "f64";
    case DType::kInt64: return "i64";
    case DType::kUInt64: return "u64";
    case DType::kUInt8: return "u8";
  }
  return "?";
}

void put_u8(Bytes& out, std::uint8_t v) { out.push_back(v); }
void put_u16(Bytes& out, std::uint16_t v) {
  for (int i = 0; i < 2; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u32(Bytes& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(Bytes& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::span<const std::uint8_t> take(std::size_t n, const char* what) {
    if (n > bytes_.size() - pos_) throw RestoreError(std::string("archive truncated while reading ") + what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint64_t uint(std::size_t width, const char* what) {
    auto s = take(width, what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

// Host is assumed little-endian (checked at compile time below), so numeric
// arrays are copied as-is.
static_assert(std::endian::native == std::endian::little, "archive format assumes a little-endian host");

template <typename T>
std::vector<T> decode_array(const Bytes& raw) {
  std::vector<T> out(raw.size() / sizeof(T));
  if (!raw.empty()) std::memcpy(out.data(), raw.data(), raw.size());
  return out;
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks for very large arrays.
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const std::size_t chunk = std::min<std::size_t>(bytes.size() - offset, 1u << 30);
    crc = ::crc32(crc, bytes.data() + offset, static_cast<uInt>(chunk));
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

void Writer::add_raw(std::string name, DType dtype, std::vector<std::uint64_t> shape, const void* data,
                     std::size_t bytes, std::size_t count) {
  if (name.empty() || name.size() > 0xffff) throw ContractViolation("archive: bad record name");
  if (shape.empty()) shape = {static_cast<std::uint64_t>(count)};
  std::uint64_t expected = 1;
  for (auto d : shape) expected *= d;
  if (expected != count) throw ContractViolation("archive: shape of '" + name + "' does not match value count");
  Record r{std::move(name), dtype, std::move(shape), Bytes(bytes)};
  if (bytes) std::memcpy(r.raw.data(), data, bytes);
  records_.push_back(std::move(r));
}

void Writer::add_f64(std::string name, std::span<const double> values, std::vector<std::uint64_t> shape) {
  add_raw(std::move(name), DType::kFloat64, std::move(shape), values.data(), values.size_bytes(), values.size());
}
void Writer::add_i64(std::string name, std::span<const std::int64_t> values, std::vector<std::uint64_t> shape) {
  add_raw(std::move(name), DType::kInt64, std::move(shape), values.data(), values.size_bytes(), values.size());
}
void Writer::add_u64(std::string name, std::span<const std::uint64_t> values, std::vector<std::uint64_t> shape) {
  add_raw(std::move(name), DType::kUInt64, std::move(shape), values.data(), values.size_bytes(), values.size());
}
void Writer::add_u8(std::string name, std::span<const std::uint8_t> values, std::vector<std::uint64_t> shape) {
  add_raw(std::move(name), DType::kUInt8, std::move(shape), values.data(), values.size_bytes(), values.size());
}
void Writer::add_string(std::string name, std::string_view text) {
  add_raw(std::move(name), DType::kUInt8, {}, text.data(), text.size(), text.size());
}

Bytes Writer::finish() const {
  Bytes out;
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(records_.size()));
  put_u32(out, kFlagDeflate);
  for (const auto& r : records_) {
    put_u16(out, static_cast<std::uint16_t>(r.name.size()));
    out.insert(out.end(), r.name.begin(), r.name.end());
    put_u8(out, static_cast<std::uint8_t>(r.dtype));
    put_u8(out, static_cast<std::uint8_t>(r.shape.size()));
    for (auto d : r.shape) put_u64(out, d);

    uLongf compressed_size = compressBound(static_cast<uLong>(r.raw.size()));
    Bytes compressed(compressed_size);
    if (compress2(compressed.data(), &compressed_size, r.raw.data(), static_cast<uLong>(r.raw.size()),
                  Z_DEFAULT_COMPRESSION) != Z_OK) {
      throw IoError("archive: deflate failed for '" + r.name + "'");
    }
    compressed.resize(compressed_size);

    put_u64(out, r.raw.size());
    put_u64(out, compressed.size());
    put_u32(out, crc32(r.raw));
    out.insert(out.end(), compressed.begin(), compressed.end());
  }
  return out;
}

Reader::Reader(std::span<const std::uint8_t> bytes) {
  Cursor c(bytes);
  auto magic = c.take(4, "header");
  if (std::memcmp(magic.data(), kMagic, 4) != 0) throw RestoreError("archive: bad magic (not a valrl archive)");
  const auto version = c.uint(4, "header");
  if (version != kFormatVersion) {
    throw RestoreError("archive: unsupported format version " + std::to_string(version) + " (expected " +
                       std::to_string(kFormatVersion) + ")");
  }
  const auto count = c.uint(4, "header");
  const auto flags = c.uint(4, "header");
  if (flags != kFlagDeflate) throw RestoreError("archive: unsupported flags " + std::to_string(flags));

  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = c.uint(2, "record name");
    auto name_bytes = c.take(name_len, "record name");
    std::string name(name_bytes.begin(), name_bytes.end());
    const auto dtype_tag = c.uint(1, "dtype");
    if (dtype_tag < 1 || dtype_tag > 4) throw RestoreError("archive: record '" + name + "' has unknown dtype");
    const auto dtype = static_cast<DType>(dtype_tag);
    const auto rank = c.uint(1, "rank");
    std::vector<std::uint64_t> shape(rank);
    std::uint64_t elements = 1;
    for (auto& d : shape) {
      d = c.uint(8, "shape");
      elements *= d;
    }
    const auto raw_size = c.uint(8, "sizes");
    const auto comp_size = c.uint(8, "sizes");
    const auto crc = static_cast<std::uint32_t>(c.uint(4, "checksum"));
    if (raw_size != elements * dtype_size(dtype)) {
      throw RestoreError("archive: record '" + name + "' size does not match its " + dtype_name(dtype) + " shape");
    }
    auto payload = c.take(comp_size, "payload");
    Bytes raw(raw_size);
    uLongf dest = static_cast<uLongf>(raw_size);
    // zlib rejects a null destination even for zero-length output.
    std::uint8_t scratch = 0;
    if (uncompress(raw_size ? raw.data() : &scratch, &dest, payload.data(), static_cast<uLong>(payload.size())) !=
            Z_OK ||
        dest != raw_size) {
      throw RestoreError("archive: record '" + name + "' failed to inflate (corrupt payload)");
    }
    if (crc32(raw) != crc) throw RestoreError("archive: checksum mismatch in record '" + name + "'");
    records_[name] = Record{dtype, std::move(shape), std::move(raw)};
  }
  if (!c.done()) throw RestoreError("archive: trailing bytes after last record");
}

std::vector<std::string> Reader::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : records_) out.push_back(name);
  return out;
}

const Reader::Record& Reader::get(std::string_view name, DType dtype) const {
  auto it = records_.find(std::string(name));
  if (it == records_.end()) throw RestoreError("archive: missing record '" + std::string(name) + "'");
  if (it->second.dtype != dtype) {
    throw RestoreError("archive: record '" + std::string(name) + "' is " + dtype_name(it->second.dtype) +
                       ", expected " + dtype_name(dtype));
  }
  return it->second;
}

const std::vector<std::uint64_t>& Reader::shape(std::string_view name) const {
  auto it = records_.find(std::string(name));
  if (it == records_.end()) throw RestoreError("archive: missing record '" + std::string(name) + "'");
  return it->second.shape;
}

std::vector<double> Reader::f64(std::string_view name) const { return decode_array<double>(get(name, DType::kFloat64).raw); }
std::vector<std::int64_t> Reader::i64(std::string_view name) const {
  return decode_array<std::int64_t>(get(name, DType::kInt64).raw);
}
std::vector<std::uint64_t> Reader::u64(std::string_view name) const {
  return decode_array<std::uint64_t>(get(name, DType::kUInt64).raw);
}
std::vector<std::uint8_t> Reader::u8(std::string_view name) const { return get(name, DType::kUInt8).raw; }

std::string Reader::string(std::string_view name) const {
  const auto& raw = get(name, DType::kUInt8).raw;
  return std::string(raw.begin(), raw.end());
}

std::uint64_t Reader::scalar(std::string_view name) const {
  auto v = u64(name);
  if (v.size() != 1) throw RestoreError("archive: record '" + std::string(name) + "' is not a scalar");
  return v[0];
}

double Reader::scalar_f64(std::string_view name) const {
  auto v = f64(name);
  if (v.size() != 1) throw RestoreError("archive: record '" + std::string(name) + "' is not a scalar");
  return v[0];
}

}  // namespace valrl::archive
