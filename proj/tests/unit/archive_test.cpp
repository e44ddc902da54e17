#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <vector>

#include "valrl/archive.hpp"
#include "valrl/errors.hpp"

namespace {

using namespace valrl::archive;

Bytes sample_archive() {
  Writer w;
  const std::vector<double> d{1.5, -0.0, 1e-300};
  const std::vector<std::int64_t> i{-1, 2};
  const std::vector<std::uint8_t> u(1000, 7);
  w.add_f64("doubles", d, {3});
  w.add_i64("ints", i);
  w.add_u8("bytes", u, {10, 100});
  w.add_string("text", "hello\nworld");
  w.add_scalar("n", 42);
  w.add_scalar_f64("x", 0.1);
  return w.finish();
}

TEST(Archive, RoundTripsEveryType) {
  const Reader r(sample_archive());
  EXPECT_EQ(r.f64("doubles"), (std::vector<double>{1.5, -0.0, 1e-300}));
  EXPECT_TRUE(std::signbit(r.f64("doubles")[1]));
  EXPECT_EQ(r.i64("ints"), (std::vector<std::int64_t>{-1, 2}));
  EXPECT_EQ(r.shape("bytes"), (std::vector<std::uint64_t>{10, 100}));
  EXPECT_EQ(r.u8("bytes").size(), 1000u);
  EXPECT_EQ(r.string("text"), "hello\nworld");
  EXPECT_EQ(r.scalar("n"), 42u);
  EXPECT_EQ(r.scalar_f64("x"), 0.1);
  EXPECT_EQ(r.names().size(), 6u);
}

TEST(Archive, DeterministicBytes) { EXPECT_EQ(sample_archive(), sample_archive()); }

TEST(Archive, WrongTypeOrMissingRecord) {
  const Reader r(sample_archive());
  EXPECT_THROW(r.i64("doubles"), valrl::RestoreError);
  EXPECT_THROW(r.f64("nothing"), valrl::RestoreError);
}

TEST(Archive, DetectsCorruption) {
  const Bytes good = sample_archive();
  Bytes bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(Reader{bad_magic}, valrl::RestoreError);
  Bytes bad_version = good;
  bad_version[4] = 99;
  EXPECT_THROW(Reader{bad_version}, valrl::RestoreError);
  for (std::size_t cut : {std::size_t{3}, std::size_t{16}, good.size() / 2, good.size() - 1}) {
    Bytes truncated(good.begin(), good.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(Reader{truncated}, valrl::RestoreError) << "cut at " << cut;
  }
  // Flip every byte after the header in turn; none may decode silently
  // into different contents.
  const Reader reference(good);
  for (std::size_t i = 16; i < good.size(); ++i) {
    Bytes flipped = good;
    flipped[i] ^= 0x01;
    try {
      const Reader r(flipped);
      EXPECT_EQ(r.f64("doubles"), reference.f64("doubles"));
      EXPECT_EQ(r.u8("bytes"), reference.u8("bytes"));
      EXPECT_EQ(r.string("text"), reference.string("text"));
    } catch (const valrl::RestoreError&) {
    }
  }
}

TEST(Archive, Crc32KnownValue) {
  const char* text = "123456789";
  std::vector<std::uint8_t> bytes(text, text + std::strlen(text));
  EXPECT_EQ(crc32(bytes), 0xCBF43926u);
}

}  // namespace
