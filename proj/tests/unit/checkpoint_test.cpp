#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "fixtures.hpp"
#include "valrl/checkpoint.hpp"
#include "valrl/errors.hpp"
#include "valrl/io.hpp"

namespace {

using namespace valrl::checkpoint;
namespace fs = std::filesystem;

Components components_for(std::uint64_t it) {
  valrl::archive::Writer w;
  w.add_scalar("value", it * 10);
  const std::string env = "env state " + std::to_string(it);
  return {{"agent", w.finish()}, {"env", valrl::archive::Bytes(env.begin(), env.end())}};
}

void flip_byte(const fs::path& p) {
  auto bytes = valrl::io::read_file(p);
  bytes[bytes.size() / 2] ^= 0xff;
  std::ofstream(p, std::ios::binary | std::ios::trunc).write(reinterpret_cast<const char*>(bytes.data()),
                                                              static_cast<std::streamsize>(bytes.size()));
}

TEST(Manifest, TextRoundTrip) {
  Manifest m;
  m.iteration = 12;
  m.created = "2026-01-02T03:04:05Z";
  m.entries.push_back({"agent", "agent-12.bin", 0xdeadbeef, 1234});
  const auto back = Manifest::parse(m.to_text());
  EXPECT_EQ(back.iteration, 12u);
  EXPECT_EQ(back.entries, m.entries);
  EXPECT_EQ(back.created, m.created);
  auto text = m.to_text();
  EXPECT_THROW(Manifest::parse(text.substr(0, text.size() - 4)), valrl::RestoreError);
  EXPECT_THROW(Manifest::parse("format_version 2\niteration 1\nend\n"), valrl::RestoreError);
  EXPECT_THROW(Manifest::parse(text + "junk\n"), valrl::RestoreError);
}

TEST(Checkpoint, SaveLoadRoundTrip) {
  fixtures::TempDir dir("ckpt");
  save(dir.path(), 4, components_for(4));
  const auto cp = load(dir.path(), 4);
  ASSERT_TRUE(cp.has_value());
  EXPECT_EQ(cp->components, components_for(4));
  EXPECT_EQ(valrl::archive::Reader(cp->get("agent")).scalar("value"), 40u);
  EXPECT_THROW(cp->get("missing"), valrl::RestoreError);
  EXPECT_FALSE(load(dir.path(), 5).has_value());
  EXPECT_TRUE(fs::exists(checkpoint_dir(dir.path()) / "manifest-4.txt"));
  EXPECT_THROW(save(dir.path(), 5, {{"bad name", {}}}), valrl::ContractViolation);
}

TEST(Checkpoint, CorruptPayloadFallsBackWithWarning) {
  fixtures::TempDir dir("ckpt");
  for (std::uint64_t i = 0; i < 3; ++i) save(dir.path(), i, components_for(i));
  flip_byte(checkpoint_dir(dir.path()) / "agent-2.bin");
  fixtures::CaptureWarnings capture;
  const auto cp = restore_latest(dir.path());
  ASSERT_TRUE(cp.has_value());
  EXPECT_EQ(cp->iteration, 1u);
  EXPECT_TRUE(capture.any_contains("checkpoint 2"));
}

TEST(Checkpoint, TruncatedManifestIsSkipped) {
  fixtures::TempDir dir("ckpt");
  for (std::uint64_t i = 0; i < 2; ++i) save(dir.path(), i, components_for(i));
  const auto m = checkpoint_dir(dir.path()) / "manifest-1.txt";
  const auto text = valrl::io::read_text(m);
  std::ofstream(m, std::ios::trunc) << text.substr(0, text.size() / 2);
  fixtures::CaptureWarnings capture;
  EXPECT_EQ(restore_latest(dir.path())->iteration, 0u);
}

TEST(Checkpoint, AllCorrupt) {
  fixtures::TempDir dir("ckpt");
  save(dir.path(), 0, components_for(0));
  flip_byte(checkpoint_dir(dir.path()) / "env-0.bin");
  fixtures::CaptureWarnings capture;
  EXPECT_THROW(restore_latest(dir.path()), valrl::RestoreError);
  EXPECT_FALSE(restore_latest(dir.path(), true).has_value());
  EXPECT_TRUE(capture.any_contains("from scratch"));
}

TEST(Checkpoint, EmptyDirectoryMeansFreshStart) {
  fixtures::TempDir dir("ckpt");
  EXPECT_FALSE(restore_latest(dir.path()).has_value());
}

TEST(Checkpoint, GarbageCollectKeepsNewestValid) {
  fixtures::TempDir dir("ckpt");
  for (std::uint64_t i = 0; i < 6; ++i) save(dir.path(), i, components_for(i));
  flip_byte(checkpoint_dir(dir.path()) / "agent-5.bin");
  const auto removed = garbage_collect(dir.path(), 3);
  // 5 is invalid, so 4, 3, 2 are kept; 5 is newer and stays untouched.
  EXPECT_EQ(manifest_iterations(dir.path()), (std::vector<std::uint64_t>{2, 3, 4, 5}));
  EXPECT_EQ(removed.size(), 6u);
  EXPECT_FALSE(fs::exists(checkpoint_dir(dir.path()) / "agent-1.bin"));
  EXPECT_TRUE(fs::exists(checkpoint_dir(dir.path()) / "agent-5.bin"));
  EXPECT_THROW(garbage_collect(dir.path(), 0), valrl::ContractViolation);
}

TEST(Checkpoint, CrashDuringSaveLeavesPreviousIntact) {
  fixtures::TempDir dir("ckpt");
  save(dir.path(), 0, components_for(0));
  for (auto kind : {valrl::io::WriteEvent::Kind::kTempCreated, valrl::io::WriteEvent::Kind::kTempPartial,
                    valrl::io::WriteEvent::Kind::kTempComplete, valrl::io::WriteEvent::Kind::kRenamed}) {
    int seen = 0;
    auto previous = valrl::io::set_write_hook([&](const valrl::io::WriteEvent& e) {
      if (e.kind == kind && ++seen == 2) throw valrl::io::SimulatedCrash("crash");
    });
    EXPECT_THROW(save(dir.path(), 1, components_for(1)), valrl::io::SimulatedCrash);
    valrl::io::set_write_hook(previous);
    const auto cp = restore_latest(dir.path());
    ASSERT_TRUE(cp.has_value());
    EXPECT_EQ(cp->iteration, 0u) << valrl::io::to_string(kind);
  }
  save(dir.path(), 1, components_for(1));
  EXPECT_EQ(restore_latest(dir.path())->iteration, 1u);
}

TEST(Io, AtomicWriteAndAppend) {
  fixtures::TempDir dir("io");
  const auto p = dir.path() / "f.txt";
  valrl::io::atomic_write(p, std::string("hello"));
  EXPECT_EQ(valrl::io::read_text(p), "hello");
  const std::string more = " world";
  valrl::io::append(p, std::span(reinterpret_cast<const std::uint8_t*>(more.data()), more.size()));
  EXPECT_EQ(valrl::io::read_text(p), "hello world");
  EXPECT_TRUE(valrl::io::remove_file(p));
  EXPECT_FALSE(valrl::io::remove_file(p));
  EXPECT_THROW(valrl::io::read_file(p), valrl::IoError);
}

}  // namespace
