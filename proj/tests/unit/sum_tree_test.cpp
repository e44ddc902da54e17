#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "valrl/errors.hpp"
#include "valrl/replay.hpp"

namespace {

using valrl::Rng;
using valrl::replay::SumTree;

void expect_parent_sums(const SumTree& tree) {
  const auto& n = tree.nodes();
  for (std::size_t i = 0; i + 1 < tree.capacity(); ++i) {
    ASSERT_EQ(n[i], n[2 * i + 1] + n[2 * i + 2]) << "node " << i;
  }
}

TEST(SumTree, RoundsLeavesToPowerOfTwo) {
  EXPECT_EQ(SumTree(5).capacity(), 8u);
  EXPECT_EQ(SumTree(8).capacity(), 8u);
  EXPECT_EQ(SumTree(0).capacity(), 1u);
}

TEST(SumTree, PrefixQueryMatchesLinearScan) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(40);
    SumTree tree(n);
    std::vector<double> p(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (rng.bernoulli(0.2)) continue;  // leave some leaves empty
      p[i] = static_cast<double>(1 + rng.uniform_index(1024)) / 1024.0;
      tree.set_priority(i, p[i]);
    }
    if (tree.total() == 0.0) continue;
    for (int q = 0; q < 20; ++q) {
      const double u = rng.uniform() * tree.total();
      EXPECT_EQ(tree.query_prefix(u), oracle::linear_scan(p, u));
    }
  }
}

TEST(SumTree, NeverReturnsEmptyLeafAtRightEdge) {
  SumTree tree(4);
  tree.set_priority(0, 0.1);
  tree.set_priority(1, 0.2);
  const double u = std::nextafter(tree.total(), 0.0);
  EXPECT_EQ(tree.query_prefix(u), 1u);
}

TEST(SumTree, RejectsBadInput) {
  SumTree tree(4);
  EXPECT_THROW(tree.query_prefix(0.0), valrl::ContractViolation);
  EXPECT_THROW(tree.set_priority(4, 1.0), valrl::ContractViolation);
  EXPECT_THROW(tree.set_priority(0, -1.0), valrl::ContractViolation);
  EXPECT_THROW(tree.set_priority(0, NAN), valrl::ContractViolation);
  EXPECT_THROW(tree.set_priority(0, INFINITY), valrl::ContractViolation);
  Rng rng(0);
  EXPECT_THROW(tree.stratified_sample(4, rng), valrl::ReplayNotReady);
  tree.set_priority(2, 1.0);
  EXPECT_THROW(tree.query_prefix(1.0), valrl::ContractViolation);
}

TEST(SumTree, ParentSumsHoldUnderRandomUpdates) {
  Rng rng(5);
  SumTree tree(100);
  for (int i = 0; i < 5000; ++i) tree.set_priority(rng.uniform_index(100), rng.uniform() * 10.0);
  expect_parent_sums(tree);
}

TEST(SumTree, StratifiedDrawsOnePerStratum) {
  SumTree tree(8);
  for (std::size_t i = 0; i < 8; ++i) tree.set_priority(i, 1.0);
  Rng rng(1);
  const auto draws = tree.stratified_sample(8, rng);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(draws[i], i);
}

TEST(SumTree, MaxRecordedPriority) {
  SumTree tree(4);
  tree.set_priority(0, 3.0);
  tree.set_priority(0, 1.0);
  EXPECT_DOUBLE_EQ(tree.max_recorded_priority(), 3.0);
}

}  // namespace
