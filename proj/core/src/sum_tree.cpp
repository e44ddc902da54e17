#include <algorithm>
#include <bit>
#include <cmath>

#include "valrl/errors.hpp"
#include "valrl/replay.hpp"

namespace valrl::replay {

SumTree::SumTree(std::size_t min_leaves)
    : leaves_(std::bit_ceil(std::max<std::size_t>(min_leaves, 1))), nodes_(2 * leaves_ - 1, 0.0) {}

void SumTree::set_priority(std::size_t leaf, double priority) {
  if (leaf >= leaves_) throw ContractViolation("SumTree: leaf index out of range");
  if (!(priority >= 0.0) || !std::isfinite(priority)) {
    throw ContractViolation("SumTree: priority must be finite and non-negative");
  }
  std::size_t node = leaves_ - 1 + leaf;
  nodes_[node] = priority;
  // Recompute (rather than add deltas to) every ancestor, so parent sums
  // stay exact regardless of the update history.
  while (node > 0) {
    node = (node - 1) / 2;
    nodes_[node] = nodes_[2 * node + 1] + nodes_[2 * node + 2];
  }
  max_recorded_ = std::max(max_recorded_, priority);
}

std::size_t SumTree::query_prefix(double u) const {
  if (!(total() > 0.0)) throw ContractViolation("SumTree::query_prefix: tree has no mass");
  if (!(u >= 0.0 && u < total())) throw ContractViolation("SumTree::query_prefix: u outside [0, total)");
  std::size_t node = 0;
  while (node < leaves_ - 1) {
    const std::size_t left = 2 * node + 1;
    const std::size_t right = left + 1;
    // The second clause only fires on rounding at the right edge: never
    // descend into an empty subtree.
    if (u < nodes_[left] || !(nodes_[right] > 0.0)) {
      node = left;
    } else {
      u -= nodes_[left];
      node = right;
    }
  }
  return node - (leaves_ - 1);
}

std::size_t SumTree::sample_stratum(std::size_t index, std::size_t count, Rng& rng) const {
  const double t = total();
  if (!(t > 0.0)) throw ReplayNotReady("SumTree: no priority mass to sample");
  const double lo = t * static_cast<double>(index) / static_cast<double>(count);
  const double hi = t * static_cast<double>(index + 1) / static_cast<double>(count);
  double u = rng.uniform(lo, hi);
  if (u >= t) u = std::nextafter(t, 0.0);
  return query_prefix(u);
}

std::vector<std::size_t> SumTree::stratified_sample(std::size_t batch_size, Rng& rng) const {
  std::vector<std::size_t> out(batch_size);
  for (std::size_t i = 0; i < batch_size; ++i) out[i] = sample_stratum(i, batch_size, rng);
  return out;
}

void SumTree::restore(std::vector<double> nodes, double max_recorded) {
  if (nodes.size() != nodes_.size()) throw RestoreError("SumTree: node count mismatch");
  nodes_ = std::move(nodes);
  max_recorded_ = max_recorded;
}

}  // namespace valrl::replay
