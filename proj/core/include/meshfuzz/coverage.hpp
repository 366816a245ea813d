// SPDX-License-Identifier: Apache-2.0
//
// Edge-coverage bookkeeping. Edge ids are static (assigned at state-machine
// construction), so coverage is exact rather than hash-bucketed.

#ifndef MESHFUZZ_COVERAGE_HPP_
#define MESHFUZZ_COVERAGE_HPP_

#include <bitset>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace meshfuzz {

enum class CoverageSource : std::uint8_t {
  DutGrey,         // the simulated DUT's own map
  GeneratorBlack,  // the packet generator's map, used as a proxy
};

class CoverageMap {
 public:
  static constexpr std::size_t kEdgeSlots = 4096;

  // reachable_total is the attached target's exported edge total; used as
  // the denominator of fraction().
  explicit CoverageMap(std::size_t reachable_total = kEdgeSlots)
      : reachable_total_(reachable_total) {}

  void record(std::uint32_t edge_id) {
    if (edge_id >= kEdgeSlots) {
      throw std::out_of_range("CoverageMap::record: edge id out of range");
    }
    scratch_.set(edge_id);
  }

  void record(std::span<const std::uint32_t> edge_ids) {
    for (std::uint32_t id : edge_ids) record(id);
  }

  // Returns c_i: scratch bits not yet cumulative. Merges scratch into the
  // cumulative map and clears it.
  std::size_t commit_iteration() {
    std::size_t c = (scratch_ & ~cumulative_).count();
    cumulative_ |= scratch_;
    scratch_.reset();
    return c;
  }

  std::size_t cumulative_count() const { return cumulative_.count(); }
  std::size_t scratch_count() const { return scratch_.count(); }
  std::size_t reachable_total() const { return reachable_total_; }
  bool covered(std::uint32_t edge_id) const { return cumulative_.test(edge_id); }

  double fraction() const {
    if (reachable_total_ == 0) return 0.0;
    return static_cast<double>(cumulative_.count()) / static_cast<double>(reachable_total_);
  }

  void reset() {
    cumulative_.reset();
    scratch_.reset();
  }

 private:
  std::bitset<kEdgeSlots> cumulative_;
  std::bitset<kEdgeSlots> scratch_;
  std::size_t reachable_total_;
};

}  // namespace meshfuzz

#endif  // MESHFUZZ_COVERAGE_HPP_
