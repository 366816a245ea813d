// SPDX-License-Identifier: Apache-2.0
//
// Campaign orchestration: the lock-step iteration loop between the benign
// generator and the DUT, crash recording, the reboot-count epoch oracle for
// targets that expose nothing but resets, and deterministic replay.

#ifndef MESHFUZZ_COORDINATOR_HPP_
#define MESHFUZZ_COORDINATOR_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "meshfuzz/coverage.hpp"
#include "meshfuzz/dut.hpp"
#include "meshfuzz/engines.hpp"
#include "meshfuzz/util.hpp"

namespace meshfuzz {

enum class CampaignMode : std::uint8_t { Simulated, PhysicalEpoch };

struct CampaignConfig {
  std::uint64_t max_iterations = 1000;
  std::uint32_t iteration_budget = 40;  // lock-step turns per iteration
  FuzzerChain chain;
  NodeType dut_type = NodeType::Ftd;
  bool sanitizer = true;
  double v3_leader_data_prob = 0.3;  // FTD leader-data likelihood per attach
  std::uint64_t seed = 1;
  CampaignMode mode = CampaignMode::Simulated;
  std::uint32_t epoch_size = 4;
  std::string out_dir;  // empty: keep artifacts in memory only

  void validate() const;

  // Coverage source used for reporting: the DUT map in simulated mode, the
  // generator proxy in physical-epoch mode (the DUT exposes only resets).
  CoverageSource report_source() const {
    return mode == CampaignMode::PhysicalEpoch ? CoverageSource::GeneratorBlack
                                               : CoverageSource::DutGrey;
  }
};

struct DeliveredPacket {
  std::uint32_t turn = 0;
  Bytes bytes;
};

// A reproducible crash artifact: replaying the recorded byte sequence on a
// fresh node must land the identical crash.
struct CrashRecord {
  std::uint64_t iteration = 0;
  std::uint64_t campaign_seed = 0;
  std::uint64_t iteration_seed = 0;
  VulnId vuln = VulnId::V1;
  CrashKind kind = CrashKind::AssertionFailure;
  NodeType node_type = NodeType::Ftd;
  bool sanitizer = true;
  bool leader_data_present = false;  // V3 flag at iteration start
  DutStateSnapshot state_at_crash;
  std::vector<DeliveredPacket> packets;  // up to and including the crashing one
};

struct IterationResult {
  std::optional<CrashRecord> crash;  // first crash of the iteration
  std::size_t c_i = 0;               // new coverage from the report source
  std::uint32_t packets_exchanged = 0;
  NodeRole final_role = NodeRole::Detached;
  std::size_t crash_count = 0;  // all crash restarts within the iteration
  std::map<VulnId, std::size_t> crash_hits;  // per-vuln restarts
};

struct VulnStats {
  std::uint64_t first_hit = 0;  // 0 = never observed
  std::uint64_t hits = 0;
};

struct IterationRow {
  std::uint64_t iteration = 0;
  std::size_t c_i = 0;
  std::uint32_t packets = 0;
  NodeRole final_role = NodeRole::Detached;
  std::size_t crash_count = 0;
  std::optional<VulnId> vuln;
  std::optional<CrashKind> kind;
};

struct CampaignReport {
  std::vector<IterationRow> iterations;
  std::vector<CrashRecord> crashes;
  std::map<VulnId, VulnStats> vulns;
  std::size_t cumulative_edges = 0;
  std::size_t reachable_edges = 0;
  double coverage_fraction = 0.0;
  std::size_t sum_c_i = 0;
};

class Campaign {
 public:
  explicit Campaign(CampaignConfig config);

  // Runs the next iteration: activate both nodes, exchange packets through
  // the fuzzer chain for the step budget, restart the DUT on crashes, commit
  // coverage, feed the coverage engine, factory-reset (simulated mode).
  IterationResult run_iteration();

  // Full campaign; writes report.json, coverage.csv and the crash corpus
  // when the config names an output directory.
  CampaignReport run();

  // One epoch against a reset-and-reboot-count-only DUT: returns true iff
  // the final count exceeds the framework's own resets (C_f > C_0 + N + 1).
  bool run_fuzzing_epoch(std::uint32_t epoch_size);

  const CampaignConfig& config() const { return config_; }
  const ChainRunner& runner() const { return runner_; }
  const CoverageMap& dut_map() const { return dut_map_; }
  const CoverageMap& gen_map() const { return gen_map_; }
  SimNode& dut() { return dut_; }
  SimNode& gen() { return gen_; }
  std::uint64_t iterations_run() const { return iteration_; }

 private:
  IterationResult run_iteration_impl(bool apply_chain, bool factory_reset);

  CampaignConfig config_;
  CoverageMap dut_map_;
  CoverageMap gen_map_;
  SimNode dut_;
  SimNode gen_;
  ChainRunner runner_;
  std::uint64_t iteration_ = 0;
};

struct ReplayOutcome {
  bool crashed = false;
  std::optional<VulnId> vuln;
  std::optional<CrashKind> kind;
  bool reproduced = false;  // crashed on the final packet with the recorded identity
  std::uint32_t packets_delivered = 0;
};

// Re-delivers the recorded bytes to a fresh node, preserving the lock-step
// turn structure. The sanitizer flag can be overridden to probe gating.
ReplayOutcome replay(const CrashRecord& record,
                     std::optional<bool> sanitizer_override = std::nullopt);

}  // namespace meshfuzz

#endif  // MESHFUZZ_COORDINATOR_HPP_
