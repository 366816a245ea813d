// SPDX-License-Identifier: Apache-2.0
#include "meshfuzz/coordinator.hpp"

#include <stdexcept>

#include "meshfuzz/config.hpp"
#include "meshfuzz/dissect.hpp"

namespace meshfuzz {

void CampaignConfig::validate() const {
  if (max_iterations < 1) {
    throw std::invalid_argument("campaign config: max_iterations must be >= 1");
  }
  if (mode == CampaignMode::PhysicalEpoch && epoch_size < 1) {
    throw std::invalid_argument("campaign config: epoch size must be >= 1");
  }
  if (v3_leader_data_prob < 0.0 || v3_leader_data_prob > 1.0) {
    throw std::invalid_argument("campaign config: v3_leader_data_prob must be in [0, 1]");
  }
  chain.validate();
  if (mode == CampaignMode::PhysicalEpoch) {
    auto source = chain.feedback_source();
    if (source && *source == CoverageSource::DutGrey) {
      throw std::invalid_argument(
          "campaign config: physical-epoch mode has no DUT coverage; use coverage_black");
    }
  }
}

Campaign::Campaign(CampaignConfig config)
    : config_(std::move(config)),
      dut_map_(SimNode::reachable_edge_count()),
      gen_map_(SimNode::reachable_edge_count()),
      dut_(config_.dut_type, NodeRole::Detached, config_.sanitizer, &dut_map_),
      gen_(NodeType::Ftd, NodeRole::Leader, false, &gen_map_),
      runner_(config_.chain) {
  config_.validate();
}

IterationResult Campaign::run_iteration() {
  return run_iteration_impl(/*apply_chain=*/true,
                            /*factory_reset=*/config_.mode == CampaignMode::Simulated);
}

IterationResult Campaign::run_iteration_impl(bool apply_chain, bool factory_reset) {
  ++iteration_;
  std::uint64_t iteration_seed = splitmix64(splitmix64(config_.seed) ^ iteration_);
  Rng rng(iteration_seed);

  bool leader_flag = true;
  if (config_.dut_type == NodeType::Ftd) {
    leader_flag = rng.chance(config_.v3_leader_data_prob);
  }

  if (!factory_reset) {
    // Epoch mode: the DUT carries its reboot count across iterations; only
    // the generator side starts fresh.
    gen_.hard_reset();
  }
  dut_.begin_iteration(leader_flag);
  gen_.begin_iteration(true);

  MutationLog log;
  log.iteration = iteration_;
  std::vector<DeliveredPacket> delivered;
  std::optional<CrashRecord> first_crash;
  std::map<VulnId, std::size_t> crash_hits;
  std::size_t crash_count = 0;
  std::uint32_t packets = 0;

  for (std::uint32_t turn = 0; turn < config_.iteration_budget; ++turn) {
    gen_.poll();
    for (const mle::MlePacket& spontaneous : dut_.poll()) {
      gen_.step(spontaneous);
    }
    while (auto outbound = gen_.generate_next()) {
      mle::MlePacket wire = apply_chain ? runner_.apply(*outbound, iteration_, rng, log)
                                        : *outbound;
      Bytes bytes = mle::encode_packet(wire);
      delivered.push_back({turn, bytes});
      StepOutcome outcome = dut_.step_bytes(bytes);
      ++packets;
      if (outcome.crashed()) {
        ++crash_count;
        ++crash_hits[outcome.vuln];
        if (!first_crash) {
          CrashRecord record;
          record.iteration = iteration_;
          record.campaign_seed = config_.seed;
          record.iteration_seed = iteration_seed;
          record.vuln = outcome.vuln;
          record.kind = outcome.crash_kind;
          record.node_type = config_.dut_type;
          record.sanitizer = config_.sanitizer;
          record.leader_data_present = dut_.leader_data_present();
          record.state_at_crash = dut_.snapshot();
          record.packets = delivered;
          first_crash = std::move(record);
        }
        dut_.soft_reset();
        dut_.begin_iteration(leader_flag);
        continue;
      }
      for (const mle::MlePacket& response : outcome.responses) {
        gen_.step(response);
      }
    }
  }

  NodeRole final_role = dut_.role();
  std::size_t c_grey = dut_map_.commit_iteration();
  std::size_t c_black = gen_map_.commit_iteration();

  if (apply_chain) {
    if (auto source = runner_.chain().feedback_source()) {
      std::size_t c_feedback =
          *source == CoverageSource::GeneratorBlack ? c_black : c_grey;
      runner_.end_iteration(log, c_feedback, iteration_);
    }
  }

  IterationResult result;
  result.crash = std::move(first_crash);
  result.crash_count = crash_count;
  result.crash_hits = std::move(crash_hits);
  result.packets_exchanged = packets;
  result.final_role = final_role;
  result.c_i =
      config_.report_source() == CoverageSource::GeneratorBlack ? c_black : c_grey;

  if (factory_reset) {
    dut_.hard_reset();
    gen_.hard_reset();
  }
  return result;
}

CampaignReport Campaign::run() {
  CampaignReport report;
  report.reachable_edges = SimNode::reachable_edge_count();
  const CoverageMap& report_map =
      config_.report_source() == CoverageSource::GeneratorBlack ? gen_map_ : dut_map_;

  for (std::uint64_t i = 1; i <= config_.max_iterations; ++i) {
    IterationResult result = run_iteration();

    IterationRow row;
    row.iteration = iteration_;
    row.c_i = result.c_i;
    row.packets = result.packets_exchanged;
    row.final_role = result.final_role;
    row.crash_count = result.crash_count;
    if (result.crash) {
      row.vuln = result.crash->vuln;
      row.kind = result.crash->kind;
      report.crashes.push_back(*result.crash);
    }
    for (const auto& [vuln, hits] : result.crash_hits) {
      VulnStats& stats = report.vulns[vuln];
      if (stats.first_hit == 0) stats.first_hit = iteration_;
      stats.hits += hits;
    }
    report.sum_c_i += result.c_i;
    report.iterations.push_back(row);
  }
  report.cumulative_edges = report_map.cumulative_count();
  report.coverage_fraction = report_map.fraction();

  if (!config_.out_dir.empty()) {
    write_campaign_artifacts(config_, report);
  }
  return report;
}

bool Campaign::run_fuzzing_epoch(std::uint32_t epoch_size) {
  if (epoch_size < 1) {
    throw std::invalid_argument("run_fuzzing_epoch: epoch size must be >= 1");
  }
  dut_.hard_reset();
  gen_.hard_reset();
  std::uint64_t c0 = dut_.read_reboot_count();
  dut_.soft_reset();
  for (std::uint32_t i = 0; i < epoch_size; ++i) {
    run_iteration_impl(/*apply_chain=*/true, /*factory_reset=*/false);
    dut_.soft_reset();
  }
  // One clean attach so the device rejoins before the final read.
  run_iteration_impl(/*apply_chain=*/false, /*factory_reset=*/false);
  std::uint64_t cf = dut_.read_reboot_count();
  return cf > c0 + epoch_size + 1;
}

ReplayOutcome replay(const CrashRecord& record, std::optional<bool> sanitizer_override) {
  CoverageMap map(SimNode::reachable_edge_count());
  SimNode node(record.node_type, NodeRole::Detached,
               sanitizer_override.value_or(record.sanitizer), &map);
  node.begin_iteration(record.leader_data_present);
  node.force_leader_data(record.leader_data_present);

  ReplayOutcome outcome;
  if (record.packets.empty()) {
    return outcome;
  }
  std::uint32_t last_turn = record.packets.back().turn;
  std::size_t index = 0;
  for (std::uint32_t turn = 0; turn <= last_turn && !outcome.crashed; ++turn) {
    node.poll();  // the node's own emissions go nowhere during replay
    while (index < record.packets.size() && record.packets[index].turn == turn) {
      StepOutcome step = node.step_bytes(record.packets[index].bytes);
      ++outcome.packets_delivered;
      bool is_last = index + 1 == record.packets.size();
      ++index;
      if (step.crashed()) {
        outcome.crashed = true;
        outcome.vuln = step.vuln;
        outcome.kind = step.crash_kind;
        outcome.reproduced =
            is_last && step.vuln == record.vuln && step.crash_kind == record.kind;
        break;
      }
    }
  }
  return outcome;
}

}  // namespace meshfuzz
