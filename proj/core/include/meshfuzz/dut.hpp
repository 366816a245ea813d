// SPDX-License-Identifier: Apache-2.0
//
// Deterministic simulated mesh node. The same class implements both sides
// of the dialogue: the joining device under test (attach state machine with
// six seeded vulnerabilities V1-V6) and the benign leader-side packet
// generator. Every state transition and TLV parse branch records a static
// edge id into the node's coverage map.

#ifndef MESHFUZZ_DUT_HPP_
#define MESHFUZZ_DUT_HPP_

#include <cstdint>
#include <deque>
#include <optional>
#include <string_view>
#include <vector>

#include "meshfuzz/coverage.hpp"
#include "meshfuzz/mle.hpp"

namespace meshfuzz {

enum class NodeRole : std::uint8_t { Detached, Child, Router, Leader };
enum class NodeType : std::uint8_t { Mtd, Ftd };
enum class CrashKind : std::uint8_t { AssertionFailure, BufferOverflowDetected };
enum class VulnId : std::uint8_t { V1, V2, V3, V4, V5, V6 };

std::string_view to_string(NodeRole role);
std::string_view to_string(NodeType type);
std::string_view to_string(CrashKind kind);
std::string_view to_string(VulnId vuln);
std::optional<NodeType> parse_node_type(std::string_view s);
std::optional<VulnId> parse_vuln(std::string_view s);
std::optional<CrashKind> parse_crash_kind(std::string_view s);

// Benign addressing constants of the simulated network.
inline constexpr std::uint16_t kLeaderAddr16 = 0x0C00;
inline constexpr std::uint16_t kAssignedChildAddr16 = 0x0C01;
inline constexpr std::uint16_t kAssignedRouterAddr16 = 0x2C00;
inline constexpr std::uint32_t kBenignTimeout = 240;

struct StepOutcome {
  enum class Kind : std::uint8_t { Ok, Silent, Crash };

  Kind kind = Kind::Silent;
  std::vector<mle::MlePacket> responses;             // Ok only
  CrashKind crash_kind = CrashKind::AssertionFailure;  // Crash only
  VulnId vuln = VulnId::V1;                            // Crash only

  bool crashed() const { return kind == Kind::Crash; }
};

struct DutStateSnapshot {
  NodeRole role = NodeRole::Detached;
  std::uint64_t reboot_count = 0;
  bool leader_data_present = false;
  bool solicit_window = false;
  std::uint32_t tick = 0;
};

class SimNode {
 public:
  // A joiner starts Detached; the generator side is a fixed Leader.
  SimNode(NodeType type, NodeRole initial_role, bool sanitizer_enabled,
          CoverageMap* coverage);

  // Arms a fresh attach attempt. `leader_data_present` is the V3 flag for
  // this attach (drawn by the campaign; MTDs always hold leader data).
  void begin_iteration(bool leader_data_present);

  // One lock-step tick: emits due spontaneous packets (initial ParentRequest,
  // data polls, keep-alives, solicit; periodic traffic on the leader side,
  // which is queued rather than returned).
  std::vector<mle::MlePacket> poll();

  // Processes one incoming packet. Throws std::logic_error on a crashed node.
  StepOutcome step(const mle::MlePacket& incoming);

  // Byte-level ingestion (lenient decode); the path used for fuzzed
  // delivery, replay, and the harness. Inputs shorter than a packet header
  // are Silent.
  StepOutcome step_bytes(std::span<const std::uint8_t> bytes);

  // Leader side: pops the next queued outbound packet.
  std::optional<mle::MlePacket> generate_next();

  // Soft reset: protocol state clears, reboot count increments, the stored
  // leader-data flag leaks through. Crash restarts go through here.
  void soft_reset();

  // Hard (factory) reset: everything clears, reboot count returns to zero.
  void hard_reset();

  // Reads the reboot counter (Matter-style diagnostics proxy); the read
  // itself records one coverage edge.
  std::uint64_t read_reboot_count();

  NodeType node_type() const { return type_; }
  NodeRole role() const { return role_; }
  bool crashed() const { return crashed_; }
  bool sanitizer_enabled() const { return sanitizer_; }
  bool leader_data_present() const { return leader_data_present_; }
  std::uint32_t tick() const { return tick_; }
  DutStateSnapshot snapshot() const;

  // Replay support: forces the V3 flag recorded at crash time.
  void force_leader_data(bool present) { leader_data_present_ = present; }

  CoverageMap* coverage() const { return coverage_; }

  // Total number of statically assigned edge ids (the denominator of
  // coverage_fraction).
  static std::size_t reachable_edge_count();

 private:
  enum class Phase : std::uint8_t {
    Idle,
    AwaitParentResponse,
    AwaitChildIdResponse,
    ChildActive,
    AwaitAddressSolicitResponse,  // the V5 window
    RouterLink,
    RouterActive,
  };

  struct LeaderPeerState {
    bool saw_parent_request = false;
    bool peer_attached = false;
    Bytes peer_challenge;       // echoed in ParentResponse
    Bytes peer_link_challenge;  // echoed in LinkAccept
  };

  void edge(std::uint32_t id);
  StepOutcome step_impl(const mle::MlePacket& packet, std::span<const std::uint8_t> bytes);
  StepOutcome joiner_step(const mle::MlePacket& packet, std::span<const std::uint8_t> bytes);
  StepOutcome leader_step(const mle::MlePacket& packet, std::span<const std::uint8_t> bytes);
  void queue(mle::MlePacket packet);
  void reset_protocol_state();

  NodeType type_;
  NodeRole role_;
  bool sanitizer_;
  CoverageMap* coverage_;

  Phase phase_ = Phase::Idle;
  bool activated_ = false;
  bool crashed_ = false;
  bool leader_data_present_ = false;
  bool advert_poison_ = false;  // V5: poisoned Advertisement seen in window
  std::uint32_t tick_ = 0;
  std::uint32_t child_tick_ = 0;
  std::uint32_t phase_entry_tick_ = 0;  // stall detection for retries
  std::uint32_t solicit_tick_ = 0;      // next router-promotion attempt
  std::uint64_t reboot_count_ = 0;

  bool is_leader_;
  LeaderPeerState peer_;
  std::deque<mle::MlePacket> outbound_;
};

SimNode create_node(NodeType type, NodeRole initial_role, bool sanitizer_enabled,
                    CoverageMap* coverage);

// Benign packet builders shared by the leader side and the test suites.
namespace benign {
mle::MlePacket parent_request(NodeType type);
mle::MlePacket parent_response(const Bytes& challenge_echo);
mle::MlePacket child_id_response();
mle::MlePacket data_response();
mle::MlePacket child_update_response();
mle::MlePacket child_update_request_from_leader();
mle::MlePacket advertisement();
mle::MlePacket address_solicit_response();
mle::MlePacket link_accept(const Bytes& challenge_echo);
}  // namespace benign

}  // namespace meshfuzz

#endif  // MESHFUZZ_DUT_HPP_
