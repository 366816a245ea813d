// SPDX-License-Identifier: Apache-2.0
#include "meshfuzz/dut.hpp"

#include <algorithm>
#include <stdexcept>

namespace meshfuzz {

using mle::MlePacket;
using mle::Tlv;
using mle::TlvList;

namespace {

// --- static edge id layout --------------------------------------------------
//
// Edge ids are assigned once, at state-machine construction time. Families
// occupy fixed blocks; the census of defined ids is the reachable total
// exported for coverage_fraction.

constexpr std::uint32_t kEdgeActivated = 0;
constexpr std::uint32_t kEdgeParentRequestSent = 1;
constexpr std::uint32_t kEdgeChildIdRequestSent = 2;
constexpr std::uint32_t kEdgeBecameChild = 3;
constexpr std::uint32_t kEdgeKeepAliveSent = 4;
constexpr std::uint32_t kEdgeDataPollSent = 5;
constexpr std::uint32_t kEdgeSolicitSent = 6;
constexpr std::uint32_t kEdgeBecameRouter = 7;
constexpr std::uint32_t kEdgeLinkRequestSent = 8;
constexpr std::uint32_t kEdgeLinkEstablished = 9;
constexpr std::uint32_t kEdgeRebootRead = 10;
constexpr std::uint32_t kEdgeSoftReset = 11;
constexpr std::uint32_t kEdgeHardReset = 12;
constexpr std::uint32_t kEdgeLeaderDataStored = 13;
constexpr std::uint32_t kEdgeLeaderDataAbsent = 14;
constexpr std::uint32_t kLifecycleEdgeCount = 15;

constexpr std::uint32_t kDispatchBase = 16;   // + message code, accepted
constexpr std::uint32_t kIgnoredBase = 34;    // + message code, ignored in state
constexpr std::uint32_t kEdgeUnknownMessage = 52;
constexpr std::uint32_t kDroppedBase = 53;    // + message code, failed validation

constexpr std::uint32_t kTlvParsedBase = 71;       // + tlv code, complete framing
constexpr std::uint32_t kTlvTruncatedBase = 85;    // + tlv code, declared > available
constexpr std::uint32_t kEdgeUnknownTlv = 99;
constexpr std::uint32_t kTlvUnexpectedBase = 100;  // + tlv code, alien to the message
constexpr std::uint32_t kTlvLenZeroBase = 114;     // + tlv code, declared == 0
constexpr std::uint32_t kTlvLenMaxBase = 128;      // + tlv code, declared == 255

constexpr std::uint32_t kValueBase = 142;  // + 2*field (value==0), +1 (value==max)

constexpr std::uint32_t kPairBase = 168;   // + pair index (both fields at max)

constexpr std::uint32_t kGuardV1Prefix255 = 240;
constexpr std::uint32_t kGuardV2ServerLen1 = 241;
constexpr std::uint32_t kGuardV2AddrEqServer = 242;
constexpr std::uint32_t kGuardV3NwdLen255 = 243;
constexpr std::uint32_t kGuardV3LeaderPath = 244;
constexpr std::uint32_t kGuardV4TimeoutMax = 245;
constexpr std::uint32_t kGuardV5WindowAdvert = 246;
constexpr std::uint32_t kGuardV5PoisonArmed = 247;
constexpr std::uint32_t kGuardV6PrefixShape = 248;
constexpr std::uint32_t kGuardV6ExtraTlv = 249;
constexpr std::uint32_t kGuardEdgeCount = 10;

constexpr std::uint32_t kCrashBase = 250;  // + vuln index

// Structural shape classes: only structural mutation (TLV insertion or
// length reframing) moves a packet between them.
constexpr std::uint32_t kDepthBase = 260;  // + 3*tlv_code + (depth-2), depth 2..4
constexpr std::uint32_t kDuplicateBase = 302;  // + tlv_code, same type twice in a message
constexpr std::uint32_t kShapeBase = 316;      // + shape bucket
constexpr std::uint32_t kShapeBucketCount = 10;

// Field value buckets (top nibble): handler branches that depend on the
// magnitude of an accepted field.
constexpr std::uint32_t kFieldBucketBase = 326;  // + 16*field + nibble

// Per-value framing branches for the length bytes the handlers pivot on,
// split by the accepted message that carries the TLV. Every distinct
// declared length frames the handler's view of the region differently.
struct LenContext {
  std::uint8_t tlv_code;
  std::uint8_t message_code;
};
constexpr LenContext kLenContexts[] = {
    {mle::kTlvPrefix, mle::code_of(mle::MessageType::ChildIdResponse)},
    {mle::kTlvPrefix, mle::code_of(mle::MessageType::DataResponse)},
    {mle::kTlvServer, mle::code_of(mle::MessageType::ChildIdResponse)},
    {mle::kTlvServer, mle::code_of(mle::MessageType::DataResponse)},
    {mle::kTlvNetworkData, mle::code_of(mle::MessageType::ChildIdResponse)},
    {mle::kTlvNetworkData, mle::code_of(mle::MessageType::DataResponse)},
    {mle::kTlvTimeout, mle::code_of(mle::MessageType::ChildUpdateResponse)},
    {mle::kTlvTimeout, mle::code_of(mle::MessageType::ChildUpdateRequest)},
};
constexpr std::size_t kLenContextCount = std::size(kLenContexts);
constexpr std::uint32_t kLenValueBase = 534;  // + 256*context_rank + declared_length
// 534 + 8*256 = 2582

// Triple-boundary handler states: three fields of one late-dialogue message
// at their maxima simultaneously.
struct TripleEdge {
  std::uint8_t message_code;
  std::uint8_t fields[3];
};
constexpr std::uint32_t kTripleBase = 2582;

const std::vector<TripleEdge>& triple_edges() {
  static const std::vector<TripleEdge> kTriples = [] {
    std::vector<TripleEdge> triples;
    auto add_all = [&triples](std::uint8_t msg, std::initializer_list<std::uint8_t> fields) {
      std::vector<std::uint8_t> f(fields);
      for (std::size_t a = 0; a < f.size(); ++a) {
        for (std::size_t b = a + 1; b < f.size(); ++b) {
          for (std::size_t c = b + 1; c < f.size(); ++c) {
            triples.push_back({msg, {f[a], f[b], f[c]}});
          }
        }
      }
    };
    add_all(mle::code_of(mle::MessageType::ChildIdResponse),
            {0, 5, 6, 7, 8, 9, 10, 11, 12});
    add_all(mle::code_of(mle::MessageType::LinkAccept), {0, 4, 6, 7, 8, 9, 10});
    add_all(mle::code_of(mle::MessageType::AddressSolicitResponse), {5, 6, 7, 8, 9, 10});
    return triples;
  }();
  return kTriples;
}
// kTripleBase + 139 = 2721 ids used; the 4096-slot map leaves headroom.

// Fixed (non-tail) registry fields, in registry order. Byte offsets are
// within the framed TLV payload.
struct FixedFieldRef {
  std::uint8_t tlv_code;
  std::uint8_t byte_offset;
  std::uint8_t byte_width;
};

constexpr FixedFieldRef kFixedFields[] = {
    {mle::kTlvSourceAddress, 0, 2},  // 0 addr16
    {mle::kTlvMode, 0, 1},           // 1 mode
    {mle::kTlvTimeout, 0, 4},        // 2 timeout
    {mle::kTlvChallenge, 0, 8},      // 3 bytes
    {mle::kTlvResponse, 0, 8},       // 4 bytes
    {mle::kTlvAddress16, 0, 2},      // 5 addr16
    {mle::kTlvLeaderData, 0, 4},     // 6 partition_id
    {mle::kTlvLeaderData, 4, 1},     // 7 weighting
    {mle::kTlvLeaderData, 5, 1},     // 8 data_version
    {mle::kTlvLeaderData, 6, 1},     // 9 stable_version
    {mle::kTlvLeaderData, 7, 1},     // 10 leader_id
    {mle::kTlvPrefix, 0, 1},         // 11 prefix_length
    {mle::kTlvServer, 0, 2},         // 12 server16
};
constexpr std::size_t kFixedFieldCount = std::size(kFixedFields);

// Pair edges: two fields of one (late-dialogue) message both at their
// maximum value. These reward concentrated boundary mutation.
struct PairEdge {
  std::uint8_t message_code;
  std::uint8_t field_a;
  std::uint8_t field_b;
};

const std::vector<PairEdge>& pair_edges() {
  static const std::vector<PairEdge> kPairs = [] {
    std::vector<PairEdge> pairs;
    auto add_all = [&pairs](std::uint8_t msg, std::initializer_list<std::uint8_t> fields) {
      std::vector<std::uint8_t> f(fields);
      for (std::size_t a = 0; a < f.size(); ++a) {
        for (std::size_t b = a + 1; b < f.size(); ++b) {
          pairs.push_back({msg, f[a], f[b]});
        }
      }
    };
    add_all(mle::code_of(mle::MessageType::ChildIdResponse),
            {0, 5, 6, 7, 8, 9, 10, 11, 12});
    add_all(mle::code_of(mle::MessageType::LinkAccept), {0, 4, 6, 7, 8, 9, 10});
    add_all(mle::code_of(mle::MessageType::AddressSolicitResponse), {5, 6, 7, 8, 9, 10});
    return pairs;
  }();
  return kPairs;
}

// Message codes the joiner validates (and can therefore drop).
constexpr std::uint8_t kValidatedMessages[] = {
    mle::code_of(mle::MessageType::ParentResponse),
    mle::code_of(mle::MessageType::ChildIdResponse),
    mle::code_of(mle::MessageType::DataResponse),
    mle::code_of(mle::MessageType::ChildUpdateRequest),
    mle::code_of(mle::MessageType::ChildUpdateResponse),
    mle::code_of(mle::MessageType::Advertisement),
    mle::code_of(mle::MessageType::AddressSolicitResponse),
    mle::code_of(mle::MessageType::LinkAccept),
};

// Benign TLV content per message; a known TLV outside this set lights the
// unexpected-context edge for its type.
std::vector<std::uint8_t> benign_tlv_set(std::uint8_t message_code) {
  using mle::MessageType;
  switch (static_cast<MessageType>(message_code)) {
    case MessageType::Advertisement:
      return {mle::kTlvSourceAddress, mle::kTlvLeaderData};
    case MessageType::LinkRequest:
      return {mle::kTlvSourceAddress, mle::kTlvChallenge};
    case MessageType::LinkAccept:
      return {mle::kTlvSourceAddress, mle::kTlvLeaderData, mle::kTlvResponse};
    case MessageType::DataRequest:
      return {mle::kTlvMode};
    case MessageType::DataResponse:
      return {mle::kTlvSourceAddress, mle::kTlvLeaderData, mle::kTlvNetworkData,
              mle::kTlvPrefix, mle::kTlvServer};
    case MessageType::ParentRequest:
      return {mle::kTlvMode, mle::kTlvChallenge};
    case MessageType::ParentResponse:
      return {mle::kTlvSourceAddress, mle::kTlvLeaderData, mle::kTlvResponse};
    case MessageType::ChildIdRequest:
      return {mle::kTlvMode, mle::kTlvTimeout};
    case MessageType::ChildIdResponse:
      return {mle::kTlvSourceAddress, mle::kTlvAddress16, mle::kTlvLeaderData,
              mle::kTlvNetworkData, mle::kTlvPrefix, mle::kTlvServer};
    case MessageType::ChildUpdateRequest:
      return {mle::kTlvSourceAddress, mle::kTlvLeaderData, mle::kTlvChallenge,
              mle::kTlvMode, mle::kTlvTimeout};
    case MessageType::ChildUpdateResponse:
      return {mle::kTlvSourceAddress, mle::kTlvMode, mle::kTlvTimeout, mle::kTlvLeaderData,
              mle::kTlvResponse};
    case MessageType::AddressSolicit:
      return {mle::kTlvMode};
    case MessageType::AddressSolicitResponse:
      return {mle::kTlvAddress16, mle::kTlvLeaderData};
  }
  return {};
}

// TLV types present in the default ChildIdResponse (the V6 "extra TLV"
// condition compares against this set).
constexpr std::uint8_t kDefaultChildIdResponseTlvs[] = {
    mle::kTlvSourceAddress, mle::kTlvAddress16, mle::kTlvLeaderData,
    mle::kTlvNetworkData,   mle::kTlvPrefix,    mle::kTlvServer,
};

// --- lenient structural scan -------------------------------------------------
//
// The predicate and validation layer works on the serialized TLV region the
// way a careless parser would: framing follows declared lengths, truncation
// is visible, and bytes past a declared-short payload stay addressable (the
// out-of-bounds view).

struct ScanNode {
  std::uint8_t type = 0;
  std::uint8_t declared_length = 0;
  std::span<const std::uint8_t> framed;  // min(declared, available)
  std::span<const std::uint8_t> oob;     // payload start .. end of region
  bool truncated = false;
  std::vector<ScanNode> children;
};

void scan_region(std::span<const std::uint8_t> bytes, int depth, std::vector<ScanNode>& out) {
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    ScanNode node;
    node.type = bytes[pos];
    if (bytes.size() - pos < 2) {
      node.oob = bytes.subspan(pos + 1 > bytes.size() ? bytes.size() : pos + 1);
      out.push_back(std::move(node));
      break;
    }
    node.declared_length = bytes[pos + 1];
    std::size_t payload_start = pos + 2;
    std::size_t available = bytes.size() - payload_start;
    std::size_t framed_len = std::min<std::size_t>(node.declared_length, available);
    node.truncated = node.declared_length > available;
    node.framed = bytes.subspan(payload_start, framed_len);
    node.oob = bytes.subspan(payload_start);
    const mle::TlvTypeSpec* spec = mle::find_tlv_spec(node.type);
    if (spec != nullptr && spec->nestable && depth < mle::kMaxNestingDepth &&
        !node.truncated) {
      scan_region(node.framed, depth + 1, node.children);
    }
    pos = payload_start + framed_len;
    out.push_back(std::move(node));
  }
}

std::vector<ScanNode> scan_tlv_region(std::span<const std::uint8_t> packet_bytes) {
  std::vector<ScanNode> out;
  if (packet_bytes.size() > mle::kMinPacketSize) {
    scan_region(packet_bytes.subspan(mle::kMinPacketSize), 1, out);
  }
  return out;
}

std::uint64_t read_be(std::span<const std::uint8_t> bytes, std::size_t offset,
                      std::size_t width) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) {
    v = v << 8 | bytes[offset + i];
  }
  return v;
}

// Depth-first search for the first node of `code` whose framed payload holds
// at least `min_bytes`.
const ScanNode* find_node(const std::vector<ScanNode>& nodes, std::uint8_t code,
                          std::size_t min_bytes, bool allow_truncated = false) {
  for (const ScanNode& node : nodes) {
    if (node.type == code && (allow_truncated || !node.truncated) &&
        node.framed.size() >= min_bytes) {
      return &node;
    }
    if (const ScanNode* hit = find_node(node.children, code, min_bytes, allow_truncated)) {
      return hit;
    }
  }
  return nullptr;
}

// First node of `code` regardless of framing state.
const ScanNode* find_node_any(const std::vector<ScanNode>& nodes, std::uint8_t code) {
  for (const ScanNode& node : nodes) {
    if (node.type == code) return &node;
    if (const ScanNode* hit = find_node_any(node.children, code)) return hit;
  }
  return nullptr;
}

std::optional<std::uint64_t> read_fixed_field(const std::vector<ScanNode>& nodes,
                                              const FixedFieldRef& ref) {
  const ScanNode* node = find_node(nodes, ref.tlv_code, ref.byte_offset + ref.byte_width);
  if (node == nullptr) return std::nullopt;
  return read_be(node->framed, ref.byte_offset, ref.byte_width);
}

constexpr std::uint64_t field_max(std::uint8_t byte_width) {
  return byte_width >= 8 ? ~std::uint64_t{0}
                         : ((std::uint64_t{1} << (8 * byte_width)) - 1);
}

// Benign nonce the joiner challenges with; the leader echoes it.
const Bytes& dut_challenge() {
  static const Bytes kNonce = {0xA5, 0x5A, 0xF0, 0x0F, 0x12, 0x34, 0x56, 0x78};
  return kNonce;
}

const Bytes& leader_challenge() {
  static const Bytes kNonce = {0x11, 0x22, 0x33, 0x44, 0x55, 0x66, 0x77, 0x88};
  return kNonce;
}

// --- benign packet construction ---------------------------------------------

Tlv raw_tlv(std::uint8_t type, Bytes payload) {
  Tlv tlv;
  tlv.type = type;
  tlv.declared_length = static_cast<std::uint8_t>(payload.size());
  tlv.payload = std::move(payload);
  return tlv;
}

Tlv u16_tlv(std::uint8_t type, std::uint16_t v) {
  return raw_tlv(type, {static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)});
}

Tlv u32_tlv(std::uint8_t type, std::uint32_t v) {
  return raw_tlv(type, {static_cast<std::uint8_t>(v >> 24), static_cast<std::uint8_t>(v >> 16),
                        static_cast<std::uint8_t>(v >> 8), static_cast<std::uint8_t>(v)});
}

Tlv leader_data_tlv() {
  return raw_tlv(mle::kTlvLeaderData, {0x0A, 0x1B, 0x2C, 0x3D, 0x40, 0x07, 0x07, 0x01});
}

Tlv prefix_tlv() {
  // prefix_length = 64 bits, followed by the 8 prefix bytes.
  return raw_tlv(mle::kTlvPrefix, {0x40, 0xFD, 0x11, 0x22, 0x33, 0x00, 0x00, 0x00, 0x00});
}

Tlv server_tlv() {
  // server16 == the assigned child address.
  return raw_tlv(mle::kTlvServer, {0x0C, 0x01, 0xDE, 0xAD, 0xBE, 0xEF});
}

Tlv network_data_tlv() {
  Tlv tlv;
  tlv.type = mle::kTlvNetworkData;
  TlvList children;
  children.push_back(prefix_tlv());
  children.push_back(server_tlv());
  tlv.payload = std::move(children);
  tlv.declared_length = static_cast<std::uint8_t>(tlv.payload_size());
  return tlv;
}

MlePacket make_packet(mle::MessageType type, TlvList tlvs) {
  MlePacket p;
  p.message_type = mle::code_of(type);
  p.tlvs = std::move(tlvs);
  return p;
}

std::uint8_t mode_value(NodeType type) { return type == NodeType::Mtd ? 0x04 : 0x0F; }

}  // namespace

namespace benign {

MlePacket parent_request(NodeType type) {
  return make_packet(mle::MessageType::ParentRequest,
                     {raw_tlv(mle::kTlvMode, {mode_value(type)}),
                      raw_tlv(mle::kTlvChallenge, dut_challenge())});
}

MlePacket parent_response(const Bytes& challenge_echo) {
  return make_packet(mle::MessageType::ParentResponse,
                     {u16_tlv(mle::kTlvSourceAddress, kLeaderAddr16), leader_data_tlv(),
                      raw_tlv(mle::kTlvResponse, challenge_echo)});
}

MlePacket child_id_response() {
  return make_packet(mle::MessageType::ChildIdResponse,
                     {u16_tlv(mle::kTlvSourceAddress, kLeaderAddr16),
                      u16_tlv(mle::kTlvAddress16, kAssignedChildAddr16), leader_data_tlv(),
                      network_data_tlv()});
}

MlePacket data_response() {
  return make_packet(mle::MessageType::DataResponse,
                     {u16_tlv(mle::kTlvSourceAddress, kLeaderAddr16), leader_data_tlv(),
                      network_data_tlv()});
}

MlePacket child_update_response() {
  return make_packet(mle::MessageType::ChildUpdateResponse,
                     {u16_tlv(mle::kTlvSourceAddress, kLeaderAddr16),
                      raw_tlv(mle::kTlvMode, {0x0F}), u32_tlv(mle::kTlvTimeout, kBenignTimeout),
                      leader_data_tlv()});
}

MlePacket child_update_request_from_leader() {
  return make_packet(mle::MessageType::ChildUpdateRequest,
                     {u16_tlv(mle::kTlvSourceAddress, kLeaderAddr16), leader_data_tlv(),
                      raw_tlv(mle::kTlvChallenge, leader_challenge())});
}

MlePacket advertisement() {
  return make_packet(mle::MessageType::Advertisement,
                     {u16_tlv(mle::kTlvSourceAddress, kLeaderAddr16), leader_data_tlv()});
}

MlePacket address_solicit_response() {
  return make_packet(mle::MessageType::AddressSolicitResponse,
                     {u16_tlv(mle::kTlvAddress16, kAssignedRouterAddr16), leader_data_tlv()});
}

MlePacket link_accept(const Bytes& challenge_echo) {
  return make_packet(mle::MessageType::LinkAccept,
                     {u16_tlv(mle::kTlvSourceAddress, kLeaderAddr16), leader_data_tlv(),
                      raw_tlv(mle::kTlvResponse, challenge_echo)});
}

}  // namespace benign

std::string_view to_string(NodeRole role) {
  switch (role) {
    case NodeRole::Detached: return "detached";
    case NodeRole::Child: return "child";
    case NodeRole::Router: return "router";
    case NodeRole::Leader: return "leader";
  }
  return "unknown";
}

std::string_view to_string(NodeType type) {
  return type == NodeType::Mtd ? "mtd" : "ftd";
}

std::string_view to_string(CrashKind kind) {
  return kind == CrashKind::AssertionFailure ? "assertion_failure" : "buffer_overflow";
}

std::string_view to_string(VulnId vuln) {
  switch (vuln) {
    case VulnId::V1: return "V1";
    case VulnId::V2: return "V2";
    case VulnId::V3: return "V3";
    case VulnId::V4: return "V4";
    case VulnId::V5: return "V5";
    case VulnId::V6: return "V6";
  }
  return "V?";
}

std::optional<NodeType> parse_node_type(std::string_view s) {
  if (s == "mtd") return NodeType::Mtd;
  if (s == "ftd") return NodeType::Ftd;
  return std::nullopt;
}

std::optional<VulnId> parse_vuln(std::string_view s) {
  for (VulnId v : {VulnId::V1, VulnId::V2, VulnId::V3, VulnId::V4, VulnId::V5, VulnId::V6}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<CrashKind> parse_crash_kind(std::string_view s) {
  if (s == "assertion_failure") return CrashKind::AssertionFailure;
  if (s == "buffer_overflow") return CrashKind::BufferOverflowDetected;
  return std::nullopt;
}

SimNode::SimNode(NodeType type, NodeRole initial_role, bool sanitizer_enabled,
                 CoverageMap* coverage)
    : type_(type),
      role_(initial_role),
      sanitizer_(sanitizer_enabled),
      coverage_(coverage),
      is_leader_(initial_role == NodeRole::Leader) {}

SimNode create_node(NodeType type, NodeRole initial_role, bool sanitizer_enabled,
                    CoverageMap* coverage) {
  return SimNode(type, initial_role, sanitizer_enabled, coverage);
}

void SimNode::edge(std::uint32_t id) {
  if (coverage_ != nullptr) {
    coverage_->record(id);
  }
}

void SimNode::begin_iteration(bool leader_data_present) {
  activated_ = true;
  advert_poison_ = false;
  leader_data_present_ = is_leader_ || type_ == NodeType::Mtd || leader_data_present;
}

void SimNode::reset_protocol_state() {
  phase_ = Phase::Idle;
  if (!is_leader_) {
    role_ = NodeRole::Detached;
  }
  activated_ = false;
  crashed_ = false;
  advert_poison_ = false;
  tick_ = 0;
  child_tick_ = 0;
  peer_ = LeaderPeerState{};
  outbound_.clear();
}

void SimNode::soft_reset() {
  ++reboot_count_;
  edge(kEdgeSoftReset);
  reset_protocol_state();
  // leader_data_present_ deliberately survives: the soft-reset state leak.
}

void SimNode::hard_reset() {
  reboot_count_ = 0;
  edge(kEdgeHardReset);
  reset_protocol_state();
  leader_data_present_ = false;
}

std::uint64_t SimNode::read_reboot_count() {
  edge(kEdgeRebootRead);
  return reboot_count_;
}

DutStateSnapshot SimNode::snapshot() const {
  return {role_, reboot_count_, leader_data_present_,
          phase_ == Phase::AwaitAddressSolicitResponse, tick_};
}

void SimNode::queue(MlePacket packet) { outbound_.push_back(std::move(packet)); }

std::optional<MlePacket> SimNode::generate_next() {
  if (outbound_.empty()) return std::nullopt;
  MlePacket p = std::move(outbound_.front());
  outbound_.pop_front();
  return p;
}

std::vector<MlePacket> SimNode::poll() {
  if (crashed_ || !activated_) {
    return {};
  }
  std::vector<MlePacket> out;
  if (is_leader_) {
    if (tick_ % 5 == 1) {
      queue(benign::advertisement());
    }
    if (peer_.peer_attached && tick_ % 9 == 3) {
      queue(benign::child_update_request_from_leader());
    }
    ++tick_;
    return out;
  }

  constexpr std::uint32_t kRetryAfter = 3;  // stalled-phase timeout in ticks
  switch (phase_) {
    case Phase::Idle:
      phase_ = Phase::AwaitParentResponse;
      phase_entry_tick_ = tick_;
      edge(kEdgeActivated);
      edge(kEdgeParentRequestSent);
      out.push_back(benign::parent_request(type_));
      break;
    case Phase::AwaitParentResponse:
    case Phase::AwaitChildIdResponse:
      // The expected reply never arrived; restart the attach.
      if (tick_ - phase_entry_tick_ >= kRetryAfter) {
        phase_ = Phase::Idle;
        phase_entry_tick_ = tick_;
      }
      break;
    case Phase::ChildActive: {
      std::uint32_t since = tick_ - child_tick_;
      if (type_ == NodeType::Ftd && tick_ == solicit_tick_) {
        phase_ = Phase::AwaitAddressSolicitResponse;
        phase_entry_tick_ = tick_;
        edge(kEdgeSolicitSent);
        out.push_back(make_packet(mle::MessageType::AddressSolicit,
                                  {raw_tlv(mle::kTlvMode, {mode_value(type_)})}));
        break;
      }
      bool data_due = (type_ == NodeType::Mtd && since % 2 == 1) ||
                      (type_ == NodeType::Ftd && since == 1);
      if (data_due) {
        edge(kEdgeDataPollSent);
        out.push_back(make_packet(mle::MessageType::DataRequest,
                                  {raw_tlv(mle::kTlvMode, {mode_value(type_)})}));
      }
      if (since % 5 == 2) {
        edge(kEdgeKeepAliveSent);
        out.push_back(make_packet(
            mle::MessageType::ChildUpdateRequest,
            {raw_tlv(mle::kTlvMode, {mode_value(type_)}),
             u32_tlv(mle::kTlvTimeout, kBenignTimeout),
             raw_tlv(mle::kTlvChallenge, dut_challenge())}));
      }
      break;
    }
    case Phase::AwaitAddressSolicitResponse:
      // Solicit response lost; fall back to child and try again later.
      if (tick_ - phase_entry_tick_ >= kRetryAfter) {
        phase_ = Phase::ChildActive;
        phase_entry_tick_ = tick_;
        solicit_tick_ = tick_ + 4;
      }
      break;
    case Phase::RouterLink:
      if (tick_ - phase_entry_tick_ >= kRetryAfter) {
        phase_entry_tick_ = tick_;
        edge(kEdgeLinkRequestSent);
        out.push_back(make_packet(mle::MessageType::LinkRequest,
                                  {u16_tlv(mle::kTlvSourceAddress, kAssignedRouterAddr16),
                                   raw_tlv(mle::kTlvChallenge, dut_challenge())}));
      }
      break;
    default:
      break;
  }
  ++tick_;
  return out;
}

StepOutcome SimNode::step(const MlePacket& incoming) {
  Bytes bytes = mle::encode_packet(incoming);
  return step_impl(incoming, bytes);
}

StepOutcome SimNode::step_bytes(std::span<const std::uint8_t> bytes) {
  if (crashed_) {
    throw std::logic_error("SimNode::step: node has crashed");
  }
  if (bytes.size() < mle::kMinPacketSize) {
    return {};  // Silent
  }
  MlePacket packet = mle::decode_packet_lenient(bytes);
  return step_impl(packet, bytes);
}

StepOutcome SimNode::step_impl(const MlePacket& packet, std::span<const std::uint8_t> bytes) {
  if (crashed_) {
    throw std::logic_error("SimNode::step: node has crashed");
  }
  if (!mle::is_known_message_type(packet.message_type)) {
    edge(kEdgeUnknownMessage);
    return {};
  }
  return is_leader_ ? leader_step(packet, bytes) : joiner_step(packet, bytes);
}

namespace {

void record_parse_edges(CoverageMap* map, std::uint8_t message_code,
                        const std::vector<ScanNode>& nodes) {
  if (map == nullptr) return;
  std::vector<std::uint8_t> benign_set = benign_tlv_set(message_code);
  std::size_t per_type_count[14] = {};
  std::size_t total_nodes = 0;
  std::size_t max_nwd_children = 0;
  auto walk = [&](auto&& self, const std::vector<ScanNode>& level, int depth) -> void {
    for (const ScanNode& node : level) {
      ++total_nodes;
      const mle::TlvTypeSpec* spec = mle::find_tlv_spec(node.type);
      if (spec == nullptr) {
        map->record(kEdgeUnknownTlv);
      } else {
        ++per_type_count[node.type];
        map->record((node.truncated ? kTlvTruncatedBase : kTlvParsedBase) + node.type);
        if (std::find(benign_set.begin(), benign_set.end(), node.type) == benign_set.end()) {
          map->record(kTlvUnexpectedBase + node.type);
        }
        if (node.declared_length == 0) map->record(kTlvLenZeroBase + node.type);
        if (node.declared_length == 255) map->record(kTlvLenMaxBase + node.type);
        if (depth >= 2 && depth <= 4) {
          map->record(kDepthBase + 3u * node.type + static_cast<std::uint32_t>(depth - 2));
        }
        if (node.type == mle::kTlvNetworkData) {
          max_nwd_children = std::max(max_nwd_children, node.children.size());
        }
      }
      self(self, node.children, depth + 1);
    }
  };
  walk(walk, nodes, 1);

  for (std::uint32_t code = 0; code < 14; ++code) {
    if (per_type_count[code] >= 2) {
      map->record(kDuplicateBase + code);
    }
  }
  std::size_t top_count = nodes.size();
  constexpr std::size_t kTopThresholds[] = {5, 6, 8, 10, 12};
  for (std::size_t i = 0; i < std::size(kTopThresholds); ++i) {
    if (top_count >= kTopThresholds[i]) {
      map->record(kShapeBase + static_cast<std::uint32_t>(i));
    }
  }
  constexpr std::size_t kChildThresholds[] = {3, 4, 6, 8};
  for (std::size_t i = 0; i < std::size(kChildThresholds); ++i) {
    if (max_nwd_children >= kChildThresholds[i]) {
      map->record(kShapeBase + 5 + static_cast<std::uint32_t>(i));
    }
  }
  if (total_nodes >= 16) {
    map->record(kShapeBase + 9);
  }
}

void record_value_edges(CoverageMap* map, std::uint8_t message_code,
                        const std::vector<ScanNode>& nodes) {
  if (map == nullptr) return;
  std::optional<std::uint64_t> values[kFixedFieldCount];
  for (std::size_t i = 0; i < kFixedFieldCount; ++i) {
    values[i] = read_fixed_field(nodes, kFixedFields[i]);
    if (!values[i]) continue;
    if (*values[i] == 0) {
      map->record(kValueBase + 2 * static_cast<std::uint32_t>(i));
    }
    if (*values[i] == field_max(kFixedFields[i].byte_width)) {
      map->record(kValueBase + 2 * static_cast<std::uint32_t>(i) + 1);
    }
    std::uint32_t nibble =
        static_cast<std::uint32_t>(*values[i] >> (8 * kFixedFields[i].byte_width - 4)) & 0xF;
    map->record(kFieldBucketBase + 16 * static_cast<std::uint32_t>(i) + nibble);
  }
  const std::vector<PairEdge>& pairs = pair_edges();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const PairEdge& pair = pairs[p];
    if (pair.message_code != message_code) continue;
    const auto& a = values[pair.field_a];
    const auto& b = values[pair.field_b];
    if (a && b && *a == field_max(kFixedFields[pair.field_a].byte_width) &&
        *b == field_max(kFixedFields[pair.field_b].byte_width)) {
      map->record(kPairBase + static_cast<std::uint32_t>(p));
    }
  }
  const std::vector<TripleEdge>& triples = triple_edges();
  for (std::size_t t = 0; t < triples.size(); ++t) {
    const TripleEdge& triple = triples[t];
    if (triple.message_code != message_code) continue;
    bool all_max = true;
    for (std::uint8_t f : triple.fields) {
      if (!values[f] || *values[f] != field_max(kFixedFields[f].byte_width)) {
        all_max = false;
        break;
      }
    }
    if (all_max) {
      map->record(kTripleBase + static_cast<std::uint32_t>(t));
    }
  }

  // Length framing classes of the accepted message's handler.
  for (std::size_t ctx = 0; ctx < kLenContextCount; ++ctx) {
    if (kLenContexts[ctx].message_code != message_code) continue;
    auto walk = [&](auto&& self, const std::vector<ScanNode>& level) -> void {
      for (const ScanNode& node : level) {
        if (node.type == kLenContexts[ctx].tlv_code) {
          map->record(kLenValueBase + 256u * static_cast<std::uint32_t>(ctx) +
                      node.declared_length);
        }
        self(self, node.children);
      }
    };
    walk(walk, nodes);
  }
}

bool response_echo_ok(const std::vector<ScanNode>& nodes, const Bytes& nonce) {
  const ScanNode* node = find_node(nodes, mle::kTlvResponse, nonce.size());
  if (node == nullptr) return false;
  return std::equal(nonce.begin(), nonce.end(), node->framed.begin());
}

}  // namespace

StepOutcome SimNode::joiner_step(const MlePacket& packet,
                                 std::span<const std::uint8_t> bytes) {
  using mle::MessageType;
  std::uint8_t code = packet.message_type;
  MessageType msg = static_cast<MessageType>(code);

  bool attached = phase_ == Phase::ChildActive ||
                  phase_ == Phase::AwaitAddressSolicitResponse ||
                  phase_ == Phase::RouterLink || phase_ == Phase::RouterActive;
  bool accepted = false;
  switch (msg) {
    case MessageType::ParentResponse:
      accepted = phase_ == Phase::AwaitParentResponse;
      break;
    case MessageType::ChildIdResponse:
      accepted = phase_ == Phase::AwaitChildIdResponse;
      break;
    case MessageType::DataResponse:
    case MessageType::ChildUpdateRequest:
    case MessageType::ChildUpdateResponse:
    case MessageType::Advertisement:
      accepted = attached;
      break;
    case MessageType::AddressSolicitResponse:
      accepted = type_ == NodeType::Ftd && phase_ == Phase::AwaitAddressSolicitResponse;
      break;
    case MessageType::LinkAccept:
      accepted = type_ == NodeType::Ftd && phase_ == Phase::RouterLink;
      break;
    default:
      accepted = false;
      break;
  }
  if (!accepted) {
    edge(kIgnoredBase + code);
    return {};
  }
  edge(kDispatchBase + code);

  std::vector<ScanNode> scan = scan_tlv_region(bytes);
  record_parse_edges(coverage_, code, scan);

  // Seeded vulnerability predicates, evaluated before normal handling.
  // V6 precedes V1: the sanitizer catches the overflow during parsing,
  // before the assertion on the same field can fire.
  if (msg == MessageType::ChildIdResponse) {
    const ScanNode* prefix = find_node(scan, mle::kTlvPrefix, 1, /*allow_truncated=*/true);
    bool prefix255 = prefix != nullptr && !prefix->framed.empty() && prefix->framed[0] == 255;
    if (prefix255) {
      bool shape32 = prefix->framed.size() == 33;
      bool extra_tlv = false;
      auto check_extra = [&](auto&& self, const std::vector<ScanNode>& level) -> void {
        for (const ScanNode& node : level) {
          bool known_default =
              std::find(std::begin(kDefaultChildIdResponseTlvs),
                        std::end(kDefaultChildIdResponseTlvs),
                        node.type) != std::end(kDefaultChildIdResponseTlvs);
          if (!known_default) extra_tlv = true;
          self(self, node.children);
        }
      };
      check_extra(check_extra, scan);
      if (shape32) edge(kGuardV6PrefixShape);
      if (extra_tlv) edge(kGuardV6ExtraTlv);
      if (shape32 && extra_tlv && sanitizer_) {
        crashed_ = true;
        edge(kCrashBase + static_cast<std::uint32_t>(VulnId::V6));
        return {StepOutcome::Kind::Crash, {}, CrashKind::BufferOverflowDetected, VulnId::V6};
      }
      // V1: reachable assertion on the oversized prefix length.
      edge(kGuardV1Prefix255);
      crashed_ = true;
      edge(kCrashBase + static_cast<std::uint32_t>(VulnId::V1));
      return {StepOutcome::Kind::Crash, {}, CrashKind::AssertionFailure, VulnId::V1};
    }
    // V2: Server TLV declared one byte long; the out-of-bounds server16 read
    // yields the bytes that equal Address16.
    if (type_ == NodeType::Ftd) {
      const ScanNode* server = find_node_any(scan, mle::kTlvServer);
      if (server != nullptr && server->declared_length == 1) {
        edge(kGuardV2ServerLen1);
        const ScanNode* addr = find_node(scan, mle::kTlvAddress16, 2);
        if (addr != nullptr && server->oob.size() >= 2 &&
            read_be(server->oob, 0, 2) == read_be(addr->framed, 0, 2)) {
          edge(kGuardV2AddrEqServer);
          if (sanitizer_) {
            crashed_ = true;
            edge(kCrashBase + static_cast<std::uint32_t>(VulnId::V2));
            return {StepOutcome::Kind::Crash, {}, CrashKind::BufferOverflowDetected,
                    VulnId::V2};
          }
        }
      }
    }
  }
  if (msg == MessageType::ChildIdResponse || msg == MessageType::DataResponse) {
    // V3: oversized Network Data length while the node holds leader data.
    const ScanNode* nwd = find_node_any(scan, mle::kTlvNetworkData);
    if (nwd != nullptr && nwd->declared_length == 255) {
      edge(kGuardV3NwdLen255);
      if (leader_data_present_) {
        edge(kGuardV3LeaderPath);
        crashed_ = true;
        edge(kCrashBase + static_cast<std::uint32_t>(VulnId::V3));
        return {StepOutcome::Kind::Crash, {}, CrashKind::AssertionFailure, VulnId::V3};
      }
    }
  }
  if (msg == MessageType::ChildUpdateResponse && type_ == NodeType::Mtd &&
      phase_ == Phase::ChildActive) {
    // V4: timeout pinned at the 32-bit maximum.
    const ScanNode* timeout = find_node(scan, mle::kTlvTimeout, 4);
    if (timeout != nullptr && read_be(timeout->framed, 0, 4) == 0xFFFFFFFFULL) {
      edge(kGuardV4TimeoutMax);
      crashed_ = true;
      edge(kCrashBase + static_cast<std::uint32_t>(VulnId::V4));
      return {StepOutcome::Kind::Crash, {}, CrashKind::AssertionFailure, VulnId::V4};
    }
  }
  if (msg == MessageType::Advertisement &&
      phase_ == Phase::AwaitAddressSolicitResponse) {
    // V5 arming: poisoned leader id inside the solicit window.
    edge(kGuardV5WindowAdvert);
    const ScanNode* leader = find_node(scan, mle::kTlvLeaderData, 8);
    if (leader != nullptr && leader->framed[7] == 255) {
      edge(kGuardV5PoisonArmed);
      advert_poison_ = true;
    }
  }
  if (msg == MessageType::AddressSolicitResponse && advert_poison_) {
    // V5 firing: the legitimate response cannot locate a valid leader.
    crashed_ = true;
    edge(kCrashBase + static_cast<std::uint32_t>(VulnId::V5));
    return {StepOutcome::Kind::Crash, {}, CrashKind::AssertionFailure, VulnId::V5};
  }

  // Validation: a message missing its required TLVs is dropped.
  bool valid = true;
  switch (msg) {
    case MessageType::ParentResponse:
      valid = find_node(scan, mle::kTlvSourceAddress, 2) != nullptr &&
              find_node(scan, mle::kTlvLeaderData, 8) != nullptr &&
              response_echo_ok(scan, dut_challenge());
      break;
    case MessageType::ChildIdResponse:
      valid = find_node(scan, mle::kTlvSourceAddress, 2) != nullptr &&
              find_node(scan, mle::kTlvAddress16, 2) != nullptr &&
              find_node(scan, mle::kTlvLeaderData, 8) != nullptr &&
              find_node_any(scan, mle::kTlvNetworkData) != nullptr;
      break;
    case MessageType::DataResponse:
      valid = find_node(scan, mle::kTlvSourceAddress, 2) != nullptr &&
              find_node_any(scan, mle::kTlvNetworkData) != nullptr;
      break;
    case MessageType::ChildUpdateRequest:
      valid = find_node(scan, mle::kTlvSourceAddress, 2) != nullptr;
      break;
    case MessageType::ChildUpdateResponse:
      valid = find_node(scan, mle::kTlvSourceAddress, 2) != nullptr &&
              find_node(scan, mle::kTlvTimeout, 4) != nullptr;
      break;
    case MessageType::Advertisement:
      valid = find_node(scan, mle::kTlvSourceAddress, 2) != nullptr &&
              find_node(scan, mle::kTlvLeaderData, 8) != nullptr;
      break;
    case MessageType::AddressSolicitResponse:
      valid = find_node(scan, mle::kTlvAddress16, 2) != nullptr;
      break;
    case MessageType::LinkAccept:
      valid = find_node(scan, mle::kTlvSourceAddress, 2) != nullptr &&
              response_echo_ok(scan, dut_challenge());
      break;
    default:
      break;
  }
  if (!valid) {
    edge(kDroppedBase + code);
    return {};
  }

  record_value_edges(coverage_, code, scan);

  // Normal handling.
  StepOutcome outcome;
  outcome.kind = StepOutcome::Kind::Ok;
  switch (msg) {
    case MessageType::ParentResponse:
      phase_ = Phase::AwaitChildIdResponse;
      phase_entry_tick_ = tick_;
      edge(kEdgeChildIdRequestSent);
      outcome.responses.push_back(
          make_packet(mle::MessageType::ChildIdRequest,
                      {raw_tlv(mle::kTlvMode, {mode_value(type_)}),
                       u32_tlv(mle::kTlvTimeout, kBenignTimeout)}));
      break;
    case MessageType::ChildIdResponse:
      phase_ = Phase::ChildActive;
      role_ = NodeRole::Child;
      child_tick_ = tick_;
      phase_entry_tick_ = tick_;
      solicit_tick_ = tick_ + 4;
      edge(kEdgeBecameChild);
      edge(leader_data_present_ ? kEdgeLeaderDataStored : kEdgeLeaderDataAbsent);
      break;
    case MessageType::ChildUpdateRequest:
      outcome.responses.push_back(make_packet(
          mle::MessageType::ChildUpdateResponse,
          {u16_tlv(mle::kTlvSourceAddress,
                   role_ == NodeRole::Router ? kAssignedRouterAddr16 : kAssignedChildAddr16),
           raw_tlv(mle::kTlvMode, {mode_value(type_)}),
           u32_tlv(mle::kTlvTimeout, kBenignTimeout),
           raw_tlv(mle::kTlvResponse, leader_challenge())}));
      break;
    case MessageType::AddressSolicitResponse:
      phase_ = Phase::RouterLink;
      phase_entry_tick_ = tick_;
      role_ = NodeRole::Router;
      edge(kEdgeBecameRouter);
      edge(kEdgeLinkRequestSent);
      outcome.responses.push_back(
          make_packet(mle::MessageType::LinkRequest,
                      {u16_tlv(mle::kTlvSourceAddress, kAssignedRouterAddr16),
                       raw_tlv(mle::kTlvChallenge, dut_challenge())}));
      break;
    case MessageType::LinkAccept:
      phase_ = Phase::RouterActive;
      phase_entry_tick_ = tick_;
      edge(kEdgeLinkEstablished);
      break;
    case MessageType::DataResponse:
    case MessageType::ChildUpdateResponse:
    case MessageType::Advertisement:
      break;
    default:
      break;
  }
  return outcome;
}

StepOutcome SimNode::leader_step(const MlePacket& packet,
                                 std::span<const std::uint8_t> bytes) {
  using mle::MessageType;
  std::uint8_t code = packet.message_type;
  MessageType msg = static_cast<MessageType>(code);

  bool accepted = false;
  switch (msg) {
    case MessageType::ParentRequest:
    case MessageType::ChildIdRequest:
    case MessageType::DataRequest:
    case MessageType::ChildUpdateRequest:
    case MessageType::ChildUpdateResponse:
    case MessageType::AddressSolicit:
    case MessageType::LinkRequest:
      accepted = true;
      break;
    default:
      accepted = false;
      break;
  }
  if (!accepted) {
    edge(kIgnoredBase + code);
    return {};
  }
  edge(kDispatchBase + code);

  std::vector<ScanNode> scan = scan_tlv_region(bytes);
  record_parse_edges(coverage_, code, scan);
  record_value_edges(coverage_, code, scan);

  switch (msg) {
    case MessageType::ParentRequest: {
      peer_.saw_parent_request = true;
      const ScanNode* challenge = find_node(scan, mle::kTlvChallenge, 1);
      peer_.peer_challenge =
          challenge != nullptr ? Bytes(challenge->framed.begin(), challenge->framed.end())
                               : Bytes(8, 0);
      queue(benign::parent_response(peer_.peer_challenge));
      break;
    }
    case MessageType::ChildIdRequest:
      peer_.peer_attached = true;
      queue(benign::child_id_response());
      break;
    case MessageType::DataRequest:
      queue(benign::data_response());
      break;
    case MessageType::ChildUpdateRequest:
      queue(benign::child_update_response());
      break;
    case MessageType::ChildUpdateResponse:
      break;  // keep-alive reply absorbed
    case MessageType::AddressSolicit:
      // The router-table refresh broadcast lands inside the peer's solicit
      // window, then the solicit response follows.
      queue(benign::advertisement());
      queue(benign::address_solicit_response());
      break;
    case MessageType::LinkRequest: {
      const ScanNode* challenge = find_node(scan, mle::kTlvChallenge, 1);
      peer_.peer_link_challenge =
          challenge != nullptr ? Bytes(challenge->framed.begin(), challenge->framed.end())
                               : Bytes(8, 0);
      queue(benign::link_accept(peer_.peer_link_challenge));
      break;
    }
    default:
      break;
  }
  StepOutcome outcome;
  outcome.kind = StepOutcome::Kind::Ok;
  return outcome;
}

std::size_t SimNode::reachable_edge_count() {
  std::size_t total = kLifecycleEdgeCount;
  total += mle::message_type_codes().size();   // dispatch
  total += mle::message_type_codes().size();   // ignored
  total += 1;                                  // unknown message
  total += std::size(kValidatedMessages);      // dropped
  total += mle::tlv_registry().size() * 2;     // parsed + truncated
  total += 1;                                  // unknown tlv
  total += mle::tlv_registry().size() * 3;     // unexpected + len0 + len255
  total += kFixedFieldCount * 2;               // value classes
  total += pair_edges().size();                // pairs
  total += kGuardEdgeCount;
  total += 6;                                  // crash edges
  total += mle::tlv_registry().size() * 3;     // nesting depth classes
  total += mle::tlv_registry().size();         // duplicate types
  total += kShapeBucketCount;                  // structural shape buckets
  total += kFixedFieldCount * 16;              // field value buckets
  total += kLenContextCount * 256;             // length framing values
  total += triple_edges().size();              // triple boundary states
  return total;
}

}  // namespace meshfuzz
