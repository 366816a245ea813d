// SPDX-License-Identifier: Apache-2.0
//
// MLE-style packet model: a 5-byte opaque security header, a one-byte
// message type, and an ordered tree of TLV records. Encoding is byte-exact:
// declared lengths are written as stored, never recomputed, so deliberately
// inconsistent packets survive a round trip.

#ifndef MESHFUZZ_MLE_HPP_
#define MESHFUZZ_MLE_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <variant>
#include <vector>

#include "meshfuzz/util.hpp"

namespace meshfuzz::mle {

inline constexpr std::size_t kSecurityHeaderSize = 5;
inline constexpr std::size_t kMinPacketSize = kSecurityHeaderSize + 1;

// Maximum TLV nesting depth (a top-level TLV sits at depth 1).
inline constexpr int kMaxNestingDepth = 4;

enum class MessageType : std::uint8_t {
  Advertisement = 0x00,
  LinkRequest = 0x02,
  LinkAccept = 0x03,
  DataRequest = 0x07,
  DataResponse = 0x08,
  ParentRequest = 0x09,
  ParentResponse = 0x0A,
  ChildIdRequest = 0x0B,
  ChildIdResponse = 0x0C,
  ChildUpdateRequest = 0x0D,
  ChildUpdateResponse = 0x0E,
  AddressSolicit = 0x10,
  AddressSolicitResponse = 0x11,
};

// All valid message-type codes in ascending order.
std::span<const std::uint8_t> message_type_codes();
bool is_known_message_type(std::uint8_t code);
std::string_view message_type_name(std::uint8_t code);  // "unknown" if not registered

inline constexpr std::uint8_t code_of(MessageType t) { return static_cast<std::uint8_t>(t); }

// TLV type codes of the built-in registry. See PROTOCOL.md for the layouts.
inline constexpr std::uint8_t kTlvSourceAddress = 0x00;
inline constexpr std::uint8_t kTlvMode = 0x01;
inline constexpr std::uint8_t kTlvTimeout = 0x02;
inline constexpr std::uint8_t kTlvChallenge = 0x03;
inline constexpr std::uint8_t kTlvResponse = 0x04;
inline constexpr std::uint8_t kTlvAddress16 = 0x09;
inline constexpr std::uint8_t kTlvLeaderData = 0x0A;
inline constexpr std::uint8_t kTlvNetworkData = 0x0B;
inline constexpr std::uint8_t kTlvPrefix = 0x0C;
inline constexpr std::uint8_t kTlvServer = 0x0D;

struct Tlv;
using TlvList = std::vector<Tlv>;

// One TLV record. The payload is either raw bytes or a list of child TLVs;
// the two forms are wire-equivalent when their serializations match, and
// operator== compares serialized form, not representation.
struct Tlv {
  std::uint8_t type = 0;
  std::uint8_t declared_length = 0;
  std::variant<Bytes, TlvList> payload;

  bool has_children() const { return std::holds_alternative<TlvList>(payload); }
  const Bytes& raw() const { return std::get<Bytes>(payload); }
  Bytes& raw() { return std::get<Bytes>(payload); }
  const TlvList& children() const { return std::get<TlvList>(payload); }
  TlvList& children() { return std::get<TlvList>(payload); }

  // Actual serialized payload size in bytes (children serialized recursively).
  std::size_t payload_size() const;

  // Derived flag: declared_length matches the actual payload size.
  bool consistent() const { return declared_length == payload_size(); }

  // Nesting height of this subtree: 1 for a raw leaf.
  int height() const;
};

bool operator==(const Tlv& a, const Tlv& b);
inline bool operator!=(const Tlv& a, const Tlv& b) { return !(a == b); }

struct MlePacket {
  std::array<std::uint8_t, kSecurityHeaderSize> security_header{};
  std::uint8_t message_type = 0;
  TlvList tlvs;
};

bool operator==(const MlePacket& a, const MlePacket& b);
inline bool operator!=(const MlePacket& a, const MlePacket& b) { return !(a == b); }

class CodecError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Deterministic serialization. Declared lengths are written as stored.
// Throws CodecError if the nesting depth cap is exceeded.
Bytes encode_packet(const MlePacket& packet);

// Serialize a single TLV (header + payload), without a depth check.
Bytes encode_tlv(const Tlv& tlv);

// Strict decoder: throws CodecError on inputs shorter than 6 bytes and on
// unknown message-type codes. TLVs whose declared length overruns the buffer
// are captured as truncated raw TLVs (consistent() == false), never rejected.
MlePacket decode_packet(std::span<const std::uint8_t> bytes);

// Lenient decoder: like decode_packet but accepts unknown message-type codes.
// Used wherever fuzzed byte streams are ingested (DUT delivery, replay,
// harness payload wrapping).
MlePacket decode_packet_lenient(std::span<const std::uint8_t> bytes);

// Parse a bare TLV region (no packet header). Total for any byte string.
TlvList decode_tlvs(std::span<const std::uint8_t> bytes);

// Path into the TLV tree: child indices from the top level.
using TlvPath = std::vector<std::size_t>;

const Tlv* find_tlv(const MlePacket& packet, const TlvPath& path);
Tlv* find_tlv(MlePacket& packet, const TlvPath& path);

// Sets declared_length to the actual payload size on every ancestor of
// `path` and on the addressed TLV itself when it carries children. An empty
// path addresses the root and fixes every TLV in the tree. Lengths above 255
// saturate (declared_length is one byte). Throws std::out_of_range on an
// invalid path. Idempotent.
MlePacket recompute_parent_lengths(MlePacket packet, const TlvPath& path);

// --- TLV type registry -----------------------------------------------------

struct TlvFieldSpec {
  std::string_view name;
  std::uint32_t bit_width;  // 0 marks the variable-length tail (must be last)
};

struct TlvTypeSpec {
  std::uint8_t code;
  std::string_view name;  // snake_case, used in field paths as "<name>_tlv[i]"
  bool nestable;
  std::vector<TlvFieldSpec> layout;

  // Total bit width of the fixed (non-tail) fields.
  std::size_t fixed_bits() const;
  bool has_tail() const { return !layout.empty() && layout.back().bit_width == 0; }
};

std::span<const TlvTypeSpec> tlv_registry();
const TlvTypeSpec* find_tlv_spec(std::uint8_t code);

}  // namespace meshfuzz::mle

#endif  // MESHFUZZ_MLE_HPP_
