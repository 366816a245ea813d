// SPDX-License-Identifier: Apache-2.0
//
// Packet dissection: flattens a packet into addressable field descriptors
// (the mutation surface) and enumerates legal TLV insertion points.

#ifndef MESHFUZZ_DISSECT_HPP_
#define MESHFUZZ_DISSECT_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "meshfuzz/mle.hpp"

namespace meshfuzz {

// Variable-length tails and unknown payloads yield one descriptor per byte,
// capped so the field count (and with it p_f = k/|F_P|) stays bounded.
inline constexpr std::size_t kMaxTailDescriptors = 32;

struct FieldDescriptor {
  std::string path;        // e.g. "prefix_tlv[0].prefix_length"
  std::size_t bit_offset;  // position within the serialized packet
  std::uint32_t bit_width; // 1..64; always a multiple of 8 in the registry
  std::size_t packet_bits = 0;  // serialized size at dissection; staleness token

  // |V_f| = 2^bit_width, exact as a double for widths up to 64.
  double domain_size() const { return std::ldexp(1.0, static_cast<int>(bit_width)); }

  // Largest representable value (saturates at 2^64 - 1).
  std::uint64_t max_value() const {
    return bit_width >= 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << bit_width) - 1);
  }
};

struct DissectedPacket {
  std::uint8_t message_type = 0;
  std::vector<FieldDescriptor> fields;

  std::size_t field_count() const { return fields.size(); }
};

// One insertion slot: either a gap between top-level TLVs (empty parent
// path) or the tail of a nestable TLV's child list.
struct InsertionPoint {
  mle::TlvPath parent;  // path of the enclosing nestable TLV; empty = top level
  std::size_t index;    // insertion index among the siblings at that level
  int depth;            // nesting level an inserted TLV would occupy (1 = top)
};

class DissectError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Extracts every mutable field: the message-type byte, each TLV's own type
// and length bytes, the registry layout fields that fit the actual payload,
// and per-byte descriptors for tails, oversized remainders, and unknown
// TLV payloads.
DissectedPacket dissect(const mle::MlePacket& packet);

// For n top-level TLVs: the n+1 top-level gaps, plus one interior point per
// nestable TLV that can host children under the depth cap.
std::vector<InsertionPoint> insertion_points(const mle::MlePacket& packet);

// Field access. Values are big-endian on the wire. write_field throws
// DissectError on out-of-domain values and on stale descriptors (the packet
// structure changed since dissection).
std::uint64_t read_field(const mle::MlePacket& packet, const FieldDescriptor& field);
mle::MlePacket write_field(mle::MlePacket packet, const FieldDescriptor& field,
                           std::uint64_t value);

// Inserts a TLV at the given point; returns the updated packet and the path
// of the inserted TLV. Throws DissectError if the point no longer exists.
std::pair<mle::MlePacket, mle::TlvPath> insert_at(mle::MlePacket packet,
                                                  const InsertionPoint& point, mle::Tlv tlv);

}  // namespace meshfuzz

#endif  // MESHFUZZ_DISSECT_HPP_
