// SPDX-License-Identifier: Apache-2.0
#include "meshfuzz/dissect.hpp"

#include <algorithm>
#include <map>

namespace meshfuzz {

using mle::MlePacket;
using mle::Tlv;
using mle::TlvList;
using mle::TlvPath;
using mle::TlvTypeSpec;

namespace {

std::string tlv_base_name(const Tlv& tlv) {
  const TlvTypeSpec* spec = mle::find_tlv_spec(tlv.type);
  if (spec != nullptr) {
    return std::string(spec->name) + "_tlv";
  }
  char buf[16];
  std::snprintf(buf, sizeof(buf), "tlv_0x%02x", tlv.type);
  return buf;
}

struct Walker {
  std::vector<FieldDescriptor> fields;
  std::size_t bit_offset = 0;

  void add(std::string path, std::uint32_t bit_width) {
    fields.push_back({std::move(path), bit_offset, bit_width});
    bit_offset += bit_width;
  }

  void skip_bits(std::size_t bits) { bit_offset += bits; }

  void walk_list(const TlvList& tlvs, const std::string& prefix) {
    std::map<std::string, std::size_t> occurrence;
    for (const Tlv& tlv : tlvs) {
      std::string base = tlv_base_name(tlv);
      std::size_t idx = occurrence[base]++;
      std::string seg = prefix + base + "[" + std::to_string(idx) + "]";
      add(seg + ".tlv_type", 8);
      add(seg + ".tlv_length", 8);
      if (tlv.has_children()) {
        walk_list(tlv.children(), seg + ".");
        continue;
      }
      walk_raw_payload(tlv, seg);
    }
  }

  void walk_raw_payload(const Tlv& tlv, const std::string& seg) {
    const Bytes& raw = tlv.raw();
    const TlvTypeSpec* spec = mle::find_tlv_spec(tlv.type);
    std::size_t consumed = 0;  // bytes of payload already described
    if (spec != nullptr) {
      for (const mle::TlvFieldSpec& f : spec->layout) {
        if (f.bit_width == 0) {
          // Variable-length tail: one descriptor per byte, capped.
          std::size_t tail = raw.size() - consumed;
          per_byte(seg + "." + std::string(f.name), consumed, tail, /*named_tail=*/true);
          consumed = raw.size();
          break;
        }
        std::size_t bytes_needed = f.bit_width / 8;
        if (consumed + bytes_needed > raw.size()) {
          break;  // truncated layout; remainder handled below
        }
        add(seg + "." + std::string(f.name), f.bit_width);
        consumed += bytes_needed;
      }
    }
    if (consumed < raw.size()) {
      // Unknown payload, truncated layout remainder, or bytes beyond a
      // fixed layout. Indexed by absolute payload byte position.
      per_byte(seg + ".byte", consumed, raw.size() - consumed, /*named_tail=*/false);
    }
  }

  void per_byte(const std::string& base, std::size_t start_byte, std::size_t count,
                bool named_tail) {
    std::size_t described = std::min(count, kMaxTailDescriptors);
    for (std::size_t j = 0; j < described; ++j) {
      std::size_t index = named_tail ? j : start_byte + j;
      add(base + "[" + std::to_string(index) + "]", 8);
    }
    skip_bits((count - described) * 8);
  }
};

void collect_interior_points(const TlvList& tlvs, TlvPath& path, int level,
                             std::vector<InsertionPoint>& out) {
  for (std::size_t i = 0; i < tlvs.size(); ++i) {
    const Tlv& tlv = tlvs[i];
    const TlvTypeSpec* spec = mle::find_tlv_spec(tlv.type);
    bool can_host = spec != nullptr && spec->nestable &&
                    (tlv.has_children() || tlv.raw().empty());
    path.push_back(i);
    if (can_host && level + 1 <= mle::kMaxNestingDepth) {
      std::size_t end = tlv.has_children() ? tlv.children().size() : 0;
      out.push_back({path, end, level + 1});
    }
    if (tlv.has_children()) {
      collect_interior_points(tlv.children(), path, level + 1, out);
    }
    path.pop_back();
  }
}

void check_extent(const Bytes& bytes, const FieldDescriptor& field) {
  if (field.bit_offset % 8 != 0 || field.bit_width % 8 != 0) {
    throw DissectError("field extent is not byte-aligned");
  }
  if (field.packet_bits != 0 && field.packet_bits != bytes.size() * 8) {
    throw DissectError("stale descriptor: packet structure changed since dissection");
  }
  if (field.bit_offset + field.bit_width > bytes.size() * 8) {
    throw DissectError("stale descriptor: extent beyond current packet size");
  }
}

}  // namespace

DissectedPacket dissect(const MlePacket& packet) {
  DissectedPacket out;
  out.message_type = packet.message_type;
  Walker walker;
  walker.skip_bits(mle::kSecurityHeaderSize * 8);
  walker.add("message_type", 8);
  walker.walk_list(packet.tlvs, "");
  out.fields = std::move(walker.fields);
  for (FieldDescriptor& f : out.fields) {
    f.packet_bits = walker.bit_offset;
  }
  return out;
}

std::vector<InsertionPoint> insertion_points(const MlePacket& packet) {
  std::vector<InsertionPoint> out;
  for (std::size_t i = 0; i <= packet.tlvs.size(); ++i) {
    out.push_back({{}, i, 1});
  }
  TlvPath path;
  collect_interior_points(packet.tlvs, path, 1, out);
  return out;
}

std::uint64_t read_field(const MlePacket& packet, const FieldDescriptor& field) {
  Bytes bytes = mle::encode_packet(packet);
  check_extent(bytes, field);
  std::uint64_t value = 0;
  std::size_t first = field.bit_offset / 8;
  std::size_t nbytes = field.bit_width / 8;
  for (std::size_t i = 0; i < nbytes; ++i) {
    value = value << 8 | bytes[first + i];
  }
  return value;
}

MlePacket write_field(MlePacket packet, const FieldDescriptor& field, std::uint64_t value) {
  if (field.bit_width < 64 && value > field.max_value()) {
    throw DissectError("write_field: value out of field domain");
  }
  Bytes bytes = mle::encode_packet(packet);
  check_extent(bytes, field);
  std::size_t first = field.bit_offset / 8;
  std::size_t nbytes = field.bit_width / 8;
  for (std::size_t i = 0; i < nbytes; ++i) {
    bytes[first + nbytes - 1 - i] = static_cast<std::uint8_t>(value >> (8 * i));
  }
  return mle::decode_packet_lenient(bytes);
}

std::pair<MlePacket, TlvPath> insert_at(MlePacket packet, const InsertionPoint& point,
                                        Tlv tlv) {
  if (point.parent.empty()) {
    if (point.index > packet.tlvs.size()) {
      throw DissectError("insert_at: stale top-level insertion point");
    }
    packet.tlvs.insert(packet.tlvs.begin() + static_cast<std::ptrdiff_t>(point.index),
                       std::move(tlv));
    return {std::move(packet), TlvPath{point.index}};
  }
  Tlv* parent = mle::find_tlv(packet, point.parent);
  if (parent == nullptr) {
    throw DissectError("insert_at: stale interior insertion point");
  }
  if (!parent->has_children()) {
    if (!parent->raw().empty()) {
      throw DissectError("insert_at: interior point targets a raw payload");
    }
    parent->payload = TlvList{};
  }
  TlvList& children = parent->children();
  if (point.index > children.size()) {
    throw DissectError("insert_at: stale interior insertion point");
  }
  children.insert(children.begin() + static_cast<std::ptrdiff_t>(point.index), std::move(tlv));
  TlvPath path = point.parent;
  path.push_back(point.index);
  return {std::move(packet), std::move(path)};
}

}  // namespace meshfuzz
