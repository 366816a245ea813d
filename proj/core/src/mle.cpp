// SPDX-License-Identifier: Apache-2.0
#include "meshfuzz/mle.hpp"

#include <algorithm>

namespace meshfuzz::mle {

namespace {

constexpr std::uint8_t kMessageCodes[] = {
    0x00, 0x02, 0x03, 0x07, 0x08, 0x09, 0x0A,
    0x0B, 0x0C, 0x0D, 0x0E, 0x10, 0x11,
};

void append_tlv(Bytes& out, const Tlv& tlv) {
  out.push_back(tlv.type);
  out.push_back(tlv.declared_length);
  if (tlv.has_children()) {
    for (const Tlv& child : tlv.children()) {
      append_tlv(out, child);
    }
  } else {
    const Bytes& raw = tlv.raw();
    out.insert(out.end(), raw.begin(), raw.end());
  }
}

void check_depth(const Tlv& tlv, int depth) {
  if (depth > kMaxNestingDepth) {
    throw CodecError("encode_packet: TLV nesting depth exceeds cap");
  }
  if (tlv.has_children()) {
    for (const Tlv& child : tlv.children()) {
      check_depth(child, depth + 1);
    }
  }
}

// Tries to parse `bytes` as an exactly-consuming sequence of well-formed
// TLVs (no truncation, no trailing fragment). Children of nestable types are
// parsed back recursively under the depth cap. Returns nothing on any
// mismatch, in which case the payload stays raw.
std::optional<TlvList> try_parse_children(std::span<const std::uint8_t> bytes, int depth);

Tlv parse_one(std::uint8_t type, std::uint8_t declared, std::span<const std::uint8_t> payload,
              int depth) {
  Tlv tlv;
  tlv.type = type;
  tlv.declared_length = declared;
  const TlvTypeSpec* spec = find_tlv_spec(type);
  if (spec != nullptr && spec->nestable && depth < kMaxNestingDepth && !payload.empty()) {
    if (auto children = try_parse_children(payload, depth + 1)) {
      tlv.payload = std::move(*children);
      return tlv;
    }
  }
  tlv.payload = Bytes(payload.begin(), payload.end());
  return tlv;
}

std::optional<TlvList> try_parse_children(std::span<const std::uint8_t> bytes, int depth) {
  TlvList out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < 2) {
      return std::nullopt;  // trailing fragment
    }
    std::uint8_t type = bytes[pos];
    std::uint8_t len = bytes[pos + 1];
    pos += 2;
    if (len > bytes.size() - pos) {
      return std::nullopt;  // truncated child
    }
    out.push_back(parse_one(type, len, bytes.subspan(pos, len), depth));
    pos += len;
  }
  return out;
}

// Lenient top-level TLV region parse: truncated TLVs are captured with
// whatever payload bytes remain, a trailing lone byte becomes a zero-length
// TLV of that type.
TlvList parse_region(std::span<const std::uint8_t> bytes) {
  TlvList out;
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    std::uint8_t type = bytes[pos];
    if (bytes.size() - pos < 2) {
      Tlv frag;
      frag.type = type;
      frag.declared_length = 0;
      frag.payload = Bytes{};
      out.push_back(std::move(frag));
      break;
    }
    std::uint8_t len = bytes[pos + 1];
    pos += 2;
    std::size_t take = std::min<std::size_t>(len, bytes.size() - pos);
    out.push_back(parse_one(type, len, bytes.subspan(pos, take), 1));
    pos += take;
  }
  return out;
}

MlePacket decode_impl(std::span<const std::uint8_t> bytes, bool strict) {
  if (bytes.size() < kMinPacketSize) {
    throw CodecError("decode_packet: input shorter than 6 bytes");
  }
  MlePacket packet;
  std::copy_n(bytes.begin(), kSecurityHeaderSize, packet.security_header.begin());
  packet.message_type = bytes[kSecurityHeaderSize];
  if (strict && !is_known_message_type(packet.message_type)) {
    throw CodecError("decode_packet: unknown message-type code");
  }
  packet.tlvs = parse_region(bytes.subspan(kMinPacketSize));
  return packet;
}

}  // namespace

std::span<const std::uint8_t> message_type_codes() {
  return {kMessageCodes, std::size(kMessageCodes)};
}

bool is_known_message_type(std::uint8_t code) {
  for (std::uint8_t c : kMessageCodes) {
    if (c == code) return true;
  }
  return false;
}

std::string_view message_type_name(std::uint8_t code) {
  switch (static_cast<MessageType>(code)) {
    case MessageType::Advertisement: return "advertisement";
    case MessageType::LinkRequest: return "link_request";
    case MessageType::LinkAccept: return "link_accept";
    case MessageType::DataRequest: return "data_request";
    case MessageType::DataResponse: return "data_response";
    case MessageType::ParentRequest: return "parent_request";
    case MessageType::ParentResponse: return "parent_response";
    case MessageType::ChildIdRequest: return "child_id_request";
    case MessageType::ChildIdResponse: return "child_id_response";
    case MessageType::ChildUpdateRequest: return "child_update_request";
    case MessageType::ChildUpdateResponse: return "child_update_response";
    case MessageType::AddressSolicit: return "address_solicit";
    case MessageType::AddressSolicitResponse: return "address_solicit_response";
  }
  return "unknown";
}

std::size_t Tlv::payload_size() const {
  if (!has_children()) {
    return raw().size();
  }
  std::size_t total = 0;
  for (const Tlv& child : children()) {
    total += 2 + child.payload_size();
  }
  return total;
}

int Tlv::height() const {
  if (!has_children()) return 1;
  int deepest = 0;
  for (const Tlv& child : children()) {
    deepest = std::max(deepest, child.height());
  }
  return 1 + deepest;
}

Bytes encode_tlv(const Tlv& tlv) {
  Bytes out;
  append_tlv(out, tlv);
  return out;
}

bool operator==(const Tlv& a, const Tlv& b) {
  if (a.type != b.type || a.declared_length != b.declared_length) return false;
  return encode_tlv(a) == encode_tlv(b);
}

bool operator==(const MlePacket& a, const MlePacket& b) {
  if (a.security_header != b.security_header || a.message_type != b.message_type) return false;
  if (a.tlvs.size() != b.tlvs.size()) return false;
  for (std::size_t i = 0; i < a.tlvs.size(); ++i) {
    if (a.tlvs[i] != b.tlvs[i]) return false;
  }
  return true;
}

Bytes encode_packet(const MlePacket& packet) {
  for (const Tlv& tlv : packet.tlvs) {
    check_depth(tlv, 1);
  }
  Bytes out;
  out.insert(out.end(), packet.security_header.begin(), packet.security_header.end());
  out.push_back(packet.message_type);
  for (const Tlv& tlv : packet.tlvs) {
    append_tlv(out, tlv);
  }
  return out;
}

MlePacket decode_packet(std::span<const std::uint8_t> bytes) {
  return decode_impl(bytes, /*strict=*/true);
}

MlePacket decode_packet_lenient(std::span<const std::uint8_t> bytes) {
  return decode_impl(bytes, /*strict=*/false);
}

TlvList decode_tlvs(std::span<const std::uint8_t> bytes) { return parse_region(bytes); }

const Tlv* find_tlv(const MlePacket& packet, const TlvPath& path) {
  const TlvList* list = &packet.tlvs;
  const Tlv* node = nullptr;
  for (std::size_t i = 0; i < path.size(); ++i) {
    std::size_t index = path[i];
    if (index >= list->size()) return nullptr;
    node = &(*list)[index];
    if (i + 1 < path.size()) {
      if (!node->has_children()) return nullptr;  // path descends into a raw payload
      list = &node->children();
    }
  }
  return node;
}

Tlv* find_tlv(MlePacket& packet, const TlvPath& path) {
  return const_cast<Tlv*>(find_tlv(static_cast<const MlePacket&>(packet), path));
}

namespace {

void fix_all(Tlv& tlv) {
  if (tlv.has_children()) {
    for (Tlv& child : tlv.children()) {
      fix_all(child);
    }
  }
  tlv.declared_length =
      static_cast<std::uint8_t>(std::min<std::size_t>(tlv.payload_size(), 255));
}

}  // namespace

MlePacket recompute_parent_lengths(MlePacket packet, const TlvPath& path) {
  if (path.empty()) {
    for (Tlv& tlv : packet.tlvs) {
      fix_all(tlv);
    }
    return packet;
  }
  if (find_tlv(packet, path) == nullptr) {
    throw std::out_of_range("recompute_parent_lengths: invalid TLV path");
  }
  // Fix ancestors bottom-up so each parent sees updated child lengths.
  for (std::size_t depth = path.size() - 1; depth > 0; --depth) {
    TlvPath prefix(path.begin(), path.begin() + static_cast<std::ptrdiff_t>(depth));
    Tlv* ancestor = find_tlv(packet, prefix);
    ancestor->declared_length =
        static_cast<std::uint8_t>(std::min<std::size_t>(ancestor->payload_size(), 255));
  }
  return packet;
}

namespace {

const std::vector<TlvTypeSpec>& registry() {
  static const std::vector<TlvTypeSpec> kRegistry = {
      {kTlvSourceAddress, "source_address", false, {{"addr16", 16}}},
      {kTlvMode, "mode", false, {{"mode", 8}}},
      {kTlvTimeout, "timeout", false, {{"timeout", 32}}},
      {kTlvChallenge, "challenge", false, {{"bytes", 64}}},
      {kTlvResponse, "response", false, {{"bytes", 64}}},
      {kTlvAddress16, "address16", false, {{"addr16", 16}}},
      {kTlvLeaderData,
       "leader_data",
       false,
       {{"partition_id", 32},
        {"weighting", 8},
        {"data_version", 8},
        {"stable_version", 8},
        {"leader_id", 8}}},
      {kTlvNetworkData, "network_data", true, {{"data", 0}}},
      {kTlvPrefix, "prefix", true, {{"prefix_length", 8}, {"prefix", 0}}},
      {kTlvServer, "server", false, {{"server16", 16}, {"data", 0}}},
  };
  return kRegistry;
}

}  // namespace

std::size_t TlvTypeSpec::fixed_bits() const {
  std::size_t total = 0;
  for (const TlvFieldSpec& f : layout) {
    total += f.bit_width;
  }
  return total;
}

std::span<const TlvTypeSpec> tlv_registry() {
  return {registry().data(), registry().size()};
}

const TlvTypeSpec* find_tlv_spec(std::uint8_t code) {
  for (const TlvTypeSpec& spec : registry()) {
    if (spec.code == code) return &spec;
  }
  return nullptr;
}

}  // namespace meshfuzz::mle
