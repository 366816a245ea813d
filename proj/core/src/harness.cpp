// SPDX-License-Identifier: Apache-2.0
#include "meshfuzz/harness.hpp"

#include <sstream>

#include "json.hpp"

namespace meshfuzz {

namespace {

#include "benign_scripts.inc"

struct ScriptEntry {
  enum class Kind : std::uint8_t { Turn, State, Deliver, Expect } kind;
  std::uint32_t turn = 0;        // Turn
  std::uint8_t state = 0;        // State
  Bytes bytes;                   // Deliver
  NodeRole role = NodeRole::Child;  // Expect
};

std::vector<ScriptEntry> parse_script(std::string_view text) {
  std::vector<ScriptEntry> entries;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string keyword;
    fields >> keyword;
    ScriptEntry entry;
    if (keyword == "turn") {
      entry.kind = ScriptEntry::Kind::Turn;
      fields >> entry.turn;
    } else if (keyword == "state") {
      entry.kind = ScriptEntry::Kind::State;
      unsigned code = 0;
      fields >> code;
      entry.state = static_cast<std::uint8_t>(code);
    } else if (keyword == "deliver") {
      entry.kind = ScriptEntry::Kind::Deliver;
      std::string hex;
      fields >> hex;
      entry.bytes = hex_decode(hex);
    } else if (keyword == "expect") {
      entry.kind = ScriptEntry::Kind::Expect;
      std::string role;
      fields >> role;
      if (role == "child") entry.role = NodeRole::Child;
      else if (role == "router") entry.role = NodeRole::Router;
      else throw HarnessError("fixture script: unknown expect role: " + role);
    } else {
      throw HarnessError("fixture script: unknown keyword: " + keyword);
    }
    if (fields.fail()) {
      throw HarnessError("fixture script: malformed line: " + line);
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace

std::string_view to_string(HarnessState state) {
  switch (state) {
    case HarnessState::DetachedAfterParentRequest: return "DetachedAfterParentRequest";
    case HarnessState::DetachedAfterChildIdRequest: return "DetachedAfterChildIDRequest";
    case HarnessState::Child: return "Child";
    case HarnessState::ChildAfterChildUpdateRequest: return "ChildAfterChildUpdateRequest";
    case HarnessState::ChildAfterAddressSolicit: return "ChildAfterAddressSolicit";
    case HarnessState::Router: return "Router";
  }
  return "?";
}

HarnessInput parse_harness_input(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2) {
    throw HarnessError("harness input needs at least the two control bytes");
  }
  HarnessInput input;
  input.dut_type_byte = bytes[0];
  input.state_code_byte = bytes[1];
  input.payload.assign(bytes.begin() + 2, bytes.end());
  return input;
}

Bytes wrap_with_mle_headers(std::span<const std::uint8_t> payload) {
  Bytes out(mle::kSecurityHeaderSize, 0x00);
  if (payload.empty()) {
    out.push_back(mle::code_of(mle::MessageType::Advertisement));
    return out;
  }
  std::uint8_t code = payload[0];
  if (!mle::is_known_message_type(code)) {
    auto codes = mle::message_type_codes();
    code = codes[code % codes.size()];
  }
  out.push_back(code);
  out.insert(out.end(), payload.begin() + 1, payload.end());
  return out;
}

HarnessResult harness_execute(const HarnessInput& input, bool sanitizer) {
  NodeType type = input.node_type();
  std::uint8_t target = static_cast<std::uint8_t>(input.state());

  std::vector<ScriptEntry> script = parse_script(benign_script_text(type));
  bool target_found = false;
  for (const ScriptEntry& e : script) {
    if (e.kind == ScriptEntry::Kind::State && e.state == target) target_found = true;
  }
  if (!target_found) {
    throw HarnessError("fixture script lacks the requested state checkpoint");
  }

  CoverageMap map(SimNode::reachable_edge_count());
  SimNode dut(type, NodeRole::Detached, sanitizer, &map);
  dut.begin_iteration(false);

  HarnessResult result;
  bool injected = false;

  auto note_crash = [&result](const StepOutcome& outcome) {
    result.outcome = outcome;
    result.outcome->responses.clear();
  };

  for (const ScriptEntry& entry : script) {
    switch (entry.kind) {
      case ScriptEntry::Kind::Turn:
        dut.poll();  // emissions go nowhere; the script already embeds the replies
        break;
      case ScriptEntry::Kind::Deliver: {
        StepOutcome outcome = dut.step_bytes(entry.bytes);
        if (outcome.crashed()) {
          if (injected) {
            note_crash(outcome);  // after-effect crash overrides the injection outcome
            return result;
          }
          result.abort_reason = "crashed before injection: " +
                                std::string(to_string(outcome.vuln));
          return result;
        }
        break;
      }
      case ScriptEntry::Kind::State:
        if (!injected && entry.state == target) {
          result.reached_state = true;
          Bytes wrapped = wrap_with_mle_headers(input.payload);
          StepOutcome outcome = dut.step_bytes(wrapped);
          outcome.responses.clear();
          result.outcome = outcome;
          injected = true;
          if (outcome.crashed()) {
            return result;
          }
        }
        break;
      case ScriptEntry::Kind::Expect: {
        bool ok = dut.role() == entry.role ||
                  (entry.role == NodeRole::Child && dut.role() == NodeRole::Router);
        if (!ok) {
          result.abort_reason =
              entry.role == NodeRole::Child ? "not a child" : "not a Router";
          return result;
        }
        break;
      }
    }
  }
  return result;
}

std::string harness_result_to_json(const HarnessResult& result) {
  nlohmann::ordered_json j;
  j["reached_state"] = result.reached_state;
  if (result.outcome) {
    nlohmann::ordered_json outcome;
    switch (result.outcome->kind) {
      case StepOutcome::Kind::Ok: outcome["kind"] = "ok"; break;
      case StepOutcome::Kind::Silent: outcome["kind"] = "silent"; break;
      case StepOutcome::Kind::Crash:
        outcome["kind"] = "crash";
        outcome["vuln"] = std::string(to_string(result.outcome->vuln));
        outcome["crash_kind"] = std::string(to_string(result.outcome->crash_kind));
        break;
    }
    j["outcome"] = std::move(outcome);
  } else {
    j["outcome"] = nullptr;
  }
  if (result.abort_reason) {
    j["abort_reason"] = *result.abort_reason;
  }
  return j.dump(2) + "\n";
}

std::string_view benign_script_text(NodeType type) {
  return type == NodeType::Mtd ? kBenignScriptMtd : kBenignScriptFtd;
}

std::string capture_benign_script(NodeType type) {
  std::ostringstream out;
  out << "# benign " << to_string(type) << " attach script (generated; do not edit)\n";

  CoverageMap dut_map(SimNode::reachable_edge_count());
  CoverageMap gen_map(SimNode::reachable_edge_count());
  SimNode dut(type, NodeRole::Detached, false, &dut_map);
  SimNode gen(NodeType::Ftd, NodeRole::Leader, false, &gen_map);
  dut.begin_iteration(false);
  gen.begin_iteration(true);

  bool marked[6] = {false, false, false, false, false, false};
  auto mark = [&](std::uint8_t state) {
    if (!marked[state]) {
      out << "state " << static_cast<unsigned>(state) << "\n";
      marked[state] = true;
    }
  };

  constexpr std::uint32_t kCaptureTurns = 14;
  for (std::uint32_t turn = 0; turn < kCaptureTurns; ++turn) {
    out << "turn " << turn << "\n";
    gen.poll();
    std::vector<mle::MlePacket> spontaneous = dut.poll();
    for (const mle::MlePacket& p : spontaneous) {
      switch (static_cast<mle::MessageType>(p.message_type)) {
        case mle::MessageType::ParentRequest: mark(0); break;
        case mle::MessageType::ChildUpdateRequest: mark(3); break;
        case mle::MessageType::AddressSolicit: mark(4); break;
        default: break;
      }
      gen.step(p);
    }
    while (auto outbound = gen.generate_next()) {
      Bytes bytes = mle::encode_packet(*outbound);
      out << "deliver " << hex_encode(bytes) << "\n";
      StepOutcome outcome = dut.step_bytes(bytes);
      switch (static_cast<mle::MessageType>(outbound->message_type)) {
        case mle::MessageType::ParentResponse:
          mark(1);
          break;
        case mle::MessageType::ChildIdResponse:
          out << "expect child\n";
          mark(2);
          break;
        case mle::MessageType::AddressSolicitResponse:
          out << "expect router\n";
          break;
        case mle::MessageType::LinkAccept:
          mark(5);
          break;
        default:
          break;
      }
      for (const mle::MlePacket& response : outcome.responses) {
        gen.step(response);
      }
    }
  }
  return out.str();
}

}  // namespace meshfuzz
