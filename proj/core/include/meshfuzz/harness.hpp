// SPDX-License-Identifier: Apache-2.0
//
// Stateful one-shot injection harness: decodes a flat fuzzer input
// (dut-type byte, state-code byte, payload), drives a fresh DUT to one of
// six attach states by replaying a pre-captured benign packet script,
// injects the wrapped payload, and observes the after-effects.

#ifndef MESHFUZZ_HARNESS_HPP_
#define MESHFUZZ_HARNESS_HPP_

#include <cstdint>
#include <optional>
#include <string>

#include "meshfuzz/dut.hpp"

namespace meshfuzz {

enum class HarnessState : std::uint8_t {
  DetachedAfterParentRequest = 0,
  DetachedAfterChildIdRequest = 1,
  Child = 2,
  ChildAfterChildUpdateRequest = 3,
  ChildAfterAddressSolicit = 4,
  Router = 5,
};

std::string_view to_string(HarnessState state);

struct HarnessInput {
  std::uint8_t dut_type_byte = 0;   // reduced mod 2: 0 = MTD, 1 = FTD
  std::uint8_t state_code_byte = 0; // reduced mod 6 (mod 4 on MTD)
  Bytes payload;

  NodeType node_type() const {
    return dut_type_byte % 2 == 0 ? NodeType::Mtd : NodeType::Ftd;
  }
  HarnessState state() const {
    std::uint8_t code = state_code_byte % 6;
    if (node_type() == NodeType::Mtd) code %= 4;  // MTDs never solicit a router id
    return static_cast<HarnessState>(code);
  }
};

class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Throws HarnessError on inputs shorter than the two control bytes.
HarnessInput parse_harness_input(std::span<const std::uint8_t> bytes);

// Prefixes the security stub and maps payload byte 0 onto a valid message
// code (direct when already valid, modulo over the code table otherwise);
// the rest of the payload becomes the TLV region verbatim. An empty payload
// yields a minimal Advertisement-coded frame.
Bytes wrap_with_mle_headers(std::span<const std::uint8_t> payload);

struct HarnessResult {
  bool reached_state = false;
  std::optional<StepOutcome> outcome;  // present only when the state was reached
  std::optional<std::string> abort_reason;
};

// Executes one harness input against a fresh node. Total for any
// well-formed input; throws HarnessError only on a corrupt fixture script.
HarnessResult harness_execute(const HarnessInput& input, bool sanitizer);

std::string harness_result_to_json(const HarnessResult& result);

// The committed benign replay script for a node type (hex-dump text; see
// PROTOCOL.md for the line grammar).
std::string_view benign_script_text(NodeType type);

// Regenerates the script from a live benign dialogue; the committed fixtures
// must match this output byte for byte.
std::string capture_benign_script(NodeType type);

}  // namespace meshfuzz

#endif  // MESHFUZZ_HARNESS_HPP_
