// SPDX-License-Identifier: Apache-2.0
//
// Regenerates the committed benign replay scripts (benign_scripts.inc).
// Usage: meshfuzz-genfixtures > core/src/benign_scripts.inc

#include <iostream>

#include "meshfuzz/harness.hpp"

namespace {

void emit(std::string_view name, const std::string& text) {
  std::cout << "constexpr std::string_view " << name << " =\n";
  std::string line;
  for (char c : text) {
    if (c == '\n') {
      std::cout << "    \"" << line << "\\n\"\n";
      line.clear();
    } else {
      line.push_back(c);
    }
  }
  if (!line.empty()) {
    std::cout << "    \"" << line << "\\n\"\n";
  }
  std::cout << "    ;\n";
}

}  // namespace

int main() {
  std::cout << "// Generated by `meshfuzz-genfixtures`; do not edit by hand.\n";
  emit("kBenignScriptMtd", meshfuzz::capture_benign_script(meshfuzz::NodeType::Mtd));
  emit("kBenignScriptFtd", meshfuzz::capture_benign_script(meshfuzz::NodeType::Ftd));
  return 0;
}
