// SPDX-License-Identifier: Apache-2.0
//
// Campaign configuration files, report/crash artifacts, and their schemas.
// All emitted documents are validated against the documented shapes before
// they reach disk; all serialization is deterministic (ordered keys), so
// identical campaigns produce byte-identical artifacts.

#ifndef MESHFUZZ_CONFIG_HPP_
#define MESHFUZZ_CONFIG_HPP_

#include <filesystem>
#include <string>

#include "meshfuzz/coordinator.hpp"

namespace meshfuzz {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Config files (see PROTOCOL.md for the key tree).
CampaignConfig load_campaign_config(const std::filesystem::path& path);
CampaignConfig parse_campaign_config(const std::string& json_text);
std::string campaign_config_to_json(const CampaignConfig& config);

// Fingerprint of everything but the seed; reports with different
// fingerprints must not be aggregated.
std::string config_fingerprint(const CampaignConfig& config);

// Artifact serialization. Serializers validate against the schema and throw
// ConfigError on malformed documents.
std::string crash_record_to_json(const CrashRecord& record);
CrashRecord parse_crash_record(const std::string& json_text);
CrashRecord load_crash_record(const std::filesystem::path& path);

std::string report_to_json(const CampaignConfig& config, const CampaignReport& report);
std::string coverage_curve_csv(const CampaignReport& report);

// Writes report.json, coverage.csv and crash_<iter>_<vuln>.json files.
void write_campaign_artifacts(const CampaignConfig& config, const CampaignReport& report);

// Aggregated view of one parsed report, as needed by `report` aggregation.
struct LoadedReport {
  std::string fingerprint;
  std::uint64_t iterations = 0;
  double mean_packets_per_iteration = 0.0;
  double coverage_fraction = 0.0;
  std::map<VulnId, VulnStats> vulns;
  std::vector<std::pair<std::uint64_t, double>> curve;  // iteration -> fraction
};

LoadedReport load_report(const std::filesystem::path& path);

}  // namespace meshfuzz

#endif  // MESHFUZZ_CONFIG_HPP_
