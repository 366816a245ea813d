// SPDX-License-Identifier: Apache-2.0
#include "meshfuzz/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace meshfuzz {

using ordered_json = nlohmann::ordered_json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ConfigError("cannot open " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ConfigError("cannot write " + path.string());
  }
  out << content;
}

std::string kind_to_string(EngineKind kind) {
  switch (kind) {
    case EngineKind::Random: return "random";
    case EngineKind::CoverageGrey: return "coverage_grey";
    case EngineKind::CoverageBlack: return "coverage_black";
    case EngineKind::TlvInserter: return "tlv_inserter";
    case EngineKind::Directed: return "directed";
  }
  return "random";
}

EngineKind kind_from_string(const std::string& s) {
  if (s == "random") return EngineKind::Random;
  if (s == "coverage_grey") return EngineKind::CoverageGrey;
  if (s == "coverage_black") return EngineKind::CoverageBlack;
  if (s == "tlv_inserter") return EngineKind::TlvInserter;
  if (s == "directed") return EngineKind::Directed;
  throw ConfigError("unknown fuzzer kind: " + s);
}

ordered_json chain_to_json(const FuzzerChain& chain) {
  ordered_json fuzzers = ordered_json::array();
  for (const EngineConfig& e : chain.engines) {
    ordered_json j;
    j["kind"] = kind_to_string(e.kind);
    switch (e.kind) {
      case EngineKind::Random:
        j["k"] = e.k;
        break;
      case EngineKind::CoverageGrey:
      case EngineKind::CoverageBlack:
        j["k"] = e.k;
        j["beta"] = e.beta;
        j["warm_i"] = e.warm_i;
        if (!e.adapt) j["adapt"] = false;
        break;
      case EngineKind::TlvInserter:
        j["gamma"] = e.gamma;
        j["q"] = e.q;
        break;
      case EngineKind::Directed:
        j["message"] = e.directed_message;
        j["path"] = e.directed_path;
        j["value"] = e.directed_value;
        if (!e.directed_iterations.empty()) j["iterations"] = e.directed_iterations;
        break;
    }
    fuzzers.push_back(std::move(j));
  }
  return fuzzers;
}

FuzzerChain chain_from_json(const ordered_json& fuzzers) {
  if (!fuzzers.is_array()) {
    throw ConfigError("config: \"fuzzers\" must be an array");
  }
  FuzzerChain chain;
  for (const auto& j : fuzzers) {
    if (!j.contains("kind")) {
      throw ConfigError("config: fuzzer entry missing \"kind\"");
    }
    EngineConfig e;
    e.kind = kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("k")) e.k = j.at("k").get<double>();
    if (j.contains("beta")) e.beta = j.at("beta").get<double>();
    if (j.contains("warm_i")) e.warm_i = j.at("warm_i").get<std::uint64_t>();
    if (j.contains("gamma")) e.gamma = j.at("gamma").get<double>();
    if (j.contains("q")) e.q = j.at("q").get<double>();
    if (j.contains("adapt")) e.adapt = j.at("adapt").get<bool>();
    if (e.kind == EngineKind::Directed) {
      e.directed_message = j.at("message").get<std::uint8_t>();
      e.directed_path = j.at("path").get<std::string>();
      e.directed_value = j.at("value").get<std::uint64_t>();
      if (j.contains("iterations")) {
        e.directed_iterations = j.at("iterations").get<std::vector<std::uint64_t>>();
      }
    }
    chain.engines.push_back(std::move(e));
  }
  return chain;
}

ordered_json config_to_json_doc(const CampaignConfig& config) {
  ordered_json j;
  j["fuzzers"] = chain_to_json(config.chain);
  j["dut"] = {{"type", std::string(to_string(config.dut_type))},
              {"sanitizer", config.sanitizer},
              {"v3_leader_data_prob", config.v3_leader_data_prob}};
  j["budget"] = config.iteration_budget;
  j["iterations"] = config.max_iterations;
  j["seed"] = config.seed;
  j["mode"] =
      config.mode == CampaignMode::PhysicalEpoch ? "physical_epoch" : "simulated";
  j["epoch_size"] = config.epoch_size;
  return j;
}

DutStateSnapshot snapshot_from_json(const ordered_json& j) {
  DutStateSnapshot s;
  std::string role = j.at("role").get<std::string>();
  if (role == "child") s.role = NodeRole::Child;
  else if (role == "router") s.role = NodeRole::Router;
  else if (role == "leader") s.role = NodeRole::Leader;
  else s.role = NodeRole::Detached;
  s.reboot_count = j.at("reboot_count").get<std::uint64_t>();
  s.leader_data_present = j.at("leader_data_present").get<bool>();
  s.solicit_window = j.at("solicit_window").get<bool>();
  s.tick = j.at("tick").get<std::uint32_t>();
  return s;
}

void validate_crash_doc(const ordered_json& j) {
  const char* required[] = {"schema", "iteration",  "campaign_seed", "iteration_seed",
                            "vuln",   "kind",       "dut",           "state_at_crash",
                            "packets"};
  for (const char* key : required) {
    if (!j.contains(key)) {
      throw ConfigError(std::string("crash record: missing key \"") + key + "\"");
    }
  }
  if (j.at("schema").get<std::string>() != "meshfuzz-crash-v1") {
    throw ConfigError("crash record: unsupported schema");
  }
  if (!j.at("packets").is_array()) {
    throw ConfigError("crash record: \"packets\" must be an array");
  }
  for (const auto& p : j.at("packets")) {
    if (!p.contains("turn") || !p.contains("hex")) {
      throw ConfigError("crash record: packet entries need \"turn\" and \"hex\"");
    }
  }
  if (!parse_vuln(j.at("vuln").get<std::string>())) {
    throw ConfigError("crash record: unknown vuln id");
  }
  if (!parse_crash_kind(j.at("kind").get<std::string>())) {
    throw ConfigError("crash record: unknown crash kind");
  }
}

void validate_report_doc(const ordered_json& j) {
  const char* required[] = {"schema", "config", "summary", "vulns", "iterations_log"};
  for (const char* key : required) {
    if (!j.contains(key)) {
      throw ConfigError(std::string("report: missing key \"") + key + "\"");
    }
  }
  if (j.at("schema").get<std::string>() != "meshfuzz-report-v1") {
    throw ConfigError("report: unsupported schema");
  }
  const ordered_json& summary = j.at("summary");
  for (const char* key : {"iterations", "crashes", "cumulative_edges", "reachable_edges",
                          "coverage_fraction", "sum_c_i"}) {
    if (!summary.contains(key)) {
      throw ConfigError(std::string("report summary: missing key \"") + key + "\"");
    }
  }
  if (!j.at("iterations_log").is_array()) {
    throw ConfigError("report: \"iterations_log\" must be an array");
  }
}

}  // namespace

CampaignConfig parse_campaign_config(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  CampaignConfig config;
  if (j.contains("fuzzers")) config.chain = chain_from_json(j.at("fuzzers"));
  if (j.contains("dut")) {
    const ordered_json& dut = j.at("dut");
    if (dut.contains("type")) {
      auto type = parse_node_type(dut.at("type").get<std::string>());
      if (!type) throw ConfigError("config: dut.type must be \"mtd\" or \"ftd\"");
      config.dut_type = *type;
    }
    if (dut.contains("sanitizer")) config.sanitizer = dut.at("sanitizer").get<bool>();
    if (dut.contains("v3_leader_data_prob")) {
      config.v3_leader_data_prob = dut.at("v3_leader_data_prob").get<double>();
    }
  }
  if (j.contains("budget")) config.iteration_budget = j.at("budget").get<std::uint32_t>();
  if (j.contains("iterations")) {
    config.max_iterations = j.at("iterations").get<std::uint64_t>();
  }
  if (j.contains("seed")) config.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("mode")) {
    std::string mode = j.at("mode").get<std::string>();
    if (mode == "simulated") config.mode = CampaignMode::Simulated;
    else if (mode == "physical_epoch") config.mode = CampaignMode::PhysicalEpoch;
    else throw ConfigError("config: mode must be \"simulated\" or \"physical_epoch\"");
  }
  if (j.contains("epoch_size")) config.epoch_size = j.at("epoch_size").get<std::uint32_t>();
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return config;
}

CampaignConfig load_campaign_config(const std::filesystem::path& path) {
  return parse_campaign_config(read_file(path));
}

std::string campaign_config_to_json(const CampaignConfig& config) {
  return config_to_json_doc(config).dump(2) + "\n";
}

std::string config_fingerprint(const CampaignConfig& config) {
  ordered_json j = config_to_json_doc(config);
  j.erase("seed");
  return j.dump();
}

std::string crash_record_to_json(const CrashRecord& record) {
  ordered_json j;
  j["schema"] = "meshfuzz-crash-v1";
  j["iteration"] = record.iteration;
  j["campaign_seed"] = record.campaign_seed;
  j["iteration_seed"] = record.iteration_seed;
  j["vuln"] = std::string(to_string(record.vuln));
  j["kind"] = std::string(to_string(record.kind));
  j["dut"] = {{"type", std::string(to_string(record.node_type))},
              {"sanitizer", record.sanitizer},
              {"leader_data_present", record.leader_data_present}};
  j["state_at_crash"] = {{"role", std::string(to_string(record.state_at_crash.role))},
                         {"reboot_count", record.state_at_crash.reboot_count},
                         {"leader_data_present", record.state_at_crash.leader_data_present},
                         {"solicit_window", record.state_at_crash.solicit_window},
                         {"tick", record.state_at_crash.tick}};
  ordered_json packets = ordered_json::array();
  for (const DeliveredPacket& p : record.packets) {
    packets.push_back({{"turn", p.turn}, {"hex", hex_encode(p.bytes)}});
  }
  j["packets"] = std::move(packets);
  validate_crash_doc(j);
  return j.dump(2) + "\n";
}

CrashRecord parse_crash_record(const std::string& json_text) {
  ordered_json j;
  try {
    j = ordered_json::parse(json_text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("crash record parse error: ") + e.what());
  }
  validate_crash_doc(j);
  CrashRecord record;
  record.iteration = j.at("iteration").get<std::uint64_t>();
  record.campaign_seed = j.at("campaign_seed").get<std::uint64_t>();
  record.iteration_seed = j.at("iteration_seed").get<std::uint64_t>();
  record.vuln = *parse_vuln(j.at("vuln").get<std::string>());
  record.kind = *parse_crash_kind(j.at("kind").get<std::string>());
  const ordered_json& dut = j.at("dut");
  auto type = parse_node_type(dut.at("type").get<std::string>());
  if (!type) throw ConfigError("crash record: unknown dut type");
  record.node_type = *type;
  record.sanitizer = dut.at("sanitizer").get<bool>();
  record.leader_data_present = dut.at("leader_data_present").get<bool>();
  record.state_at_crash = snapshot_from_json(j.at("state_at_crash"));
  for (const auto& p : j.at("packets")) {
    record.packets.push_back(
        {p.at("turn").get<std::uint32_t>(), hex_decode(p.at("hex").get<std::string>())});
  }
  return record;
}

CrashRecord load_crash_record(const std::filesystem::path& path) {
  return parse_crash_record(read_file(path));
}

std::string report_to_json(const CampaignConfig& config, const CampaignReport& report) {
  ordered_json j;
  j["schema"] = "meshfuzz-report-v1";
  j["config"] = config_to_json_doc(config);
  j["summary"] = {{"iterations", report.iterations.size()},
                  {"crashes", report.crashes.size()},
                  {"cumulative_edges", report.cumulative_edges},
                  {"reachable_edges", report.reachable_edges},
                  {"coverage_fraction", report.coverage_fraction},
                  {"sum_c_i", report.sum_c_i}};
  ordered_json vulns;
  for (VulnId v : {VulnId::V1, VulnId::V2, VulnId::V3, VulnId::V4, VulnId::V5, VulnId::V6}) {
    auto it = report.vulns.find(v);
    ordered_json entry = {{"first_hit", it == report.vulns.end() ? 0 : it->second.first_hit},
                          {"hits", it == report.vulns.end() ? 0 : it->second.hits}};
    vulns[std::string(to_string(v))] = std::move(entry);
  }
  j["vulns"] = std::move(vulns);
  ordered_json rows = ordered_json::array();
  for (const IterationRow& row : report.iterations) {
    ordered_json r;
    r["i"] = row.iteration;
    r["c"] = row.c_i;
    r["packets"] = row.packets;
    r["role"] = std::string(to_string(row.final_role));
    r["crashes"] = row.crash_count;
    if (row.vuln) {
      r["vuln"] = std::string(to_string(*row.vuln));
      r["kind"] = std::string(to_string(*row.kind));
    }
    rows.push_back(std::move(r));
  }
  j["iterations_log"] = std::move(rows);
  validate_report_doc(j);
  return j.dump(2) + "\n";
}

std::string coverage_curve_csv(const CampaignReport& report) {
  std::ostringstream out;
  out << "iteration,cumulative_edges,coverage_fraction,c_i\n";
  std::size_t cumulative = 0;
  double reachable = static_cast<double>(report.reachable_edges);
  for (const IterationRow& row : report.iterations) {
    cumulative += row.c_i;
    out << row.iteration << ',' << cumulative << ','
        << (reachable > 0 ? static_cast<double>(cumulative) / reachable : 0.0) << ','
        << row.c_i << '\n';
  }
  return out.str();
}

void write_campaign_artifacts(const CampaignConfig& config, const CampaignReport& report) {
  std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);
  write_file(dir / "report.json", report_to_json(config, report));
  write_file(dir / "coverage.csv", coverage_curve_csv(report));
  for (const CrashRecord& record : report.crashes) {
    std::string name = "crash_" + std::to_string(record.iteration) + "_" +
                       std::string(to_string(record.vuln)) + ".json";
    write_file(dir / name, crash_record_to_json(record));
  }
}

LoadedReport load_report(const std::filesystem::path& path) {
  ordered_json j;
  try {
    j = ordered_json::parse(read_file(path));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("report parse error: ") + e.what());
  }
  validate_report_doc(j);
  LoadedReport report;
  ordered_json config = j.at("config");
  config.erase("seed");
  report.fingerprint = config.dump();
  report.iterations = j.at("summary").at("iterations").get<std::uint64_t>();
  report.coverage_fraction = j.at("summary").at("coverage_fraction").get<double>();
  std::uint64_t total_packets = 0;
  std::size_t cumulative = 0;
  double reachable = j.at("summary").at("reachable_edges").get<double>();
  for (const auto& row : j.at("iterations_log")) {
    total_packets += row.at("packets").get<std::uint64_t>();
    cumulative += row.at("c").get<std::size_t>();
    report.curve.emplace_back(row.at("i").get<std::uint64_t>(),
                              reachable > 0 ? static_cast<double>(cumulative) / reachable
                                            : 0.0);
  }
  if (report.iterations > 0) {
    report.mean_packets_per_iteration =
        static_cast<double>(total_packets) / static_cast<double>(report.iterations);
  }
  for (const auto& [name, entry] : j.at("vulns").items()) {
    auto vuln = parse_vuln(name);
    if (!vuln) continue;
    VulnStats stats;
    stats.first_hit = entry.at("first_hit").get<std::uint64_t>();
    stats.hits = entry.at("hits").get<std::uint64_t>();
    report.vulns[*vuln] = stats;
  }
  return report;
}

}  // namespace meshfuzz
