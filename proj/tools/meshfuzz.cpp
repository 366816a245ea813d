// SPDX-License-Identifier: Apache-2.0
//
// meshfuzz command-line front end: fuzzing campaigns, crash replay, the
// reboot-count epoch oracle, one-shot harness execution, and report
// aggregation.

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "meshfuzz/config.hpp"
#include "meshfuzz/harness.hpp"

namespace fs = std::filesystem;
using namespace meshfuzz;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitCrashFound = 2;
constexpr int kExitNotReproduced = 3;

struct FuzzOptions {
  std::string config_path;
  std::string out_dir = "meshfuzz-out";
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> iterations;
  unsigned runs = 1;
};

int run_single_campaign(CampaignConfig config) {
  Campaign campaign(std::move(config));
  CampaignReport report = campaign.run();
  std::cout << "iterations: " << report.iterations.size() << "\n"
            << "crashes: " << report.crashes.size() << "\n"
            << "cumulative_edges: " << report.cumulative_edges << "/"
            << report.reachable_edges << "\n"
            << "coverage_fraction: " << report.coverage_fraction << "\n";
  for (const auto& [vuln, stats] : report.vulns) {
    if (stats.hits > 0) {
      std::cout << to_string(vuln) << ": first_hit=" << stats.first_hit
                << " hits=" << stats.hits << "\n";
    }
  }
  return report.crashes.empty() ? kExitOk : kExitCrashFound;
}

int spawn_runs(const FuzzOptions& options, const CampaignConfig& base) {
  std::vector<pid_t> children;
  for (unsigned r = 0; r < options.runs; ++r) {
    pid_t pid = fork();
    if (pid < 0) {
      std::perror("fork");
      return kExitError;
    }
    if (pid == 0) {
      CampaignConfig config = base;
      config.seed = base.seed + r;
      config.out_dir = (fs::path(options.out_dir) / ("run_" + std::to_string(r))).string();
      try {
        _exit(run_single_campaign(std::move(config)));
      } catch (const std::exception& e) {
        std::cerr << "run " << r << ": " << e.what() << "\n";
        _exit(kExitError);
      }
    }
    children.push_back(pid);
  }
  int worst = kExitOk;
  bool any_crash = false;
  for (pid_t pid : children) {
    int status = 0;
    waitpid(pid, &status, 0);
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : kExitError;
    if (code == kExitCrashFound) any_crash = true;
    else if (code != kExitOk) worst = kExitError;
  }
  if (worst != kExitOk) return worst;
  return any_crash ? kExitCrashFound : kExitOk;
}

int cmd_fuzz(const FuzzOptions& options) {
  CampaignConfig config;
  try {
    config = load_campaign_config(options.config_path);
    if (options.seed) config.seed = *options.seed;
    if (options.iterations) config.max_iterations = *options.iterations;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  if (options.runs > 1) {
    return spawn_runs(options, config);
  }
  config.out_dir = options.out_dir;
  try {
    return run_single_campaign(std::move(config));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_epoch(const std::string& config_path, std::uint32_t epoch_size,
              std::optional<std::uint64_t> seed) {
  try {
    CampaignConfig config = load_campaign_config(config_path);
    config.mode = CampaignMode::PhysicalEpoch;
    config.epoch_size = epoch_size;
    if (seed) config.seed = *seed;
    config.validate();
    Campaign campaign(std::move(config));
    bool crash_detected = campaign.run_fuzzing_epoch(epoch_size);
    std::cout << "{\"epoch_size\": " << epoch_size << ", \"crash_detected\": "
              << (crash_detected ? "true" : "false") << "}\n";
    return crash_detected ? kExitCrashFound : kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

int cmd_replay(const std::string& crash_path, std::optional<bool> sanitizer_override) {
  CrashRecord record;
  try {
    record = load_crash_record(crash_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  ReplayOutcome outcome = replay(record, sanitizer_override);
  std::cout << "{\"crashed\": " << (outcome.crashed ? "true" : "false");
  if (outcome.vuln) {
    std::cout << ", \"vuln\": \"" << to_string(*outcome.vuln) << "\"";
    std::cout << ", \"kind\": \"" << to_string(*outcome.kind) << "\"";
  }
  std::cout << ", \"reproduced\": " << (outcome.reproduced ? "true" : "false") << "}\n";
  return outcome.reproduced ? kExitCrashFound : kExitNotReproduced;
}

int cmd_harness(const std::string& input_path, bool sanitizer) {
  std::ifstream in(input_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open " << input_path << "\n";
    return kExitError;
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string data = buf.str();
  try {
    HarnessInput input = parse_harness_input(
        std::span(reinterpret_cast<const std::uint8_t*>(data.data()), data.size()));
    HarnessResult result = harness_execute(input, sanitizer);
    std::cout << harness_result_to_json(result);
    bool crashed = result.outcome && result.outcome->crashed();
    return crashed ? kExitCrashFound : kExitOk;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}

struct VulnAggregate {
  unsigned found_runs = 0;
  std::vector<double> first_hits;
};

int cmd_report(const std::vector<std::string>& paths, const std::string& summary_csv,
               const std::string& curve_csv) {
  std::vector<LoadedReport> reports;
  try {
    for (const std::string& path : paths) {
      reports.push_back(load_report(path));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  for (std::size_t i = 1; i < reports.size(); ++i) {
    if (reports[i].fingerprint != reports[0].fingerprint) {
      std::cerr << "error: mixed incompatible configs (" << paths[i]
                << " differs from " << paths[0] << ")\n";
      return kExitError;
    }
  }

  std::map<VulnId, VulnAggregate> aggregates;
  double total_packets = 0.0;
  double total_fraction = 0.0;
  for (const LoadedReport& report : reports) {
    total_packets += report.mean_packets_per_iteration;
    total_fraction += report.coverage_fraction;
    for (const auto& [vuln, stats] : report.vulns) {
      if (stats.first_hit > 0) {
        VulnAggregate& agg = aggregates[vuln];
        ++agg.found_runs;
        agg.first_hits.push_back(static_cast<double>(stats.first_hit));
      }
    }
  }

  auto mean_of = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
  };
  auto stddev_of = [&](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double mean = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return std::sqrt(ss / static_cast<double>(v.size()));  // population stddev
  };

  std::ostringstream table;
  table << "vuln  found  first_hit\n";
  std::ostringstream csv;
  csv << "vuln,found_runs,total_runs,first_hit_mean,first_hit_stddev\n";
  for (VulnId v : {VulnId::V1, VulnId::V2, VulnId::V3, VulnId::V4, VulnId::V5, VulnId::V6}) {
    auto it = aggregates.find(v);
    unsigned found = it == aggregates.end() ? 0 : it->second.found_runs;
    table << to_string(v) << "    " << found << "/" << reports.size() << "    ";
    csv << to_string(v) << ',' << found << ',' << reports.size() << ',';
    if (found == 0) {
      table << "NO\n";
      csv << ",\n";
    } else {
      double mean = mean_of(it->second.first_hits);
      double stddev = stddev_of(it->second.first_hits);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.1f±%.1f", mean, stddev);
      table << buf << "\n";
      csv << mean << ',' << stddev << "\n";
    }
  }
  table << "mean_iteration_length_packets: "
        << (reports.empty() ? 0.0 : total_packets / static_cast<double>(reports.size()))
        << "\n";
  table << "mean_final_coverage_fraction: "
        << (reports.empty() ? 0.0 : total_fraction / static_cast<double>(reports.size()))
        << "\n";
  std::cout << table.str();

  if (!summary_csv.empty()) {
    std::ofstream out(summary_csv, std::ios::trunc);
    out << csv.str();
  }
  if (!curve_csv.empty()) {
    std::size_t longest = 0;
    for (const LoadedReport& r : reports) longest = std::max(longest, r.curve.size());
    std::ofstream out(curve_csv, std::ios::trunc);
    out << "iteration,mean_coverage_fraction\n";
    for (std::size_t i = 0; i < longest; ++i) {
      double sum = 0.0;
      unsigned n = 0;
      for (const LoadedReport& r : reports) {
        if (i < r.curve.size()) {
          sum += r.curve[i].second;
          ++n;
        }
      }
      out << (i + 1) << ',' << (n > 0 ? sum / n : 0.0) << "\n";
    }
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stateful TLV mesh-protocol fuzzer with a simulated device under test"};
  app.require_subcommand(1);

  FuzzOptions fuzz_options;
  std::uint64_t seed_flag = 0;
  std::uint64_t iterations_flag = 0;
  CLI::App* fuzz = app.add_subcommand("fuzz", "Run a fuzzing campaign");
  fuzz->add_option("--config", fuzz_options.config_path, "Campaign config JSON")->required();
  CLI::Option* seed_opt = fuzz->add_option("--seed", seed_flag, "Campaign RNG seed override");
  CLI::Option* iter_opt =
      fuzz->add_option("--iterations", iterations_flag, "Iteration count override");
  fuzz->add_option("--runs", fuzz_options.runs, "Independent seeded campaigns (subprocesses)");
  fuzz->add_option("--out", fuzz_options.out_dir, "Artifact output directory");

  std::string epoch_config;
  std::uint32_t epoch_size = 4;
  std::uint64_t epoch_seed_flag = 0;
  CLI::App* epoch = app.add_subcommand("epoch", "Run one reboot-count epoch");
  epoch->add_option("--config", epoch_config, "Campaign config JSON")->required();
  epoch->add_option("--epoch-size", epoch_size, "Fuzzing iterations per epoch")->required();
  CLI::Option* epoch_seed_opt =
      epoch->add_option("--seed", epoch_seed_flag, "Campaign RNG seed override");

  std::string harness_input;
  bool harness_sanitizer = false;
  CLI::App* harness = app.add_subcommand("harness", "One-shot stateful harness execution");
  harness->add_option("--input", harness_input, "Binary harness input file")->required();
  harness->add_flag("--sanitizer", harness_sanitizer, "Enable memory sanitizer emulation");

  std::string replay_path;
  std::string replay_sanitizer = "";
  CLI::App* replay_cmd = app.add_subcommand("replay", "Replay a recorded crash");
  replay_cmd->add_option("crash", replay_path, "crash_<iter>_<vuln>.json file")->required();
  replay_cmd->add_option("--sanitizer", replay_sanitizer,
                         "Override the recorded sanitizer flag (on|off)");

  std::vector<std::string> report_paths;
  std::string summary_csv;
  std::string curve_csv;
  CLI::App* report = app.add_subcommand("report", "Aggregate campaign reports");
  report->add_option("reports", report_paths, "report.json files")->required();
  report->add_option("--summary-csv", summary_csv, "Write the per-vuln summary CSV here");
  report->add_option("--curve-csv", curve_csv, "Write the merged coverage curve CSV here");

  CLI11_PARSE(app, argc, argv);

  if (*fuzz) {
    if (*seed_opt) fuzz_options.seed = seed_flag;
    if (*iter_opt) fuzz_options.iterations = iterations_flag;
    return cmd_fuzz(fuzz_options);
  }
  if (*epoch) {
    std::optional<std::uint64_t> seed;
    if (*epoch_seed_opt) seed = epoch_seed_flag;
    return cmd_epoch(epoch_config, epoch_size, seed);
  }
  if (*harness) {
    return cmd_harness(harness_input, harness_sanitizer);
  }
  if (*replay_cmd) {
    std::optional<bool> override;
    if (replay_sanitizer == "on") override = true;
    else if (replay_sanitizer == "off") override = false;
    else if (!replay_sanitizer.empty()) {
      std::cerr << "error: --sanitizer must be \"on\" or \"off\"\n";
      return kExitError;
    }
    return cmd_replay(replay_path, override);
  }
  if (*report) {
    return cmd_report(report_paths, summary_csv, curve_csv);
  }
  return kExitError;
}
