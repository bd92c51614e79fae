// Copyright 2026 The Fedsim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// fedsim: command-line driver for the federated training simulator.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <fmt/core.h>

#include "CLI11.hpp"
#include "fedsim/config.h"
#include "fedsim/funnel.h"
#include "fedsim/simulation.h"

namespace {

using fedsim::ExperimentConfig;

struct GlobalFlags {
  std::optional<uint64_t> seed;
  std::string out;
  bool production_mode = false;
};

int Fail(const absl::Status& status) {
  std::cerr << "error: " << status.ToString() << "\n";
  return 2;
}

absl::StatusOr<std::string> ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError("cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

absl::Status WriteFile(const std::filesystem::path& path,
                       const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return absl::PermissionDeniedError("cannot write " + path.string());
  out << text;
  return out ? absl::OkStatus()
             : absl::DataLossError("short write to " + path.string());
}

absl::StatusOr<ExperimentConfig> LoadConfig(const std::string& path,
                                            const GlobalFlags& flags) {
  absl::StatusOr<std::string> text = ReadFile(path);
  if (!text.ok()) return text.status();
  absl::StatusOr<ExperimentConfig> config = ExperimentConfig::FromJson(*text);
  if (!config.ok()) return config.status();
  if (flags.seed) {
    config->seed = *flags.seed;
    config->population.seed = *flags.seed;
  }
  if (!flags.out.empty()) config->output_dir = flags.out;
  return config;
}

int Simulate(const std::string& path, const GlobalFlags& flags) {
  absl::StatusOr<ExperimentConfig> config = LoadConfig(path, flags);
  if (!config.ok()) return Fail(config.status());
  absl::StatusOr<fedsim::RunReport> report = fedsim::RunSimulation(*config);
  if (!report.ok()) return Fail(report.status());

  const std::string text = report->Serialize(flags.production_mode);
  if (config->output_dir.empty()) {
    std::cout << text;
    return report->funnel.violations.empty() ? 0 : 1;
  }
  const std::filesystem::path dir(config->output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) return Fail(absl::InternalError(ec.message()));
  for (const auto& [name, body] :
       {std::pair<const char*, std::string>{"report.txt", text},
        {"funnel_events.txt", report->FunnelEventsText()},
        {"funnel_table.txt", report->funnel.ToTable()},
        {"config.json", config->ToJson()}}) {
    if (absl::Status s = WriteFile(dir / name, body); !s.ok()) return Fail(s);
  }
  const fedsim::EvalPoint& last = report->evals.back();
  fmt::print("{} ({}): {} round attempts, model version {}\n", report->status,
             report->stop_reason, report->rounds.size(),
             report->final_model.version);
  fmt::print("noised auc {:.4f}, loss {:.4f}, accuracy {:.4f}\n",
             last.noised.auc, last.noised.loss, last.noised.accuracy);
  fmt::print("wrote {}\n", dir.string());
  return report->funnel.violations.empty() ? 0 : 1;
}

int Analytics(const std::string& path, const GlobalFlags& flags) {
  absl::StatusOr<ExperimentConfig> config = LoadConfig(path, flags);
  if (!config.ok()) return Fail(config.status());
  absl::StatusOr<fedsim::Fleets> fleets = fedsim::MakeFleets(*config);
  if (!fleets.ok()) return Fail(fleets.status());
  absl::StatusOr<fedsim::AnalyticsSummary> summary =
      fedsim::RunAnalytics(*config, *fleets);
  if (!summary.ok()) return Fail(summary.status());
  for (const fedsim::LineRecord& r : summary->ToRecords(flags.production_mode)) {
    std::cout << r.ToLine() << "\n";
  }
  return 0;
}

// The event file carries no names; borrow them from the standard training
// pipeline when the layout matches.
fedsim::PipelineShape NamedShape(fedsim::PipelineShape inferred) {
  const fedsim::PipelineShape training = fedsim::PipelineShape::Training();
  if (inferred.phases.size() != training.phases.size()) return inferred;
  for (size_t p = 0; p < training.phases.size(); ++p) {
    if (inferred.phases[p].steps.size() != training.phases[p].steps.size()) {
      return inferred;
    }
  }
  return training;
}

int FunnelCheck(const std::string& path) {
  absl::StatusOr<std::string> text = ReadFile(path);
  if (!text.ok()) return Fail(text.status());
  absl::StatusOr<std::vector<fedsim::FunnelEvent>> events =
      fedsim::ParseFunnelEvents(*text);
  if (!events.ok()) return Fail(events.status());
  std::set<std::string> use_cases;
  for (const fedsim::FunnelEvent& e : *events) use_cases.insert(e.use_case);
  size_t violations = 0;
  for (const std::string& use_case : use_cases) {
    const fedsim::FunnelReport report = fedsim::DropoffReport(
        *events, NamedShape(fedsim::InferShape(*events, use_case)), use_case);
    std::cout << report.ToTable();
    for (const fedsim::ConservationViolation& v : report.violations) {
      fmt::print("violation: use_case={} phase={} observed={} expected={}\n",
                 v.use_case, v.phase, v.observed, v.expected);
    }
    violations += report.violations.size();
  }
  fmt::print("{} events, {} use cases, {} violations\n", events->size(),
             use_cases.size(), violations);
  return violations == 0 ? 0 : 1;
}

int CompareBalancing(const std::string& path, const GlobalFlags& flags) {
  absl::StatusOr<ExperimentConfig> config = LoadConfig(path, flags);
  if (!config.ok()) return Fail(config.status());
  absl::StatusOr<fedsim::BalancingComparison> c =
      fedsim::ExperimentBalancing(*config);
  if (!c.ok()) return Fail(c.status());
  std::cout << c->ToText();
  return c->Passed() ? 0 : 1;
}

int CompareNormalization(const std::string& path, const GlobalFlags& flags) {
  absl::StatusOr<ExperimentConfig> config = LoadConfig(path, flags);
  if (!config.ok()) return Fail(config.status());
  absl::StatusOr<fedsim::NormalizationComparison> c =
      fedsim::ExperimentNormalization(*config);
  if (!c.ok()) return Fail(c.status());
  std::cout << c->ToText();
  return c->Passed() ? 0 : 1;
}

int Baseline(const std::string& path, const GlobalFlags& flags) {
  if (flags.production_mode) {
    std::cerr << "error: the central baseline reads raw labels and is not "
                 "available in production mode\n";
    return 2;
  }
  absl::StatusOr<ExperimentConfig> config = LoadConfig(path, flags);
  if (!config.ok()) return Fail(config.status());
  absl::StatusOr<fedsim::DegradationComparison> c =
      fedsim::CompareWithBaseline(*config);
  if (!c.ok()) return Fail(c.status());
  std::cout << c->ToText();
  return c->Passed(0.05) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated training simulator"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.fallthrough();
  GlobalFlags flags;
  app.add_option_function<uint64_t>(
      "--seed", [&flags](const uint64_t& s) { flags.seed = s; },
      "Override the config seed");
  app.add_option("--out", flags.out, "Output directory");
  app.add_flag("--production-mode", flags.production_mode,
               "Suppress every exact/oracle output");

  std::string config_path, events_path;
  CLI::App* simulate = app.add_subcommand("simulate", "Run one experiment");
  simulate->add_option("config", config_path)->required()->check(
      CLI::ExistingFile);
  CLI::App* analytics =
      app.add_subcommand("analytics", "Feature and label statistics only");
  analytics->add_option("config", config_path)->required()->check(
      CLI::ExistingFile);
  CLI::App* funnel = app.add_subcommand(
      "funnel-check", "Validate conservation over a funnel event file");
  funnel->add_option("events", events_path)->required()->check(
      CLI::ExistingFile);
  CLI::App* balancing = app.add_subcommand(
      "compare-balancing", "Train with label balancing off and on");
  balancing->add_option("config", config_path)->required()->check(
      CLI::ExistingFile);
  CLI::App* normalization = app.add_subcommand(
      "compare-normalization", "Train with feature normalization off and on");
  normalization->add_option("config", config_path)->required()->check(
      CLI::ExistingFile);
  CLI::App* baseline = app.add_subcommand(
      "baseline", "Compare the federated run with central training");
  baseline->add_option("config", config_path)->required()->check(
      CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  if (*simulate) return Simulate(config_path, flags);
  if (*analytics) return Analytics(config_path, flags);
  if (*funnel) return FunnelCheck(events_path);
  if (*balancing) return CompareBalancing(config_path, flags);
  if (*normalization) return CompareNormalization(config_path, flags);
  if (*baseline) return Baseline(config_path, flags);
  return 2;
}
