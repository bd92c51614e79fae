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

#include <chrono>
#include <set>
#include <string>

#include <fmt/core.h>
#include <gtest/gtest.h>

#include "fedsim/config.h"
#include "fedsim/rng.h"
#include "fedsim/simulation.h"

namespace fedsim {
namespace {

ExperimentConfig TinyConfig(uint64_t seed = 7) {
  ExperimentConfig c;
  c.seed = seed;
  c.population.device_count = 50;
  c.population.seed = seed;
  c.eval_devices = 200;
  c.analytics.devices = 500;
  c.analytics.quantile_cohort = 200;
  c.aggregation.target_updates = 10;
  c.aggregation.max_rounds = 2;
  return c;
}

bool Contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

TEST(ConfigTest, JsonRoundTripIsExact) {
  ExperimentConfig c;
  c.seed = 99;
  c.population.positive_rate = 0.1;
  c.population.scale_disparity = 1000;
  c.train.learning_rate = 0.3;
  c.aggregation.stop_metric_threshold = 0.85;
  c.aggregation.noise_placement = NoisePlacement::kTee;
  c.aggregation.tee_noise_std = 0.01;
  c.eligibility.required_network = NetworkClass::kMetered;
  c.model.hidden_widths = {4, 3};
  const std::string text = c.ToJson();
  absl::StatusOr<ExperimentConfig> back = ExperimentConfig::FromJson(text);
  ASSERT_TRUE(back.ok()) << back.status();
  EXPECT_EQ(back->ToJson(), text);
  EXPECT_EQ(back->population.seed, 99u);
}

TEST(ConfigTest, PartialFileKeepsDefaults) {
  absl::StatusOr<ExperimentConfig> c = ExperimentConfig::FromJson(
      R"({"seed": 3, "aggregation": {"max_rounds": 5}})");
  ASSERT_TRUE(c.ok()) << c.status();
  EXPECT_EQ(c->aggregation.max_rounds, 5);
  EXPECT_EQ(c->aggregation.target_updates, 100);
  EXPECT_EQ(c->population.device_count, 2000);
}

TEST(ConfigTest, RejectsUnknownKeys) {
  EXPECT_FALSE(ExperimentConfig::FromJson(R"({"sed": 3})").ok());
  EXPECT_FALSE(
      ExperimentConfig::FromJson(R"({"train": {"learning_rte": 0.1}})").ok());
  EXPECT_FALSE(ExperimentConfig::FromJson("[1, 2]").ok());
  EXPECT_FALSE(ExperimentConfig::FromJson("{not json").ok());
}

TEST(ConfigTest, RejectsWrongTypes) {
  EXPECT_FALSE(ExperimentConfig::FromJson(R"({"seed": "one"})").ok());
  EXPECT_FALSE(
      ExperimentConfig::FromJson(R"({"balancing": 1})").ok());
  EXPECT_FALSE(ExperimentConfig::FromJson(
                   R"({"aggregation": {"noise_placement": "cloud"}})")
                   .ok());
}

TEST(ConfigTest, RejectsContradictions) {
  ExperimentConfig c;
  c.aggregation.tee_noise_std = 0.1;  // placement is device
  EXPECT_FALSE(c.Validate().ok());
  c = ExperimentConfig();
  c.aggregation.noise_placement = NoisePlacement::kTee;
  c.train.noise_multiplier = 1.0;
  EXPECT_FALSE(c.Validate().ok());
}

TEST(SimulationTest, TinyRunFinishesWithAllSections) {
  const auto start = std::chrono::steady_clock::now();
  absl::StatusOr<RunReport> report = RunSimulation(TinyConfig());
  const double seconds = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - start)
                             .count();
  ASSERT_TRUE(report.ok()) << report.status();
  EXPECT_LT(seconds, 5.0);
  EXPECT_EQ(report->status, "completed");
  EXPECT_EQ(report->stop_reason, "max_rounds");
  EXPECT_EQ(report->evals.size(), 3u);
  EXPECT_EQ(report->final_model.version, 2);
  const std::string text = report->Serialize(false);
  for (const char* tag :
       {"\nrun ", "\nfeature_stats ", "\nfeature_quantile ", "\nlabel_stats ",
        "\nmetadata ", "\nround ", "\nmetrics ", "\nmetric_threshold ",
        "\nscore_histogram ", "\nexact_metrics ", "\noracle_feature ",
        "\nfunnel_phase ", "\nfunnel_step ", "\ntransform "}) {
    EXPECT_TRUE(Contains(text, tag)) << tag;
  }
  EXPECT_TRUE(report->funnel.violations.empty());
}

TEST(SimulationTest, SameSeedSameBytes) {
  absl::StatusOr<RunReport> a = RunSimulation(TinyConfig(11));
  absl::StatusOr<RunReport> b = RunSimulation(TinyConfig(11));
  ASSERT_TRUE(a.ok() && b.ok());
  EXPECT_EQ(a->Serialize(false), b->Serialize(false));
  EXPECT_EQ(a->FunnelEventsText(), b->FunnelEventsText());
  absl::StatusOr<RunReport> c = RunSimulation(TinyConfig(12));
  ASSERT_TRUE(c.ok());
  EXPECT_NE(a->Serialize(false), c->Serialize(false));
}

TEST(SimulationTest, UnreachableBatteryFloorAborts) {
  ExperimentConfig c = TinyConfig();
  c.eligibility.min_battery = 1.01;
  absl::StatusOr<RunReport> report = RunSimulation(c);
  ASSERT_TRUE(report.ok()) << report.status();
  EXPECT_EQ(report->status, "aborted");
  EXPECT_EQ(report->stop_reason, "all_sessions_ineligible");
  EXPECT_EQ(report->final_model.version, 0);
  ASSERT_FALSE(report->funnel.steps.empty());
  const StepReport& first = report->funnel.steps.front();
  EXPECT_EQ(first.name, "eligibility");
  EXPECT_EQ(first.entrants, report->sessions);
  EXPECT_EQ(first.successes, 0);
  EXPECT_EQ(first.survival, 0.0);
  ASSERT_FALSE(first.top_reasons.empty());
  EXPECT_EQ(first.top_reasons.front().first, FailureReason::kBattery);
  EXPECT_EQ(first.top_reasons.front().second, report->sessions);
  EXPECT_TRUE(report->funnel.violations.empty());
}

TEST(SimulationTest, SlowRoundsAbortAsTimeouts) {
  ExperimentConfig c = TinyConfig();
  c.aggregation.target_updates = 40;  // more than 50 devices can supply
  absl::StatusOr<RunReport> report = RunSimulation(c);
  ASSERT_TRUE(report.ok()) << report.status();
  EXPECT_EQ(report->status, "aborted");
  EXPECT_EQ(report->stop_reason, "round_timeout");
  EXPECT_EQ(report->rounds.size(),
            static_cast<size_t>(c.max_consecutive_abandoned));
}

TEST(SimulationTest, BalancingNeedsTwoClasses) {
  ExperimentConfig c = TinyConfig();
  c.population.positive_rate = 0.0005;  // rounds to zero positives
  c.analytics.flip_prob = 0;
  absl::StatusOr<RunReport> report = RunSimulation(c);
  EXPECT_EQ(report.status().code(), absl::StatusCode::kFailedPrecondition);
  c.balancing = false;
  report = RunSimulation(c);
  ASSERT_TRUE(report.ok()) << report.status();
  EXPECT_FALSE(report->analytics.labels.has_value());
}

TEST(SimulationTest, ProductionModeDropsOracleTrack) {
  absl::StatusOr<RunReport> report = RunSimulation(TinyConfig());
  ASSERT_TRUE(report.ok());
  const std::string prod = report->Serialize(true);
  EXPECT_FALSE(Contains(prod, "exact"));
  EXPECT_FALSE(Contains(prod, "oracle"));
  EXPECT_TRUE(Contains(prod, "\nmetrics "));
  EXPECT_TRUE(Contains(report->Serialize(false), "exact_"));
}

TEST(SimulationTest, ExportsCarryNoDeviceIdentity) {
  const ExperimentConfig c = TinyConfig();
  absl::StatusOr<RunReport> report = RunSimulation(c);
  absl::StatusOr<Fleets> fleets = MakeFleets(c);
  ASSERT_TRUE(report.ok() && fleets.ok());
  const std::string text =
      report->Serialize(true) + report->FunnelEventsText();
  for (const Population* p : {&fleets->train, &fleets->eval}) {
    for (const DeviceState& d : p->devices) {
      EXPECT_FALSE(Contains(text, fmt::format("{}", d.device_id)));
      EXPECT_FALSE(Contains(text, fmt::format("{:x}", d.device_id)));
      EXPECT_FALSE(Contains(text, fmt::format("{}", d.key.material())));
    }
  }
  EXPECT_FALSE(Contains(text, "device_id"));
  EXPECT_FALSE(Contains(text, "example"));
}

TEST(SimulationTest, RandomFaultScenariosConserve) {
  Rng rng(2026);
  for (int scenario = 0; scenario < 50; ++scenario) {
    ExperimentConfig c = TinyConfig(1000 + scenario);
    c.faults.battery_drop_rate = rng.Uniform();
    c.faults.network_loss_rate = rng.Uniform();
    c.warmup_ticks = static_cast<int>(rng.UniformInt(3));
    c.eligibility.min_battery = rng.Uniform() * 0.5;
    c.eligibility.require_idle = rng.Bernoulli(0.5);
    c.balancing = rng.Bernoulli(0.5);
    c.aggregation.target_updates = 3 + static_cast<int64_t>(rng.UniformInt(8));
    absl::StatusOr<RunReport> report = RunSimulation(c);
    ASSERT_TRUE(report.ok()) << report.status();
    EXPECT_TRUE(report->funnel.violations.empty()) << "scenario " << scenario;
    EXPECT_TRUE(ValidateFunnel(report->funnel_events,
                               PipelineShape::Training(), kTrainingUseCase)
                    .empty());
    EXPECT_EQ(report->funnel.steps.front().entrants, report->sessions);
  }
}

}  // namespace
}  // namespace fedsim
