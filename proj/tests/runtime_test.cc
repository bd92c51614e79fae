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

#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "fedsim/orchestrator.h"
#include "fedsim/population.h"
#include "fedsim/transform.h"

namespace fedsim {
namespace {

DeviceState HealthyDevice() {
  DeviceState d = MakeDevice(1ULL << 63, 77);
  d.battery = 0.9;
  d.network = NetworkClass::kUnmetered;
  d.idle = true;
  d.free_storage_bytes = 8'000'000'000;
  d.app_version = 3;
  return d;
}

FeatureSchema Schema() {
  return *FeatureSchema::Create({{"s", FeatureOrigin::kServer, -10, 10},
                                 {"d", FeatureOrigin::kDevice, -10, 10},
                                 {"b", FeatureOrigin::kBoth, -10, 10}});
}

CompiledTransform Compile(const TransformSpec& spec) {
  absl::StatusOr<CompiledTransform> t = CompiledTransform::Load(spec, Schema());
  EXPECT_TRUE(t.ok()) << t.status();
  return *t;
}

TEST(EligibilityTest, HealthyDeviceIsEligible) {
  EXPECT_TRUE(CheckEligibility(HealthyDevice(), {}).eligible);
}

TEST(EligibilityTest, LowBattery) {
  DeviceState d = HealthyDevice();
  d.battery = 0.1;
  EligibilityCriteria c;
  c.min_battery = 0.3;
  const EligibilityResult r = CheckEligibility(d, c);
  EXPECT_FALSE(r.eligible);
  EXPECT_EQ(r.reason, FailureReason::kBattery);
}

TEST(EligibilityTest, MeteredWhenUnmeteredRequired) {
  DeviceState d = HealthyDevice();
  d.network = NetworkClass::kMetered;
  EXPECT_EQ(CheckEligibility(d, {}).reason, FailureReason::kNetwork);
  EligibilityCriteria relaxed;
  relaxed.required_network = NetworkClass::kMetered;
  EXPECT_TRUE(CheckEligibility(d, relaxed).eligible);
  d.network = NetworkClass::kOffline;
  relaxed.required_network = NetworkClass::kOffline;
  EXPECT_FALSE(CheckEligibility(d, relaxed).eligible);
}

TEST(EligibilityTest, FirstFailingCriterionIsNamed) {
  DeviceState d = HealthyDevice();
  d.idle = false;
  d.app_version = 0;
  EXPECT_EQ(CheckEligibility(d, {}).reason, FailureReason::kNotIdle);
  d.idle = true;
  EXPECT_EQ(CheckEligibility(d, {}).reason, FailureReason::kAppVersion);
  d.free_storage_bytes = 10;
  EXPECT_EQ(CheckEligibility(d, {}).reason, FailureReason::kStorage);
}

TEST(EligibilityTest, RelaxingACriterionNeverShrinksTheEligibleSet) {
  PopulationConfig pc;
  pc.device_count = 1000;
  pc.seed = 31;
  absl::StatusOr<Population> fleet = GeneratePopulation(pc);
  ASSERT_TRUE(fleet.ok());
  EligibilityCriteria strict;
  strict.min_battery = 0.5;
  strict.min_storage_bytes = 4'000'000'000;
  strict.min_app_version = 3;
  std::vector<EligibilityCriteria> relaxed(5, strict);
  relaxed[0].min_battery = 0.1;
  relaxed[1].required_network = NetworkClass::kMetered;
  relaxed[2].require_idle = false;
  relaxed[3].min_storage_bytes = 0;
  relaxed[4].min_app_version = 1;
  for (const EligibilityCriteria& r : relaxed) {
    int grew = 0;
    for (const DeviceState& d : fleet->devices) {
      const bool before = CheckEligibility(d, strict).eligible;
      const bool after = CheckEligibility(d, r).eligible;
      EXPECT_TRUE(!before || after);
      grew += after && !before;
    }
    EXPECT_GT(grew, 0);
  }
}

TEST(TransformTest, NormalizeIsAffine) {
  TransformSpec spec;
  spec.steps = {{TransformKind::kInjectServer, "s"},
                {TransformKind::kNormalize, "s", 3.0, 2.0}};
  const CompiledTransform t = Compile(spec);
  EXPECT_EQ(t.Apply({{"s", 3.0}}, {}).features[0], 0.0);
  EXPECT_EQ(t.Apply({{"s", 7.0}}, {}).features[0], 2.0);
}

TEST(TransformTest, ZeroStddevNormalizesToZero) {
  TransformSpec spec;
  spec.steps = {{TransformKind::kInjectServer, "s"},
                {TransformKind::kNormalize, "s", 3.0, 0.0}};
  EXPECT_EQ(Compile(spec).Apply({{"s", 9.0}}, {}).features[0], 0.0);
}

TEST(TransformTest, DeviceValueOverridesServerValue) {
  TransformSpec spec;
  spec.steps = {{TransformKind::kInjectServer, "b"},
                {TransformKind::kOverrideWithDevice, "b"}};
  const CompiledTransform t = Compile(spec);
  EXPECT_EQ(t.Apply({{"b", 5.0}}, {{"b", 7.0}}).features[2], 7.0);
  EXPECT_EQ(t.Apply({{"b", 5.0}}, {}).features[2], 5.0);
}

TEST(TransformTest, MissingInjectDefaultsToZeroAndIsRecorded) {
  TransformSpec spec;
  spec.steps = {{TransformKind::kInjectServer, "s"}};
  const TransformResult r = Compile(spec).Apply({}, {});
  EXPECT_EQ(r.features, (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(r.failed_steps, std::vector<std::string>{"inject_server:s"});
}

TEST(TransformTest, ClampAndLog1p) {
  TransformSpec spec;
  spec.steps = {{TransformKind::kInjectServer, "s"},
                {TransformKind::kClamp, "s", -1.0, 4.0},
                {TransformKind::kLog1p, "s"}};
  const CompiledTransform t = Compile(spec);
  EXPECT_DOUBLE_EQ(t.Apply({{"s", 100.0}}, {}).features[0], std::log(5.0));
  const TransformResult r = t.Apply({{"s", -3.0}}, {});
  EXPECT_EQ(r.features[0], 0.0);
  EXPECT_EQ(r.failed_steps.size(), 1u);
}

TEST(TransformTest, UnknownFeatureRejectedAtLoad) {
  TransformSpec spec;
  spec.steps = {{TransformKind::kInjectServer, "nope"}};
  EXPECT_FALSE(CompiledTransform::Load(spec, Schema()).ok());
  spec.steps = {{TransformKind::kClamp, "s", 2.0, 1.0}};
  EXPECT_FALSE(CompiledTransform::Load(spec, Schema()).ok());
  spec.steps = {{TransformKind::kNormalize, "s", 0.0, -1.0}};
  EXPECT_FALSE(CompiledTransform::Load(spec, Schema()).ok());
}

TEST(TransformTest, SpecRoundTrip) {
  FeatureStats stats;
  stats.features = {{"s", 1.5, 2.0}, {"d", -0.25, 0.0}, {"b", 0.0, 1e-3}};
  const TransformSpec spec = MakeStandardSpec(Schema(), &stats, 4);
  absl::StatusOr<TransformSpec> back = TransformSpec::Parse(spec.Serialize());
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(back->Serialize(), spec.Serialize());
  EXPECT_EQ(back->version, 4);
  EXPECT_FALSE(TransformSpec::Parse("transform_step kind=warp feature=s\n").ok());
}

TEST(DecideSubmissionTest, DegenerateProbabilities) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    EXPECT_TRUE(DecideSubmission(1, {1.0, 0.0}, rng));
    EXPECT_FALSE(DecideSubmission(0, {1.0, 0.0}, rng));
  }
}

TEST(DecideSubmissionTest, BinomialKeepRate) {
  Rng rng(2);
  const KeepPolicy policy{1.0, 1.0 / 9.0};
  int submitted = 0;
  for (int i = 0; i < 90000; ++i) submitted += DecideSubmission(0, policy, rng);
  const double sigma = std::sqrt(90000 * (1.0 / 9) * (8.0 / 9));
  EXPECT_LE(std::abs(submitted - 10000.0), 3 * sigma);
}

TEST(MetadataTest, RoundTrip) {
  MetadataRecord m;
  m.model_version = 7;
  m.spec_version = 2;
  m.policy = {1.0, 0.125};
  m.criteria.required_network = NetworkClass::kMetered;
  m.criteria.min_battery = 0.35;
  absl::StatusOr<MetadataRecord> back = MetadataRecord::FromRecord(
      *LineRecord::Parse(m.ToRecord().ToLine()));
  ASSERT_TRUE(back.ok());
  EXPECT_EQ(back->ToRecord().ToLine(), m.ToRecord().ToLine());
}

class SessionTest : public ::testing::Test {
 protected:
  void SetUp() override {
    device_ = HealthyDevice();
    std::vector<LocalExample> examples = {
        {1, {{"s", 1.0}, {"b", 2.0}}, {{"d", 0.5}, {"b", 2.5}}, 1}};
    ASSERT_TRUE(StoreExamples(device_, examples).ok());
    ModelConfig config{3, {4}};
    weights_ = InitWeights(config, 3);
    transform_.emplace(Compile(MakeStandardSpec(Schema(), nullptr, 1)));
    ASSERT_TRUE(sink_.RegisterUseCase("training", PipelineShape::Training())
                    .ok());
    context_.snapshot = &weights_;
    context_.transform = &*transform_;
    context_.sink = &sink_;
  }

  DeviceState device_;
  ModelWeights weights_;
  std::optional<CompiledTransform> transform_;
  FunnelSink sink_;
  SessionContext context_;
};

TEST_F(SessionTest, HappyPath) {
  Rng rng(4);
  const SessionOutcome out = RunTrainingSession(device_, context_, {}, rng);
  ASSERT_TRUE(out.update.has_value());
  EXPECT_EQ(out.failed_phase, 0);
  EXPECT_EQ(out.update->sample_weight, 1);
  const std::vector<FunnelEvent> events = sink_.Snapshot();
  ASSERT_EQ(events.size(), 6u);
  for (const FunnelEvent& e : events) EXPECT_EQ(e.status, StepStatus::kSuccess);
}

TEST_F(SessionTest, DroppedSampleStopsAtSubmissionDecision) {
  context_.policy = {0.0, 1.0};  // the sample is positive
  Rng rng(4);
  const SessionOutcome out = RunTrainingSession(device_, context_, {}, rng);
  EXPECT_FALSE(out.update.has_value());
  EXPECT_EQ(out.failed_phase, kPhaseSubmission);
  const std::vector<FunnelEvent> events = sink_.Snapshot();
  ASSERT_EQ(events.size(), 4u);
  EXPECT_EQ(events.back().reason, FailureReason::kDroppedByPolicy);
}

TEST_F(SessionTest, NetworkLossAtUploadConserves) {
  Rng rng(5);
  for (int i = 0; i < 20; ++i) {
    SessionFaults faults;
    faults.network_loss = i % 2 == 0;
    const SessionOutcome out = RunTrainingSession(device_, context_, faults, rng);
    EXPECT_EQ(out.update.has_value(), !faults.network_loss);
    if (faults.network_loss) {
      EXPECT_EQ(out.failed_phase, kPhaseUploaded);
    }
  }
  const FunnelReport r =
      DropoffReport(sink_.Snapshot(), PipelineShape::Training(), "training");
  EXPECT_TRUE(r.violations.empty());
  EXPECT_EQ(r.steps.back().failures, 10);
  EXPECT_EQ(r.steps.back().top_reasons.front().first,
            FailureReason::kNetworkLoss);
}

TEST_F(SessionTest, WarmupAndEligibilityFailures) {
  context_.warmup_ticks = 5;
  Rng rng(6);
  EXPECT_EQ(RunTrainingSession(device_, context_, {}, rng).reason,
            FailureReason::kWarmup);
  device_.signal_ticks = 5;
  device_.battery = 0.01;
  EXPECT_EQ(RunTrainingSession(device_, context_, {}, rng).failed_phase,
            kPhaseEligibility);
  device_.battery = 0.9;
  SessionFaults faults;
  faults.battery_drop = true;
  EXPECT_EQ(RunTrainingSession(device_, context_, faults, rng).reason,
            FailureReason::kBatteryDrop);
  EXPECT_TRUE(ValidateFunnel(sink_.Snapshot(), PipelineShape::Training(),
                             "training")
                  .empty());
}

TEST_F(SessionTest, InferenceMatchesTrainingPipeline) {
  ASSERT_TRUE(InstallModel(device_, weights_).ok());
  Rng rng(7);
  for (int i = 0; i < 1000; ++i) {
    const NamedValues server = {{"s", rng.UniformIn(-20, 20)},
                                {"b", rng.UniformIn(-20, 20)}};
    NamedValues signals = {{"d", rng.UniformIn(-20, 20)}};
    if (rng.Bernoulli(0.5)) signals["b"] = rng.UniformIn(-20, 20);
    DeviceState trainer = HealthyDevice();
    ASSERT_TRUE(
        StoreExamples(trainer, std::vector<LocalExample>{{1, server, signals, 1}})
            .ok());
    context_.sink = nullptr;
    const SessionOutcome out = RunTrainingSession(trainer, context_, {}, rng);
    ASSERT_EQ(out.transformed.size(), 1u);
    const TransformResult inference = transform_->Apply(server, signals);
    EXPECT_EQ(inference.features, out.transformed[0]);
    absl::StatusOr<double> score =
        RunInference(device_, *transform_, server, signals, 0);
    ASSERT_TRUE(score.ok());
    EXPECT_EQ(*score, *Forward(weights_, out.transformed[0]));
  }
}

TEST_F(SessionTest, InferenceErrors) {
  EXPECT_EQ(RunInference(device_, *transform_, {}, {}, 0).status().code(),
            absl::StatusCode::kNotFound);
  ASSERT_TRUE(device_.store.Put(device_.key, kModelRecord, "garbage").ok());
  EXPECT_EQ(RunInference(device_, *transform_, {}, {}, 0).status().code(),
            absl::StatusCode::kDataLoss);
  ASSERT_TRUE(InstallModel(device_, weights_).ok());  // version 0
  EXPECT_EQ(RunInference(device_, *transform_, {}, {}, 2).status().code(),
            absl::StatusCode::kFailedPrecondition);
  int fetches = 0;
  ModelWeights fresh = weights_;
  fresh.version = 2;
  fresh.params[0] += 1.0;
  absl::StatusOr<double> score =
      RunInference(device_, *transform_, {}, {}, 2, [&] {
        ++fetches;
        return absl::StatusOr<ModelWeights>(fresh);
      });
  ASSERT_TRUE(score.ok());
  EXPECT_EQ(fetches, 1);
  EXPECT_EQ(*score, *Forward(fresh, transform_->Apply({}, {}).features));
  // The refreshed model is now stored; no second fetch.
  EXPECT_TRUE(RunInference(device_, *transform_, {}, {}, 2).ok());
}

}  // namespace
}  // namespace fedsim
