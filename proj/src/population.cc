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

#include "fedsim/population.h"

#include <cmath>
#include <map>

#include <fmt/core.h>

#include "fedsim/record.h"
#include "fedsim/rng.h"

namespace fedsim {
namespace {

constexpr int64_t kRejectionBudgetPerExample = 1000;

// Device-held part of an example before the joiner delivers the rest.
struct PendingSignals {
  size_t device_index = 0;
  int64_t example_id = 0;
  NamedValues signals;
};

double Sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::vector<double> FeatureScales(const PopulationConfig& config) {
  const size_t d = config.true_weights.size();
  std::vector<double> scales(d, 1.0);
  for (size_t j = 0; j < d && d > 1; ++j) {
    scales[j] = std::pow(config.scale_disparity,
                         static_cast<double>(j) / static_cast<double>(d - 1));
  }
  return scales;
}

void DrawResources(DeviceState& device, Rng& rng) {
  device.battery = rng.Uniform();
  const double net = rng.Uniform();
  device.network = net < 0.7   ? NetworkClass::kUnmetered
                   : net < 0.9 ? NetworkClass::kMetered
                               : NetworkClass::kOffline;
  device.idle = rng.Bernoulli(0.8);
  device.free_storage_bytes =
      static_cast<int64_t>(rng.UniformIn(0.05, 16.0) * 1e9);
  device.app_version = 1 + static_cast<int>(rng.UniformInt(5));
}

// Joins server records with labels and seals each device's examples into its
// local store.
absl::Status DeliverExamples(Population& population,
                             const std::vector<PendingSignals>& pending) {
  absl::StatusOr<JoinResult> joined =
      Join(population.server_records, population.label_records);
  if (!joined.ok()) return joined.status();
  std::map<int64_t, const JoinedExample*> by_id;
  for (const JoinedExample& ex : joined->joined) by_id[ex.example_id] = &ex;

  std::vector<std::vector<LocalExample>> per_device(population.devices.size());
  for (const PendingSignals& p : pending) {
    auto it = by_id.find(p.example_id);
    if (it == by_id.end()) {
      return absl::InvalidArgumentError(
          fmt::format("example {} has no joined server record", p.example_id));
    }
    if (p.device_index >= per_device.size()) {
      return absl::InvalidArgumentError("signals refer to unknown device");
    }
    LocalExample ex;
    ex.example_id = p.example_id;
    ex.server_features = it->second->server_features;
    ex.signals = p.signals;
    ex.label = it->second->label;
    per_device[p.device_index].push_back(std::move(ex));
  }
  for (size_t i = 0; i < per_device.size(); ++i) {
    if (absl::Status s = StoreExamples(population.devices[i], per_device[i]);
        !s.ok()) {
      return s;
    }
  }
  return absl::OkStatus();
}

}  // namespace

absl::Status PopulationConfig::Validate() const {
  if (device_count < 1 || samples_per_device < 1) {
    return absl::InvalidArgumentError(
        "device_count and samples_per_device must be positive");
  }
  if (!(positive_rate > 0.0 && positive_rate < 1.0)) {
    return absl::InvalidArgumentError("positive_rate must lie in (0, 1)");
  }
  if (!(scale_disparity >= 1.0) || !std::isfinite(scale_disparity)) {
    return absl::InvalidArgumentError("scale_disparity must be >= 1");
  }
  if (!(device_signal_noise >= 0.0) || !(server_signal_noise >= 0.0)) {
    return absl::InvalidArgumentError("signal noise must be non-negative");
  }
  if (true_weights.empty()) {
    return absl::InvalidArgumentError("true_weights must be non-empty");
  }
  for (double w : true_weights) {
    if (!std::isfinite(w)) {
      return absl::InvalidArgumentError("true_weights must be finite");
    }
  }
  return absl::OkStatus();
}

FeatureSchema MakeSchema(const PopulationConfig& config) {
  static constexpr FeatureOrigin kCycle[] = {
      FeatureOrigin::kServer, FeatureOrigin::kDevice, FeatureOrigin::kBoth};
  const std::vector<double> scales = FeatureScales(config);
  std::vector<FeatureDescriptor> features;
  for (size_t j = 0; j < scales.size(); ++j) {
    features.push_back({fmt::format("f{}", j), kCycle[j % 3], -4.0 * scales[j],
                        4.0 * scales[j]});
  }
  return *FeatureSchema::Create(std::move(features));
}

absl::StatusOr<Population> GeneratePopulation(const PopulationConfig& config) {
  if (absl::Status s = config.Validate(); !s.ok()) return s;
  Population population;
  population.config = config;
  population.schema = MakeSchema(config);
  const std::vector<double> scales = FeatureScales(config);
  const size_t d = scales.size();

  Rng root(config.seed);
  Rng resource_rng = root.Fork(1);
  Rng example_rng = root.Fork(2);

  const int64_t total = config.device_count * config.samples_per_device;
  const int64_t want_pos =
      std::llround(config.positive_rate * static_cast<double>(total));
  const int64_t want_neg = total - want_pos;

  struct Latent {
    std::vector<double> z;
    int label;
  };
  std::vector<Latent> accepted;
  accepted.reserve(total);
  int64_t have_pos = 0, have_neg = 0;
  const int64_t budget = kRejectionBudgetPerExample * total;
  for (int64_t attempt = 0; have_pos < want_pos || have_neg < want_neg;
       ++attempt) {
    if (attempt >= budget) {
      return absl::ResourceExhaustedError(fmt::format(
          "positive rate {} infeasible under the ground-truth model "
          "(rejection budget of {} draws exceeded)",
          config.positive_rate, budget));
    }
    Latent ex;
    ex.z.resize(d);
    double logit = config.true_bias;
    for (size_t j = 0; j < d; ++j) {
      ex.z[j] = example_rng.Gaussian();
      logit += config.true_weights[j] * ex.z[j];
    }
    ex.label = example_rng.Bernoulli(Sigmoid(logit)) ? 1 : 0;
    if (ex.label == 1 && have_pos < want_pos) {
      ++have_pos;
    } else if (ex.label == 0 && have_neg < want_neg) {
      ++have_neg;
    } else {
      continue;
    }
    accepted.push_back(std::move(ex));
  }
  example_rng.Shuffle(accepted);

  for (int64_t i = 0; i < config.device_count; ++i) {
    const uint64_t id = resource_rng.NextU64() | (1ULL << 63);
    DeviceState device = MakeDevice(id, resource_rng.NextU64());
    DrawResources(device, resource_rng);
    population.devices.push_back(std::move(device));
  }

  std::vector<PendingSignals> pending;
  const std::vector<FeatureDescriptor>& features =
      population.schema.features();
  for (int64_t k = 0; k < total; ++k) {
    const Latent& ex = accepted[k];
    const int64_t example_id = k + 1;
    NamedValues server_values;
    PendingSignals p;
    p.device_index = static_cast<size_t>(k / config.samples_per_device);
    p.example_id = example_id;
    for (size_t j = 0; j < d; ++j) {
      const double x = scales[j] * ex.z[j];
      switch (features[j].origin) {
        case FeatureOrigin::kServer:
          server_values[features[j].name] = x;
          break;
        case FeatureOrigin::kDevice:
          p.signals[features[j].name] = x;
          break;
        case FeatureOrigin::kBoth:
          server_values[features[j].name] =
              x + config.server_signal_noise * scales[j] *
                      example_rng.Gaussian();
          p.signals[features[j].name] =
              x + config.device_signal_noise * scales[j] *
                      example_rng.Gaussian();
          break;
      }
    }
    absl::StatusOr<ServerFeatureRecord> record =
        MakeServerRecord(population.schema, example_id, server_values);
    if (!record.ok()) return record.status();
    population.server_records.push_back(std::move(*record));
    population.label_records.push_back(
        {example_id, ex.label,
         example_id % 5 == 0 ? LabelSource::kHumanRater
                             : LabelSource::kServerEvent});
    pending.push_back(std::move(p));
  }
  if (absl::Status s = DeliverExamples(population, pending); !s.ok()) return s;
  return population;
}

// Fixture layout, one record per line:
//   population devices= samples_per_device= positive_rate= disparity=
//              device_noise= server_noise= bias= seed=
//   true_weight index= value=
//   feature name= origin= lo= hi=
//   device index= id= key= battery= network= idle= storage= app_version=
//          ticks=
//   server_record example= <feature>=...
//   label_record example= label= source=
//   signals device= example= <feature>=...
std::string SerializePopulation(const Population& population) {
  const PopulationConfig& c = population.config;
  std::string out = "# fedsim population fixture v1\n";
  auto emit = [&out](const LineRecord& r) {
    out += r.ToLine();
    out += '\n';
  };
  LineRecord header("population");
  header.Add("devices", c.device_count)
      .Add("samples_per_device", c.samples_per_device)
      .Add("positive_rate", c.positive_rate)
      .Add("disparity", c.scale_disparity)
      .Add("device_noise", c.device_signal_noise)
      .Add("server_noise", c.server_signal_noise)
      .Add("bias", c.true_bias)
      .Add("seed", c.seed);
  emit(header);
  for (size_t j = 0; j < c.true_weights.size(); ++j) {
    LineRecord r("true_weight");
    r.Add("index", static_cast<int64_t>(j)).Add("value", c.true_weights[j]);
    emit(r);
  }
  for (const FeatureDescriptor& f : population.schema.features()) {
    LineRecord r("feature");
    r.Add("name", f.name)
        .Add("origin", OriginName(f.origin))
        .Add("lo", f.lo)
        .Add("hi", f.hi);
    emit(r);
  }
  std::vector<PendingSignals> pending;
  for (size_t i = 0; i < population.devices.size(); ++i) {
    const DeviceState& d = population.devices[i];
    LineRecord r("device");
    r.Add("index", static_cast<int64_t>(i))
        .Add("id", d.device_id)
        .Add("key", d.key.material())
        .Add("battery", d.battery)
        .Add("network", NetworkName(d.network))
        .Add("idle", d.idle)
        .Add("storage", d.free_storage_bytes)
        .Add("app_version", d.app_version)
        .Add("ticks", d.signal_ticks);
    emit(r);
    absl::StatusOr<std::vector<LocalExample>> examples = LoadExamples(d);
    if (!examples.ok()) continue;
    for (const LocalExample& ex : *examples) {
      pending.push_back({i, ex.example_id, ex.signals});
    }
  }
  for (const ServerFeatureRecord& s : population.server_records) {
    LineRecord r("server_record");
    r.Add("example", s.example_id);
    for (const auto& [name, value] : s.values) r.Add(name, value);
    emit(r);
  }
  for (const LabelRecord& l : population.label_records) {
    LineRecord r("label_record");
    r.Add("example", l.example_id)
        .Add("label", l.label)
        .Add("source", LabelSourceName(l.source));
    emit(r);
  }
  for (const PendingSignals& p : pending) {
    LineRecord r("signals");
    r.Add("device", static_cast<int64_t>(p.device_index))
        .Add("example", p.example_id);
    for (const auto& [name, value] : p.signals) r.Add(name, value);
    emit(r);
  }
  return out;
}

absl::StatusOr<Population> ParsePopulation(std::string_view text) {
  Population population;
  std::vector<FeatureDescriptor> features;
  std::vector<PendingSignals> pending;
  bool have_header = false;
  auto bad = [](std::string_view what) {
    return absl::InvalidArgumentError(
        fmt::format("malformed population fixture: {}", what));
  };
  for (std::string_view line : RecordLines(text)) {
    absl::StatusOr<LineRecord> parsed = LineRecord::Parse(line);
    if (!parsed.ok()) return parsed.status();
    const LineRecord& r = *parsed;
    if (r.tag() == "population") {
      PopulationConfig& c = population.config;
      absl::StatusOr<int64_t> devices = r.GetInt("devices");
      absl::StatusOr<int64_t> spd = r.GetInt("samples_per_device");
      absl::StatusOr<double> rate = r.GetDouble("positive_rate");
      absl::StatusOr<double> disparity = r.GetDouble("disparity");
      absl::StatusOr<double> dn = r.GetDouble("device_noise");
      absl::StatusOr<double> sn = r.GetDouble("server_noise");
      absl::StatusOr<double> bias = r.GetDouble("bias");
      absl::StatusOr<std::string> seed = r.Get("seed");
      if (!devices.ok() || !spd.ok() || !rate.ok() || !disparity.ok() ||
          !dn.ok() || !sn.ok() || !bias.ok() || !seed.ok()) {
        return bad("population header");
      }
      c.device_count = *devices;
      c.samples_per_device = static_cast<int>(*spd);
      c.positive_rate = *rate;
      c.scale_disparity = *disparity;
      c.device_signal_noise = *dn;
      c.server_signal_noise = *sn;
      c.true_bias = *bias;
      c.seed = std::stoull(*seed);
      c.true_weights.clear();
      have_header = true;
    } else if (r.tag() == "true_weight") {
      absl::StatusOr<double> v = r.GetDouble("value");
      if (!v.ok()) return bad("true_weight");
      population.config.true_weights.push_back(*v);
    } else if (r.tag() == "feature") {
      absl::StatusOr<std::string> name = r.Get("name");
      absl::StatusOr<std::string> origin = r.Get("origin");
      absl::StatusOr<double> lo = r.GetDouble("lo");
      absl::StatusOr<double> hi = r.GetDouble("hi");
      if (!name.ok() || !origin.ok() || !lo.ok() || !hi.ok() ||
          !ParseOrigin(*origin)) {
        return bad("feature");
      }
      features.push_back({*name, *ParseOrigin(*origin), *lo, *hi});
    } else if (r.tag() == "device") {
      absl::StatusOr<std::string> id = r.Get("id");
      absl::StatusOr<std::string> key = r.Get("key");
      absl::StatusOr<double> battery = r.GetDouble("battery");
      absl::StatusOr<std::string> network = r.Get("network");
      absl::StatusOr<int64_t> idle = r.GetInt("idle");
      absl::StatusOr<int64_t> storage = r.GetInt("storage");
      absl::StatusOr<int64_t> app = r.GetInt("app_version");
      absl::StatusOr<int64_t> ticks = r.GetInt("ticks");
      if (!id.ok() || !key.ok() || !battery.ok() || !network.ok() ||
          !idle.ok() || !storage.ok() || !app.ok() || !ticks.ok() ||
          !ParseNetwork(*network)) {
        return bad("device");
      }
      DeviceState d = MakeDevice(std::stoull(*id), std::stoull(*key));
      d.battery = *battery;
      d.network = *ParseNetwork(*network);
      d.idle = *idle != 0;
      d.free_storage_bytes = *storage;
      d.app_version = static_cast<int>(*app);
      d.signal_ticks = static_cast<int>(*ticks);
      population.devices.push_back(std::move(d));
    } else if (r.tag() == "server_record" || r.tag() == "signals") {
      absl::StatusOr<int64_t> example = r.GetInt("example");
      if (!example.ok()) return bad(r.tag());
      NamedValues values;
      PendingSignals p;
      p.example_id = *example;
      for (const auto& [key, raw] : r.fields()) {
        if (key == "example") continue;
        if (key == "device") {
          int64_t index;
          if (!ParseInt64(raw, &index) || index < 0) return bad("signals");
          p.device_index = static_cast<size_t>(index);
          continue;
        }
        double v;
        if (!ParseDouble(raw, &v)) return bad(r.tag());
        values[key] = v;
      }
      if (r.tag() == "signals") {
        p.signals = std::move(values);
        pending.push_back(std::move(p));
      } else {
        population.server_records.push_back({*example, std::move(values)});
      }
    } else if (r.tag() == "label_record") {
      absl::StatusOr<int64_t> example = r.GetInt("example");
      absl::StatusOr<int64_t> label = r.GetInt("label");
      absl::StatusOr<std::string> source = r.Get("source");
      if (!example.ok() || !label.ok() || !source.ok() ||
          !ParseLabelSource(*source)) {
        return bad("label_record");
      }
      population.label_records.push_back(
          {*example, static_cast<int>(*label), *ParseLabelSource(*source)});
    } else {
      return bad(fmt::format("unknown record '{}'", r.tag()));
    }
  }
  if (!have_header) return bad("missing population header");
  absl::StatusOr<FeatureSchema> schema = FeatureSchema::Create(features);
  if (!schema.ok()) return schema.status();
  population.schema = *schema;
  for (const ServerFeatureRecord& s : population.server_records) {
    if (absl::StatusOr<ServerFeatureRecord> checked =
            MakeServerRecord(population.schema, s.example_id, s.values);
        !checked.ok()) {
      return checked.status();
    }
  }
  if (absl::Status s = DeliverExamples(population, pending); !s.ok()) return s;
  return population;
}

}  // namespace fedsim
