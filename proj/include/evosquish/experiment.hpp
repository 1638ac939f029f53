// Copyright 2026 The evosquish Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EVOSQUISH_EXPERIMENT_HPP_
#define EVOSQUISH_EXPERIMENT_HPP_

// Run configuration and size/accuracy/speed reporting behind the CLI.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "evosquish/evo_synth.hpp"
#include "evosquish/evolution.hpp"
#include "evosquish/net_ir.hpp"
#include "evosquish/tensor.hpp"

namespace evosquish {

enum class SeedArch { kSqueezeNetV11, kSqueezeNetMini, kManifest };

std::string_view SeedArchName(SeedArch arch);
SeedArch ParseSeedArch(std::string_view name);

inline constexpr std::string_view kRunSchema = "evosquish.run/1";

// Defaults reflect the desk-scale setup: squeezenet-mini on 10 classes,
// R = 0.9, 15 generations.
struct RunConfig {
  SeedArch seed = SeedArch::kSqueezeNetMini;
  std::filesystem::path arch_manifest;  // for SeedArch::kManifest
  int num_classes = 10;
  EnvironmentConfig env;
  EncodingOptions encoding{1e-3, 0.05};
  TrainConfig train;
  int generations = 15;
  std::filesystem::path dataset;
  std::filesystem::path out_dir;
  bool measure_timing = true;
  int bench_batch = 32;
  double bench_seconds = 0.25;

  // Throws kInvalidConfig / kInvalidEnvironmentFactor.
  void Validate() const;
};

// Relative paths resolve against base_dir. Unknown keys are rejected.
RunConfig RunConfigFromJson(std::string_view text, const std::filesystem::path& base_dir = {});
std::string RunConfigToJson(const RunConfig& cfg);
RunConfig ReadRunConfig(const std::filesystem::path& path);

// Builds (and retargets when needed) the configured seed network.
ArchGraph BuildSeed(const RunConfig& cfg);

// reference / size, e.g. 4.915 MB / 0.95 MB = 5.17X.
double ReductionFactor(double reference_bytes, double bytes);

struct ReportRow {
  int generation = 0;
  std::uint64_t live_params = 0;
  std::uint64_t model_size_bytes = 0;
  std::uint64_t macs = 0;
  double reduction_vs_seed = 1.0;
  std::optional<double> reduction_vs_baseline;
  double images_per_sec = 0.0;
  double top1 = 0.0;
};

// Ratios are recomputed from raw bytes; generation 0 is the seed.
std::vector<ReportRow> BuildReport(const std::vector<GenerationRecord>& records,
                                   std::optional<double> baseline_bytes = std::nullopt);

std::string ReportToCsv(const std::vector<ReportRow>& rows);
std::string ReportToJson(const std::vector<ReportRow>& rows);
// Two line charts: model size (MB) against generation, top-1 against generation.
std::string ReportToSvg(const std::vector<ReportRow>& rows);

}  // namespace evosquish

#endif  // EVOSQUISH_EXPERIMENT_HPP_
