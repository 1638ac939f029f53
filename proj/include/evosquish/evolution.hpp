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

#ifndef EVOSQUISH_EVOLUTION_HPP_
#define EVOSQUISH_EVOLUTION_HPP_

// The generation loop: train and measure the seed, then repeatedly encode the
// latest network, synthesize one offspring, fine-tune and measure it.
//
// Artifacts per generation, under the output directory:
//   gen_<g>/arch.json  gen_<g>/masks.bin  gen_<g>/weights.bin
//   gen_<g>/train_log.csv  gen_<g>/record.json (written last)
// plus evolution.csv with one row per generation.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "evosquish/data_io.hpp"
#include "evosquish/engine.hpp"
#include "evosquish/evo_synth.hpp"
#include "evosquish/net_ir.hpp"

namespace evosquish {

struct GenerationRecord {
  int generation = 0;
  std::uint64_t live_params = 0;
  std::uint64_t model_size_bytes = 0;
  std::uint64_t macs = 0;
  double top1 = 0.0;
  double images_per_sec = 0.0;
  double train_sec = 0.0;

  // Throws kFormat unless every field is finite, non-negative and top1 <= 1.
  void Validate() const;
  bool operator==(const GenerationRecord&) const = default;
};

inline constexpr std::string_view kEvolutionCsvHeader =
    "generation,live_params,model_size_bytes,macs,top1,images_per_sec,train_sec";

std::string RecordToCsvRow(const GenerationRecord& r);
GenerationRecord RecordFromCsvRow(std::string_view row);
std::string RecordToJson(const GenerationRecord& r);
GenerationRecord RecordFromJson(std::string_view text);

// Rows of an evolution.csv, header checked. Throws kFormat.
std::vector<GenerationRecord> ReadEvolutionCsv(const std::filesystem::path& path);

std::filesystem::path GenerationDir(const std::filesystem::path& run_dir, int generation);

struct EvolutionOptions {
  // Empty disables persistence and resume.
  std::filesystem::path out_dir;
  // Continue after the last generation whose record.json exists.
  bool resume = true;
  // Wall-clock columns (images_per_sec, train_sec) are zero when false, which
  // makes evolution.csv a pure function of the inputs.
  bool measure_timing = true;
  int bench_batch = kDefaultBenchBatch;
  double bench_seconds = 0.25;
  // Return after this generation is persisted; negative runs to the end.
  int stop_after = -1;
  EncodingOptions encoding;
  // Replaces the derived encoding with all-ones probabilities.
  bool force_unit_encoding = false;
  EngineOptions engine;
  std::function<void(const GenerationRecord&)> on_record;
  std::function<void(const std::string&)> log;
};

// Returns the records of generations 0..generations (those completed). All
// randomness derives from env.rng_seed and train.rng_seed per generation.
std::vector<GenerationRecord> RunEvolution(const ArchGraph& seed_arch, const EnvironmentConfig& env,
                                           int generations, const TrainConfig& train,
                                           const DataStore& data, const EvolutionOptions& opts = {});

}  // namespace evosquish

#endif  // EVOSQUISH_EVOLUTION_HPP_
