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

#include "evosquish/evolution.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "evosquish/arch_io.hpp"
#include "evosquish/error.hpp"
#include "evosquish/rng.hpp"
#include "json.hpp"

namespace evosquish {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 0x5EED;


void Log(const EvolutionOptions& opts, const std::string& line) {
  if (opts.log) opts.log(line);
}

bool Completed(const fs::path& run_dir, int g) {
  return fs::exists(GenerationDir(run_dir, g) / "record.json");
}

void Persist(const fs::path& run_dir, const ArchGraph& arch, const WeightStore& weights,
             const TrainResult& trained, const GenerationRecord& record) {
  const fs::path dir = GenerationDir(run_dir, record.generation);
  fs::create_directories(dir);
  WriteArch(dir / "arch.json", arch);
  WriteMasks(dir / "masks.bin", arch);
  WriteWeights(dir / "weights.bin", arch, weights);
  fs::remove(dir / "train_log.csv");
  AppendTrainLog(dir / "train_log.csv", trained);
  detail::WriteFileBytes(dir / "record.json", RecordToJson(record));

  const fs::path csv = run_dir / "evolution.csv";
  const bool fresh = !fs::exists(csv);
  std::ofstream out(csv, std::ios::app | std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot append to " + csv.string());
  if (fresh) out << kEvolutionCsvHeader << '\n';
  out << RecordToCsvRow(record) << '\n';
}

// Keeps the header and the first `rows` data rows of evolution.csv.
void TrimCsv(const fs::path& csv, int rows) {
  std::string kept;
  if (fs::exists(csv)) {
    std::istringstream in(detail::ReadFileBytes(csv));
    std::string line;
    for (int i = 0; i <= rows && std::getline(in, line); ++i) kept += line + '\n';
  }
  if (kept.empty()) kept = std::string(kEvolutionCsvHeader) + '\n';
  detail::WriteFileBytes(csv, kept);
}

}  // namespace

void GenerationRecord::Validate() const {
  const bool ok = generation >= 0 && std::isfinite(top1) && top1 >= 0.0 && top1 <= 1.0 &&
                  std::isfinite(images_per_sec) && images_per_sec >= 0.0 &&
                  std::isfinite(train_sec) && train_sec >= 0.0 &&
                  model_size_bytes == live_params * kBytesPerParam;
  if (!ok) throw Error(ErrorCode::kFormat, "generation record has invalid fields");
}

std::string RecordToCsvRow(const GenerationRecord& r) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%llu,%llu,%llu,%.6f,%.2f,%.3f", r.generation,
                static_cast<unsigned long long>(r.live_params),
                static_cast<unsigned long long>(r.model_size_bytes),
                static_cast<unsigned long long>(r.macs), r.top1, r.images_per_sec, r.train_sec);
  return buf;
}

GenerationRecord RecordFromCsvRow(std::string_view row) {
  GenerationRecord r;
  unsigned long long live = 0, bytes = 0, macs = 0;
  const std::string s(row);
  if (std::sscanf(s.c_str(), "%d,%llu,%llu,%llu,%lf,%lf,%lf", &r.generation, &live, &bytes, &macs,
                  &r.top1, &r.images_per_sec, &r.train_sec) != 7) {
    throw Error(ErrorCode::kFormat, "malformed evolution.csv row: " + s);
  }
  r.live_params = live;
  r.model_size_bytes = bytes;
  r.macs = macs;
  r.Validate();
  return r;
}

std::string RecordToJson(const GenerationRecord& r) {
  json j = {{"generation", r.generation},   {"live_params", r.live_params},
            {"model_size_bytes", r.model_size_bytes}, {"macs", r.macs},
            {"top1", r.top1},               {"images_per_sec", r.images_per_sec},
            {"train_sec", r.train_sec}};
  return j.dump(2) + "\n";
}

GenerationRecord RecordFromJson(std::string_view text) {
  GenerationRecord r;
  try {
    const json j = json::parse(text);
    r.generation = j.at("generation").get<int>();
    r.live_params = j.at("live_params").get<std::uint64_t>();
    r.model_size_bytes = j.at("model_size_bytes").get<std::uint64_t>();
    r.macs = j.at("macs").get<std::uint64_t>();
    r.top1 = j.at("top1").get<double>();
    r.images_per_sec = j.at("images_per_sec").get<double>();
    r.train_sec = j.at("train_sec").get<double>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("record.json: ") + e.what());
  }
  r.Validate();
  return r;
}

std::vector<GenerationRecord> ReadEvolutionCsv(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::kFormat, path.string() + " does not exist");
  std::istringstream in(detail::ReadFileBytes(path));
  std::string line;
  if (!std::getline(in, line) || line != kEvolutionCsvHeader) {
    throw Error(ErrorCode::kFormat, path.string() + " has an unexpected header");
  }
  std::vector<GenerationRecord> rows;
  while (std::getline(in, line)) {
    if (!line.empty()) rows.push_back(RecordFromCsvRow(line));
  }
  if (rows.empty()) throw Error(ErrorCode::kFormat, path.string() + " has no rows");
  return rows;
}

fs::path GenerationDir(const fs::path& run_dir, int generation) {
  return run_dir / ("gen_" + std::to_string(generation));
}

std::vector<GenerationRecord> RunEvolution(const ArchGraph& seed_arch, const EnvironmentConfig& env,
                                           int generations, const TrainConfig& train,
                                           const DataStore& data, const EvolutionOptions& opts) {
  Validate(seed_arch);
  env.Validate();
  train.Validate();
  opts.encoding.Validate();
  if (generations < 1) throw Error(ErrorCode::kInvalidConfig, "generations must be >= 1");
  if (data.train.size() == 0 || data.test.size() == 0) {
    throw Error(ErrorCode::kEmptyDataset, "evolution needs non-empty train and test splits");
  }
  if (data.train.shape != seed_arch.input_shape) {
    throw Error(ErrorCode::kShapeMismatch, "dataset images do not match the seed input shape");
  }
  const bool persist = !opts.out_dir.empty();
  std::vector<GenerationRecord> records;
  ArchGraph arch;
  WeightStore weights;
  int start = 0;

  if (persist) {
    fs::create_directories(opts.out_dir);
    int last = -1;
    if (opts.resume) {
      while (Completed(opts.out_dir, last + 1)) ++last;
    }
    for (int g = 0; g <= last; ++g) {
      records.push_back(RecordFromJson(detail::ReadFileBytes(GenerationDir(opts.out_dir, g) / "record.json")));
    }
    if (last >= 0) {
      const fs::path dir = GenerationDir(opts.out_dir, last);
      arch = ReadArch(dir / "arch.json");
      ReadMasks(dir / "masks.bin", arch);
      weights = ReadWeights(dir / "weights.bin", arch);
      start = last + 1;
      Log(opts, "resuming after generation " + std::to_string(last));
    }
    TrimCsv(opts.out_dir / "evolution.csv", start);
    for (int g = start; fs::exists(GenerationDir(opts.out_dir, g)); ++g) {
      fs::remove_all(GenerationDir(opts.out_dir, g));
    }
  }

  auto finish = [&](int g, const ArchGraph& a, const WeightStore& w, const TrainResult& trained,
                    double train_sec) {
    const SizeReport size = ReportSize(a);
    GenerationRecord r;
    r.generation = g;
    r.live_params = size.live_params;
    r.model_size_bytes = size.model_size_bytes;
    r.macs = size.macs;
    r.top1 = EvaluateTop1(a, w, data.test, opts.engine);
    if (opts.measure_timing) {
      r.images_per_sec =
          BenchmarkThroughput(a, w, opts.bench_batch, opts.bench_seconds, opts.engine).images_per_sec;
      r.train_sec = train_sec;
    }
    r.Validate();
    if (persist) Persist(opts.out_dir, a, w, trained, r);
    records.push_back(r);
    if (opts.on_record) opts.on_record(r);
    Log(opts, "gen " + std::to_string(g) + ": " + RecordToCsvRow(r));
  };

  auto train_generation = [&](int g, const ArchGraph& a, WeightStore w) {
    TrainConfig cfg = train;
    cfg.rng_seed = DeriveSeed(train.rng_seed, static_cast<std::uint64_t>(g));
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult trained = Train(a, std::move(w), data.train, cfg, opts.engine);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return std::make_pair(std::move(trained), sec);
  };

  if (start == 0) {
    arch = seed_arch;
    auto [trained, sec] = train_generation(0, arch, InitWeights(arch, DeriveSeed(train.rng_seed, kInitStream)));
    weights = trained.weights;
    finish(0, arch, weights, trained, sec);
    if (opts.stop_after == 0) return records;
  }

  for (int g = std::max(start, 1); g <= generations; ++g) {
    const GeneticEncoding enc = opts.force_unit_encoding
                                    ? UnitEncoding(arch, g - 1)
                                    : DeriveEncoding(arch, weights, g - 1, opts.encoding);
    EnvironmentConfig genv = env;
    genv.rng_seed = DeriveSeed(env.rng_seed, static_cast<std::uint64_t>(g));
    Offspring child;
    try {
      child = SynthesizeOffspring(enc, genv, arch, weights);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateArchitecture) throw;
      throw Error(ErrorCode::kDegenerateArchitecture,
                  "generation " + std::to_string(g) + ": " + e.what());
    }
    auto [trained, sec] = train_generation(g, child.arch, std::move(child.weights));
    arch = std::move(child.arch);
    weights = trained.weights;
    finish(g, arch, weights, trained, sec);
    if (opts.stop_after == g) break;
  }
  return records;
}

}  // namespace evosquish
