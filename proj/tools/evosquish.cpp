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

// evosquish: build seed networks, evolve them, benchmark and report.
//
// Exit codes: 0 ok, 2 config/input error, 3 evolution degeneracy,
// 4 numeric failure.

#include <sys/file.h>
#include <fcntl.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "evosquish/arch_io.hpp"
#include "evosquish/data_io.hpp"
#include "evosquish/engine.hpp"
#include "evosquish/error.hpp"
#include "evosquish/evolution.hpp"
#include "evosquish/experiment.hpp"
#include "evosquish/net_ir.hpp"

namespace fs = std::filesystem;
using namespace evosquish;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitNumeric = 4;

int ExitCodeFor(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kDegenerateArchitecture: return kExitDegenerate;
    case ErrorCode::kNumericOverflow: return kExitNumeric;
    default: return kExitInput;
  }
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

std::string ReadText(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Holds an exclusive flock on <dir>/.evosquish.lock for the process lifetime.
class RunLock {
 public:
  explicit RunLock(const fs::path& dir) {
    const auto path = (dir / ".evosquish.lock").string();
    fd_ = ::open(path.c_str(), O_CREAT | O_RDWR, 0644);
    if (fd_ < 0) throw Error(ErrorCode::kIo, "cannot create " + path);
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      fd_ = -1;
      throw Error(ErrorCode::kInvalidConfig, dir.string() + " is in use by another evolve");
    }
  }
  ~RunLock() {
    if (fd_ >= 0) ::close(fd_);
  }
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  int fd_ = -1;
};

struct BuildArgs {
  std::string arch = "squeezenet-v11";
  std::string manifest;
  int classes = 10;
  std::string out;
};

int RunBuild(const BuildArgs& a) {
  ArchGraph arch;
  if (!a.manifest.empty()) {
    arch = ReadArch(a.manifest);
    if (arch.num_classes != a.classes) arch = RetargetClasses(arch, a.classes);
  } else if (ParseSeedArch(a.arch) == SeedArch::kSqueezeNetV11) {
    arch = BuildSqueezeNetV11(a.classes);
  } else if (ParseSeedArch(a.arch) == SeedArch::kSqueezeNetMini) {
    arch = BuildSqueezeNetMini(a.classes);
  } else {
    throw Error(ErrorCode::kInvalidConfig, "--arch manifest needs --manifest");
  }
  fs::create_directories(a.out);
  const SizeReport size = ReportSize(arch);
  WriteArch(fs::path(a.out) / "arch.json", arch);
  WriteMasks(fs::path(a.out) / "masks.bin", arch);
  WriteText(fs::path(a.out) / "size_report.json", SizeReportToJson(size));
  WriteText(fs::path(a.out) / "size_report.csv", SizeReportToCsv(size));
  std::cout << "params: " << size.live_params << "\n"
            << "size_bytes: " << size.model_size_bytes << " (" << size.ModelSizeMB() << " MB, "
            << size.ModelSizeMiB() << " MiB)\n"
            << "macs: " << size.macs << "\n";
  return kExitOk;
}

struct EvolveArgs {
  std::string config;
  std::string out;
  int stop_after = -1;
  bool quiet = false;
};

int RunEvolve(const EvolveArgs& a) {
  RunConfig cfg = ReadRunConfig(a.config);
  if (!a.out.empty()) cfg.out_dir = a.out;
  if (cfg.out_dir.empty()) throw Error(ErrorCode::kInvalidConfig, "no output directory: set out_dir or pass --out");
  fs::create_directories(cfg.out_dir);
  RunLock lock(cfg.out_dir);

  const std::string canonical = RunConfigToJson(cfg);
  const fs::path saved = cfg.out_dir / "run.json";
  if (fs::exists(saved) && fs::exists(cfg.out_dir / "evolution.csv")) {
    if (ReadText(saved) != canonical) {
      throw Error(ErrorCode::kInvalidConfig,
                  "run directory holds a different configuration; use a fresh --out");
    }
  } else {
    WriteText(saved, canonical);
  }

  const ArchGraph seed = BuildSeed(cfg);
  DataStore data = LoadDataset(ReadManifest(cfg.dataset));
  WriteManifest(cfg.out_dir / "dataset.json", data.manifest);

  EvolutionOptions opts;
  opts.out_dir = cfg.out_dir;
  opts.measure_timing = cfg.measure_timing;
  opts.bench_batch = cfg.bench_batch;
  opts.bench_seconds = cfg.bench_seconds;
  opts.stop_after = a.stop_after;
  opts.encoding = cfg.encoding;
  if (!a.quiet) opts.log = [](const std::string& line) { std::cerr << line << std::endl; };
  const auto records = RunEvolution(seed, cfg.env, cfg.generations, cfg.train, data, opts);
  std::cout << "generations recorded: " << records.size() << "\n"
            << "evolution.csv: " << (cfg.out_dir / "evolution.csv").string() << "\n";
  return kExitOk;
}

struct LoadedGeneration {
  ArchGraph arch;
  WeightStore weights;
};

LoadedGeneration LoadGeneration(const fs::path& dir) {
  for (const char* f : {"arch.json", "masks.bin", "weights.bin"}) {
    if (!fs::exists(dir / f)) throw Error(ErrorCode::kIo, "missing " + (dir / f).string());
  }
  LoadedGeneration g;
  g.arch = ReadArch(dir / "arch.json");
  ReadMasks(dir / "masks.bin", g.arch);
  g.weights = ReadWeights(dir / "weights.bin", g.arch);
  return g;
}

struct BenchArgs {
  std::string gen;
  std::string reference;
  int batch = kDefaultBenchBatch;
  double duration = 1.0;
};

int RunBench(const BenchArgs& a) {
  const LoadedGeneration g = LoadGeneration(a.gen);
  const Throughput t = BenchmarkThroughput(g.arch, g.weights, a.batch, a.duration);
  std::cout << "batch_size: " << t.batch_size << "\n"
            << "batches: " << t.batches << "\n"
            << "images_per_sec: " << t.images_per_sec << "\n"
            << "macs: " << t.macs << "\n";
  if (!a.reference.empty()) {
    const LoadedGeneration ref = LoadGeneration(a.reference);
    const auto ref_macs = ReportSize(ref.arch).macs;
    std::cout << "reference_macs: " << ref_macs << "\n"
              << "macs_ratio: " << static_cast<double>(t.macs) / static_cast<double>(ref_macs) << "\n";
  }
  return kExitOk;
}

struct ReportArgs {
  std::string run;
  std::string format = "csv";
  std::optional<double> baseline_bytes;
  bool to_stdout = false;
};

int RunReport(const ReportArgs& a) {
  if (!fs::is_directory(a.run)) throw Error(ErrorCode::kFormat, a.run + " is not a run directory");
  const auto records = ReadEvolutionCsv(fs::path(a.run) / "evolution.csv");
  const auto rows = BuildReport(records, a.baseline_bytes);
  std::string text;
  if (a.format == "csv") {
    text = ReportToCsv(rows);
  } else if (a.format == "json") {
    text = ReportToJson(rows);
  } else {
    text = ReportToSvg(rows);
  }
  if (a.to_stdout) {
    std::cout << text;
  } else {
    const fs::path out = fs::path(a.run) / ("report." + a.format);
    WriteText(out, text);
    std::cout << out.string() << "\n";
  }
  return kExitOk;
}

struct SynthArgs {
  std::string out;
  std::size_t train = 5000;
  std::size_t test = 1000;
  std::uint64_t seed = 1;
};

int RunSynth(const SynthArgs& a) {
  fs::create_directories(a.out);
  const fs::path dir(a.out);
  WriteText(dir / "data_batch_1.bin", EncodeCifarBinary(MakeSyntheticCifar(a.train, a.seed)));
  WriteText(dir / "test_batch.bin", EncodeCifarBinary(MakeSyntheticCifar(a.test, ~a.seed)));
  DatasetManifest m = Cifar10Manifest(".");
  m.name = "synthetic-cifar";
  m.root = ".";
  m.train_files = {"data_batch_1.bin"};
  m.test_files = {"test_batch.bin"};
  WriteManifest(dir / "dataset.json", m);
  std::cout << (dir / "dataset.json").string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* threads = std::getenv("EVOSQUISH_THREADS")) {
    SetComputeThreads(std::atoi(threads));
  }

  CLI::App app{"Evolutionary synthesis of compact Fire-module convnets"};
  app.require_subcommand(1);

  BuildArgs build;
  auto* build_cmd = app.add_subcommand("build", "Build a seed network and write its size report");
  build_cmd->add_option("--arch", build.arch, "squeezenet-v11 | squeezenet-mini")->capture_default_str();
  build_cmd->add_option("--manifest", build.manifest, "Start from an arch.json instead");
  build_cmd->add_option("--classes", build.classes, "Number of output classes")->capture_default_str();
  build_cmd->add_option("--out", build.out, "Output directory")->required();

  EvolveArgs evolve;
  auto* evolve_cmd = app.add_subcommand("evolve", "Run (or resume) the generation loop");
  evolve_cmd->add_option("--config", evolve.config, "Run configuration JSON")->required();
  evolve_cmd->add_option("--out", evolve.out, "Override the configured output directory");
  evolve_cmd->add_option("--stop-after", evolve.stop_after, "Stop once this generation is saved");
  evolve_cmd->add_flag("--quiet", evolve.quiet, "No per-generation log on stderr");

  BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Measure inference throughput of a saved generation");
  bench_cmd->add_option("--gen", bench.gen, "Generation directory (gen_<g>)")->required();
  bench_cmd->add_option("--batch", bench.batch, "Batch size")->capture_default_str();
  bench_cmd->add_option("--duration", bench.duration, "Seconds of timed passes")->capture_default_str();
  bench_cmd->add_option("--reference", bench.reference, "Generation directory to compare MACs with");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Summarize evolution.csv");
  report_cmd->add_option("--run", report.run, "Run directory")->required();
  report_cmd->add_option("--format", report.format, "csv | json | svg")
      ->check(CLI::IsMember({"csv", "json", "svg"}))
      ->capture_default_str();
  report_cmd->add_option("--baseline-bytes", report.baseline_bytes,
                         "Reference model size for an extra reduction column");
  report_cmd->add_flag("--stdout", report.to_stdout, "Print instead of writing report.<format>");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth-cifar", "Write a procedural CIFAR-format dataset");
  synth_cmd->add_option("--out", synth.out, "Output directory")->required();
  synth_cmd->add_option("--train", synth.train, "Training records")->capture_default_str();
  synth_cmd->add_option("--test", synth.test, "Test records")->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*build_cmd) return RunBuild(build);
    if (*evolve_cmd) return RunEvolve(evolve);
    if (*bench_cmd) return RunBench(bench);
    if (*report_cmd) return RunReport(report);
    if (*synth_cmd) return RunSynth(synth);
  } catch (const Error& e) {
    std::cerr << "evosquish: " << e.what() << "\n";
    return ExitCodeFor(e);
  } catch (const std::exception& e) {
    std::cerr << "evosquish: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
