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

#include "evosquish/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "binary_io.hpp"
#include "evosquish/arch_io.hpp"
#include "evosquish/error.hpp"
#include "json.hpp"

namespace evosquish {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void RejectUnknown(const json& obj, std::initializer_list<std::string_view> allowed,
                   const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorCode::kInvalidConfig, where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw Error(ErrorCode::kInvalidConfig, "unknown key '" + key + "' in " + where);
    }
  }
}

fs::path ResolvePath(const fs::path& p, const fs::path& base) {
  return p.empty() || p.is_absolute() || base.empty() ? p : base / p;
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string_view SeedArchName(SeedArch arch) {
  switch (arch) {
    case SeedArch::kSqueezeNetV11: return "squeezenet-v11";
    case SeedArch::kSqueezeNetMini: return "squeezenet-mini";
    case SeedArch::kManifest: return "manifest";
  }
  return "?";
}

SeedArch ParseSeedArch(std::string_view name) {
  for (auto a : {SeedArch::kSqueezeNetV11, SeedArch::kSqueezeNetMini, SeedArch::kManifest}) {
    if (SeedArchName(a) == name) return a;
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown seed architecture '" + std::string(name) + "'");
}

void RunConfig::Validate() const {
  if (num_classes < 1) throw Error(ErrorCode::kInvalidClassCount, "num_classes must be >= 1");
  if (generations < 1) throw Error(ErrorCode::kInvalidConfig, "generations must be >= 1");
  if (seed == SeedArch::kManifest && arch_manifest.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "seed.manifest is required for a manifest seed");
  }
  if (dataset.empty()) throw Error(ErrorCode::kInvalidConfig, "dataset path is required");
  if (bench_batch < 1) throw Error(ErrorCode::kInvalidConfig, "bench_batch must be >= 1");
  if (!(bench_seconds >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "bench_seconds must be >= 0");
  env.Validate();
  encoding.Validate();
  train.Validate();
}

RunConfig RunConfigFromJson(std::string_view text, const fs::path& base_dir) {
  RunConfig cfg;
  try {
    const json doc = json::parse(text);
    RejectUnknown(doc, {"schema", "seed", "environment", "encoding", "train", "generations",
                        "dataset", "out_dir", "measure_timing", "bench_batch", "bench_seconds"},
                  "run config");
    if (doc.value("schema", std::string()) != kRunSchema) {
      throw Error(ErrorCode::kInvalidConfig, "run config needs \"schema\": \"evosquish.run/1\"");
    }
    if (doc.contains("seed")) {
      const auto& s = doc["seed"];
      RejectUnknown(s, {"arch", "manifest", "num_classes"}, "seed");
      cfg.seed = ParseSeedArch(s.value("arch", std::string(SeedArchName(cfg.seed))));
      cfg.arch_manifest = ResolvePath(s.value("manifest", std::string()), base_dir);
      cfg.num_classes = s.value("num_classes", cfg.num_classes);
    }
    if (doc.contains("environment")) {
      const auto& e = doc["environment"];
      RejectUnknown(e, {"R", "min_filters_per_layer", "max_resample_attempts", "rng_seed"}, "environment");
      cfg.env.factor = e.value("R", cfg.env.factor);
      cfg.env.min_filters_per_layer = e.value("min_filters_per_layer", cfg.env.min_filters_per_layer);
      cfg.env.max_resample_attempts = e.value("max_resample_attempts", cfg.env.max_resample_attempts);
      cfg.env.rng_seed = e.value("rng_seed", cfg.env.rng_seed);
    }
    if (doc.contains("encoding")) {
      const auto& e = doc["encoding"];
      RejectUnknown(e, {"floor", "reference_quantile"}, "encoding");
      cfg.encoding.floor = e.value("floor", cfg.encoding.floor);
      cfg.encoding.reference_quantile = e.value("reference_quantile", cfg.encoding.reference_quantile);
    }
    if (doc.contains("train")) {
      const auto& t = doc["train"];
      RejectUnknown(t, {"epochs", "batch_size", "learning_rate", "momentum", "lr_decay",
                        "weight_decay", "rng_seed", "hflip", "pad_crop"},
                    "train");
      TrainConfig& tc = cfg.train;
      tc.epochs = t.value("epochs", tc.epochs);
      tc.batch_size = t.value("batch_size", tc.batch_size);
      tc.learning_rate = t.value("learning_rate", tc.learning_rate);
      tc.momentum = t.value("momentum", tc.momentum);
      tc.lr_decay = t.value("lr_decay", tc.lr_decay);
      tc.weight_decay = t.value("weight_decay", tc.weight_decay);
      tc.rng_seed = t.value("rng_seed", tc.rng_seed);
      tc.hflip = t.value("hflip", tc.hflip);
      tc.pad_crop = t.value("pad_crop", tc.pad_crop);
    }
    cfg.generations = doc.value("generations", cfg.generations);
    cfg.dataset = ResolvePath(doc.value("dataset", std::string()), base_dir);
    cfg.out_dir = ResolvePath(doc.value("out_dir", std::string()), base_dir);
    cfg.measure_timing = doc.value("measure_timing", cfg.measure_timing);
    cfg.bench_batch = doc.value("bench_batch", cfg.bench_batch);
    cfg.bench_seconds = doc.value("bench_seconds", cfg.bench_seconds);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kInvalidConfig, std::string("run config: ") + e.what());
  }
  cfg.Validate();
  return cfg;
}

std::string RunConfigToJson(const RunConfig& cfg) {
  json doc = {
      {"schema", kRunSchema},
      {"seed", {{"arch", SeedArchName(cfg.seed)},
                {"manifest", cfg.arch_manifest.string()},
                {"num_classes", cfg.num_classes}}},
      {"environment", {{"R", cfg.env.factor},
                       {"min_filters_per_layer", cfg.env.min_filters_per_layer},
                       {"max_resample_attempts", cfg.env.max_resample_attempts},
                       {"rng_seed", cfg.env.rng_seed}}},
      {"encoding", {{"floor", cfg.encoding.floor},
                    {"reference_quantile", cfg.encoding.reference_quantile}}},
      {"train", {{"epochs", cfg.train.epochs},
                 {"batch_size", cfg.train.batch_size},
                 {"learning_rate", cfg.train.learning_rate},
                 {"momentum", cfg.train.momentum},
                 {"lr_decay", cfg.train.lr_decay},
                 {"weight_decay", cfg.train.weight_decay},
                 {"rng_seed", cfg.train.rng_seed},
                 {"hflip", cfg.train.hflip},
                 {"pad_crop", cfg.train.pad_crop}}},
      {"generations", cfg.generations},
      {"dataset", cfg.dataset.string()},
      {"out_dir", cfg.out_dir.string()},
      {"measure_timing", cfg.measure_timing},
      {"bench_batch", cfg.bench_batch},
      {"bench_seconds", cfg.bench_seconds},
  };
  return doc.dump(2) + "\n";
}

RunConfig ReadRunConfig(const fs::path& path) {
  return RunConfigFromJson(detail::ReadFileBytes(path), path.parent_path());
}

ArchGraph BuildSeed(const RunConfig& cfg) {
  switch (cfg.seed) {
    case SeedArch::kSqueezeNetV11:
      return BuildSqueezeNetV11(cfg.num_classes);
    case SeedArch::kSqueezeNetMini:
      return BuildSqueezeNetMini(cfg.num_classes);
    case SeedArch::kManifest: {
      ArchGraph arch = ReadArch(cfg.arch_manifest);
      return arch.num_classes == cfg.num_classes ? arch : RetargetClasses(arch, cfg.num_classes);
    }
  }
  throw Error(ErrorCode::kInvalidConfig, "unknown seed");
}

double ReductionFactor(double reference_bytes, double bytes) {
  if (!(bytes > 0.0)) throw Error(ErrorCode::kFormat, "model size must be positive");
  return reference_bytes / bytes;
}

std::vector<ReportRow> BuildReport(const std::vector<GenerationRecord>& records,
                                   std::optional<double> baseline_bytes) {
  if (records.empty() || records.front().generation != 0) {
    throw Error(ErrorCode::kFormat, "report needs the seed (generation 0) record first");
  }
  const double seed_bytes = static_cast<double>(records.front().model_size_bytes);
  std::vector<ReportRow> rows;
  for (const auto& r : records) {
    ReportRow row;
    row.generation = r.generation;
    row.live_params = r.live_params;
    row.model_size_bytes = r.model_size_bytes;
    row.macs = r.macs;
    row.reduction_vs_seed = ReductionFactor(seed_bytes, static_cast<double>(r.model_size_bytes));
    if (baseline_bytes) {
      row.reduction_vs_baseline = ReductionFactor(*baseline_bytes, static_cast<double>(r.model_size_bytes));
    }
    row.images_per_sec = r.images_per_sec;
    row.top1 = r.top1;
    rows.push_back(row);
  }
  return rows;
}

std::string ReportToCsv(const std::vector<ReportRow>& rows) {
  std::ostringstream out;
  out << "generation,model_size_bytes,model_size_mb,model_size_mib,reduction_vs_seed,"
         "reduction_vs_baseline,images_per_sec,top1,macs,live_params\n";
  for (const auto& r : rows) {
    const double bytes = static_cast<double>(r.model_size_bytes);
    out << r.generation << ',' << r.model_size_bytes << ',' << Fixed(bytes / 1e6, 4) << ','
        << Fixed(bytes / (1024.0 * 1024.0), 4) << ',' << Fixed(r.reduction_vs_seed, 3) << ','
        << (r.reduction_vs_baseline ? Fixed(*r.reduction_vs_baseline, 3) : std::string()) << ','
        << Fixed(r.images_per_sec, 2) << ',' << Fixed(r.top1, 4) << ',' << r.macs << ','
        << r.live_params << '\n';
  }
  return out.str();
}

std::string ReportToJson(const std::vector<ReportRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    const double bytes = static_cast<double>(r.model_size_bytes);
    json j = {{"generation", r.generation},
              {"model_size_bytes", r.model_size_bytes},
              {"model_size_mb", bytes / 1e6},
              {"model_size_mib", bytes / (1024.0 * 1024.0)},
              {"reduction_vs_seed", r.reduction_vs_seed},
              {"images_per_sec", r.images_per_sec},
              {"top1", r.top1},
              {"macs", r.macs},
              {"live_params", r.live_params}};
    j["reduction_vs_baseline"] = r.reduction_vs_baseline ? json(*r.reduction_vs_baseline) : json(nullptr);
    arr.push_back(std::move(j));
  }
  return json({{"generations", arr}}).dump(2) + "\n";
}

std::string ReportToSvg(const std::vector<ReportRow>& rows) {
  constexpr double kW = 360, kH = 240, kLeft = 56, kRight = 16, kTop = 28, kBottom = 40;
  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * kW << "\" height=\"" << kH
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  auto chart = [&](double x0, const std::string& title, auto value, double lo, double hi, int digits) {
    if (hi <= lo) hi = lo + 1.0;
    const int last_gen = std::max(1, rows.back().generation);
    const double pw = kW - kLeft - kRight;
    const double ph = kH - kTop - kBottom;
    auto px = [&](int g) { return x0 + kLeft + pw * g / last_gen; };
    auto py = [&](double v) { return kTop + ph * (1.0 - (v - lo) / (hi - lo)); };
    svg << "<text x=\"" << x0 + kW / 2 << "\" y=\"16\" text-anchor=\"middle\">" << title << "</text>\n";
    svg << "<rect x=\"" << x0 + kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"#888\"/>\n";
    for (int t = 0; t <= 4; ++t) {
      const double v = lo + (hi - lo) * t / 4.0;
      svg << "<text x=\"" << x0 + kLeft - 4 << "\" y=\"" << py(v) + 4 << "\" text-anchor=\"end\">"
          << Fixed(v, digits) << "</text>\n";
    }
    svg << "<text x=\"" << x0 + kLeft << "\" y=\"" << kH - 22 << "\">0</text>\n";
    svg << "<text x=\"" << x0 + kW - kRight << "\" y=\"" << kH - 22 << "\" text-anchor=\"end\">"
        << last_gen << "</text>\n";
    svg << "<text x=\"" << x0 + kW / 2 << "\" y=\"" << kH - 8 << "\" text-anchor=\"middle\">generation</text>\n";
    svg << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"";
    for (const auto& r : rows) svg << Fixed(px(r.generation), 1) << ',' << Fixed(py(value(r)), 1) << ' ';
    svg << "\"/>\n";
    for (const auto& r : rows) {
      svg << "<circle cx=\"" << Fixed(px(r.generation), 1) << "\" cy=\"" << Fixed(py(value(r)), 1)
          << "\" r=\"2.5\" fill=\"#1f77b4\"/>\n";
    }
  };
  auto mb = [](const ReportRow& r) { return static_cast<double>(r.model_size_bytes) / 1e6; };
  auto top1 = [](const ReportRow& r) { return r.top1; };
  double max_mb = 0.0;
  for (const auto& r : rows) max_mb = std::max(max_mb, mb(r));
  chart(0, "model size (MB)", mb, 0.0, max_mb * 1.05, 3);
  chart(kW, "top-1 accuracy", top1, 0.0, 1.0, 2);
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace evosquish
