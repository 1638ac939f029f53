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

#include "evosquish/arch_io.hpp"

#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "json.hpp"

namespace evosquish {

using nlohmann::json;

namespace detail {

std::string ReadFileBytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteFileBytes(const std::filesystem::path& path, std::string_view bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::kIo, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace detail

std::string ArchToJson(const ArchGraph& arch) {
  json layers = json::array();
  for (const auto& spec : arch.layers) {
    json j = {{"id", spec.id}, {"kind", KindName(spec.kind)}};
    json inputs = json::array();
    for (int p : spec.inputs) inputs.push_back(arch.layers[p].id);
    j["inputs"] = inputs;
    if (spec.kind == LayerKind::kConv || spec.kind == LayerKind::kMaxPool) {
      j["kernel"] = {spec.kernel_h, spec.kernel_w};
      j["stride"] = spec.stride;
      j["padding"] = spec.padding;
    }
    j["in_channels"] = spec.in_channels;
    j["out_channels"] = spec.out_channels;
    if (spec.IsConv()) {
      j["has_bias"] = spec.has_bias;
      j["relu"] = spec.relu;
    }
    layers.push_back(std::move(j));
  }
  json doc = {
      {"schema", kArchSchema},
      {"input_shape", {arch.input_shape.channels, arch.input_shape.height, arch.input_shape.width}},
      {"num_classes", arch.num_classes},
      {"layers", layers},
  };
  return doc.dump(2) + "\n";
}

ArchGraph ArchFromJson(std::string_view text) {
  ArchGraph arch;
  try {
    const json doc = json::parse(text);
    if (doc.at("schema").get<std::string>() != kArchSchema) {
      throw Error(ErrorCode::kFormat, "unsupported architecture schema");
    }
    const auto& shape = doc.at("input_shape");
    arch.input_shape = {shape.at(0).get<int>(), shape.at(1).get<int>(), shape.at(2).get<int>()};
    arch.num_classes = doc.at("num_classes").get<int>();
    for (const auto& j : doc.at("layers")) {
      LayerSpec spec;
      spec.id = j.at("id").get<std::string>();
      spec.kind = ParseKind(j.at("kind").get<std::string>());
      for (const auto& name : j.at("inputs")) {
        const int p = arch.Find(name.get<std::string>());
        if (p < 0) throw Error(ErrorCode::kInvalidArchitecture, "unknown input " + name.dump());
        spec.inputs.push_back(p);
      }
      if (j.contains("kernel")) {
        spec.kernel_h = j["kernel"].at(0).get<int>();
        spec.kernel_w = j["kernel"].at(1).get<int>();
        spec.stride = j.at("stride").get<int>();
        spec.padding = j.at("padding").get<int>();
      }
      spec.in_channels = j.at("in_channels").get<int>();
      spec.out_channels = j.at("out_channels").get<int>();
      spec.has_bias = j.value("has_bias", false);
      spec.relu = j.value("relu", false);
      arch.masks.emplace_back(spec.WeightCount(), std::uint8_t{1});
      arch.layers.push_back(std::move(spec));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("architecture manifest: ") + e.what());
  }
  Validate(arch);
  return arch;
}

std::string EncodeMasks(const ArchGraph& arch) {
  detail::ByteWriter w;
  w.Bytes(kMaskMagic);
  w.U32(1);
  const auto convs = arch.ConvIndices();
  w.U32(static_cast<std::uint32_t>(convs.size()));
  for (int l : convs) {
    const Mask& mask = arch.masks[l];
    std::vector<std::uint32_t> runs;
    std::uint8_t current = 0;
    std::uint32_t length = 0;
    for (auto bit : mask) {
      if (bit != current) {
        runs.push_back(length);
        current = bit;
        length = 0;
      }
      ++length;
    }
    runs.push_back(length);
    w.U32(static_cast<std::uint32_t>(l));
    w.U64(mask.size());
    w.U32(static_cast<std::uint32_t>(runs.size()));
    for (auto r : runs) w.U32(r);
  }
  return w.str();
}

void DecodeMasks(std::string_view bytes, ArchGraph& arch) {
  detail::ByteReader r(bytes, "mask file");
  if (r.Bytes(kMaskMagic.size()) != kMaskMagic) throw Error(ErrorCode::kFormat, "bad mask magic");
  if (r.U32() != 1) throw Error(ErrorCode::kFormat, "unsupported mask version");
  const std::uint32_t records = r.U32();
  std::vector<bool> seen(arch.layers.size(), false);
  for (std::uint32_t i = 0; i < records; ++i) {
    const std::uint32_t layer = r.U32();
    const std::uint64_t bits = r.U64();
    if (layer >= arch.layers.size() || !arch.layers[layer].IsConv() ||
        bits != arch.layers[layer].WeightCount()) {
      throw Error(ErrorCode::kShapeMismatch, "mask record does not match the architecture");
    }
    const std::uint32_t nruns = r.U32();
    Mask mask;
    mask.reserve(bits);
    std::uint8_t value = 0;
    for (std::uint32_t k = 0; k < nruns; ++k) {
      const std::uint32_t len = r.U32();
      if (mask.size() + len > bits) throw Error(ErrorCode::kFormat, "mask runs overflow");
      mask.insert(mask.end(), len, value);
      value ^= 1;
    }
    if (mask.size() != bits) throw Error(ErrorCode::kFormat, "mask runs underflow");
    arch.masks[layer] = std::move(mask);
    seen[layer] = true;
  }
  if (!r.AtEnd()) throw Error(ErrorCode::kFormat, "trailing bytes in mask file");
  for (int l : arch.ConvIndices()) {
    if (!seen[l]) throw Error(ErrorCode::kFormat, "mask file misses layer " + arch.layers[l].id);
  }
}

void WriteArch(const std::filesystem::path& path, const ArchGraph& arch) {
  detail::WriteFileBytes(path, ArchToJson(arch));
}

ArchGraph ReadArch(const std::filesystem::path& path) {
  return ArchFromJson(detail::ReadFileBytes(path));
}

void WriteMasks(const std::filesystem::path& path, const ArchGraph& arch) {
  detail::WriteFileBytes(path, EncodeMasks(arch));
}

void ReadMasks(const std::filesystem::path& path, ArchGraph& arch) {
  DecodeMasks(detail::ReadFileBytes(path), arch);
}

std::string SizeReportToJson(const SizeReport& report) {
  json rows = json::array();
  for (const auto& row : report.per_layer) {
    rows.push_back({{"layer_id", row.layer_id},
                    {"kind", KindName(row.kind)},
                    {"total_params", row.total_params},
                    {"live_params", row.live_params},
                    {"macs", row.macs}});
  }
  json doc = {{"live_params", report.live_params},
              {"total_params", report.total_params},
              {"model_size_bytes", report.model_size_bytes},
              {"model_size_mb", report.ModelSizeMB()},
              {"model_size_mib", report.ModelSizeMiB()},
              {"macs", report.macs},
              {"per_layer", rows}};
  return doc.dump(2) + "\n";
}

std::string SizeReportToCsv(const SizeReport& report) {
  std::ostringstream out;
  out << "layer_id,kind,total_params,live_params,macs\n";
  for (const auto& row : report.per_layer) {
    out << row.layer_id << ',' << KindName(row.kind) << ',' << row.total_params << ','
        << row.live_params << ',' << row.macs << '\n';
  }
  return out.str();
}

}  // namespace evosquish
