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

#include "evosquish/tensor.hpp"

#include <cmath>

#include "binary_io.hpp"
#include "evosquish/error.hpp"
#include "evosquish/rng.hpp"

namespace evosquish {

namespace {
constexpr std::string_view kWeightMagic = "EVSQWGTS";
}  // namespace

void TrainConfig::Validate() const {
  if (epochs < 0) throw Error(ErrorCode::kInvalidConfig, "epochs must be >= 0");
  if (batch_size < 1) throw Error(ErrorCode::kInvalidConfig, "batch_size must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::kInvalidConfig, "learning_rate must be finite and >= 0");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "momentum must lie in [0, 1)");
  }
  if (!(lr_decay > 0.0) || !std::isfinite(lr_decay)) {
    throw Error(ErrorCode::kInvalidConfig, "lr_decay must be positive");
  }
  if (!(weight_decay >= 0.0)) throw Error(ErrorCode::kInvalidConfig, "weight_decay must be >= 0");
}

WeightStore InitWeights(const ArchGraph& arch, std::uint64_t seed) {
  Validate(arch);
  WeightStore store;
  store.weights.resize(arch.layers.size());
  store.biases.resize(arch.layers.size());
  Rng rng(seed);
  for (int l : arch.ConvIndices()) {
    const LayerSpec& spec = arch.layers[l];
    const double bound = std::sqrt(6.0 / static_cast<double>(spec.FanIn()));
    auto& w = store.weights[l];
    w.resize(spec.WeightCount());
    for (auto& v : w) v = static_cast<float>(rng.Uniform(-bound, bound));
    if (spec.has_bias) store.biases[l].assign(spec.out_channels, 0.0f);
  }
  ApplyMasks(arch, store);
  return store;
}

template <typename Real>
void CheckWeightShapes(const ArchGraph& arch, const BasicWeightStore<Real>& weights) {
  if (weights.weights.size() != arch.layers.size() || weights.biases.size() != arch.layers.size()) {
    throw Error(ErrorCode::kShapeMismatch, "weight store layer count differs from graph");
  }
  for (std::size_t l = 0; l < arch.layers.size(); ++l) {
    const LayerSpec& spec = arch.layers[l];
    const std::size_t nb = spec.IsConv() && spec.has_bias ? spec.out_channels : 0;
    if (weights.weights[l].size() != spec.WeightCount() || weights.biases[l].size() != nb) {
      throw Error(ErrorCode::kShapeMismatch, "weights of layer '" + spec.id + "' have wrong size");
    }
  }
}

template <typename Real>
void ApplyMasks(const ArchGraph& arch, BasicWeightStore<Real>& weights) {
  CheckWeightShapes(arch, weights);
  for (int l : arch.ConvIndices()) {
    const LayerSpec& spec = arch.layers[l];
    const Mask& mask = arch.masks[l];
    auto& w = weights.weights[l];
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (!mask[i]) w[i] = Real{0};
    }
    if (spec.has_bias) {
      for (int o = 0; o < spec.out_channels; ++o) {
        if (!FilterLive(arch, l, o)) weights.biases[l][o] = Real{0};
      }
    }
  }
}

template void CheckWeightShapes(const ArchGraph&, const BasicWeightStore<float>&);
template void CheckWeightShapes(const ArchGraph&, const BasicWeightStore<double>&);
template void ApplyMasks(const ArchGraph&, BasicWeightStore<float>&);
template void ApplyMasks(const ArchGraph&, BasicWeightStore<double>&);

WeightStore CompactWeights(const ArchGraph& arch, const WeightStore& weights,
                           const CompactionPlan& plan) {
  CheckWeightShapes(arch, weights);
  WeightStore out;
  out.weights.resize(arch.layers.size());
  out.biases.resize(arch.layers.size());
  for (int l : arch.ConvIndices()) {
    const LayerSpec& spec = arch.layers[l];
    const std::size_t window = static_cast<std::size_t>(spec.kernel_h) * spec.kernel_w;
    for (int o : plan.kept_out[l]) {
      for (int ic : plan.kept_in[l]) {
        const auto* src =
            weights.weights[l].data() + (static_cast<std::size_t>(o) * spec.in_channels + ic) * window;
        out.weights[l].insert(out.weights[l].end(), src, src + window);
      }
      if (spec.has_bias) out.biases[l].push_back(weights.biases[l][o]);
    }
  }
  return out;
}

void WriteWeights(const std::filesystem::path& path, const ArchGraph& arch,
                  const WeightStore& weights) {
  CheckWeightShapes(arch, weights);
  detail::ByteWriter w;
  w.Bytes(kWeightMagic);
  w.U32(1);
  const auto convs = arch.ConvIndices();
  w.U32(static_cast<std::uint32_t>(convs.size()));
  for (int l : convs) {
    const LayerSpec& spec = arch.layers[l];
    std::vector<float> values;
    for (std::size_t i = 0; i < arch.masks[l].size(); ++i) {
      if (arch.masks[l][i]) values.push_back(weights.weights[l][i]);
    }
    if (spec.has_bias) {
      for (int o = 0; o < spec.out_channels; ++o) {
        if (FilterLive(arch, l, o)) values.push_back(weights.biases[l][o]);
      }
    }
    w.U32(static_cast<std::uint32_t>(l));
    w.U32(static_cast<std::uint32_t>(values.size()));
    for (float v : values) w.F32(v);
  }
  detail::WriteFileBytes(path, w.str());
}

WeightStore ReadWeights(const std::filesystem::path& path, const ArchGraph& arch) {
  const std::string bytes = detail::ReadFileBytes(path);
  detail::ByteReader r(bytes, "weight file");
  if (r.Bytes(kWeightMagic.size()) != kWeightMagic) throw Error(ErrorCode::kFormat, "bad weight magic");
  if (r.U32() != 1) throw Error(ErrorCode::kFormat, "unsupported weight version");
  WeightStore store;
  store.weights.resize(arch.layers.size());
  store.biases.resize(arch.layers.size());
  const auto convs = arch.ConvIndices();
  if (r.U32() != convs.size()) throw Error(ErrorCode::kShapeMismatch, "weight record count");
  for (int l : convs) {
    const LayerSpec& spec = arch.layers[l];
    if (r.U32() != static_cast<std::uint32_t>(l)) {
      throw Error(ErrorCode::kShapeMismatch, "weight records out of layer order");
    }
    const std::uint32_t count = r.U32();
    const std::size_t live_w = LiveSynapses(arch.masks[l]);
    const std::size_t live_b = spec.has_bias ? LiveFilters(arch, l) : 0;
    if (count != live_w + live_b) {
      throw Error(ErrorCode::kShapeMismatch, "weight count of layer '" + spec.id + "'");
    }
    auto& w = store.weights[l];
    w.assign(spec.WeightCount(), 0.0f);
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (arch.masks[l][i]) w[i] = r.F32();
    }
    if (spec.has_bias) {
      store.biases[l].assign(spec.out_channels, 0.0f);
      for (int o = 0; o < spec.out_channels; ++o) {
        if (FilterLive(arch, l, o)) store.biases[l][o] = r.F32();
      }
    }
  }
  if (!r.AtEnd()) throw Error(ErrorCode::kFormat, "trailing bytes in weight file");
  return store;
}

}  // namespace evosquish
