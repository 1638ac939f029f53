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

#ifndef EVOSQUISH_TENSOR_HPP_
#define EVOSQUISH_TENSOR_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <vector>

#include "evosquish/net_ir.hpp"

namespace evosquish {

// Dense NCHW buffer. Flat buffers use dims (count, 1, 1, 1).
template <typename Real>
struct BasicTensor {
  std::array<int, 4> dims{0, 1, 1, 1};
  std::vector<Real> data;

  BasicTensor() = default;
  BasicTensor(int n, int c, int h, int w)
      : dims{n, c, h, w}, data(static_cast<std::size_t>(n) * c * h * w, Real{0}) {}

  int n() const { return dims[0]; }
  int c() const { return dims[1]; }
  int h() const { return dims[2]; }
  int w() const { return dims[3]; }
  std::size_t SampleSize() const { return static_cast<std::size_t>(dims[1]) * dims[2] * dims[3]; }
  Real* Sample(int i) { return data.data() + i * SampleSize(); }
  const Real* Sample(int i) const { return data.data() + i * SampleSize(); }
  Real& At(int i, int ch, int y, int x) {
    return data[((static_cast<std::size_t>(i) * dims[1] + ch) * dims[2] + y) * dims[3] + x];
  }
  Real At(int i, int ch, int y, int x) const {
    return data[((static_cast<std::size_t>(i) * dims[1] + ch) * dims[2] + y) * dims[3] + x];
  }
};

using Tensor = BasicTensor<float>;

// Per-layer weights [out][in][kh][kw] and biases, parallel to ArchGraph::layers.
// Dead synapses and the biases of dead filters are held at exactly zero.
template <typename Real>
struct BasicWeightStore {
  std::vector<std::vector<Real>> weights;
  std::vector<std::vector<Real>> biases;

  bool operator==(const BasicWeightStore&) const = default;
};

using WeightStore = BasicWeightStore<float>;

template <typename To, typename From>
BasicWeightStore<To> ConvertWeights(const BasicWeightStore<From>& in) {
  BasicWeightStore<To> out;
  for (const auto& w : in.weights) out.weights.emplace_back(w.begin(), w.end());
  for (const auto& b : in.biases) out.biases.emplace_back(b.begin(), b.end());
  return out;
}

template <typename To, typename From>
BasicTensor<To> ConvertTensor(const BasicTensor<From>& in) {
  BasicTensor<To> out;
  out.dims = in.dims;
  out.data.assign(in.data.begin(), in.data.end());
  return out;
}

struct TrainConfig {
  int epochs = 3;
  int batch_size = 32;
  double learning_rate = 0.005;
  double momentum = 0.9;
  // The learning rate is multiplied by this after every epoch.
  double lr_decay = 1.0;
  double weight_decay = 0.0;
  std::uint64_t rng_seed = 1;
  bool hflip = false;
  bool pad_crop = false;  // 4-pixel zero pad then random crop

  // Throws kInvalidConfig.
  void Validate() const;
};

// He-style uniform init, U(-b, b) with b = sqrt(6 / fan_in); zero biases.
WeightStore InitWeights(const ArchGraph& arch, std::uint64_t seed);

// Throws kShapeMismatch unless every buffer matches the graph.
template <typename Real>
void CheckWeightShapes(const ArchGraph& arch, const BasicWeightStore<Real>& weights);

// Zeroes dead synapses and the biases of filters with no live synapse.
template <typename Real>
void ApplyMasks(const ArchGraph& arch, BasicWeightStore<Real>& weights);

// Selects the rows/columns a compaction plan keeps.
WeightStore CompactWeights(const ArchGraph& arch, const WeightStore& weights,
                           const CompactionPlan& plan);

// weights.bin: "EVSQWGTS" magic, u32 version, u32 record count, then per conv
// layer u32 layer index, u32 value count and that many little-endian f32:
// the live weights in mask order followed by the live biases.
void WriteWeights(const std::filesystem::path& path, const ArchGraph& arch,
                  const WeightStore& weights);
WeightStore ReadWeights(const std::filesystem::path& path, const ArchGraph& arch);

}  // namespace evosquish

#endif  // EVOSQUISH_TENSOR_HPP_
