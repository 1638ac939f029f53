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

#ifndef EVOSQUISH_ENGINE_HPP_
#define EVOSQUISH_ENGINE_HPP_

// Masked convnet forward/backward, SGD training, top-1 evaluation and
// throughput measurement over an ArchGraph.
//
// Batches are split across OpenMP workers by sample. Weight gradients are
// produced per sample and summed in sample order, so results do not depend
// on the worker count.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "evosquish/data_io.hpp"
#include "evosquish/net_ir.hpp"
#include "evosquish/tensor.hpp"

namespace evosquish {

enum class ConvAlgorithm {
  kDirect,       // sliding-window loops
  kPatchMatrix,  // im2col + row products
};

struct EngineOptions {
  ConvAlgorithm conv = ConvAlgorithm::kPatchMatrix;
  bool parallel = true;

  // The serial direct-loop path kept as the test oracle.
  static EngineOptions Reference() { return {ConvAlgorithm::kDirect, false}; }
};

// Caps OpenMP workers; n <= 0 restores the runtime default.
void SetComputeThreads(int n);
int ComputeThreads();

// Class probabilities, dims (n, num_classes, 1, 1). Throws kShapeMismatch or
// kNumericOverflow.
template <typename Real>
BasicTensor<Real> Forward(const ArchGraph& arch, const BasicWeightStore<Real>& weights,
                          const BasicTensor<Real>& batch, const EngineOptions& opts = {});

template <typename Real>
struct Gradients {
  BasicWeightStore<Real> grads;  // zero at every dead position
  double loss = 0.0;             // mean cross-entropy over the batch
};

template <typename Real>
Gradients<Real> Backward(const ArchGraph& arch, const BasicWeightStore<Real>& weights,
                         const BasicTensor<Real>& batch, std::span<const int> labels,
                         const EngineOptions& opts = {});

// Fraction of rows whose argmax (lowest index on ties) equals the label.
double Top1Accuracy(const Tensor& probs, std::span<const int> labels);

struct TrainResult {
  WeightStore weights;
  std::vector<double> epoch_loss;
  std::vector<double> epoch_lr;
};

using EpochCallback = std::function<void(int epoch, double mean_loss, double lr)>;

// SGD with momentum over seeded shuffled minibatches. Dead positions stay
// exactly zero.
TrainResult Train(const ArchGraph& arch, WeightStore weights, const ImageSet& data,
                  const TrainConfig& cfg, const EngineOptions& opts = {},
                  const EpochCallback& on_epoch = {});

// Appends "epoch,mean_loss,lr" rows, writing the header for a new file.
void AppendTrainLog(const std::filesystem::path& path, const TrainResult& result);

// Throws kEmptyDataset.
double EvaluateTop1(const ArchGraph& arch, const WeightStore& weights, const ImageSet& data,
                    const EngineOptions& opts = {});

struct Throughput {
  double images_per_sec = 0.0;
  double seconds = 0.0;
  int batches = 0;
  int batch_size = 0;
  std::uint64_t macs = 0;  // per image
};

inline constexpr int kDefaultBenchBatch = 32;

// Times repeated forward passes after three warm-up batches. At least one
// batch is timed, so a zero duration still yields a figure.
Throughput BenchmarkThroughput(const ArchGraph& arch, const WeightStore& weights,
                               int batch_size = kDefaultBenchBatch, double duration_sec = 1.0,
                               const EngineOptions& opts = {});

}  // namespace evosquish

#endif  // EVOSQUISH_ENGINE_HPP_
