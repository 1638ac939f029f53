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

#ifndef EVOSQUISH_NET_IR_HPP_
#define EVOSQUISH_NET_IR_HPP_

// Typed layer graphs for Fire-module convnets, with per-synapse liveness masks
// and exact parameter / model-size / MAC accounting.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace evosquish {

enum class LayerKind { kInput, kConv, kMaxPool, kGlobalAvgPool, kConcat, kSoftmax };

std::string_view KindName(LayerKind kind);
LayerKind ParseKind(std::string_view name);

struct Shape3 {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t Volume() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  auto operator<=>(const Shape3&) const = default;
};

struct LayerSpec {
  std::string id;
  LayerKind kind = LayerKind::kInput;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int padding = 0;
  int in_channels = 0;
  int out_channels = 0;
  bool has_bias = false;
  // Convolutions carry a fused ReLU; SqueezeNet applies one after every conv,
  // conv10 included.
  bool relu = false;
  // Predecessor layer indices. Always smaller than this layer's own index, so
  // the layer list is a topological order.
  std::vector<int> inputs;

  bool IsConv() const { return kind == LayerKind::kConv; }
  // Synapses per output filter.
  std::size_t FanIn() const {
    return static_cast<std::size_t>(kernel_h) * kernel_w * in_channels;
  }
  std::size_t WeightCount() const { return IsConv() ? FanIn() * out_channels : 0; }
  std::size_t TotalParams() const {
    return WeightCount() + (IsConv() && has_bias ? out_channels : 0);
  }

  bool operator==(const LayerSpec&) const = default;
};

// One byte per synapse, 1 = live. Layout is [out][in][kh][kw].
using Mask = std::vector<std::uint8_t>;

struct ArchGraph {
  Shape3 input_shape;
  int num_classes = 0;
  std::vector<LayerSpec> layers;
  // Parallel to `layers`; empty for every non-conv layer.
  std::vector<Mask> masks;

  int Find(std::string_view id) const;
  // Index of the final convolution, whose filters are the class scores.
  int ClassifierIndex() const;
  std::vector<int> ConvIndices() const;

  bool operator==(const ArchGraph&) const = default;
};

// Throws Error{kInvalidArchitecture | kShapeUnderflow} if any structural
// invariant is broken. Returns the output shape of every layer.
std::vector<Shape3> InferShapes(const ArchGraph& arch);
void Validate(const ArchGraph& arch);

// Spatial output size of a sliding window; 0 when the window does not fit.
int WindowOutput(int in, int kernel, int stride, int padding);

bool FilterLive(const ArchGraph& arch, int layer, int filter);
std::size_t LiveFilters(const ArchGraph& arch, int layer);
std::size_t LiveSynapses(const Mask& mask);

// Incremental construction of a valid graph. Masks start fully live.
class ArchBuilder {
 public:
  explicit ArchBuilder(Shape3 input);

  int input() const { return 0; }
  int Conv(std::string id, int from, int out_channels, int kernel, int stride = 1,
           int padding = 0, bool relu = true, bool bias = true);
  int MaxPool(std::string id, int from, int kernel, int stride, int padding = 0);
  int GlobalAvgPool(std::string id, int from);
  int Concat(std::string id, std::vector<int> from);
  // squeeze 1x1 -> {expand 1x1, expand 3x3 pad 1} -> concat. Returns the concat.
  int Fire(const std::string& name, int from, int squeeze, int expand);
  // Appends the softmax sink and validates.
  ArchGraph Finish(int from);

  int channels(int layer) const { return channels_.at(layer); }

 private:
  int Add(LayerSpec spec);

  ArchGraph arch_;
  std::vector<int> channels_;
};

// Public SqueezeNet v1.1 table: conv1 64x3x3/2, fire2..fire9, conv10 1x1,
// global average pool. 3x3/2 max pools after conv1, fire3 and fire5.
ArchGraph BuildSqueezeNetV11(int num_classes, Shape3 input = {3, 227, 227});

// Desk-scale seed for 32x32 inputs: conv1 32x3x3/1, fire(8/32), pool,
// fire(16/64), pool, fire(16/64), conv10 1x1.
ArchGraph BuildSqueezeNetMini(int num_classes, Shape3 input = {3, 32, 32});

// Replaces the classifier with a fresh fully-live 1x1 conv of new_classes
// filters; every other layer is left untouched.
ArchGraph RetargetClasses(const ArchGraph& arch, int new_classes);

struct LayerSize {
  std::string layer_id;
  LayerKind kind = LayerKind::kInput;
  std::uint64_t total_params = 0;
  std::uint64_t live_params = 0;
  std::uint64_t macs = 0;

  bool operator==(const LayerSize&) const = default;
};

struct SizeReport {
  std::uint64_t live_params = 0;
  std::uint64_t total_params = 0;
  std::uint64_t model_size_bytes = 0;  // live_params * 4
  std::uint64_t macs = 0;              // live synapses only
  std::vector<LayerSize> per_layer;

  double ModelSizeMB() const { return static_cast<double>(model_size_bytes) / 1e6; }
  double ModelSizeMiB() const {
    return static_cast<double>(model_size_bytes) / (1024.0 * 1024.0);
  }
};

inline constexpr std::uint64_t kBytesPerParam = 4;

SizeReport ReportSize(const ArchGraph& arch);

// For every layer, which of the original output channels survive compaction
// and, for convolutions, which input channels.
struct CompactionPlan {
  std::vector<std::vector<int>> kept_out;
  std::vector<std::vector<int>> kept_in;

  bool IsIdentity(const ArchGraph& arch) const;
};

// Clears synapses whose input channel is produced by a dead filter, repeating
// until no more filters die. Such synapses multiply an all-zero activation, so
// the forward function is unchanged. Returns the number of synapses cleared.
std::size_t ClearInertSynapses(ArchGraph& arch);

// Throws kDegenerateArchitecture if a non-classifier conv would lose every
// filter. Classifier filters are never removed.
CompactionPlan PlanCompaction(const ArchGraph& arch);
ArchGraph ApplyCompaction(const ArchGraph& arch, const CompactionPlan& plan);

// Removes dead filters and the input columns that read them. live_params is
// preserved whenever those columns are already dead, which holds for any
// graph passed through ClearInertSynapses first.
ArchGraph Compact(const ArchGraph& arch);

}  // namespace evosquish

#endif  // EVOSQUISH_NET_IR_HPP_
