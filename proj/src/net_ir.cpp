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

#include "evosquish/net_ir.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include "evosquish/error.hpp"

namespace evosquish {

namespace {

[[noreturn]] void Invalid(const std::string& what) {
  throw Error(ErrorCode::kInvalidArchitecture, what);
}

// Identifies where a channel's values come from: a conv filter, or the image.
struct ChannelSource {
  int layer = 0;  // 0 is the input layer
  int index = 0;
};

std::vector<std::vector<ChannelSource>> ChannelSources(const ArchGraph& arch) {
  std::vector<std::vector<ChannelSource>> sources(arch.layers.size());
  for (std::size_t l = 0; l < arch.layers.size(); ++l) {
    const LayerSpec& spec = arch.layers[l];
    auto& out = sources[l];
    switch (spec.kind) {
      case LayerKind::kInput:
        for (int c = 0; c < spec.out_channels; ++c) out.push_back({0, c});
        break;
      case LayerKind::kConv:
        for (int c = 0; c < spec.out_channels; ++c) out.push_back({static_cast<int>(l), c});
        break;
      case LayerKind::kConcat:
        for (int p : spec.inputs) out.insert(out.end(), sources[p].begin(), sources[p].end());
        break;
      default:
        out = sources[spec.inputs.front()];
        break;
    }
  }
  return sources;
}

// Recomputes the channel fields of every parameter-free layer from its
// predecessors, after conv widths changed.
void RefreshChannels(ArchGraph& arch) {
  for (auto& spec : arch.layers) {
    switch (spec.kind) {
      case LayerKind::kInput:
      case LayerKind::kConv:
        break;
      case LayerKind::kConcat: {
        int sum = 0;
        for (int p : spec.inputs) sum += arch.layers[p].out_channels;
        spec.in_channels = spec.out_channels = sum;
        break;
      }
      default:
        spec.in_channels = spec.out_channels = arch.layers[spec.inputs.front()].out_channels;
        break;
    }
  }
}

}  // namespace

std::string_view KindName(LayerKind kind) {
  switch (kind) {
    case LayerKind::kInput: return "input";
    case LayerKind::kConv: return "conv";
    case LayerKind::kMaxPool: return "maxpool";
    case LayerKind::kGlobalAvgPool: return "global-avgpool";
    case LayerKind::kConcat: return "concat";
    case LayerKind::kSoftmax: return "softmax";
  }
  return "?";
}

LayerKind ParseKind(std::string_view name) {
  for (LayerKind k : {LayerKind::kInput, LayerKind::kConv, LayerKind::kMaxPool,
                      LayerKind::kGlobalAvgPool, LayerKind::kConcat, LayerKind::kSoftmax}) {
    if (KindName(k) == name) return k;
  }
  throw Error(ErrorCode::kFormat, "unknown layer kind '" + std::string(name) + "'");
}

int ArchGraph::Find(std::string_view id) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].id == id) return static_cast<int>(i);
  }
  return -1;
}

int ArchGraph::ClassifierIndex() const {
  for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
    if (layers[i].IsConv()) return i;
  }
  Invalid("graph has no convolution");
}

std::vector<int> ArchGraph::ConvIndices() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].IsConv()) out.push_back(static_cast<int>(i));
  }
  return out;
}

int WindowOutput(int in, int kernel, int stride, int padding) {
  const int span = in + 2 * padding - kernel;
  if (span < 0 || stride < 1) return 0;
  return span / stride + 1;
}

std::vector<Shape3> InferShapes(const ArchGraph& arch) {
  const auto& layers = arch.layers;
  if (layers.empty()) Invalid("empty graph");
  if (arch.masks.size() != layers.size()) Invalid("mask table size differs from layer count");
  if (layers.front().kind != LayerKind::kInput || !layers.front().inputs.empty()) {
    Invalid("first layer must be the sole input");
  }
  if (layers.back().kind != LayerKind::kSoftmax) Invalid("last layer must be the softmax sink");
  if (arch.num_classes < 1) throw Error(ErrorCode::kInvalidClassCount, "num_classes < 1");

  std::vector<Shape3> shapes(layers.size());
  std::vector<int> consumers(layers.size(), 0);
  shapes[0] = arch.input_shape;
  if (arch.input_shape.channels < 1 || arch.input_shape.height < 1 || arch.input_shape.width < 1) {
    Invalid("input shape must be positive");
  }
  if (layers[0].out_channels != arch.input_shape.channels) Invalid("input layer channel mismatch");

  for (std::size_t l = 1; l < layers.size(); ++l) {
    const LayerSpec& spec = layers[l];
    const std::string where = "layer '" + spec.id + "': ";
    if (spec.kind == LayerKind::kInput) Invalid(where + "second input layer");
    if (spec.kind == LayerKind::kSoftmax && l + 1 != layers.size()) {
      Invalid(where + "softmax must be the only sink");
    }
    if (spec.inputs.empty()) Invalid(where + "no predecessors");
    for (int p : spec.inputs) {
      if (p < 0 || static_cast<std::size_t>(p) >= l) Invalid(where + "edge breaks topological order");
      ++consumers[p];
    }
    const bool is_concat = spec.kind == LayerKind::kConcat;
    if (is_concat ? spec.inputs.size() < 2 : spec.inputs.size() != 1) {
      Invalid(where + "wrong number of predecessors");
    }
    if (!spec.IsConv() && !arch.masks[l].empty()) Invalid(where + "mask on a parameter-free layer");
    const Shape3 in = shapes[spec.inputs.front()];
    Shape3 out = in;

    switch (spec.kind) {
      case LayerKind::kConv:
      case LayerKind::kMaxPool: {
        if (spec.kernel_h < 1 || spec.kernel_w < 1 || spec.stride < 1 || spec.padding < 0) {
          Invalid(where + "bad window");
        }
        if (spec.in_channels != in.channels) Invalid(where + "in_channels differ from predecessor");
        out.height = WindowOutput(in.height, spec.kernel_h, spec.stride, spec.padding);
        out.width = WindowOutput(in.width, spec.kernel_w, spec.stride, spec.padding);
        if (out.height < 1 || out.width < 1) {
          throw Error(ErrorCode::kShapeUnderflow, where + "window larger than padded input");
        }
        if (spec.IsConv()) {
          if (spec.out_channels < 1 || spec.in_channels < 1) Invalid(where + "empty convolution");
          if (arch.masks[l].size() != spec.WeightCount()) Invalid(where + "mask size mismatch");
          for (auto bit : arch.masks[l]) {
            if (bit > 1) Invalid(where + "mask entries must be 0 or 1");
          }
          out.channels = spec.out_channels;
        } else if (spec.out_channels != in.channels) {
          Invalid(where + "pool must preserve channels");
        }
        break;
      }
      case LayerKind::kGlobalAvgPool:
        if (spec.out_channels != in.channels) Invalid(where + "pool must preserve channels");
        out.height = out.width = 1;
        break;
      case LayerKind::kConcat: {
        int sum = 0;
        for (int p : spec.inputs) {
          if (shapes[p].height != in.height || shapes[p].width != in.width) {
            Invalid(where + "concat inputs differ spatially");
          }
          sum += shapes[p].channels;
        }
        if (spec.out_channels != sum) Invalid(where + "concat channels must sum");
        out.channels = sum;
        break;
      }
      case LayerKind::kSoftmax:
        if (in.height != 1 || in.width != 1) Invalid(where + "softmax input must be 1x1");
        if (spec.out_channels != in.channels) Invalid(where + "softmax channel mismatch");
        break;
      case LayerKind::kInput:
        break;
    }
    shapes[l] = out;
  }

  for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
    if (consumers[l] == 0) Invalid("layer '" + layers[l].id + "' has no consumer");
  }
  const int classifier = arch.ClassifierIndex();
  if (layers[classifier].out_channels != arch.num_classes ||
      shapes.back().channels != arch.num_classes) {
    Invalid("num_classes must equal the final conv width and the softmax width");
  }
  return shapes;
}

void Validate(const ArchGraph& arch) { (void)InferShapes(arch); }

std::size_t LiveSynapses(const Mask& mask) {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

bool FilterLive(const ArchGraph& arch, int layer, int filter) {
  const std::size_t fan_in = arch.layers[layer].FanIn();
  const auto begin = arch.masks[layer].begin() + static_cast<std::ptrdiff_t>(filter * fan_in);
  return std::find(begin, begin + static_cast<std::ptrdiff_t>(fan_in), std::uint8_t{1}) !=
         begin + static_cast<std::ptrdiff_t>(fan_in);
}

std::size_t LiveFilters(const ArchGraph& arch, int layer) {
  std::size_t n = 0;
  for (int o = 0; o < arch.layers[layer].out_channels; ++o) n += FilterLive(arch, layer, o);
  return n;
}

// ---------------------------------------------------------------------------

ArchBuilder::ArchBuilder(Shape3 input) {
  arch_.input_shape = input;
  LayerSpec spec;
  spec.id = "input";
  spec.kind = LayerKind::kInput;
  spec.in_channels = spec.out_channels = input.channels;
  Add(std::move(spec));
}

int ArchBuilder::Add(LayerSpec spec) {
  channels_.push_back(spec.out_channels);
  arch_.masks.emplace_back(spec.WeightCount(), std::uint8_t{1});
  arch_.layers.push_back(std::move(spec));
  return static_cast<int>(arch_.layers.size()) - 1;
}

int ArchBuilder::Conv(std::string id, int from, int out_channels, int kernel, int stride,
                      int padding, bool relu, bool bias) {
  LayerSpec spec;
  spec.id = std::move(id);
  spec.kind = LayerKind::kConv;
  spec.kernel_h = spec.kernel_w = kernel;
  spec.stride = stride;
  spec.padding = padding;
  spec.in_channels = channels_.at(from);
  spec.out_channels = out_channels;
  spec.has_bias = bias;
  spec.relu = relu;
  spec.inputs = {from};
  return Add(std::move(spec));
}

int ArchBuilder::MaxPool(std::string id, int from, int kernel, int stride, int padding) {
  LayerSpec spec;
  spec.id = std::move(id);
  spec.kind = LayerKind::kMaxPool;
  spec.kernel_h = spec.kernel_w = kernel;
  spec.stride = stride;
  spec.padding = padding;
  spec.in_channels = spec.out_channels = channels_.at(from);
  spec.inputs = {from};
  return Add(std::move(spec));
}

int ArchBuilder::GlobalAvgPool(std::string id, int from) {
  LayerSpec spec;
  spec.id = std::move(id);
  spec.kind = LayerKind::kGlobalAvgPool;
  spec.in_channels = spec.out_channels = channels_.at(from);
  spec.inputs = {from};
  return Add(std::move(spec));
}

int ArchBuilder::Concat(std::string id, std::vector<int> from) {
  LayerSpec spec;
  spec.id = std::move(id);
  spec.kind = LayerKind::kConcat;
  for (int p : from) spec.out_channels += channels_.at(p);
  spec.in_channels = spec.out_channels;
  spec.inputs = std::move(from);
  return Add(std::move(spec));
}

int ArchBuilder::Fire(const std::string& name, int from, int squeeze, int expand) {
  const int s = Conv(name + "/squeeze1x1", from, squeeze, 1);
  const int e1 = Conv(name + "/expand1x1", s, expand, 1);
  const int e3 = Conv(name + "/expand3x3", s, expand, 3, 1, 1);
  return Concat(name + "/concat", {e1, e3});
}

ArchGraph ArchBuilder::Finish(int from) {
  LayerSpec spec;
  spec.id = "prob";
  spec.kind = LayerKind::kSoftmax;
  spec.in_channels = spec.out_channels = channels_.at(from);
  spec.inputs = {from};
  Add(std::move(spec));
  ArchGraph arch = arch_;
  arch.num_classes = arch.layers[arch.ClassifierIndex()].out_channels;
  Validate(arch);
  return arch;
}

ArchGraph BuildSqueezeNetV11(int num_classes, Shape3 input) {
  if (num_classes < 1) throw Error(ErrorCode::kInvalidClassCount, "num_classes must be >= 1");
  ArchBuilder b(input);
  int x = b.Conv("conv1", b.input(), 64, 3, 2);
  x = b.MaxPool("pool1", x, 3, 2);
  x = b.Fire("fire2", x, 16, 64);
  x = b.Fire("fire3", x, 16, 64);
  x = b.MaxPool("pool3", x, 3, 2);
  x = b.Fire("fire4", x, 32, 128);
  x = b.Fire("fire5", x, 32, 128);
  x = b.MaxPool("pool5", x, 3, 2);
  x = b.Fire("fire6", x, 48, 192);
  x = b.Fire("fire7", x, 48, 192);
  x = b.Fire("fire8", x, 64, 256);
  x = b.Fire("fire9", x, 64, 256);
  x = b.Conv("conv10", x, num_classes, 1);
  x = b.GlobalAvgPool("pool10", x);
  return b.Finish(x);
}

ArchGraph BuildSqueezeNetMini(int num_classes, Shape3 input) {
  if (num_classes < 1) throw Error(ErrorCode::kInvalidClassCount, "num_classes must be >= 1");
  ArchBuilder b(input);
  int x = b.Conv("conv1", b.input(), 32, 3, 1, 1);
  x = b.Fire("fire2", x, 8, 32);
  x = b.MaxPool("pool2", x, 2, 2);
  x = b.Fire("fire3", x, 16, 64);
  x = b.MaxPool("pool3", x, 2, 2);
  x = b.Fire("fire4", x, 16, 64);
  // Linear classifier: a rectified one this shallow can die in the first
  // epoch and pin every logit at zero.
  x = b.Conv("conv10", x, num_classes, 1, 1, 0, /*relu=*/false);
  x = b.GlobalAvgPool("pool10", x);
  return b.Finish(x);
}

ArchGraph RetargetClasses(const ArchGraph& arch, int new_classes) {
  if (new_classes < 1) throw Error(ErrorCode::kInvalidClassCount, "num_classes must be >= 1");
  Validate(arch);
  ArchGraph out = arch;
  const int c = out.ClassifierIndex();
  LayerSpec& head = out.layers[c];
  head.kernel_h = head.kernel_w = 1;
  head.stride = 1;
  head.padding = 0;
  head.out_channels = new_classes;
  out.masks[c].assign(head.WeightCount(), std::uint8_t{1});
  out.num_classes = new_classes;
  RefreshChannels(out);
  Validate(out);
  return out;
}

SizeReport ReportSize(const ArchGraph& arch) {
  const auto shapes = InferShapes(arch);
  SizeReport report;
  for (std::size_t l = 0; l < arch.layers.size(); ++l) {
    const LayerSpec& spec = arch.layers[l];
    LayerSize row;
    row.layer_id = spec.id;
    row.kind = spec.kind;
    if (spec.IsConv()) {
      const std::uint64_t live_w = LiveSynapses(arch.masks[l]);
      const std::uint64_t live_b = spec.has_bias ? LiveFilters(arch, static_cast<int>(l)) : 0;
      row.total_params = spec.TotalParams();
      row.live_params = live_w + live_b;
      row.macs = static_cast<std::uint64_t>(shapes[l].height) * shapes[l].width * live_w;
    }
    report.total_params += row.total_params;
    report.live_params += row.live_params;
    report.macs += row.macs;
    report.per_layer.push_back(std::move(row));
  }
  report.model_size_bytes = report.live_params * kBytesPerParam;
  return report;
}

// ---------------------------------------------------------------------------

std::size_t ClearInertSynapses(ArchGraph& arch) {
  Validate(arch);
  const auto sources = ChannelSources(arch);
  std::vector<std::vector<bool>> dead(arch.layers.size());
  std::size_t cleared = 0;
  // Topological order: a filter's deadness is final once its layer is done.
  for (std::size_t l = 0; l < arch.layers.size(); ++l) {
    const LayerSpec& spec = arch.layers[l];
    if (!spec.IsConv()) continue;
    const auto& in_src = sources[spec.inputs.front()];
    const std::size_t window = static_cast<std::size_t>(spec.kernel_h) * spec.kernel_w;
    Mask& mask = arch.masks[l];
    for (int ic = 0; ic < spec.in_channels; ++ic) {
      const ChannelSource src = in_src[ic];
      if (src.layer == 0 || !dead[src.layer][src.index]) continue;
      for (int o = 0; o < spec.out_channels; ++o) {
        auto* col = mask.data() + (static_cast<std::size_t>(o) * spec.in_channels + ic) * window;
        for (std::size_t k = 0; k < window; ++k) {
          cleared += col[k];
          col[k] = 0;
        }
      }
    }
    dead[l].resize(spec.out_channels);
    for (int o = 0; o < spec.out_channels; ++o) {
      dead[l][o] = !FilterLive(arch, static_cast<int>(l), o);
    }
  }
  return cleared;
}

bool CompactionPlan::IsIdentity(const ArchGraph& arch) const {
  for (std::size_t l = 0; l < arch.layers.size(); ++l) {
    if (kept_out[l].size() != static_cast<std::size_t>(arch.layers[l].out_channels)) return false;
    if (arch.layers[l].IsConv() &&
        kept_in[l].size() != static_cast<std::size_t>(arch.layers[l].in_channels)) {
      return false;
    }
  }
  return true;
}

CompactionPlan PlanCompaction(const ArchGraph& arch) {
  Validate(arch);
  const std::size_t n = arch.layers.size();
  const int classifier = arch.ClassifierIndex();
  std::vector<std::vector<bool>> keep(n);
  CompactionPlan plan;
  plan.kept_out.resize(n);
  plan.kept_in.resize(n);

  for (std::size_t l = 0; l < n; ++l) {
    const LayerSpec& spec = arch.layers[l];
    switch (spec.kind) {
      case LayerKind::kInput:
        keep[l].assign(spec.out_channels, true);
        break;
      case LayerKind::kConv: {
        const auto& in_keep = keep[spec.inputs.front()];
        for (int ic = 0; ic < spec.in_channels; ++ic) {
          if (in_keep[ic]) plan.kept_in[l].push_back(ic);
        }
        keep[l].resize(spec.out_channels);
        for (int o = 0; o < spec.out_channels; ++o) {
          keep[l][o] = static_cast<int>(l) == classifier || FilterLive(arch, static_cast<int>(l), o);
        }
        if (plan.kept_in[l].empty() ||
            std::find(keep[l].begin(), keep[l].end(), true) == keep[l].end()) {
          throw Error(ErrorCode::kDegenerateArchitecture,
                      "layer '" + spec.id + "' would be left with no live filters");
        }
        break;
      }
      case LayerKind::kConcat:
        for (int p : spec.inputs) keep[l].insert(keep[l].end(), keep[p].begin(), keep[p].end());
        break;
      default:
        keep[l] = keep[spec.inputs.front()];
        break;
    }
    for (std::size_t c = 0; c < keep[l].size(); ++c) {
      if (keep[l][c]) plan.kept_out[l].push_back(static_cast<int>(c));
    }
  }
  return plan;
}

ArchGraph ApplyCompaction(const ArchGraph& arch, const CompactionPlan& plan) {
  ArchGraph out = arch;
  for (std::size_t l = 0; l < arch.layers.size(); ++l) {
    const LayerSpec& old_spec = arch.layers[l];
    if (!old_spec.IsConv()) continue;
    LayerSpec& spec = out.layers[l];
    const auto& rows = plan.kept_out[l];
    const auto& cols = plan.kept_in[l];
    spec.out_channels = static_cast<int>(rows.size());
    spec.in_channels = static_cast<int>(cols.size());
    const std::size_t window = static_cast<std::size_t>(spec.kernel_h) * spec.kernel_w;
    Mask mask;
    mask.reserve(spec.WeightCount());
    for (int o : rows) {
      for (int ic : cols) {
        const auto* src =
            arch.masks[l].data() + (static_cast<std::size_t>(o) * old_spec.in_channels + ic) * window;
        mask.insert(mask.end(), src, src + window);
      }
    }
    out.masks[l] = std::move(mask);
  }
  RefreshChannels(out);
  Validate(out);
  return out;
}

ArchGraph Compact(const ArchGraph& arch) { return ApplyCompaction(arch, PlanCompaction(arch)); }

}  // namespace evosquish
