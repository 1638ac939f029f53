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

#include "evosquish/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "evosquish/error.hpp"
#include "evosquish/kernels.hpp"
#include "evosquish/rng.hpp"

namespace evosquish {

namespace {

kernels::ConvGeometry GeometryOf(const LayerSpec& spec, Shape3 in, Shape3 out) {
  kernels::ConvGeometry g;
  g.in_c = in.channels;
  g.in_h = in.height;
  g.in_w = in.width;
  g.out_c = out.channels;
  g.out_h = out.height;
  g.out_w = out.width;
  g.kh = spec.kernel_h;
  g.kw = spec.kernel_w;
  g.stride = spec.stride;
  g.pad = spec.padding;
  return g;
}

template <typename Real>
bool AllFinite(const std::vector<Real>& v) {
  return std::all_of(v.begin(), v.end(), [](Real x) { return std::isfinite(x); });
}

// Runs one batch through the graph and keeps every activation for backward.
template <typename Real>
class Executor {
 public:
  Executor(const ArchGraph& arch, const BasicWeightStore<Real>& weights, const EngineOptions& opts)
      : arch_(arch), weights_(weights), opts_(opts), shapes_(InferShapes(arch)) {
    CheckWeightShapes(arch, weights);
  }

  const BasicTensor<Real>& Run(const BasicTensor<Real>& batch);
  double Backprop(std::span<const int> labels, BasicWeightStore<Real>& grads);

 private:
  int n() const { return acts_.front().n(); }
  void Allocate(std::size_t l) {
    const Shape3 s = shapes_[l];
    acts_[l] = BasicTensor<Real>(n(), s.channels, s.height, s.width);
  }
  void ConvForward(std::size_t l);
  void ConvBackward(std::size_t l, BasicTensor<Real>& dout, BasicWeightStore<Real>& grads,
                    std::vector<BasicTensor<Real>>& dacts);

  const ArchGraph& arch_;
  const BasicWeightStore<Real>& weights_;
  EngineOptions opts_;
  std::vector<Shape3> shapes_;
  std::vector<BasicTensor<Real>> acts_;
  std::vector<std::vector<int>> argmax_;
};

template <typename Real>
void Executor<Real>::ConvForward(std::size_t l) {
  const LayerSpec& spec = arch_.layers[l];
  const int pred = spec.inputs.front();
  const auto g = GeometryOf(spec, shapes_[pred], shapes_[l]);
  const BasicTensor<Real>& in = acts_[pred];
  BasicTensor<Real>& out = acts_[l];
  const Real* w = weights_.weights[l].data();
  const Real* b = spec.has_bias ? weights_.biases[l].data() : nullptr;
  const int count = n();
  const bool direct = opts_.conv == ConvAlgorithm::kDirect;
#pragma omp parallel if (opts_.parallel)
  {
    std::vector<Real> scratch;
#pragma omp for schedule(static)
    for (int i = 0; i < count; ++i) {
      Real* o = out.Sample(i);
      if (direct) {
        kernels::reference::ConvForward(g, in.Sample(i), w, b, o);
      } else {
        kernels::patch::ConvForward(g, in.Sample(i), w, b, o, scratch);
      }
      if (spec.relu) {
        for (std::size_t k = 0; k < out.SampleSize(); ++k) o[k] = std::max(o[k], Real{0});
      }
    }
  }
  if (!AllFinite(out.data)) {
    throw Error(ErrorCode::kNumericOverflow, "non-finite activation in layer '" + spec.id + "'");
  }
}

template <typename Real>
const BasicTensor<Real>& Executor<Real>::Run(const BasicTensor<Real>& batch) {
  const Shape3 in = arch_.input_shape;
  if (batch.c() != in.channels || batch.h() != in.height || batch.w() != in.width || batch.n() < 1 ||
      batch.data.size() != static_cast<std::size_t>(batch.n()) * in.Volume()) {
    throw Error(ErrorCode::kShapeMismatch, "batch does not match the graph input shape");
  }
  acts_.assign(arch_.layers.size(), {});
  argmax_.assign(arch_.layers.size(), {});
  acts_[0] = batch;
  const int count = n();
  for (std::size_t l = 1; l < arch_.layers.size(); ++l) {
    const LayerSpec& spec = arch_.layers[l];
    Allocate(l);
    BasicTensor<Real>& out = acts_[l];
    switch (spec.kind) {
      case LayerKind::kConv:
        ConvForward(l);
        break;
      case LayerKind::kMaxPool: {
        const int pred = spec.inputs.front();
        const auto g = GeometryOf(spec, shapes_[pred], shapes_[l]);
        argmax_[l].resize(out.data.size());
        const auto& in_t = acts_[pred];
        auto& idx = argmax_[l];
#pragma omp parallel for schedule(static) if (opts_.parallel)
        for (int i = 0; i < count; ++i) {
          kernels::MaxPoolForward(g, in_t.Sample(i), out.Sample(i), idx.data() + i * out.SampleSize());
        }
        break;
      }
      case LayerKind::kGlobalAvgPool: {
        const int pred = spec.inputs.front();
        const std::size_t plane = static_cast<std::size_t>(shapes_[pred].height) * shapes_[pred].width;
        for (int i = 0; i < count; ++i) {
          kernels::GlobalAvgPoolForward(spec.out_channels, plane, acts_[pred].Sample(i), out.Sample(i));
        }
        break;
      }
      case LayerKind::kConcat: {
        for (int i = 0; i < count; ++i) {
          Real* dst = out.Sample(i);
          for (int p : spec.inputs) {
            const auto& src = acts_[p];
            std::copy(src.Sample(i), src.Sample(i) + src.SampleSize(), dst);
            dst += src.SampleSize();
          }
        }
        break;
      }
      case LayerKind::kSoftmax: {
        const auto& logits = acts_[spec.inputs.front()];
        const int k = spec.out_channels;
        for (int i = 0; i < count; ++i) {
          const Real* z = logits.Sample(i);
          Real* p = out.Sample(i);
          const Real m = *std::max_element(z, z + k);
          Real sum{0};
          for (int c = 0; c < k; ++c) sum += (p[c] = std::exp(z[c] - m));
          for (int c = 0; c < k; ++c) p[c] /= sum;
        }
        if (!AllFinite(logits.data) || !AllFinite(out.data)) {
          throw Error(ErrorCode::kNumericOverflow, "non-finite class scores");
        }
        break;
      }
      case LayerKind::kInput:
        break;
    }
  }
  return acts_.back();
}

template <typename Real>
void Executor<Real>::ConvBackward(std::size_t l, BasicTensor<Real>& dout,
                                  BasicWeightStore<Real>& grads,
                                  std::vector<BasicTensor<Real>>& dacts) {
  const LayerSpec& spec = arch_.layers[l];
  const int pred = spec.inputs.front();
  const auto g = GeometryOf(spec, shapes_[pred], shapes_[l]);
  const int count = n();
  if (spec.relu) {
    const auto& out = acts_[l].data;
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (out[k] <= Real{0}) dout.data[k] = Real{0};
    }
  }
  // The input layer needs no gradient.
  const bool want_din = pred != 0;
  if (want_din && dacts[pred].data.empty()) {
    const Shape3 s = shapes_[pred];
    dacts[pred] = BasicTensor<Real>(count, s.channels, s.height, s.width);
  }
  const std::size_t wc = spec.WeightCount();
  const std::size_t bc = spec.has_bias ? spec.out_channels : 0;
  std::vector<Real> dw_all(wc * count, Real{0});
  std::vector<Real> db_all(bc * count, Real{0});
  const Real* w = weights_.weights[l].data();
  const std::uint8_t* mask = arch_.masks[l].data();
  const bool direct = opts_.conv == ConvAlgorithm::kDirect;
  const auto& in = acts_[pred];
#pragma omp parallel if (opts_.parallel)
  {
    std::vector<Real> cols;
    std::vector<Real> dcols;
#pragma omp for schedule(static)
    for (int i = 0; i < count; ++i) {
      Real* din = want_din ? dacts[pred].Sample(i) : nullptr;
      Real* db = bc ? db_all.data() + i * bc : nullptr;
      if (direct) {
        kernels::reference::ConvBackward(g, in.Sample(i), w, dout.Sample(i), din, dw_all.data() + i * wc, db);
      } else {
        kernels::patch::ConvBackward(g, in.Sample(i), w, mask, dout.Sample(i), din,
                                     dw_all.data() + i * wc, db, cols, dcols);
      }
    }
  }
  auto& gw = grads.weights[l];
  for (int i = 0; i < count; ++i) {
    const Real* src = dw_all.data() + i * wc;
    for (std::size_t k = 0; k < wc; ++k) gw[k] += src[k];
  }
  for (std::size_t k = 0; k < wc; ++k) {
    if (!mask[k]) gw[k] = Real{0};
  }
  if (bc) {
    auto& gb = grads.biases[l];
    for (int i = 0; i < count; ++i) {
      for (std::size_t o = 0; o < bc; ++o) gb[o] += db_all[i * bc + o];
    }
    for (int o = 0; o < spec.out_channels; ++o) {
      if (!FilterLive(arch_, static_cast<int>(l), o)) gb[o] = Real{0};
    }
  }
}

template <typename Real>
double Executor<Real>::Backprop(std::span<const int> labels, BasicWeightStore<Real>& grads) {
  const int count = n();
  const int k = arch_.num_classes;
  if (labels.size() != static_cast<std::size_t>(count)) {
    throw Error(ErrorCode::kShapeMismatch, "label count differs from batch size");
  }
  for (int y : labels) {
    if (y < 0 || y >= k) throw Error(ErrorCode::kInvalidLabel, "label " + std::to_string(y) + " out of range");
  }
  grads.weights.assign(arch_.layers.size(), {});
  grads.biases.assign(arch_.layers.size(), {});
  for (int l : arch_.ConvIndices()) {
    grads.weights[l].assign(arch_.layers[l].WeightCount(), Real{0});
    if (arch_.layers[l].has_bias) grads.biases[l].assign(arch_.layers[l].out_channels, Real{0});
  }

  std::vector<BasicTensor<Real>> dacts(arch_.layers.size());
  const std::size_t sink = arch_.layers.size() - 1;
  const int logits_at = arch_.layers[sink].inputs.front();
  const auto& logits = acts_[logits_at];
  const auto& probs = acts_[sink];
  dacts[logits_at] = BasicTensor<Real>(count, k, 1, 1);
  double loss = 0.0;
  for (int i = 0; i < count; ++i) {
    const Real* z = logits.Sample(i);
    const Real m = *std::max_element(z, z + k);
    double sum = 0.0;
    for (int c = 0; c < k; ++c) sum += std::exp(static_cast<double>(z[c] - m));
    loss += std::log(sum) + static_cast<double>(m) - static_cast<double>(z[labels[i]]);
    Real* d = dacts[logits_at].Sample(i);
    for (int c = 0; c < k; ++c) {
      d[c] = (probs.Sample(i)[c] - (c == labels[i] ? Real{1} : Real{0})) / static_cast<Real>(count);
    }
  }
  loss /= count;
  if (!std::isfinite(loss)) throw Error(ErrorCode::kNumericOverflow, "non-finite loss");

  for (std::size_t l = sink - 1; l >= 1; --l) {
    if (dacts[l].data.empty()) continue;
    const LayerSpec& spec = arch_.layers[l];
    auto ensure = [&](int p) -> BasicTensor<Real>& {
      if (dacts[p].data.empty()) {
        const Shape3 s = shapes_[p];
        dacts[p] = BasicTensor<Real>(count, s.channels, s.height, s.width);
      }
      return dacts[p];
    };
    switch (spec.kind) {
      case LayerKind::kConv:
        ConvBackward(l, dacts[l], grads, dacts);
        break;
      case LayerKind::kMaxPool: {
        const int pred = spec.inputs.front();
        if (pred == 0) break;
        const auto g = GeometryOf(spec, shapes_[pred], shapes_[l]);
        auto& din = ensure(pred);
        const auto& idx = argmax_[l];
        for (int i = 0; i < count; ++i) {
          kernels::MaxPoolBackward(g, dacts[l].Sample(i), idx.data() + i * dacts[l].SampleSize(),
                                   din.Sample(i));
        }
        break;
      }
      case LayerKind::kGlobalAvgPool: {
        const int pred = spec.inputs.front();
        if (pred == 0) break;
        const std::size_t plane = static_cast<std::size_t>(shapes_[pred].height) * shapes_[pred].width;
        auto& din = ensure(pred);
        for (int i = 0; i < count; ++i) {
          kernels::GlobalAvgPoolBackward(spec.out_channels, plane, dacts[l].Sample(i), din.Sample(i));
        }
        break;
      }
      case LayerKind::kConcat: {
        for (int i = 0; i < count; ++i) {
          const Real* src = dacts[l].Sample(i);
          for (int p : spec.inputs) {
            const std::size_t size = shapes_[p].Volume();
            if (p != 0) {
              Real* dst = ensure(p).Sample(i);
              for (std::size_t k2 = 0; k2 < size; ++k2) dst[k2] += src[k2];
            }
            src += size;
          }
        }
        break;
      }
      default:
        break;
    }
    dacts[l] = {};
  }
  return loss;
}

}  // namespace

void SetComputeThreads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n > 0 ? n : omp_get_num_procs());
#else
  (void)n;
#endif
}

int ComputeThreads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <typename Real>
BasicTensor<Real> Forward(const ArchGraph& arch, const BasicWeightStore<Real>& weights,
                          const BasicTensor<Real>& batch, const EngineOptions& opts) {
  Executor<Real> exec(arch, weights, opts);
  return exec.Run(batch);
}

template <typename Real>
Gradients<Real> Backward(const ArchGraph& arch, const BasicWeightStore<Real>& weights,
                         const BasicTensor<Real>& batch, std::span<const int> labels,
                         const EngineOptions& opts) {
  Executor<Real> exec(arch, weights, opts);
  exec.Run(batch);
  Gradients<Real> out;
  out.loss = exec.Backprop(labels, out.grads);
  return out;
}

template BasicTensor<float> Forward(const ArchGraph&, const BasicWeightStore<float>&,
                                    const BasicTensor<float>&, const EngineOptions&);
template BasicTensor<double> Forward(const ArchGraph&, const BasicWeightStore<double>&,
                                     const BasicTensor<double>&, const EngineOptions&);
template Gradients<float> Backward(const ArchGraph&, const BasicWeightStore<float>&,
                                   const BasicTensor<float>&, std::span<const int>,
                                   const EngineOptions&);
template Gradients<double> Backward(const ArchGraph&, const BasicWeightStore<double>&,
                                    const BasicTensor<double>&, std::span<const int>,
                                    const EngineOptions&);

double Top1Accuracy(const Tensor& probs, std::span<const int> labels) {
  if (labels.empty()) throw Error(ErrorCode::kEmptyDataset, "no samples to score");
  if (labels.size() != static_cast<std::size_t>(probs.n())) {
    throw Error(ErrorCode::kShapeMismatch, "label count differs from prediction count");
  }
  const std::size_t k = probs.SampleSize();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const float* row = probs.Sample(static_cast<int>(i));
    // max_element returns the first maximum: lowest index wins ties.
    hits += static_cast<int>(std::max_element(row, row + k) - row) == labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

TrainResult Train(const ArchGraph& arch, WeightStore weights, const ImageSet& data,
                  const TrainConfig& cfg, const EngineOptions& opts, const EpochCallback& on_epoch) {
  cfg.Validate();
  if (data.size() == 0) throw Error(ErrorCode::kEmptyDataset, "training set is empty");
  ApplyMasks(arch, weights);
  WeightStore velocity = weights;
  for (auto& v : velocity.weights) std::fill(v.begin(), v.end(), 0.0f);
  for (auto& v : velocity.biases) std::fill(v.begin(), v.end(), 0.0f);
  const auto convs = arch.ConvIndices();
  std::vector<std::vector<std::uint8_t>> bias_live(arch.layers.size());
  for (int l : convs) {
    for (int o = 0; o < arch.layers[l].out_channels; ++o) bias_live[l].push_back(FilterLive(arch, l, o));
  }

  const float mom = static_cast<float>(cfg.momentum);
  const float wd = static_cast<float>(cfg.weight_decay);
  auto step = [&](std::vector<float>& w, std::vector<float>& v, const std::vector<float>& g,
                  const std::uint8_t* live, float lr) {
    for (std::size_t k = 0; k < w.size(); ++k) {
      if (!live[k]) continue;
      v[k] = mom * v[k] - lr * (g[k] + wd * w[k]);
      if (v[k] != 0.0f) w[k] += v[k];
    }
  };

  TrainResult result;
  double lr = cfg.learning_rate;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto stream = MakeStream(data, cfg, Split::kTrain, epoch);
    Batch batch;
    double loss_sum = 0.0;
    const float lr_f = static_cast<float>(lr);
    while (stream.Next(batch)) {
      const auto g = Backward(arch, weights, batch.images, batch.labels, opts);
      loss_sum += g.loss * static_cast<double>(batch.labels.size());
      for (int l : convs) {
        step(weights.weights[l], velocity.weights[l], g.grads.weights[l], arch.masks[l].data(), lr_f);
        if (arch.layers[l].has_bias) {
          step(weights.biases[l], velocity.biases[l], g.grads.biases[l], bias_live[l].data(), lr_f);
        }
      }
    }
    const double mean_loss = loss_sum / static_cast<double>(data.size());
    result.epoch_loss.push_back(mean_loss);
    result.epoch_lr.push_back(lr);
    if (on_epoch) on_epoch(epoch, mean_loss, lr);
    lr *= cfg.lr_decay;
  }
  result.weights = std::move(weights);
  return result;
}

void AppendTrainLog(const std::filesystem::path& path, const TrainResult& result) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::kIo, "cannot append to " + path.string());
  if (fresh) out << "epoch,mean_loss,lr\n";
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    out << e << ',' << result.epoch_loss[e] << ',' << result.epoch_lr[e] << '\n';
  }
}

double EvaluateTop1(const ArchGraph& arch, const WeightStore& weights, const ImageSet& data,
                    const EngineOptions& opts) {
  if (data.size() == 0) throw Error(ErrorCode::kEmptyDataset, "evaluation set is empty");
  TrainConfig cfg;
  cfg.batch_size = 128;
  auto stream = MakeStream(data, cfg, Split::kTest);
  Batch batch;
  std::size_t hits = 0;
  while (stream.Next(batch)) {
    const Tensor probs = Forward(arch, weights, batch.images, opts);
    hits += static_cast<std::size_t>(std::llround(Top1Accuracy(probs, batch.labels) *
                                                  static_cast<double>(batch.labels.size())));
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

Throughput BenchmarkThroughput(const ArchGraph& arch, const WeightStore& weights, int batch_size,
                               double duration_sec, const EngineOptions& opts) {
  if (batch_size < 1) throw Error(ErrorCode::kInvalidConfig, "batch size must be >= 1");
  const Shape3 s = arch.input_shape;
  Tensor batch(batch_size, s.channels, s.height, s.width);
  Rng rng(0xBE7C4);
  for (auto& v : batch.data) v = static_cast<float>(rng.Uniform(-1.0, 1.0));
  for (int i = 0; i < 3; ++i) (void)Forward(arch, weights, batch, opts);

  using Clock = std::chrono::steady_clock;
  Throughput t;
  t.batch_size = batch_size;
  t.macs = ReportSize(arch).macs;
  const auto start = Clock::now();
  do {
    (void)Forward(arch, weights, batch, opts);
    ++t.batches;
    t.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  } while (t.seconds < duration_sec);
  t.seconds = std::max(t.seconds, std::numeric_limits<double>::min());
  t.images_per_sec = static_cast<double>(t.batches) * batch_size / t.seconds;
  return t;
}

}  // namespace evosquish
