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

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "evosquish/engine.hpp"
#include "evosquish/error.hpp"
#include "evosquish/rng.hpp"
#include "gradient_oracle.hpp"

using namespace evosquish;

namespace {

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::kIo;
}

// conv 3x3 -> maxpool -> fire -> conv 1x1 -> global average pool -> softmax
ArchGraph SmallNet() {
  ArchBuilder b({2, 6, 6});
  int x = b.Conv("conv1", b.input(), 4, 3, 1, 1);
  x = b.MaxPool("pool1", x, 2, 2);
  x = b.Fire("fire2", x, 2, 3);
  x = b.Conv("conv10", x, 3, 1);
  return b.Finish(b.GlobalAvgPool("pool10", x));
}

template <typename Real>
BasicTensor<Real> RandomBatch(Shape3 s, int n, std::uint64_t seed) {
  BasicTensor<Real> t(n, s.channels, s.height, s.width);
  Rng rng(seed);
  for (Real& v : t.data) v = static_cast<Real>(rng.Uniform(-1.0, 1.0));
  return t;
}

void ExpectGradients(const ArchGraph& arch, std::uint64_t seed, int per_layer) {
  const auto r = testing::CheckGradients(arch, seed, per_layer);
  CHECK(2 * r.probes >= r.requested);
  CHECK_MESSAGE(r.failures == 0, "max relative error " << r.max_rel_error);
}

ImageSet ToyPoints() {
  // Two classes split by the line x0 + x1 = 0.
  const float pts[8][2] = {{1, 2}, {2, 0.5f}, {0.3f, 1}, {1.5f, 1.5f},
                           {-1, -2}, {-2, 0.5f}, {0.2f, -1}, {-1.5f, -1.5f}};
  ImageSet set;
  set.shape = {2, 1, 1};
  for (int i = 0; i < 8; ++i) {
    set.pixels.push_back(pts[i][0]);
    set.pixels.push_back(pts[i][1]);
    set.labels.push_back(i < 4 ? 0 : 1);
  }
  return set;
}

ArchGraph ToyNet() {
  ArchBuilder b({2, 1, 1});
  int x = b.Conv("hidden", b.input(), 8, 1);
  // Linear scores: a rectified two-class head can park a class at zero.
  x = b.Conv("conv10", x, 2, 1, 1, 0, false);
  return b.Finish(b.GlobalAvgPool("pool", x));
}

}  // namespace

TEST_CASE("analytic gradients match finite differences") {
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    ExpectGradients(testing::TinyConvNet(), seed, 16);
    ExpectGradients(testing::TinyPoolNet(), seed + 10, 16);
    ExpectGradients(testing::TinyConcatNet(), seed + 20, 16);
  }
  SUBCASE("with dead synapses") {
    ArchGraph arch = testing::TinyPoolNet();
    Rng rng(8);
    for (int l : arch.ConvIndices()) {
      for (auto& bit : arch.masks[l]) bit = rng.Bernoulli(0.7) ? 1 : 0;
      arch.masks[l][0] = 1;
    }
    ExpectGradients(arch, 9, 12);
  }
}

TEST_CASE("dead positions get zero gradient") {
  ArchGraph arch = SmallNet();
  Rng rng(4);
  for (int l : arch.ConvIndices()) {
    for (auto& bit : arch.masks[l]) bit = rng.Bernoulli(0.5) ? 1 : 0;
  }
  const int c1 = arch.Find("conv1");
  std::fill_n(arch.masks[c1].begin(), arch.layers[c1].FanIn(), std::uint8_t{0});
  auto weights = InitWeights(arch, 2);
  ApplyMasks(arch, weights);
  const auto batch = RandomBatch<float>(arch.input_shape, 4, 6);
  const std::vector<int> labels = {0, 1, 2, 0};
  const auto g = Backward(arch, weights, batch, labels);
  for (int l : arch.ConvIndices()) {
    for (std::size_t i = 0; i < arch.masks[l].size(); ++i) {
      if (!arch.masks[l][i]) CHECK(g.grads.weights[l][i] == 0.0f);
    }
  }
  CHECK(g.grads.biases[c1][0] == 0.0f);
}

TEST_CASE("uniform predictions give ln K loss") {
  const ArchGraph arch = BuildSqueezeNetMini(10);
  WeightStore zero = InitWeights(arch, 1);
  for (auto& w : zero.weights) std::fill(w.begin(), w.end(), 0.0f);
  const auto batch = RandomBatch<float>(arch.input_shape, 4, 1);
  const std::vector<int> labels = {0, 3, 7, 9};
  const auto g = Backward(arch, zero, batch, labels);
  CHECK(g.loss == doctest::Approx(std::log(10.0)).epsilon(1e-6));
  const auto probs = Forward(arch, zero, batch);
  for (float p : probs.data) CHECK(p == doctest::Approx(0.1).epsilon(1e-6));
}

TEST_CASE("softmax rows sum to one") {
  const ArchGraph arch = SmallNet();
  int bad = 0;
  for (std::uint64_t trial = 0; trial < 1000; ++trial) {
    auto weights = InitWeights(arch, trial);
    // Scale up so some rows saturate.
    for (auto& w : weights.weights) {
      for (float& v : w) v *= static_cast<float>(1 + trial % 7);
    }
    const auto probs = Forward(arch, weights, RandomBatch<float>(arch.input_shape, 2, trial + 99));
    for (int i = 0; i < probs.n(); ++i) {
      double s = 0;
      for (int k = 0; k < probs.c(); ++k) {
        const float p = probs.At(i, k, 0, 0);
        if (p < 0.0f || p > 1.0f) ++bad;
        s += p;
      }
      if (std::abs(s - 1.0) > 1e-5) ++bad;
    }
  }
  CHECK(bad == 0);
}

TEST_CASE("production and reference paths agree") {
  const ArchGraph arch = BuildSqueezeNetMini(10);
  const auto weights = InitWeights(arch, 7);
  const auto batch = RandomBatch<float>(arch.input_shape, 5, 8);
  const auto fast = Forward(arch, weights, batch);
  const auto ref = Forward(arch, weights, batch, EngineOptions::Reference());
  for (std::size_t i = 0; i < fast.data.size(); ++i) CHECK(fast.data[i] == doctest::Approx(ref.data[i]).epsilon(1e-4));
}

TEST_CASE("training keeps dead positions at zero and is deterministic") {
  ArchGraph arch = BuildSqueezeNetMini(10, {3, 8, 8});
  Rng rng(12);
  for (int l : arch.ConvIndices()) {
    for (auto& bit : arch.masks[l]) bit = rng.Bernoulli(0.6) ? 1 : 0;
  }
  ClearInertSynapses(arch);
  arch = Compact(arch);
  auto init = InitWeights(arch, 3);
  ImageSet data;
  data.shape = arch.input_shape;
  const auto batch = RandomBatch<float>(arch.input_shape, 40, 13);
  data.pixels = batch.data;
  for (int i = 0; i < 40; ++i) data.labels.push_back(i % 10);

  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 8;
  cfg.hflip = true;
  SetComputeThreads(1);
  const auto a = Train(arch, init, data, cfg);
  SetComputeThreads(4);
  const auto b = Train(arch, init, data, cfg);
  SetComputeThreads(0);
  CHECK(a.weights == b.weights);
  CHECK(a.epoch_loss == b.epoch_loss);
  CHECK(a.weights != init);
  for (int l : arch.ConvIndices()) {
    for (std::size_t i = 0; i < arch.masks[l].size(); ++i) {
      if (!arch.masks[l][i]) CHECK(a.weights.weights[l][i] == 0.0f);
    }
    for (int o = 0; o < arch.layers[l].out_channels; ++o) {
      if (!FilterLive(arch, l, o)) CHECK(a.weights.biases[l][o] == 0.0f);
    }
  }

  cfg.learning_rate = 0.0;
  const auto frozen = Train(arch, init, data, cfg);
  CHECK(frozen.weights == init);
}

TEST_CASE("a separable toy set is learned") {
  const ArchGraph arch = ToyNet();
  const ImageSet data = ToyPoints();
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.05;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto trained = Train(arch, InitWeights(arch, seed), data, cfg);
    CHECK(EvaluateTop1(arch, trained.weights, data) == 1.0);
    CHECK(trained.epoch_loss.back() < trained.epoch_loss.front());
  }
}

TEST_CASE("top-1 of a random predictor is near chance") {
  Rng rng(21);
  const int n = 10000;
  Tensor probs(n, 10, 1, 1);
  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < 10; ++k) probs.At(i, k, 0, 0) = static_cast<float>(rng.Uniform());
    labels[i] = static_cast<int>(rng.Below(10));
  }
  CHECK(std::abs(Top1Accuracy(probs, labels) - 0.10) <= 0.009);

  Tensor tied(1, 3, 1, 1);
  const std::vector<int> first = {0};
  CHECK(Top1Accuracy(tied, first) == 1.0);
}

TEST_CASE("engine errors") {
  const ArchGraph arch = SmallNet();
  const auto weights = InitWeights(arch, 1);
  const auto batch = RandomBatch<float>(arch.input_shape, 2, 1);
  const std::vector<int> bad_label = {0, 3};
  CHECK(CodeOf([&] { Backward(arch, weights, batch, bad_label); }) == ErrorCode::kInvalidLabel);
  const auto wrong = RandomBatch<float>({2, 5, 6}, 2, 1);
  CHECK(CodeOf([&] { Forward(arch, weights, wrong); }) == ErrorCode::kShapeMismatch);
  ImageSet empty;
  empty.shape = arch.input_shape;
  CHECK(CodeOf([&] { EvaluateTop1(arch, weights, empty); }) == ErrorCode::kEmptyDataset);
  auto huge = weights;
  huge.biases[arch.Find("conv1")][0] = std::numeric_limits<float>::infinity();
  CHECK(CodeOf([&] { Forward(arch, huge, batch); }) == ErrorCode::kNumericOverflow);
}

TEST_CASE("throughput is positive") {
  const ArchGraph arch = BuildSqueezeNetMini(10);
  const auto t = BenchmarkThroughput(arch, InitWeights(arch, 1), 4, 0.0);
  CHECK(t.images_per_sec > 0.0);
  CHECK(t.batches >= 1);
  CHECK(t.macs == ReportSize(arch).macs);
}
