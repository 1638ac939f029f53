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

#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "evosquish/error.hpp"
#include "evosquish/evo_synth.hpp"
#include "evosquish/rng.hpp"

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

// input (c x 1 x 1) -> 1x1 conv with `hidden` filters -> 1x1 classifier.
ArchGraph Dense(int in, int hidden, int classes) {
  ArchBuilder b({in, 1, 1});
  int x = b.Conv("hidden", b.input(), hidden, 1);
  x = b.Conv("conv10", x, classes, 1);
  return b.Finish(b.GlobalAvgPool("pool", x));
}

ArchGraph Linear(int in) {
  ArchBuilder b({in, 1, 1});
  int x = b.Conv("conv10", b.input(), 1, 1);
  return b.Finish(b.GlobalAvgPool("pool", x));
}

GeneticEncoding Constant(const ArchGraph& arch, double p) {
  GeneticEncoding enc = UnitEncoding(arch);
  for (auto& layer : enc.probabilities) {
    for (double& v : layer) v *= p;
  }
  return enc;
}

}  // namespace

TEST_CASE("encoding normalizes by the layer maximum") {
  const ArchGraph arch = Linear(3);
  WeightStore w = InitWeights(arch, 1);
  const int l = arch.Find("conv10");
  w.weights[l] = {0.5f, -1.0f, 0.25f};
  auto enc = DeriveEncoding(arch, w);
  CHECK(enc.probabilities[l] == std::vector<double>{0.5, 1.0, 0.25});

  w.weights[l] = {0.7f, -0.7f, 0.7f};
  enc = DeriveEncoding(arch, w);
  CHECK(enc.probabilities[l] == std::vector<double>{1.0, 1.0, 1.0});

  w.weights[l] = {1e-6f, 2.0f, 0.0f};
  enc = DeriveEncoding(arch, w, 4);
  CHECK(enc.parent_generation == 4);
  CHECK(enc.probabilities[l][0] == 1e-3);
  CHECK(enc.probabilities[l][2] == 1e-3);

  ArchGraph dead = arch;
  dead.masks[l][1] = 0;
  w.weights[l] = {0.5f, -7.0f, 0.25f};
  enc = DeriveEncoding(dead, w);
  CHECK(enc.probabilities[l] == std::vector<double>{1.0, 0.0, 0.5});
}

TEST_CASE("encoding probabilities are valid on a trained-size network") {
  ArchGraph arch = BuildSqueezeNetMini(10);
  Rng rng(3);
  for (int l : arch.ConvIndices()) {
    for (auto& bit : arch.masks[l]) bit = rng.Bernoulli(0.8) ? 1 : 0;
  }
  const auto w = InitWeights(arch, 2);
  for (double q : {1.0, 0.5, 0.05}) {
    const auto enc = DeriveEncoding(arch, w, 0, {1e-3, q});
    int bad = 0;
    std::size_t saturated = 0, live = 0;
    for (int l : arch.ConvIndices()) {
      for (std::size_t i = 0; i < arch.masks[l].size(); ++i) {
        const double p = enc.probabilities[l][i];
        if (arch.masks[l][i]) {
          ++live;
          saturated += p == 1.0;
          if (p < 1e-3 || p > 1.0) ++bad;
        } else if (p != 0.0) {
          ++bad;
        }
      }
    }
    CHECK(bad == 0);
    // At least the top (1 - q) share of each layer saturates.
    CHECK(static_cast<double>(saturated) >= (1.0 - q) * static_cast<double>(live) - 20.0);
  }
}

TEST_CASE("encoding errors") {
  const ArchGraph arch = Dense(4, 3, 2);
  const auto w = InitWeights(arch, 1);
  ArchGraph dead = arch;
  const int h = arch.Find("hidden");
  std::fill(dead.masks[h].begin(), dead.masks[h].end(), std::uint8_t{0});
  CHECK(CodeOf([&] { DeriveEncoding(dead, w); }) == ErrorCode::kAllDeadLayer);
  WeightStore short_w = w;
  short_w.weights[h].pop_back();
  CHECK(CodeOf([&] { DeriveEncoding(arch, short_w); }) == ErrorCode::kShapeMismatch);
  CHECK(CodeOf([&] { DeriveEncoding(arch, w, 0, {1e-3, 0.0}); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("unit encoding with R = 1 reproduces the parent") {
  ArchGraph arch = BuildSqueezeNetMini(10);
  Rng rng(5);
  for (int l : arch.ConvIndices()) {
    for (auto& bit : arch.masks[l]) bit = rng.Bernoulli(0.9) ? 1 : 0;
  }
  ClearInertSynapses(arch);
  arch = Compact(arch);
  auto w = InitWeights(arch, 4);
  ApplyMasks(arch, w);
  EnvironmentConfig env;
  env.factor = 1.0;
  env.rng_seed = 77;
  const Offspring child = SynthesizeOffspring(UnitEncoding(arch), env, arch, w);
  CHECK(child.arch == arch);
  CHECK(child.weights == w);
  CHECK(child.attempts == 1);
}

TEST_CASE("survivor count at R = 0.5 over 10,000 synapses") {
  const ArchGraph arch = Dense(100, 100, 2);
  const int h = arch.Find("hidden");
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    EnvironmentConfig env;
    env.factor = 0.5;
    env.rng_seed = seed;
    const ArchGraph child = SynthesizeOffspring(UnitEncoding(arch), env, arch);
    REQUIRE(child.layers[h].out_channels == 100);
    const auto survivors = static_cast<long>(LiveSynapses(child.masks[h]));
    CHECK(std::abs(survivors - 5000) <= 150);
  }
}

TEST_CASE("survival frequency matches p * R within three standard errors") {
  // 300 filters of 1000 synapses; filter f holds probability class f % 3.
  const ArchGraph arch = Dense(1000, 300, 2);
  const int h = arch.Find("hidden");
  const double classes[3] = {0.2, 0.5, 0.95};
  GeneticEncoding enc = UnitEncoding(arch);
  for (int f = 0; f < 300; ++f) {
    std::fill_n(enc.probabilities[h].begin() + f * 1000, 1000, classes[f % 3]);
  }
  EnvironmentConfig env;
  env.factor = 0.8;
  env.rng_seed = 2024;
  const ArchGraph child = SynthesizeOffspring(enc, env, arch);
  REQUIRE(child.layers[h].out_channels == 300);
  for (int c = 0; c < 3; ++c) {
    std::size_t live = 0;
    for (int f = c; f < 300; f += 3) {
      for (int i = 0; i < 1000; ++i) live += child.masks[h][static_cast<std::size_t>(f) * 1000 + i];
    }
    const double n = 1e5;
    const double q = classes[c] * env.factor;
    const double freq = static_cast<double>(live) / n;
    CHECK(std::abs(freq - q) < 3.0 * std::sqrt(q * (1.0 - q) / n));
  }
}

TEST_CASE("the observer sees encoding times R") {
  const ArchGraph arch = BuildSqueezeNetMini(10);
  const auto w = InitWeights(arch, 8);
  const auto enc = DeriveEncoding(arch, w);
  EnvironmentConfig env;
  env.factor = 0.7;
  env.rng_seed = 1;
  int layers_seen = 0;
  int mismatches = 0;
  SynthesizeOffspring(enc, env, arch, [&](int l, std::span<const double> survival) {
    ++layers_seen;
    for (std::size_t i = 0; i < survival.size(); ++i) {
      if (survival[i] != enc.probabilities[l][i] * 0.7) ++mismatches;
    }
  });
  CHECK(layers_seen >= static_cast<int>(arch.ConvIndices().size()));
  CHECK(mismatches == 0);
}

TEST_CASE("offspring masks are subsets of the parent's") {
  // Give every live synapse a distinct non-zero weight; an offspring synapse
  // is then traceable to exactly one live parent synapse through its value.
  ArchGraph parent = BuildSqueezeNetMini(10);
  WeightStore w = InitWeights(parent, 1);
  float next = 1.0f;
  for (int l : parent.ConvIndices()) {
    for (float& v : w.weights[l]) v = (next += 1.0f);
  }
  EnvironmentConfig env;
  env.factor = 0.9;
  std::uint64_t last_live = ReportSize(parent).live_params;
  for (int g = 1; g <= 6; ++g) {
    env.rng_seed = DeriveSeed(99, static_cast<std::uint64_t>(g));
    std::map<float, int> live_parent;
    for (int l : parent.ConvIndices()) {
      for (std::size_t i = 0; i < parent.masks[l].size(); ++i) {
        if (parent.masks[l][i]) live_parent[w.weights[l][i]] = l;
      }
    }
    const Offspring child = SynthesizeOffspring(Constant(parent, 0.8), env, parent, w);
    int orphans = 0;
    for (int l : child.arch.ConvIndices()) {
      for (std::size_t i = 0; i < child.arch.masks[l].size(); ++i) {
        const float v = child.weights.weights[l][i];
        if (child.arch.masks[l][i]) {
          const auto it = live_parent.find(v);
          if (it == live_parent.end() || it->second != l) ++orphans;
          else live_parent.erase(it);
        } else if (v != 0.0f) {
          ++orphans;
        }
      }
    }
    CHECK(orphans == 0);
    const std::uint64_t live = ReportSize(child.arch).live_params;
    CHECK(live <= last_live);
    last_live = live;
    parent = child.arch;
    w = child.weights;
  }
}

TEST_CASE("synthesis is deterministic in the seed") {
  const ArchGraph arch = BuildSqueezeNetMini(10);
  const auto w = InitWeights(arch, 8);
  const auto enc = DeriveEncoding(arch, w, 0, {1e-3, 0.05});
  EnvironmentConfig env;
  env.rng_seed = 5;
  const auto a = SynthesizeOffspring(enc, env, arch, w);
  const auto b = SynthesizeOffspring(enc, env, arch, w);
  CHECK(a.arch == b.arch);
  CHECK(a.weights == b.weights);
  env.rng_seed = 6;
  CHECK(SynthesizeOffspring(enc, env, arch, w).arch != a.arch);
}

TEST_CASE("environment errors") {
  const ArchGraph arch = Dense(4, 3, 2);
  EnvironmentConfig env;
  env.factor = 1.5;
  CHECK(CodeOf([&] { SynthesizeOffspring(UnitEncoding(arch), env, arch); }) ==
        ErrorCode::kInvalidEnvironmentFactor);
  env.factor = 0.0;
  CHECK(CodeOf([&] { env.Validate(); }) == ErrorCode::kInvalidEnvironmentFactor);
  env.factor = 1.0;
  env.min_filters_per_layer = 4;
  env.max_resample_attempts = 3;
  CHECK(CodeOf([&] { SynthesizeOffspring(UnitEncoding(arch), env, arch); }) ==
        ErrorCode::kDegenerateArchitecture);
  env.min_filters_per_layer = 1;
  GeneticEncoding wrong = UnitEncoding(Dense(5, 3, 2));
  CHECK(CodeOf([&] { SynthesizeOffspring(wrong, env, arch); }) == ErrorCode::kShapeMismatch);
}
