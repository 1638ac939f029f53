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

#ifndef EVOSQUISH_EVO_SYNTH_HPP_
#define EVOSQUISH_EVO_SYNTH_HPP_

// Stochastic synaptogenesis. A trained parent is encoded as per-synapse
// survival probabilities; an offspring keeps each synapse independently with
// probability p * R, where R < 1 starves every generation of resources.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "evosquish/net_ir.hpp"
#include "evosquish/tensor.hpp"

namespace evosquish {

// Per-layer survival probabilities, shaped like the parent's masks. Dead
// parent synapses hold exactly 0 so they can never come back.
struct GeneticEncoding {
  int parent_generation = 0;
  std::vector<std::vector<double>> probabilities;
};

struct EncodingOptions {
  // Smallest probability a live synapse can get.
  double floor = 1e-3;
  // p = clamp(|w| / m, floor, 1) where m is this quantile of the layer's live
  // |w|. 1.0 normalizes by the layer maximum.
  double reference_quantile = 1.0;

  void Validate() const;
};

// Throws kShapeMismatch, or kAllDeadLayer when a conv layer has no live
// synapse to normalize against.
GeneticEncoding DeriveEncoding(const ArchGraph& parent, const WeightStore& weights,
                               int parent_generation = 0, const EncodingOptions& opts = {});

// Every live synapse gets probability 1. Offspring then differ from the
// parent only through R.
GeneticEncoding UnitEncoding(const ArchGraph& parent, int parent_generation = 0);

struct EnvironmentConfig {
  double factor = 0.9;  // R, in (0, 1]
  int min_filters_per_layer = 1;
  int max_resample_attempts = 10;
  std::uint64_t rng_seed = 0;

  // Throws kInvalidEnvironmentFactor / kInvalidConfig.
  void Validate() const;
};

// Sees the survival probabilities p * R of every conv layer right before they
// are sampled.
using SamplingObserver = std::function<void(int layer, std::span<const double> survival)>;

struct Offspring {
  ArchGraph arch;
  WeightStore weights;  // surviving parent weights, compacted
  int attempts = 0;
};

// One Bernoulli draw per live parent synapse from Rng(env.rng_seed), in layer
// then mask order. Synapses left reading dead channels are cleared, the
// result is compacted, and the draw is repeated (up to
// max_resample_attempts) while a layer has fewer than min_filters_per_layer
// live filters or a class filter died. Throws kDegenerateArchitecture once
// attempts run out.
Offspring SynthesizeOffspring(const GeneticEncoding& enc, const EnvironmentConfig& env,
                              const ArchGraph& parent, const WeightStore& parent_weights,
                              const SamplingObserver& observer = {});
ArchGraph SynthesizeOffspring(const GeneticEncoding& enc, const EnvironmentConfig& env,
                              const ArchGraph& parent, const SamplingObserver& observer = {});

}  // namespace evosquish

#endif  // EVOSQUISH_EVO_SYNTH_HPP_
