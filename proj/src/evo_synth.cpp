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

#include "evosquish/evo_synth.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

#include "evosquish/error.hpp"
#include "evosquish/rng.hpp"

namespace evosquish {

namespace {

void CheckEncoding(const GeneticEncoding& enc, const ArchGraph& parent) {
  if (enc.probabilities.size() != parent.layers.size()) {
    throw Error(ErrorCode::kShapeMismatch, "encoding does not match the parent graph");
  }
  for (std::size_t l = 0; l < parent.layers.size(); ++l) {
    if (enc.probabilities[l].size() != parent.masks[l].size()) {
      throw Error(ErrorCode::kShapeMismatch,
                  "encoding table of layer '" + parent.layers[l].id + "' has the wrong size");
    }
  }
}

bool MeetsConstraints(const ArchGraph& child, const EnvironmentConfig& env) {
  const int classifier = child.ClassifierIndex();
  for (int l : child.ConvIndices()) {
    const std::size_t live = LiveFilters(child, l);
    if (l == classifier) {
      if (live != static_cast<std::size_t>(child.layers[l].out_channels)) return false;
    } else if (live < static_cast<std::size_t>(env.min_filters_per_layer)) {
      return false;
    }
  }
  return true;
}

Offspring Synthesize(const GeneticEncoding& enc, const EnvironmentConfig& env,
                     const ArchGraph& parent, const WeightStore* parent_weights,
                     const SamplingObserver& observer) {
  env.Validate();
  Validate(parent);
  CheckEncoding(enc, parent);
  if (parent_weights) CheckWeightShapes(parent, *parent_weights);

  std::vector<std::vector<double>> survival(parent.layers.size());
  for (int l : parent.ConvIndices()) {
    survival[l].resize(enc.probabilities[l].size());
    for (std::size_t i = 0; i < survival[l].size(); ++i) {
      const double p = enc.probabilities[l][i];
      if (!(p >= 0.0 && p <= 1.0)) {
        throw Error(ErrorCode::kShapeMismatch, "encoding probability outside [0, 1]");
      }
      survival[l][i] = parent.masks[l][i] ? p * env.factor : 0.0;
    }
  }

  Rng rng(env.rng_seed);
  for (int attempt = 1; attempt <= env.max_resample_attempts; ++attempt) {
    ArchGraph child = parent;
    for (int l : parent.ConvIndices()) {
      if (observer) observer(l, survival[l]);
      Mask& mask = child.masks[l];
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i]) mask[i] = rng.Uniform() < survival[l][i] ? 1 : 0;
      }
    }
    ClearInertSynapses(child);
    if (!MeetsConstraints(child, env)) continue;

    const CompactionPlan plan = PlanCompaction(child);
    Offspring out;
    out.attempts = attempt;
    if (parent_weights) {
      WeightStore inherited = *parent_weights;
      ApplyMasks(child, inherited);
      out.weights = CompactWeights(child, inherited, plan);
    }
    out.arch = ApplyCompaction(child, plan);
    return out;
  }
  throw Error(ErrorCode::kDegenerateArchitecture,
              "no viable offspring after " + std::to_string(env.max_resample_attempts) + " draws");
}

}  // namespace

void EncodingOptions::Validate() const {
  if (!(floor > 0.0 && floor <= 1.0)) throw Error(ErrorCode::kInvalidConfig, "floor must lie in (0, 1]");
  if (!(reference_quantile > 0.0 && reference_quantile <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "reference_quantile must lie in (0, 1]");
  }
}

void EnvironmentConfig::Validate() const {
  if (!(factor > 0.0 && factor <= 1.0)) {
    throw Error(ErrorCode::kInvalidEnvironmentFactor,
                "R = " + std::to_string(factor) + " is outside (0, 1]");
  }
  if (min_filters_per_layer < 1) throw Error(ErrorCode::kInvalidConfig, "min_filters_per_layer must be >= 1");
  if (max_resample_attempts < 1) throw Error(ErrorCode::kInvalidConfig, "max_resample_attempts must be >= 1");
}

GeneticEncoding DeriveEncoding(const ArchGraph& parent, const WeightStore& weights,
                               int parent_generation, const EncodingOptions& opts) {
  opts.Validate();
  Validate(parent);
  CheckWeightShapes(parent, weights);
  GeneticEncoding enc;
  enc.parent_generation = parent_generation;
  enc.probabilities.resize(parent.layers.size());
  for (int l : parent.ConvIndices()) {
    const Mask& mask = parent.masks[l];
    const auto& w = weights.weights[l];
    std::vector<double> magnitudes;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) magnitudes.push_back(std::fabs(static_cast<double>(w[i])));
    }
    if (magnitudes.empty()) {
      throw Error(ErrorCode::kAllDeadLayer, "layer '" + parent.layers[l].id + "' has no live synapse");
    }
    const auto rank = static_cast<std::size_t>(
        std::floor(opts.reference_quantile * static_cast<double>(magnitudes.size() - 1)));
    std::nth_element(magnitudes.begin(), magnitudes.begin() + static_cast<std::ptrdiff_t>(rank),
                     magnitudes.end());
    const double reference = magnitudes[rank];

    auto& p = enc.probabilities[l];
    p.assign(mask.size(), 0.0);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      const double ratio = reference > 0.0 ? std::fabs(static_cast<double>(w[i])) / reference : 1.0;
      p[i] = std::clamp(ratio, opts.floor, 1.0);
    }
  }
  return enc;
}

GeneticEncoding UnitEncoding(const ArchGraph& parent, int parent_generation) {
  GeneticEncoding enc;
  enc.parent_generation = parent_generation;
  for (const Mask& mask : parent.masks) enc.probabilities.emplace_back(mask.begin(), mask.end());
  return enc;
}

Offspring SynthesizeOffspring(const GeneticEncoding& enc, const EnvironmentConfig& env,
                              const ArchGraph& parent, const WeightStore& parent_weights,
                              const SamplingObserver& observer) {
  return Synthesize(enc, env, parent, &parent_weights, observer);
}

ArchGraph SynthesizeOffspring(const GeneticEncoding& enc, const EnvironmentConfig& env,
                              const ArchGraph& parent, const SamplingObserver& observer) {
  return Synthesize(enc, env, parent, nullptr, observer).arch;
}

}  // namespace evosquish
