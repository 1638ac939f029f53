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

#ifndef EVOSQUISH_TESTS_GRADIENT_ORACLE_HPP_
#define EVOSQUISH_TESTS_GRADIENT_ORACLE_HPP_

// Central-difference check of the analytic gradient, in double precision.

#include <algorithm>
#include <cmath>
#include <vector>

#include "evosquish/engine.hpp"
#include "evosquish/rng.hpp"

namespace evosquish::testing {

struct GradientCheck {
  int requested = 0;
  int probes = 0;
  int failures = 0;
  int skipped = 0;  // steps that crossed a ReLU or max-pool switch
  double max_rel_error = 0.0;
};

// Tiny two-conv nets, one per layer kind under test.
inline ArchGraph TinyConvNet() {
  ArchBuilder b({2, 5, 5});
  int x = b.Conv("conv1", b.input(), 3, 3, 2, 1);
  x = b.Conv("conv10", x, 3, 1);
  return b.Finish(b.GlobalAvgPool("pool10", x));
}

inline ArchGraph TinyPoolNet() {
  ArchBuilder b({2, 6, 6});
  int x = b.Conv("conv1", b.input(), 3, 3, 1, 1);
  x = b.MaxPool("pool1", x, 3, 2);
  x = b.Conv("conv10", x, 3, 1);
  return b.Finish(b.GlobalAvgPool("pool10", x));
}

inline ArchGraph TinyConcatNet() {
  ArchBuilder b({2, 4, 4});
  int x = b.Fire("fire1", b.input(), 2, 2);
  x = b.Conv("conv10", x, 3, 1);
  return b.Finish(b.GlobalAvgPool("pool10", x));
}

// Which side of every non-smooth point the forward pass took: ReLU on/off
// and the winning max-pool tap.
struct Pattern {
  std::vector<int> branches;
  bool operator==(const Pattern&) const = default;
};

// Direct re-implementation of the forward pass and mean cross-entropy, kept
// independent of the engine so the finite differences do not share its code.
inline double ReferenceLoss(const ArchGraph& arch, const BasicWeightStore<double>& weights,
                            const BasicTensor<double>& batch, const std::vector<int>& labels,
                            Pattern* pattern) {
  const auto shapes = InferShapes(arch);
  double loss = 0.0;
  for (int n = 0; n < batch.n(); ++n) {
    std::vector<std::vector<double>> act(arch.layers.size());
    act[0].assign(batch.Sample(n), batch.Sample(n) + batch.SampleSize());
    for (std::size_t l = 1; l < arch.layers.size(); ++l) {
      const LayerSpec& s = arch.layers[l];
      const Shape3 out = shapes[l];
      auto& y = act[l];
      if (s.kind == LayerKind::kConcat) {
        for (int p : s.inputs) y.insert(y.end(), act[p].begin(), act[p].end());
        continue;
      }
      y.assign(out.Volume(), 0.0);
      const int pred = s.inputs.front();
      const Shape3 in = shapes[pred];
      const auto& x = act[pred];
      auto at = [&](int c, int r, int q) { return x[(static_cast<std::size_t>(c) * in.height + r) * in.width + q]; };
      for (int o = 0; o < out.channels; ++o) {
        for (int r = 0; r < out.height; ++r) {
          for (int q = 0; q < out.width; ++q) {
            double v = 0.0;
            if (s.kind == LayerKind::kConv) {
              v = s.has_bias ? weights.biases[l][o] : 0.0;
              for (int c = 0; c < s.in_channels; ++c) {
                for (int ky = 0; ky < s.kernel_h; ++ky) {
                  for (int kx = 0; kx < s.kernel_w; ++kx) {
                    const int iy = r * s.stride - s.padding + ky, ix = q * s.stride - s.padding + kx;
                    if (iy < 0 || iy >= in.height || ix < 0 || ix >= in.width) continue;
                    v += weights.weights[l][((static_cast<std::size_t>(o) * s.in_channels + c) * s.kernel_h + ky) *
                                                s.kernel_w + kx] * at(c, iy, ix);
                  }
                }
              }
              if (s.relu) {
                if (pattern) pattern->branches.push_back(v > 0.0);
                v = std::max(v, 0.0);
              }
            } else if (s.kind == LayerKind::kMaxPool) {
              int best = -1;
              for (int ky = 0; ky < s.kernel_h; ++ky) {
                for (int kx = 0; kx < s.kernel_w; ++kx) {
                  const int iy = r * s.stride - s.padding + ky, ix = q * s.stride - s.padding + kx;
                  if (iy < 0 || iy >= in.height || ix < 0 || ix >= in.width) continue;
                  if (best < 0 || at(o, iy, ix) > v) {
                    v = at(o, iy, ix);
                    best = iy * in.width + ix;
                  }
                }
              }
              if (pattern) pattern->branches.push_back(best);
            } else if (s.kind == LayerKind::kGlobalAvgPool) {
              for (int iy = 0; iy < in.height; ++iy) {
                for (int ix = 0; ix < in.width; ++ix) v += at(o, iy, ix);
              }
              v /= in.height * in.width;
            } else if (s.kind == LayerKind::kSoftmax) {
              v = x[o];  // logits; the loss below applies the softmax
            }
            y[(static_cast<std::size_t>(o) * out.height + r) * out.width + q] = v;
          }
        }
      }
    }
    const auto& z = act.back();
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    loss += std::log(sum) + m - z[labels[n]];
  }
  return loss / batch.n();
}

// Probes `per_layer` random live weights and one bias of every conv with a
// step of 1e-3; a probe fails at relative error >= 1e-4. A central
// difference only means something where the loss is smooth over the whole
// step, so probes whose step flips a ReLU or a max-pool winner are redrawn
// and counted as skipped.
inline GradientCheck CheckGradients(const ArchGraph& arch, std::uint64_t seed, int per_layer) {
  auto weights = ConvertWeights<double>(InitWeights(arch, seed));
  Rng rng(seed + 1);
  for (int l : arch.ConvIndices()) {
    for (double& b : weights.biases[l]) b = rng.Uniform(-0.1, 0.5);
  }
  ApplyMasks(arch, weights);
  BasicTensor<double> batch(3, arch.input_shape.channels, arch.input_shape.height, arch.input_shape.width);
  for (double& v : batch.data) v = rng.Uniform(-1.0, 1.0);
  std::vector<int> labels;
  for (int i = 0; i < 3; ++i) labels.push_back(i % arch.num_classes);
  const auto analytic = Backward(arch, weights, batch, labels);
  Pattern center;
  ReferenceLoss(arch, weights, batch, labels, &center);

  const double h = 1e-3;
  GradientCheck result;
  // Returns false when the step crosses a non-smooth point.
  auto probe = [&](std::vector<double>& buf, const std::vector<double>& grad, std::size_t i) {
    const double keep = buf[i];
    Pattern up_pattern, down_pattern;
    buf[i] = keep + h;
    const double up = ReferenceLoss(arch, weights, batch, labels, &up_pattern);
    buf[i] = keep - h;
    const double down = ReferenceLoss(arch, weights, batch, labels, &down_pattern);
    buf[i] = keep;
    if (!(up_pattern == center && down_pattern == center)) {
      ++result.skipped;
      return false;
    }
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(grad[i]), 1e-6});
    const double rel = std::abs(numeric - grad[i]) / scale;
    ++result.probes;
    result.max_rel_error = std::max(result.max_rel_error, rel);
    if (rel >= 1e-4) ++result.failures;
    return true;
  };
  for (int l : arch.ConvIndices()) {
    result.requested += per_layer + 1;
    for (int k = 0, tries = 0; k < per_layer && tries < 20 * per_layer; ++tries) {
      const std::size_t i = rng.Below(weights.weights[l].size());
      if (arch.masks[l][i] && probe(weights.weights[l], analytic.grads.weights[l], i)) ++k;
    }
    for (int tries = 0; tries < 20; ++tries) {
      if (probe(weights.biases[l], analytic.grads.biases[l], rng.Below(weights.biases[l].size()))) break;
    }
  }
  return result;
}

}  // namespace evosquish::testing

#endif  // EVOSQUISH_TESTS_GRADIENT_ORACLE_HPP_
