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
#include <vector>

#include "doctest.h"
#include "evosquish/kernels.hpp"
#include "evosquish/net_ir.hpp"
#include "evosquish/rng.hpp"

using namespace evosquish;
using namespace evosquish::kernels;

namespace {

ConvGeometry RandomGeometry(Rng& rng) {
  ConvGeometry g;
  g.in_c = 1 + static_cast<int>(rng.Below(5));
  g.out_c = 1 + static_cast<int>(rng.Below(5));
  g.kh = g.kw = 1 + static_cast<int>(rng.Below(3));
  g.stride = 1 + static_cast<int>(rng.Below(2));
  g.pad = static_cast<int>(rng.Below(static_cast<std::uint64_t>(g.kh)));
  g.in_h = g.kh + static_cast<int>(rng.Below(6));
  g.in_w = g.kw + static_cast<int>(rng.Below(6));
  g.out_h = WindowOutput(g.in_h, g.kh, g.stride, g.pad);
  g.out_w = WindowOutput(g.in_w, g.kw, g.stride, g.pad);
  return g;
}

std::vector<double> Fill(Rng& rng, std::size_t n, double zero_rate = 0.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.Bernoulli(zero_rate) ? 0.0 : rng.Uniform(-1.0, 1.0);
  return v;
}

}  // namespace

TEST_CASE("patch-matrix convolution matches the direct loops") {
  Rng rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const ConvGeometry g = RandomGeometry(rng);
    const auto in = Fill(rng, g.in_c * g.InPlane());
    const auto w = Fill(rng, g.out_c * g.PatchSize(), 0.3);
    const auto b = Fill(rng, g.out_c);
    const auto dout = Fill(rng, g.out_c * g.OutPlane());
    std::vector<std::uint8_t> mask(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) mask[i] = w[i] != 0.0;

    std::vector<double> ref(g.out_c * g.OutPlane()), fast(ref.size()), scratch, dscratch;
    reference::ConvForward(g, in.data(), w.data(), b.data(), ref.data());
    patch::ConvForward(g, in.data(), w.data(), b.data(), fast.data(), scratch);
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(fast[i] == doctest::Approx(ref[i]).epsilon(1e-12));

    std::vector<double> din_r(in.size()), dw_r(w.size()), db_r(b.size());
    std::vector<double> din_f(in.size()), dw_f(w.size()), db_f(b.size());
    reference::ConvBackward(g, in.data(), w.data(), dout.data(), din_r.data(), dw_r.data(), db_r.data());
    patch::ConvBackward(g, in.data(), w.data(), static_cast<const std::uint8_t*>(nullptr), dout.data(),
                        din_f.data(), dw_f.data(), db_f.data(), scratch, dscratch);
    for (std::size_t i = 0; i < din_r.size(); ++i) CHECK(din_f[i] == doctest::Approx(din_r[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < dw_r.size(); ++i) CHECK(dw_f[i] == doctest::Approx(dw_r[i]).epsilon(1e-12));
    for (std::size_t i = 0; i < db_r.size(); ++i) CHECK(db_f[i] == doctest::Approx(db_r[i]).epsilon(1e-12));

    std::vector<double> dw_m(w.size());
    patch::ConvBackward(g, in.data(), w.data(), mask.data(), dout.data(), static_cast<double*>(nullptr),
                        dw_m.data(), static_cast<double*>(nullptr), scratch, dscratch);
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(dw_m[i] == (mask[i] ? dw_f[i] : 0.0));
  }
}

TEST_CASE("3x3 all-ones kernel over all-ones input") {
  ConvGeometry g{1, 5, 5, 1, 5, 5, 3, 3, 1, 1};
  std::vector<float> in(25, 1.0f), w(9, 1.0f), out(25), scratch;
  patch::ConvForward(g, in.data(), w.data(), static_cast<const float*>(nullptr), out.data(), scratch);
  CHECK(out[2 * 5 + 2] == 9.0f);
  CHECK(out[0] == 4.0f);
  CHECK(out[2] == 6.0f);
}

TEST_CASE("1x1 identity kernel copies its input") {
  ConvGeometry g{3, 4, 4, 3, 4, 4, 1, 1, 1, 0};
  Rng rng(5);
  std::vector<float> in(48), w(9, 0.0f), out(48), scratch;
  for (float& v : in) v = static_cast<float>(rng.Uniform(-2.0, 2.0));
  for (int c = 0; c < 3; ++c) w[c * 3 + c] = 1.0f;
  patch::ConvForward(g, in.data(), w.data(), static_cast<const float*>(nullptr), out.data(), scratch);
  CHECK(out == in);
}

TEST_CASE("max pool picks the first of tied maxima and routes gradient there") {
  ConvGeometry g{1, 3, 3, 1, 1, 1, 3, 3, 2, 0};
  const std::vector<float> in = {0, 5, 5, 1, 2, 3, -1, 5, 4};
  float out = 0;
  int arg = -1;
  MaxPoolForward(g, in.data(), &out, &arg);
  CHECK(out == 5.0f);
  CHECK(arg == 1);
  std::vector<float> din(9, 0.0f);
  const float dout = 2.5f;
  MaxPoolBackward(g, &dout, &arg, din.data());
  CHECK(din[1] == 2.5f);
  CHECK(din[2] == 0.0f);
}

TEST_CASE("global average pool") {
  const std::vector<double> in = {1, 2, 3, 4, 10, 10, 10, 10};
  std::vector<double> out(2);
  GlobalAvgPoolForward(2, 4, in.data(), out.data());
  CHECK(out[0] == 2.5);
  CHECK(out[1] == 10.0);
  std::vector<double> din(8, 0.0);
  const std::vector<double> dout = {4.0, 8.0};
  GlobalAvgPoolBackward(2, 4, dout.data(), din.data());
  CHECK(din[0] == 1.0);
  CHECK(din[7] == 2.0);
}
