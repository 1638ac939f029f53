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

#ifndef EVOSQUISH_KERNELS_HPP_
#define EVOSQUISH_KERNELS_HPP_

// Single-sample layer kernels. The engine runs them in parallel over the
// samples of a batch; nothing in here touches shared state.
//
// Two convolution paths compute the same function:
//   reference::  direct sliding-window loops, the serial oracle
//   patch::      patch matrix (im2col) + row-major products that skip
//                zero weights, the production path
// Backward kernels accumulate (+=) into din / dw / db.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

namespace evosquish::kernels {

struct ConvGeometry {
  int in_c = 0, in_h = 0, in_w = 0;
  int out_c = 0, out_h = 0, out_w = 0;
  int kh = 1, kw = 1, stride = 1, pad = 0;

  std::size_t PatchSize() const { return static_cast<std::size_t>(in_c) * kh * kw; }
  std::size_t InPlane() const { return static_cast<std::size_t>(in_h) * in_w; }
  std::size_t OutPlane() const { return static_cast<std::size_t>(out_h) * out_w; }
  bool IsPointwise() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

namespace reference {

template <typename Real>
void ConvForward(const ConvGeometry& g, const Real* in, const Real* w, const Real* bias, Real* out) {
  for (int o = 0; o < g.out_c; ++o) {
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        Real acc = bias ? bias[o] : Real{0};
        for (int c = 0; c < g.in_c; ++c) {
          for (int ky = 0; ky < g.kh; ++ky) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int kx = 0; kx < g.kw; ++kx) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= g.in_w) continue;
              acc += w[((static_cast<std::size_t>(o) * g.in_c + c) * g.kh + ky) * g.kw + kx] *
                     in[(static_cast<std::size_t>(c) * g.in_h + iy) * g.in_w + ix];
            }
          }
        }
        out[(static_cast<std::size_t>(o) * g.out_h + oy) * g.out_w + ox] = acc;
      }
    }
  }
}

template <typename Real>
void ConvBackward(const ConvGeometry& g, const Real* in, const Real* w, const Real* dout, Real* din,
                  Real* dw, Real* db) {
  for (int o = 0; o < g.out_c; ++o) {
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        const Real d = dout[(static_cast<std::size_t>(o) * g.out_h + oy) * g.out_w + ox];
        if (db) db[o] += d;
        for (int c = 0; c < g.in_c; ++c) {
          for (int ky = 0; ky < g.kh; ++ky) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int kx = 0; kx < g.kw; ++kx) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix < 0 || ix >= g.in_w) continue;
              const std::size_t wi = ((static_cast<std::size_t>(o) * g.in_c + c) * g.kh + ky) * g.kw + kx;
              const std::size_t ii = (static_cast<std::size_t>(c) * g.in_h + iy) * g.in_w + ix;
              dw[wi] += d * in[ii];
              if (din) din[ii] += d * w[wi];
            }
          }
        }
      }
    }
  }
}

}  // namespace reference

namespace patch {

// cols is [PatchSize][OutPlane]; padded taps read as zero.
template <typename Real>
void Im2Col(const ConvGeometry& g, const Real* in, Real* cols) {
  std::size_t row = 0;
  for (int c = 0; c < g.in_c; ++c) {
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx, ++row) {
        Real* dst = cols + row * g.OutPlane();
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          Real* d = dst + static_cast<std::size_t>(oy) * g.out_w;
          if (iy < 0 || iy >= g.in_h) {
            std::fill(d, d + g.out_w, Real{0});
            continue;
          }
          const Real* src = in + (static_cast<std::size_t>(c) * g.in_h + iy) * g.in_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            d[ox] = (ix < 0 || ix >= g.in_w) ? Real{0} : src[ix];
          }
        }
      }
    }
  }
}

template <typename Real>
void Col2ImAdd(const ConvGeometry& g, const Real* cols, Real* din) {
  std::size_t row = 0;
  for (int c = 0; c < g.in_c; ++c) {
    for (int ky = 0; ky < g.kh; ++ky) {
      for (int kx = 0; kx < g.kw; ++kx, ++row) {
        const Real* src = cols + row * g.OutPlane();
        for (int oy = 0; oy < g.out_h; ++oy) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          Real* d = din + (static_cast<std::size_t>(c) * g.in_h + iy) * g.in_w;
          const Real* s = src + static_cast<std::size_t>(oy) * g.out_w;
          for (int ox = 0; ox < g.out_w; ++ox) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix >= 0 && ix < g.in_w) d[ix] += s[ox];
          }
        }
      }
    }
  }
}

template <typename Real>
inline void Axpy(std::size_t n, Real a, const Real* x, Real* y) {
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename Real>
inline Real Dot(std::size_t n, const Real* x, const Real* y) {
  Real s{0};
#pragma omp simd reduction(+ : s)
  for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
  return s;
}

template <typename Real>
void ConvForward(const ConvGeometry& g, const Real* in, const Real* w, const Real* bias, Real* out,
                 std::vector<Real>& scratch) {
  const std::size_t patch = g.PatchSize();
  const std::size_t plane = g.OutPlane();
  const Real* cols = in;
  if (!g.IsPointwise()) {
    scratch.resize(patch * plane);
    Im2Col(g, in, scratch.data());
    cols = scratch.data();
  }
  for (int o = 0; o < g.out_c; ++o) {
    Real* row = out + static_cast<std::size_t>(o) * plane;
    std::fill(row, row + plane, bias ? bias[o] : Real{0});
    const Real* wrow = w + static_cast<std::size_t>(o) * patch;
    for (std::size_t k = 0; k < patch; ++k) {
      if (wrow[k] != Real{0}) Axpy(plane, wrow[k], cols + k * plane, row);
    }
  }
}

// `mask` (nullable) limits dw to live synapses.
template <typename Real>
void ConvBackward(const ConvGeometry& g, const Real* in, const Real* w, const std::uint8_t* mask,
                  const Real* dout, Real* din, Real* dw, Real* db, std::vector<Real>& scratch,
                  std::vector<Real>& dcols_scratch) {
  const std::size_t patch = g.PatchSize();
  const std::size_t plane = g.OutPlane();
  const Real* cols = in;
  if (!g.IsPointwise()) {
    scratch.resize(patch * plane);
    Im2Col(g, in, scratch.data());
    cols = scratch.data();
  }
  for (int o = 0; o < g.out_c; ++o) {
    const Real* drow = dout + static_cast<std::size_t>(o) * plane;
    if (db) {
      Real s{0};
      for (std::size_t p = 0; p < plane; ++p) s += drow[p];
      db[o] += s;
    }
    const std::size_t base = static_cast<std::size_t>(o) * patch;
    for (std::size_t k = 0; k < patch; ++k) {
      if (mask && !mask[base + k]) continue;
      dw[base + k] += Dot(plane, drow, cols + k * plane);
    }
  }
  if (!din) return;
  Real* dcols = din;
  if (!g.IsPointwise()) {
    dcols_scratch.assign(patch * plane, Real{0});
    dcols = dcols_scratch.data();
  }
  for (int o = 0; o < g.out_c; ++o) {
    const Real* drow = dout + static_cast<std::size_t>(o) * plane;
    const Real* wrow = w + static_cast<std::size_t>(o) * patch;
    for (std::size_t k = 0; k < patch; ++k) {
      if (wrow[k] != Real{0}) Axpy(plane, wrow[k], drow, dcols + k * plane);
    }
  }
  if (!g.IsPointwise()) Col2ImAdd(g, dcols, din);
}

}  // namespace patch

// Max pooling over the valid (unpadded) taps; ties go to the first tap in
// row-major order. argmax holds the input plane offset of the winner.
template <typename Real>
void MaxPoolForward(const ConvGeometry& g, const Real* in, Real* out, int* argmax) {
  for (int c = 0; c < g.in_c; ++c) {
    const Real* plane = in + static_cast<std::size_t>(c) * g.InPlane();
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        Real best = -std::numeric_limits<Real>::infinity();
        int best_at = -1;
        for (int ky = 0; ky < g.kh; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int kx = 0; kx < g.kw; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= g.in_w) continue;
            const int at = iy * g.in_w + ix;
            if (best_at < 0 || plane[at] > best) {
              best = plane[at];
              best_at = at;
            }
          }
        }
        const std::size_t o = (static_cast<std::size_t>(c) * g.out_h + oy) * g.out_w + ox;
        out[o] = best_at < 0 ? Real{0} : best;
        argmax[o] = best_at;
      }
    }
  }
}

template <typename Real>
void MaxPoolBackward(const ConvGeometry& g, const Real* dout, const int* argmax, Real* din) {
  for (int c = 0; c < g.in_c; ++c) {
    Real* plane = din + static_cast<std::size_t>(c) * g.InPlane();
    for (std::size_t o = 0; o < g.OutPlane(); ++o) {
      const std::size_t idx = static_cast<std::size_t>(c) * g.OutPlane() + o;
      if (argmax[idx] >= 0) plane[argmax[idx]] += dout[idx];
    }
  }
}

template <typename Real>
void GlobalAvgPoolForward(int channels, std::size_t plane, const Real* in, Real* out) {
  for (int c = 0; c < channels; ++c) {
    Real s{0};
    const Real* p = in + static_cast<std::size_t>(c) * plane;
    for (std::size_t i = 0; i < plane; ++i) s += p[i];
    out[c] = s / static_cast<Real>(plane);
  }
}

template <typename Real>
void GlobalAvgPoolBackward(int channels, std::size_t plane, const Real* dout, Real* din) {
  for (int c = 0; c < channels; ++c) {
    const Real g = dout[c] / static_cast<Real>(plane);
    Real* p = din + static_cast<std::size_t>(c) * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += g;
  }
}

}  // namespace evosquish::kernels

#endif  // EVOSQUISH_KERNELS_HPP_
