// Copyright 2026 The eslsnn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ESLSNN_CONV_HPP
#define ESLSNN_CONV_HPP

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "eslsnn/weights.hpp"

namespace eslsnn {

// 2-D cross-correlation, stride 1. Kernels are stored as a WeightMatrix
// with n_pre = in_c * k * k (flattened kernel elements) and n_post = out_c,
// which is also how the connection mask addresses individual elements.
struct ConvShape {
  std::uint32_t in_c, in_h, in_w;
  std::uint32_t out_c;
  std::uint32_t k = 3;
  std::uint32_t pad = 1;

  std::uint32_t out_h() const { return in_h + 2 * pad - k + 1; }
  std::uint32_t out_w() const { return in_w + 2 * pad - k + 1; }
  std::uint32_t n_pre() const { return in_c * k * k; }
  std::size_t in_size() const { return std::size_t(in_c) * in_h * in_w; }
  std::size_t out_size() const { return std::size_t(out_c) * out_h() * out_w(); }

  void check(const WeightMatrix& w) const {
    if (w.n_pre() != n_pre() || w.n_post() != out_c)
      throw std::invalid_argument("ConvShape: kernel matrix shape mismatch");
    if (in_h + 2 * pad < k || in_w + 2 * pad < k)
      throw std::invalid_argument("ConvShape: kernel larger than padded input");
  }
};

inline void conv2d_forward(std::span<const double> in, const ConvShape& s,
                           const WeightMatrix& w, std::span<double> out) {
  s.check(w);
  if (in.size() != s.in_size() || out.size() != s.out_size())
    throw std::invalid_argument("conv2d_forward: buffer size mismatch");
  const std::uint32_t oh = s.out_h(), ow = s.out_w();
  for (std::uint32_t oc = 0; oc < s.out_c; ++oc) {
    const double* kern = w.row(oc);
    for (std::uint32_t oy = 0; oy < oh; ++oy) {
      for (std::uint32_t ox = 0; ox < ow; ++ox) {
        double acc = 0.0;
        for (std::uint32_t ic = 0; ic < s.in_c; ++ic) {
          for (std::uint32_t kr = 0; kr < s.k; ++kr) {
            const std::int64_t iy = std::int64_t(oy) + kr - s.pad;
            if (iy < 0 || iy >= s.in_h) continue;
            for (std::uint32_t kc = 0; kc < s.k; ++kc) {
              const std::int64_t ix = std::int64_t(ox) + kc - s.pad;
              if (ix < 0 || ix >= s.in_w) continue;
              acc += kern[(ic * s.k + kr) * s.k + kc] *
                     in[(std::size_t(ic) * s.in_h + iy) * s.in_w + ix];
            }
          }
        }
        out[(std::size_t(oc) * oh + oy) * ow + ox] = acc;
      }
    }
  }
}

inline void conv2d_backward_input(std::span<const double> grad_out,
                                  const ConvShape& s, const WeightMatrix& w,
                                  std::span<double> grad_in) {
  s.check(w);
  std::fill(grad_in.begin(), grad_in.end(), 0.0);
  const std::uint32_t oh = s.out_h(), ow = s.out_w();
  for (std::uint32_t oc = 0; oc < s.out_c; ++oc) {
    const double* kern = w.row(oc);
    for (std::uint32_t oy = 0; oy < oh; ++oy) {
      for (std::uint32_t ox = 0; ox < ow; ++ox) {
        const double g = grad_out[(std::size_t(oc) * oh + oy) * ow + ox];
        if (g == 0.0) continue;
        for (std::uint32_t ic = 0; ic < s.in_c; ++ic) {
          for (std::uint32_t kr = 0; kr < s.k; ++kr) {
            const std::int64_t iy = std::int64_t(oy) + kr - s.pad;
            if (iy < 0 || iy >= s.in_h) continue;
            for (std::uint32_t kc = 0; kc < s.k; ++kc) {
              const std::int64_t ix = std::int64_t(ox) + kc - s.pad;
              if (ix < 0 || ix >= s.in_w) continue;
              grad_in[(std::size_t(ic) * s.in_h + iy) * s.in_w + ix] +=
                  g * kern[(ic * s.k + kr) * s.k + kc];
            }
          }
        }
      }
    }
  }
}

inline void conv2d_backward_weights(std::span<const double> grad_out,
                                    std::span<const double> in, const ConvShape& s,
                                    GradMatrix& grad_w) {
  const std::uint32_t oh = s.out_h(), ow = s.out_w();
  for (std::uint32_t oc = 0; oc < s.out_c; ++oc) {
    double* grow = grad_w.row(oc);
    for (std::uint32_t oy = 0; oy < oh; ++oy) {
      for (std::uint32_t ox = 0; ox < ow; ++ox) {
        const double g = grad_out[(std::size_t(oc) * oh + oy) * ow + ox];
        if (g == 0.0) continue;
        for (std::uint32_t ic = 0; ic < s.in_c; ++ic) {
          for (std::uint32_t kr = 0; kr < s.k; ++kr) {
            const std::int64_t iy = std::int64_t(oy) + kr - s.pad;
            if (iy < 0 || iy >= s.in_h) continue;
            for (std::uint32_t kc = 0; kc < s.k; ++kc) {
              const std::int64_t ix = std::int64_t(ox) + kc - s.pad;
              if (ix < 0 || ix >= s.in_w) continue;
              grow[(ic * s.k + kr) * s.k + kc] +=
                  g * in[(std::size_t(ic) * s.in_h + iy) * s.in_w + ix];
            }
          }
        }
      }
    }
  }
}

// 2x2 average pooling over spikes, stride 2. Odd trailing rows/columns are
// dropped.
inline void avg_pool2_forward(std::span<const double> in, std::uint32_t c,
                              std::uint32_t h, std::uint32_t w,
                              std::span<double> out) {
  const std::uint32_t ph = h / 2, pw = w / 2;
  if (out.size() != std::size_t(c) * ph * pw)
    throw std::invalid_argument("avg_pool2_forward: buffer size mismatch");
  for (std::uint32_t ch = 0; ch < c; ++ch)
    for (std::uint32_t y = 0; y < ph; ++y)
      for (std::uint32_t x = 0; x < pw; ++x) {
        const std::size_t base = (std::size_t(ch) * h + 2 * y) * w + 2 * x;
        out[(std::size_t(ch) * ph + y) * pw + x] =
            0.25 * (in[base] + in[base + 1] + in[base + w] + in[base + w + 1]);
      }
}

inline void avg_pool2_backward(std::span<const double> grad_out, std::uint32_t c,
                               std::uint32_t h, std::uint32_t w,
                               std::span<double> grad_in) {
  const std::uint32_t ph = h / 2, pw = w / 2;
  std::fill(grad_in.begin(), grad_in.end(), 0.0);
  for (std::uint32_t ch = 0; ch < c; ++ch)
    for (std::uint32_t y = 0; y < ph; ++y)
      for (std::uint32_t x = 0; x < pw; ++x) {
        const double g = 0.25 * grad_out[(std::size_t(ch) * ph + y) * pw + x];
        const std::size_t base = (std::size_t(ch) * h + 2 * y) * w + 2 * x;
        grad_in[base] += g;
        grad_in[base + 1] += g;
        grad_in[base + w] += g;
        grad_in[base + w + 1] += g;
      }
}

}  // namespace eslsnn

#endif  // ESLSNN_CONV_HPP
