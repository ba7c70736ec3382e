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

#ifndef ESLSNN_LIF_HPP
#define ESLSNN_LIF_HPP

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "eslsnn/weights.hpp"

namespace eslsnn {

// Iterative leaky integrate-and-fire neuron (Euler form):
//   v(t) = tau * u(t-1) + I(t),  a(t) = H(v(t) - v_th),  u(t) = v(t)(1 - a(t)).
struct LifConfig {
  double tau = 0.5;              // leak factor, in (0, 1]
  double v_th = 1.0;             // firing threshold, > 0
  double surrogate_width = 1.0;  // rectangular window width gamma, > 0

  void validate() const {
    if (!(tau > 0.0 && tau <= 1.0))
      throw std::invalid_argument("LifConfig: tau must be in (0, 1]");
    if (!(v_th > 0.0)) throw std::invalid_argument("LifConfig: v_th must be > 0");
    if (!(surrogate_width > 0.0))
      throw std::invalid_argument("LifConfig: surrogate_width must be > 0");
  }
};

// One membrane update. Returns (spike, post-reset membrane).
inline std::pair<double, double> lif_step(double u_prev, double input_current,
                                          const LifConfig& cfg) {
  const double v = cfg.tau * u_prev + input_current;
  const double a = v >= cfg.v_th ? 1.0 : 0.0;
  return {a, v * (1.0 - a)};
}

// Rectangular surrogate for the Heaviside derivative: 1/gamma inside a
// window of width gamma centered on the threshold, 0 outside. Integrates
// to 1 over v for any gamma.
inline double surrogate_grad(double v_minus_vth, const LifConfig& cfg) {
  const double g = cfg.surrogate_width;
  return std::fabs(v_minus_vth) < 0.5 * g ? 1.0 / g : 0.0;
}

// Synaptic currents of a masked dense layer: I_j = sum_i w_ij x_i. The
// sparsity contract is that inactive weights are exactly 0, so the plain
// dense product equals multiplication by the explicitly masked matrix.
inline void masked_dense_forward(std::span<const double> x, const WeightMatrix& w,
                                 std::span<double> currents) {
  if (x.size() != w.n_pre() || currents.size() != w.n_post())
    throw std::invalid_argument("masked_dense_forward: shape mismatch");
  for (std::uint32_t j = 0; j < w.n_post(); ++j) {
    const double* wrow = w.row(j);
    double acc = 0.0;
    for (std::uint32_t i = 0; i < w.n_pre(); ++i) acc += wrow[i] * x[i];
    currents[j] = acc;
  }
}

struct TetLoss {
  double loss = 0.0;
  std::vector<std::vector<double>> grad;  // dL/dO per timestep, per class
};

// TET loss: the mean over timesteps of the cross-entropy between the
// softmaxed readout O(t) and the target class.
inline TetLoss tet_loss(const std::vector<std::vector<double>>& readout,
                        std::size_t target) {
  if (readout.empty()) throw std::invalid_argument("tet_loss: needs T >= 1");
  const std::size_t n_class = readout[0].size();
  if (target >= n_class) throw std::invalid_argument("tet_loss: class index out of range");

  TetLoss result;
  result.grad.assign(readout.size(), std::vector<double>(n_class, 0.0));
  const double inv_t = 1.0 / double(readout.size());
  for (std::size_t t = 0; t < readout.size(); ++t) {
    const auto& o = readout[t];
    double m = o[0];
    for (double v : o) m = std::max(m, v);
    double sum = 0.0;
    for (double v : o) sum += std::exp(v - m);
    result.loss += inv_t * (std::log(sum) - (o[target] - m));
    for (std::size_t k = 0; k < n_class; ++k)
      result.grad[t][k] =
          inv_t * (std::exp(o[k] - m) / sum - (k == target ? 1.0 : 0.0));
  }
  return result;
}

}  // namespace eslsnn

#endif  // ESLSNN_LIF_HPP
