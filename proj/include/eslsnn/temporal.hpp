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

#ifndef ESLSNN_TEMPORAL_HPP
#define ESLSNN_TEMPORAL_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "eslsnn/mask.hpp"
#include "eslsnn/rng.hpp"
#include "eslsnn/weights.hpp"

namespace eslsnn {

// Single-spike temporal code. Spike times live in the z-domain, z = exp(t),
// so a spike at t = 0 is z = 1 and "never spikes" is +infinity.
using ZSpikeVector = std::vector<double>;

constexpr double kNoSpike = std::numeric_limits<double>::infinity();
// Non-firing outputs are replaced by this value inside the loss so that it
// stays finite. Corresponds to a spike at t = 10.
const double kZMax = std::exp(10.0);
// A causal prefix is accepted only if its weight sum exceeds the threshold
// (V_thr = 1) by more than this margin, keeping the denominator away from 0.
constexpr double kCausalEpsilon = 1e-9;

inline bool has_spike(double z) { return z != kNoSpike; }

// Feedforward layer of non-leaky integrate-and-fire neurons with
// exponential synaptic kernels. A missing mask means fully connected.
struct TemporalLayer {
  WeightMatrix weights;
  std::optional<SparseMask> mask;

  TemporalLayer(std::uint32_t n_pre, std::uint32_t n_post)
      : weights(n_pre, n_post) {}

  std::uint32_t n_pre() const { return weights.n_pre(); }
  std::uint32_t n_post() const { return weights.n_post(); }
};

// Per-output causal sets of one forward pass: for each output neuron, the
// presynaptic indices whose spikes determined its firing time (ascending in
// input spike time) and the weight sum over that set.
struct CausalSet {
  std::vector<std::uint32_t> offsets;  // n_post + 1 prefix offsets
  std::vector<std::uint32_t> members;  // concatenated presynaptic indices
  std::vector<double> sum_w;           // per output, 0 if it never fired

  std::span<const std::uint32_t> of(std::uint32_t j) const {
    return {members.data() + offsets[j], members.data() + offsets[j + 1]};
  }
};

// Forward result of one layer, kept around for the backward pass.
struct LayerForward {
  ZSpikeVector z_out;
  CausalSet causal;
  // All finite inputs sorted ascending by (z, index); shared by every output.
  std::vector<std::pair<double, std::uint32_t>> sorted_inputs;
};

// Computes first-spike times: for each output, connected finite inputs are
// scanned in spike order; the first prefix whose weight sum exceeds the
// threshold and whose candidate time precedes the next connected spike
// fires the neuron at z_j = sum(w z) / (sum(w) - 1). No prefix -> no spike.
inline void forward_layer(std::span<const double> z_in, const TemporalLayer& layer,
                          LayerForward& out) {
  const std::uint32_t n_pre = layer.n_pre();
  const std::uint32_t n_post = layer.n_post();
  if (z_in.size() != n_pre)
    throw std::invalid_argument("forward_layer: input size mismatch");

  out.sorted_inputs.clear();
  for (std::uint32_t i = 0; i < n_pre; ++i)
    if (has_spike(z_in[i])) out.sorted_inputs.emplace_back(z_in[i], i);
  std::sort(out.sorted_inputs.begin(), out.sorted_inputs.end());

  out.z_out.assign(n_post, kNoSpike);
  out.causal.offsets.assign(n_post + 1, 0);
  out.causal.members.clear();
  out.causal.sum_w.assign(n_post, 0.0);

  const std::uint8_t* bits = layer.mask ? layer.mask->bitmap().data() : nullptr;
  std::vector<std::pair<double, std::uint32_t>> connected;
  connected.reserve(out.sorted_inputs.size());

  for (std::uint32_t j = 0; j < n_post; ++j) {
    connected.clear();
    for (const auto& zi : out.sorted_inputs)
      if (!bits || bits[std::size_t(zi.second) * n_post + j])
        connected.push_back(zi);

    const double* wrow = layer.weights.row(j);
    double sw = 0.0, swz = 0.0;
    std::size_t accepted = 0;  // causal set size once fired
    for (std::size_t n = 0; n < connected.size(); ++n) {
      const auto [z_i, i] = connected[n];
      sw += wrow[i];
      swz += wrow[i] * z_i;
      if (sw - 1.0 > kCausalEpsilon) {
        const double candidate = swz / (sw - 1.0);
        const double z_next = n + 1 < connected.size() ? connected[n + 1].first : kNoSpike;
        if (candidate < z_next) {
          out.z_out[j] = candidate;
          out.causal.sum_w[j] = sw;
          accepted = n + 1;
          break;
        }
      }
    }
    for (std::size_t n = 0; n < accepted; ++n)
      out.causal.members.push_back(connected[n].second);
    out.causal.offsets[j + 1] = std::uint32_t(out.causal.members.size());
  }
}

// Exact gradients of the z-domain spike map, chained with grad_z_out:
//   dz_j/dw_ij = (z_i - z_j) / (S_w - 1)    for i in the causal set,
//   dz_j/dz_i  = w_ij / (S_w - 1)           for i in the causal set,
// and zero otherwise. Non-firing outputs contribute nothing; gradients to
// masked-out weights are identically zero (causal members are mask-active).
inline void backward_layer(std::span<const double> grad_z_out,
                           std::span<const double> z_in, const LayerForward& fwd,
                           const TemporalLayer& layer, GradMatrix& grad_weights,
                           std::vector<double>* grad_z_in = nullptr) {
  const std::uint32_t n_post = layer.n_post();
  if (grad_z_out.size() != n_post)
    throw std::invalid_argument("backward_layer: gradient size mismatch");
  if (grad_z_in) grad_z_in->assign(layer.n_pre(), 0.0);

  for (std::uint32_t j = 0; j < n_post; ++j) {
    const double gz = grad_z_out[j];
    if (gz == 0.0 || !has_spike(fwd.z_out[j])) continue;
    const double z_j = fwd.z_out[j];
    const double inv_denom = 1.0 / (fwd.causal.sum_w[j] - 1.0);
    const double* wrow = layer.weights.row(j);
    double* grow = grad_weights.row(j);
    for (std::uint32_t i : fwd.causal.of(j)) {
      grow[i] += gz * (z_in[i] - z_j) * inv_denom;
      if (grad_z_in) (*grad_z_in)[i] += gz * wrow[i] * inv_denom;
    }
  }
}

// Gradient of z_j with respect to every potential connection, including
// currently inactive ones: any finite input spiking strictly before z_j
// would join the causal set with an infinitesimal weight, so it carries the
// same (z_i - z_j)/(S_w - 1) sensitivity. Used as the growth signal for the
// gradient/momentum rules; accumulates into a dense buffer.
inline void dense_weight_gradients(std::span<const double> grad_z_out,
                                   const LayerForward& fwd,
                                   GradMatrix& grad_dense) {
  const std::size_t n_post = fwd.z_out.size();
  for (std::uint32_t j = 0; j < n_post; ++j) {
    const double gz = grad_z_out[j];
    if (gz == 0.0 || !has_spike(fwd.z_out[j])) continue;
    const double z_j = fwd.z_out[j];
    const double coeff = gz / (fwd.causal.sum_w[j] - 1.0);
    double* grow = grad_dense.row(j);
    for (const auto& [z_i, i] : fwd.sorted_inputs) {
      if (z_i >= z_j) break;
      grow[i] += coeff * (z_i - z_j);
    }
  }
}

struct ZLoss {
  double loss = 0.0;
  std::vector<double> grad;  // dL/dz per output
};

// Cross-entropy in the z-domain: L = -ln( exp(-z[g]) / sum_k exp(-z[k]) ),
// computed with a shifted softmax. Non-firing entries enter as kZMax.
inline ZLoss z_loss(std::span<const double> z_out, std::size_t target) {
  if (target >= z_out.size())
    throw std::invalid_argument("z_loss: class index out of range");
  ZLoss result;
  result.grad.assign(z_out.size(), 0.0);

  double z_min = kZMax;
  for (double z : z_out) z_min = std::min(z_min, has_spike(z) ? z : kZMax);
  double sum = 0.0;
  for (double z : z_out) sum += std::exp(-((has_spike(z) ? z : kZMax) - z_min));

  const double z_g = has_spike(z_out[target]) ? z_out[target] : kZMax;
  result.loss = z_g - z_min + std::log(sum);
  for (std::size_t k = 0; k < z_out.size(); ++k) {
    const double z_k = has_spike(z_out[k]) ? z_out[k] : kZMax;
    result.grad[k] = (k == target ? 1.0 : 0.0) - std::exp(-(z_k - z_min)) / sum;
  }
  return result;
}

// Initializes active weights uniformly on [0, scale / fan_in] with the
// fan-in counted over each neuron's own active connections. The positive
// mean keeps enough initial drive for threshold crossings.
inline void init_temporal_weights(TemporalLayer& layer, std::uint64_t seed,
                                  double scale) {
  Rng rng(seed);
  for (std::uint32_t j = 0; j < layer.n_post(); ++j) {
    if (layer.mask) {
      const auto& pre = layer.mask->pre_of(j);
      const double hi = scale / double(std::max<std::size_t>(1, pre.size()));
      for (std::uint32_t i : pre) layer.weights.at(i, j) = rng.uniform(0.0, hi);
    } else {
      const double hi = scale / double(layer.n_pre());
      for (std::uint32_t i = 0; i < layer.n_pre(); ++i)
        layer.weights.at(i, j) = rng.uniform(0.0, hi);
    }
  }
}

// Hinge penalty coeff * sum_j max(0, 1 - S_w(j)) over active incoming
// weights of each neuron; nudges silent neurons back above threshold.
// Accumulates the (sub)gradient and returns the penalty value.
inline double weight_sum_regularizer(const TemporalLayer& layer, double coeff,
                                     GradMatrix& grad_weights) {
  if (coeff == 0.0) return 0.0;
  double penalty = 0.0;
  for (std::uint32_t j = 0; j < layer.n_post(); ++j) {
    const double* wrow = layer.weights.row(j);
    double sw = 0.0;
    if (layer.mask) {
      for (std::uint32_t i : layer.mask->pre_of(j)) sw += wrow[i];
    } else {
      for (std::uint32_t i = 0; i < layer.n_pre(); ++i) sw += wrow[i];
    }
    if (sw < 1.0) {
      penalty += coeff * (1.0 - sw);
      double* grow = grad_weights.row(j);
      if (layer.mask) {
        for (std::uint32_t i : layer.mask->pre_of(j)) grow[i] -= coeff;
      } else {
        for (std::uint32_t i = 0; i < layer.n_pre(); ++i) grow[i] -= coeff;
      }
    }
  }
  return penalty;
}

}  // namespace eslsnn

#endif  // ESLSNN_TEMPORAL_HPP
