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

#ifndef ESLSNN_OPTIM_HPP
#define ESLSNN_OPTIM_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "eslsnn/weights.hpp"

namespace eslsnn {

enum class OptimizerKind { kAdam, kSgdMomentum };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.9;  // SGD only
};

// Adam / SGD-with-momentum over a fixed set of weight blocks. The first
// moment is kept for every entry (also masked-out ones, when the caller
// feeds dense gradients) so that it can serve as the momentum growth signal.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(const OptimizerConfig& cfg, const std::vector<const WeightMatrix*>& blocks)
      : cfg_(cfg) {
    for (const auto* w : blocks) {
      m_.emplace_back(w->n_pre(), w->n_post());
      v_.emplace_back(w->n_pre(), w->n_post());
    }
  }

  std::size_t n_blocks() const { return m_.size(); }
  std::uint64_t step_count() const { return step_; }
  const OptimizerConfig& config() const { return cfg_; }

  // First-moment buffer of one block; |.| is the momentum growth signal.
  const GradMatrix& first_moment(std::size_t block) const { return m_[block]; }

  GradMatrix& mutable_first_moment(std::size_t block) { return m_[block]; }
  GradMatrix& mutable_second_moment(std::size_t block) { return v_[block]; }
  void set_step_count(std::uint64_t s) { step_ = s; }

  // One update over all blocks. Buffers must be index-aligned with the
  // blocks passed at construction.
  void step(const std::vector<WeightMatrix*>& weights,
            const std::vector<const GradMatrix*>& grads, double lr) {
    if (weights.size() != m_.size() || grads.size() != m_.size())
      throw std::invalid_argument("Optimizer::step: block count mismatch");
    ++step_;
    for (std::size_t b = 0; b < m_.size(); ++b) {
      auto& w = weights[b]->data();
      const auto& g = grads[b]->data();
      auto& m = m_[b].data();
      if (cfg_.kind == OptimizerKind::kSgdMomentum) {
        for (std::size_t p = 0; p < w.size(); ++p) {
          m[p] = cfg_.momentum * m[p] + g[p];
          w[p] -= lr * m[p];
        }
      } else {
        auto& v = v_[b].data();
        const double bc1 = 1.0 - std::pow(cfg_.beta1, double(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, double(step_));
        for (std::size_t p = 0; p < w.size(); ++p) {
          m[p] = cfg_.beta1 * m[p] + (1.0 - cfg_.beta1) * g[p];
          v[p] = cfg_.beta2 * v[p] + (1.0 - cfg_.beta2) * g[p] * g[p];
          w[p] -= lr * (m[p] / bc1) / (std::sqrt(v[p] / bc2) + cfg_.eps);
        }
      }
    }
  }

 private:
  OptimizerConfig cfg_;
  std::uint64_t step_ = 0;
  std::vector<GradMatrix> m_, v_;
};

// Scales the gradient so its L2 norm does not exceed max_norm.
inline void clip_grad_norm(GradMatrix& g, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (double x : g.data()) sq += x * x;
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double s = max_norm / norm;
    for (double& x : g.data()) x *= s;
  }
}

struct LrSchedule {
  enum class Kind { kExponential, kConstant };
  Kind kind = Kind::kExponential;
  double start = 1e-3;
  double end = 1e-4;

  // Per-epoch value: start * (end/start)^(epoch/total).
  double at(std::uint32_t epoch, std::uint32_t total_epochs) const {
    if (kind == Kind::kConstant) return start;
    const double frac = double(epoch) / double(std::max<std::uint32_t>(1, total_epochs));
    return start * std::pow(end / start, frac);
  }
};

}  // namespace eslsnn

#endif  // ESLSNN_OPTIM_HPP
