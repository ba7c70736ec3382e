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

#ifndef ESLSNN_WEIGHTS_HPP
#define ESLSNN_WEIGHTS_HPP

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "eslsnn/mask.hpp"

namespace eslsnn {

// Dense weight storage for an n_pre x n_post connection block. Stored
// output-major (all weights into output j are contiguous) because every hot
// loop in the engine walks the fan-in of one output neuron. Indexing is
// always through at(i, j) with i = presynaptic, j = postsynaptic.
class WeightMatrix {
 public:
  WeightMatrix() : n_pre_(0), n_post_(0) {}
  WeightMatrix(std::uint32_t n_pre, std::uint32_t n_post)
      : n_pre_(n_pre), n_post_(n_post), w_(std::size_t(n_pre) * n_post, 0.0) {}

  std::uint32_t n_pre() const { return n_pre_; }
  std::uint32_t n_post() const { return n_post_; }
  std::size_t size() const { return w_.size(); }

  double& at(std::uint32_t i, std::uint32_t j) { return w_[std::size_t(j) * n_pre_ + i]; }
  double at(std::uint32_t i, std::uint32_t j) const { return w_[std::size_t(j) * n_pre_ + i]; }

  // Contiguous fan-in row of output j.
  double* row(std::uint32_t j) { return w_.data() + std::size_t(j) * n_pre_; }
  const double* row(std::uint32_t j) const { return w_.data() + std::size_t(j) * n_pre_; }

  std::vector<double>& data() { return w_; }
  const std::vector<double>& data() const { return w_; }

  // W := M (element-wise) W. Inactive entries are forced to exactly 0.
  void apply_mask(const SparseMask& mask) {
    check_shape(mask);
    const auto& bits = mask.bitmap();
    for (std::uint32_t i = 0; i < n_pre_; ++i)
      for (std::uint32_t j = 0; j < n_post_; ++j)
        if (!bits[std::size_t(i) * n_post_ + j]) at(i, j) = 0.0;
  }

  void check_shape(const SparseMask& mask) const {
    if (mask.n_pre() != n_pre_ || mask.n_post() != n_post_)
      throw std::invalid_argument("WeightMatrix: mask shape mismatch");
  }

 private:
  std::uint32_t n_pre_, n_post_;
  std::vector<double> w_;
};

// Gradient-shaped buffer aliased to a WeightMatrix layout.
class GradMatrix {
 public:
  GradMatrix() : n_pre_(0), n_post_(0) {}
  GradMatrix(std::uint32_t n_pre, std::uint32_t n_post)
      : n_pre_(n_pre), n_post_(n_post), g_(std::size_t(n_pre) * n_post, 0.0) {}

  std::uint32_t n_pre() const { return n_pre_; }
  std::uint32_t n_post() const { return n_post_; }

  double& at(std::uint32_t i, std::uint32_t j) { return g_[std::size_t(j) * n_pre_ + i]; }
  double at(std::uint32_t i, std::uint32_t j) const { return g_[std::size_t(j) * n_pre_ + i]; }
  double* row(std::uint32_t j) { return g_.data() + std::size_t(j) * n_pre_; }

  std::vector<double>& data() { return g_; }
  const std::vector<double>& data() const { return g_; }

  void zero() { std::fill(g_.begin(), g_.end(), 0.0); }

 private:
  std::uint32_t n_pre_, n_post_;
  std::vector<double> g_;
};

}  // namespace eslsnn

#endif  // ESLSNN_WEIGHTS_HPP
