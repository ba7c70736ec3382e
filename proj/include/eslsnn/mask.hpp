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

#ifndef ESLSNN_MASK_HPP
#define ESLSNN_MASK_HPP

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "eslsnn/rng.hpp"

namespace eslsnn {

// One connection (presynaptic index, postsynaptic index).
using Edge = std::pair<std::uint32_t, std::uint32_t>;

// Binary connectivity of one layer: the set of active (i, j) pairs over an
// n_pre x n_post grid. Keeps a sorted edge list (the canonical, serialized
// form), a dense bitmap for O(1) membership tests, and a per-output
// adjacency index for the forward passes.
class SparseMask {
 public:
  SparseMask(std::uint32_t n_pre, std::uint32_t n_post)
      : n_pre_(n_pre), n_post_(n_post), bitmap_(std::size_t(n_pre) * n_post, 0) {
    if (n_pre == 0 || n_post == 0)
      throw std::invalid_argument("SparseMask: n_pre and n_post must be >= 1");
  }

  static SparseMask full(std::uint32_t n_pre, std::uint32_t n_post) {
    SparseMask m(n_pre, n_post);
    std::vector<Edge> all;
    all.reserve(std::size_t(n_pre) * n_post);
    for (std::uint32_t i = 0; i < n_pre; ++i)
      for (std::uint32_t j = 0; j < n_post; ++j) all.emplace_back(i, j);
    m.assign(std::move(all));
    return m;
  }

  std::uint32_t n_pre() const { return n_pre_; }
  std::uint32_t n_post() const { return n_post_; }
  std::size_t size() const { return n_pre_ * std::size_t(n_post_); }
  std::size_t cardinality() const { return active_.size(); }
  double density() const { return double(active_.size()) / double(size()); }

  bool is_active(std::uint32_t i, std::uint32_t j) const {
    return bitmap_[std::size_t(i) * n_post_ + j] != 0;
  }

  // Sorted lexicographically by (i, j).
  const std::vector<Edge>& active() const { return active_; }

  const std::vector<std::uint8_t>& bitmap() const { return bitmap_; }

  // Replaces the whole active set. Rejects out-of-range and duplicate edges.
  void assign(std::vector<Edge> edges) {
    std::sort(edges.begin(), edges.end());
    for (std::size_t n = 0; n < edges.size(); ++n) {
      const auto [i, j] = edges[n];
      if (i >= n_pre_ || j >= n_post_)
        throw std::invalid_argument("SparseMask: edge out of range");
      if (n > 0 && edges[n] == edges[n - 1])
        throw std::invalid_argument("SparseMask: duplicate edge");
    }
    std::fill(bitmap_.begin(), bitmap_.end(), 0);
    for (const auto& [i, j] : edges) bitmap_[std::size_t(i) * n_post_ + j] = 1;
    active_ = std::move(edges);
    adjacency_dirty_ = true;
  }

  // Removes edges that must currently be active.
  void remove(const std::vector<Edge>& edges) {
    for (const auto& [i, j] : edges) {
      auto& bit = bitmap_[std::size_t(i) * n_post_ + j];
      if (!bit) throw std::invalid_argument("SparseMask::remove: edge not active");
      bit = 0;
    }
    std::erase_if(active_, [&](const Edge& e) { return !is_active(e.first, e.second); });
    adjacency_dirty_ = true;
  }

  // Adds edges that must currently be inactive.
  void add(const std::vector<Edge>& edges) {
    for (const auto& [i, j] : edges) {
      if (i >= n_pre_ || j >= n_post_)
        throw std::invalid_argument("SparseMask::add: edge out of range");
      auto& bit = bitmap_[std::size_t(i) * n_post_ + j];
      if (bit) throw std::invalid_argument("SparseMask::add: edge already active");
      bit = 1;
    }
    active_.insert(active_.end(), edges.begin(), edges.end());
    std::sort(active_.begin(), active_.end());
    adjacency_dirty_ = true;
  }

  // Presynaptic indices connected to output j, ascending.
  const std::vector<std::uint32_t>& pre_of(std::uint32_t j) const {
    if (adjacency_dirty_) rebuild_adjacency();
    return adjacency_[j];
  }

  bool operator==(const SparseMask& o) const {
    return n_pre_ == o.n_pre_ && n_post_ == o.n_post_ && active_ == o.active_;
  }

 private:
  void rebuild_adjacency() const {
    adjacency_.assign(n_post_, {});
    for (const auto& [i, j] : active_) adjacency_[j].push_back(i);
    adjacency_dirty_ = false;
  }

  std::uint32_t n_pre_, n_post_;
  std::vector<Edge> active_;
  std::vector<std::uint8_t> bitmap_;
  mutable std::vector<std::vector<std::uint32_t>> adjacency_;
  mutable bool adjacency_dirty_ = true;
};

struct ErdosRenyiConfig {
  double epsilon = 10.0;  // sparsity control factor, > 0

  // Connection probability for an n_pre x n_post layer, clamped to <= 1.
  double probability(std::uint32_t n_pre, std::uint32_t n_post) const {
    const double p = epsilon * (double(n_pre) + double(n_post)) /
                     (double(n_pre) * double(n_post));
    return p < 1.0 ? p : 1.0;
  }
};

// Erdos-Renyi topology: every entry of the n_pre x n_post grid is active
// independently with probability eps*(n_pre+n_post)/(n_pre*n_post).
inline SparseMask er_init(std::uint32_t n_pre, std::uint32_t n_post,
                          const ErdosRenyiConfig& cfg, std::uint64_t seed) {
  if (n_pre == 0 || n_post == 0)
    throw std::invalid_argument("er_init: n_pre and n_post must be >= 1");
  if (!(cfg.epsilon > 0.0))
    throw std::invalid_argument("er_init: epsilon must be > 0");
  const double p = cfg.probability(n_pre, n_post);
  SparseMask mask(n_pre, n_post);
  Rng rng(seed);
  std::vector<Edge> edges;
  edges.reserve(std::size_t(p * double(mask.size()) * 1.05) + 16);
  for (std::uint32_t i = 0; i < n_pre; ++i)
    for (std::uint32_t j = 0; j < n_post; ++j)
      if (rng.uniform() < p) edges.emplace_back(i, j);
  mask.assign(std::move(edges));
  return mask;
}

// Epsilon that yields a target density for a given layer shape (the inverse
// of ErdosRenyiConfig::probability, before clamping).
inline double epsilon_for_density(std::uint32_t n_pre, std::uint32_t n_post,
                                  double density) {
  return density * (double(n_pre) * double(n_post)) /
         (double(n_pre) + double(n_post));
}

}  // namespace eslsnn

#endif  // ESLSNN_MASK_HPP
