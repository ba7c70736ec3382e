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

#ifndef ESLSNN_EVOLUTION_HPP
#define ESLSNN_EVOLUTION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "eslsnn/mask.hpp"
#include "eslsnn/rng.hpp"
#include "eslsnn/weights.hpp"

namespace eslsnn {

enum class PruneRule { kMagnitude, kSetSigned };
enum class GrowthRule { kRandomUnfired, kGradient, kMomentum };

// Governs the periodic prune/regrow step: every t_iter iterations (up to and
// including t_end) a cosine-decayed fraction of the active connections is
// replaced.
struct EvolutionSchedule {
  double alpha = 0.3;           // base rewire fraction, in (0, 1)
  std::uint64_t t_iter = 1000;  // iterations between rewires
  std::uint64_t t_end = 1;      // last rewiring iteration
  PruneRule prune_rule = PruneRule::kSetSigned;
  GrowthRule growth_rule = GrowthRule::kMomentum;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw std::invalid_argument("EvolutionSchedule: alpha must be in (0, 1)");
    if (t_iter < 1) throw std::invalid_argument("EvolutionSchedule: t_iter must be >= 1");
    if (t_end < t_iter)
      throw std::invalid_argument("EvolutionSchedule: t_end must be >= t_iter");
  }
};

struct RewireEvent {
  std::uint64_t iteration = 0;
  std::string layer_id;
  std::size_t n_pruned = 0;
  std::size_t n_grown = 0;
  double density_after = 0.0;
};

// Auxiliary signals consumed by the growth rules. Buffers are dense over the
// full n_pre x n_post grid; magnitudes are taken internally. ever_active is
// indexed i * n_post + j and marks entries that were active at any point
// since initialization.
struct GrowthSignals {
  const GradMatrix* gradient = nullptr;
  const GradMatrix* momentum = nullptr;
  const std::vector<std::uint8_t>* ever_active = nullptr;
};

// Cosine-annealed rewire fraction: (alpha/2) * (1 + cos(t*pi/t_end)).
// Equals alpha at t = 0 and 0 at t = t_end, non-increasing in between.
inline double cosine_decay(std::uint64_t t, double alpha, std::uint64_t t_end) {
  if (t_end == 0) throw std::invalid_argument("cosine_decay: t_end must be > 0");
  if (t > t_end) throw std::invalid_argument("cosine_decay: t must be <= t_end");
  return 0.5 * alpha *
         (1.0 + std::cos(double(t) * 3.14159265358979323846 / double(t_end)));
}

namespace detail {

struct WeightedEdge {
  double w;
  Edge e;
};

inline void sort_by_magnitude(std::vector<WeightedEdge>& v) {
  std::sort(v.begin(), v.end(), [](const WeightedEdge& a, const WeightedEdge& b) {
    const double ma = std::fabs(a.w), mb = std::fabs(b.w);
    return ma != mb ? ma < mb : a.e < b.e;
  });
}

}  // namespace detail

// Selects k active connections to remove.
//   Magnitude: the k smallest |w|.
//   SetSigned: ceil(k/2) negative weights closest to 0 from below and
//   floor(k/2) smallest non-negative weights; when one sign class runs out
//   the remainder is taken in pure magnitude order.
// Ties always break lexicographically on (i, j).
inline std::vector<Edge> prune(const SparseMask& mask, const WeightMatrix& weights,
                               std::size_t k, PruneRule rule) {
  weights.check_shape(mask);
  if (k > mask.cardinality())
    throw std::invalid_argument("prune: k exceeds the number of active connections");
  if (k == 0) return {};

  std::vector<detail::WeightedEdge> pool;
  pool.reserve(mask.cardinality());
  for (const auto& e : mask.active())
    pool.push_back({weights.at(e.first, e.second), e});

  std::vector<Edge> chosen;
  chosen.reserve(k);
  if (rule == PruneRule::kMagnitude) {
    detail::sort_by_magnitude(pool);
    for (std::size_t n = 0; n < k; ++n) chosen.push_back(pool[n].e);
  } else {
    std::vector<detail::WeightedEdge> neg, pos;
    for (const auto& we : pool) (we.w < 0.0 ? neg : pos).push_back(we);
    // Negatives closest to 0 first (largest value), positives smallest first.
    std::sort(neg.begin(), neg.end(), [](const auto& a, const auto& b) {
      return a.w != b.w ? a.w > b.w : a.e < b.e;
    });
    std::sort(pos.begin(), pos.end(), [](const auto& a, const auto& b) {
      return a.w != b.w ? a.w < b.w : a.e < b.e;
    });
    const std::size_t want_neg = (k + 1) / 2;
    const std::size_t take_neg = std::min(want_neg, neg.size());
    const std::size_t take_pos = std::min(k - take_neg, pos.size());
    for (std::size_t n = 0; n < take_neg; ++n) chosen.push_back(neg[n].e);
    for (std::size_t n = 0; n < take_pos; ++n) chosen.push_back(pos[n].e);
    if (chosen.size() < k) {
      // One class exhausted: fill from the leftovers in magnitude order.
      std::vector<detail::WeightedEdge> rest;
      for (std::size_t n = take_neg; n < neg.size(); ++n) rest.push_back(neg[n]);
      for (std::size_t n = take_pos; n < pos.size(); ++n) rest.push_back(pos[n]);
      detail::sort_by_magnitude(rest);
      for (std::size_t n = 0; chosen.size() < k; ++n) chosen.push_back(rest[n].e);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// Selects k currently-inactive connections to activate.
//   RandomUnfired: uniform, with never-yet-active entries exhausted first.
//   Gradient / Momentum: the k largest |signal| over inactive entries.
// The caller is responsible for zero-initializing the grown weights.
inline std::vector<Edge> grow(const SparseMask& mask, std::size_t k, GrowthRule rule,
                              const GrowthSignals& aux, std::uint64_t seed) {
  std::vector<Edge> inactive;
  inactive.reserve(mask.size() - mask.cardinality());
  for (std::uint32_t i = 0; i < mask.n_pre(); ++i)
    for (std::uint32_t j = 0; j < mask.n_post(); ++j)
      if (!mask.is_active(i, j)) inactive.emplace_back(i, j);
  if (k > inactive.size())
    throw std::invalid_argument("grow: k exceeds the number of inactive connections");
  if (k == 0) return {};

  std::vector<Edge> chosen;
  chosen.reserve(k);
  switch (rule) {
    case GrowthRule::kRandomUnfired: {
      if (aux.ever_active == nullptr)
        throw std::invalid_argument("grow: RandomUnfired requires the ever_active bitmap");
      const auto& fired = *aux.ever_active;
      std::vector<Edge> fresh, used;
      for (const auto& e : inactive) {
        const std::size_t idx = std::size_t(e.first) * mask.n_post() + e.second;
        (fired[idx] ? used : fresh).push_back(e);
      }
      Rng rng(seed);
      auto sample = [&](std::vector<Edge>& pool, std::size_t n) {
        for (std::size_t m = 0; m < n; ++m) {
          const std::size_t pick = m + rng.uniform_below(pool.size() - m);
          std::swap(pool[m], pool[pick]);
          chosen.push_back(pool[m]);
        }
      };
      const std::size_t from_fresh = std::min(k, fresh.size());
      sample(fresh, from_fresh);
      sample(used, k - from_fresh);
      break;
    }
    case GrowthRule::kGradient:
    case GrowthRule::kMomentum: {
      const GradMatrix* signal =
          rule == GrowthRule::kGradient ? aux.gradient : aux.momentum;
      if (signal == nullptr)
        throw std::invalid_argument("grow: missing gradient/momentum signal for rule");
      std::partial_sort(inactive.begin(), inactive.begin() + k, inactive.end(),
                        [&](const Edge& a, const Edge& b) {
                          const double ma = std::fabs(signal->at(a.first, a.second));
                          const double mb = std::fabs(signal->at(b.first, b.second));
                          return ma != mb ? ma > mb : a < b;
                        });
      chosen.assign(inactive.begin(), inactive.begin() + k);
      break;
    }
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// One full evolutionary step: k = round(cosine_decay * cardinality)
// connections are pruned and the same number regrown, leaving the
// cardinality unchanged. Pruned and grown weights are set to exactly 0.
// Growth candidates are drawn from the pre-step inactive set, so the grown
// and pre-step active sets are disjoint. If ever_active is given it is
// updated with the grown entries.
inline RewireEvent rewire_step(SparseMask& mask, WeightMatrix& weights,
                               const EvolutionSchedule& schedule,
                               std::uint64_t iteration, const GrowthSignals& aux,
                               std::uint64_t seed, std::string layer_id = {},
                               std::vector<std::uint8_t>* ever_active = nullptr) {
  schedule.validate();
  weights.check_shape(mask);
  if (iteration % schedule.t_iter != 0)
    throw std::invalid_argument("rewire_step: iteration not a multiple of t_iter");
  if (iteration > schedule.t_end)
    throw std::invalid_argument("rewire_step: iteration past t_end");

  const double fraction = cosine_decay(iteration, schedule.alpha, schedule.t_end);
  const auto k = std::size_t(std::llround(fraction * double(mask.cardinality())));

  RewireEvent event;
  event.iteration = iteration;
  event.layer_id = std::move(layer_id);
  if (k > 0) {
    const std::vector<Edge> pruned = prune(mask, weights, k, schedule.prune_rule);
    const std::vector<Edge> grown = grow(mask, k, schedule.growth_rule, aux, seed);
    mask.remove(pruned);
    for (const auto& [i, j] : pruned) weights.at(i, j) = 0.0;
    mask.add(grown);
    for (const auto& [i, j] : grown) {
      weights.at(i, j) = 0.0;
      if (ever_active)
        (*ever_active)[std::size_t(i) * mask.n_post() + j] = 1;
    }
    event.n_pruned = pruned.size();
    event.n_grown = grown.size();
  }
  event.density_after = mask.density();
  return event;
}

}  // namespace eslsnn

#endif  // ESLSNN_EVOLUTION_HPP
