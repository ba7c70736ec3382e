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

#ifndef ESLSNN_ENERGY_HPP
#define ESLSNN_ENERGY_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "eslsnn/checkpoint.hpp"
#include "eslsnn/config.hpp"

namespace eslsnn {

// Per-synaptic-operation energy on the two reference platforms. The
// defaults are the energy/op ratios of a 635,200-connection network
// dissipating 1.13e-5 J (GPU) and 7.95e-6 J (neuromorphic) per inference.
struct EnergyModel {
  double joules_per_op_gpu = 1.78e-11;
  double joules_per_op_neuromorphic = 1.25e-11;

  void validate() const {
    if (!(joules_per_op_gpu > 0.0) || !(joules_per_op_neuromorphic > 0.0))
      throw std::invalid_argument("EnergyModel: energies must be > 0");
  }
};

struct LayerOps {
  std::string id;
  std::size_t connections = 0;       // active synaptic connections
  std::size_t ops_per_timestep = 0;  // connections x spatial reuse
};

struct OpCounts {
  std::vector<LayerOps> per_layer;
  std::size_t total_connections = 0;
  std::size_t total_ops_per_timestep = 0;
};

// Counts active connections per layer: masked layers contribute their mask
// cardinality, dense layers every entry. Convolutional kernels additionally
// report ops per inference timestep (active kernel elements times output
// positions). Depends on masks only, never on weight values.
inline OpCounts count_ops(const Checkpoint& ckpt) {
  const TrainingConfig cfg = parse_config(ckpt.config_text);
  OpCounts out;
  for (const auto& ls : ckpt.layers) {
    LayerOps ops;
    ops.id = ls.id;
    ops.connections =
        ls.has_mask ? ls.mask_edges.size() : std::size_t(ls.n_pre) * ls.n_post;
    std::size_t positions = 1;
    if (cfg.model == ModelPreset::kTinyConv) {
      if (ls.id == "conv1") positions = std::size_t(cfg.in_h) * cfg.in_w;
      if (ls.id == "conv2") positions = std::size_t(cfg.in_h / 2) * (cfg.in_w / 2);
    }
    ops.ops_per_timestep = ops.connections * positions;
    out.total_connections += ops.connections;
    out.total_ops_per_timestep += ops.ops_per_timestep;
    out.per_layer.push_back(std::move(ops));
  }
  return out;
}

// Linear energy estimate: ops x joules/op for each platform. Returns
// (joules_gpu, joules_neuromorphic).
inline std::pair<double, double> estimate_energy(std::size_t op_count,
                                                 const EnergyModel& model = {}) {
  model.validate();
  return {double(op_count) * model.joules_per_op_gpu,
          double(op_count) * model.joules_per_op_neuromorphic};
}

}  // namespace eslsnn

#endif  // ESLSNN_ENERGY_HPP
