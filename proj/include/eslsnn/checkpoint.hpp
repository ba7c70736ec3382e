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

#ifndef ESLSNN_CHECKPOINT_HPP
#define ESLSNN_CHECKPOINT_HPP

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "eslsnn/io.hpp"
#include "eslsnn/mask.hpp"
#include "eslsnn/weights.hpp"

namespace eslsnn {

// Everything needed to restore and evaluate a trained model. Weights are
// serialized per layer in (n_pre x n_post) row-major order; masks as the
// layer id, shape, and the sorted (i, j) list.
struct LayerState {
  std::string id;
  std::uint32_t n_pre = 0, n_post = 0;
  std::vector<double> weights;  // row-major, n_pre x n_post
  bool has_mask = false;
  std::vector<Edge> mask_edges;
  std::vector<std::uint8_t> ever_active;
  std::vector<double> opt_m, opt_v;  // optimizer moments, row-major
};

struct Checkpoint {
  std::uint32_t version = 1;
  std::string config_text;
  std::uint64_t config_hash = 0;
  std::uint32_t epoch = 0;  // epoch whose validation produced this model
  double best_val_accuracy = 0.0;
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
  std::uint64_t optimizer_step = 0;
  std::vector<LayerState> layers;
};

inline std::vector<double> to_row_major(const WeightMatrix& w) {
  std::vector<double> out(w.size());
  for (std::uint32_t i = 0; i < w.n_pre(); ++i)
    for (std::uint32_t j = 0; j < w.n_post(); ++j)
      out[std::size_t(i) * w.n_post() + j] = w.at(i, j);
  return out;
}

inline void from_row_major(const std::vector<double>& in, WeightMatrix& w) {
  if (in.size() != w.size())
    throw std::runtime_error("checkpoint: weight buffer size mismatch");
  for (std::uint32_t i = 0; i < w.n_pre(); ++i)
    for (std::uint32_t j = 0; j < w.n_post(); ++j)
      w.at(i, j) = in[std::size_t(i) * w.n_post() + j];
}

inline std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  io::SectionList sections;
  {
    io::Writer w;
    w.u32(ckpt.version);
    w.u64(ckpt.config_hash);
    w.u32(ckpt.epoch);
    w.f64(ckpt.best_val_accuracy);
    w.u64(ckpt.seed);
    w.u64(ckpt.iteration);
    w.u64(ckpt.optimizer_step);
    w.u32(std::uint32_t(ckpt.layers.size()));
    sections.emplace_back("meta", w.data());
  }
  {
    io::Writer w;
    w.bytes(ckpt.config_text.data(), ckpt.config_text.size());
    sections.emplace_back("config", w.data());
  }
  for (std::size_t l = 0; l < ckpt.layers.size(); ++l) {
    const auto& ls = ckpt.layers[l];
    const std::string prefix = "layer" + std::to_string(l) + "/";
    {
      io::Writer w;
      w.str(ls.id);
      w.u32(ls.n_pre);
      w.u32(ls.n_post);
      w.doubles(ls.weights);
      sections.emplace_back(prefix + "weights", w.data());
    }
    if (ls.has_mask) {
      io::Writer w;
      w.str(ls.id);
      w.u32(ls.n_pre);
      w.u32(ls.n_post);
      w.u64(ls.mask_edges.size());
      for (const auto& [i, j] : ls.mask_edges) {
        w.u32(i);
        w.u32(j);
      }
      sections.emplace_back(prefix + "mask", w.data());
      io::Writer we;
      we.u64(ls.ever_active.size());
      we.bytes(ls.ever_active.data(), ls.ever_active.size());
      sections.emplace_back(prefix + "ever_active", we.data());
    }
    if (!ls.opt_m.empty()) {
      io::Writer w;
      w.doubles(ls.opt_m);
      w.doubles(ls.opt_v);
      sections.emplace_back(prefix + "optimizer", w.data());
    }
  }

  return io::pack_container(sections);
}

inline Checkpoint deserialize_checkpoint(const std::vector<std::uint8_t>& bytes) {
  io::SectionMap sections = io::unpack_container(bytes);

  auto get = [&](const std::string& name) -> const std::vector<std::uint8_t>& {
    auto it = sections.find(name);
    if (it == sections.end())
      throw std::runtime_error("checkpoint: missing section " + name);
    return it->second;
  };

  Checkpoint ckpt;
  std::uint32_t n_layers = 0;
  {
    const auto& meta = get("meta");
    io::Reader r(meta.data(), meta.size());
    ckpt.version = r.u32();
    if (ckpt.version != 1)
      throw std::runtime_error("checkpoint: unsupported version");
    ckpt.config_hash = r.u64();
    ckpt.epoch = r.u32();
    ckpt.best_val_accuracy = r.f64();
    ckpt.seed = r.u64();
    ckpt.iteration = r.u64();
    ckpt.optimizer_step = r.u64();
    n_layers = r.u32();
  }
  {
    const auto& cfg = get("config");
    ckpt.config_text.assign(cfg.begin(), cfg.end());
  }
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l) + "/";
    LayerState ls;
    {
      const auto& sec = get(prefix + "weights");
      io::Reader r(sec.data(), sec.size());
      ls.id = r.str();
      ls.n_pre = r.u32();
      ls.n_post = r.u32();
      ls.weights = r.doubles();
    }
    if (auto it = sections.find(prefix + "mask"); it != sections.end()) {
      ls.has_mask = true;
      io::Reader r(it->second.data(), it->second.size());
      const std::string id = r.str();
      if (id != ls.id) throw std::runtime_error("checkpoint: mask/layer id mismatch");
      if (r.u32() != ls.n_pre || r.u32() != ls.n_post)
        throw std::runtime_error("checkpoint: mask shape mismatch");
      const std::uint64_t count = r.u64();
      ls.mask_edges.reserve(count);
      for (std::uint64_t e = 0; e < count; ++e) {
        const std::uint32_t i = r.u32();
        const std::uint32_t j = r.u32();
        ls.mask_edges.emplace_back(i, j);
      }
      const auto& ever = get(prefix + "ever_active");
      io::Reader re(ever.data(), ever.size());
      const std::uint64_t n = re.u64();
      ls.ever_active = re.raw(n);
    }
    if (auto it = sections.find(prefix + "optimizer"); it != sections.end()) {
      io::Reader r(it->second.data(), it->second.size());
      ls.opt_m = r.doubles();
      ls.opt_v = r.doubles();
    }
    ckpt.layers.push_back(std::move(ls));
  }
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  io::write_file(path, serialize_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  return deserialize_checkpoint(io::read_binary_file(path));
}

}  // namespace eslsnn

#endif  // ESLSNN_CHECKPOINT_HPP
