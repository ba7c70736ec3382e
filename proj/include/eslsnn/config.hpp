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

#ifndef ESLSNN_CONFIG_HPP
#define ESLSNN_CONFIG_HPP

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "eslsnn/evolution.hpp"
#include "eslsnn/optim.hpp"

namespace eslsnn {

enum class ModelPreset { kTemporalMlp, kLifMlp, kTinyConv };
enum class MaskEnforce { kEveryStep, kRewireOnly };
enum class EncodeMode { kAnalog, kBernoulli };

// Full description of one training run. Serializes to a flat key=value
// text file ('#' starts a comment); parsing rejects unknown keys and
// round-trips exactly: parse(serialize(c)) == c.
struct TrainingConfig {
  ModelPreset model = ModelPreset::kTemporalMlp;
  std::uint32_t hidden = 800;
  std::uint32_t epochs = 20;
  std::uint32_t batch_size = 100;

  OptimizerKind optimizer = OptimizerKind::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double sgd_momentum = 0.9;

  LrSchedule::Kind lr_schedule = LrSchedule::Kind::kExponential;
  double lr_start = 1e-3;
  double lr_end = 1e-4;

  double alpha = 0.3;
  std::uint64_t t_iter = 1000;
  std::uint64_t t_end = 0;  // 0 -> 75% of the run's total iterations
  PruneRule prune_rule = PruneRule::kSetSigned;
  GrowthRule growth_rule = GrowthRule::kMomentum;

  double epsilon = 0.0;  // 0 -> fully dense model, > 0 -> ER-masked layers
  bool mask_readout = false;

  std::uint64_t seed = 1;
  double validation_fraction = 0.1;

  double init_scale = 30.0;  // temporal weight init upper bound scale
  double reg_coeff = 0.01;   // temporal weight-sum penalty coefficient
  double grad_clip = 1.0;    // per-layer gradient L2 clip, 0 disables

  double threshold = 0.5;  // binarization threshold (temporal encoding)
  double t_late = 0.0;     // late spike time for off pixels, 0 -> silent

  std::uint32_t timesteps = 2;  // LIF simulation length
  EncodeMode encode = EncodeMode::kAnalog;
  double tau = 0.5;
  double v_th = 1.0;
  double surrogate_width = 1.0;

  std::uint32_t in_c = 1, in_h = 28, in_w = 28;  // conv input geometry

  MaskEnforce mask_enforce = MaskEnforce::kEveryStep;
  std::uint32_t metrics_interval = 0;  // extra metrics rows every N iterations

  void validate() const {
    if (batch_size < 1) throw std::invalid_argument("config: batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
      throw std::invalid_argument("config: validation_fraction must be in (0, 1)");
    if (!(lr_start > 0.0) || !(lr_end > 0.0))
      throw std::invalid_argument("config: learning rate endpoints must be > 0");
    if (epsilon < 0.0) throw std::invalid_argument("config: epsilon must be >= 0");
    if (epsilon > 0.0 && alpha > 0.0) {
      if (!(alpha < 1.0)) throw std::invalid_argument("config: alpha must be in [0, 1)");
      if (t_iter < 1) throw std::invalid_argument("config: t_iter must be >= 1");
    }
    if (alpha < 0.0) throw std::invalid_argument("config: alpha must be >= 0");
    if (timesteps < 1) throw std::invalid_argument("config: timesteps must be >= 1");
  }
};

namespace detail {

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline const char* to_string(ModelPreset m) {
  switch (m) {
    case ModelPreset::kTemporalMlp: return "temporal_mlp";
    case ModelPreset::kLifMlp: return "lif_mlp";
    case ModelPreset::kTinyConv: return "tiny_conv";
  }
  return "?";
}
inline const char* to_string(OptimizerKind k) {
  return k == OptimizerKind::kAdam ? "adam" : "sgd_momentum";
}
inline const char* to_string(LrSchedule::Kind k) {
  return k == LrSchedule::Kind::kExponential ? "exponential" : "constant";
}
inline const char* to_string(PruneRule r) {
  return r == PruneRule::kMagnitude ? "magnitude" : "set_signed";
}
inline const char* to_string(GrowthRule r) {
  switch (r) {
    case GrowthRule::kRandomUnfired: return "random_unfired";
    case GrowthRule::kGradient: return "gradient";
    case GrowthRule::kMomentum: return "momentum";
  }
  return "?";
}
inline const char* to_string(EncodeMode e) {
  return e == EncodeMode::kAnalog ? "analog" : "bernoulli";
}
inline const char* to_string(MaskEnforce m) {
  return m == MaskEnforce::kEveryStep ? "every_step" : "rewire_only";
}

}  // namespace detail

inline std::string serialize_config(const TrainingConfig& c) {
  std::ostringstream out;
  auto kv = [&](const char* k, const std::string& v) { out << k << " = " << v << "\n"; };
  kv("model", detail::to_string(c.model));
  kv("hidden", std::to_string(c.hidden));
  kv("epochs", std::to_string(c.epochs));
  kv("batch_size", std::to_string(c.batch_size));
  kv("optimizer", detail::to_string(c.optimizer));
  kv("adam_beta1", detail::fmt_double(c.adam_beta1));
  kv("adam_beta2", detail::fmt_double(c.adam_beta2));
  kv("adam_eps", detail::fmt_double(c.adam_eps));
  kv("sgd_momentum", detail::fmt_double(c.sgd_momentum));
  kv("lr_schedule", detail::to_string(c.lr_schedule));
  kv("lr_start", detail::fmt_double(c.lr_start));
  kv("lr_end", detail::fmt_double(c.lr_end));
  kv("alpha", detail::fmt_double(c.alpha));
  kv("t_iter", std::to_string(c.t_iter));
  kv("t_end", std::to_string(c.t_end));
  kv("prune_rule", detail::to_string(c.prune_rule));
  kv("growth_rule", detail::to_string(c.growth_rule));
  kv("epsilon", detail::fmt_double(c.epsilon));
  kv("mask_readout", c.mask_readout ? "true" : "false");
  kv("seed", std::to_string(c.seed));
  kv("validation_fraction", detail::fmt_double(c.validation_fraction));
  kv("init_scale", detail::fmt_double(c.init_scale));
  kv("reg_coeff", detail::fmt_double(c.reg_coeff));
  kv("grad_clip", detail::fmt_double(c.grad_clip));
  kv("threshold", detail::fmt_double(c.threshold));
  kv("t_late", detail::fmt_double(c.t_late));
  kv("timesteps", std::to_string(c.timesteps));
  kv("encode", detail::to_string(c.encode));
  kv("tau", detail::fmt_double(c.tau));
  kv("v_th", detail::fmt_double(c.v_th));
  kv("surrogate_width", detail::fmt_double(c.surrogate_width));
  kv("in_c", std::to_string(c.in_c));
  kv("in_h", std::to_string(c.in_h));
  kv("in_w", std::to_string(c.in_w));
  kv("mask_enforce", detail::to_string(c.mask_enforce));
  kv("metrics_interval", std::to_string(c.metrics_interval));
  return out.str();
}

inline TrainingConfig parse_config(const std::string& text) {
  TrainingConfig c;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));

    auto as_u32 = [&] { return std::uint32_t(std::stoul(val)); };
    auto as_u64 = [&] { return std::uint64_t(std::stoull(val)); };
    auto as_f = [&] { return std::stod(val); };
    auto as_bool = [&] {
      if (val == "true") return true;
      if (val == "false") return false;
      throw std::invalid_argument("config: bad bool for " + key + ": " + val);
    };
    auto bad_value = [&]() -> std::invalid_argument {
      return std::invalid_argument("config: bad value for " + key + ": " + val);
    };

    if (key == "model") {
      if (val == "temporal_mlp") c.model = ModelPreset::kTemporalMlp;
      else if (val == "lif_mlp") c.model = ModelPreset::kLifMlp;
      else if (val == "tiny_conv") c.model = ModelPreset::kTinyConv;
      else throw bad_value();
    } else if (key == "hidden") c.hidden = as_u32();
    else if (key == "epochs") c.epochs = as_u32();
    else if (key == "batch_size") c.batch_size = as_u32();
    else if (key == "optimizer") {
      if (val == "adam") c.optimizer = OptimizerKind::kAdam;
      else if (val == "sgd_momentum") c.optimizer = OptimizerKind::kSgdMomentum;
      else throw bad_value();
    } else if (key == "adam_beta1") c.adam_beta1 = as_f();
    else if (key == "adam_beta2") c.adam_beta2 = as_f();
    else if (key == "adam_eps") c.adam_eps = as_f();
    else if (key == "sgd_momentum") c.sgd_momentum = as_f();
    else if (key == "lr_schedule") {
      if (val == "exponential") c.lr_schedule = LrSchedule::Kind::kExponential;
      else if (val == "constant") c.lr_schedule = LrSchedule::Kind::kConstant;
      else throw bad_value();
    } else if (key == "lr_start") c.lr_start = as_f();
    else if (key == "lr_end") c.lr_end = as_f();
    else if (key == "alpha") c.alpha = as_f();
    else if (key == "t_iter") c.t_iter = as_u64();
    else if (key == "t_end") c.t_end = as_u64();
    else if (key == "prune_rule") {
      if (val == "magnitude") c.prune_rule = PruneRule::kMagnitude;
      else if (val == "set_signed") c.prune_rule = PruneRule::kSetSigned;
      else throw bad_value();
    } else if (key == "growth_rule") {
      if (val == "random_unfired") c.growth_rule = GrowthRule::kRandomUnfired;
      else if (val == "gradient") c.growth_rule = GrowthRule::kGradient;
      else if (val == "momentum") c.growth_rule = GrowthRule::kMomentum;
      else throw bad_value();
    } else if (key == "epsilon") c.epsilon = as_f();
    else if (key == "mask_readout") c.mask_readout = as_bool();
    else if (key == "seed") c.seed = as_u64();
    else if (key == "validation_fraction") c.validation_fraction = as_f();
    else if (key == "init_scale") c.init_scale = as_f();
    else if (key == "reg_coeff") c.reg_coeff = as_f();
    else if (key == "grad_clip") c.grad_clip = as_f();
    else if (key == "threshold") c.threshold = as_f();
    else if (key == "t_late") c.t_late = as_f();
    else if (key == "timesteps") c.timesteps = as_u32();
    else if (key == "encode") {
      if (val == "analog") c.encode = EncodeMode::kAnalog;
      else if (val == "bernoulli") c.encode = EncodeMode::kBernoulli;
      else throw bad_value();
    } else if (key == "tau") c.tau = as_f();
    else if (key == "v_th") c.v_th = as_f();
    else if (key == "surrogate_width") c.surrogate_width = as_f();
    else if (key == "in_c") c.in_c = as_u32();
    else if (key == "in_h") c.in_h = as_u32();
    else if (key == "in_w") c.in_w = as_u32();
    else if (key == "mask_enforce") {
      if (val == "every_step") c.mask_enforce = MaskEnforce::kEveryStep;
      else if (val == "rewire_only") c.mask_enforce = MaskEnforce::kRewireOnly;
      else throw bad_value();
    } else if (key == "metrics_interval") c.metrics_interval = as_u32();
    else throw std::invalid_argument("config: unknown key: " + key);
  }
  return c;
}

inline TrainingConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

// FNV-1a over the canonical serialization.
inline std::uint64_t config_hash(const TrainingConfig& c) {
  const std::string s = serialize_config(c);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace eslsnn

#endif  // ESLSNN_CONFIG_HPP
