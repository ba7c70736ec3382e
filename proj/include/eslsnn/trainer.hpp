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

#ifndef ESLSNN_TRAINER_HPP
#define ESLSNN_TRAINER_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "eslsnn/checkpoint.hpp"
#include "eslsnn/config.hpp"
#include "eslsnn/energy.hpp"
#include "eslsnn/evolution.hpp"
#include "eslsnn/networks.hpp"
#include "eslsnn/optim.hpp"

namespace eslsnn {

struct MetricsRecord {
  std::uint64_t iteration = 0;
  std::uint32_t epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  std::vector<double> layer_densities;  // masked layers, model order
  std::uint64_t rewires_cum = 0;
  double seconds = 0.0;
};

inline std::string metrics_csv_header() {
  return "iteration,epoch,train_loss,val_accuracy,layer_densities,rewires_cum,seconds";
}

inline std::string metrics_csv_row(const MetricsRecord& r) {
  char buf[64];
  std::string row = std::to_string(r.iteration) + "," + std::to_string(r.epoch);
  std::snprintf(buf, sizeof(buf), ",%.9g,%.9g,", r.train_loss, r.val_accuracy);
  row += buf;
  for (std::size_t d = 0; d < r.layer_densities.size(); ++d) {
    std::snprintf(buf, sizeof(buf), "%s%.9g", d ? ";" : "", r.layer_densities[d]);
    row += buf;
  }
  row += "," + std::to_string(r.rewires_cum);
  std::snprintf(buf, sizeof(buf), ",%.3f", r.seconds);
  row += buf;
  return row;
}

inline std::string metrics_to_csv(const std::vector<MetricsRecord>& records) {
  std::string out = metrics_csv_header() + "\n";
  for (const auto& r : records) out += metrics_csv_row(r) + "\n";
  return out;
}

struct TrainHooks {
  // Called after each metrics record is appended; the model reference
  // allows invariant checks (e.g. inactive weights are zero).
  std::function<void(const MetricsRecord&, SnnModel&)> on_metrics;
  std::function<void(const RewireEvent&)> on_rewire;
};

struct TrainResult {
  Checkpoint checkpoint;  // best model by validation top-1 accuracy
  std::vector<MetricsRecord> metrics;
  std::vector<RewireEvent> rewires;
};

inline std::unique_ptr<SnnModel> build_model(const TrainingConfig& cfg) {
  switch (cfg.model) {
    case ModelPreset::kTemporalMlp: {
      TemporalMlp::Options opt;
      opt.n_in = cfg.in_c * cfg.in_h * cfg.in_w;
      opt.n_hidden = cfg.hidden;
      opt.epsilon = cfg.epsilon;
      opt.mask_readout = cfg.mask_readout;
      opt.threshold = cfg.threshold;
      opt.t_late = cfg.t_late;
      opt.init_scale = cfg.init_scale;
      return std::make_unique<TemporalMlp>(opt, cfg.seed);
    }
    case ModelPreset::kLifMlp: {
      LifMlp::Options opt;
      opt.n_in = cfg.in_c * cfg.in_h * cfg.in_w;
      opt.n_hidden = cfg.hidden;
      opt.timesteps = cfg.timesteps;
      opt.epsilon = cfg.epsilon;
      opt.mask_readout = cfg.mask_readout;
      opt.lif = {cfg.tau, cfg.v_th, cfg.surrogate_width};
      opt.encode = cfg.encode == EncodeMode::kAnalog ? RateMode::kAnalog
                                                     : RateMode::kBernoulli;
      opt.encode_seed = Rng::derive(cfg.seed, 401);
      return std::make_unique<LifMlp>(opt, cfg.seed);
    }
    case ModelPreset::kTinyConv: {
      TinyConvSnn::Options opt;
      opt.in_c = cfg.in_c;
      opt.in_h = cfg.in_h;
      opt.in_w = cfg.in_w;
      opt.timesteps = cfg.timesteps;
      opt.epsilon = cfg.epsilon;
      opt.mask_readout = cfg.mask_readout;
      opt.lif = {cfg.tau, cfg.v_th, cfg.surrogate_width};
      opt.encode = cfg.encode == EncodeMode::kAnalog ? RateMode::kAnalog
                                                     : RateMode::kBernoulli;
      opt.encode_seed = Rng::derive(cfg.seed, 401);
      return std::make_unique<TinyConvSnn>(opt, cfg.seed);
    }
  }
  throw std::invalid_argument("build_model: unknown preset");
}

namespace detail {

inline std::vector<double> grad_to_row_major(const GradMatrix& g) {
  std::vector<double> out(g.data().size());
  for (std::uint32_t i = 0; i < g.n_pre(); ++i)
    for (std::uint32_t j = 0; j < g.n_post(); ++j)
      out[std::size_t(i) * g.n_post() + j] = g.at(i, j);
  return out;
}

inline void grad_from_row_major(const std::vector<double>& in, GradMatrix& g) {
  for (std::uint32_t i = 0; i < g.n_pre(); ++i)
    for (std::uint32_t j = 0; j < g.n_post(); ++j)
      g.at(i, j) = in[std::size_t(i) * g.n_post() + j];
}

inline Checkpoint make_checkpoint(const TrainingConfig& cfg, SnnModel& model,
                                  const Optimizer& opt, std::uint32_t epoch,
                                  double best_val, std::uint64_t iteration) {
  Checkpoint ckpt;
  ckpt.config_text = serialize_config(cfg);
  ckpt.config_hash = config_hash(cfg);
  ckpt.epoch = epoch;
  ckpt.best_val_accuracy = best_val;
  ckpt.seed = cfg.seed;
  ckpt.iteration = iteration;
  ckpt.optimizer_step = opt.step_count();
  auto views = model.layers();
  for (std::size_t l = 0; l < views.size(); ++l) {
    LayerState ls;
    ls.id = views[l].id;
    ls.n_pre = views[l].weights->n_pre();
    ls.n_post = views[l].weights->n_post();
    ls.weights = to_row_major(*views[l].weights);
    if (views[l].mask) {
      ls.has_mask = true;
      ls.mask_edges = views[l].mask->active();
      ls.ever_active = *views[l].ever_active;
    }
    if (opt.n_blocks() == views.size()) {
      ls.opt_m = grad_to_row_major(opt.first_moment(l));
      ls.opt_v = grad_to_row_major(const_cast<Optimizer&>(opt).mutable_second_moment(l));
    }
    ckpt.layers.push_back(std::move(ls));
  }
  return ckpt;
}

}  // namespace detail

// Rebuilds the model a checkpoint was trained with and restores its
// weights, masks, and ever-active bitmaps.
inline std::unique_ptr<SnnModel> model_from_checkpoint(const Checkpoint& ckpt) {
  const TrainingConfig cfg = parse_config(ckpt.config_text);
  auto model = build_model(cfg);
  auto views = model->layers();
  if (views.size() != ckpt.layers.size())
    throw std::runtime_error("checkpoint: layer count mismatch with preset");
  for (std::size_t l = 0; l < views.size(); ++l) {
    const auto& ls = ckpt.layers[l];
    if (views[l].id != ls.id || views[l].weights->n_pre() != ls.n_pre ||
        views[l].weights->n_post() != ls.n_post)
      throw std::runtime_error("checkpoint: layer shape mismatch: " + ls.id);
    if (ls.has_mask != (views[l].mask != nullptr))
      throw std::runtime_error("checkpoint: mask presence mismatch: " + ls.id);
    from_row_major(ls.weights, *views[l].weights);
    if (ls.has_mask) {
      views[l].mask->assign(ls.mask_edges);
      *views[l].ever_active = ls.ever_active;
    }
  }
  return model;
}

inline double evaluate_model(SnnModel& model, const DataView& data,
                             std::span<const std::uint32_t> indices) {
  std::size_t correct = 0;
  for (std::uint32_t idx : indices)
    if (model.predict(data, idx) == int(data.label(idx))) ++correct;
  return indices.empty() ? 0.0 : double(correct) / double(indices.size());
}

// Runs the full evolutionary training loop: per iteration a standard
// forward/backward/update step with the mask re-applied, and every t_iter
// iterations (while iteration <= t_end) a prune/regrow step on every
// masked layer. Model selection is by top-1 validation accuracy.
// Deterministic given the config (all randomness derives from cfg.seed).
inline TrainResult train(const TrainingConfig& cfg, const DataView& data,
                         const TrainHooks& hooks = {}) {
  cfg.validate();
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
        .count();
  };

  auto model = build_model(cfg);
  model->init_weights(cfg.seed);
  auto views = model->layers();

  // Validation split: drawn once from the run seed.
  std::vector<std::uint32_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  {
    Rng rng(Rng::derive(cfg.seed, 7001));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_below(i)]);
  }
  const std::size_t n_val =
      std::max<std::size_t>(1, std::size_t(cfg.validation_fraction * double(data.size())));
  std::vector<std::uint32_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<std::uint32_t> train_idx(order.begin() + n_val, order.end());

  const std::size_t iters_per_epoch = train_idx.size() / cfg.batch_size;
  if (iters_per_epoch == 0)
    throw std::invalid_argument("train: batch_size exceeds the training split");

  const bool any_mask = [&] {
    for (const auto& v : views)
      if (v.mask) return true;
    return false;
  }();
  const bool evolution_on = any_mask && cfg.alpha > 0.0;
  EvolutionSchedule schedule;
  if (evolution_on) {
    schedule.alpha = cfg.alpha;
    schedule.t_iter = cfg.t_iter;
    schedule.t_end = cfg.t_end != 0
                         ? cfg.t_end
                         : std::uint64_t(0.75 * double(cfg.epochs) * double(iters_per_epoch));
    schedule.t_end = std::max(schedule.t_end, schedule.t_iter);
    schedule.prune_rule = cfg.prune_rule;
    schedule.growth_rule = cfg.growth_rule;
    schedule.validate();
  }
  // Momentum growth needs first moments on inactive entries, so the
  // optimizer is fed unmasked gradients every step; the gradient rule only
  // needs a dense probe at rewire instants.
  const bool dense_every_step = evolution_on && cfg.growth_rule == GrowthRule::kMomentum;

  OptimizerConfig ocfg;
  ocfg.kind = cfg.optimizer;
  ocfg.beta1 = cfg.adam_beta1;
  ocfg.beta2 = cfg.adam_beta2;
  ocfg.eps = cfg.adam_eps;
  ocfg.momentum = cfg.sgd_momentum;
  std::vector<const WeightMatrix*> blocks;
  for (const auto& v : views) blocks.push_back(v.weights);
  Optimizer optimizer(ocfg, blocks);

  std::vector<GradMatrix> grads, dense;
  for (const auto& v : views) {
    grads.emplace_back(v.weights->n_pre(), v.weights->n_post());
    dense.emplace_back(v.weights->n_pre(), v.weights->n_post());
  }

  LrSchedule lr_schedule{cfg.lr_schedule, cfg.lr_start, cfg.lr_end};

  TrainResult result;
  std::uint64_t iteration = 0;
  std::uint64_t rewires_cum = 0;
  double last_val = 0.0;
  double best_val = -1.0;

  auto densities = [&] {
    std::vector<double> d;
    for (const auto& v : views)
      if (v.mask) d.push_back(v.mask->density());
    return d;
  };
  auto emit = [&](std::uint32_t epoch, double loss, double val) {
    MetricsRecord rec;
    rec.iteration = iteration;
    rec.epoch = epoch;
    rec.train_loss = loss;
    rec.val_accuracy = val;
    rec.layer_densities = densities();
    rec.rewires_cum = rewires_cum;
    rec.seconds = elapsed();
    result.metrics.push_back(rec);
    if (hooks.on_metrics) hooks.on_metrics(result.metrics.back(), *model);
  };

  std::vector<WeightMatrix*> weight_ptrs;
  for (const auto& v : views) weight_ptrs.push_back(v.weights);

  for (std::uint32_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_schedule.at(epoch, cfg.epochs);
    {
      Rng rng(Rng::derive(cfg.seed, 9000 + epoch));
      for (std::size_t i = train_idx.size(); i > 1; --i)
        std::swap(train_idx[i - 1], train_idx[rng.uniform_below(i)]);
    }
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < iters_per_epoch; ++b) {
      ++iteration;
      const bool rewire_now = evolution_on && iteration % schedule.t_iter == 0 &&
                              iteration <= schedule.t_end;
      const bool want_dense =
          dense_every_step || (rewire_now && cfg.growth_rule == GrowthRule::kGradient);

      for (auto& g : grads) g.zero();
      if (want_dense)
        for (auto& g : dense) g.zero();

      const std::span<const std::uint32_t> batch(train_idx.data() + b * cfg.batch_size,
                                                 cfg.batch_size);
      const double loss =
          model->train_batch(data, batch, grads, want_dense ? &dense : nullptr);
      if (!std::isfinite(loss))
        throw std::runtime_error("train: non-finite loss at iteration " +
                                 std::to_string(iteration) + " (epoch " +
                                 std::to_string(epoch) + ")");
      epoch_loss += loss;

      auto& fed = dense_every_step ? dense : grads;
      // Normalize the loss gradient per layer, then add the weight penalty;
      // keeping the penalty outside the clip stops it from drowning the
      // loss signal when many neurons sit below threshold at once.
      for (auto& g : fed) clip_grad_norm(g, cfg.grad_clip);
      model->regularizer_grads(cfg.reg_coeff, fed);
      std::vector<const GradMatrix*> fed_ptrs;
      for (auto& g : fed) fed_ptrs.push_back(&g);
      optimizer.step(weight_ptrs, fed_ptrs, lr);
      if (cfg.mask_enforce == MaskEnforce::kEveryStep || rewire_now)
        model->enforce_masks();

      if (rewire_now) {
        for (std::size_t l = 0; l < views.size(); ++l) {
          if (!views[l].mask) continue;
          GrowthSignals sig;
          sig.gradient = want_dense ? &dense[l] : nullptr;
          sig.momentum = &optimizer.first_moment(l);
          sig.ever_active = views[l].ever_active;
          const std::uint64_t rw_seed =
              Rng::derive(cfg.seed, 0xE0000000ULL + iteration * 131 + l);
          RewireEvent ev = rewire_step(*views[l].mask, *views[l].weights, schedule,
                                       iteration, sig, rw_seed, views[l].id,
                                       views[l].ever_active);
          ++rewires_cum;
          if (hooks.on_rewire) hooks.on_rewire(ev);
          result.rewires.push_back(std::move(ev));
        }
      }
      if (cfg.metrics_interval > 0 && iteration % cfg.metrics_interval == 0)
        emit(epoch, epoch_loss / double(b + 1), last_val);
    }

    last_val = evaluate_model(*model, data, val_idx);
    emit(epoch, epoch_loss / double(iters_per_epoch), last_val);
    if (last_val > best_val) {
      best_val = last_val;
      result.checkpoint =
          detail::make_checkpoint(cfg, *model, optimizer, epoch, best_val, iteration);
    }
  }
  return result;
}

struct EvalResult {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  OpCounts ops;
};

// Top-1 accuracy of a checkpointed model over a dataset split.
inline EvalResult evaluate(const Checkpoint& ckpt, const DataView& data) {
  auto model = model_from_checkpoint(ckpt);
  std::vector<std::size_t> correct, total;
  std::size_t n_correct = 0;
  for (std::size_t idx = 0; idx < data.size(); ++idx) {
    const std::size_t label = data.label(idx);
    if (label >= total.size()) {
      total.resize(label + 1, 0);
      correct.resize(label + 1, 0);
    }
    ++total[label];
    if (model->predict(data, idx) == int(label)) {
      ++correct[label];
      ++n_correct;
    }
  }
  EvalResult res;
  res.accuracy = data.size() ? double(n_correct) / double(data.size()) : 0.0;
  for (std::size_t c = 0; c < total.size(); ++c)
    res.per_class_accuracy.push_back(total[c] ? double(correct[c]) / double(total[c])
                                              : 0.0);
  res.ops = count_ops(ckpt);
  return res;
}

struct SweepRow {
  double epsilon = 0.0;
  std::uint64_t seed = 0;
  double density = 0.0;   // measured from the trained masks
  double test_acc = 0.0;
};

inline std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
  std::string out = "epsilon,seed,density,test_acc\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.9g,%llu,%.9g,%.9g\n", r.epsilon,
                  static_cast<unsigned long long>(r.seed), r.density, r.test_acc);
    out += buf;
  }
  return out;
}

// Trains one run per (epsilon, seed) pair and reports the measured density
// of the masked layers (recounted from the trained checkpoint, not the ER
// expectation) together with test accuracy.
inline std::vector<SweepRow> sweep_epsilon(const TrainingConfig& base,
                                           const std::vector<double>& epsilons,
                                           std::uint32_t n_seeds,
                                           const DataView& train_data,
                                           const DataView& test_data) {
  for (double e : epsilons)
    if (!(e > 0.0))
      throw std::invalid_argument("sweep_epsilon: epsilon values must be > 0");
  std::vector<SweepRow> rows;
  for (double eps : epsilons) {
    for (std::uint32_t s = 0; s < n_seeds; ++s) {
      TrainingConfig cfg = base;
      cfg.epsilon = eps;
      cfg.seed = base.seed + s;
      TrainResult tr = train(cfg, train_data);
      SweepRow row;
      row.epsilon = eps;
      row.seed = cfg.seed;
      std::size_t active = 0, size = 0;
      for (const auto& ls : tr.checkpoint.layers) {
        if (!ls.has_mask) continue;
        active += ls.mask_edges.size();
        size += std::size_t(ls.n_pre) * ls.n_post;
      }
      row.density = size ? double(active) / double(size) : 1.0;
      row.test_acc = evaluate(tr.checkpoint, test_data).accuracy;
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace eslsnn

#endif  // ESLSNN_TRAINER_HPP
