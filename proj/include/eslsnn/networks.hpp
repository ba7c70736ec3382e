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

#ifndef ESLSNN_NETWORKS_HPP
#define ESLSNN_NETWORKS_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eslsnn/conv.hpp"
#include "eslsnn/datasets.hpp"
#include "eslsnn/lif.hpp"
#include "eslsnn/mask.hpp"
#include "eslsnn/temporal.hpp"
#include "eslsnn/weights.hpp"

namespace eslsnn {

// Either an image dataset or an event dataset; models pick the input
// encoding they need.
struct DataView {
  const ImageDataset* images = nullptr;
  const EventDataset* events = nullptr;

  std::size_t size() const { return images ? images->size() : events->size(); }
  std::uint8_t label(std::size_t i) const {
    return images ? images->labels[i] : events->labels[i];
  }
};

// One weight block of a model as seen by the trainer: the evolving masked
// blocks carry a mask and an ever-active bitmap, dense blocks carry neither.
struct LayerView {
  std::string id;
  WeightMatrix* weights = nullptr;
  SparseMask* mask = nullptr;
  std::vector<std::uint8_t>* ever_active = nullptr;
  // Output positions sharing each kernel element (1 for dense blocks);
  // connections * spatial_positions = synaptic ops per inference timestep.
  std::size_t spatial_positions = 1;
};

// Common surface of the trainable SNN back-ends.
class SnnModel {
 public:
  virtual ~SnnModel() = default;
  virtual std::string name() const = 0;
  virtual std::vector<LayerView> layers() = 0;
  virtual void init_weights(std::uint64_t seed) = 0;

  // Mean loss over the batch. Gradients are accumulated into grads
  // (index-aligned with layers(), scaled by 1/batch, and exactly zero on
  // masked-out entries). When dense_grads is non-null the unmasked
  // gradients are accumulated there as well (growth signals).
  virtual double train_batch(const DataView& data,
                             std::span<const std::uint32_t> idx,
                             std::vector<GradMatrix>& grads,
                             std::vector<GradMatrix>* dense_grads) = 0;

  virtual int predict(const DataView& data, std::size_t idx) = 0;

  // Model-specific weight penalty; accumulates into grads, returns the
  // penalty value. Applied once per optimizer step.
  virtual double regularizer_grads(double /*coeff*/, std::vector<GradMatrix>& /*grads*/) {
    return 0.0;
  }

  // Re-applies W := M (element-wise) W on every masked block.
  void enforce_masks() {
    for (auto& lv : layers())
      if (lv.mask) lv.weights->apply_mask(*lv.mask);
  }
};

namespace detail {

inline std::vector<std::uint8_t> ever_active_from(const SparseMask& mask) {
  std::vector<std::uint8_t> ever(mask.size(), 0);
  for (const auto& [i, j] : mask.active())
    ever[std::size_t(i) * mask.n_post() + j] = 1;
  return ever;
}

inline void he_init(WeightMatrix& w, Rng& rng) {
  const double sigma = std::sqrt(2.0 / double(w.n_pre()));
  for (double& x : w.data()) x = sigma * rng.normal();
}

// He init over the active fan-in of each output; with a sparse mask the
// full-fan sigma would leave the drive far below threshold.
inline void he_init_masked(WeightMatrix& w, const SparseMask* mask, Rng& rng) {
  if (!mask) {
    he_init(w, rng);
    return;
  }
  for (std::uint32_t j = 0; j < w.n_post(); ++j) {
    const auto& pre = mask->pre_of(j);
    const double sigma = std::sqrt(2.0 / double(std::max<std::size_t>(1, pre.size())));
    for (std::uint32_t i : pre) w.at(i, j) = sigma * rng.normal();
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Single-spike temporal MLP (z-domain forward, exact gradients).
// Sparsity evolves on the input->hidden block; the readout stays dense
// unless mask_readout is set. epsilon == 0 disables masking entirely.
// ---------------------------------------------------------------------------
class TemporalMlp : public SnnModel {
 public:
  struct Options {
    std::uint32_t n_in = 784, n_hidden = 800, n_out = 10;
    double epsilon = 0.0;       // 0 -> fully dense model
    bool mask_readout = false;
    double threshold = 0.5;     // binarization threshold
    double t_late = 0.0;        // 0 -> off pixels stay silent
    double init_scale = 30.0;   // uniform upper bound = scale / fan_in
  };

  TemporalMlp(const Options& opt, std::uint64_t seed) : opt_(opt) {
    layers_.emplace_back(opt.n_in, opt.n_hidden);
    layers_.emplace_back(opt.n_hidden, opt.n_out);
    if (opt.epsilon > 0.0) {
      ErdosRenyiConfig er{opt.epsilon};
      layers_[0].mask = er_init(opt.n_in, opt.n_hidden, er, Rng::derive(seed, 101));
      ever_active_.push_back(detail::ever_active_from(*layers_[0].mask));
      if (opt.mask_readout) {
        layers_[1].mask = er_init(opt.n_hidden, opt.n_out, er, Rng::derive(seed, 102));
        ever_active_.push_back(detail::ever_active_from(*layers_[1].mask));
      }
    }
  }

  std::string name() const override { return "temporal_mlp"; }

  std::vector<LayerView> layers() override {
    std::vector<LayerView> out;
    std::size_t mask_slot = 0;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      LayerView lv;
      lv.id = "fc" + std::to_string(l);
      lv.weights = &layers_[l].weights;
      if (layers_[l].mask) {
        lv.mask = &*layers_[l].mask;
        lv.ever_active = &ever_active_[mask_slot++];
      }
      out.push_back(lv);
    }
    return out;
  }

  void init_weights(std::uint64_t seed) override {
    for (std::size_t l = 0; l < layers_.size(); ++l)
      init_temporal_weights(layers_[l], Rng::derive(seed, 201 + l), opt_.init_scale);
  }

  double train_batch(const DataView& data, std::span<const std::uint32_t> idx,
                     std::vector<GradMatrix>& grads,
                     std::vector<GradMatrix>* dense_grads) override {
    const ImageDataset* images = data.images;
    if (!images) throw std::invalid_argument("TemporalMlp: needs an image dataset");
    const double inv_n = 1.0 / double(idx.size());
    double loss_sum = 0.0;
    std::vector<double> gz_hidden;
    std::vector<double> gz_out;
    for (std::uint32_t sample : idx) {
      const ZSpikeVector z_in =
          encode_temporal(images->image(sample), opt_.threshold, opt_.t_late);
      forward_layer(z_in, layers_[0], fwd_[0]);
      forward_layer(fwd_[0].z_out, layers_[1], fwd_[1]);
      ZLoss zl = z_loss(fwd_[1].z_out, images->labels[sample]);
      loss_sum += zl.loss;
      gz_out = zl.grad;
      for (double& g : gz_out) g *= inv_n;
      backward_layer(gz_out, fwd_[0].z_out, fwd_[1], layers_[1], grads[1], &gz_hidden);
      backward_layer(gz_hidden, z_in, fwd_[0], layers_[0], grads[0], nullptr);
      if (dense_grads) {
        dense_weight_gradients(gz_out, fwd_[1], (*dense_grads)[1]);
        dense_weight_gradients(gz_hidden, fwd_[0], (*dense_grads)[0]);
      }
    }
    return loss_sum * inv_n;
  }

  int predict(const DataView& data, std::size_t idx) override {
    const ImageDataset* images = data.images;
    if (!images) throw std::invalid_argument("TemporalMlp: needs an image dataset");
    const ZSpikeVector z_in =
        encode_temporal(images->image(idx), opt_.threshold, opt_.t_late);
    forward_layer(z_in, layers_[0], fwd_[0]);
    forward_layer(fwd_[0].z_out, layers_[1], fwd_[1]);
    // Earliest spike wins; silent outputs rank last.
    int best = 0;
    double best_z = kZMax + 1.0;
    for (std::size_t k = 0; k < fwd_[1].z_out.size(); ++k) {
      const double z = has_spike(fwd_[1].z_out[k]) ? fwd_[1].z_out[k] : kZMax + 1.0;
      if (z < best_z) {
        best_z = z;
        best = int(k);
      }
    }
    return best;
  }

  double regularizer_grads(double coeff, std::vector<GradMatrix>& grads) override {
    double penalty = 0.0;
    for (std::size_t l = 0; l < layers_.size(); ++l)
      penalty += weight_sum_regularizer(layers_[l], coeff, grads[l]);
    return penalty;
  }

  TemporalLayer& layer(std::size_t l) { return layers_[l]; }
  const Options& options() const { return opt_; }

 private:
  Options opt_;
  std::vector<TemporalLayer> layers_;
  std::vector<std::vector<std::uint8_t>> ever_active_;
  LayerForward fwd_[2];
};

// ---------------------------------------------------------------------------
// Iterative LIF MLP trained with surrogate-gradient BPTT and the TET loss.
// Input images are direct-coded (analog value repeated each timestep, or
// seeded Bernoulli spikes). The readout integrates without decay or firing.
// ---------------------------------------------------------------------------
class LifMlp : public SnnModel {
 public:
  struct Options {
    std::uint32_t n_in = 784, n_hidden = 800, n_out = 10;
    std::uint32_t timesteps = 2;
    double epsilon = 0.0;  // 0 -> fully dense
    bool mask_readout = false;
    LifConfig lif;
    RateMode encode = RateMode::kAnalog;
    std::uint64_t encode_seed = 0;
  };

  LifMlp(const Options& opt, std::uint64_t seed) : opt_(opt), w1_(opt.n_in, opt.n_hidden), w2_(opt.n_hidden, opt.n_out) {
    opt_.lif.validate();
    if (opt.timesteps < 1) throw std::invalid_argument("LifMlp: timesteps must be >= 1");
    if (opt.epsilon > 0.0) {
      ErdosRenyiConfig er{opt.epsilon};
      mask1_ = er_init(opt.n_in, opt.n_hidden, er, Rng::derive(seed, 101));
      ever1_ = detail::ever_active_from(*mask1_);
      if (opt.mask_readout) {
        mask2_ = er_init(opt.n_hidden, opt.n_out, er, Rng::derive(seed, 102));
        ever2_ = detail::ever_active_from(*mask2_);
      }
    }
  }

  std::string name() const override { return "lif_mlp"; }

  std::vector<LayerView> layers() override {
    std::vector<LayerView> out(2);
    out[0] = {"fc0", &w1_, mask1_ ? &*mask1_ : nullptr, mask1_ ? &ever1_ : nullptr, 1};
    out[1] = {"fc1", &w2_, mask2_ ? &*mask2_ : nullptr, mask2_ ? &ever2_ : nullptr, 1};
    return out;
  }

  void init_weights(std::uint64_t seed) override {
    Rng rng(Rng::derive(seed, 301));
    detail::he_init_masked(w1_, mask1_ ? &*mask1_ : nullptr, rng);
    detail::he_init_masked(w2_, mask2_ ? &*mask2_ : nullptr, rng);
    enforce_masks();
  }

  double train_batch(const DataView& data, std::span<const std::uint32_t> idx,
                     std::vector<GradMatrix>& grads,
                     std::vector<GradMatrix>* dense_grads) override {
    const ImageDataset* images = data.images;
    if (!images) throw std::invalid_argument("LifMlp: needs an image dataset");
    const std::uint32_t T = opt_.timesteps;
    const std::uint32_t H = opt_.n_hidden;
    const double inv_n = 1.0 / double(idx.size());
    double loss_sum = 0.0;

    GradMatrix& g1 = dense_grads ? (*dense_grads)[0] : grads[0];
    GradMatrix& g2 = dense_grads ? (*dense_grads)[1] : grads[1];

    std::vector<double> x(opt_.n_in), current(H), u(H), v_t, acc(opt_.n_out);
    std::vector<std::vector<double>> vs(T), as(T), os(T);
    std::vector<double> gacc(opt_.n_out), ga(H), gu(H), gi_sum(H);
    for (std::uint32_t sample : idx) {
      auto img = images->image(sample);
      std::vector<std::vector<double>> frames;
      if (opt_.encode == RateMode::kBernoulli)
        frames = encode_rate(img, T, RateMode::kBernoulli,
                             Rng::derive(opt_.encode_seed, sample));
      // Forward.
      std::fill(u.begin(), u.end(), 0.0);
      std::fill(acc.begin(), acc.end(), 0.0);
      bool static_current = false;
      if (opt_.encode == RateMode::kAnalog) {
        for (std::size_t p = 0; p < x.size(); ++p) x[p] = img[p];
        masked_dense_forward(x, w1_, current);
        static_current = true;
      }
      for (std::uint32_t t = 0; t < T; ++t) {
        if (!static_current) {
          masked_dense_forward(frames[t], w1_, current);
        }
        vs[t].resize(H);
        as[t].resize(H);
        for (std::uint32_t h = 0; h < H; ++h) {
          const double v = opt_.lif.tau * u[h] + current[h];
          const double a = v >= opt_.lif.v_th ? 1.0 : 0.0;
          vs[t][h] = v;
          as[t][h] = a;
          u[h] = v * (1.0 - a);
        }
        for (std::uint32_t k = 0; k < opt_.n_out; ++k) {
          const double* wrow = w2_.row(k);
          double dot = 0.0;
          for (std::uint32_t h = 0; h < H; ++h) dot += wrow[h] * as[t][h];
          acc[k] += dot;
        }
        os[t] = acc;
      }
      TetLoss tl = tet_loss(os, images->labels[sample]);
      loss_sum += tl.loss;

      // Backward (detach-reset convention: no gradient through (1 - a)).
      std::fill(gacc.begin(), gacc.end(), 0.0);
      std::fill(gu.begin(), gu.end(), 0.0);
      std::fill(gi_sum.begin(), gi_sum.end(), 0.0);
      for (std::uint32_t t = T; t-- > 0;) {
        for (std::uint32_t k = 0; k < opt_.n_out; ++k) gacc[k] += inv_n * tl.grad[t][k];
        for (std::uint32_t k = 0; k < opt_.n_out; ++k) {
          double* grow = g2.row(k);
          const double gk = gacc[k];
          for (std::uint32_t h = 0; h < H; ++h) grow[h] += gk * as[t][h];
        }
        std::fill(ga.begin(), ga.end(), 0.0);
        for (std::uint32_t k = 0; k < opt_.n_out; ++k) {
          const double* wrow = w2_.row(k);
          const double gk = gacc[k];
          for (std::uint32_t h = 0; h < H; ++h) ga[h] += gk * wrow[h];
        }
        for (std::uint32_t h = 0; h < H; ++h) {
          const double gv = ga[h] * surrogate_grad(vs[t][h] - opt_.lif.v_th, opt_.lif) +
                            gu[h] * (1.0 - as[t][h]);
          gu[h] = opt_.lif.tau * gv;
          if (static_current) {
            gi_sum[h] += gv;
          } else {
            double* grow = g1.row(h);
            const auto& f = frames[t];
            if (gv != 0.0)
              for (std::uint32_t i = 0; i < opt_.n_in; ++i) grow[i] += gv * f[i];
          }
        }
      }
      if (static_current) {
        for (std::uint32_t h = 0; h < H; ++h) {
          if (gi_sum[h] == 0.0) continue;
          double* grow = g1.row(h);
          const double g = gi_sum[h];
          for (std::uint32_t i = 0; i < opt_.n_in; ++i) grow[i] += g * x[i];
        }
      }
    }
    if (dense_grads) {
      copy_masked(g1, mask1_ ? &*mask1_ : nullptr, grads[0]);
      copy_masked(g2, mask2_ ? &*mask2_ : nullptr, grads[1]);
    }
    return loss_sum * inv_n;
  }

  int predict(const DataView& data, std::size_t idx) override {
    const ImageDataset* images = data.images;
    if (!images) throw std::invalid_argument("LifMlp: needs an image dataset");
    auto img = images->image(idx);
    const std::uint32_t T = opt_.timesteps, H = opt_.n_hidden;
    std::vector<double> x(opt_.n_in), current(H), u(H, 0.0), a(H), acc(opt_.n_out, 0.0);
    std::vector<std::vector<double>> frames;
    if (opt_.encode == RateMode::kBernoulli) {
      frames = encode_rate(img, T, RateMode::kBernoulli, Rng::derive(opt_.encode_seed, idx));
    } else {
      for (std::size_t p = 0; p < x.size(); ++p) x[p] = img[p];
      masked_dense_forward(x, w1_, current);
    }
    for (std::uint32_t t = 0; t < T; ++t) {
      if (opt_.encode == RateMode::kBernoulli) masked_dense_forward(frames[t], w1_, current);
      for (std::uint32_t h = 0; h < H; ++h) {
        const auto [spike, u_next] = lif_step(u[h], current[h], opt_.lif);
        a[h] = spike;
        u[h] = u_next;
      }
      for (std::uint32_t k = 0; k < opt_.n_out; ++k) {
        const double* wrow = w2_.row(k);
        double dot = 0.0;
        for (std::uint32_t h = 0; h < H; ++h) dot += wrow[h] * a[h];
        acc[k] += dot;
      }
    }
    int best = 0;
    for (std::size_t k = 1; k < acc.size(); ++k)
      if (acc[k] > acc[best]) best = int(k);
    return best;
  }

  WeightMatrix& w1() { return w1_; }
  WeightMatrix& w2() { return w2_; }
  const Options& options() const { return opt_; }

 private:
  static void copy_masked(const GradMatrix& dense, const SparseMask* mask,
                          GradMatrix& out) {
    if (!mask) {
      out.data() = dense.data();
      return;
    }
    const auto& bits = mask->bitmap();
    for (std::uint32_t i = 0; i < dense.n_pre(); ++i)
      for (std::uint32_t j = 0; j < dense.n_post(); ++j)
        out.at(i, j) = bits[std::size_t(i) * dense.n_post() + j] ? dense.at(i, j) : 0.0;
  }

  Options opt_;
  WeightMatrix w1_, w2_;
  std::optional<SparseMask> mask1_, mask2_;
  std::vector<std::uint8_t> ever1_, ever2_;
};

// ---------------------------------------------------------------------------
// Desk-scale convolutional LIF net: 16C3 - AP2 - 32C3 - AP2 - FC, trained
// with surrogate BPTT and the TET loss. Conv kernels are masked per
// flattened kernel element; the FC readout stays dense unless mask_readout.
// ---------------------------------------------------------------------------
class TinyConvSnn : public SnnModel {
 public:
  struct Options {
    std::uint32_t in_c = 1, in_h = 28, in_w = 28;
    std::uint32_t c1 = 16, c2 = 32;
    std::uint32_t n_out = 10;
    std::uint32_t timesteps = 2;
    double epsilon = 0.0;
    bool mask_readout = false;
    LifConfig lif;
    RateMode encode = RateMode::kAnalog;  // used for image inputs
    std::uint64_t encode_seed = 0;
  };

  TinyConvSnn(const Options& opt, std::uint64_t seed)
      : opt_(opt),
        shape1_{opt.in_c, opt.in_h, opt.in_w, opt.c1, 3, 1},
        shape2_{opt.c1, opt.in_h / 2, opt.in_w / 2, opt.c2, 3, 1},
        wc1_(shape1_.n_pre(), opt.c1),
        wc2_(shape2_.n_pre(), opt.c2),
        n_flat_(std::size_t(opt.c2) * (opt.in_h / 4) * (opt.in_w / 4)),
        wfc_(std::uint32_t(n_flat_), opt.n_out) {
    opt_.lif.validate();
    if (opt.in_h < 4 || opt.in_w < 4)
      throw std::invalid_argument("TinyConvSnn: input must be at least 4x4");
    if (opt.epsilon > 0.0) {
      ErdosRenyiConfig er{opt.epsilon};
      maskc1_ = er_init(shape1_.n_pre(), opt.c1, er, Rng::derive(seed, 101));
      everc1_ = detail::ever_active_from(*maskc1_);
      maskc2_ = er_init(shape2_.n_pre(), opt.c2, er, Rng::derive(seed, 102));
      everc2_ = detail::ever_active_from(*maskc2_);
      if (opt.mask_readout) {
        maskfc_ = er_init(std::uint32_t(n_flat_), opt.n_out, er, Rng::derive(seed, 103));
        everfc_ = detail::ever_active_from(*maskfc_);
      }
    }
  }

  std::string name() const override { return "tiny_conv"; }

  std::vector<LayerView> layers() override {
    std::vector<LayerView> out(3);
    out[0] = {"conv1", &wc1_, maskc1_ ? &*maskc1_ : nullptr,
              maskc1_ ? &everc1_ : nullptr,
              std::size_t(shape1_.out_h()) * shape1_.out_w()};
    out[1] = {"conv2", &wc2_, maskc2_ ? &*maskc2_ : nullptr,
              maskc2_ ? &everc2_ : nullptr,
              std::size_t(shape2_.out_h()) * shape2_.out_w()};
    out[2] = {"fc", &wfc_, maskfc_ ? &*maskfc_ : nullptr,
              maskfc_ ? &everfc_ : nullptr, 1};
    return out;
  }

  void init_weights(std::uint64_t seed) override {
    Rng rng(Rng::derive(seed, 301));
    detail::he_init_masked(wc1_, maskc1_ ? &*maskc1_ : nullptr, rng);
    detail::he_init_masked(wc2_, maskc2_ ? &*maskc2_ : nullptr, rng);
    detail::he_init_masked(wfc_, maskfc_ ? &*maskfc_ : nullptr, rng);
    enforce_masks();
  }

  double train_batch(const DataView& data, std::span<const std::uint32_t> idx,
                     std::vector<GradMatrix>& grads,
                     std::vector<GradMatrix>* dense_grads) override {
    const std::uint32_t T = opt_.timesteps;
    const double inv_n = 1.0 / double(idx.size());
    double loss_sum = 0.0;

    GradMatrix& gc1 = dense_grads ? (*dense_grads)[0] : grads[0];
    GradMatrix& gc2 = dense_grads ? (*dense_grads)[1] : grads[1];
    GradMatrix& gfc = dense_grads ? (*dense_grads)[2] : grads[2];

    const std::size_t s1 = shape1_.out_size();                 // conv1 map
    const std::size_t p1 = s1 / 4;                             // pooled conv1
    const std::size_t s2 = shape2_.out_size();                 // conv2 map
    State st;
    st.resize(T, s1, p1, s2, n_flat_, opt_.n_out);

    std::vector<double> gacc(opt_.n_out), gflat(n_flat_), ga2(s2), gu2(s2),
        gi2(s2), gp1(p1), ga1(s1), gu1(s1), gi1(s1);
    for (std::uint32_t sample : idx) {
      forward_sample(data, sample, st);
      TetLoss tl = tet_loss(st.readout, data.label(sample));
      loss_sum += tl.loss;

      std::fill(gacc.begin(), gacc.end(), 0.0);
      std::fill(gu1.begin(), gu1.end(), 0.0);
      std::fill(gu2.begin(), gu2.end(), 0.0);
      for (std::uint32_t t = T; t-- > 0;) {
        for (std::uint32_t k = 0; k < opt_.n_out; ++k) gacc[k] += inv_n * tl.grad[t][k];
        for (std::uint32_t k = 0; k < opt_.n_out; ++k) {
          double* grow = gfc.row(k);
          const double gk = gacc[k];
          for (std::size_t i = 0; i < n_flat_; ++i) grow[i] += gk * st.flat[t][i];
        }
        std::fill(gflat.begin(), gflat.end(), 0.0);
        for (std::uint32_t k = 0; k < opt_.n_out; ++k) {
          const double* wrow = wfc_.row(k);
          const double gk = gacc[k];
          for (std::size_t i = 0; i < n_flat_; ++i) gflat[i] += gk * wrow[i];
        }
        avg_pool2_backward(gflat, opt_.c2, shape2_.out_h(), shape2_.out_w(), ga2);
        for (std::size_t i = 0; i < s2; ++i) {
          const double gv = ga2[i] * surrogate_grad(st.v2[t][i] - opt_.lif.v_th, opt_.lif) +
                            gu2[i] * (1.0 - st.a2[t][i]);
          gu2[i] = opt_.lif.tau * gv;
          gi2[i] = gv;
        }
        conv2d_backward_weights(gi2, st.pool1[t], shape2_, gc2);
        conv2d_backward_input(gi2, shape2_, wc2_, gp1);
        avg_pool2_backward(gp1, opt_.c1, shape1_.out_h(), shape1_.out_w(), ga1);
        for (std::size_t i = 0; i < s1; ++i) {
          const double gv = ga1[i] * surrogate_grad(st.v1[t][i] - opt_.lif.v_th, opt_.lif) +
                            gu1[i] * (1.0 - st.a1[t][i]);
          gu1[i] = opt_.lif.tau * gv;
          gi1[i] = gv;
        }
        conv2d_backward_weights(gi1, st.frames[t], shape1_, gc1);
      }
    }
    if (dense_grads) {
      mask_copy(gc1, maskc1_ ? &*maskc1_ : nullptr, grads[0]);
      mask_copy(gc2, maskc2_ ? &*maskc2_ : nullptr, grads[1]);
      mask_copy(gfc, maskfc_ ? &*maskfc_ : nullptr, grads[2]);
    }
    return loss_sum * inv_n;
  }

  int predict(const DataView& data, std::size_t idx) override {
    State st;
    st.resize(opt_.timesteps, shape1_.out_size(), shape1_.out_size() / 4,
              shape2_.out_size(), n_flat_, opt_.n_out);
    forward_sample(data, idx, st);
    const auto& o = st.readout.back();
    int best = 0;
    for (std::size_t k = 1; k < o.size(); ++k)
      if (o[k] > o[best]) best = int(k);
    return best;
  }

  const ConvShape& conv1_shape() const { return shape1_; }
  const ConvShape& conv2_shape() const { return shape2_; }

 private:
  struct State {
    std::vector<std::vector<double>> frames, v1, a1, pool1, v2, a2, flat, readout;
    void resize(std::uint32_t t, std::size_t s1, std::size_t p1, std::size_t s2,
                std::size_t flat_n, std::size_t n_out) {
      frames.assign(t, {});
      v1.assign(t, std::vector<double>(s1));
      a1.assign(t, std::vector<double>(s1));
      pool1.assign(t, std::vector<double>(p1));
      v2.assign(t, std::vector<double>(s2));
      a2.assign(t, std::vector<double>(s2));
      flat.assign(t, std::vector<double>(flat_n));
      readout.assign(t, std::vector<double>(n_out));
    }
  };

  void forward_sample(const DataView& data, std::size_t idx, State& st) {
    const std::uint32_t T = opt_.timesteps;
    // Input frames: event samples are used as-is, images are direct-coded.
    if (data.events) {
      const auto& ev = *data.events;
      if (ev.c != opt_.in_c || ev.h != opt_.in_h || ev.w != opt_.in_w || ev.t < T)
        throw std::invalid_argument("TinyConvSnn: event shape mismatch");
      auto sample = ev.sample(idx);
      for (std::uint32_t t = 0; t < T; ++t) {
        st.frames[t].assign(ev.frame_size(), 0.0);
        for (std::size_t p = 0; p < ev.frame_size(); ++p)
          st.frames[t][p] = double(sample[t * ev.frame_size() + p]);
      }
    } else if (data.images) {
      auto img = data.images->image(idx);
      auto frames = encode_rate(img, T, opt_.encode,
                                Rng::derive(opt_.encode_seed, idx));
      for (std::uint32_t t = 0; t < T; ++t) st.frames[t] = std::move(frames[t]);
    } else {
      throw std::invalid_argument("TinyConvSnn: empty data view");
    }

    const std::size_t s1 = shape1_.out_size(), s2 = shape2_.out_size();
    std::vector<double> u1(s1, 0.0), u2(s2, 0.0), conv_out(std::max(s1, s2));
    std::vector<double> acc(opt_.n_out, 0.0), current(opt_.n_out);
    for (std::uint32_t t = 0; t < T; ++t) {
      conv2d_forward(st.frames[t], shape1_, wc1_, std::span(conv_out).first(s1));
      for (std::size_t i = 0; i < s1; ++i) {
        const double v = opt_.lif.tau * u1[i] + conv_out[i];
        const double a = v >= opt_.lif.v_th ? 1.0 : 0.0;
        st.v1[t][i] = v;
        st.a1[t][i] = a;
        u1[i] = v * (1.0 - a);
      }
      avg_pool2_forward(st.a1[t], opt_.c1, shape1_.out_h(), shape1_.out_w(), st.pool1[t]);
      conv2d_forward(st.pool1[t], shape2_, wc2_, std::span(conv_out).first(s2));
      for (std::size_t i = 0; i < s2; ++i) {
        const double v = opt_.lif.tau * u2[i] + conv_out[i];
        const double a = v >= opt_.lif.v_th ? 1.0 : 0.0;
        st.v2[t][i] = v;
        st.a2[t][i] = a;
        u2[i] = v * (1.0 - a);
      }
      avg_pool2_forward(st.a2[t], opt_.c2, shape2_.out_h(), shape2_.out_w(), st.flat[t]);
      masked_dense_forward(st.flat[t], wfc_, current);
      for (std::uint32_t k = 0; k < opt_.n_out; ++k) acc[k] += current[k];
      st.readout[t] = acc;
    }
  }

  static void mask_copy(const GradMatrix& dense, const SparseMask* mask,
                        GradMatrix& out) {
    if (!mask) {
      out.data() = dense.data();
      return;
    }
    const auto& bits = mask->bitmap();
    for (std::uint32_t i = 0; i < dense.n_pre(); ++i)
      for (std::uint32_t j = 0; j < dense.n_post(); ++j)
        out.at(i, j) = bits[std::size_t(i) * dense.n_post() + j] ? dense.at(i, j) : 0.0;
  }

  Options opt_;
  ConvShape shape1_, shape2_;
  WeightMatrix wc1_, wc2_;
  std::size_t n_flat_;
  WeightMatrix wfc_;
  std::optional<SparseMask> maskc1_, maskc2_, maskfc_;
  std::vector<std::uint8_t> everc1_, everc2_, everfc_;
};

}  // namespace eslsnn

#endif  // ESLSNN_NETWORKS_HPP
