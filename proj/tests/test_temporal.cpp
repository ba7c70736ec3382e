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

#include <cmath>
#include <limits>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "eslsnn/temporal.hpp"

using namespace eslsnn;

namespace {

// Dense time-stepped integrator of the membrane
//   V(t) = sum_i H(t - t_i) w_i (1 - exp(-(t - t_i))),
// independent of the z-domain path. Returns the first grid time with
// V >= 1, or infinity.
double integrate_first_spike(const std::vector<double>& t_in,
                             const std::vector<double>& w, double dt = 1e-4,
                             double t_max = 12.0) {
  for (double t = 0.0; t <= t_max; t += dt) {
    double v = 0.0;
    for (std::size_t i = 0; i < t_in.size(); ++i)
      if (t_in[i] <= t) v += w[i] * (1.0 - std::exp(-(t - t_in[i])));
    if (v >= 1.0) return t;
  }
  return std::numeric_limits<double>::infinity();
}

TemporalLayer make_layer(std::uint32_t n_pre, std::uint32_t n_post,
                         const std::vector<double>& w_row_major) {
  TemporalLayer layer(n_pre, n_post);
  for (std::uint32_t i = 0; i < n_pre; ++i)
    for (std::uint32_t j = 0; j < n_post; ++j)
      layer.weights.at(i, j) = w_row_major[i * n_post + j];
  return layer;
}

}  // namespace

TEST_CASE("forward_layer solves the threshold crossing") {
  SECTION("single input at z=1 with weight 2 fires at z=2") {
    TemporalLayer layer = make_layer(1, 1, {2.0});
    LayerForward fwd;
    forward_layer(std::vector<double>{1.0}, layer, fwd);
    REQUIRE(fwd.z_out[0] == Catch::Approx(2.0));
    // Against Eq.: V(ln 2) = 2 (1 - e^{-ln 2}) = 1.
    const double t_j = std::log(fwd.z_out[0]);
    REQUIRE(2.0 * (1.0 - std::exp(-t_j)) == Catch::Approx(1.0));
    const double t_hat = integrate_first_spike({0.0}, {2.0});
    REQUIRE(std::fabs(t_j - t_hat) < 1e-3);
  }
  SECTION("sub-threshold drive never fires") {
    TemporalLayer layer = make_layer(1, 1, {0.5});
    LayerForward fwd;
    forward_layer(std::vector<double>{1.0}, layer, fwd);
    REQUIRE_FALSE(has_spike(fwd.z_out[0]));
    REQUIRE(fwd.causal.of(0).empty());
  }
  SECTION("two staggered inputs need the full prefix") {
    TemporalLayer layer = make_layer(2, 1, {0.8, 0.8});
    LayerForward fwd;
    forward_layer(std::vector<double>{1.0, 2.0}, layer, fwd);
    REQUIRE(fwd.z_out[0] == Catch::Approx(4.0));
    REQUIRE(fwd.causal.of(0).size() == 2);
    const double t_hat = integrate_first_spike({0.0, std::log(2.0)}, {0.8, 0.8});
    REQUIRE(std::fabs(std::log(4.0) - t_hat) < 1e-3);
  }
  SECTION("matches the integrator on 200 random small layers") {
    Rng rng(2024);
    int fired = 0;
    for (int trial = 0; trial < 200; ++trial) {
      const std::uint32_t n_in = 2 + std::uint32_t(rng.uniform_below(5));
      const std::uint32_t n_out = 1 + std::uint32_t(rng.uniform_below(3));
      std::vector<double> z_in(n_in), t_in(n_in);
      for (std::uint32_t i = 0; i < n_in; ++i) {
        t_in[i] = rng.uniform(0.0, 1.5);
        z_in[i] = std::exp(t_in[i]);
      }
      TemporalLayer layer(n_in, n_out);
      for (std::uint32_t i = 0; i < n_in; ++i)
        for (std::uint32_t j = 0; j < n_out; ++j)
          layer.weights.at(i, j) = rng.uniform(-0.3, 1.2);
      LayerForward fwd;
      forward_layer(z_in, layer, fwd);
      for (std::uint32_t j = 0; j < n_out; ++j) {
        std::vector<double> w(n_in);
        for (std::uint32_t i = 0; i < n_in; ++i) w[i] = layer.weights.at(i, j);
        const double t_hat = integrate_first_spike(t_in, w);
        if (has_spike(fwd.z_out[j])) {
          ++fired;
          REQUIRE(std::isfinite(t_hat));
          REQUIRE(std::fabs(std::log(fwd.z_out[j]) - t_hat) < 1e-3);
        } else {
          REQUIRE(std::isinf(t_hat));
        }
      }
    }
    REQUIRE(fired > 100);  // the generator must actually exercise firing
  }
  SECTION("causal members always precede the output spike") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<double> z_in(6);
      for (auto& z : z_in) z = std::exp(rng.uniform(0.0, 2.0));
      TemporalLayer layer(6, 4);
      for (std::uint32_t i = 0; i < 6; ++i)
        for (std::uint32_t j = 0; j < 4; ++j)
          layer.weights.at(i, j) = rng.uniform(-0.2, 0.9);
      LayerForward fwd;
      forward_layer(z_in, layer, fwd);
      for (std::uint32_t j = 0; j < 4; ++j) {
        if (!has_spike(fwd.z_out[j])) continue;
        REQUIRE(fwd.causal.sum_w[j] > 1.0 + kCausalEpsilon);
        for (std::uint32_t i : fwd.causal.of(j)) REQUIRE(z_in[i] <= fwd.z_out[j]);
      }
    }
  }
  SECTION("a zero-weight input never changes the output") {
    std::vector<double> z_in = {1.0, 1.3, 2.2};
    TemporalLayer layer = make_layer(3, 2, {0.9, 0.1, 0.6, 0.4, 0.5, 0.8});
    LayerForward fwd;
    forward_layer(z_in, layer, fwd);

    // Same layer plus one extra input with weight 0 spiking early.
    TemporalLayer wide(4, 2);
    for (std::uint32_t i = 0; i < 3; ++i)
      for (std::uint32_t j = 0; j < 2; ++j) wide.weights.at(i, j) = layer.weights.at(i, j);
    std::vector<double> z_wide = {1.0, 1.3, 2.2, 1.1};
    LayerForward fwd_wide;
    forward_layer(z_wide, wide, fwd_wide);
    for (std::uint32_t j = 0; j < 2; ++j)
      REQUIRE(fwd.z_out[j] == Catch::Approx(fwd_wide.z_out[j]).epsilon(1e-12));
  }
}

TEST_CASE("backward_layer computes exact spike-time gradients") {
  SECTION("single input, dz/dw = -1") {
    TemporalLayer layer = make_layer(1, 1, {2.0});
    LayerForward fwd;
    std::vector<double> z_in = {1.0};
    forward_layer(z_in, layer, fwd);
    GradMatrix g(1, 1);
    std::vector<double> gz_in;
    backward_layer(std::vector<double>{1.0}, z_in, fwd, layer, g, &gz_in);
    REQUIRE(g.at(0, 0) == Catch::Approx(-1.0));
    // Central finite difference.
    const double h = 1e-5;
    LayerForward lo, hi;
    TemporalLayer lp = make_layer(1, 1, {2.0 + h});
    TemporalLayer lm = make_layer(1, 1, {2.0 - h});
    forward_layer(z_in, lp, hi);
    forward_layer(z_in, lm, lo);
    const double fd = (hi.z_out[0] - lo.z_out[0]) / (2 * h);
    REQUIRE(std::fabs(g.at(0, 0) - fd) / std::fabs(fd) < 1e-4);
  }
  SECTION("non-causal inputs get zero gradient") {
    // Second input arrives after the output fires.
    TemporalLayer layer = make_layer(2, 1, {3.0, 1.0});
    std::vector<double> z_in = {1.0, 10.0};
    LayerForward fwd;
    forward_layer(z_in, layer, fwd);
    REQUIRE(fwd.z_out[0] == Catch::Approx(1.5));
    GradMatrix g(2, 1);
    std::vector<double> gz_in;
    backward_layer(std::vector<double>{1.0}, z_in, fwd, layer, g, &gz_in);
    REQUIRE(g.at(1, 0) == 0.0);
    REQUIRE(gz_in[1] == 0.0);
  }
  SECTION("random 5x3 Jacobian matches finite differences") {
    Rng rng(55);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
      std::vector<double> z_in(5);
      for (auto& z : z_in) z = std::exp(rng.uniform(0.0, 1.0));
      std::vector<double> w(5 * 3);
      for (auto& x : w) x = rng.uniform(0.0, 0.7);
      TemporalLayer layer = make_layer(5, 3, w);
      LayerForward fwd;
      forward_layer(z_in, layer, fwd);
      bool all_fire = true;
      for (double z : fwd.z_out) all_fire &= has_spike(z);
      if (!all_fire) continue;

      for (std::uint32_t j = 0; j < 3; ++j) {
        std::vector<double> gz(3, 0.0);
        gz[j] = 1.0;
        GradMatrix g(5, 3);
        std::vector<double> gz_in;
        backward_layer(gz, z_in, fwd, layer, g, &gz_in);
        const double h = 1e-5;
        for (std::uint32_t i = 0; i < 5; ++i) {
          // d z_j / d w_ij
          auto wp = w, wm = w;
          wp[i * 3 + j] += h;
          wm[i * 3 + j] -= h;
          LayerForward fp, fm;
          TemporalLayer lp = make_layer(5, 3, wp);
          TemporalLayer lm = make_layer(5, 3, wm);
          forward_layer(z_in, lp, fp);
          forward_layer(z_in, lm, fm);
          const double fd_w = (fp.z_out[j] - fm.z_out[j]) / (2 * h);
          const double scale = std::max(1.0, std::fabs(fd_w));
          REQUIRE(std::fabs(g.at(i, j) - fd_w) / scale < 1e-4);
          // d z_j / d z_i
          auto zp = z_in, zm = z_in;
          zp[i] += h;
          zm[i] -= h;
          forward_layer(zp, layer, fp);
          forward_layer(zm, layer, fm);
          const double fd_z = (fp.z_out[j] - fm.z_out[j]) / (2 * h);
          const double scale_z = std::max(1.0, std::fabs(fd_z));
          REQUIRE(std::fabs(gz_in[i] - fd_z) / scale_z < 1e-4);
          ++checked;
        }
      }
    }
    REQUIRE(checked >= 15 * 10);
  }
  SECTION("masked-out weights receive no gradient or forward contribution") {
    SparseMask mask(4, 2);
    mask.assign({{0, 0}, {1, 0}, {2, 1}, {3, 1}});
    TemporalLayer layer(4, 2);
    layer.mask = mask;
    layer.weights.at(0, 0) = 1.5;
    layer.weights.at(1, 0) = 0.7;
    layer.weights.at(2, 1) = 1.2;
    layer.weights.at(3, 1) = 0.9;
    std::vector<double> z_in = {1.0, 1.2, 1.0, 1.4};
    LayerForward fwd;
    forward_layer(z_in, layer, fwd);
    // Output 0 must ignore inputs 2 and 3 entirely.
    TemporalLayer only01 = make_layer(2, 1, {1.5, 0.7});
    LayerForward fwd01;
    forward_layer(std::vector<double>{1.0, 1.2}, only01, fwd01);
    REQUIRE(fwd.z_out[0] == Catch::Approx(fwd01.z_out[0]));

    GradMatrix g(4, 2);
    backward_layer(std::vector<double>{1.0, 1.0}, z_in, fwd, layer, g, nullptr);
    REQUIRE(g.at(2, 0) == 0.0);
    REQUIRE(g.at(3, 0) == 0.0);
    REQUIRE(g.at(0, 1) == 0.0);
    REQUIRE(g.at(1, 1) == 0.0);
  }
  SECTION("dense gradients equal an unmasked twin's causal gradients") {
    SparseMask mask(5, 2);
    mask.assign({{0, 0}, {1, 0}, {4, 0}, {1, 1}, {2, 1}, {3, 1}});
    TemporalLayer masked(5, 2);
    masked.mask = mask;
    Rng rng(91);
    for (const auto& [i, j] : mask.active()) masked.weights.at(i, j) = rng.uniform(0.2, 0.8);
    // Twin without a mask but identical (zero-filled) weights.
    TemporalLayer twin(5, 2);
    twin.weights = masked.weights;

    std::vector<double> z_in = {1.0, 1.1, 1.7, 1.3, 2.4};
    LayerForward fm, ft;
    forward_layer(z_in, masked, fm);
    forward_layer(z_in, twin, ft);
    for (int j = 0; j < 2; ++j)
      REQUIRE(fm.z_out[j] == Catch::Approx(ft.z_out[j]).epsilon(1e-12));

    std::vector<double> gz = {0.7, -0.4};
    GradMatrix dense(5, 2), twin_g(5, 2);
    dense_weight_gradients(gz, fm, dense);
    backward_layer(gz, z_in, ft, twin, twin_g, nullptr);
    for (std::uint32_t i = 0; i < 5; ++i)
      for (std::uint32_t j = 0; j < 2; ++j)
        REQUIRE(dense.at(i, j) == Catch::Approx(twin_g.at(i, j)).margin(1e-12));
  }
}

TEST_CASE("z_loss is a stable softmax over negative spike times") {
  SECTION("uniform outputs give ln(n)") {
    std::vector<double> z(10, 3.0);
    const ZLoss l = z_loss(z, 4);
    REQUIRE(l.loss == Catch::Approx(std::log(10.0)).epsilon(1e-12));
  }
  SECTION("a much earlier target saturates to zero loss") {
    std::vector<double> z = {1.0, 60.0, 55.0};
    const ZLoss l = z_loss(z, 0);
    REQUIRE(l.loss < 1e-8);
  }
  SECTION("hand-computed two-class value") {
    const ZLoss l = z_loss(std::vector<double>{1.0, 2.0}, 0);
    REQUIRE(l.loss == Catch::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-12));
    REQUIRE(l.loss == Catch::Approx(0.313262).margin(1e-6));
  }
  SECTION("non-firing entries enter as Z_MAX") {
    std::vector<double> z = {2.0, kNoSpike};
    const ZLoss l = z_loss(z, 1);
    REQUIRE(std::isfinite(l.loss));
    REQUIRE(l.loss == Catch::Approx(kZMax - 2.0).epsilon(1e-9));
  }
  SECTION("gradient sums to zero and matches finite differences") {
    std::vector<double> z = {1.4, 2.0, 1.1, 3.5};
    const ZLoss l = z_loss(z, 2);
    double sum = 0.0;
    for (double g : l.grad) sum += g;
    REQUIRE(sum == Catch::Approx(0.0).margin(1e-12));
    const double h = 1e-6;
    for (std::size_t k = 0; k < z.size(); ++k) {
      auto zp = z, zm = z;
      zp[k] += h;
      zm[k] -= h;
      const double fd = (z_loss(zp, 2).loss - z_loss(zm, 2).loss) / (2 * h);
      REQUIRE(l.grad[k] == Catch::Approx(fd).margin(1e-6));
    }
  }
  SECTION("rejects an out-of-range class") {
    REQUIRE_THROWS_AS(z_loss(std::vector<double>{1.0}, 3), std::invalid_argument);
  }
}

TEST_CASE("loss gradients through two layers match finite differences") {
  Rng rng(123);
  int instances = 0;
  while (instances < 100) {
    std::vector<double> z_in(6);
    for (auto& z : z_in) z = rng.uniform() < 0.3 ? kNoSpike : std::exp(rng.uniform(0.0, 0.8));
    std::vector<double> w1(6 * 4), w2(4 * 3);
    for (auto& x : w1) x = rng.uniform(0.0, 0.9);
    for (auto& x : w2) x = rng.uniform(0.0, 1.1);
    TemporalLayer l1 = make_layer(6, 4, w1);
    TemporalLayer l2 = make_layer(4, 3, w2);
    const std::size_t target = rng.uniform_below(3);

    auto loss_of = [&](const std::vector<double>& a, const std::vector<double>& b) {
      TemporalLayer la = make_layer(6, 4, a);
      TemporalLayer lb = make_layer(4, 3, b);
      LayerForward f1, f2;
      forward_layer(z_in, la, f1);
      forward_layer(f1.z_out, lb, f2);
      return z_loss(f2.z_out, target).loss;
    };

    LayerForward f1, f2;
    forward_layer(z_in, l1, f1);
    forward_layer(f1.z_out, l2, f2);
    bool out_fire = true;
    for (double z : f2.z_out) out_fire &= has_spike(z);
    if (!out_fire) continue;
    ++instances;

    ZLoss zl = z_loss(f2.z_out, target);
    GradMatrix g1(6, 4), g2(4, 3);
    std::vector<double> gz1;
    backward_layer(zl.grad, f1.z_out, f2, l2, g2, &gz1);
    backward_layer(gz1, z_in, f1, l1, g1, nullptr);

    const double h = 1e-5;
    auto check = [&](double analytic, double fd) {
      const double scale = std::max(1.0, std::fabs(fd));
      REQUIRE(std::fabs(analytic - fd) / scale < 1e-4);
    };
    // Spot-check a handful of weights per instance to keep runtime sane.
    for (int probe = 0; probe < 6; ++probe) {
      const std::size_t p1 = rng.uniform_below(w1.size());
      auto wp = w1, wm = w1;
      wp[p1] += h;
      wm[p1] -= h;
      check(g1.at(std::uint32_t(p1 / 4), std::uint32_t(p1 % 4)),
            (loss_of(wp, w2) - loss_of(wm, w2)) / (2 * h));
      const std::size_t p2 = rng.uniform_below(w2.size());
      auto vp = w2, vm = w2;
      vp[p2] += h;
      vm[p2] -= h;
      check(g2.at(std::uint32_t(p2 / 3), std::uint32_t(p2 % 3)),
            (loss_of(w1, vp) - loss_of(w1, vm)) / (2 * h));
    }
  }
}

TEST_CASE("weight-sum regularizer pressures silent neurons") {
  TemporalLayer layer = make_layer(2, 2, {0.3, 1.2, 0.2, 0.4});
  // Column sums: output 0 -> 0.5 (below 1), output 1 -> 1.6 (above).
  GradMatrix g(2, 2);
  const double penalty = weight_sum_regularizer(layer, 0.01, g);
  REQUIRE(penalty == Catch::Approx(0.01 * 0.5));
  REQUIRE(g.at(0, 0) == Catch::Approx(-0.01));
  REQUIRE(g.at(1, 0) == Catch::Approx(-0.01));
  REQUIRE(g.at(0, 1) == 0.0);
  REQUIRE(g.at(1, 1) == 0.0);
}
