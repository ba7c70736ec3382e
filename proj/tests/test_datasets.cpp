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

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "eslsnn/datasets.hpp"
#include "eslsnn/trainer.hpp"

using namespace eslsnn;

namespace {

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "eslsnn_test_datasets";
  std::filesystem::create_directories(dir);
  return dir;
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(b.data()), std::streamsize(b.size()));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void push_be32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(std::uint8_t(x >> 24));
  v.push_back(std::uint8_t(x >> 16));
  v.push_back(std::uint8_t(x >> 8));
  v.push_back(std::uint8_t(x));
}

// Builds a tiny IDX pair: n images of h x w with pixel value = index mod 256.
std::pair<std::filesystem::path, std::filesystem::path> make_idx(
    std::uint32_t n, std::uint32_t h, std::uint32_t w, const std::string& tag) {
  std::vector<std::uint8_t> img;
  push_be32(img, 0x803);
  push_be32(img, n);
  push_be32(img, h);
  push_be32(img, w);
  for (std::size_t p = 0; p < std::size_t(n) * h * w; ++p)
    img.push_back(std::uint8_t(p % 256));
  std::vector<std::uint8_t> lab;
  push_be32(lab, 0x801);
  push_be32(lab, n);
  for (std::uint32_t s = 0; s < n; ++s) lab.push_back(std::uint8_t(s % 10));
  const auto dir = temp_dir();
  const auto ip = dir / (tag + "-images"), lp = dir / (tag + "-labels");
  write_bytes(ip, img);
  write_bytes(lp, lab);
  return {ip, lp};
}

}  // namespace

TEST_CASE("IDX parsing and error paths") {
  SECTION("parses a well-formed pair") {
    const auto [ip, lp] = make_idx(7, 4, 5, "ok");
    const ImageDataset ds = load_mnist_idx(ip.string(), lp.string());
    REQUIRE(ds.size() == 7);
    REQUIRE(ds.height == 4);
    REQUIRE(ds.width == 5);
    REQUIRE(ds.pixels[0] == 0.0f);
    REQUIRE(ds.pixels[100] == Catch::Approx(100.0 / 255.0));
    REQUIRE(ds.labels[3] == 3);
  }
  SECTION("magic mismatch is a distinct error") {
    const auto [ip, lp] = make_idx(3, 2, 2, "magic");
    // Labels file passed where images are expected: magic 0x801 vs 0x803.
    REQUIRE_THROWS_WITH(load_mnist_idx(lp.string(), lp.string()),
                        Catch::Matchers::ContainsSubstring("magic"));
    // Images file passed as labels.
    REQUIRE_THROWS_WITH(load_mnist_idx(ip.string(), ip.string()),
                        Catch::Matchers::ContainsSubstring("magic"));
  }
  SECTION("truncated payload names the expected and actual byte counts") {
    const auto [ip, lp] = make_idx(3, 2, 2, "trunc");
    auto img = read_bytes(ip);
    img.resize(img.size() - 5);
    const auto bad = temp_dir() / "trunc-images-bad";
    write_bytes(bad, img);
    try {
      load_mnist_idx(bad.string(), lp.string());
      FAIL("expected a truncation error");
    } catch (const std::runtime_error& e) {
      const std::string msg = e.what();
      REQUIRE(msg.find("truncated") != std::string::npos);
      REQUIRE(msg.find("28") != std::string::npos);  // expected bytes
      REQUIRE(msg.find("23") != std::string::npos);  // actual bytes
    }
  }
  SECTION("image/label count mismatch") {
    const auto [ip, lp] = make_idx(3, 2, 2, "cnt_a");
    const auto [ip2, lp2] = make_idx(4, 2, 2, "cnt_b");
    (void)ip2;
    (void)lp;
    REQUIRE_THROWS_WITH(load_mnist_idx(ip.string(), lp2.string()),
                        Catch::Matchers::ContainsSubstring("count mismatch"));
  }
  SECTION("round-trip reproduces the original bytes") {
    const auto [ip, lp] = make_idx(5, 3, 4, "rt");
    const ImageDataset ds = load_mnist_idx(ip.string(), lp.string());
    const auto ip2 = temp_dir() / "rt-images-2", lp2 = temp_dir() / "rt-labels-2";
    save_mnist_idx(ds, ip2.string(), lp2.string());
    REQUIRE(read_bytes(ip2) == read_bytes(ip));
    REQUIRE(read_bytes(lp2) == read_bytes(lp));
  }
  SECTION("official train set has 60000 28x28 images when available") {
    const char* root = std::getenv("ESLSNN_DATA_DIR");
    if (!root) {
      SKIP("ESLSNN_DATA_DIR not set");
    }
    const ImageDataset ds =
        load_mnist_idx(std::string(root) + "/train-images-idx3-ubyte",
                       std::string(root) + "/train-labels-idx1-ubyte");
    REQUIRE(ds.size() == 60000);
    REQUIRE(ds.height == 28);
    REQUIRE(ds.width == 28);
  }
}

TEST_CASE("temporal encoder binarizes to first-spike times") {
  SECTION("all-white fires everywhere at z = 1") {
    std::vector<float> img(16, 1.0f);
    const ZSpikeVector z = encode_temporal(img);
    for (double v : z) REQUIRE(v == 1.0);
  }
  SECTION("all-black stays silent") {
    std::vector<float> img(16, 0.0f);
    const ZSpikeVector z = encode_temporal(img);
    for (double v : z) REQUIRE_FALSE(has_spike(v));
  }
  SECTION("checkerboard at threshold 0.5 spikes on exactly half") {
    std::vector<float> img(64);
    for (int p = 0; p < 64; ++p) img[p] = (p % 2 == 0) ? 0.9f : 0.1f;
    const ZSpikeVector z = encode_temporal(img, 0.5);
    std::size_t finite = 0;
    for (double v : z) finite += has_spike(v) ? 1 : 0;
    REQUIRE(finite == 32);  // counting oracle: pixels above threshold
  }
  SECTION("late-spike variant stamps off pixels at exp(t_late)") {
    std::vector<float> img = {0.9f, 0.1f};
    const ZSpikeVector z = encode_temporal(img, 0.5, 2.0);
    REQUIRE(z[0] == 1.0);
    REQUIRE(z[1] == Catch::Approx(std::exp(2.0)));
  }
  SECTION("purity: identical input, identical output") {
    std::vector<float> img = {0.2f, 0.7f, 0.5f};
    REQUIRE(encode_temporal(img) == encode_temporal(img));
  }
}

TEST_CASE("rate encoder") {
  SECTION("all-zero image gives an all-zero tensor") {
    std::vector<float> img(9, 0.0f);
    for (auto mode : {RateMode::kAnalog, RateMode::kBernoulli}) {
      const auto frames = encode_rate(img, 3, mode, 7);
      for (const auto& f : frames)
        for (double v : f) REQUIRE(v == 0.0);
    }
  }
  SECTION("analog mode repeats the image at every timestep") {
    std::vector<float> img = {0.1f, 0.6f, 0.9f};
    const auto frames = encode_rate(img, 4, RateMode::kAnalog);
    REQUIRE(frames.size() == 4);
    for (const auto& f : frames)
      for (std::size_t p = 0; p < img.size(); ++p)
        REQUIRE(f[p] == Catch::Approx(double(img[p])));
  }
  SECTION("bernoulli mode with pixel 1.0 spikes at every timestep") {
    std::vector<float> img = {1.0f, 1.0f};
    const auto frames = encode_rate(img, 5, RateMode::kBernoulli, 3);
    for (const auto& f : frames)
      for (double v : f) REQUIRE(v == 1.0);
  }
  SECTION("bernoulli mode is deterministic in the seed") {
    std::vector<float> img = {0.3f, 0.6f, 0.5f, 0.2f};
    REQUIRE(encode_rate(img, 6, RateMode::kBernoulli, 11) ==
            encode_rate(img, 6, RateMode::kBernoulli, 11));
  }
}

TEST_CASE("synthetic event streams") {
  SECTION("deterministic in the seed") {
    const EventDataset a = synthetic_events(3, 4, 5, 8, 8, 42);
    const EventDataset b = synthetic_events(3, 4, 5, 8, 8, 42);
    REQUIRE(a.data == b.data);
    REQUIRE(a.labels == b.labels);
  }
  SECTION("zero noise reproduces the class template exactly") {
    const EventDataset ds = synthetic_events(2, 2, 4, 8, 8, 9, 0.0);
    // Both samples of a class are identical without noise.
    REQUIRE(std::equal(ds.sample(0).begin(), ds.sample(0).end(),
                       ds.sample(1).begin()));
    // A vertical bar lights exactly h cells per frame.
    for (std::uint32_t t = 0; t < 4; ++t) {
      std::size_t lit = 0;
      for (std::size_t p = 0; p < ds.frame_size(); ++p)
        lit += ds.sample(0)[t * ds.frame_size() + p];
      REQUIRE(lit == 8);
    }
  }
  SECTION("paired classes are identical after collapsing time") {
    const EventDataset ds = synthetic_events(1, 2, 4, 8, 8, 1, 0.0);
    std::vector<int> sum0(ds.frame_size(), 0), sum1(ds.frame_size(), 0);
    for (std::uint32_t t = 0; t < 4; ++t)
      for (std::size_t p = 0; p < ds.frame_size(); ++p) {
        sum0[p] += ds.sample(0)[t * ds.frame_size() + p];
        sum1[p] += ds.sample(1)[t * ds.frame_size() + p];
      }
    REQUIRE(sum0 == sum1);  // only the traversal order differs
    // But the per-frame patterns differ.
    REQUIRE_FALSE(std::equal(ds.sample(0).begin(), ds.sample(0).end(),
                             ds.sample(1).begin()));
  }
  SECTION("save/load round trip") {
    const EventDataset ds = synthetic_events(4, 3, 4, 6, 6, 77);
    const auto path = (temp_dir() / "events.eslsnn").string();
    save_event_dataset(ds, path);
    const EventDataset back = load_event_dataset(path);
    REQUIRE(back.t == ds.t);
    REQUIRE(back.c == ds.c);
    REQUIRE(back.h == ds.h);
    REQUIRE(back.w == ds.w);
    REQUIRE(back.data == ds.data);
    REQUIRE(back.labels == ds.labels);
  }
  SECTION("rejects degenerate parameters") {
    REQUIRE_THROWS_AS(synthetic_events(0, 2, 4, 8, 8, 1), std::invalid_argument);
    REQUIRE_THROWS_AS(synthetic_events(2, 0, 4, 8, 8, 1), std::invalid_argument);
  }
}

namespace {

// Multinomial logistic regression on time-collapsed frames: full-batch
// gradient descent, run to convergence. The baseline that only sees the
// temporal sum.
double logistic_baseline_accuracy(const EventDataset& train, const EventDataset& test) {
  const std::size_t d = train.frame_size();
  const int k = 2;
  auto collapse = [&](const EventDataset& ds, std::size_t idx) {
    std::vector<double> x(d, 0.0);
    auto s = ds.sample(idx);
    for (std::uint32_t t = 0; t < ds.t; ++t)
      for (std::size_t p = 0; p < d; ++p) x[p] += s[t * d + p];
    return x;
  };
  std::vector<double> w(d * k, 0.0), b(k, 0.0);
  for (int step = 0; step < 400; ++step) {
    std::vector<double> gw(d * k, 0.0), gb(k, 0.0);
    for (std::size_t s = 0; s < train.size(); ++s) {
      const auto x = collapse(train, s);
      std::vector<double> logits(k, 0.0);
      for (int c = 0; c < k; ++c) {
        logits[c] = b[c];
        for (std::size_t p = 0; p < d; ++p) logits[c] += w[p * k + c] * x[p];
      }
      const double m = std::max(logits[0], logits[1]);
      double z = 0.0;
      for (int c = 0; c < k; ++c) z += std::exp(logits[c] - m);
      for (int c = 0; c < k; ++c) {
        const double g = std::exp(logits[c] - m) / z - (train.labels[s] == c ? 1 : 0);
        gb[c] += g;
        for (std::size_t p = 0; p < d; ++p) gw[p * k + c] += g * x[p];
      }
    }
    const double lr = 0.05 / double(train.size());
    for (std::size_t p = 0; p < w.size(); ++p) w[p] -= lr * gw[p];
    for (int c = 0; c < k; ++c) b[c] -= lr * gb[c];
  }
  std::size_t correct = 0;
  for (std::size_t s = 0; s < test.size(); ++s) {
    const auto x = collapse(test, s);
    std::vector<double> logits(k, 0.0);
    for (int c = 0; c < k; ++c) {
      logits[c] = b[c];
      for (std::size_t p = 0; p < d; ++p) logits[c] += w[p * k + c] * x[p];
    }
    correct += (logits[1] > logits[0] ? 1 : 0) == test.labels[s];
  }
  return double(correct) / double(test.size());
}

}  // namespace

TEST_CASE("temporal structure separates classes that time-collapse together") {
  const EventDataset train_ds = synthetic_events(150, 2, 4, 8, 8, 101);
  const EventDataset test_ds = synthetic_events(60, 2, 4, 8, 8, 202);

  const double baseline = logistic_baseline_accuracy(train_ds, test_ds);
  REQUIRE(baseline < 0.95);  // the collapsed view is ambiguous

  TrainingConfig cfg;
  cfg.model = ModelPreset::kTinyConv;
  cfg.epochs = 12;
  cfg.batch_size = 15;
  cfg.lr_schedule = LrSchedule::Kind::kConstant;
  cfg.lr_start = 1e-3;
  cfg.epsilon = 0.0;
  cfg.alpha = 0.0;
  cfg.seed = 5;
  cfg.timesteps = 4;
  cfg.in_c = 1;
  cfg.in_h = 8;
  cfg.in_w = 8;
  cfg.grad_clip = 1.0;
  DataView train_view{nullptr, &train_ds};
  DataView test_view{nullptr, &test_ds};
  const TrainResult tr = train(cfg, train_view);
  const double conv_acc = evaluate(tr.checkpoint, test_view).accuracy;
  INFO("baseline " << baseline << " conv " << conv_acc);
  REQUIRE(conv_acc > 0.95);
  REQUIRE(conv_acc > baseline);
}
