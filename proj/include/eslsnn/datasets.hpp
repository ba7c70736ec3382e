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

#ifndef ESLSNN_DATASETS_HPP
#define ESLSNN_DATASETS_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eslsnn/io.hpp"
#include "eslsnn/rng.hpp"
#include "eslsnn/temporal.hpp"

namespace eslsnn {

// Grayscale image classification set; pixels normalized to [0, 1].
struct ImageDataset {
  std::uint32_t height = 28, width = 28;
  std::vector<float> pixels;         // n * height * width
  std::vector<std::uint8_t> labels;  // n class indices

  std::size_t size() const { return labels.size(); }
  std::size_t image_size() const { return std::size_t(height) * width; }
  std::span<const float> image(std::size_t idx) const {
    return {pixels.data() + idx * image_size(), image_size()};
  }
};

// Binary spatio-temporal event streams, shape T x C x H x W per sample.
struct EventDataset {
  std::uint32_t t = 0, c = 0, h = 0, w = 0;
  std::vector<std::uint8_t> data;  // n * t * c * h * w, entries in {0, 1}
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  std::size_t sample_size() const { return std::size_t(t) * c * h * w; }
  std::size_t frame_size() const { return std::size_t(c) * h * w; }
  std::span<const std::uint8_t> sample(std::size_t idx) const {
    return {data.data() + idx * sample_size(), sample_size()};
  }
};

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& buf, std::size_t off) {
  return std::uint32_t(buf[off]) << 24 | std::uint32_t(buf[off + 1]) << 16 |
         std::uint32_t(buf[off + 2]) << 8 | std::uint32_t(buf[off + 3]);
}

inline void write_be32(std::ofstream& out, std::uint32_t v) {
  const char b[4] = {char(v >> 24), char(v >> 16), char(v >> 8), char(v)};
  out.write(b, 4);
}

}  // namespace detail

// Parses the IDX image/label pair: big-endian magic 0x803 (images) or 0x801
// (labels), dimension sizes, then raw bytes. Pixels are divided by 255.
inline ImageDataset load_mnist_idx(const std::string& images_path,
                                   const std::string& labels_path) {
  const auto img = detail::read_file(images_path);
  const auto lab = detail::read_file(labels_path);
  if (img.size() < 16)
    throw std::runtime_error("IDX image file truncated header: " + images_path);
  if (lab.size() < 8)
    throw std::runtime_error("IDX label file truncated header: " + labels_path);

  const std::uint32_t img_magic = detail::read_be32(img, 0);
  if (img_magic != 0x00000803)
    throw std::runtime_error("IDX magic mismatch in " + images_path +
                             ": expected 0x803, got 0x" + std::to_string(img_magic));
  const std::uint32_t lab_magic = detail::read_be32(lab, 0);
  if (lab_magic != 0x00000801)
    throw std::runtime_error("IDX magic mismatch in " + labels_path +
                             ": expected 0x801, got 0x" + std::to_string(lab_magic));

  ImageDataset ds;
  const std::uint32_t n_img = detail::read_be32(img, 4);
  ds.height = detail::read_be32(img, 8);
  ds.width = detail::read_be32(img, 12);
  const std::uint32_t n_lab = detail::read_be32(lab, 4);
  if (n_img != n_lab)
    throw std::runtime_error("IDX image/label count mismatch: " +
                             std::to_string(n_img) + " vs " + std::to_string(n_lab));

  const std::size_t want_img = 16 + std::size_t(n_img) * ds.height * ds.width;
  if (img.size() != want_img)
    throw std::runtime_error("IDX image payload truncated: expected " +
                             std::to_string(want_img) + " bytes, got " +
                             std::to_string(img.size()));
  const std::size_t want_lab = 8 + std::size_t(n_lab);
  if (lab.size() != want_lab)
    throw std::runtime_error("IDX label payload truncated: expected " +
                             std::to_string(want_lab) + " bytes, got " +
                             std::to_string(lab.size()));

  ds.pixels.resize(std::size_t(n_img) * ds.height * ds.width);
  for (std::size_t p = 0; p < ds.pixels.size(); ++p)
    ds.pixels[p] = float(img[16 + p]) / 255.0f;
  ds.labels.assign(lab.begin() + 8, lab.end());
  return ds;
}

// Inverse of load_mnist_idx; a parsed-then-saved pair is byte-identical to
// the original files.
inline void save_mnist_idx(const ImageDataset& ds, const std::string& images_path,
                           const std::string& labels_path) {
  std::ofstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("cannot write file: " + images_path);
  detail::write_be32(img, 0x00000803);
  detail::write_be32(img, std::uint32_t(ds.size()));
  detail::write_be32(img, ds.height);
  detail::write_be32(img, ds.width);
  for (float p : ds.pixels) img.put(char(std::lround(p * 255.0f)));

  std::ofstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("cannot write file: " + labels_path);
  detail::write_be32(lab, 0x00000801);
  detail::write_be32(lab, std::uint32_t(ds.size()));
  for (std::uint8_t y : ds.labels) lab.put(char(y));
}

// Binarizing temporal encoder: pixels above the threshold spike at t = 0
// (z = 1); the rest stay silent, or spike at t_late when t_late > 0.
inline ZSpikeVector encode_temporal(std::span<const float> image,
                                    double threshold = 0.5, double t_late = 0.0) {
  ZSpikeVector z(image.size());
  const double z_late = t_late > 0.0 ? std::exp(t_late) : kNoSpike;
  for (std::size_t p = 0; p < image.size(); ++p)
    z[p] = image[p] > threshold ? 1.0 : z_late;
  return z;
}

enum class RateMode { kAnalog, kBernoulli };

// Direct-coding encoder: either the analog pixel value repeated T times or
// a seeded Bernoulli(pixel) draw per timestep. Output is T x (H*W).
inline std::vector<std::vector<double>> encode_rate(std::span<const float> image,
                                                    std::uint32_t timesteps,
                                                    RateMode mode = RateMode::kAnalog,
                                                    std::uint64_t seed = 0) {
  std::vector<std::vector<double>> frames(timesteps,
                                          std::vector<double>(image.size()));
  if (mode == RateMode::kAnalog) {
    for (auto& f : frames)
      for (std::size_t p = 0; p < image.size(); ++p) f[p] = image[p];
  } else {
    Rng rng(seed);
    for (auto& f : frames)
      for (std::size_t p = 0; p < image.size(); ++p)
        f[p] = rng.uniform() < image[p] ? 1.0 : 0.0;
  }
  return frames;
}

// Deterministic stand-in for an event-camera dataset: class c is a bar
// sweeping across the frame, wrapping modulo the frame size. Classes come
// in direction pairs (2m, 2m+1) that cover exactly the same cells over the
// full clip and differ only in traversal order, so they are separable
// through temporal structure but not from time-collapsed frames. A seeded
// 2% of entries are flipped as noise.
inline EventDataset synthetic_events(std::uint32_t n_per_class,
                                     std::uint32_t n_classes, std::uint32_t t,
                                     std::uint32_t h, std::uint32_t w,
                                     std::uint64_t seed, double noise_rate = 0.02) {
  if (n_per_class == 0 || n_classes == 0 || t == 0 || h == 0 || w == 0)
    throw std::invalid_argument("synthetic_events: all sizes must be positive");
  EventDataset ds;
  ds.t = t;
  ds.c = 1;
  ds.h = h;
  ds.w = w;
  const std::size_t n = std::size_t(n_per_class) * n_classes;
  ds.data.assign(n * ds.sample_size(), 0);
  ds.labels.resize(n);

  for (std::uint32_t cls = 0; cls < n_classes; ++cls) {
    const std::uint32_t pair = cls / 2;
    const bool backward = (cls % 2) == 1;
    const bool horizontal = (pair % 2) == 1;  // bar orientation alternates
    const std::uint32_t extent = horizontal ? h : w;
    const std::uint32_t phase = (pair / 2 * 3 + pair) % extent;
    for (std::uint32_t s = 0; s < n_per_class; ++s) {
      const std::size_t idx = std::size_t(cls) * n_per_class + s;
      ds.labels[idx] = std::uint8_t(cls);
      std::uint8_t* sample = ds.data.data() + idx * ds.sample_size();
      for (std::uint32_t step = 0; step < t; ++step) {
        const std::uint32_t offset = backward ? t - 1 - step : step;
        const std::uint32_t pos = (phase + offset) % extent;
        std::uint8_t* frame = sample + std::size_t(step) * ds.frame_size();
        if (horizontal) {
          for (std::uint32_t x = 0; x < w; ++x) frame[std::size_t(pos) * w + x] = 1;
        } else {
          for (std::uint32_t y = 0; y < h; ++y) frame[std::size_t(y) * w + pos] = 1;
        }
      }
      if (noise_rate > 0.0) {
        Rng rng(Rng::derive(seed, idx));
        for (std::size_t p = 0; p < ds.sample_size(); ++p)
          if (rng.uniform() < noise_rate) sample[p] ^= 1;
      }
    }
  }
  return ds;
}

// Event datasets are stored in the shared ESLSNN1 section container with a
// shape header.
inline void save_event_dataset(const EventDataset& ds, const std::string& path) {
  io::SectionList sections;
  {
    io::Writer w;
    w.u32(std::uint32_t(ds.size()));
    w.u32(ds.t);
    w.u32(ds.c);
    w.u32(ds.h);
    w.u32(ds.w);
    sections.emplace_back("events/shape", w.data());
  }
  {
    io::Writer w;
    w.bytes(ds.labels.data(), ds.labels.size());
    sections.emplace_back("events/labels", w.data());
  }
  {
    io::Writer w;
    w.bytes(ds.data.data(), ds.data.size());
    sections.emplace_back("events/data", w.data());
  }
  io::write_file(path, io::pack_container(sections));
}

inline EventDataset load_event_dataset(const std::string& path) {
  io::SectionMap sections = io::unpack_container(io::read_binary_file(path));
  auto get = [&](const char* name) -> std::vector<std::uint8_t>& {
    auto it = sections.find(name);
    if (it == sections.end())
      throw std::runtime_error(std::string("event dataset: missing section ") + name);
    return it->second;
  };
  EventDataset ds;
  std::uint32_t n = 0;
  {
    auto& shape = get("events/shape");
    io::Reader r(shape.data(), shape.size());
    n = r.u32();
    ds.t = r.u32();
    ds.c = r.u32();
    ds.h = r.u32();
    ds.w = r.u32();
  }
  ds.labels = get("events/labels");
  ds.data = get("events/data");
  if (ds.labels.size() != n || ds.data.size() != n * ds.sample_size())
    throw std::runtime_error("event dataset: payload size mismatch");
  return ds;
}

}  // namespace eslsnn

#endif  // ESLSNN_DATASETS_HPP
