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

#ifndef ESLSNN_IO_HPP
#define ESLSNN_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace eslsnn::io {

// The shared binary container: the magic string "ESLSNN1", a little-endian
// section count, then named sections (name length, name, payload length,
// payload). Checkpoints and serialized event datasets both use it.
constexpr char kMagic[] = "ESLSNN1";
constexpr std::size_t kMagicLen = 7;

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int b = 0; b < 4; ++b) buf_.push_back(std::uint8_t(v >> (8 * b)));
  }
  void u64(std::uint64_t v) {
    for (int b = 0; b < 8; ++b) buf_.push_back(std::uint8_t(v >> (8 * b)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void str(const std::string& s) {
    u32(std::uint32_t(s.size()));
    bytes(s.data(), s.size());
  }
  void doubles(const std::vector<double>& v) {
    u64(v.size());
    for (double d : v) f64(d);
  }
  const std::vector<std::uint8_t>& data() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::uint8_t* p, std::size_t n) : p_(p), end_(p + n) {}

  std::uint8_t u8() {
    need(1);
    return *p_++;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= std::uint32_t(*p_++) << (8 * b);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) v |= std::uint64_t(*p_++) << (8 * b);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(p_), n);
    p_ += n;
    return s;
  }
  std::vector<double> doubles() {
    const std::uint64_t n = u64();
    need(n * 8);
    std::vector<double> v(n);
    for (auto& d : v) d = f64();
    return v;
  }
  std::vector<std::uint8_t> raw(std::size_t n) {
    need(n);
    std::vector<std::uint8_t> v(p_, p_ + n);
    p_ += n;
    return v;
  }
  std::size_t remaining() const { return std::size_t(end_ - p_); }

 private:
  void need(std::size_t n) const {
    if (std::size_t(end_ - p_) < n)
      throw std::runtime_error("container: truncated data");
  }
  const std::uint8_t* p_;
  const std::uint8_t* end_;
};

using SectionMap = std::map<std::string, std::vector<std::uint8_t>>;
using SectionList = std::vector<std::pair<std::string, std::vector<std::uint8_t>>>;

inline std::vector<std::uint8_t> pack_container(const SectionList& sections) {
  Writer out;
  out.bytes(kMagic, kMagicLen);
  out.u64(sections.size());
  for (const auto& [name, payload] : sections) {
    out.str(name);
    out.u64(payload.size());
    out.bytes(payload.data(), payload.size());
  }
  return out.data();
}

inline SectionMap unpack_container(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMagicLen || std::memcmp(bytes.data(), kMagic, kMagicLen) != 0)
    throw std::runtime_error("container: bad magic (not an ESLSNN1 file)");
  Reader top(bytes.data() + kMagicLen, bytes.size() - kMagicLen);
  const std::uint64_t n_sections = top.u64();
  SectionMap sections;
  for (std::uint64_t s = 0; s < n_sections; ++s) {
    std::string name = top.str();
    const std::uint64_t len = top.u64();
    sections[name] = top.raw(len);
  }
  return sections;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

inline std::vector<std::uint8_t> read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace eslsnn::io

#endif  // ESLSNN_IO_HPP
