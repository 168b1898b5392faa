#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "mstack/errors.hpp"

namespace mstack::wire {

// Fixed-layout little-endian primitives shared by all message codecs.

inline void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) {
  out.push_back(v);
}

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
  }
}

inline void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
  }
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return data_[take(1)]; }

  std::uint16_t u16() {
    const std::size_t at = take(2);
    return static_cast<std::uint16_t>(data_[at] | (data_[at + 1] << 8));
  }

  float f32() {
    const std::size_t at = take(4);
    std::uint32_t bits = 0;
    for (int i = 0; i < 4; ++i) {
      bits |= static_cast<std::uint32_t>(data_[at + i]) << (8 * i);
    }
    float v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  double f64() {
    const std::size_t at = take(8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
      bits |= static_cast<std::uint64_t>(data_[at + i]) << (8 * i);
    }
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  bool done() const { return cursor_ == data_.size(); }

 private:
  std::size_t take(std::size_t n) {
    if (cursor_ + n > data_.size()) {
      throw Error("wire record truncated");
    }
    const std::size_t at = cursor_;
    cursor_ += n;
    return at;
  }

  std::span<const std::uint8_t> data_;
  std::size_t cursor_{0};
};

}  // namespace mstack::wire
