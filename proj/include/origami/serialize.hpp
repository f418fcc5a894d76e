#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "origami/common.hpp"

namespace origami {

// Little-endian byte encoder, independent of host byte order.
class BinaryWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v);
  void boolean(bool v) { u8(v ? 1 : 0); }
  void str(const std::string& s);
  void vec(const VecX& v);
  void vec3(const Vec3& v);
  void mat3(const Mat3& m);
  void rng(const std::mt19937_64& r);
  void raw(const std::string& bytes) { buf_ += bytes; }

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

// Throws Error(kCheckpoint) on truncated or malformed input.
class BinaryReader {
 public:
  explicit BinaryReader(std::string bytes) : buf_(std::move(bytes)) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  bool boolean();
  std::string str();
  VecX vec();
  Vec3 vec3();
  Mat3 mat3();
  void rng(std::mt19937_64* r);
  std::string take(size_t n);

  bool at_end() const { return pos_ == buf_.size(); }
  size_t position() const { return pos_; }

 private:
  void need(size_t n) const;
  std::string buf_;
  size_t pos_ = 0;
};

// FNV-1a, used for config fingerprints.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace origami
