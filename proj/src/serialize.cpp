#include "origami/serialize.hpp"

#include <cstring>
#include <sstream>

namespace origami {

void BinaryWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void BinaryWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
}

void BinaryWriter::f64(double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  u64(bits);
}

void BinaryWriter::str(const std::string& s) {
  u64(s.size());
  buf_ += s;
}

void BinaryWriter::vec(const VecX& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  for (int i = 0; i < v.size(); ++i) f64(v[i]);
}

void BinaryWriter::vec3(const Vec3& v) {
  for (int i = 0; i < 3; ++i) f64(v[i]);
}

void BinaryWriter::mat3(const Mat3& m) {
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 3; ++r) f64(m(r, c));
}

void BinaryWriter::rng(const std::mt19937_64& r) {
  std::ostringstream os;
  os << r;
  str(os.str());
}

void BinaryReader::need(size_t n) const {
  if (buf_.size() - pos_ < n) {
    throw Error(ErrorKind::kCheckpoint, "unexpected end of data at byte " + std::to_string(pos_));
  }
}

std::uint8_t BinaryReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(buf_[pos_++]);
}

std::uint32_t BinaryReader::u32() {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
  return v;
}

std::uint64_t BinaryReader::u64() {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
  return v;
}

double BinaryReader::f64() {
  const std::uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

bool BinaryReader::boolean() {
  const std::uint8_t b = u8();
  if (b > 1) throw Error(ErrorKind::kCheckpoint, "invalid boolean byte");
  return b == 1;
}

std::string BinaryReader::take(size_t n) {
  need(n);
  std::string s = buf_.substr(pos_, n);
  pos_ += n;
  return s;
}

std::string BinaryReader::str() {
  const std::uint64_t n = u64();
  if (n > buf_.size()) throw Error(ErrorKind::kCheckpoint, "string length out of range");
  return take(static_cast<size_t>(n));
}

VecX BinaryReader::vec() {
  const std::uint64_t n = u64();
  if (n > (buf_.size() - pos_) / 8) {
    throw Error(ErrorKind::kCheckpoint, "vector length out of range");
  }
  VecX v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = f64();
  return v;
}

Vec3 BinaryReader::vec3() {
  Vec3 v;
  for (int i = 0; i < 3; ++i) v[i] = f64();
  return v;
}

Mat3 BinaryReader::mat3() {
  Mat3 m;
  for (int c = 0; c < 3; ++c)
    for (int r = 0; r < 3; ++r) m(r, c) = f64();
  return m;
}

void BinaryReader::rng(std::mt19937_64* r) {
  std::istringstream is(str());
  is >> *r;
  if (!is) throw Error(ErrorKind::kCheckpoint, "corrupt generator state");
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace origami
