#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace backref {

using Bytes = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;

inline Bytes to_bytes(std::string_view s) {
  return Bytes(s.begin(), s.end());
}

inline std::string to_string(ByteSpan b) {
  return std::string(b.begin(), b.end());
}

inline Bytes concat(std::initializer_list<ByteSpan> parts) {
  size_t n = 0;
  for (auto& p : parts) n += p.size();
  Bytes out;
  out.reserve(n);
  for (auto& p : parts) out.insert(out.end(), p.begin(), p.end());
  return out;
}

inline void append(Bytes& out, ByteSpan b) { out.insert(out.end(), b.begin(), b.end()); }

inline void put_u16(Bytes& out, uint16_t v) {
  out.push_back(uint8_t(v >> 8));
  out.push_back(uint8_t(v));
}

inline void put_u32(Bytes& out, uint32_t v) {
  for (int i = 3; i >= 0; --i) out.push_back(uint8_t(v >> (8 * i)));
}

inline void put_u64(Bytes& out, uint64_t v) {
  for (int i = 7; i >= 0; --i) out.push_back(uint8_t(v >> (8 * i)));
}

// Cursor-style reader; every get_* fails soft so malformed wire input can be
// rejected without exceptions.
class ByteReader {
 public:
  explicit ByteReader(ByteSpan data) : data_(data) {}

  bool get_bytes(size_t n, Bytes& out) {
    if (pos_ + n > data_.size()) return false;
    out.assign(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return true;
  }
  bool get_u8(uint8_t& v) {
    if (pos_ + 1 > data_.size()) return false;
    v = data_[pos_++];
    return true;
  }
  bool get_u16(uint16_t& v) {
    if (pos_ + 2 > data_.size()) return false;
    v = uint16_t(data_[pos_]) << 8 | data_[pos_ + 1];
    pos_ += 2;
    return true;
  }
  bool get_u32(uint32_t& v) {
    if (pos_ + 4 > data_.size()) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v = v << 8 | data_[pos_ + i];
    pos_ += 4;
    return true;
  }
  bool get_u64(uint64_t& v) {
    if (pos_ + 8 > data_.size()) return false;
    v = 0;
    for (int i = 0; i < 8; ++i) v = v << 8 | data_[pos_ + i];
    pos_ += 8;
    return true;
  }
  // length-prefixed (u16) byte string
  bool get_lp(Bytes& out) {
    uint16_t n;
    return get_u16(n) && get_bytes(n, out);
  }
  bool done() const { return pos_ == data_.size(); }
  size_t remaining() const { return data_.size() - pos_; }

 private:
  ByteSpan data_;
  size_t pos_ = 0;
};

inline void put_lp(Bytes& out, ByteSpan b) {
  put_u16(out, uint16_t(b.size()));
  append(out, b);
}

inline std::string to_hex(ByteSpan b) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(b.size() * 2);
  for (uint8_t c : b) {
    s.push_back(digits[c >> 4]);
    s.push_back(digits[c & 0xf]);
  }
  return s;
}

inline std::optional<Bytes> from_hex(std::string_view s) {
  auto nib = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (s.size() % 2) return std::nullopt;
  Bytes out;
  out.reserve(s.size() / 2);
  for (size_t i = 0; i < s.size(); i += 2) {
    int hi = nib(s[i]), lo = nib(s[i + 1]);
    if (hi < 0 || lo < 0) return std::nullopt;
    out.push_back(uint8_t(hi << 4 | lo));
  }
  return out;
}

// true if needle occurs as a contiguous byte substring of haystack
inline bool contains_bytes(ByteSpan haystack, ByteSpan needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  for (size_t i = 0; i + needle.size() <= haystack.size(); ++i)
    if (std::memcmp(haystack.data() + i, needle.data(), needle.size()) == 0) return true;
  return false;
}

inline void secure_wipe(Bytes& b) {
  volatile uint8_t* p = b.data();
  for (size_t i = 0; i < b.size(); ++i) p[i] = 0;
  b.clear();
}

}  // namespace backref
