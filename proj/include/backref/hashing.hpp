#pragma once

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <array>
#include <cassert>
#include <stdexcept>

#include "backref/bytes.hpp"

namespace backref {

using Digest = std::array<uint8_t, 32>;

inline Digest sha256(ByteSpan data) {
  Digest out{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != 32)
    throw std::runtime_error("sha256 failed");
  return out;
}

inline Digest hmac_sha256(ByteSpan key, ByteSpan data) {
  Digest out{};
  unsigned int len = 0;
  if (!HMAC(EVP_sha256(), key.data(), int(key.size()), data.data(), data.size(), out.data(),
            &len) ||
      len != 32)
    throw std::runtime_error("hmac failed");
  return out;
}

// HKDF-SHA256 (RFC 5869)
inline Bytes hkdf(ByteSpan ikm, ByteSpan salt, ByteSpan info, size_t len) {
  Digest prk = hmac_sha256(salt, ikm);
  Bytes out;
  Bytes t;
  uint8_t ctr = 1;
  while (out.size() < len) {
    Bytes block = concat({t, info, ByteSpan(&ctr, 1)});
    Digest d = hmac_sha256(prk, block);
    t.assign(d.begin(), d.end());
    append(out, t);
    ++ctr;
  }
  out.resize(len);
  return out;
}

// expand_message_xmd with SHA-256 (RFC 9380 §5.3.1); the uniform-byte
// expander behind hash-to-group, key derivation from seeds, and log indexes.
inline Bytes expand_message_xmd(ByteSpan msg, ByteSpan dst, size_t len_out) {
  assert(len_out > 0 && len_out <= 255 * 32);
  assert(dst.size() <= 255);
  const size_t ell = (len_out + 31) / 32;
  Bytes dst_prime(dst.begin(), dst.end());
  dst_prime.push_back(uint8_t(dst.size()));

  Bytes b0_in(64, 0);  // Z_pad = block-size zeros
  append(b0_in, msg);
  b0_in.push_back(uint8_t(len_out >> 8));
  b0_in.push_back(uint8_t(len_out));
  b0_in.push_back(0);
  append(b0_in, dst_prime);
  Digest b0 = sha256(b0_in);

  Bytes out;
  Digest prev{};
  for (size_t i = 1; i <= ell; ++i) {
    Bytes in;
    if (i == 1) {
      in.assign(b0.begin(), b0.end());
    } else {
      for (size_t j = 0; j < 32; ++j) in.push_back(b0[j] ^ prev[j]);
    }
    in.push_back(uint8_t(i));
    append(in, dst_prime);
    prev = sha256(in);
    out.insert(out.end(), prev.begin(), prev.end());
  }
  out.resize(len_out);
  return out;
}

// 32-byte domain-separated index hash shared by evidence-log indexes.
inline Digest index_hash(ByteSpan data) {
  static const Bytes dst = to_bytes("BACKREF-V1-INDEX");
  Bytes b = expand_message_xmd(data, dst, 32);
  Digest d{};
  std::copy(b.begin(), b.end(), d.begin());
  return d;
}

}  // namespace backref
