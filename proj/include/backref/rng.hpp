#pragma once

#include "backref/bytes.hpp"
#include "backref/hashing.hpp"

namespace backref {

// Deterministic byte generator (SHA-256 in counter mode). The whole simulator
// draws from one of these, so a (scenario, seed) pair fixes every transcript
// bit. Not a general-purpose CSPRNG: reproducibility is the point.
class Drbg {
 public:
  Drbg() : Drbg(Bytes{0}) {}
  explicit Drbg(ByteSpan seed) {
    Digest d = sha256(concat({to_bytes("BACKREF-V1-DRBG"), seed}));
    state_.assign(d.begin(), d.end());
  }
  explicit Drbg(uint64_t seed) : Drbg(seed_bytes(seed)) {}

  Bytes next_bytes(size_t n) {
    Bytes out;
    while (out.size() < n) {
      Bytes block;
      append(block, state_);
      put_u64(block, counter_++);
      Digest d = sha256(block);
      out.insert(out.end(), d.begin(), d.end());
    }
    out.resize(n);
    return out;
  }

  uint64_t next_u64() {
    Bytes b = next_bytes(8);
    uint64_t v = 0;
    for (uint8_t c : b) v = v << 8 | c;
    return v;
  }

  // independent child stream; forking does not disturb this stream
  Drbg fork(std::string_view label) {
    Bytes seed;
    append(seed, state_);
    append(seed, to_bytes(label));
    return Drbg(seed);
  }

 private:
  static Bytes seed_bytes(uint64_t seed) {
    Bytes b;
    put_u64(b, seed);
    return b;
  }
  Bytes state_;
  uint64_t counter_ = 0;
};

}  // namespace backref
