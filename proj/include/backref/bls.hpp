#pragma once

#include <map>
#include <optional>

#include "backref/pairing.hpp"

namespace backref {

namespace dst {
// Domain tags. Distinct tags keep the three protocol signature forms and all
// derivation paths mutually non-replayable.
inline const Bytes kGenericSig = to_bytes("BACKREF-V1-GENERIC-SIG");
inline const Bytes kPseudonymSig = to_bytes("BACKREF-V1-PSEUDONYM-SIG");
inline const Bytes kEndorseSig = to_bytes("BACKREF-V1-ENDORSE-SIG");
inline const Bytes kStreamSig = to_bytes("BACKREF-V1-STREAM-SIG");
inline const Bytes kKeygen = to_bytes("BACKREF-V1-KEYGEN");
inline const Bytes kPseudonym = to_bytes("BACKREF-V1-PSEUDONYM");
}  // namespace dst

// Pairing-group facade: generators, pairing map, hash-to-group, and the
// canonical byte encodings everything else is defined over.
struct GroupSuite {
  static const GroupSuite& get() {
    static const GroupSuite s;
    return s;
  }

  const bls12::G1& g1() const { return bls12::g1_generator(); }
  const bls12::G2& g2() const { return bls12::g2_generator(); }
  Bytes order() const { return bls12::order_be_bytes(); }

  bls12::Gt pair(const bls12::G1& p, const bls12::G2& q) const { return bls12::pair(p, q); }
  bls12::G1 hash_to_g1(ByteSpan msg, ByteSpan tag) const { return bls12::hash_to_g1(msg, tag); }

  static constexpr size_t kG1Bytes = bls12::kG1Bytes;
  static constexpr size_t kG2Bytes = bls12::kG2Bytes;
  static constexpr size_t kScalarBytes = bls12::kScalarBytes;
};

struct BlsSignature {
  Bytes sigma;  // canonical 48-byte G1 encoding

  bool operator==(const BlsSignature& o) const { return sigma == o.sigma; }
};

struct BlsKeyPair {
  bls12::Fr sk;
  Bytes pk;  // canonical 96-byte G2 encoding, = g2^sk

  Bytes sk_bytes() const { return bls12::scalar_encode(sk); }
};

// Deterministic key generation from seed material.
inline BlsKeyPair bls_keygen(ByteSpan seed) {
  bls12::Fr sk = bls12::derive_scalar(seed, dst::kKeygen);
  bls12::G2 pk = bls12::g2_generator().mul(sk);
  return {sk, bls12::g2_encode(pk)};
}

inline BlsSignature bls_sign(const bls12::Fr& sk, ByteSpan message, ByteSpan tag) {
  bls12::G1 h = bls12::hash_to_g1(message, tag);
  return {bls12::g1_encode(h.mul(sk))};
}

inline BlsSignature bls_sign(const bls12::Fr& sk, ByteSpan message) {
  return bls_sign(sk, message, dst::kGenericSig);
}

// Typed verification: e(H(m), pk) == e(sigma, g2), evaluated as the product
// e(-H(m), pk) * e(sigma, g2) == 1 so both Miller loops share one final
// exponentiation.
inline bool bls_verify(const bls12::G2& pk, ByteSpan message, const bls12::G1& sigma,
                       ByteSpan tag) {
  if (pk.is_infinity()) return false;
  bls12::G1 h = bls12::hash_to_g1(message, tag);
  bls12::Fp12 m = bls12::miller_loop(h.negate(), pk) * bls12::miller_loop(sigma, bls12::g2_generator());
  return bls12::final_exponentiation(m) == bls12::gt_identity();
}

namespace detail {

// Memoized G2 decoding. Verification keys (roster pks, stored pseudonyms)
// recur constantly; the subgroup check dominates decode cost, and decoding is
// a pure function of the bytes, so a bounded thread-local cache is sound.
inline std::optional<bls12::G2> g2_decode_cached(ByteSpan bytes) {
  thread_local std::map<Bytes, std::optional<bls12::G2>> cache;
  Bytes key(bytes.begin(), bytes.end());
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  if (cache.size() > 4096) cache.clear();
  auto decoded = bls12::g2_decode(bytes);
  cache.emplace(std::move(key), decoded);
  return decoded;
}

}  // namespace detail

// Byte-level verification; malformed encodings are rejected as false, never thrown.
inline bool bls_verify(ByteSpan pk_bytes, ByteSpan message, ByteSpan sigma_bytes, ByteSpan tag) {
  auto pk = detail::g2_decode_cached(pk_bytes);
  if (!pk) return false;
  auto sigma = bls12::g1_decode(sigma_bytes);
  if (!sigma) return false;
  return bls_verify(*pk, message, *sigma, tag);
}

inline bool bls_verify(ByteSpan pk_bytes, ByteSpan message, const BlsSignature& sig) {
  return bls_verify(pk_bytes, message, sig.sigma, dst::kGenericSig);
}

}  // namespace backref
