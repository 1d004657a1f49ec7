#pragma once

#include <optional>

#include "backref/bls.hpp"

namespace backref {

using Timestamp = uint32_t;  // unsigned seconds since epoch, 4 bytes on the wire

inline constexpr Timestamp kDefaultFreshnessWindow = 300;

enum class SignerKind : uint8_t {
  kPseudonymKey = 1,
  kNodeLongTermKey = 2,
};

enum class VerifyStatus : uint8_t {
  kOk = 0,
  kBadSignature = 1,
  kTimestampStale = 2,
};

// Ephemeral per-hop identity: X = g2^x. The secret exponent exists only on
// the originator side; everything a relay ever sees is the group element.
struct Pseudonym {
  std::optional<bls12::Fr> secret;
  Bytes element;  // canonical G2 encoding
  uint32_t hop_index = 0;
};

inline Pseudonym new_pseudonym(ByteSpan rng_seed, uint32_t hop_index) {
  Bytes input(rng_seed.begin(), rng_seed.end());
  put_u32(input, hop_index);
  bls12::Fr x = bls12::derive_scalar(input, dst::kPseudonym);
  return {x, bls12::g2_encode(bls12::g2_generator().mul(x)), hop_index};
}

// message bytes a pseudonym/endorsement signature covers: X ‖ ts
inline Bytes pseudonym_message(ByteSpan element, Timestamp ts) {
  Bytes m(element.begin(), element.end());
  put_u32(m, ts);
  return m;
}

// A pseudonym bound to a timestamp by either a pseudonym signature (under the
// predecessor pseudonym) or an endorsement signature (under a node long-term
// key). signer_ref carries the public value verification runs against.
struct SignedPseudonym {
  Bytes element;   // X, 96 bytes
  Timestamp ts = 0;
  Bytes sigma;     // 48 bytes
  SignerKind signer_kind = SignerKind::kPseudonymKey;
  Bytes signer_ref;  // predecessor pseudonym or node pk, 96 bytes

  static constexpr size_t kWireBytes = 1 + 96 + 4 + 48 + 96;

  // wire/log layout: signer-kind(1) ‖ X(96) ‖ ts(4) ‖ sigma(48) ‖ signer-ref(96)
  Bytes serialize() const {
    Bytes out;
    out.reserve(kWireBytes);
    out.push_back(uint8_t(signer_kind));
    append(out, element);
    put_u32(out, ts);
    append(out, sigma);
    append(out, signer_ref);
    return out;
  }

  static std::optional<SignedPseudonym> parse(ByteReader& r) {
    SignedPseudonym sp;
    uint8_t kind;
    if (!r.get_u8(kind)) return std::nullopt;
    if (kind != uint8_t(SignerKind::kPseudonymKey) && kind != uint8_t(SignerKind::kNodeLongTermKey))
      return std::nullopt;
    sp.signer_kind = SignerKind(kind);
    if (!r.get_bytes(96, sp.element)) return std::nullopt;
    if (!r.get_u32(sp.ts)) return std::nullopt;
    if (!r.get_bytes(48, sp.sigma)) return std::nullopt;
    if (!r.get_bytes(96, sp.signer_ref)) return std::nullopt;
    return sp;
  }

  static std::optional<SignedPseudonym> deserialize(ByteSpan b) {
    ByteReader r(b);
    auto sp = parse(r);
    if (!sp || !r.done()) return std::nullopt;
    return sp;
  }
};

inline ByteSpan domain_tag(SignerKind kind) {
  return kind == SignerKind::kPseudonymKey ? ByteSpan(dst::kPseudonymSig)
                                           : ByteSpan(dst::kEndorseSig);
}

// {X_next ‖ ts}_sigma under the predecessor pseudonym secret
inline SignedPseudonym sign_pseudonym(const bls12::Fr& x_prev, ByteSpan x_next, Timestamp ts) {
  Bytes msg = pseudonym_message(x_next, ts);
  BlsSignature sig = bls_sign(x_prev, msg, dst::kPseudonymSig);
  Bytes ref = bls12::g2_encode(bls12::g2_generator().mul(x_prev));
  return {Bytes(x_next.begin(), x_next.end()), ts, sig.sigma, SignerKind::kPseudonymKey, ref};
}

// {X ‖ ts}_sigma under a node's long-term key
inline SignedPseudonym endorse_pseudonym(const bls12::Fr& sk_node, ByteSpan x, Timestamp ts) {
  Bytes msg = pseudonym_message(x, ts);
  BlsSignature sig = bls_sign(sk_node, msg, dst::kEndorseSig);
  Bytes ref = bls12::g2_encode(bls12::g2_generator().mul(sk_node));
  return {Bytes(x.begin(), x.end()), ts, sig.sigma, SignerKind::kNodeLongTermKey, ref};
}

inline bool timestamp_fresh(Timestamp ts, Timestamp now, Timestamp window) {
  Timestamp lo = ts < now ? ts : now;
  Timestamp hi = ts < now ? now : ts;
  return hi - lo <= window;
}

// shared core: freshness, signer-ref consistency, then pairing equality under
// the caller's key. A SignedPseudonym whose recorded signer_ref disagrees with
// the key that verifies it is treated as forged.
inline VerifyStatus verify_signed_pseudonym(ByteSpan key, const SignedPseudonym& sp,
                                            Timestamp now, Timestamp window) {
  if (!timestamp_fresh(sp.ts, now, window)) return VerifyStatus::kTimestampStale;
  if (sp.signer_ref.size() != key.size() ||
      !std::equal(key.begin(), key.end(), sp.signer_ref.begin()))
    return VerifyStatus::kBadSignature;
  Bytes msg = pseudonym_message(sp.element, sp.ts);
  if (!bls_verify(key, msg, sp.sigma, domain_tag(sp.signer_kind))) return VerifyStatus::kBadSignature;
  return VerifyStatus::kOk;
}

// pseudonyms linkability verification: e(H(X‖ts), X_prev) ?= e(sigma, g2)
inline VerifyStatus verify_linkability(ByteSpan x_prev, const SignedPseudonym& sp, Timestamp now,
                                       Timestamp window) {
  if (sp.signer_kind != SignerKind::kPseudonymKey) return VerifyStatus::kBadSignature;
  return verify_signed_pseudonym(x_prev, sp, now, window);
}

// endorsement check: e(H(X‖ts), pk_node) ?= e(sigma, g2)
inline VerifyStatus verify_endorsement(ByteSpan pk_node, const SignedPseudonym& sp, Timestamp now,
                                       Timestamp window) {
  if (sp.signer_kind != SignerKind::kNodeLongTermKey) return VerifyStatus::kBadSignature;
  return verify_signed_pseudonym(pk_node, sp, now, window);
}

// Stream request descriptor; the canonical message is what gets signed,
// logged, and reconstructed by a verifier from destination-side records.
struct StreamRequest {
  Bytes address;      // destination host bytes
  uint16_t port = 0;
  Timestamp ts = 0;   // ts_xm

  // m = len(address)(2) ‖ address ‖ port(2) ‖ ts(4); length prefix keeps it injective
  Bytes canonical_message() const {
    Bytes m;
    put_lp(m, address);
    put_u16(m, port);
    put_u32(m, ts);
    return m;
  }

  Bytes serialize() const { return canonical_message(); }

  static std::optional<StreamRequest> parse(ByteReader& r) {
    StreamRequest req;
    if (!r.get_lp(req.address)) return std::nullopt;
    if (!r.get_u16(req.port)) return std::nullopt;
    if (!r.get_u32(req.ts)) return std::nullopt;
    return req;
  }

  bool operator==(const StreamRequest& o) const {
    return address == o.address && port == o.port && ts == o.ts;
  }
};

// sigma = H(m)^{x_exit} with the stream domain tag
inline BlsSignature sign_stream(const bls12::Fr& x_exit, const StreamRequest& req) {
  return bls_sign(x_exit, req.canonical_message(), dst::kStreamSig);
}

// Eq.-style check: e(H(m), X_exit) ?= e(sigma, g2), plus freshness of ts_xm
inline VerifyStatus verify_stream(ByteSpan x_exit, const StreamRequest& req, ByteSpan sigma,
                                  Timestamp now, Timestamp window) {
  if (!timestamp_fresh(req.ts, now, window)) return VerifyStatus::kTimestampStale;
  if (!bls_verify(x_exit, req.canonical_message(), sigma, dst::kStreamSig))
    return VerifyStatus::kBadSignature;
  return VerifyStatus::kOk;
}

}  // namespace backref
