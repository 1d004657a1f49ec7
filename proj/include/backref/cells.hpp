#pragma once

#include <openssl/evp.h>

#include <optional>

#include "backref/ntor.hpp"
#include "backref/pseudonym.hpp"
#include "backref/rng.hpp"

namespace backref {

inline constexpr size_t kCidBytes = 16;       // cid <- {0,1}^128
inline constexpr size_t kMaxHops = 8;
inline constexpr size_t kAeadNonceBytes = 12;
inline constexpr size_t kAeadTagBytes = 16;
inline constexpr size_t kLayerOverhead = kAeadNonceBytes + kAeadTagBytes;

enum class CellKind : uint8_t {
  kCreate = 1,
  kCreated = 2,
  kRelay = 3,
};

// Wire unit between neighbors: cid(16) ‖ kind(1) ‖ len(4, BE) ‖ payload
struct Cell {
  Bytes cid;
  CellKind kind = CellKind::kCreate;
  Bytes payload;

  Bytes encode() const {
    Bytes out;
    out.reserve(kCidBytes + 5 + payload.size());
    append(out, cid);
    out.push_back(uint8_t(kind));
    put_u32(out, uint32_t(payload.size()));
    append(out, payload);
    return out;
  }

  static std::optional<Cell> decode(ByteSpan wire) {
    ByteReader r(wire);
    Cell c;
    if (!r.get_bytes(kCidBytes, c.cid)) return std::nullopt;
    bool all_zero = true;
    for (uint8_t b : c.cid) all_zero = all_zero && b == 0;
    if (all_zero) return std::nullopt;
    uint8_t kind;
    if (!r.get_u8(kind) || kind < 1 || kind > 3) return std::nullopt;
    c.kind = CellKind(kind);
    uint32_t len;
    if (!r.get_u32(len) || len != r.remaining()) return std::nullopt;
    if (!r.get_bytes(len, c.payload)) return std::nullopt;
    return c;
  }
};

inline Bytes fresh_cid(Drbg& rng) { return rng.next_bytes(kCidBytes); }

enum class RelayType : uint8_t {
  kExtend = 1,
  kExtended = 2,
  kData = 3,
  kBegin = 4,
};

// relay payload: tag(1) ‖ body
struct RelayPayload {
  RelayType type = RelayType::kData;
  Bytes body;

  Bytes encode() const {
    Bytes out;
    out.push_back(uint8_t(type));
    append(out, body);
    return out;
  }

  static std::optional<RelayPayload> decode(ByteSpan b) {
    ByteReader r(b);
    uint8_t tag;
    if (!r.get_u8(tag) || tag < 1 || tag > 4) return std::nullopt;
    RelayPayload p;
    p.type = RelayType(tag);
    r.get_bytes(r.remaining(), p.body);
    return p;
  }
};

// ---------- typed cell/relay bodies ----------

// create payload: X(96) ‖ flag ‖ [SignedPseudonym]. The flag is the
// BackRef-disabled / unsigned-user switch.
struct CreatePayload {
  Bytes pseudonym;  // ntor challenge X
  std::optional<SignedPseudonym> endorsement;

  Bytes encode() const {
    Bytes out(pseudonym);
    out.push_back(endorsement ? 1 : 0);
    if (endorsement) append(out, endorsement->serialize());
    return out;
  }
  static std::optional<CreatePayload> decode(ByteSpan b) {
    ByteReader r(b);
    CreatePayload p;
    if (!r.get_bytes(96, p.pseudonym)) return std::nullopt;
    uint8_t flag;
    if (!r.get_u8(flag) || flag > 1) return std::nullopt;
    if (flag) {
      auto sp = SignedPseudonym::parse(r);
      if (!sp) return std::nullopt;
      p.endorsement = std::move(sp);
    }
    return r.done() ? std::optional<CreatePayload>(std::move(p)) : std::nullopt;
  }
};

// created payload: Y(96) ‖ t(32)
struct CreatedPayload {
  Bytes ephemeral;
  Bytes tag;

  Bytes encode() const { return concat({ephemeral, tag}); }
  static std::optional<CreatedPayload> decode(ByteSpan b) {
    ByteReader r(b);
    CreatedPayload p;
    if (!r.get_bytes(96, p.ephemeral)) return std::nullopt;
    if (!r.get_bytes(kMacBytes, p.tag)) return std::nullopt;
    return r.done() ? std::optional<CreatedPayload>(std::move(p)) : std::nullopt;
  }
};

// extend body: node-id(lp) ‖ X(96) ‖ flag ‖ [SignedPseudonym]
struct ExtendBody {
  Bytes next_node;
  Bytes pseudonym;
  std::optional<SignedPseudonym> signed_pseudonym;

  Bytes encode() const {
    Bytes out;
    put_lp(out, next_node);
    append(out, pseudonym);
    out.push_back(signed_pseudonym ? 1 : 0);
    if (signed_pseudonym) append(out, signed_pseudonym->serialize());
    return out;
  }
  static std::optional<ExtendBody> decode(ByteSpan b) {
    ByteReader r(b);
    ExtendBody e;
    if (!r.get_lp(e.next_node)) return std::nullopt;
    if (!r.get_bytes(96, e.pseudonym)) return std::nullopt;
    uint8_t flag;
    if (!r.get_u8(flag) || flag > 1) return std::nullopt;
    if (flag) {
      auto sp = SignedPseudonym::parse(r);
      if (!sp) return std::nullopt;
      e.signed_pseudonym = std::move(sp);
    }
    return r.done() ? std::optional<ExtendBody>(std::move(e)) : std::nullopt;
  }
};

// extended body: Y(96) ‖ t(32)
using ExtendedBody = CreatedPayload;

// begin/data body: StreamRequest ‖ flag ‖ [sigma(48) ‖ ts(4)] ‖ payload(lp).
// The bracketed signature fields are the only BackRef addition, |G1| + 4 bytes.
struct BeginBody {
  StreamRequest request;
  std::optional<std::pair<Bytes, Timestamp>> signature;  // (sigma, ts)
  Bytes payload;

  Bytes encode() const {
    Bytes out = request.serialize();
    out.push_back(signature ? 1 : 0);
    if (signature) {
      append(out, signature->first);
      put_u32(out, signature->second);
    }
    put_lp(out, payload);
    return out;
  }
  static std::optional<BeginBody> decode(ByteSpan b) {
    ByteReader r(b);
    BeginBody body;
    auto req = StreamRequest::parse(r);
    if (!req) return std::nullopt;
    body.request = std::move(*req);
    uint8_t flag;
    if (!r.get_u8(flag) || flag > 1) return std::nullopt;
    if (flag) {
      Bytes sigma;
      Timestamp ts;
      if (!r.get_bytes(48, sigma)) return std::nullopt;
      if (!r.get_u32(ts)) return std::nullopt;
      body.signature = {std::move(sigma), ts};
    }
    if (!r.get_lp(body.payload)) return std::nullopt;
    return r.done() ? std::optional<BeginBody>(std::move(body)) : std::nullopt;
  }
};

// ---------- layered onion encryption ----------

namespace detail {

inline std::optional<Bytes> aead_seal(ByteSpan key, ByteSpan nonce, ByteSpan plaintext) {
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  if (!ctx) return std::nullopt;
  Bytes out(plaintext.size() + kAeadTagBytes);
  int len = 0;
  bool ok = EVP_EncryptInit_ex(ctx, EVP_aes_256_gcm(), nullptr, key.data(), nonce.data()) == 1 &&
            (plaintext.empty() ||
             EVP_EncryptUpdate(ctx, out.data(), &len, plaintext.data(), int(plaintext.size())) == 1);
  int total = len;
  ok = ok && EVP_EncryptFinal_ex(ctx, out.data() + total, &len) == 1;
  total += len;
  ok = ok && EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_GET_TAG, kAeadTagBytes,
                                 out.data() + plaintext.size()) == 1;
  EVP_CIPHER_CTX_free(ctx);
  if (!ok || size_t(total) != plaintext.size()) return std::nullopt;
  return out;
}

inline std::optional<Bytes> aead_open(ByteSpan key, ByteSpan nonce, ByteSpan sealed) {
  if (sealed.size() < kAeadTagBytes) return std::nullopt;
  size_t ct_len = sealed.size() - kAeadTagBytes;
  EVP_CIPHER_CTX* ctx = EVP_CIPHER_CTX_new();
  if (!ctx) return std::nullopt;
  Bytes out(ct_len);
  Bytes tag(sealed.end() - kAeadTagBytes, sealed.end());
  int len = 0;
  bool ok = EVP_DecryptInit_ex(ctx, EVP_aes_256_gcm(), nullptr, key.data(), nonce.data()) == 1 &&
            (ct_len == 0 ||
             EVP_DecryptUpdate(ctx, out.data(), &len, sealed.data(), int(ct_len)) == 1);
  int total = len;
  ok = ok && EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_TAG, kAeadTagBytes, tag.data()) == 1 &&
       EVP_DecryptFinal_ex(ctx, out.data() + total, &len) == 1;
  EVP_CIPHER_CTX_free(ctx);
  if (!ok) return std::nullopt;
  return out;
}

}  // namespace detail

// Layered encryption. keys run in path order (entry first); the innermost
// layer belongs to the last key, so each relay strips exactly one layer on
// the way out. Every layer is nonce(12) ‖ AES-256-GCM(ciphertext ‖ tag(16)).
inline std::optional<Bytes> wr_on(ByteSpan payload, std::span<const Bytes> keys, Drbg& rng) {
  if (keys.empty() || keys.size() > kMaxHops) return std::nullopt;
  Bytes onion(payload.begin(), payload.end());
  for (size_t i = keys.size(); i-- > 0;) {
    Bytes nonce = rng.next_bytes(kAeadNonceBytes);
    auto sealed = detail::aead_seal(keys[i], nonce, onion);
    if (!sealed) return std::nullopt;
    onion = concat({nonce, *sealed});
  }
  return onion;
}

// Strips |keys| layers in path order. nullopt = layer-auth-failure (cells are
// dropped by the caller on failure).
inline std::optional<Bytes> unwr_on(ByteSpan onion, std::span<const Bytes> keys) {
  if (keys.empty()) return std::nullopt;
  Bytes cur(onion.begin(), onion.end());
  for (const Bytes& key : keys) {
    if (cur.size() < kAeadNonceBytes + kAeadTagBytes) return std::nullopt;
    ByteSpan nonce = ByteSpan(cur).first(kAeadNonceBytes);
    auto open = detail::aead_open(key, nonce, ByteSpan(cur).subspan(kAeadNonceBytes));
    if (!open) return std::nullopt;
    cur = std::move(*open);
  }
  return cur;
}

}  // namespace backref
