#pragma once

#include <map>
#include <optional>

#include "backref/curve.hpp"
#include "backref/hashing.hpp"
#include "backref/pseudonym.hpp"

namespace backref {

// One-way authenticated key exchange (client authenticates server), run in G2
// so the client challenge X doubles as the hop pseudonym.

inline constexpr size_t kSessionKeyBytes = 32;
inline constexpr size_t kMacBytes = 32;

namespace detail {

inline const Bytes kNtorProto = to_bytes("backref-ntor-g2");
inline const Bytes kNtorSalt = to_bytes("BACKREF-V1-NTOR-KDF");
inline const Bytes kServerLabel = to_bytes("server");

// (k_mac, k_session) = KDF(X^y ‖ X^sk, Q, X, Y, proto)
inline std::pair<Bytes, Bytes> ntor_kdf(ByteSpan dh_ephemeral, ByteSpan dh_static,
                                        ByteSpan server_id, ByteSpan x_bytes, ByteSpan y_bytes) {
  Bytes ikm = concat({dh_ephemeral, dh_static});
  Bytes info = concat({server_id, x_bytes, y_bytes, kNtorProto});
  Bytes okm = hkdf(ikm, kNtorSalt, info, 64);
  Bytes k_mac(okm.begin(), okm.begin() + 32);
  Bytes k_session(okm.begin() + 32, okm.end());
  return {k_mac, k_session};
}

inline Bytes ntor_tag(ByteSpan k_mac, ByteSpan server_id, ByteSpan y_bytes, ByteSpan x_bytes) {
  Bytes data = concat({server_id, y_bytes, x_bytes, kNtorProto, kServerLabel});
  Digest t = hmac_sha256(k_mac, data);
  return Bytes(t.begin(), t.end());
}

inline std::optional<bls12::G2> decode_nonidentity(ByteSpan element) {
  auto p = bls12::g2_decode(element);
  if (!p || p->is_infinity()) return std::nullopt;
  return p;
}

}  // namespace detail

struct NtorClientState {
  Bytes session_id;  // H(X)
  Bytes server_id;
  Bytes server_pk;   // G2 bytes
  bls12::Fr x;       // ephemeral secret, erased with the state
  Bytes challenge;   // X = g2^x
};

struct NtorServerReply {
  Bytes ephemeral;    // Y
  Bytes tag;          // t_Q
  Bytes session_key;  // k, server side output
};

inline Bytes ntor_session_id(ByteSpan challenge) {
  Digest d = sha256(challenge);
  return Bytes(d.begin(), d.end());
}

inline NtorClientState ntor_initiate(ByteSpan server_pk, ByteSpan server_id, ByteSpan rng_seed) {
  bls12::Fr x = bls12::derive_scalar(rng_seed, to_bytes("BACKREF-V1-NTOR-EPHEMERAL"));
  Bytes challenge = bls12::g2_encode(bls12::g2_generator().mul(x));
  return {ntor_session_id(challenge), Bytes(server_id.begin(), server_id.end()),
          Bytes(server_pk.begin(), server_pk.end()), x, challenge};
}

// Server side; nullopt = abort-session (invalid challenge).
inline std::optional<NtorServerReply> ntor_respond(ByteSpan server_pk, const bls12::Fr& sk,
                                                   ByteSpan server_id, ByteSpan challenge,
                                                   ByteSpan rng_seed) {
  auto x_point = detail::decode_nonidentity(challenge);
  if (!x_point) return std::nullopt;
  bls12::Fr y = bls12::derive_scalar(rng_seed, to_bytes("BACKREF-V1-NTOR-RESPONDER"));
  Bytes y_bytes = bls12::g2_encode(bls12::g2_generator().mul(y));
  Bytes dh_ephemeral = bls12::g2_encode(x_point->mul(y));
  Bytes dh_static = bls12::g2_encode(x_point->mul(sk));
  auto [k_mac, k_session] = detail::ntor_kdf(dh_ephemeral, dh_static, server_id, challenge, y_bytes);
  Bytes tag = detail::ntor_tag(k_mac, server_id, y_bytes, challenge);
  // y itself goes out of scope here ("delete y and output m_Q")
  return NtorServerReply{y_bytes, tag, k_session};
}

// Client side; nullopt = abort-session (bad Y or authenticator mismatch).
// The caller owns state erasure; NtorSessionStore below does it unconditionally.
inline std::optional<Bytes> ntor_compute_key(const NtorClientState& st, ByteSpan y_bytes,
                                             ByteSpan tag) {
  auto y_point = detail::decode_nonidentity(y_bytes);
  if (!y_point) return std::nullopt;
  Bytes dh_ephemeral = bls12::g2_encode(y_point->mul(st.x));
  auto pk_point = detail::decode_nonidentity(st.server_pk);
  if (!pk_point) return std::nullopt;
  Bytes dh_static = bls12::g2_encode(pk_point->mul(st.x));
  auto [k_mac, k_session] =
      detail::ntor_kdf(dh_ephemeral, dh_static, st.server_id, st.challenge, y_bytes);
  Bytes expect = detail::ntor_tag(k_mac, st.server_id, y_bytes, st.challenge);
  if (expect.size() != tag.size() || !std::equal(expect.begin(), expect.end(), tag.begin()))
    return std::nullopt;
  return Bytes(k_session);
}

// Single-owner session map keyed by session id. compute_key and abort both
// erase the session, so no ephemeral secret outlives the handshake.
class NtorSessionStore {
 public:
  const NtorClientState& put(NtorClientState st) {
    Bytes key = st.session_id;
    return sessions_.insert_or_assign(std::move(key), std::move(st)).first->second;
  }

  std::optional<Bytes> compute_key(ByteSpan session_id, ByteSpan y_bytes, ByteSpan tag) {
    auto it = sessions_.find(Bytes(session_id.begin(), session_id.end()));
    if (it == sessions_.end()) return std::nullopt;
    auto key = ntor_compute_key(it->second, y_bytes, tag);
    wipe(it->second);
    sessions_.erase(it);
    return key;
  }

  void abort(ByteSpan session_id) {
    auto it = sessions_.find(Bytes(session_id.begin(), session_id.end()));
    if (it == sessions_.end()) return;
    wipe(it->second);
    sessions_.erase(it);
  }

  bool has(ByteSpan session_id) const {
    return sessions_.count(Bytes(session_id.begin(), session_id.end())) > 0;
  }
  size_t size() const { return sessions_.size(); }

 private:
  static void wipe(NtorClientState& st) {
    st.x = bls12::Fr::zero();
    secure_wipe(st.challenge);
    secure_wipe(st.server_pk);
  }
  std::map<Bytes, NtorClientState> sessions_;
};

}  // namespace backref
