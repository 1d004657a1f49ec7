#pragma once

#include <optional>

#include "backref/fields.hpp"
#include "backref/hashing.hpp"

namespace backref::bls12 {

// curve parameter z (negative): |z| = 2^63 + 2^62 + 2^60 + 2^57 + 2^48 + 2^16
inline constexpr u64 kAbsZ = 0xd201000000010000ull;

inline constexpr size_t kG1Bytes = 48;
inline constexpr size_t kG2Bytes = 96;
inline constexpr size_t kScalarBytes = 32;

// ---------- field traits used by the generic point ----------

template <typename F>
struct CurveB;

template <>
struct CurveB<Fp> {
  static Fp value() { return Fp::from_u64(4); }
};

template <>
struct CurveB<Fp2> {
  static Fp2 value() { return Fp2{Fp::from_u64(4), Fp::from_u64(4)}; }  // 4(1+u)
};

// ---------- Jacobian point over a generic field, y^2 = x^3 + b ----------

template <typename F>
struct Point {
  F X, Y, Z;  // Z == 0 encodes infinity

  static Point infinity() { return {F::one(), F::one(), F::zero()}; }
  bool is_infinity() const { return Z.is_zero(); }

  static Point from_affine(const F& x, const F& y) { return {x, y, F::one()}; }

  // (x, y) unless infinity
  std::optional<std::pair<F, F>> to_affine() const {
    if (is_infinity()) return std::nullopt;
    F zi = Z.inverse();
    F zi2 = zi.square();
    return std::make_pair(X * zi2, Y * zi2 * zi);
  }

  bool is_on_curve() const {
    if (is_infinity()) return true;
    auto a = to_affine();
    F x = a->first, y = a->second;
    return y.square() == x.square() * x + CurveB<F>::value();
  }

  Point dbl() const {
    if (is_infinity()) return *this;
    // dbl-2009-l (a = 0)
    F A = X.square();
    F B = Y.square();
    F C = B.square();
    F D = ((X + B).square() - A - C).dbl();
    F E = A + A + A;
    F Fv = E.square();
    F X3 = Fv - D.dbl();
    F Y3 = E * (D - X3) - C.dbl().dbl().dbl();
    F Z3 = (Y * Z).dbl();
    return {X3, Y3, Z3};
  }

  Point add(const Point& o) const {
    if (is_infinity()) return o;
    if (o.is_infinity()) return *this;
    // add-2007-bl
    F Z1Z1 = Z.square();
    F Z2Z2 = o.Z.square();
    F U1 = X * Z2Z2;
    F U2 = o.X * Z1Z1;
    F S1 = Y * o.Z * Z2Z2;
    F S2 = o.Y * Z * Z1Z1;
    if (U1 == U2) {
      if (S1 == S2) return dbl();
      return infinity();
    }
    F H = U2 - U1;
    F I = H.dbl().square();
    F J = H * I;
    F r = (S2 - S1).dbl();
    F V = U1 * I;
    F X3 = r.square() - J - V.dbl();
    F Y3 = r * (V - X3) - (S1 * J).dbl();
    F Z3 = ((Z + o.Z).square() - Z1Z1 - Z2Z2) * H;
    return {X3, Y3, Z3};
  }

  Point negate() const { return {X, -Y, Z}; }

  bool equals(const Point& o) const {
    if (is_infinity() || o.is_infinity()) return is_infinity() == o.is_infinity();
    // cross-multiplied Jacobian comparison
    F z1 = Z.square(), z2 = o.Z.square();
    if (X * z2 != o.X * z1) return false;
    return Y * z2 * o.Z != o.Y * z1 * Z ? false : true;
  }

  // big-endian scalar bytes, plain double-and-add
  Point mul_be(ByteSpan scalar) const {
    Point acc = infinity();
    for (uint8_t byte : scalar)
      for (int bit = 7; bit >= 0; --bit) {
        acc = acc.dbl();
        if ((byte >> bit) & 1) acc = acc.add(*this);
      }
    return acc;
  }

  Point mul(const Fr& k) const {
    Bytes b = k.to_be_bytes();
    return mul_be(b);
  }
};

using G1 = Point<Fp>;
using G2 = Point<Fp2>;

// ---------- generators (standard BLS12-381 values) ----------

inline const G1& g1_generator() {
  static const G1 g = [] {
    Fp x = Fp::from_raw(limbs_from_hex<6>(
        "17f1d3a73197d7942695638c4fa9ac0fc3688c4f9774b905a14e3a3f171bac586c55e83ff97a1aeffb3af00a"
        "db22c6bb"));
    Fp y = Fp::from_raw(limbs_from_hex<6>(
        "08b3f481e3aaa0f1a09e30ed741d8ae4fcf5e095d5d00af600db18cb2c04b3edd03cc744a2888ae40caa2329"
        "46c5e7e1"));
    return G1::from_affine(x, y);
  }();
  return g;
}

inline const G2& g2_generator() {
  static const G2 g = [] {
    Fp2 x{Fp::from_raw(limbs_from_hex<6>(
              "024aa2b2f08f0a91260805272dc51051c6e47ad4fa403b02b4510b647ae3d1770bac0326a805bbef"
              "d48056c8c121bdb8")),
          Fp::from_raw(limbs_from_hex<6>(
              "13e02b6052719f607dacd3a088274f65596bd0d09920b61ab5da61bbdc7f5049334cf11213945d57"
              "e5ac7d055d042b7e"))};
    Fp2 y{Fp::from_raw(limbs_from_hex<6>(
              "0ce5d527727d6e118cc9cdc6da2e351aadfd9baa8cbdd3a76d429a695160d12c923ac9cc3baca289"
              "e193548608b82801")),
          Fp::from_raw(limbs_from_hex<6>(
              "0606c4a02ea734cc32acd2b02bc28b99cb3e287e85a763af267492ab572e99ab3f370d275cec1da1"
              "aaa9075ff05f79be"))};
    return G2::from_affine(x, y);
  }();
  return g;
}

// group order r as big-endian bytes (for subgroup checks)
inline const Bytes& order_be_bytes() {
  static const Bytes r = limbs_to_be_bytes<4>(FrTag::ctx().mod);
  return r;
}

template <typename F>
inline bool in_prime_subgroup(const Point<F>& p) {
  if (p.is_infinity()) return true;
  return p.mul_be(order_be_bytes()).is_infinity();
}

// ---------- compressed encodings (ZCash convention) ----------
// byte0 flags: 0x80 compressed, 0x40 infinity, 0x20 lexicographically-larger y
//
// These fixed-length big-endian encodings are the only representation of group
// elements that crosses module boundaries, log files, or the wire.

inline Bytes g1_encode(const G1& p) {
  Bytes out(kG1Bytes, 0);
  if (p.is_infinity()) {
    out[0] = 0xc0;
    return out;
  }
  auto a = p.to_affine();
  out = a->first.to_be_bytes();
  out[0] |= 0x80;
  if (fp_is_larger(a->second)) out[0] |= 0x20;
  return out;
}

inline std::optional<G1> g1_decode(ByteSpan b) {
  if (b.size() != kG1Bytes) return std::nullopt;
  uint8_t flags = b[0] & 0xe0;
  if (!(flags & 0x80)) return std::nullopt;  // only compressed form accepted
  Bytes body(b.begin(), b.end());
  body[0] &= 0x1f;
  if (flags & 0x40) {
    if (flags & 0x20) return std::nullopt;
    for (uint8_t c : body)
      if (c) return std::nullopt;
    return G1::infinity();
  }
  auto x = Fp::from_be_bytes(body);
  if (!x) return std::nullopt;
  auto y2 = x->square() * *x + CurveB<Fp>::value();
  auto y = y2.sqrt();
  if (!y) return std::nullopt;
  if (fp_is_larger(*y) != bool(flags & 0x20)) *y = -*y;
  G1 p = G1::from_affine(*x, *y);
  if (!in_prime_subgroup(p)) return std::nullopt;
  return p;
}

inline Bytes g2_encode(const G2& p) {
  Bytes out(kG2Bytes, 0);
  if (p.is_infinity()) {
    out[0] = 0xc0;
    return out;
  }
  auto a = p.to_affine();
  out = a->first.to_be_bytes();  // c1 ‖ c0
  out[0] |= 0x80;
  if (fp2_is_larger(a->second)) out[0] |= 0x20;
  return out;
}

inline std::optional<G2> g2_decode(ByteSpan b) {
  if (b.size() != kG2Bytes) return std::nullopt;
  uint8_t flags = b[0] & 0xe0;
  if (!(flags & 0x80)) return std::nullopt;
  Bytes body(b.begin(), b.end());
  body[0] &= 0x1f;
  if (flags & 0x40) {
    if (flags & 0x20) return std::nullopt;
    for (uint8_t c : body)
      if (c) return std::nullopt;
    return G2::infinity();
  }
  auto x1 = Fp::from_be_bytes(ByteSpan(body).first(48));
  auto x0 = Fp::from_be_bytes(ByteSpan(body).subspan(48));
  if (!x0 || !x1) return std::nullopt;
  Fp2 x{*x0, *x1};
  Fp2 y2 = x.square() * x + CurveB<Fp2>::value();
  auto y = y2.sqrt();
  if (!y) return std::nullopt;
  if (fp2_is_larger(*y) != bool(flags & 0x20)) *y = -*y;
  G2 p = G2::from_affine(x, *y);
  if (!in_prime_subgroup(p)) return std::nullopt;
  return p;
}

// ---------- scalars ----------

inline Bytes scalar_encode(const Fr& k) { return k.to_be_bytes(); }

inline std::optional<Fr> scalar_decode(ByteSpan b) {
  if (b.size() != kScalarBytes) return std::nullopt;
  return Fr::from_be_bytes(b);
}

// uniform scalar from seed material; zero rejected by re-hashing
inline Fr derive_scalar(ByteSpan seed, ByteSpan dst) {
  for (uint8_t ctr = 0;; ++ctr) {
    Bytes input(seed.begin(), seed.end());
    input.push_back(ctr);
    Bytes wide = expand_message_xmd(input, dst, 64);
    Fr k = Fr::from_be_bytes_wide(wide);
    if (!k.is_zero()) return k;
  }
}

// ---------- hash to G1 ----------
//
// Full-domain hash: expand_message_xmd drives a try-and-increment x-candidate
// search, then the cofactor is cleared. Deterministic per (msg, dst).

inline G1 hash_to_g1(ByteSpan msg, ByteSpan dst) {
  // effective G1 cofactor (z-1)^2 / 3 computed from the curve parameter
  static const Bytes cofactor = [] {
    u128 zm1 = u128(kAbsZ) + 1;  // |z - 1| with z negative
    u128 h = zm1 * zm1 / 3;
    Bytes b(16);
    for (int i = 15; i >= 0; --i) {
      b[i] = uint8_t(h);
      h >>= 8;
    }
    return b;
  }();
  for (uint32_t ctr = 0;; ++ctr) {
    Bytes input(msg.begin(), msg.end());
    put_u32(input, ctr);
    Bytes wide = expand_message_xmd(input, dst, 64);
    Fp x = Fp::from_be_bytes_wide(wide);
    Fp y2 = x.square() * x + CurveB<Fp>::value();
    auto y = y2.sqrt();
    if (!y) continue;
    if (fp_is_larger(*y)) *y = -*y;  // canonical root
    G1 p = G1::from_affine(x, *y).mul_be(cofactor);
    if (p.is_infinity()) continue;
    return p;
  }
}

}  // namespace backref::bls12
