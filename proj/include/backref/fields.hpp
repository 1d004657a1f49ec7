#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include "backref/bytes.hpp"

namespace backref::bls12 {

using u64 = uint64_t;
using u128 = unsigned __int128;

// ---------- fixed-size little-endian limb helpers ----------

template <size_t N>
using Limbs = std::array<u64, N>;

template <size_t N>
constexpr bool limbs_is_zero(const Limbs<N>& a) {
  for (auto v : a)
    if (v) return false;
  return true;
}

template <size_t N>
constexpr int limbs_cmp(const Limbs<N>& a, const Limbs<N>& b) {
  for (size_t i = N; i-- > 0;) {
    if (a[i] < b[i]) return -1;
    if (a[i] > b[i]) return 1;
  }
  return 0;
}

// a += b, returns carry
template <size_t N>
constexpr u64 limbs_add(Limbs<N>& a, const Limbs<N>& b) {
  u64 carry = 0;
  for (size_t i = 0; i < N; ++i) {
    u128 s = u128(a[i]) + b[i] + carry;
    a[i] = u64(s);
    carry = u64(s >> 64);
  }
  return carry;
}

// a -= b, returns borrow
template <size_t N>
constexpr u64 limbs_sub(Limbs<N>& a, const Limbs<N>& b) {
  u64 borrow = 0;
  for (size_t i = 0; i < N; ++i) {
    u128 s = u128(a[i]) - b[i] - borrow;
    a[i] = u64(s);
    borrow = u64(s >> 64) ? 1 : 0;
  }
  return borrow;
}

template <size_t N>
constexpr Limbs<N> limbs_from_hex(std::string_view hex) {
  Limbs<N> out{};
  size_t bit = 0;
  for (size_t i = hex.size(); i-- > 0 && bit < 64 * N;) {
    char c = hex[i];
    if (c == '_' || c == ' ') continue;
    u64 v = c >= '0' && c <= '9'   ? u64(c - '0')
            : c >= 'a' && c <= 'f' ? u64(c - 'a' + 10)
            : c >= 'A' && c <= 'F' ? u64(c - 'A' + 10)
                                   : 0;
    out[bit / 64] |= v << (bit % 64);
    bit += 4;
  }
  return out;
}

template <size_t N>
inline Bytes limbs_to_be_bytes(const Limbs<N>& a) {
  Bytes out(N * 8);
  for (size_t i = 0; i < N; ++i)
    for (size_t j = 0; j < 8; ++j) out[(N - 1 - i) * 8 + j] = uint8_t(a[i] >> (56 - 8 * j));
  return out;
}

template <size_t N>
inline std::optional<Limbs<N>> limbs_from_be_bytes(ByteSpan b) {
  if (b.size() != N * 8) return std::nullopt;
  Limbs<N> out{};
  for (size_t i = 0; i < N; ++i)
    for (size_t j = 0; j < 8; ++j) out[i] = out[i] << 8 | b[(N - 1 - i) * 8 + j];
  return out;
}

// ---------- Montgomery context ----------

// All derived constants are computed from the modulus at startup instead of
// being transcribed, so the only trusted inputs are the prime itself.
template <size_t N>
struct FieldCtx {
  Limbs<N> mod{};
  Limbs<N> r1{};   // 2^(64N) mod p       (Montgomery one)
  Limbs<N> r2{};   // 2^(128N) mod p
  u64 inv = 0;     // -p^{-1} mod 2^64

  constexpr explicit FieldCtx(const Limbs<N>& m) : mod(m) {
    // inv via Newton iteration on 2-adic inverse
    u64 x = m[0];
    for (int i = 0; i < 6; ++i) x *= 2 - m[0] * x;
    inv = ~x + 1;

    // r1, r2 by repeated doubling mod p
    Limbs<N> t{};
    t[0] = 1;
    auto dbl_mod = [&](Limbs<N>& v) {
      u64 carry = 0;
      for (size_t i = 0; i < N; ++i) {
        u64 next = v[i] >> 63;
        v[i] = v[i] << 1 | carry;
        carry = next;
      }
      if (carry || limbs_cmp(v, mod) >= 0) limbs_sub(v, mod);
    };
    for (size_t i = 0; i < 64 * N; ++i) dbl_mod(t);
    r1 = t;
    for (size_t i = 0; i < 64 * N; ++i) dbl_mod(t);
    r2 = t;
  }
};

// CIOS Montgomery multiplication: out = a*b / 2^(64N) mod p
template <size_t N>
inline void mont_mul(const FieldCtx<N>& ctx, const Limbs<N>& a, const Limbs<N>& b,
                     Limbs<N>& out) {
  u64 t[N + 2] = {0};
  for (size_t i = 0; i < N; ++i) {
    u64 carry = 0;
    for (size_t j = 0; j < N; ++j) {
      u128 s = u128(a[j]) * b[i] + t[j] + carry;
      t[j] = u64(s);
      carry = u64(s >> 64);
    }
    u128 s = u128(t[N]) + carry;
    t[N] = u64(s);
    t[N + 1] += u64(s >> 64);

    u64 m = t[0] * ctx.inv;
    s = u128(t[0]) + u128(m) * ctx.mod[0];
    carry = u64(s >> 64);
    for (size_t j = 1; j < N; ++j) {
      s = u128(t[j]) + u128(m) * ctx.mod[j] + carry;
      t[j - 1] = u64(s);
      carry = u64(s >> 64);
    }
    s = u128(t[N]) + carry;
    t[N - 1] = u64(s);
    t[N] = t[N + 1] + u64(s >> 64);
    t[N + 1] = 0;
  }
  Limbs<N> r;
  for (size_t i = 0; i < N; ++i) r[i] = t[i];
  if (t[N] || limbs_cmp(r, ctx.mod) >= 0) limbs_sub(r, ctx.mod);
  out = r;
}

// ---------- prime field element ----------
//
// Tag supplies: static constexpr size_t kLimbs; static const FieldCtx<kLimbs>& ctx();

template <typename Tag>
class Fe {
 public:
  static constexpr size_t N = Tag::kLimbs;
  using L = Limbs<N>;

  constexpr Fe() : v_{} {}

  static Fe zero() { return Fe(); }
  static Fe one() {
    Fe r;
    r.v_ = ctx().r1;
    return r;
  }
  static Fe from_u64(u64 x) {
    L raw{};
    raw[0] = x;
    return from_raw(raw);
  }
  // raw little-endian limbs, must be < p
  static Fe from_raw(const L& raw) {
    Fe r;
    mont_mul(ctx(), raw, ctx().r2, r.v_);
    return r;
  }
  L to_raw() const {
    L one{};
    one[0] = 1;
    L out;
    mont_mul(ctx(), v_, one, out);
    return out;
  }

  static std::optional<Fe> from_be_bytes(ByteSpan b) {
    auto raw = limbs_from_be_bytes<N>(b);
    if (!raw || limbs_cmp(*raw, ctx().mod) >= 0) return std::nullopt;
    return from_raw(*raw);
  }
  // arbitrary-length big-endian fold, reduced mod p (for uniform derivation)
  static Fe from_be_bytes_wide(ByteSpan b) {
    Fe acc = zero();
    Fe c256 = from_u64(256);
    for (uint8_t byte : b) {
      acc = acc * c256;
      acc = acc + from_u64(byte);
    }
    return acc;
  }
  Bytes to_be_bytes() const { return limbs_to_be_bytes<N>(to_raw()); }

  bool is_zero() const { return limbs_is_zero<N>(v_); }
  bool operator==(const Fe& o) const { return v_ == o.v_; }
  bool operator!=(const Fe& o) const { return !(*this == o); }

  Fe operator+(const Fe& o) const {
    Fe r = *this;
    u64 carry = limbs_add<N>(r.v_, o.v_);
    if (carry || limbs_cmp(r.v_, ctx().mod) >= 0) limbs_sub(r.v_, ctx().mod);
    return r;
  }
  Fe operator-(const Fe& o) const {
    Fe r = *this;
    if (limbs_sub<N>(r.v_, o.v_)) limbs_add(r.v_, ctx().mod);
    return r;
  }
  Fe operator-() const { return zero() - *this; }
  Fe operator*(const Fe& o) const {
    Fe r;
    mont_mul(ctx(), v_, o.v_, r.v_);
    return r;
  }
  Fe square() const { return *this * *this; }
  Fe dbl() const { return *this + *this; }

  // exponent given as raw little-endian limbs (any length)
  template <size_t M>
  Fe pow(const Limbs<M>& e) const {
    Fe result = one();
    bool started = false;
    for (size_t i = M; i-- > 0;) {
      for (int bit = 63; bit >= 0; --bit) {
        if (started) result = result.square();
        if ((e[i] >> bit) & 1) {
          result = result * *this;
          started = true;
        }
      }
    }
    return result;
  }

  // binary extended GCD (HAC 14.61); zero maps to zero
  Fe inverse() const {
    if (is_zero()) return zero();
    const L& m = ctx().mod;
    L u = v_;  // inverting the Montgomery residue directly; corrected below
    L v = m;
    L x1{}, x2{};
    x1[0] = 1;
    auto is_even = [](const L& a) { return (a[0] & 1) == 0; };
    auto shr1 = [](L& a, u64 carry_in) {
      for (size_t i = 0; i < N; ++i) {
        u64 next = i + 1 < N ? a[i + 1] & 1 : carry_in;
        a[i] = a[i] >> 1 | next << 63;
      }
    };
    auto halve_mod = [&](L& a) {
      if ((a[0] & 1) == 0) {
        shr1(a, 0);
      } else {
        u64 carry = limbs_add<N>(a, m);
        shr1(a, carry);
      }
    };
    auto is_one = [](const L& a) {
      if (a[0] != 1) return false;
      for (size_t i = 1; i < N; ++i)
        if (a[i]) return false;
      return true;
    };
    while (!is_one(u) && !is_one(v)) {
      while (is_even(u)) {
        shr1(u, 0);
        halve_mod(x1);
      }
      while (is_even(v)) {
        shr1(v, 0);
        halve_mod(x2);
      }
      if (limbs_cmp<N>(u, v) >= 0) {
        limbs_sub<N>(u, v);
        if (limbs_sub<N>(x1, x2)) limbs_add<N>(x1, m);
      } else {
        limbs_sub<N>(v, u);
        if (limbs_sub<N>(x2, x1)) limbs_add<N>(x2, m);
      }
    }
    // x is (a R)^{-1} = a^{-1} R^{-1}; two R2 multiplications restore a^{-1} R
    Fe r;
    r.v_ = is_one(u) ? x1 : x2;
    mont_mul(ctx(), r.v_, ctx().r2, r.v_);
    mont_mul(ctx(), r.v_, ctx().r2, r.v_);
    return r;
  }

  // Legendre symbol == 1 or element is zero
  bool is_square() const {
    if (is_zero()) return true;
    L e = ctx().mod;  // (p-1)/2
    Limbs<N> one{};
    one[0] = 1;
    limbs_sub<N>(e, one);
    for (size_t i = 0; i < N; ++i) {
      e[i] >>= 1;
      if (i + 1 < N) e[i] |= e[i + 1] << 63;
    }
    return pow(e) == Fe::one();
  }

  // valid only for p ≡ 3 (mod 4)
  std::optional<Fe> sqrt() const {
    L e = ctx().mod;  // (p+1)/4
    Limbs<N> one{};
    one[0] = 1;
    limbs_add<N>(e, one);
    for (int k = 0; k < 2; ++k)
      for (size_t i = 0; i < N; ++i) {
        e[i] >>= 1;
        if (i + 1 < N) e[i] |= e[i + 1] << 63;
      }
    Fe r = pow(e);
    if (r.square() != *this) return std::nullopt;
    return r;
  }

  static const FieldCtx<N>& ctx() { return Tag::ctx(); }

 private:
  L v_;  // Montgomery form
};

// ---------- concrete fields ----------

struct FpTag {
  static constexpr size_t kLimbs = 6;
  static const FieldCtx<6>& ctx() {
    static const FieldCtx<6> c(limbs_from_hex<6>(
        "1a0111ea397fe69a4b1ba7b6434bacd764774b84f38512bf6730d2a0f6b0f6241eabfffeb153ffffb9feffff"
        "ffffaaab"));
    return c;
  }
};

struct FrTag {
  static constexpr size_t kLimbs = 4;
  static const FieldCtx<4>& ctx() {
    static const FieldCtx<4> c(limbs_from_hex<4>(
        "73eda753299d7d483339d80809a1d80553bda402fffe5bfeffffffff00000001"));
    return c;
  }
};

using Fp = Fe<FpTag>;
using Fr = Fe<FrTag>;

// true if a > p - a lexicographically (serialization sign bit)
inline bool fp_is_larger(const Fp& a) {
  if (a.is_zero()) return false;
  auto raw = a.to_raw();
  auto neg = FpTag::ctx().mod;
  limbs_sub<6>(neg, raw);
  return limbs_cmp<6>(raw, neg) > 0;
}

// ---------- quadratic extension Fp2 = Fp[u]/(u^2 + 1) ----------

struct Fp2 {
  Fp c0, c1;

  static Fp2 zero() { return {Fp::zero(), Fp::zero()}; }
  static Fp2 one() { return {Fp::one(), Fp::zero()}; }

  bool is_zero() const { return c0.is_zero() && c1.is_zero(); }
  bool operator==(const Fp2& o) const { return c0 == o.c0 && c1 == o.c1; }
  bool operator!=(const Fp2& o) const { return !(*this == o); }

  Fp2 operator+(const Fp2& o) const { return {c0 + o.c0, c1 + o.c1}; }
  Fp2 operator-(const Fp2& o) const { return {c0 - o.c0, c1 - o.c1}; }
  Fp2 operator-() const { return {-c0, -c1}; }
  Fp2 operator*(const Fp2& o) const {
    // Karatsuba with u^2 = -1
    Fp a = c0 * o.c0;
    Fp b = c1 * o.c1;
    Fp cross = (c0 + c1) * (o.c0 + o.c1);
    return {a - b, cross - a - b};
  }
  Fp2 square() const {
    Fp a = c0 + c1;
    Fp b = c0 - c1;
    Fp c = c0 * c1;
    return {a * b, c.dbl()};
  }
  Fp2 dbl() const { return {c0.dbl(), c1.dbl()}; }
  Fp2 conjugate() const { return {c0, -c1}; }
  Fp2 inverse() const {
    Fp norm = c0.square() + c1.square();
    Fp inv = norm.inverse();
    return {c0 * inv, -(c1 * inv)};
  }
  // multiply by the sextic non-residue xi = 1 + u
  Fp2 mul_by_xi() const { return {c0 - c1, c0 + c1}; }

  template <size_t M>
  Fp2 pow(const Limbs<M>& e) const {
    Fp2 result = one();
    bool started = false;
    for (size_t i = M; i-- > 0;)
      for (int bit = 63; bit >= 0; --bit) {
        if (started) result = result.square();
        if ((e[i] >> bit) & 1) {
          result = *this * result;
          started = true;
        }
      }
    return result;
  }

  // complex-method square root (p ≡ 3 mod 4); returns any root
  std::optional<Fp2> sqrt() const {
    if (is_zero()) return zero();
    if (c1.is_zero()) {
      if (c0.is_square()) {
        auto r = c0.sqrt();
        if (!r) return std::nullopt;
        return Fp2{*r, Fp::zero()};
      }
      auto r = (-c0).sqrt();
      if (!r) return std::nullopt;
      return Fp2{Fp::zero(), *r};
    }
    Fp norm = c0.square() + c1.square();
    auto s = norm.sqrt();
    if (!s) return std::nullopt;
    Fp two_inv = Fp::from_u64(2).inverse();
    Fp d = (c0 + *s) * two_inv;
    if (!d.is_square()) d = (c0 - *s) * two_inv;
    auto x0 = d.sqrt();
    if (!x0) return std::nullopt;
    if (x0->is_zero()) return std::nullopt;
    Fp x1 = c1 * two_inv * x0->inverse();
    Fp2 cand{*x0, x1};
    if (cand.square() != *this) return std::nullopt;
    return cand;
  }

  Bytes to_be_bytes() const {  // c1 ‖ c0, per the standard compressed layout
    Bytes out = c1.to_be_bytes();
    append(out, c0.to_be_bytes());
    return out;
  }
};

inline bool fp2_is_larger(const Fp2& a) {
  // lexicographic on (c1, c0)
  if (!a.c1.is_zero()) return fp_is_larger(a.c1);
  return fp_is_larger(a.c0);
}

// ---------- Fp6 = Fp2[v]/(v^3 - xi) ----------

struct Fp6 {
  Fp2 c0, c1, c2;

  static Fp6 zero() { return {Fp2::zero(), Fp2::zero(), Fp2::zero()}; }
  static Fp6 one() { return {Fp2::one(), Fp2::zero(), Fp2::zero()}; }

  bool is_zero() const { return c0.is_zero() && c1.is_zero() && c2.is_zero(); }
  bool operator==(const Fp6& o) const { return c0 == o.c0 && c1 == o.c1 && c2 == o.c2; }
  bool operator!=(const Fp6& o) const { return !(*this == o); }

  Fp6 operator+(const Fp6& o) const { return {c0 + o.c0, c1 + o.c1, c2 + o.c2}; }
  Fp6 operator-(const Fp6& o) const { return {c0 - o.c0, c1 - o.c1, c2 - o.c2}; }
  Fp6 operator-() const { return {-c0, -c1, -c2}; }

  Fp6 operator*(const Fp6& o) const {
    Fp2 t0 = c0 * o.c0;
    Fp2 t1 = c1 * o.c1;
    Fp2 t2 = c2 * o.c2;
    Fp2 r0 = t0 + ((c1 + c2) * (o.c1 + o.c2) - t1 - t2).mul_by_xi();
    Fp2 r1 = (c0 + c1) * (o.c0 + o.c1) - t0 - t1 + t2.mul_by_xi();
    Fp2 r2 = (c0 + c2) * (o.c0 + o.c2) - t0 - t2 + t1;
    return {r0, r1, r2};
  }

  // CH-SQR2: 2 squarings + 3 multiplications
  Fp6 square() const {
    Fp2 s0 = c0.square();
    Fp2 ab = c0 * c1;
    Fp2 s1 = ab.dbl();
    Fp2 s2 = (c0 - c1 + c2).square();
    Fp2 bc = c1 * c2;
    Fp2 s3 = bc.dbl();
    Fp2 s4 = c2.square();
    return {s3.mul_by_xi() + s0, s4.mul_by_xi() + s1, s1 + s2 + s3 - s0 - s4};
  }

  // multiply by v
  Fp6 mul_by_v() const { return {c2.mul_by_xi(), c0, c1}; }

  Fp6 inverse() const {
    Fp2 a = c0.square() - (c1 * c2).mul_by_xi();
    Fp2 b = c2.square().mul_by_xi() - c0 * c1;
    Fp2 c = c1.square() - c0 * c2;
    Fp2 f = (c0 * a + (c2 * b + c1 * c).mul_by_xi()).inverse();
    return {a * f, b * f, c * f};
  }
};

// ---------- Fp12 = Fp6[w]/(w^2 - v) ----------

struct Fp12 {
  Fp6 c0, c1;

  static Fp12 zero() { return {Fp6::zero(), Fp6::zero()}; }
  static Fp12 one() { return {Fp6::one(), Fp6::zero()}; }

  bool is_zero() const { return c0.is_zero() && c1.is_zero(); }
  bool operator==(const Fp12& o) const { return c0 == o.c0 && c1 == o.c1; }
  bool operator!=(const Fp12& o) const { return !(*this == o); }

  Fp12 operator+(const Fp12& o) const { return {c0 + o.c0, c1 + o.c1}; }
  Fp12 operator-(const Fp12& o) const { return {c0 - o.c0, c1 - o.c1}; }

  Fp12 operator*(const Fp12& o) const {
    Fp6 a = c0 * o.c0;
    Fp6 b = c1 * o.c1;
    Fp6 cross = (c0 + c1) * (o.c0 + o.c1);
    return {a + b.mul_by_v(), cross - a - b};
  }

  // complex squaring: 2 multiplications in Fp6
  Fp12 square() const {
    Fp6 m = c0 * c1;
    Fp6 r0 = (c0 + c1) * (c0 + c1.mul_by_v()) - m - m.mul_by_v();
    return {r0, m + m};
  }

  Fp12 conjugate() const { return {c0, -c1}; }

  Fp12 inverse() const {
    Fp6 t = (c0.square() - c1.square().mul_by_v()).inverse();
    return {c0 * t, -(c1 * t)};
  }

  template <size_t M>
  Fp12 pow(const Limbs<M>& e) const {
    Fp12 result = one();
    bool started = false;
    for (size_t i = M; i-- > 0;)
      for (int bit = 63; bit >= 0; --bit) {
        if (started) result = result.square();
        if ((e[i] >> bit) & 1) {
          result = *this * result;
          started = true;
        }
      }
    return result;
  }

  Fp12 pow_u64(u64 e) const {
    Limbs<1> l{e};
    return pow(l);
  }

  // Frobenius endomorphism x -> x^p.
  // Basis element w^k picks up xi^(k(p-1)/6); Fp2 coefficients conjugate.
  Fp12 frobenius() const;
};

namespace detail {
struct FrobeniusConstants {
  std::array<Fp2, 6> gamma;  // gamma[k] = xi^(k(p-1)/6), k = 0..5
  FrobeniusConstants() {
    // (p-1)/6 as limbs
    auto e = FpTag::ctx().mod;
    Limbs<6> one{};
    one[0] = 1;
    limbs_sub<6>(e, one);
    // divide by 6: divide by 2 then by 3
    u64 rem = 0;
    for (size_t i = 6; i-- > 0;) {
      u128 cur = (u128(rem) << 64) | e[i];
      e[i] = u64(cur >> 1);
      rem = u64(cur & 1);
    }
    rem = 0;
    for (size_t i = 6; i-- > 0;) {
      u128 cur = (u128(rem) << 64) | e[i];
      e[i] = u64(cur / 3);
      rem = u64(cur % 3);
    }
    Fp2 xi{Fp::one(), Fp::one()};
    gamma[0] = Fp2::one();
    gamma[1] = xi.pow(e);
    for (int k = 2; k < 6; ++k) gamma[k] = gamma[k - 1] * gamma[1];
  }
};
inline const FrobeniusConstants& frob() {
  static const FrobeniusConstants f;
  return f;
}
}  // namespace detail

inline Fp12 Fp12::frobenius() const {
  const auto& g = detail::frob().gamma;
  // element = sum_{i,j} c_{i,j} v^j w^i with v = w^2; exponent k = 2j + i
  Fp12 r;
  r.c0.c0 = c0.c0.conjugate();                 // k = 0
  r.c0.c1 = c0.c1.conjugate() * g[2];          // k = 2
  r.c0.c2 = c0.c2.conjugate() * g[4];          // k = 4
  r.c1.c0 = c1.c0.conjugate() * g[1];          // k = 1
  r.c1.c1 = c1.c1.conjugate() * g[3];          // k = 3
  r.c1.c2 = c1.c2.conjugate() * g[5];          // k = 5
  return r;
}

}  // namespace backref::bls12
