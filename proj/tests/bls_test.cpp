#include "backref/bls.hpp"

#include <gtest/gtest.h>

#include <set>

#include "backref/rng.hpp"
#include "oracle.hpp"

using namespace backref;

namespace {

Drbg& rng() {
  static Drbg g(uint64_t(0xb15));
  return g;
}

TEST(Bls, KeygenDefinitionAndDeterminism) {
  Bytes seed = to_bytes("some-seed");
  BlsKeyPair kp = bls_keygen(seed);
  // pk = g2^sk re-derivable
  EXPECT_EQ(bls12::g2_encode(bls12::g2_generator().mul(kp.sk)), kp.pk);
  EXPECT_FALSE(kp.sk.is_zero());
  BlsKeyPair again = bls_keygen(seed);
  EXPECT_EQ(again.pk, kp.pk);
  EXPECT_EQ(again.sk_bytes(), kp.sk_bytes());
}

TEST(Bls, DistinctSeedsDistinctKeys) {
  // 1000 seeds, expect zero sk collisions
  std::set<Bytes> sks;
  for (int i = 0; i < 1000; ++i) {
    Bytes seed;
    put_u32(seed, uint32_t(i));
    sks.insert(bls_keygen(seed).sk_bytes());
  }
  EXPECT_EQ(sks.size(), 1000u);
}

TEST(Bls, SignVerifyRoundTrip) {
  for (int i = 0; i < 5; ++i) {
    BlsKeyPair kp = bls_keygen(rng().next_bytes(16));
    Bytes msg = rng().next_bytes(10 + i * 7);
    BlsSignature sig = bls_sign(kp.sk, msg);
    EXPECT_TRUE(bls_verify(kp.pk, msg, sig));
    Bytes other = msg;
    other[0] ^= 1;
    EXPECT_FALSE(bls_verify(kp.pk, other, sig));
  }
}

TEST(Bls, IdentityExponentSignsToHash) {
  // sk = 1 gives sigma = H(m)
  bls12::Fr one = bls12::Fr::from_u64(1);
  Bytes msg = to_bytes("identity exponent");
  BlsSignature sig = bls_sign(one, msg);
  bls12::G1 h = bls12::hash_to_g1(msg, dst::kGenericSig);
  EXPECT_EQ(sig.sigma, bls12::g1_encode(h));
}

TEST(Bls, SignMatchesIndependentExponentiationOracle) {
  // sigma recomputed by a GMP affine double-and-add over the same curve
  for (int i = 0; i < 5; ++i) {
    BlsKeyPair kp = bls_keygen(rng().next_bytes(16));
    Bytes msg = rng().next_bytes(20);
    bls12::G1 h = bls12::hash_to_g1(msg, dst::kGenericSig);
    auto ha = h.to_affine();
    oracle::AffinePoint base;
    base.infinity = false;
    base.x = oracle::Mpz::from_bytes(ha->first.to_be_bytes());
    base.y = oracle::Mpz::from_bytes(ha->second.to_be_bytes());
    ASSERT_TRUE(oracle::on_curve(base));
    oracle::AffinePoint expect =
        oracle::curve_mul(base, oracle::Mpz::from_bytes(kp.sk.to_be_bytes()));

    BlsSignature sig = bls_sign(kp.sk, msg);
    auto sp = bls12::g1_decode(sig.sigma);
    ASSERT_TRUE(sp.has_value());
    auto sa = sp->to_affine();
    EXPECT_EQ(oracle::Mpz::from_bytes(sa->first.to_be_bytes()), expect.x);
    EXPECT_EQ(oracle::Mpz::from_bytes(sa->second.to_be_bytes()), expect.y);
  }
}

TEST(Bls, IdentitySignatureRejected) {
  // sigma = G1 identity fails whenever H(m) is not the identity:
  // e(H(m), pk) != 1 = e(identity, g2)
  BlsKeyPair kp = bls_keygen(to_bytes("seed"));
  Bytes msg = to_bytes("message");
  bls12::G1 h = bls12::hash_to_g1(msg, dst::kGenericSig);
  ASSERT_FALSE(h.is_infinity());
  auto pk = bls12::g2_decode(kp.pk);
  bls12::Gt lhs = bls12::pair(h, *pk);
  bls12::Gt rhs = bls12::pair(bls12::G1::infinity(), bls12::g2_generator());
  EXPECT_EQ(rhs, bls12::gt_identity());
  EXPECT_NE(lhs, rhs);
  BlsSignature ident{bls12::g1_encode(bls12::G1::infinity())};
  EXPECT_FALSE(bls_verify(kp.pk, msg, ident));
}

TEST(Bls, MutationRejection) {
  // any single-byte mutation of (m, sigma, pk) verifies false; mutations that
  // break the encoding count as false (capped sample here; the acceptance
  // suite runs the full 1000)
  BlsKeyPair kp = bls_keygen(to_bytes("mutation-seed"));
  Bytes msg = to_bytes("the signed message for mutation trials");
  BlsSignature sig = bls_sign(kp.sk, msg);
  ASSERT_TRUE(bls_verify(kp.pk, msg, sig));
  Drbg r(uint64_t(7));
  for (int i = 0; i < 60; ++i) {
    Bytes m = msg, s = sig.sigma, p = kp.pk;
    uint64_t which = r.next_u64() % 3;
    Bytes& target = which == 0 ? m : which == 1 ? s : p;
    size_t pos = r.next_u64() % target.size();
    uint8_t delta = uint8_t(1 + r.next_u64() % 255);
    target[pos] ^= delta;
    EXPECT_FALSE(bls_verify(p, m, s, dst::kGenericSig));
  }
}

TEST(Bls, MalformedEncodingsVerifyFalse) {
  BlsKeyPair kp = bls_keygen(to_bytes("x"));
  Bytes msg = to_bytes("m");
  BlsSignature sig = bls_sign(kp.sk, msg);
  EXPECT_FALSE(bls_verify(Bytes(96, 0), msg, sig));
  EXPECT_FALSE(bls_verify(Bytes{}, msg, sig));
  EXPECT_FALSE(bls_verify(kp.pk, msg, Bytes(48, 0xff), dst::kGenericSig));
  EXPECT_FALSE(bls_verify(kp.pk, msg, Bytes{}, dst::kGenericSig));
}

TEST(Bls, GroupSuiteBilinearityAndHash) {
  const GroupSuite& suite = GroupSuite::get();
  bls12::Fr a = bls12::derive_scalar(to_bytes("a"), to_bytes("T"));
  bls12::Fr b = bls12::derive_scalar(to_bytes("b"), to_bytes("T"));
  EXPECT_EQ(suite.pair(suite.g1().mul(a), suite.g2().mul(b)),
            suite.pair(suite.g1().mul(a * b), suite.g2()));
  EXPECT_NE(suite.pair(suite.g1(), suite.g2()), bls12::gt_identity());
  bls12::G1 h1 = suite.hash_to_g1(to_bytes("in"), dst::kGenericSig);
  bls12::G1 h2 = suite.hash_to_g1(to_bytes("in"), dst::kGenericSig);
  EXPECT_TRUE(h1.equals(h2));
  EXPECT_TRUE(h1.is_on_curve());
}

}  // namespace
