#include "backref/pseudonym.hpp"

#include <gtest/gtest.h>

#include <set>
#include <thread>

#include "backref/rng.hpp"

using namespace backref;

namespace {

constexpr Timestamp kNow = 1700000000;
constexpr Timestamp kWin = 300;

TEST(Pseudonym, DefinitionAndRederivable) {
  Pseudonym p = new_pseudonym(to_bytes("seed"), 1);
  ASSERT_TRUE(p.secret.has_value());
  EXPECT_EQ(bls12::g2_encode(bls12::g2_generator().mul(*p.secret)), p.element);
  EXPECT_EQ(p.hop_index, 1u);
}

TEST(Pseudonym, FreshPerHopAndPerSeed) {
  Pseudonym a1 = new_pseudonym(to_bytes("seed"), 1);
  Pseudonym a2 = new_pseudonym(to_bytes("seed"), 2);
  Pseudonym b1 = new_pseudonym(to_bytes("other"), 1);
  EXPECT_NE(a1.element, a2.element);
  EXPECT_NE(a1.element, b1.element);
}

TEST(Pseudonym, TenThousandPseudonymsNoCollision) {
  std::vector<std::vector<Bytes>> lanes(2);
  auto worker = [&](int lane, int begin, int end) {
    Drbg rng(uint64_t(11 + lane));
    for (int i = begin; i < end; ++i)
      lanes[lane].push_back(new_pseudonym(rng.next_bytes(16), 1 + i % 3).element);
  };
  std::thread half(worker, 0, 0, 5000);
  worker(1, 5000, 10000);
  half.join();
  std::set<Bytes> seen;
  for (const auto& lane : lanes)
    for (const auto& p : lane) seen.insert(p);
  EXPECT_EQ(seen.size(), 10000u);
}

TEST(SignPseudonym, LinkabilityRoundTrip) {
  Pseudonym prev = new_pseudonym(to_bytes("prev"), 1);
  Pseudonym next = new_pseudonym(to_bytes("next"), 2);
  SignedPseudonym sp = sign_pseudonym(*prev.secret, next.element, kNow);
  EXPECT_EQ(sp.signer_kind, SignerKind::kPseudonymKey);
  EXPECT_EQ(sp.signer_ref, prev.element);
  EXPECT_EQ(verify_linkability(prev.element, sp, kNow, kWin), VerifyStatus::kOk);
}

TEST(SignPseudonym, TimestampBinding) {
  Pseudonym prev = new_pseudonym(to_bytes("p"), 1);
  Pseudonym next = new_pseudonym(to_bytes("n"), 2);
  SignedPseudonym sp = sign_pseudonym(*prev.secret, next.element, kNow);
  sp.ts += 1;  // altering ts by one second breaks the signature
  EXPECT_EQ(verify_linkability(prev.element, sp, kNow, kWin), VerifyStatus::kBadSignature);
}

TEST(SignPseudonym, EqualsGenericBlsPath) {
  Pseudonym prev = new_pseudonym(to_bytes("p2"), 1);
  Pseudonym next = new_pseudonym(to_bytes("n2"), 2);
  SignedPseudonym sp = sign_pseudonym(*prev.secret, next.element, kNow);
  Bytes msg = pseudonym_message(next.element, kNow);
  BlsSignature generic = bls_sign(*prev.secret, msg, dst::kPseudonymSig);
  EXPECT_EQ(sp.sigma, generic.sigma);
}

TEST(VerifyLinkability, FreshnessBoundary) {
  Pseudonym prev = new_pseudonym(to_bytes("pb"), 1);
  Pseudonym next = new_pseudonym(to_bytes("nb"), 2);
  SignedPseudonym sp = sign_pseudonym(*prev.secret, next.element, kNow);
  EXPECT_EQ(verify_linkability(prev.element, sp, kNow, kWin), VerifyStatus::kOk);
  EXPECT_EQ(verify_linkability(prev.element, sp, kNow + kWin, kWin), VerifyStatus::kOk);
  EXPECT_EQ(verify_linkability(prev.element, sp, kNow + kWin + 1, kWin),
            VerifyStatus::kTimestampStale);
}

TEST(VerifyLinkability, CrossCircuitSubstitutionFails) {
  // signature generated under a different circuit's x must not verify
  Pseudonym circuit_a = new_pseudonym(to_bytes("circuit-a-hop1"), 1);
  Pseudonym circuit_b = new_pseudonym(to_bytes("circuit-b-hop1"), 1);
  Pseudonym next = new_pseudonym(to_bytes("hop2"), 2);
  SignedPseudonym forged = sign_pseudonym(*circuit_b.secret, next.element, kNow);
  EXPECT_EQ(verify_linkability(circuit_a.element, forged, kNow, kWin),
            VerifyStatus::kBadSignature);
}

TEST(Endorse, VerifiesUnderNodeKeyOnly) {
  BlsKeyPair node = bls_keygen(to_bytes("node-key"));
  BlsKeyPair other = bls_keygen(to_bytes("other-key"));
  Pseudonym x = new_pseudonym(to_bytes("x"), 2);
  SignedPseudonym sp = endorse_pseudonym(node.sk, x.element, kNow);
  EXPECT_EQ(sp.signer_kind, SignerKind::kNodeLongTermKey);
  EXPECT_EQ(sp.signer_ref, node.pk);
  EXPECT_EQ(verify_endorsement(node.pk, sp, kNow, kWin), VerifyStatus::kOk);
  EXPECT_EQ(verify_endorsement(other.pk, sp, kNow, kWin), VerifyStatus::kBadSignature);
}

TEST(Endorse, DomainSeparatedFromPseudonymSignature) {
  // same (X, ts, scalar): endorsement and pseudonym signature bytes differ
  bls12::Fr k = bls12::derive_scalar(to_bytes("shared-scalar"), to_bytes("T"));
  Pseudonym x = new_pseudonym(to_bytes("target"), 2);
  SignedPseudonym as_pseudonym = sign_pseudonym(k, x.element, kNow);
  SignedPseudonym as_endorsement = endorse_pseudonym(k, x.element, kNow);
  EXPECT_NE(as_pseudonym.sigma, as_endorsement.sigma);
}

TEST(Stream, SignVerifyRoundTrip) {
  Pseudonym exit = new_pseudonym(to_bytes("exit"), 3);
  StreamRequest req{to_bytes("example.com"), 443, kNow};
  BlsSignature sig = sign_stream(*exit.secret, req);
  EXPECT_EQ(verify_stream(exit.element, req, sig.sigma, kNow, kWin), VerifyStatus::kOk);
  StreamRequest wrong_port = req;
  wrong_port.port = 80;
  EXPECT_EQ(verify_stream(exit.element, wrong_port, sig.sigma, kNow, kWin),
            VerifyStatus::kBadSignature);
}

TEST(Stream, ReplayOutsideWindowStale) {
  Pseudonym exit = new_pseudonym(to_bytes("exit2"), 3);
  StreamRequest req{to_bytes("example.com"), 443, kNow};
  BlsSignature sig = sign_stream(*exit.secret, req);
  EXPECT_EQ(verify_stream(exit.element, req, sig.sigma, kNow + 2 * kWin, kWin),
            VerifyStatus::kTimestampStale);
}

TEST(Stream, SubstituteExitPseudonymFails) {
  Pseudonym exit_a = new_pseudonym(to_bytes("exit-a"), 3);
  Pseudonym exit_b = new_pseudonym(to_bytes("exit-b"), 3);
  StreamRequest req{to_bytes("host"), 22, kNow};
  BlsSignature sig = sign_stream(*exit_b.secret, req);
  EXPECT_EQ(verify_stream(exit_a.element, req, sig.sigma, kNow, kWin),
            VerifyStatus::kBadSignature);
}

TEST(Stream, EqualsGenericBlsPath) {
  Pseudonym exit = new_pseudonym(to_bytes("exit3"), 3);
  StreamRequest req{to_bytes("10.9.8.7"), 8080, kNow};
  BlsSignature direct = sign_stream(*exit.secret, req);
  BlsSignature generic = bls_sign(*exit.secret, req.canonical_message(), dst::kStreamSig);
  EXPECT_EQ(direct.sigma, generic.sigma);
}

TEST(Stream, CanonicalMessageInjective) {
  // length-prefixed address: moving a byte between address and port changes m
  StreamRequest a{to_bytes("ab"), 0x6364, kNow};    // "ab" + port 'cd'
  StreamRequest b{to_bytes("abc"), 0x6400, kNow};
  EXPECT_NE(a.canonical_message(), b.canonical_message());
}

TEST(SignedPseudonym, SerializationBitExact) {
  Pseudonym prev = new_pseudonym(to_bytes("ser"), 1);
  Pseudonym next = new_pseudonym(to_bytes("ser2"), 2);
  SignedPseudonym sp = sign_pseudonym(*prev.secret, next.element, kNow);
  Bytes wire = sp.serialize();
  ASSERT_EQ(wire.size(), SignedPseudonym::kWireBytes);
  EXPECT_EQ(wire[0], uint8_t(SignerKind::kPseudonymKey));
  auto back = SignedPseudonym::deserialize(wire);
  ASSERT_TRUE(back.has_value());
  EXPECT_EQ(back->serialize(), wire);
  EXPECT_EQ(back->element, sp.element);
  EXPECT_EQ(back->ts, sp.ts);
  EXPECT_EQ(back->sigma, sp.sigma);
  EXPECT_EQ(back->signer_ref, sp.signer_ref);
}

TEST(SignedPseudonym, StructurallyAnonymous) {
  // serialized bytes are a function of (X, ts, signing scalar) alone: two
  // signers with identical inputs differ only in signature+ref fields, and
  // every byte region is one of the five declared fields
  Pseudonym next = new_pseudonym(to_bytes("anon-next"), 2);
  bls12::Fr k = bls12::derive_scalar(to_bytes("anon-scalar"), to_bytes("T"));
  SignedPseudonym sp = sign_pseudonym(k, next.element, kNow);
  Bytes wire = sp.serialize();
  // exact field layout accounts for every byte
  size_t expect = 1 + 96 + 4 + 48 + 96;
  EXPECT_EQ(wire.size(), expect);
  // identical inputs give identical bytes regardless of who computes them
  SignedPseudonym again = sign_pseudonym(k, next.element, kNow);
  EXPECT_EQ(again.serialize(), wire);
}

TEST(SignedPseudonym, EveryFieldMutationFails) {
  Pseudonym prev = new_pseudonym(to_bytes("m1"), 1);
  Pseudonym next = new_pseudonym(to_bytes("m2"), 2);
  SignedPseudonym sp = sign_pseudonym(*prev.secret, next.element, kNow);
  Drbg rng(uint64_t(5));
  Bytes wire = sp.serialize();
  for (int i = 0; i < 40; ++i) {
    Bytes mutated = wire;
    size_t pos = rng.next_u64() % mutated.size();
    mutated[pos] ^= uint8_t(1 + rng.next_u64() % 255);
    auto back = SignedPseudonym::deserialize(mutated);
    if (!back) continue;  // malformed counts as failure
    EXPECT_NE(verify_linkability(prev.element, *back, kNow, kWin), VerifyStatus::kOk);
  }
}

TEST(DomainSeparation, ThreeFormsPairwiseDistinct) {
  bls12::Fr k = bls12::derive_scalar(to_bytes("k"), to_bytes("T"));
  Pseudonym x = new_pseudonym(to_bytes("x-ds"), 1);
  // stream message deliberately identical bytes to X‖ts
  Bytes msg = pseudonym_message(x.element, kNow);
  Bytes s1 = bls_sign(k, msg, dst::kPseudonymSig).sigma;
  Bytes s2 = bls_sign(k, msg, dst::kEndorseSig).sigma;
  Bytes s3 = bls_sign(k, msg, dst::kStreamSig).sigma;
  EXPECT_NE(s1, s2);
  EXPECT_NE(s2, s3);
  EXPECT_NE(s1, s3);
}

}  // namespace
