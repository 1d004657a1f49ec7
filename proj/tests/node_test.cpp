#include "backref/node.hpp"

#include <gtest/gtest.h>

#include "backref/simnet.hpp"
#include "sim_fixtures.hpp"

using namespace backref;
using namespace fixtures;

namespace {

TEST(Directory, RegistrationAndDuplicates) {
  Directory dir;
  BlsKeyPair k1 = bls_keygen(to_bytes("n1"));
  BlsKeyPair k2 = bls_keygen(to_bytes("n2"));
  EXPECT_TRUE(dir.register_node(to_bytes("node-a"), to_bytes("10.0.0.1:1"), k1.pk));
  EXPECT_TRUE(dir.register_node(to_bytes("node-b"), to_bytes("10.0.0.2:1"), k2.pk));
  EXPECT_FALSE(dir.register_node(to_bytes("node-a"), to_bytes("10.0.0.9:1"), k2.pk));
  EXPECT_EQ(dir.roster().size(), 2u);
  // roster echoes registered pk byte-for-byte
  auto info = dir.find(to_bytes("node-a"));
  ASSERT_TRUE(info.has_value());
  EXPECT_EQ(info->pk, k1.pk);
  // first-write-wins on the duplicate
  EXPECT_EQ(dir.find(to_bytes("node-a"))->address, to_bytes("10.0.0.1:1"));
}

TEST(Setup, NodesSeeEachOtherInRoster) {
  ThreeHop t = make_three_hop(1);
  EXPECT_EQ(t.sim->directory().roster().size(), 3u);  // clients do not register
  auto entry = t.sim->directory().find(t.entry);
  ASSERT_TRUE(entry.has_value());
  EXPECT_EQ(entry->pk, t.sim->node(t.entry).keys().pk);
}

TEST(CreateCircuit, HonestThreeHop) {
  ThreeHop t = make_three_hop(2);
  Bytes handle;
  t.sim->at(1000, [&](Simnet& sim) {
    handle = sim.node(t.client).create_circuit(sim, {t.entry, t.middle, t.exit});
  });
  t.sim->run();
  EXPECT_EQ(count_user_events(*t.sim, t.client, "circuit-ready"), 1u);
  const auto& pc = t.sim->node(t.client).proxy_circuits().at(handle);
  ASSERT_EQ(pc.hops.size(), 3u);  // three session keys at the proxy
  EXPECT_TRUE(pc.established);
  for (const auto& hop : pc.hops) {
    EXPECT_EQ(hop.session_key.size(), kSessionKeyBytes);
    ASSERT_TRUE(hop.pseudonym.secret.has_value());
    // hop pseudonym is literally the ntor challenge: X = g2^x re-derivable
    EXPECT_EQ(bls12::g2_encode(bls12::g2_generator().mul(*hop.pseudonym.secret)),
              hop.pseudonym.element);
  }
  // relay-side keys agree with the proxy's
  const auto& entry_circuits = t.sim->node(t.entry).relay_circuits();
  ASSERT_EQ(entry_circuits.size(), 1u);
  EXPECT_EQ(entry_circuits.begin()->second.session_key, pc.hops[0].session_key);
  // the relay stored the same pseudonym the proxy signs for this hop
  EXPECT_EQ(entry_circuits.begin()->second.pseudonym_in, pc.hops[0].pseudonym.element);
}

TEST(CreateCircuit, SingleHopNoExtends) {
  ThreeHop t = make_three_hop(3);
  t.sim->at(1000, [&](Simnet& sim) { sim.node(t.client).create_circuit(sim, {t.entry}); });
  t.sim->run();
  EXPECT_EQ(count_user_events(*t.sim, t.client, "circuit-ready"), 1u);
  // exactly one create and one created, no relay cells
  auto kinds = t.sim->cells_by_kind();
  EXPECT_EQ(kinds[uint8_t(CellKind::kCreate)], 1u);
  EXPECT_EQ(kinds[uint8_t(CellKind::kCreated)], 1u);
  EXPECT_EQ(kinds[uint8_t(CellKind::kRelay)], 0u);
}

TEST(HandleCreate, UnsignedFromNodeClassDropped) {
  ThreeHop t = make_three_hop(4);
  // forge an unsigned create claiming to come from the middle node
  t.sim->at(1000, [&](Simnet& sim) {
    Pseudonym p = new_pseudonym(to_bytes("forged"), 1);
    CreatePayload payload;
    payload.pseudonym = p.element;
    sim.inject(t.middle, t.entry, Cell{sim.rng().next_bytes(kCidBytes), CellKind::kCreate,
                                       payload.encode()},
               1001);
  });
  t.sim->run();
  EXPECT_TRUE(t.sim->node(t.entry).relay_circuits().empty());
  EXPECT_EQ(t.sim->node(t.entry).stats().drops, 1u);
}

TEST(HandleCreate, ForgedEndorsementDropped) {
  ThreeHop t = make_three_hop(5);
  t.sim->at(1000, [&](Simnet& sim) {
    Pseudonym p = new_pseudonym(to_bytes("forged2"), 1);
    BlsKeyPair wrong = bls_keygen(to_bytes("not-middles-key"));
    CreatePayload payload;
    payload.pseudonym = p.element;
    payload.endorsement = endorse_pseudonym(wrong.sk, p.element, sim.now_ts());
    sim.inject(t.middle, t.entry, Cell{sim.rng().next_bytes(kCidBytes), CellKind::kCreate,
                                       payload.encode()},
               1001);
  });
  t.sim->run();
  EXPECT_TRUE(t.sim->node(t.entry).relay_circuits().empty());
  // no created reply went back to the forger
  for (const auto& ev : t.sim->transcript())
    if (ev.kind == "cell" && ev.from == t.entry) {
      auto cell = Cell::decode(ev.data);
      ASSERT_TRUE(cell.has_value());
      EXPECT_NE(cell->kind, CellKind::kCreated);
    }
}

TEST(Stream, EndToEndEchoAndEvidenceCounts) {
  ThreeHop t = make_three_hop(6);
  run_circuit_and_stream(t);
  // destination saw exactly one request, sourced from the exit node address
  ASSERT_EQ(t.sim->servers().size(), 1u);
  const auto& server = t.sim->servers()[0];
  ASSERT_EQ(server.log.size(), 1u);
  EXPECT_EQ(server.log[0].source_address, t.sim->node(t.exit).address());
  EXPECT_EQ(server.log[0].payload, to_bytes("GET /resource"));
  // canned reply came back through the full backward path
  const auto& events = t.sim->user_events();
  bool received = false;
  for (const auto& ev : events)
    if (ev.node == t.client && ev.kind == "received") {
      received = true;
      EXPECT_EQ(ev.data, to_bytes("canned destination reply"));
    }
  EXPECT_TRUE(received);
  // evidence: exactly 1 relay record at entry and middle, 1 exit record
  EXPECT_EQ(t.sim->node(t.entry).log().size(), 1u);
  EXPECT_EQ(t.sim->node(t.middle).log().size(), 1u);
  EXPECT_EQ(t.sim->node(t.exit).log().size(), 1u);
  EXPECT_TRUE(
      std::holds_alternative<ExitEvidenceRecord>(t.sim->node(t.exit).log().records()[0]));
  // entry record carries the unsigned-user marker with the client address
  const auto& entry_rec =
      std::get<RelayEvidenceRecord>(t.sim->node(t.entry).log().records()[0]);
  ASSERT_TRUE(entry_rec.inbound.user_address.has_value());
  EXPECT_EQ(*entry_rec.inbound.user_address, to_bytes("203.0.113.5"));
}

TEST(Stream, WhitelistedSkipsVerificationAndLogging) {
  ThreeHop t = make_three_hop(7, true, {"*.example.com"});
  // client deliberately sends without a stream signature by disabling backref
  // client-side: whitelisted requests need no signature
  ThreeHop unsigned_t = make_three_hop(8, true, {"*.example.com"});
  {
    Bytes handle;
    unsigned_t.sim->at(1000, [&](Simnet& sim) {
      handle = sim.node(unsigned_t.client)
                   .create_circuit(sim, {unsigned_t.entry, unsigned_t.middle, unsigned_t.exit});
    });
    unsigned_t.sim->at(5000, [&](Simnet& sim) {
      StreamRequest req{unsigned_t.server_addr, unsigned_t.server_port, sim.now_ts()};
      BeginBody body;
      body.request = req;
      body.payload = to_bytes("anonymous fetch");
      // no signature at all
      const auto& pc = sim.node(unsigned_t.client).proxy_circuits().at(handle);
      std::vector<Bytes> keys;
      for (const auto& h : pc.hops) keys.push_back(h.session_key);
      auto onion =
          wr_on(RelayPayload{RelayType::kBegin, body.encode()}.encode(), keys, sim.rng());
      ASSERT_TRUE(onion.has_value());
      sim.node(unsigned_t.client)
          .handle_cell(sim, unsigned_t.client, sim.node(unsigned_t.client).address(),
                       Cell{handle, CellKind::kRelay, *onion});
    });
  }
  // simpler path: run the ordinary signed flow against a whitelisted exit,
  // exit log must stay empty either way
  run_circuit_and_stream(t);
  EXPECT_EQ(t.sim->servers()[0].log.size(), 1u);
  EXPECT_EQ(t.sim->node(t.exit).log().size(), 0u);  // no evidence for whitelisted
  EXPECT_EQ(count_user_events(*t.sim, t.client, "received"), 1u);
}

TEST(Stream, WhitelistedUnsignedReachesDestination) {
  // BackRef fully disabled client side: unsigned begin to a whitelisted exit
  ThreeHop t = make_three_hop(9, true, {"dest.example.com:443"});
  Bytes handle;
  // hand-build an unsigned begin through a normally-built circuit
  t.sim->at(1000, [&](Simnet& sim) {
    handle = sim.node(t.client).create_circuit(sim, {t.entry, t.middle, t.exit});
  });
  t.sim->at(5000, [&](Simnet& sim) {
    const auto& pc = sim.node(t.client).proxy_circuits().at(handle);
    ASSERT_TRUE(pc.established);
    StreamRequest req{t.server_addr, t.server_port, sim.now_ts()};
    BeginBody body;
    body.request = req;
    body.payload = to_bytes("no signature attached");
    std::vector<Bytes> keys;
    for (const auto& h : pc.hops) keys.push_back(h.session_key);
    auto onion = wr_on(RelayPayload{RelayType::kBegin, body.encode()}.encode(), keys, sim.rng());
    ASSERT_TRUE(onion.has_value());
    sim.send_cell(t.client, t.entry, Cell{pc.cid, CellKind::kRelay, *onion});
  });
  t.sim->run();
  EXPECT_EQ(t.sim->servers()[0].log.size(), 1u);
  EXPECT_EQ(t.sim->node(t.exit).log().size(), 0u);
}

TEST(Stream, NonWhitelistedUnsignedNeverReachesDestination) {
  ThreeHop t = make_three_hop(10);  // empty whitelist
  Bytes handle;
  t.sim->at(1000, [&](Simnet& sim) {
    handle = sim.node(t.client).create_circuit(sim, {t.entry, t.middle, t.exit});
  });
  t.sim->at(5000, [&](Simnet& sim) {
    const auto& pc = sim.node(t.client).proxy_circuits().at(handle);
    StreamRequest req{t.server_addr, t.server_port, sim.now_ts()};
    BeginBody body;
    body.request = req;
    body.payload = to_bytes("unsigned");
    std::vector<Bytes> keys;
    for (const auto& h : pc.hops) keys.push_back(h.session_key);
    auto onion = wr_on(RelayPayload{RelayType::kBegin, body.encode()}.encode(), keys, sim.rng());
    ASSERT_TRUE(onion.has_value());
    sim.send_cell(t.client, t.entry, Cell{pc.cid, CellKind::kRelay, *onion});
  });
  t.sim->run();
  EXPECT_EQ(t.sim->servers()[0].log.size(), 0u);  // no destination contact
  EXPECT_EQ(t.sim->node(t.exit).log().size(), 0u);
  EXPECT_GE(t.sim->node(t.exit).stats().drops, 1u);
}

TEST(Stream, PerCellOverheadIsSignaturePlusTimestamp) {
  // identical seeds with BackRef on/off: the begin-bearing relay cells differ
  // by exactly |G1| + 4 bytes at every hop
  ThreeHop on = make_three_hop(11, true);
  ThreeHop off = make_three_hop(11, false);
  run_circuit_and_stream(on);
  run_circuit_and_stream(off);
  auto collect_relay_sizes = [](const Simnet& sim) {
    std::vector<size_t> sizes;
    for (const auto& ev : sim.transcript())
      if (ev.kind == "cell") {
        auto cell = Cell::decode(ev.data);
        if (cell && cell->kind == CellKind::kRelay) sizes.push_back(ev.data.size());
      }
    return sizes;
  };
  auto on_sizes = collect_relay_sizes(*on.sim);
  auto off_sizes = collect_relay_sizes(*off.sim);
  ASSERT_EQ(on_sizes.size(), off_sizes.size());
  // begin cells: the three forward relay hops carrying the stream request
  // (the last six entries are 3 forward begin + 3 backward data cells)
  ASSERT_GE(on_sizes.size(), 6u);
  size_t n = on_sizes.size();
  for (size_t i = n - 6; i < n - 3; ++i)
    EXPECT_EQ(on_sizes[i], off_sizes[i] + bls12::kG1Bytes + 4) << i;
  // backward data cells carry no signature: identical sizes
  for (size_t i = n - 3; i < n; ++i) EXPECT_EQ(on_sizes[i], off_sizes[i]) << i;
}

TEST(MinimalDelta, DisabledBackRefKeepsMessageSequence) {
  ThreeHop on = make_three_hop(12, true);
  ThreeHop off = make_three_hop(12, false);
  run_circuit_and_stream(on);
  run_circuit_and_stream(off);
  // same cell flow: (kind, from, to, cid) sequences identical
  auto cell_seq = [](const Simnet& sim) {
    std::vector<std::tuple<uint8_t, Bytes, Bytes, Bytes>> seq;
    for (const auto& ev : sim.transcript())
      if (ev.kind == "cell") {
        auto cell = Cell::decode(ev.data);
        seq.emplace_back(uint8_t(cell->kind), ev.from, ev.to, cell->cid);
      }
    return seq;
  };
  EXPECT_EQ(cell_seq(*on.sim), cell_seq(*off.sim));
  // same plaintext-level protocol notes (notes exclude BackRef-only fields)
  auto notes = [](const Simnet& sim) {
    std::vector<std::pair<Bytes, Bytes>> seq;
    for (const auto& ev : sim.transcript())
      if (ev.kind == "note") seq.emplace_back(ev.from, ev.data);
    return seq;
  };
  EXPECT_EQ(notes(*on.sim), notes(*off.sim));
  // and the only log-write difference is: off writes nothing
  EXPECT_EQ(off.sim->node(off.entry).log().size(), 0u);
  EXPECT_EQ(on.sim->node(on.entry).log().size(), 1u);
}

TEST(PositionBlindness, MiddleStateReferencesOnlyNeighbors) {
  ThreeHop t = make_three_hop(13);
  run_circuit_and_stream(t);
  const auto& circuits = t.sim->node(t.middle).relay_circuits();
  ASSERT_EQ(circuits.size(), 1u);
  const RelayCircuit& rc = circuits.begin()->second;
  EXPECT_EQ(rc.prev_node, t.entry);
  ASSERT_TRUE(rc.next_node.has_value());
  EXPECT_EQ(*rc.next_node, t.exit);
  // nothing in the middle node's per-circuit state mentions the client:
  // serialize the observable fields and scan
  Bytes blob;
  append(blob, rc.cid_in);
  append(blob, rc.prev_node);
  append(blob, rc.prev_address);
  append(blob, rc.session_key);
  append(blob, rc.pseudonym_in);
  if (rc.cid_out) append(blob, *rc.cid_out);
  if (rc.next_node) append(blob, *rc.next_node);
  EXPECT_FALSE(contains_bytes(blob, t.client));
  EXPECT_FALSE(contains_bytes(blob, to_bytes("203.0.113.5")));
}

TEST(Determinism, SameSeedSameTranscriptHash) {
  ThreeHop a = make_three_hop(99);
  ThreeHop b = make_three_hop(99);
  run_circuit_and_stream(a);
  run_circuit_and_stream(b);
  EXPECT_EQ(a.sim->transcript_hash(), b.sim->transcript_hash());
  EXPECT_EQ(a.sim->node(a.exit).log().export_log(), b.sim->node(b.exit).log().export_log());
  ThreeHop c = make_three_hop(100);
  run_circuit_and_stream(c);
  EXPECT_NE(a.sim->transcript_hash(), c.sim->transcript_hash());
}

TEST(IspRegistry, EveryClientCreateProducesExactlyOneEntry) {
  ThreeHop t = make_three_hop(14);
  run_circuit_and_stream(t);
  // one client->entry create per circuit
  ASSERT_EQ(t.sim->isp().size(), 1u);
  const auto& [addr, element] = t.sim->isp().entries()[0];
  EXPECT_EQ(addr, to_bytes("203.0.113.5"));
  // the attested element is the entry-hop pseudonym X_1
  const auto& pc = t.sim->node(t.client).proxy_circuits().begin()->second;
  EXPECT_EQ(element, pc.hops[0].pseudonym.element);
  EXPECT_TRUE(t.sim->isp().attests(addr, element));
}

TEST(Stats, UsedCounterTracksProxySends) {
  ThreeHop t = make_three_hop(16);
  Bytes handle;
  t.sim->at(1000, [&](Simnet& sim) {
    handle = sim.node(t.client).create_circuit(sim, {t.entry, t.middle, t.exit});
  });
  for (uint64_t i = 0; i < 3; ++i) {
    t.sim->at(5000 + i * 2000, [&, i](Simnet& sim) {
      StreamRequest req{t.server_addr, t.server_port, sim.now_ts()};
      sim.node(t.client).send_stream(sim, handle, req, to_bytes("r" + std::to_string(i)));
    });
  }
  t.sim->run();
  EXPECT_EQ(t.sim->node(t.client).proxy_circuits().at(handle).used, 3u);
  EXPECT_EQ(t.sim->servers()[0].log.size(), 3u);
  // exit gains one record per stream; entry/middle stay at one per circuit
  EXPECT_EQ(t.sim->node(t.exit).log().size(), 3u);
  EXPECT_EQ(t.sim->node(t.entry).log().size(), 1u);
  EXPECT_EQ(t.sim->node(t.middle).log().size(), 1u);
}

}  // namespace
