#pragma once

#include <set>
#include <sstream>

#include "backref/tracer.hpp"

namespace backref {

// The four security properties as executable adversarial games. Each game
// builds its own deterministic simulation(s), mounts the scripted attack, and
// returns a boolean verdict plus a human-readable detail trail.

struct GameResult {
  bool verdict = false;
  std::string detail;
};

struct Corruption {
  bool entry = false;
  bool middle = false;
  bool exit = false;
  bool isp = false;

  bool total() const { return entry && middle && exit && isp; }
  bool strict_subset() const { return !total(); }
  std::string describe() const {
    std::string s;
    if (entry) s += "N1 ";
    if (middle) s += "N2 ";
    if (exit) s += "N3 ";
    if (isp) s += "ISP ";
    return s.empty() ? "none" : s;
  }
};

enum class AccusationStrategy {
  kSplice,      // link the victim's real circuit to the accomplice's stream
  kBlameEntry,  // rewrite the entry record's user marker to the victim
  kFabricate,   // build a wholly fabricated chain from fresh pseudonyms
};

inline const char* to_string(AccusationStrategy s) {
  switch (s) {
    case AccusationStrategy::kSplice: return "splice";
    case AccusationStrategy::kBlameEntry: return "blame-entry";
    case AccusationStrategy::kFabricate: return "fabricate";
  }
  return "?";
}

namespace gamedetail {

struct TwoUserWorld {
  std::unique_ptr<Simnet> sim;
  Bytes victim = to_bytes("client-alice");
  Bytes victim_addr = to_bytes("203.0.113.5");
  Bytes accomplice = to_bytes("client-bob");
  Bytes accomplice_addr = to_bytes("203.0.113.9");
  Bytes entry = to_bytes("node-entry");
  Bytes middle = to_bytes("node-middle");
  Bytes exit = to_bytes("node-exit");
  Bytes server_addr = to_bytes("crime.example.net");
  uint16_t server_port = 8443;
  Bytes victim_handle, accomplice_handle;
};

inline NodeConfig game_node(const std::string& id, const std::string& addr) {
  NodeConfig cfg;
  cfg.id = to_bytes(id);
  cfg.address = to_bytes(addr);
  cfg.key_seed = to_bytes("key-" + id);
  return cfg;
}

inline NodeConfig game_client(const std::string& id, const std::string& addr) {
  NodeConfig cfg = game_node(id, addr);
  cfg.is_client = true;
  return cfg;
}

// two honest users, shared 3-hop path, accomplice sends the queried stream
inline TwoUserWorld run_two_user_world(uint64_t seed) {
  TwoUserWorld w;
  w.sim = std::make_unique<Simnet>(SimConfig{seed});
  w.sim->add_node(game_client("client-alice", "203.0.113.5"));
  w.sim->add_node(game_client("client-bob", "203.0.113.9"));
  w.sim->add_node(game_node("node-entry", "10.0.0.1:9001"));
  w.sim->add_node(game_node("node-middle", "10.0.0.2:9002"));
  w.sim->add_node(game_node("node-exit", "10.0.0.3:9003"));
  w.sim->add_server(w.server_addr, w.server_port, to_bytes("response"));
  w.sim->at(1000, [&w](Simnet& sim) {
    w.victim_handle = sim.node(w.victim).create_circuit(sim, {w.entry, w.middle, w.exit});
  });
  w.sim->at(2000, [&w](Simnet& sim) {
    w.accomplice_handle =
        sim.node(w.accomplice).create_circuit(sim, {w.entry, w.middle, w.exit});
  });
  w.sim->at(6000, [&w](Simnet& sim) {
    StreamRequest req{w.server_addr, w.server_port, sim.now_ts()};
    sim.node(w.accomplice).send_stream(sim, w.accomplice_handle, req, to_bytes("criminal GET"));
  });
  w.sim->run();
  return w;
}

inline Bytes forge_export(const Bytes& node_id, const std::vector<EvidenceRecord>& records) {
  Bytes out = to_bytes("BKRFLOG1");
  put_lp(out, node_id);
  put_u32(out, uint32_t(records.size()));
  for (const auto& rec : records) backref::append(out, serialize_record(rec));
  return out;
}

}  // namespace gamedetail

// ---------- backward traceability (completeness, Eq. 2) ----------

// All-honest world: the queried stream must trace to the true client with ISP
// attestation, and the report must walk LookupN3 -> ... -> TraceUser in order.
inline GameResult backward_traceability_game(uint64_t seed) {
  using namespace gamedetail;
  TwoUserWorld w = run_two_user_world(seed);
  if (w.sim->servers()[0].log.empty()) return {false, "stream never reached destination"};
  LogSnapshots snapshots;
  for (const Bytes& id : {w.entry, w.middle, w.exit})
    snapshots.emplace(id, *LogStore::import_log(w.sim->node(id).log().export_log()));
  TraceQuery query{w.exit, w.sim->servers()[0].log[0].request, 0};
  TraceReport report = full_trace(query, snapshots, w.sim->isp(), w.sim->directory().roster());
  if (!report.outcome.user_identified || !report.outcome.isp_attested)
    return {false, "honest trace did not identify a user: " + report.serialize()};
  if (report.outcome.address != w.accomplice_addr)
    return {false, "identified the wrong user"};
  std::vector<std::string> expect = {"LookupN3", "CheckSignature",
                                     "RevealPredecessor(node-middle)",
                                     "RevealPredecessor(node-entry)", "LookupISP", "TraceUser"};
  size_t pos = 0;
  for (const auto& ev : report.events)
    if (pos < expect.size() && ev == expect[pos]) ++pos;
  if (pos != expect.size()) return {false, "event order broken"};
  if (!reverify_report(report)) return {false, "report not self-contained"};
  return {true, "traced to " + to_string(w.accomplice_addr) + " with attestation"};
}

// ---------- no false accusation (policy 3) ----------

// The adversary corrupts `corruption` and mounts `strategy` trying to make
// full_trace blame the victim for the accomplice's stream. verdict == true
// means the mechanism held: no false accusation happened (for strict subsets)
// or the accusation was constructed (total corruption, the policy-(3) premise).
inline GameResult no_false_accusation_game(uint64_t seed, const Corruption& corruption,
                                           AccusationStrategy strategy) {
  using namespace gamedetail;
  TwoUserWorld w = run_two_user_world(seed);
  if (w.sim->servers()[0].log.empty()) return {false, "no stream to accuse"};
  Simnet& sim = *w.sim;
  sim.compromise(w.entry, corruption.entry ? 0 : UINT64_MAX);
  sim.compromise(w.middle, corruption.middle ? 0 : UINT64_MAX);
  sim.compromise(w.exit, corruption.exit ? 0 : UINT64_MAX);

  const Timestamp ts = sim.now_ts();
  TraceQuery query{w.exit, sim.servers()[0].log[0].request, 0};
  Bytes m = query.descriptor.canonical_message();

  // snapshots start honest; the adversary replaces those it controls
  LogSnapshots snapshots;
  for (const Bytes& id : {w.entry, w.middle, w.exit})
    snapshots.emplace(id, *LogStore::import_log(sim.node(id).log().export_log()));

  // ground truth for the verdict
  const auto& victim_pc = sim.node(w.victim).proxy_circuits().begin()->second;
  Bytes victim_x1 = victim_pc.hops[0].pseudonym.element;
  Bytes victim_x2 = victim_pc.hops[1].pseudonym.element;
  const auto& exit_rec = std::get<ExitEvidenceRecord>(sim.node(w.exit).log().records()[0]);
  Bytes accomplice_x3 = exit_rec.endorsed_pseudonym.element;

  auto replace = [&](const Bytes& id, std::vector<EvidenceRecord> records) {
    snapshots.erase(id);
    snapshots.emplace(id, *LogStore::import_log(forge_export(id, std::move(records))));
  };

  // fabricated tail the adversary knows the exponents of
  Pseudonym fake_x1 = new_pseudonym(concat({to_bytes("fake1"), query.descriptor.address}), 1);
  Pseudonym fake_x2 = new_pseudonym(concat({to_bytes("fake2"), query.descriptor.address}), 2);

  switch (strategy) {
    case AccusationStrategy::kSplice: {
      // middle presents the victim's inbound half with the accomplice's
      // outbound half; it cannot sign the accomplice's X3 under the victim's
      // X2, so it reuses the accomplice's outbound signature as-is
      if (!corruption.middle) break;  // strategy needs the middle's snapshot
      const auto& mid_records = sim.node(w.middle).log().records();
      RelayEvidenceRecord rec_victim, rec_accomplice;
      for (const auto& r : mid_records) {
        const auto& rr = std::get<RelayEvidenceRecord>(r);
        if (rr.outbound.element == accomplice_x3) rec_accomplice = rr;
        else rec_victim = rr;
      }
      RelayEvidenceRecord spliced = rec_victim;
      spliced.outbound = rec_accomplice.outbound;
      spliced.index_out = rec_accomplice.index_out;
      replace(w.middle, {spliced});
      break;
    }
    case AccusationStrategy::kBlameEntry: {
      // entry rewrites its record for the accomplice's circuit to carry the
      // victim's address; with a corrupt ISP it also wants a matching
      // attestation, which only total corruption can forge
      if (!corruption.entry) break;
      std::vector<EvidenceRecord> forged;
      for (const auto& r : sim.node(w.entry).log().records()) {
        auto rr = std::get<RelayEvidenceRecord>(r);
        if (rr.outbound.element != victim_x2) {  // the accomplice's record
          rr.inbound.user_address = w.victim_addr;
          rr.predecessor_address = w.victim_addr;
        }
        forged.push_back(rr);
      }
      replace(w.entry, forged);
      break;
    }
    case AccusationStrategy::kFabricate: {
      // full fake chain from fresh pseudonyms whose exponents the adversary
      // knows. Every signature must come from a key the adversary actually
      // holds, so each forged piece is gated on the corruption set; missing
      // links leave honest records in place and the chain simply breaks there.
      Timestamp fts = ts > 100 ? ts - 100 : ts;
      Pseudonym fake_x3 = new_pseudonym(to_bytes("fake3"), 3);
      Bytes mid_out = accomplice_x3;  // head of the forged tail
      if (corruption.exit && corruption.middle) {
        // rebind the stream to a fabricated exit pseudonym: the accomplice's
        // x3 is unknown, so the adversary signs m under its own fake x3 and
        // endorses it with the corrupted middle's key
        ExitEvidenceRecord ex;
        ex.index = index_hash(m);
        ex.predecessor_address = sim.node(w.middle).address();
        ex.endorsed_pseudonym =
            endorse_pseudonym(sim.node(w.middle).keys().sk, fake_x3.element, fts);
        ex.request = query.descriptor;
        ex.stream_sigma = sign_stream(*fake_x3.secret, query.descriptor).sigma;
        ex.request_ts = query.descriptor.ts;
        ex.stored_ts = fts;
        replace(w.exit, {ex});
        mid_out = fake_x3.element;
      }
      if (corruption.middle && corruption.entry) {
        RelayEvidenceRecord mid;
        mid.pseudonym = fake_x2.element;
        mid.index_in = index_hash(fake_x2.element);
        mid.index_out = index_hash(mid_out);
        mid.predecessor_address = sim.node(w.entry).address();
        mid.inbound.signature =
            endorse_pseudonym(sim.node(w.entry).keys().sk, fake_x2.element, fts);
        mid.outbound = sign_pseudonym(*fake_x2.secret, mid_out, fts);
        mid.stored_ts = fts;
        replace(w.middle, {mid});
      }
      if (corruption.entry) {
        RelayEvidenceRecord en;
        en.pseudonym = fake_x1.element;
        en.index_in = index_hash(fake_x1.element);
        en.index_out = index_hash(fake_x2.element);
        en.predecessor_address = w.victim_addr;
        en.inbound.user_address = w.victim_addr;
        en.outbound = sign_pseudonym(*fake_x1.secret, fake_x2.element, fts);
        en.stored_ts = fts;
        replace(w.entry, {en});
      }
      break;
    }
  }

  // registry forgery is the total-corruption capability: the attested channel
  // itself is trustworthy below that ("preventing any ISP log forgeries")
  IspRegistry registry = *IspRegistry::import_registry(sim.isp().export_registry());
  if (corruption.total()) registry.record(w.victim_addr, fake_x1.element);

  TraceReport report = full_trace(query, snapshots, registry, sim.directory().roster());
  bool falsely_accused =
      report.outcome.user_identified && report.outcome.address == w.victim_addr;

  std::ostringstream detail;
  detail << "corruption={" << corruption.describe() << "} strategy=" << to_string(strategy)
         << " outcome="
         << (report.outcome.user_identified
                 ? "user-identified " + to_string(report.outcome.address)
                 : std::string("trace-fail ") + to_string(report.outcome.reason));

  if (corruption.total() && strategy == AccusationStrategy::kFabricate) {
    // policy (3) premise: with everything corrupted the accusation must land
    return {falsely_accused, detail.str()};
  }
  return {!falsely_accused, detail.str()};
}

// ---------- anonymity game (observational-equivalence surrogate) ----------

struct AnonymityViews {
  std::vector<Observation> p, q;
  // decrypted begin payloads per user in each process, via honest exit keys
  Bytes p_victim_payload, p_other_payload, q_victim_payload, q_other_payload;
};

// Two users, swapped equal-length messages, N1+N2 compromised, exit honest.
// Verdict: views identical outside AEAD ciphertext bytes, and the swap is
// only visible through the honest exit's session keys.
inline GameResult anonymity_swap_game(uint64_t seed, const Bytes& m1, const Bytes& m2,
                                      AnonymityViews* out_views = nullptr) {
  using namespace gamedetail;
  if (m1.size() != m2.size()) return {false, "messages must have equal length"};
  if (m1 == m2) return {false, "messages must differ"};

  struct ProcessRun {
    std::unique_ptr<Simnet> sim;
    Bytes u1 = to_bytes("client-u1"), u2 = to_bytes("client-u2");
    Bytes entry = to_bytes("node-entry"), middle = to_bytes("node-middle"),
          exit = to_bytes("node-exit");
    Bytes h1, h2;
  };
  auto run_process = [&](const Bytes& first_msg, const Bytes& second_msg) {
    ProcessRun r;
    r.sim = std::make_unique<Simnet>(SimConfig{seed});
    r.sim->add_node(game_client("client-u1", "203.0.113.11"));
    r.sim->add_node(game_client("client-u2", "203.0.113.12"));
    r.sim->add_node(game_node("node-entry", "10.0.0.1:9001"));
    r.sim->add_node(game_node("node-middle", "10.0.0.2:9002"));
    r.sim->add_node(game_node("node-exit", "10.0.0.3:9003"));
    r.sim->add_server(to_bytes("board.example.org"), 80, to_bytes("posted"));
    r.sim->compromise(r.entry, 0);
    r.sim->compromise(r.middle, 0);
    r.sim->at(1000, [&r](Simnet& sim) {
      r.h1 = sim.node(r.u1).create_circuit(sim, {r.entry, r.middle, r.exit});
    });
    r.sim->at(2000, [&r](Simnet& sim) {
      r.h2 = sim.node(r.u2).create_circuit(sim, {r.entry, r.middle, r.exit});
    });
    r.sim->at(6000, [&r, first_msg](Simnet& sim) {
      StreamRequest req{to_bytes("board.example.org"), 80, sim.now_ts()};
      sim.node(r.u1).send_stream(sim, r.h1, req, first_msg);
    });
    r.sim->at(7000, [&r, second_msg](Simnet& sim) {
      StreamRequest req{to_bytes("board.example.org"), 80, sim.now_ts()};
      sim.node(r.u2).send_stream(sim, r.h2, req, second_msg);
    });
    r.sim->run();
    return r;
  };

  ProcessRun p = run_process(m1, m2);  // process P: U1 sends m1, U2 sends m2
  ProcessRun q = run_process(m2, m1);  // process Q: swapped

  const auto& pv = p.sim->adversary_view();
  const auto& qv = q.sim->adversary_view();
  if (pv.size() != qv.size()) return {false, "view sizes diverged"};

  size_t ciphertext_diffs = 0;
  for (size_t i = 0; i < pv.size(); ++i) {
    const Observation &a = pv[i], &b = qv[i];
    if (a.time_ms != b.time_ms || a.from != b.from || a.to != b.to || a.size != b.size)
      return {false, "metadata views differ at observation " + std::to_string(i)};
    if (a.plaintext.has_value() != b.plaintext.has_value())
      return {false, "plaintext visibility differs"};
    if (!a.plaintext) continue;
    auto ca = Cell::decode(*a.plaintext);
    auto cb = Cell::decode(*b.plaintext);
    if (!ca || !cb) return {false, "undecodable observed cell"};
    // headers and non-ciphertext payloads must match bit-exactly
    if (ca->cid != cb->cid || ca->kind != cb->kind ||
        ca->payload.size() != cb->payload.size())
      return {false, "cell header divergence"};
    if (ca->kind == CellKind::kRelay) {
      if (ca->payload != cb->payload) ++ciphertext_diffs;  // AEAD bytes only
    } else if (ca->payload != cb->payload) {
      return {false, "non-ciphertext payload divergence (create/created)"};
    }
  }
  if (ciphertext_diffs == 0) return {false, "processes are byte-identical; swap had no effect"};

  // destination saw both messages in both processes (unlinkably)
  auto multiset = [](const Simnet& sim) {
    std::multiset<Bytes> ms;
    for (const auto& e : sim.servers()[0].log) ms.insert(e.payload);
    return ms;
  };
  if (multiset(*p.sim) != multiset(*q.sim) || multiset(*p.sim).count(m1) != 1 ||
      multiset(*p.sim).count(m2) != 1)
    return {false, "published message multisets differ"};

  // only the honest exit's keys reveal which user sent which message; decrypt
  // the captured middle->exit begin onions with the exit's session keys
  auto decrypt_payloads = [&](ProcessRun& r, Bytes& u1_payload, Bytes& u2_payload) -> bool {
    for (const auto& obs : r.sim->adversary_view()) {
      if (!obs.plaintext || obs.from != r.middle || obs.to != r.exit) continue;
      auto cell = Cell::decode(*obs.plaintext);
      if (!cell || cell->kind != CellKind::kRelay) continue;
      auto rit = r.sim->node(r.exit).relay_circuits().find(cell->cid);
      if (rit == r.sim->node(r.exit).relay_circuits().end()) continue;
      std::vector<Bytes> keys{rit->second.session_key};
      auto inner = unwr_on(cell->payload, keys);
      if (!inner) continue;
      auto rp = RelayPayload::decode(*inner);
      if (!rp || rp->type != RelayType::kBegin) continue;
      auto body = BeginBody::decode(rp->body);
      if (!body) continue;
      // map exit circuit back to its user through the proxy state
      for (const Bytes& user : {r.u1, r.u2}) {
        for (const auto& [h, pc] : r.sim->node(user).proxy_circuits()) {
          if (pc.hops.size() == 3 &&
              pc.hops[2].pseudonym.element == rit->second.pseudonym_in) {
            (user == r.u1 ? u1_payload : u2_payload) = body->payload;
          }
        }
      }
    }
    return !u1_payload.empty() && !u2_payload.empty();
  };
  AnonymityViews views;
  views.p = pv;
  views.q = qv;
  if (!decrypt_payloads(p, views.p_victim_payload, views.p_other_payload))
    return {false, "could not decrypt P payloads with exit keys"};
  if (!decrypt_payloads(q, views.q_victim_payload, views.q_other_payload))
    return {false, "could not decrypt Q payloads with exit keys"};
  if (views.p_victim_payload != m1 || views.p_other_payload != m2 ||
      views.q_victim_payload != m2 || views.q_other_payload != m1)
    return {false, "decrypted payloads do not witness the swap"};
  if (out_views) *out_views = views;

  return {true, "views differ only in " + std::to_string(ciphertext_diffs) +
                    " AEAD ciphertext fields; swap visible only under exit keys"};
}

// ---------- no forward traceability ----------

// set of (id, address) byte patterns for every successor this node's state
// ever pointed at
inline std::vector<Bytes> successor_patterns(const OrNode& node, const Directory& dir) {
  std::vector<Bytes> out;
  for (const auto& [cid, rc] : node.relay_circuits()) {
    if (!rc.next_node) continue;
    out.push_back(*rc.next_node);
    if (auto info = dir.find(*rc.next_node)) out.push_back(info->address);
  }
  return out;
}

// a node's exported evidence must never contain a successor id or address
inline bool log_export_forward_clean(const OrNode& node, const Directory& dir) {
  Bytes exported = node.log().export_log();
  // skip the header (magic + own node id) to scan record bytes only;
  // records begin right after magic(8) + lp(node id) + count(4)
  size_t offset = 8 + 2 + node.id().size() + 4;
  if (exported.size() < offset) return true;
  ByteSpan records(exported.data() + offset, exported.size() - offset);
  for (const Bytes& pattern : successor_patterns(node, dir))
    if (contains_bytes(records, pattern)) return false;
  return true;
}

// Two circuits diverge at the middle position; N1 is compromised only after
// both streams complete. Its secrets bundle must admit no successor claim.
inline GameResult no_forward_traceability_game(uint64_t seed) {
  using namespace gamedetail;
  Simnet sim{SimConfig{seed}};
  sim.add_node(game_client("client-u1", "203.0.113.21"));
  sim.add_node(game_client("client-u2", "203.0.113.22"));
  sim.add_node(game_node("node-entry", "10.0.0.1:9001"));
  sim.add_node(game_node("node-middle", "10.0.0.2:9002"));
  sim.add_node(game_node("node-middle-b", "10.0.0.4:9004"));
  sim.add_node(game_node("node-exit", "10.0.0.3:9003"));
  sim.add_server(to_bytes("site.example.org"), 80, to_bytes("ok"));
  Bytes h1, h2;
  sim.at(1000, [&](Simnet& s) {
    h1 = s.node(to_bytes("client-u1"))
             .create_circuit(s, {to_bytes("node-entry"), to_bytes("node-middle"),
                                 to_bytes("node-exit")});
  });
  sim.at(2000, [&](Simnet& s) {
    h2 = s.node(to_bytes("client-u2"))
             .create_circuit(s, {to_bytes("node-entry"), to_bytes("node-middle-b"),
                                 to_bytes("node-exit")});
  });
  sim.at(6000, [&](Simnet& s) {
    StreamRequest req{to_bytes("site.example.org"), 80, s.now_ts()};
    s.node(to_bytes("client-u1")).send_stream(s, h1, req, to_bytes("m1"));
  });
  sim.at(7000, [&](Simnet& s) {
    StreamRequest req{to_bytes("site.example.org"), 80, s.now_ts()};
    s.node(to_bytes("client-u2")).send_stream(s, h2, req, to_bytes("m2"));
  });
  sim.run();
  if (sim.servers()[0].log.size() != 2) return {false, "streams did not complete"};

  // post-hoc compromise: only after the transmissions completed
  sim.compromise(to_bytes("node-entry"), 8000);
  SecretsBundle bundle = sim.bundle(to_bytes("node-entry"));

  // the bundle's log export must not contain either successor's identity
  auto store = LogStore::import_log(bundle.log_export);
  if (!store) return {false, "bundle log unreadable"};
  size_t offset = 8 + 2 + bundle.node_id.size() + 4;
  ByteSpan records(bundle.log_export.data() + offset, bundle.log_export.size() - offset);
  for (const std::string& succ : {"node-middle", "node-middle-b"}) {
    if (contains_bytes(records, to_bytes(succ)))
      return {false, "successor id leaked into evidence"};
    auto info = sim.directory().find(to_bytes(succ));
    if (info && contains_bytes(records, info->address))
      return {false, "successor address leaked into evidence"};
  }
  // while the logs do hold the outbound pseudonyms (by design)
  const auto& recs = store->records();
  if (recs.size() != 2) return {false, "entry should hold one record per circuit"};
  return {true, "entry bundle logs carry successor pseudonyms only"};
}

}  // namespace backref
