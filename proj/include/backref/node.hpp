#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "backref/cells.hpp"
#include "backref/evidence.hpp"
#include "backref/ntor.hpp"

namespace backref {

struct NodeInfo {
  Bytes id;
  Bytes address;
  Bytes pk;  // long-term G2 key
};

// Environment a node runs inside; the simulator implements it. Nodes never
// share state, all cross-node interaction goes through send_cell.
class NodeEnv {
 public:
  virtual ~NodeEnv() = default;
  virtual Timestamp now_ts() = 0;
  virtual Drbg& rng() = 0;
  virtual void send_cell(const Bytes& from_id, const Bytes& to_id, const Cell& cell) = 0;
  virtual void send_to_destination(const Bytes& exit_id, const StreamRequest& req,
                                   const Bytes& stream_id, const Bytes& payload) = 0;
  virtual std::optional<NodeInfo> roster_lookup(const Bytes& id) = 0;
  virtual std::optional<NodeInfo> roster_lookup_by_address(const Bytes& address) = 0;
  virtual bool is_client_address(const Bytes& address) = 0;
  // structured plaintext-level protocol note, excluding BackRef-only fields
  virtual void note(const Bytes& node_id, const std::string& text) = 0;
  // protocol outputs toward the local user (circuit ready, received payload)
  virtual void user_output(const Bytes& node_id, const std::string& kind, const Bytes& data) = 0;
};

// exit whitelist: exact host, "*.suffix" wildcard, or host:port
struct Whitelist {
  std::vector<std::string> patterns;

  bool matches(ByteSpan address, uint16_t port) const {
    std::string host(address.begin(), address.end());
    std::string host_port = host + ":" + std::to_string(port);
    for (const std::string& p : patterns) {
      if (p == "*") return true;
      if (p == host || p == host_port) return true;
      if (p.size() > 1 && p[0] == '*' && host.size() >= p.size() - 1 &&
          host.compare(host.size() - (p.size() - 1), p.size() - 1, p, 1, p.size() - 1) == 0)
        return true;
    }
    return false;
  }
};

struct NodeConfig {
  Bytes id;
  Bytes address;
  bool entry_allowed = true;
  bool middle_allowed = true;
  bool exit_allowed = true;
  bool is_client = false;   // client-class: no long-term key registration
  bool backref = true;
  Timestamp freshness_window = kDefaultFreshnessWindow;
  Timestamp retention = kDefaultRetentionSeconds;
  Whitelist whitelist;
  Bytes key_seed;  // long-term key derivation seed
};

// node statistics, reconciled against the transcript in tests
struct NodeStats {
  uint64_t cells_in = 0;
  uint64_t cells_out = 0;
  uint64_t drops = 0;
  uint64_t streams_forwarded = 0;
};

// Per-circuit relay state. Holds predecessor and successor links only; no
// field identifies the proxy, the exit, or any other circuit position.
struct RelayCircuit {
  Bytes cid_in;
  Bytes prev_node;          // neighbor id
  Bytes prev_address;       // neighbor (or client) address
  Bytes session_key;        // key shared with the (unknown) circuit owner
  Bytes pseudonym_in;       // X received in the create
  InboundOrigin inbound;    // endorsement or unsigned-user marker
  std::optional<Bytes> cid_out;
  std::optional<Bytes> next_node;  // successor id (state only, never logged)
  std::map<Bytes, Bytes> streams;  // stream id -> reserved
  uint64_t used = 0;
};

struct ProxyHop {
  Bytes node_id;
  Bytes session_key;
  Pseudonym pseudonym;
};

struct ProxyCircuit {
  Bytes cid;                     // cid_1, the only cid the proxy knows
  std::vector<Bytes> path;
  std::vector<ProxyHop> hops;    // established hops, construction order
  std::optional<std::pair<Bytes, Pseudonym>> pending;  // (ntor session id, pseudonym)
  bool established = false;
  uint64_t used = 0;
};

class OrNode {
 public:
  explicit OrNode(NodeConfig cfg)
      : cfg_(std::move(cfg)),
        keys_(bls_keygen(cfg_.key_seed.empty() ? cfg_.id : cfg_.key_seed)),
        log_(cfg_.id, cfg_.retention) {}

  const NodeConfig& config() const { return cfg_; }
  const Bytes& id() const { return cfg_.id; }
  const Bytes& address() const { return cfg_.address; }
  const BlsKeyPair& keys() const { return keys_; }
  LogStore& log() { return log_; }
  const LogStore& log() const { return log_; }
  const NodeStats& stats() const { return stats_; }
  const std::map<Bytes, RelayCircuit>& relay_circuits() const { return relays_; }
  const std::map<Bytes, ProxyCircuit>& proxy_circuits() const { return proxies_; }
  const NtorSessionStore& ntor_sessions() const { return ntor_; }

  // adversarial control hooks, active once the simulator marks the node
  // compromised and the game scripts it
  bool adversarial_drop_relays = false;
  std::function<Bytes(const Bytes&)> adversarial_mutate_forward;

  // ---- user-facing inputs: create-circuit and send ----

  // returns the circuit handle (cid_1)
  Bytes create_circuit(NodeEnv& env, const std::vector<Bytes>& path) {
    ProxyCircuit pc;
    pc.cid = fresh_cid(env.rng());
    pc.path = path;
    Bytes handle = pc.cid;
    proxies_[handle] = std::move(pc);
    extend_circuit(env, proxies_[handle]);
    return handle;
  }

  bool send_stream(NodeEnv& env, const Bytes& handle, const StreamRequest& req,
                   const Bytes& payload) {
    auto it = proxies_.find(handle);
    if (it == proxies_.end() || !it->second.established) return false;
    ProxyCircuit& pc = it->second;
    BeginBody body;
    body.request = req;
    body.payload = payload;
    if (cfg_.backref) {
      const Pseudonym& exit_pseudonym = pc.hops.back().pseudonym;
      body.signature = {sign_stream(*exit_pseudonym.secret, req).sigma, req.ts};
    }
    std::vector<Bytes> keys;
    for (const ProxyHop& h : pc.hops) keys.push_back(h.session_key);
    auto onion = wr_on(RelayPayload{RelayType::kBegin, body.encode()}.encode(), keys, env.rng());
    if (!onion) return false;
    ++pc.used;
    env.note(id(), "stream-send addr=" + to_string(req.address) + ":" + std::to_string(req.port));
    send(env, pc.path[0], Cell{pc.cid, CellKind::kRelay, *onion});
    return true;
  }

  // ---- network input ----

  void handle_cell(NodeEnv& env, const Bytes& from_id, const Bytes& from_address,
                   const Cell& cell) {
    ++stats_.cells_in;
    switch (cell.kind) {
      case CellKind::kCreate:
        handle_create(env, from_id, from_address, cell);
        break;
      case CellKind::kCreated:
        handle_created(env, from_id, cell);
        break;
      case CellKind::kRelay:
        handle_relay(env, from_id, cell);
        break;
    }
  }

  // destination reply entering the exit node for a stream it opened
  void handle_destination_reply(NodeEnv& env, const Bytes& stream_id, const Bytes& payload) {
    auto it = stream_index_.find(stream_id);
    if (it == stream_index_.end()) return;
    auto rit = relays_.find(it->second);
    if (rit == relays_.end()) return;
    RelayCircuit& rc = rit->second;
    std::vector<Bytes> keys{rc.session_key};
    auto onion = wr_on(RelayPayload{RelayType::kData, payload}.encode(), keys, env.rng());
    if (!onion) return;
    send(env, rc.prev_node, Cell{rc.cid_in, CellKind::kRelay, *onion});
  }

 private:
  // ---- iterative circuit extension (proxy side) ----
  void extend_circuit(NodeEnv& env, ProxyCircuit& pc) {
    size_t built = pc.hops.size();
    if (built == pc.path.size()) {
      pc.established = true;
      env.note(id(), "circuit-ready hops=" + std::to_string(built));
      env.user_output(id(), "circuit-ready", pc.cid);
      return;
    }
    const Bytes& next = pc.path[built];
    auto info = env.roster_lookup(next);
    if (!info) {
      env.note(id(), "circuit-fail unknown-node");
      return;
    }
    NtorClientState st = ntor_initiate(info->pk, next, env.rng().next_bytes(32));
    Pseudonym pseudonym{st.x, st.challenge, uint32_t(built + 1)};
    pc.pending = {st.session_id, pseudonym};
    ntor_.put(std::move(st));

    if (built == 0) {
      CreatePayload payload;
      payload.pseudonym = pseudonym.element;
      if (cfg_.backref && !cfg_.is_client)
        payload.endorsement = endorse_pseudonym(keys_.sk, pseudonym.element, env.now_ts());
      env.note(id(), "create-send X=" + to_hex(pseudonym.element).substr(0, 16));
      send(env, next, Cell{pc.cid, CellKind::kCreate, payload.encode()});
    } else {
      ExtendBody body;
      body.next_node = next;
      body.pseudonym = pseudonym.element;
      if (cfg_.backref) {
        const Pseudonym& prev = pc.hops.back().pseudonym;
        body.signed_pseudonym = sign_pseudonym(*prev.secret, pseudonym.element, env.now_ts());
      }
      std::vector<Bytes> keys;
      for (const ProxyHop& h : pc.hops) keys.push_back(h.session_key);
      auto onion =
          wr_on(RelayPayload{RelayType::kExtend, body.encode()}.encode(), keys, env.rng());
      if (!onion) return;
      env.note(id(), "extend-send next=" + to_string(next) + " X=" +
                         to_hex(pseudonym.element).substr(0, 16));
      send(env, pc.path[0], Cell{pc.cid, CellKind::kRelay, *onion});
    }
  }

  // ---- create handling (relay side) ----
  void handle_create(NodeEnv& env, const Bytes& from_id, const Bytes& from_address,
                     const Cell& cell) {
    auto payload = CreatePayload::decode(cell.payload);
    if (!payload) return drop(env, "create-malformed");
    if (relays_.count(cell.cid)) return drop(env, "create-duplicate-cid");

    InboundOrigin inbound;
    if (cfg_.backref) {
      if (payload->endorsement) {
        const SignedPseudonym& sp = *payload->endorsement;
        auto sender = env.roster_lookup(from_id);
        if (!sender) return drop(env, "create-unknown-sender");
        if (sp.element != payload->pseudonym) return drop(env, "create-endorsement-mismatch");
        if (verify_endorsement(sender->pk, sp, env.now_ts(), cfg_.freshness_window) !=
            VerifyStatus::kOk)
          return drop(env, "create-bad-endorsement");
        inbound.signature = sp;
      } else {
        // unsigned-user path: only client-class sources, recorded for the
        // ISP last-mile join
        if (!env.is_client_address(from_address)) return drop(env, "create-unsigned-from-node");
        inbound.user_address = from_address;
      }
    }

    auto reply =
        ntor_respond(keys_.pk, keys_.sk, cfg_.id, payload->pseudonym, env.rng().next_bytes(32));
    if (!reply) return drop(env, "create-bad-challenge");

    RelayCircuit rc;
    rc.cid_in = cell.cid;
    rc.prev_node = from_id;
    rc.prev_address = from_address;
    rc.session_key = reply->session_key;
    rc.pseudonym_in = payload->pseudonym;
    rc.inbound = std::move(inbound);
    relays_[cell.cid] = std::move(rc);

    env.note(id(), "create-accept cid=" + to_hex(cell.cid).substr(0, 8) +
                       " X=" + to_hex(payload->pseudonym).substr(0, 16));
    send(env, from_id,
         Cell{cell.cid, CellKind::kCreated, CreatedPayload{reply->ephemeral, reply->tag}.encode()});
  }

  // ---- created handling ----
  void handle_created(NodeEnv& env, const Bytes& from_id, const Cell& cell) {
    auto payload = CreatedPayload::decode(cell.payload);
    if (!payload) return drop(env, "created-malformed");

    // proxy side of the first hop
    auto pit = proxies_.find(cell.cid);
    if (pit != proxies_.end()) {
      proxy_absorb_created(env, pit->second, *payload);
      return;
    }
    // relay that forwarded a create to its successor: wrap an extended reply
    auto oit = out_index_.find(cell.cid);
    if (oit == out_index_.end()) return drop(env, "created-unknown-cid");
    RelayCircuit& rc = relays_[oit->second];
    if (rc.next_node != from_id) return drop(env, "created-wrong-neighbor");
    std::vector<Bytes> keys{rc.session_key};
    ExtendedBody extended{payload->ephemeral, payload->tag};
    auto onion = wr_on(RelayPayload{RelayType::kExtended, extended.encode()}.encode(), keys,
                       env.rng());
    if (!onion) return;
    send(env, rc.prev_node, Cell{rc.cid_in, CellKind::kRelay, *onion});
  }

  void proxy_absorb_created(NodeEnv& env, ProxyCircuit& pc, const CreatedPayload& payload) {
    if (!pc.pending) return drop(env, "created-unexpected");
    auto [session_id, pseudonym] = *pc.pending;
    auto key = ntor_.compute_key(session_id, payload.ephemeral, payload.tag);
    if (!key) {
      pc.pending.reset();
      return drop(env, "created-auth-fail");
    }
    pc.hops.push_back({pc.path[pc.hops.size()], *key, pseudonym});
    pc.pending.reset();
    env.note(id(), "hop-established n=" + std::to_string(pc.hops.size()));
    extend_circuit(env, pc);
  }

  // ---- relay handling ----
  void handle_relay(NodeEnv& env, const Bytes& from_id, const Cell& cell) {
    if (adversarial_drop_relays) return drop(env, "adversarial-drop");

    // proxy side: strip every established layer
    auto pit = proxies_.find(cell.cid);
    if (pit != proxies_.end()) {
      proxy_absorb_relay(env, pit->second, cell);
      return;
    }

    // forward direction: cell arrives from the predecessor
    auto rit = relays_.find(cell.cid);
    if (rit != relays_.end() && rit->second.prev_node == from_id) {
      RelayCircuit& rc = rit->second;
      std::vector<Bytes> keys{rc.session_key};
      auto inner = unwr_on(cell.payload, keys);
      if (!inner) return drop(env, "relay-auth-fail");
      ++rc.used;
      if (rc.next_node) {
        // mid-circuit: pass the remaining onion along
        Bytes out = *inner;
        if (adversarial_mutate_forward) out = adversarial_mutate_forward(out);
        send(env, *rc.next_node, Cell{*rc.cid_out, CellKind::kRelay, out});
        return;
      }
      auto rp = RelayPayload::decode(*inner);
      if (!rp) return drop(env, "relay-malformed");
      switch (rp->type) {
        case RelayType::kExtend:
          handle_extend(env, rc, rp->body);
          return;
        case RelayType::kBegin:
          handle_begin(env, rc, rp->body);
          return;
        default:
          return drop(env, "relay-unexpected-type");
      }
    }

    // backward direction: cell arrives from the successor; add our layer
    auto oit = out_index_.find(cell.cid);
    if (oit != out_index_.end()) {
      RelayCircuit& rc = relays_[oit->second];
      if (rc.next_node != from_id) return drop(env, "relay-wrong-neighbor");
      std::vector<Bytes> keys{rc.session_key};
      auto onion = wr_on(cell.payload, keys, env.rng());  // a backward onion
      if (!onion) return;
      send(env, rc.prev_node, Cell{rc.cid_in, CellKind::kRelay, *onion});
      return;
    }
    drop(env, "relay-unknown-cid");
  }

  void proxy_absorb_relay(NodeEnv& env, ProxyCircuit& pc, const Cell& cell) {
    std::vector<Bytes> keys;
    for (const ProxyHop& h : pc.hops) keys.push_back(h.session_key);
    if (keys.empty()) return drop(env, "relay-no-keys");
    auto inner = unwr_on(cell.payload, keys);
    if (!inner) return drop(env, "relay-auth-fail");
    auto rp = RelayPayload::decode(*inner);
    if (!rp) return drop(env, "relay-malformed");
    if (rp->type == RelayType::kExtended) {
      auto body = ExtendedBody::decode(rp->body);
      if (!body) return drop(env, "extended-malformed");
      proxy_absorb_created(env, pc, *body);
      return;
    }
    if (rp->type == RelayType::kData) {
      env.note(id(), "stream-received bytes=" + std::to_string(rp->body.size()));
      env.user_output(id(), "received", rp->body);
      return;
    }
    drop(env, "relay-unexpected-type");
  }

  // extend request reaching the current circuit terminus
  void handle_extend(NodeEnv& env, RelayCircuit& rc, const Bytes& body_bytes) {
    if (!cfg_.entry_allowed && !cfg_.middle_allowed) return drop(env, "extend-role-refused");
    auto body = ExtendBody::decode(body_bytes);
    if (!body) return drop(env, "extend-malformed");
    if (rc.next_node) return drop(env, "extend-already-extended");
    auto next_info = env.roster_lookup(body->next_node);
    if (!next_info) return drop(env, "extend-unknown-node");

    std::optional<SignedPseudonym> endorsement;
    if (cfg_.backref) {
      if (!body->signed_pseudonym) return drop(env, "extend-unsigned");
      const SignedPseudonym& sp = *body->signed_pseudonym;
      if (sp.element != body->pseudonym) return drop(env, "extend-pseudonym-mismatch");
      // pseudonyms linkability verification against the stored predecessor
      // pseudonym
      VerifyStatus vs = verify_linkability(rc.pseudonym_in, sp, env.now_ts(),
                                           cfg_.freshness_window);
      if (vs == VerifyStatus::kTimestampStale) return drop(env, "extend-timestamp-stale");
      if (vs != VerifyStatus::kOk) return drop(env, "extend-bad-signature");

      // evidence: join the create-side part with this extend-side part
      RelayEvidenceRecord rec;
      rec.index_in = index_hash(rc.pseudonym_in);
      rec.index_out = index_hash(body->pseudonym);
      rec.predecessor_address = rc.prev_address;
      rec.pseudonym = rc.pseudonym_in;
      rec.inbound = rc.inbound;
      rec.outbound = sp;
      rec.stored_ts = env.now_ts();
      if (log_.append(rec).has_value()) return drop(env, "extend-evidence-reject");

      endorsement = endorse_pseudonym(keys_.sk, body->pseudonym, env.now_ts());
    }

    Bytes cid_next = fresh_cid(env.rng());
    rc.cid_out = cid_next;
    rc.next_node = body->next_node;
    out_index_[cid_next] = rc.cid_in;

    CreatePayload create;
    create.pseudonym = body->pseudonym;
    create.endorsement = std::move(endorsement);
    env.note(id(), "extend-accept next=" + to_string(body->next_node) +
                       " X=" + to_hex(body->pseudonym).substr(0, 16));
    send(env, body->next_node, Cell{cid_next, CellKind::kCreate, create.encode()});
  }

  // begin request reaching the exit
  void handle_begin(NodeEnv& env, RelayCircuit& rc, const Bytes& body_bytes) {
    if (!cfg_.exit_allowed) return drop(env, "begin-role-refused");
    auto body = BeginBody::decode(body_bytes);
    if (!body) return drop(env, "begin-malformed");

    // whitelist consult precedes any verification: whitelisted requests are
    // forwarded with no signature demand and no evidence record
    bool whitelisted = cfg_.whitelist.matches(body->request.address, body->request.port);
    if (!whitelisted && cfg_.backref) {
      if (!body->signature) return drop(env, "begin-unsigned");
      const auto& [sigma, sig_ts] = *body->signature;
      if (sig_ts != body->request.ts) return drop(env, "begin-ts-mismatch");
      VerifyStatus vs = verify_stream(rc.pseudonym_in, body->request, sigma, env.now_ts(),
                                      cfg_.freshness_window);
      if (vs == VerifyStatus::kTimestampStale) return drop(env, "begin-timestamp-stale");
      if (vs != VerifyStatus::kOk) return drop(env, "begin-bad-signature");
      if (!rc.inbound.signature) return drop(env, "begin-no-endorsed-pseudonym");

      ExitEvidenceRecord rec;
      rec.index = index_hash(body->request.canonical_message());
      rec.predecessor_address = rc.prev_address;
      rec.endorsed_pseudonym = *rc.inbound.signature;
      rec.request = body->request;
      rec.stream_sigma = sigma;
      rec.request_ts = body->request.ts;
      rec.stored_ts = env.now_ts();
      if (log_.append(rec).has_value()) return drop(env, "begin-evidence-reject");
    }

    Bytes stream_id = env.rng().next_bytes(8);
    rc.streams[stream_id] = Bytes{};
    stream_index_[stream_id] = rc.cid_in;
    ++stats_.streams_forwarded;
    env.note(id(), std::string("begin-forward ") + (whitelisted ? "whitelisted" : "verified") +
                       " addr=" + to_string(body->request.address) + ":" +
                       std::to_string(body->request.port));
    env.send_to_destination(id(), body->request, stream_id, body->payload);
  }

  void drop(NodeEnv& env, const std::string& reason) {
    ++stats_.drops;
    env.note(id(), "drop " + reason);
  }

  void send(NodeEnv& env, const Bytes& to, const Cell& cell) {
    ++stats_.cells_out;
    env.send_cell(cfg_.id, to, cell);
  }

  NodeConfig cfg_;
  BlsKeyPair keys_;
  LogStore log_;
  NodeStats stats_;
  NtorSessionStore ntor_;
  std::map<Bytes, RelayCircuit> relays_;    // cid_in -> circuit
  std::map<Bytes, Bytes> out_index_;        // cid_out -> cid_in
  std::map<Bytes, Bytes> stream_index_;     // stream id -> cid_in
  std::map<Bytes, ProxyCircuit> proxies_;   // cid_1 -> proxy circuit
};

}  // namespace backref
