#pragma once

#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "backref/node.hpp"

namespace backref {

// ---------- directory service (F_reg) ----------

class Directory {
 public:
  // first-write-wins; duplicate ids rejected
  bool register_node(const Bytes& id, const Bytes& address, const Bytes& pk) {
    if (by_id_.count(id)) return false;
    NodeInfo info{id, address, pk};
    by_id_[id] = info;
    roster_.push_back(info);
    return true;
  }

  std::optional<NodeInfo> find(const Bytes& id) const {
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<NodeInfo> find_by_address(const Bytes& address) const {
    for (const auto& info : roster_)
      if (info.address == address) return info;
    return std::nullopt;
  }

  const std::vector<NodeInfo>& roster() const { return roster_; }

 private:
  std::map<Bytes, NodeInfo> by_id_;
  std::vector<NodeInfo> roster_;
};

// ---------- ISP packet-attestation registry ----------

// Append-only set of (client address, first-cell group element). Simulates
// the trusted attestation party; the adversary touches it only once the ISP
// itself is marked compromised.
class IspRegistry {
 public:
  void record(const Bytes& client_address, const Bytes& element) {
    entries_.emplace_back(client_address, element);
    index_.insert(concat({client_address, element}));
  }

  bool attests(ByteSpan client_address, ByteSpan element) const {
    return index_.count(concat({client_address, element})) > 0;
  }

  size_t size() const { return entries_.size(); }
  const std::vector<std::pair<Bytes, Bytes>>& entries() const { return entries_; }

  // "BKRFISP1" ‖ count ‖ (address(lp) ‖ element(lp))*
  Bytes export_registry() const {
    Bytes out = to_bytes("BKRFISP1");
    put_u32(out, uint32_t(entries_.size()));
    for (const auto& [addr, element] : entries_) {
      put_lp(out, addr);
      put_lp(out, element);
    }
    return out;
  }

  static std::optional<IspRegistry> import_registry(ByteSpan data) {
    ByteReader r(data);
    Bytes magic;
    if (!r.get_bytes(8, magic) || to_string(magic) != "BKRFISP1") return std::nullopt;
    uint32_t count;
    if (!r.get_u32(count)) return std::nullopt;
    IspRegistry reg;
    for (uint32_t i = 0; i < count; ++i) {
      Bytes addr, element;
      if (!r.get_lp(addr) || !r.get_lp(element)) return std::nullopt;
      reg.record(addr, element);
    }
    if (!r.done()) return std::nullopt;
    return reg;
  }

 private:
  std::vector<std::pair<Bytes, Bytes>> entries_;
  std::set<Bytes> index_;
};

// ---------- transcript ----------

struct TranscriptEvent {
  uint64_t seq = 0;
  uint64_t time_ms = 0;
  std::string kind;  // register | cell | drop | note | user | inject
  Bytes from;
  Bytes to;
  Bytes data;  // raw cell bytes for cell events; text otherwise

  Bytes serialize() const {
    Bytes out;
    put_u64(out, seq);
    put_u64(out, time_ms);
    put_lp(out, to_bytes(kind));
    put_lp(out, from);
    put_lp(out, to);
    Bytes d = data;
    put_u32(out, uint32_t(d.size()));
    backref::append(out, d);
    return out;
  }
};

// adversary's link-level view: metadata always, payload only when an endpoint
// is compromised at observation time
struct Observation {
  uint64_t time_ms = 0;
  Bytes from;
  Bytes to;
  size_t size = 0;
  std::optional<Bytes> plaintext;
};

struct UserEvent {
  uint64_t time_ms = 0;
  Bytes node;
  std::string kind;
  Bytes data;
};

struct SecretsBundle {
  Bytes node_id;
  Bytes sk;          // long-term signing key scalar
  Bytes pk;
  Bytes log_export;  // BKRFLOG1 snapshot at compromise time
  // live circuit state: (cid_in, prev id, successor id or empty, session key,
  // inbound pseudonym)
  std::vector<std::tuple<Bytes, Bytes, Bytes, Bytes, Bytes>> circuits;
};

// ---------- the simulator ----------

struct SimConfig {
  uint64_t seed = 0;
  Timestamp epoch = 1700000000;
  uint64_t latency_ms = 1;
};

struct DestinationServer {
  Bytes address;
  uint16_t port = 0;
  Bytes reply;

  struct Entry {
    Bytes source_address;  // exit node address, what a server log would show
    StreamRequest request;
    Bytes payload;
    uint64_t time_ms = 0;
  };
  std::vector<Entry> log;
};

class Simnet : public NodeEnv {
 public:
  explicit Simnet(SimConfig cfg) : cfg_(cfg), rng_(cfg.seed) {}

  // ---- topology ----

  OrNode& add_node(NodeConfig cfg) {
    auto node = std::make_unique<OrNode>(std::move(cfg));
    OrNode& ref = *node;
    nodes_[ref.id()] = std::move(node);
    if (!ref.config().is_client) {
      bool ok = directory_.register_node(ref.id(), ref.address(), ref.keys().pk);
      record(ok ? "register" : "register-duplicate", ref.id(), {}, ref.keys().pk);
    } else {
      client_addresses_.insert(ref.address());
    }
    return ref;
  }

  DestinationServer& add_server(Bytes address, uint16_t port, Bytes reply) {
    servers_.push_back({std::move(address), port, std::move(reply), {}});
    return servers_.back();
  }

  OrNode& node(const Bytes& id) { return *nodes_.at(id); }
  bool has_node(const Bytes& id) const { return nodes_.count(id) > 0; }
  Directory& directory() { return directory_; }
  IspRegistry& isp() { return isp_; }
  const std::vector<DestinationServer>& servers() const { return servers_; }
  const std::vector<TranscriptEvent>& transcript() const { return transcript_; }
  const std::vector<UserEvent>& user_events() const { return user_events_; }
  const std::vector<Observation>& adversary_view() const { return observations_; }
  uint64_t drops_unknown_destination() const { return drops_unknown_dest_; }

  // ---- adversary controls ----

  void compromise(const Bytes& id, uint64_t at_ms) { compromised_[id] = at_ms; }

  bool is_compromised(const Bytes& id, uint64_t at_ms) const {
    auto it = compromised_.find(id);
    return it != compromised_.end() && at_ms >= it->second;
  }

  // secrets extracted from a compromised node (valid any time at or after the
  // compromise point)
  SecretsBundle bundle(const Bytes& id) {
    OrNode& n = node(id);
    SecretsBundle b;
    b.node_id = id;
    b.sk = n.keys().sk_bytes();
    b.pk = n.keys().pk;
    b.log_export = n.log().export_log();
    for (const auto& [cid, rc] : n.relay_circuits())
      b.circuits.emplace_back(rc.cid_in, rc.prev_node, rc.next_node.value_or(Bytes{}),
                              rc.session_key, rc.pseudonym_in);
    return b;
  }

  void inject(const Bytes& from, const Bytes& to, const Cell& cell, uint64_t at_ms) {
    record("inject", from, to, cell.encode());
    queue_.push({at_ms, next_seq_++, EventBody{CellDelivery{from, to, cell.encode(), true}}});
  }

  // ---- scenario actions ----

  void at(uint64_t time_ms, std::function<void(Simnet&)> fn) {
    queue_.push({time_ms, next_seq_++, EventBody{Action{std::move(fn)}}});
  }

  void run() {
    while (!queue_.empty()) {
      Event ev = queue_.top();
      queue_.pop();
      now_ms_ = std::max(now_ms_, ev.time_ms);
      std::visit([&](auto& body) { execute(body); }, ev.body);
    }
  }

  // ---- NodeEnv ----

  Timestamp now_ts() override { return cfg_.epoch + Timestamp(now_ms_ / 1000); }
  Drbg& rng() override { return rng_; }

  void send_cell(const Bytes& from_id, const Bytes& to_id, const Cell& cell) override {
    Bytes wire = cell.encode();
    record("cell", from_id, to_id, wire);
    observe(from_id, to_id, wire);
    cells_by_kind_[uint8_t(cell.kind)]++;
    // client -> node create cells are mirrored into the ISP attestation
    // registry (ClientKeyExchange analogue)
    if (cell.kind == CellKind::kCreate && !nodes_.count(to_id)) {
      // destination unknown; fall through to drop below
    } else if (cell.kind == CellKind::kCreate) {
      auto from_node = nodes_.find(from_id);
      if (from_node != nodes_.end() && from_node->second->config().is_client) {
        auto payload = CreatePayload::decode(cell.payload);
        if (payload) isp_.record(from_node->second->address(), payload->pseudonym);
      }
    }
    if (!nodes_.count(to_id)) {
      ++drops_unknown_dest_;
      record("drop", from_id, to_id, to_bytes("unknown-destination"));
      return;
    }
    queue_.push(
        {now_ms_ + cfg_.latency_ms, next_seq_++, EventBody{CellDelivery{from_id, to_id, wire, false}}});
  }

  void send_to_destination(const Bytes& exit_id, const StreamRequest& req, const Bytes& stream_id,
                           const Bytes& payload) override {
    for (auto& server : servers_) {
      if (server.address == req.address && server.port == req.port) {
        server.log.push_back({node(exit_id).address(), req, payload, now_ms_});
        record("dest-request", exit_id, req.address, payload);
        queue_.push({now_ms_ + cfg_.latency_ms, next_seq_++,
                     EventBody{DestinationReply{exit_id, stream_id, server.reply}}});
        return;
      }
    }
    ++drops_unknown_dest_;
    record("drop", exit_id, req.address, to_bytes("unknown-destination"));
  }

  std::optional<NodeInfo> roster_lookup(const Bytes& id) override { return directory_.find(id); }
  std::optional<NodeInfo> roster_lookup_by_address(const Bytes& address) override {
    return directory_.find_by_address(address);
  }
  bool is_client_address(const Bytes& address) override {
    return client_addresses_.count(address) > 0;
  }

  void note(const Bytes& node_id, const std::string& text) override {
    record("note", node_id, {}, to_bytes(text));
  }

  void user_output(const Bytes& node_id, const std::string& kind, const Bytes& data) override {
    user_events_.push_back({now_ms_, node_id, kind, data});
    record("user", node_id, {}, to_bytes(kind));
  }

  // ---- determinism ----

  Digest transcript_hash() const {
    Bytes all;
    for (const auto& ev : transcript_) backref::append(all, ev.serialize());
    return sha256(all);
  }

  std::map<uint8_t, uint64_t> cells_by_kind() const { return cells_by_kind_; }

 private:
  struct CellDelivery {
    Bytes from, to;
    Bytes wire;
    bool injected;
  };
  struct DestinationReply {
    Bytes exit_id;
    Bytes stream_id;
    Bytes payload;
  };
  struct Action {
    std::function<void(Simnet&)> fn;
  };
  using EventBody = std::variant<CellDelivery, DestinationReply, Action>;
  struct Event {
    uint64_t time_ms;
    uint64_t seq;
    EventBody body;
  };
  struct EventOrder {
    bool operator()(const Event& a, const Event& b) const {
      return a.time_ms != b.time_ms ? a.time_ms > b.time_ms : a.seq > b.seq;
    }
  };

  void execute(CellDelivery& d) {
    auto it = nodes_.find(d.to);
    if (it == nodes_.end()) return;
    auto cell = Cell::decode(d.wire);
    if (!cell) return;
    Bytes from_address;
    if (auto fn = nodes_.find(d.from); fn != nodes_.end()) from_address = fn->second->address();
    it->second->handle_cell(*this, d.from, from_address, *cell);
  }

  void execute(DestinationReply& r) {
    auto it = nodes_.find(r.exit_id);
    if (it == nodes_.end()) return;
    it->second->handle_destination_reply(*this, r.stream_id, r.payload);
  }

  void execute(Action& a) { a.fn(*this); }

  void record(const std::string& kind, const Bytes& from, const Bytes& to, const Bytes& data) {
    transcript_.push_back({transcript_.size(), now_ms_, kind, from, to, data});
  }

  void observe(const Bytes& from, const Bytes& to, const Bytes& wire) {
    Observation obs;
    obs.time_ms = now_ms_;
    obs.from = from;
    obs.to = to;
    obs.size = wire.size();
    if (is_compromised(from, now_ms_) || is_compromised(to, now_ms_)) obs.plaintext = wire;
    observations_.push_back(std::move(obs));
  }

  SimConfig cfg_;
  Drbg rng_;
  uint64_t now_ms_ = 0;
  uint64_t next_seq_ = 0;
  std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
  std::map<Bytes, std::unique_ptr<OrNode>> nodes_;
  std::set<Bytes> client_addresses_;
  Directory directory_;
  IspRegistry isp_;
  std::vector<DestinationServer> servers_;
  std::vector<TranscriptEvent> transcript_;
  std::vector<UserEvent> user_events_;
  std::vector<Observation> observations_;
  std::map<Bytes, uint64_t> compromised_;
  std::map<uint8_t, uint64_t> cells_by_kind_;
  uint64_t drops_unknown_dest_ = 0;
};

}  // namespace backref
