#pragma once

// Shared simulator topologies for integration tests.

#include <string>
#include <vector>

#include "backref/simnet.hpp"

namespace fixtures {

using namespace backref;

struct ThreeHop {
  std::unique_ptr<Simnet> sim;
  Bytes client = to_bytes("client-alice");
  Bytes entry = to_bytes("node-entry");
  Bytes middle = to_bytes("node-middle");
  Bytes exit = to_bytes("node-exit");
  Bytes server_addr = to_bytes("dest.example.com");
  uint16_t server_port = 443;
};

inline NodeConfig relay_config(const std::string& id, const std::string& address, bool backref,
                               std::vector<std::string> whitelist = {}) {
  NodeConfig cfg;
  cfg.id = to_bytes(id);
  cfg.address = to_bytes(address);
  cfg.backref = backref;
  cfg.whitelist.patterns = std::move(whitelist);
  cfg.key_seed = to_bytes("key-" + id);
  return cfg;
}

inline NodeConfig client_config(const std::string& id, const std::string& address, bool backref) {
  NodeConfig cfg = relay_config(id, address, backref);
  cfg.is_client = true;
  return cfg;
}

// client + entry/middle/exit + one destination server
inline ThreeHop make_three_hop(uint64_t seed, bool backref = true,
                               std::vector<std::string> exit_whitelist = {}) {
  ThreeHop t;
  t.sim = std::make_unique<Simnet>(SimConfig{seed});
  t.sim->add_node(client_config("client-alice", "203.0.113.5", backref));
  t.sim->add_node(relay_config("node-entry", "10.0.0.1:9001", backref));
  t.sim->add_node(relay_config("node-middle", "10.0.0.2:9002", backref));
  t.sim->add_node(relay_config("node-exit", "10.0.0.3:9003", backref, std::move(exit_whitelist)));
  t.sim->add_server(t.server_addr, t.server_port, to_bytes("canned destination reply"));
  return t;
}

// schedules circuit construction at 1s and one stream at stream_ms
inline Bytes run_circuit_and_stream(ThreeHop& t, uint64_t stream_ms = 5000,
                                    const Bytes& payload = to_bytes("GET /resource")) {
  Bytes handle;
  t.sim->at(1000, [&](Simnet& sim) {
    handle = sim.node(t.client).create_circuit(sim, {t.entry, t.middle, t.exit});
  });
  t.sim->at(stream_ms, [&, stream_ms](Simnet& sim) {
    StreamRequest req{t.server_addr, t.server_port,
                      Timestamp(1700000000 + stream_ms / 1000)};
    sim.node(t.client).send_stream(sim, handle, req, payload);
  });
  t.sim->run();
  return handle;
}

inline size_t count_user_events(const Simnet& sim, const Bytes& node, const std::string& kind) {
  size_t n = 0;
  for (const auto& ev : sim.user_events())
    if (ev.node == node && ev.kind == kind) ++n;
  return n;
}

}  // namespace fixtures
