#pragma once

#include <json.hpp>

#include <string>
#include <variant>

#include "backref/games.hpp"

namespace backref {

// Scenario files are the external interface to the simulator: nodes, clients,
// servers, adversary, circuits, streams, seed, and an optional security game.

struct ScenarioNode {
  std::string id;
  std::string address;
  std::vector<std::string> roles{"entry", "middle", "exit"};
  std::vector<std::string> whitelist;
  bool backref = true;
  uint32_t retention_s = kDefaultRetentionSeconds;
};

struct ScenarioClient {
  std::string id;
  std::string address;
  bool backref = true;
};

struct ScenarioServer {
  std::string address;
  uint16_t port = 0;
  std::string reply;
};

struct ScenarioCompromise {
  std::string node;  // node id or "isp"
  uint64_t at_ms = 0;
};

struct ScenarioCircuit {
  std::string id;
  std::string owner;
  std::vector<std::string> path;
  uint64_t at_ms = 1000;
};

struct ScenarioStream {
  std::string circuit;
  std::string address;
  uint16_t port = 0;
  std::string payload;
  uint64_t at_ms = 5000;
};

struct Scenario {
  uint64_t seed = 0;
  Timestamp epoch = 1700000000;
  uint64_t latency_ms = 1;
  Timestamp timestamp_window = kDefaultFreshnessWindow;
  std::vector<ScenarioNode> nodes;
  std::vector<ScenarioClient> clients;
  std::vector<ScenarioServer> servers;
  std::vector<ScenarioCompromise> compromised;
  std::string adversary_strategy = "none";
  std::vector<ScenarioCircuit> circuits;
  std::vector<ScenarioStream> streams;
  std::string game = "none";
  // anonymity game payloads
  std::string game_message_1 = "message-alpha-000";
  std::string game_message_2 = "message-bravo-111";
};

struct ScenarioError {
  std::string message;
};

namespace scenariodetail {

inline std::string path_str(const std::string& section, size_t i, const char* field) {
  return section + "[" + std::to_string(i) + "]." + field;
}

}  // namespace scenariodetail

// Parses and validates. Parse failures carry the line number; semantic
// failures carry the offending field path.
inline std::variant<Scenario, ScenarioError> load_scenario(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    size_t line = 1;
    for (size_t i = 0; i < e.byte && i < text.size(); ++i)
      if (text[i] == '\n') ++line;
    return ScenarioError{"parse error at line " + std::to_string(line) + ": " + e.what()};
  }
  Scenario s;
  try {
    s.seed = j.value("seed", uint64_t(0));
    s.epoch = j.value("epoch", Timestamp(1700000000));
    s.latency_ms = j.value("latency_ms", uint64_t(1));
    s.timestamp_window = j.value("timestamp_window", kDefaultFreshnessWindow);
    s.game = j.value("game", std::string("none"));
    if (j.contains("game_messages")) {
      auto& gm = j["game_messages"];
      if (!gm.is_array() || gm.size() != 2)
        return ScenarioError{"game_messages: expected array of two strings"};
      s.game_message_1 = gm[0].get<std::string>();
      s.game_message_2 = gm[1].get<std::string>();
    }
    for (size_t i = 0; j.contains("nodes") && i < j["nodes"].size(); ++i) {
      auto& n = j["nodes"][i];
      ScenarioNode node;
      if (!n.contains("id")) return ScenarioError{scenariodetail::path_str("nodes", i, "id") + " missing"};
      node.id = n["id"].get<std::string>();
      if (!n.contains("address"))
        return ScenarioError{scenariodetail::path_str("nodes", i, "address") + " missing"};
      node.address = n["address"].get<std::string>();
      if (n.contains("roles")) node.roles = n["roles"].get<std::vector<std::string>>();
      for (const auto& role : node.roles)
        if (role != "entry" && role != "middle" && role != "exit")
          return ScenarioError{scenariodetail::path_str("nodes", i, "roles") + ": unknown role " + role};
      if (n.contains("whitelist")) node.whitelist = n["whitelist"].get<std::vector<std::string>>();
      node.backref = n.value("backref", true);
      node.retention_s = n.value("retention_s", kDefaultRetentionSeconds);
      s.nodes.push_back(std::move(node));
    }
    for (size_t i = 0; j.contains("clients") && i < j["clients"].size(); ++i) {
      auto& c = j["clients"][i];
      ScenarioClient client;
      if (!c.contains("id")) return ScenarioError{scenariodetail::path_str("clients", i, "id") + " missing"};
      client.id = c["id"].get<std::string>();
      if (!c.contains("address"))
        return ScenarioError{scenariodetail::path_str("clients", i, "address") + " missing"};
      client.address = c["address"].get<std::string>();
      client.backref = c.value("backref", true);
      s.clients.push_back(std::move(client));
    }
    for (size_t i = 0; j.contains("servers") && i < j["servers"].size(); ++i) {
      auto& v = j["servers"][i];
      ScenarioServer server;
      server.address = v.value("address", std::string());
      if (server.address.empty())
        return ScenarioError{scenariodetail::path_str("servers", i, "address") + " missing"};
      server.port = v.value("port", uint16_t(0));
      server.reply = v.value("reply", std::string("ok"));
      s.servers.push_back(std::move(server));
    }
    if (j.contains("adversary")) {
      auto& a = j["adversary"];
      s.adversary_strategy = a.value("strategy", std::string("none"));
      for (size_t i = 0; a.contains("compromised") && i < a["compromised"].size(); ++i) {
        auto& c = a["compromised"][i];
        ScenarioCompromise sc;
        if (c.is_string()) {
          sc.node = c.get<std::string>();
        } else {
          sc.node = c.value("node", std::string());
          sc.at_ms = c.value("at_ms", uint64_t(0));
        }
        if (sc.node.empty())
          return ScenarioError{scenariodetail::path_str("adversary.compromised", i, "node") + " missing"};
        s.compromised.push_back(std::move(sc));
      }
    }
    for (size_t i = 0; j.contains("circuits") && i < j["circuits"].size(); ++i) {
      auto& c = j["circuits"][i];
      ScenarioCircuit circuit;
      circuit.id = c.value("id", "c" + std::to_string(i));
      circuit.owner = c.value("owner", std::string());
      if (circuit.owner.empty())
        return ScenarioError{scenariodetail::path_str("circuits", i, "owner") + " missing"};
      if (!c.contains("path") || c["path"].empty())
        return ScenarioError{scenariodetail::path_str("circuits", i, "path") + " missing or empty"};
      circuit.path = c["path"].get<std::vector<std::string>>();
      if (circuit.path.size() > kMaxHops)
        return ScenarioError{scenariodetail::path_str("circuits", i, "path") + " exceeds max hops"};
      circuit.at_ms = c.value("at_ms", uint64_t(1000));
      s.circuits.push_back(std::move(circuit));
    }
    for (size_t i = 0; j.contains("streams") && i < j["streams"].size(); ++i) {
      auto& v = j["streams"][i];
      ScenarioStream stream;
      stream.circuit = v.value("circuit", std::string());
      if (stream.circuit.empty())
        return ScenarioError{scenariodetail::path_str("streams", i, "circuit") + " missing"};
      stream.address = v.value("address", std::string());
      stream.port = v.value("port", uint16_t(0));
      stream.payload = v.value("payload", std::string());
      stream.at_ms = v.value("at_ms", uint64_t(5000));
      s.streams.push_back(std::move(stream));
    }
  } catch (const nlohmann::json::exception& e) {
    return ScenarioError{std::string("schema error: ") + e.what()};
  }

  // referential integrity
  std::set<std::string> node_ids, owner_ids, circuit_ids;
  for (const auto& n : s.nodes) node_ids.insert(n.id);
  for (const auto& c : s.clients) owner_ids.insert(c.id);
  owner_ids.insert(node_ids.begin(), node_ids.end());
  for (size_t i = 0; i < s.circuits.size(); ++i) {
    const auto& c = s.circuits[i];
    if (!owner_ids.count(c.owner))
      return ScenarioError{scenariodetail::path_str("circuits", i, "owner") + ": unknown id " + c.owner};
    for (const auto& hop : c.path)
      if (!node_ids.count(hop))
        return ScenarioError{scenariodetail::path_str("circuits", i, "path") + ": unknown node " + hop};
    circuit_ids.insert(c.id);
  }
  for (size_t i = 0; i < s.streams.size(); ++i)
    if (!circuit_ids.count(s.streams[i].circuit))
      return ScenarioError{scenariodetail::path_str("streams", i, "circuit") + ": unknown circuit " +
                           s.streams[i].circuit};
  for (size_t i = 0; i < s.compromised.size(); ++i)
    if (s.compromised[i].node != "isp" && !node_ids.count(s.compromised[i].node))
      return ScenarioError{scenariodetail::path_str("adversary.compromised", i, "node") +
                           ": unknown node " + s.compromised[i].node};
  if (s.game != "none" && s.game != "backward-traceability" && s.game != "no-false-accusation" &&
      s.game != "anonymity-swap" && s.game != "no-forward-traceability")
    return ScenarioError{"game: unknown game " + s.game};
  return s;
}

struct RunSummary {
  std::map<std::string, uint64_t> cells_by_kind;  // create/created/relay
  std::map<std::string, uint64_t> records_per_node;
  uint64_t streams_requested = 0;
  uint64_t streams_delivered = 0;
  uint64_t drops = 0;
  std::string transcript_hash;
  std::map<std::string, bool> verdicts;

  std::string to_text() const {
    std::ostringstream out;
    out << "transcript-hash: " << transcript_hash << "\n";
    for (const auto& [k, v] : cells_by_kind) out << "cells." << k << ": " << v << "\n";
    for (const auto& [k, v] : records_per_node) out << "records." << k << ": " << v << "\n";
    out << "streams.requested: " << streams_requested << "\n";
    out << "streams.delivered: " << streams_delivered << "\n";
    out << "drops: " << drops << "\n";
    for (const auto& [k, v] : verdicts) out << "verdict." << k << ": " << (v ? "pass" : "fail") << "\n";
    return out.str();
  }
};

struct ScenarioRun {
  std::unique_ptr<Simnet> sim;
  RunSummary summary;
  std::map<std::string, Bytes> circuit_handles;
};

// Builds the simulation from the scenario, schedules its operations, runs to
// quiescence, and reconciles the summary with the transcript.
inline ScenarioRun run_scenario(const Scenario& s, std::optional<uint64_t> seed_override = {}) {
  ScenarioRun run;
  SimConfig cfg;
  cfg.seed = seed_override.value_or(s.seed);
  cfg.epoch = s.epoch;
  cfg.latency_ms = s.latency_ms;
  run.sim = std::make_unique<Simnet>(cfg);
  Simnet& sim = *run.sim;

  for (const auto& n : s.nodes) {
    NodeConfig nc;
    nc.id = to_bytes(n.id);
    nc.address = to_bytes(n.address);
    nc.entry_allowed = std::find(n.roles.begin(), n.roles.end(), "entry") != n.roles.end();
    nc.middle_allowed = std::find(n.roles.begin(), n.roles.end(), "middle") != n.roles.end();
    nc.exit_allowed = std::find(n.roles.begin(), n.roles.end(), "exit") != n.roles.end();
    nc.backref = n.backref;
    nc.freshness_window = s.timestamp_window;
    nc.retention = n.retention_s;
    nc.whitelist.patterns = n.whitelist;
    nc.key_seed = to_bytes("key-" + n.id);
    sim.add_node(std::move(nc));
  }
  for (const auto& c : s.clients) {
    NodeConfig nc;
    nc.id = to_bytes(c.id);
    nc.address = to_bytes(c.address);
    nc.is_client = true;
    nc.backref = c.backref;
    nc.freshness_window = s.timestamp_window;
    nc.key_seed = to_bytes("key-" + c.id);
    sim.add_node(std::move(nc));
  }
  for (const auto& v : s.servers) sim.add_server(to_bytes(v.address), v.port, to_bytes(v.reply));
  for (const auto& c : s.compromised)
    if (c.node != "isp") sim.compromise(to_bytes(c.node), c.at_ms);

  for (const auto& c : s.circuits) {
    sim.at(c.at_ms, [&run, c](Simnet& sn) {
      std::vector<Bytes> path;
      for (const auto& hop : c.path) path.push_back(to_bytes(hop));
      run.circuit_handles[c.id] = sn.node(to_bytes(c.owner)).create_circuit(sn, path);
    });
  }
  std::map<std::string, std::string> circuit_owner;
  for (const auto& c : s.circuits) circuit_owner[c.id] = c.owner;
  for (const auto& st : s.streams) {
    std::string owner = circuit_owner[st.circuit];
    sim.at(st.at_ms, [&run, st, owner](Simnet& sn) {
      auto it = run.circuit_handles.find(st.circuit);
      if (it == run.circuit_handles.end()) return;
      StreamRequest req{to_bytes(st.address), st.port, sn.now_ts()};
      sn.node(to_bytes(owner)).send_stream(sn, it->second, req, to_bytes(st.payload));
    });
  }

  sim.run();

  RunSummary& summary = run.summary;
  auto kinds = sim.cells_by_kind();
  summary.cells_by_kind["create"] = kinds[uint8_t(CellKind::kCreate)];
  summary.cells_by_kind["created"] = kinds[uint8_t(CellKind::kCreated)];
  summary.cells_by_kind["relay"] = kinds[uint8_t(CellKind::kRelay)];
  for (const auto& n : s.nodes)
    summary.records_per_node[n.id] = sim.node(to_bytes(n.id)).log().size();
  summary.streams_requested = s.streams.size();
  for (const auto& server : sim.servers()) summary.streams_delivered += server.log.size();
  summary.drops = sim.drops_unknown_destination();
  for (const auto& n : s.nodes) summary.drops += sim.node(to_bytes(n.id)).stats().drops;
  summary.transcript_hash = to_hex(sim.transcript_hash());

  // attached security game, when requested
  if (s.game == "backward-traceability") {
    summary.verdicts[s.game] = backward_traceability_game(cfg.seed).verdict;
  } else if (s.game == "no-false-accusation") {
    Corruption c;
    for (const auto& comp : s.compromised) {
      if (comp.node == "isp") c.isp = true;
      if (comp.node.find("entry") != std::string::npos) c.entry = true;
      if (comp.node.find("middle") != std::string::npos) c.middle = true;
      if (comp.node.find("exit") != std::string::npos) c.exit = true;
    }
    AccusationStrategy strategy = AccusationStrategy::kFabricate;
    if (s.adversary_strategy == "splice") strategy = AccusationStrategy::kSplice;
    if (s.adversary_strategy == "blame-entry") strategy = AccusationStrategy::kBlameEntry;
    summary.verdicts[s.game] = no_false_accusation_game(cfg.seed, c, strategy).verdict;
  } else if (s.game == "anonymity-swap") {
    summary.verdicts[s.game] =
        anonymity_swap_game(cfg.seed, to_bytes(s.game_message_1), to_bytes(s.game_message_2))
            .verdict;
  } else if (s.game == "no-forward-traceability") {
    summary.verdicts[s.game] = no_forward_traceability_game(cfg.seed).verdict;
  }
  return run;
}

// roster export: one "id address pk-hex" line per registered node
inline std::string export_roster(const Directory& dir) {
  std::ostringstream out;
  for (const auto& info : dir.roster())
    out << to_string(info.id) << " " << to_string(info.address) << " " << to_hex(info.pk) << "\n";
  return out.str();
}

inline std::vector<NodeInfo> import_roster(const std::string& text) {
  std::vector<NodeInfo> roster;
  std::istringstream in(text);
  std::string id, address, pk_hex;
  while (in >> id >> address >> pk_hex) {
    auto pk = from_hex(pk_hex);
    if (!pk) continue;
    roster.push_back({to_bytes(id), to_bytes(address), *pk});
  }
  return roster;
}

// destination server logs: "address port source ts payload-hex" lines
inline std::string export_destination_logs(const Simnet& sim) {
  std::ostringstream out;
  for (const auto& server : sim.servers())
    for (const auto& entry : server.log)
      out << to_string(server.address) << " " << server.port << " "
          << to_string(entry.source_address) << " " << entry.request.ts << " "
          << to_hex(entry.payload) << "\n";
  return out.str();
}

}  // namespace backref
