#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "backref/evidence.hpp"
#include "backref/simnet.hpp"

namespace backref {

// Backward traceability verification: walk evidence records from an exit-node
// stream toward the originator, one verified predecessor per hop, then close
// the last mile through the ISP attestation registry.

enum class TraceFailReason : uint8_t {
  kNoRecord = 1,
  kBadSignature = 2,
  kTimestampMismatch = 3,
  kNonCooperating = 4,
  kAttestationFailed = 5,
};

inline const char* to_string(TraceFailReason r) {
  switch (r) {
    case TraceFailReason::kNoRecord: return "no-record";
    case TraceFailReason::kBadSignature: return "bad-signature";
    case TraceFailReason::kTimestampMismatch: return "timestamp-mismatch";
    case TraceFailReason::kNonCooperating: return "non-cooperating";
    case TraceFailReason::kAttestationFailed: return "attestation-failed";
  }
  return "unknown";
}

inline std::optional<TraceFailReason> trace_fail_reason_from(const std::string& s) {
  for (auto r : {TraceFailReason::kNoRecord, TraceFailReason::kBadSignature,
                 TraceFailReason::kTimestampMismatch, TraceFailReason::kNonCooperating,
                 TraceFailReason::kAttestationFailed})
    if (s == to_string(r)) return r;
  return std::nullopt;
}

struct TraceQuery {
  Bytes exit_node;          // node id the stream left from
  StreamRequest descriptor; // reconstructs m
  Timestamp ts_tolerance = 0;
};

// One verified backward step. Everything needed to re-check the hop is
// embedded, so a report re-verifies with no log access.
struct TraceHop {
  Bytes node_id;        // node whose evidence this is
  Bytes pseudonym;      // X at this hop
  Bytes predecessor_address;
  std::optional<SignedPseudonym> outbound;   // relay hops: {X_next}_{sigma_X}
  std::optional<SignedPseudonym> inbound;    // endorsement naming the predecessor
  std::optional<Bytes> user_address;         // unsigned-user entry path
  std::optional<StreamRequest> request;      // exit hop
  std::optional<Bytes> stream_sigma;         // exit hop
};

struct TraceOutcome {
  bool user_identified = false;
  Bytes address;             // accused address when identified
  bool isp_attested = false;
  bool originator_is_node = false;
  Bytes fail_at;             // node id for trace-fail
  TraceFailReason reason = TraceFailReason::kNoRecord;
};

struct TraceReport {
  TraceQuery query;
  std::vector<TraceHop> hops;
  std::vector<std::string> events;
  TraceOutcome outcome;

  std::string serialize() const;
  static std::optional<TraceReport> parse(const std::string& text);
};

using LogSnapshots = std::map<Bytes, LogStore>;

namespace tracedetail {

struct StepFail {
  TraceFailReason reason;
};

inline bool ts_not_after(Timestamp ts, Timestamp limit, Timestamp tolerance) {
  return ts <= limit + tolerance;
}

}  // namespace tracedetail

// Exit-node step: locate the record for H(m), match the
// timestamp, verify the stream signature under X_exit, verify the endorsement
// that names the predecessor.
inline std::variant<TraceHop, tracedetail::StepFail> trace_stream(const TraceQuery& query,
                                                                  const LogStore& exit_snapshot) {
  Bytes m = query.descriptor.canonical_message();
  auto rec_var = exit_snapshot.lookup(index_hash(m));
  if (!rec_var || !std::holds_alternative<ExitEvidenceRecord>(*rec_var))
    return tracedetail::StepFail{TraceFailReason::kNoRecord};
  const auto& rec = std::get<ExitEvidenceRecord>(*rec_var);

  Timestamp lo = std::min(rec.request_ts, query.descriptor.ts);
  Timestamp hi = std::max(rec.request_ts, query.descriptor.ts);
  if (hi - lo > query.ts_tolerance || !(rec.request == query.descriptor))
    return tracedetail::StepFail{TraceFailReason::kTimestampMismatch};

  const SignedPseudonym& endorsement = rec.endorsed_pseudonym;
  if (verify_stream(endorsement.element, rec.request, rec.stream_sigma, rec.request.ts, 0) !=
      VerifyStatus::kOk)
    return tracedetail::StepFail{TraceFailReason::kBadSignature};
  if (endorsement.signer_kind != SignerKind::kNodeLongTermKey ||
      verify_signed_pseudonym(endorsement.signer_ref, endorsement, endorsement.ts, 0) !=
          VerifyStatus::kOk)
    return tracedetail::StepFail{TraceFailReason::kBadSignature};
  if (!tracedetail::ts_not_after(endorsement.ts, query.descriptor.ts, query.ts_tolerance))
    return tracedetail::StepFail{TraceFailReason::kTimestampMismatch};

  TraceHop hop;
  hop.node_id = exit_snapshot.node_id();
  hop.pseudonym = endorsement.element;
  hop.predecessor_address = rec.predecessor_address;
  hop.inbound = endorsement;
  hop.request = rec.request;
  hop.stream_sigma = rec.stream_sigma;
  return hop;
}

// Relay step: look up by H(X_next), prove linkability of the
// stored pseudonym pair, then verify the inbound endorsement (or surface the
// recorded user address on the unsigned-user entry path).
inline std::variant<TraceHop, tracedetail::StepFail> trace_hop(const LogStore& snapshot,
                                                               const Bytes& x_next,
                                                               Timestamp downstream_ts,
                                                               Timestamp tolerance) {
  auto rec_var = snapshot.lookup(index_hash(x_next));
  if (!rec_var || !std::holds_alternative<RelayEvidenceRecord>(*rec_var))
    return tracedetail::StepFail{TraceFailReason::kNoRecord};
  const auto& rec = std::get<RelayEvidenceRecord>(*rec_var);
  if (rec.outbound.element != x_next)
    return tracedetail::StepFail{TraceFailReason::kNoRecord};

  // linkability between X_this and X_next
  if (rec.outbound.signer_kind != SignerKind::kPseudonymKey ||
      verify_signed_pseudonym(rec.pseudonym, rec.outbound, rec.outbound.ts, 0) != VerifyStatus::kOk)
    return tracedetail::StepFail{TraceFailReason::kBadSignature};
  if (!tracedetail::ts_not_after(rec.outbound.ts, downstream_ts, tolerance))
    return tracedetail::StepFail{TraceFailReason::kTimestampMismatch};

  TraceHop hop;
  hop.node_id = snapshot.node_id();
  hop.pseudonym = rec.pseudonym;
  hop.predecessor_address = rec.predecessor_address;
  hop.outbound = rec.outbound;

  if (rec.inbound.signature) {
    const SignedPseudonym& endorsement = *rec.inbound.signature;
    if (endorsement.element != rec.pseudonym ||
        verify_signed_pseudonym(endorsement.signer_ref, endorsement, endorsement.ts, 0) !=
            VerifyStatus::kOk)
      return tracedetail::StepFail{TraceFailReason::kBadSignature};
    if (!tracedetail::ts_not_after(endorsement.ts, downstream_ts, tolerance))
      return tracedetail::StepFail{TraceFailReason::kTimestampMismatch};
    hop.inbound = endorsement;
  } else if (rec.inbound.user_address) {
    hop.user_address = rec.inbound.user_address;
  } else {
    return tracedetail::StepFail{TraceFailReason::kBadSignature};
  }
  return hop;
}

// last mile: the ISP attests that (user address, X_1) crossed its wire
inline bool attest_last_mile(const IspRegistry& registry, ByteSpan user_address,
                             ByteSpan entry_pseudonym) {
  return registry.attests(user_address, entry_pseudonym);
}

// Chains trace_stream and trace_hop across cooperating nodes' snapshots and
// closes with the ISP. Missing snapshots fail as non-cooperating at that node
// while already-verified hops stay in the report (liability shifts to the
// non-cooperating node, never past it).
inline TraceReport full_trace(const TraceQuery& query, const LogSnapshots& snapshots,
                              const IspRegistry& isp, const std::vector<NodeInfo>& roster) {
  TraceReport report;
  report.query = query;

  auto fail = [&](const Bytes& at, TraceFailReason reason) {
    report.outcome.user_identified = false;
    report.outcome.fail_at = at;
    report.outcome.reason = reason;
    return report;
  };

  auto exit_snapshot = snapshots.find(query.exit_node);
  if (exit_snapshot == snapshots.end())
    return fail(query.exit_node, TraceFailReason::kNonCooperating);

  report.events.push_back("LookupN3");
  auto step = trace_stream(query, exit_snapshot->second);
  if (std::holds_alternative<tracedetail::StepFail>(step))
    return fail(query.exit_node, std::get<tracedetail::StepFail>(step).reason);
  report.events.push_back("CheckSignature");
  report.hops.push_back(std::get<TraceHop>(step));

  // walk backward, at most roster-size hops
  for (size_t depth = 0; depth <= roster.size() + 1; ++depth) {
    const TraceHop& cur = report.hops.back();

    if (cur.user_address) {
      // unsigned-user entry: ISP attestation closes the chain
      report.events.push_back("LookupISP");
      if (!attest_last_mile(isp, *cur.user_address, cur.pseudonym))
        return fail(cur.node_id, TraceFailReason::kAttestationFailed);
      report.events.push_back("TraceUser");
      report.outcome.user_identified = true;
      report.outcome.address = *cur.user_address;
      report.outcome.isp_attested = true;
      return report;
    }

    // inbound endorsement names the predecessor; its pk must belong to the
    // node registered at the recorded predecessor address
    const SignedPseudonym& endorsement = *cur.inbound;
    const NodeInfo* pred = nullptr;
    for (const auto& info : roster)
      if (info.pk == endorsement.signer_ref) pred = &info;
    if (!pred || pred->address != cur.predecessor_address)
      return fail(cur.node_id, TraceFailReason::kBadSignature);
    report.events.push_back("RevealPredecessor(" + to_string(pred->id) + ")");

    auto pred_snapshot = snapshots.find(pred->id);
    if (pred_snapshot == snapshots.end())
      return fail(pred->id, TraceFailReason::kNonCooperating);

    auto next = trace_hop(pred_snapshot->second, cur.pseudonym, query.descriptor.ts,
                          query.ts_tolerance);
    if (std::holds_alternative<tracedetail::StepFail>(next)) {
      const auto& sf = std::get<tracedetail::StepFail>(next);
      if (sf.reason == TraceFailReason::kNoRecord) {
        // no relay record for this pseudonym at the endorser: the endorser is
        // the originator (an OR-node user endorsing its own entry pseudonym)
        report.events.push_back("TraceUser");
        report.outcome.user_identified = true;
        report.outcome.address = pred->address;
        report.outcome.isp_attested = false;
        report.outcome.originator_is_node = true;
        return report;
      }
      return fail(pred->id, sf.reason);
    }
    report.events.push_back("CheckSignature");
    report.hops.push_back(std::get<TraceHop>(next));
  }
  return fail(query.exit_node, TraceFailReason::kBadSignature);  // cycle guard
}

// Re-run every signature verification using only the report's own bytes.
inline bool reverify_report(const TraceReport& report) {
  if (report.hops.empty()) return false;
  const TraceHop& exit_hop = report.hops.front();
  if (!exit_hop.request || !exit_hop.stream_sigma || !exit_hop.inbound) return false;
  if (verify_stream(exit_hop.pseudonym, *exit_hop.request, *exit_hop.stream_sigma,
                    exit_hop.request->ts, 0) != VerifyStatus::kOk)
    return false;
  if (verify_signed_pseudonym(exit_hop.inbound->signer_ref, *exit_hop.inbound,
                              exit_hop.inbound->ts, 0) != VerifyStatus::kOk)
    return false;
  Bytes x_next = exit_hop.pseudonym;
  for (size_t i = 1; i < report.hops.size(); ++i) {
    const TraceHop& hop = report.hops[i];
    if (!hop.outbound || hop.outbound->element != x_next) return false;
    if (verify_signed_pseudonym(hop.pseudonym, *hop.outbound, hop.outbound->ts, 0) !=
        VerifyStatus::kOk)
      return false;
    if (hop.inbound) {
      if (hop.inbound->element != hop.pseudonym ||
          verify_signed_pseudonym(hop.inbound->signer_ref, *hop.inbound, hop.inbound->ts, 0) !=
              VerifyStatus::kOk)
        return false;
    } else if (!hop.user_address) {
      return false;
    }
    x_next = hop.pseudonym;
  }
  return true;
}

// ---------- report serialization (line-oriented text with hex fields) ----------

namespace tracedetail {

inline void put_sp(std::ostringstream& out, const std::string& label, const SignedPseudonym& sp) {
  out << label << ": kind=" << int(uint8_t(sp.signer_kind)) << " X=" << to_hex(sp.element)
      << " ts=" << sp.ts << " sigma=" << to_hex(sp.sigma) << " ref=" << to_hex(sp.signer_ref)
      << "\n";
}

inline std::optional<SignedPseudonym> parse_sp(const std::string& line) {
  SignedPseudonym sp;
  std::istringstream in(line);
  std::string tok;
  int seen = 0;
  while (in >> tok) {
    auto eq = tok.find('=');
    if (eq == std::string::npos) continue;
    std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "kind") {
      int k = std::stoi(val);
      if (k != 1 && k != 2) return std::nullopt;
      sp.signer_kind = SignerKind(k);
      ++seen;
    } else if (key == "X") {
      auto b = from_hex(val);
      if (!b) return std::nullopt;
      sp.element = *b;
      ++seen;
    } else if (key == "ts") {
      sp.ts = Timestamp(std::stoul(val));
      ++seen;
    } else if (key == "sigma") {
      auto b = from_hex(val);
      if (!b) return std::nullopt;
      sp.sigma = *b;
      ++seen;
    } else if (key == "ref") {
      auto b = from_hex(val);
      if (!b) return std::nullopt;
      sp.signer_ref = *b;
      ++seen;
    }
  }
  if (seen != 5) return std::nullopt;
  return sp;
}

}  // namespace tracedetail

inline std::string TraceReport::serialize() const {
  std::ostringstream out;
  out << "BACKREF-TRACE-REPORT v1\n";
  out << "query.exit: " << to_string(query.exit_node) << "\n";
  out << "query.address: " << to_hex(query.descriptor.address) << "\n";
  out << "query.port: " << query.descriptor.port << "\n";
  out << "query.ts: " << query.descriptor.ts << "\n";
  out << "query.tolerance: " << query.ts_tolerance << "\n";
  for (const TraceHop& hop : hops) {
    out << "hop.node: " << to_string(hop.node_id) << "\n";
    out << "hop.pseudonym: " << to_hex(hop.pseudonym) << "\n";
    out << "hop.predecessor: " << to_hex(hop.predecessor_address) << "\n";
    if (hop.outbound) tracedetail::put_sp(out, "hop.outbound", *hop.outbound);
    if (hop.inbound) tracedetail::put_sp(out, "hop.inbound", *hop.inbound);
    if (hop.user_address) out << "hop.user: " << to_hex(*hop.user_address) << "\n";
    if (hop.request)
      out << "hop.request: addr=" << to_hex(hop.request->address) << " port=" << hop.request->port
          << " ts=" << hop.request->ts << "\n";
    if (hop.stream_sigma) out << "hop.streamsig: " << to_hex(*hop.stream_sigma) << "\n";
  }
  out << "events:";
  for (const auto& ev : events) out << " " << ev;
  out << "\n";
  if (outcome.user_identified) {
    out << "outcome: user-identified address=" << to_hex(outcome.address)
        << " attested=" << (outcome.isp_attested ? 1 : 0)
        << " originator-node=" << (outcome.originator_is_node ? 1 : 0) << "\n";
  } else {
    out << "outcome: trace-fail at=" << to_string(outcome.fail_at)
        << " reason=" << to_string(outcome.reason) << "\n";
  }
  return out.str();
}

inline std::optional<TraceReport> TraceReport::parse(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "BACKREF-TRACE-REPORT v1") return std::nullopt;
  TraceReport report;
  auto value_of = [](const std::string& l) {
    auto pos = l.find(": ");
    return pos == std::string::npos ? std::string() : l.substr(pos + 2);
  };
  while (std::getline(in, line)) {
    if (line.rfind("query.exit: ", 0) == 0) {
      report.query.exit_node = to_bytes(value_of(line));
    } else if (line.rfind("query.address: ", 0) == 0) {
      auto b = from_hex(value_of(line));
      if (!b) return std::nullopt;
      report.query.descriptor.address = *b;
    } else if (line.rfind("query.port: ", 0) == 0) {
      report.query.descriptor.port = uint16_t(std::stoul(value_of(line)));
    } else if (line.rfind("query.ts: ", 0) == 0) {
      report.query.descriptor.ts = Timestamp(std::stoul(value_of(line)));
    } else if (line.rfind("query.tolerance: ", 0) == 0) {
      report.query.ts_tolerance = Timestamp(std::stoul(value_of(line)));
    } else if (line.rfind("hop.node: ", 0) == 0) {
      TraceHop hop;
      hop.node_id = to_bytes(value_of(line));
      report.hops.push_back(hop);
    } else if (line.rfind("hop.pseudonym: ", 0) == 0) {
      auto b = from_hex(value_of(line));
      if (!b || report.hops.empty()) return std::nullopt;
      report.hops.back().pseudonym = *b;
    } else if (line.rfind("hop.predecessor: ", 0) == 0) {
      auto b = from_hex(value_of(line));
      if (!b || report.hops.empty()) return std::nullopt;
      report.hops.back().predecessor_address = *b;
    } else if (line.rfind("hop.outbound: ", 0) == 0) {
      auto sp = tracedetail::parse_sp(value_of(line));
      if (!sp || report.hops.empty()) return std::nullopt;
      report.hops.back().outbound = sp;
    } else if (line.rfind("hop.inbound: ", 0) == 0) {
      auto sp = tracedetail::parse_sp(value_of(line));
      if (!sp || report.hops.empty()) return std::nullopt;
      report.hops.back().inbound = sp;
    } else if (line.rfind("hop.user: ", 0) == 0) {
      auto b = from_hex(value_of(line));
      if (!b || report.hops.empty()) return std::nullopt;
      report.hops.back().user_address = *b;
    } else if (line.rfind("hop.request: ", 0) == 0) {
      if (report.hops.empty()) return std::nullopt;
      StreamRequest req;
      std::istringstream fields(value_of(line));
      std::string tok;
      while (fields >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "addr") {
          auto b = from_hex(val);
          if (!b) return std::nullopt;
          req.address = *b;
        } else if (key == "port") {
          req.port = uint16_t(std::stoul(val));
        } else if (key == "ts") {
          req.ts = Timestamp(std::stoul(val));
        }
      }
      report.hops.back().request = req;
    } else if (line.rfind("hop.streamsig: ", 0) == 0) {
      auto b = from_hex(value_of(line));
      if (!b || report.hops.empty()) return std::nullopt;
      report.hops.back().stream_sigma = *b;
    } else if (line.rfind("events:", 0) == 0) {
      std::istringstream evs(line.substr(7));
      std::string ev;
      while (evs >> ev) report.events.push_back(ev);
    } else if (line.rfind("outcome: user-identified", 0) == 0) {
      report.outcome.user_identified = true;
      std::istringstream fields(line);
      std::string tok;
      while (fields >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "address") {
          auto b = from_hex(val);
          if (!b) return std::nullopt;
          report.outcome.address = *b;
        } else if (key == "attested") {
          report.outcome.isp_attested = val == "1";
        } else if (key == "originator-node") {
          report.outcome.originator_is_node = val == "1";
        }
      }
    } else if (line.rfind("outcome: trace-fail", 0) == 0) {
      report.outcome.user_identified = false;
      std::istringstream fields(line);
      std::string tok;
      while (fields >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) continue;
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "at") {
          report.outcome.fail_at = to_bytes(val);
        } else if (key == "reason") {
          auto r = trace_fail_reason_from(val);
          if (!r) return std::nullopt;
          report.outcome.reason = *r;
        }
      }
    }
  }
  return report;
}

}  // namespace backref
