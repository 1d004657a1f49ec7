#pragma once

#include <map>
#include <optional>
#include <variant>
#include <vector>

#include "backref/cells.hpp"
#include "backref/pseudonym.hpp"

namespace backref {

// Evidence records hold exactly the signature material one verifiable
// backward hop needs. By construction neither variant has a field for a
// successor address or node id; the only successor-related datum is the
// outbound pseudonym.

// inbound half of a relay record: who handed us our pseudonym
struct InboundOrigin {
  // endorsement (or, unused by honest flows, a pseudonym signature) from the
  // predecessor; absent on the unsigned-user entry path
  std::optional<SignedPseudonym> signature;
  // set on the unsigned-user path: the client address for the ISP join
  std::optional<Bytes> user_address;
};

// Middle/entry node record: pseudonym pair (X_i, X_{i+1}) with signatures.
struct RelayEvidenceRecord {
  Digest index_in{};   // H(X_i)
  Digest index_out{};  // H(X_{i+1})
  Bytes predecessor_address;
  Bytes pseudonym;     // X_i
  InboundOrigin inbound;
  SignedPseudonym outbound;  // {X_{i+1} ‖ ts}_{sigma_{X_i}}, signer_ref = X_i
  Timestamp stored_ts = 0;

  Bytes serialize() const {
    Bytes out;
    append(out, index_in);
    append(out, index_out);
    put_lp(out, predecessor_address);
    append(out, pseudonym);
    if (inbound.signature) {
      out.push_back(1);
      append(out, inbound.signature->serialize());
    } else {
      out.push_back(0);
      put_lp(out, inbound.user_address.value_or(Bytes{}));
    }
    append(out, outbound.serialize());
    put_u32(out, stored_ts);
    return out;
  }

  static std::optional<RelayEvidenceRecord> deserialize(ByteSpan b) {
    ByteReader r(b);
    RelayEvidenceRecord rec;
    Bytes idx;
    if (!r.get_bytes(32, idx)) return std::nullopt;
    std::copy(idx.begin(), idx.end(), rec.index_in.begin());
    if (!r.get_bytes(32, idx)) return std::nullopt;
    std::copy(idx.begin(), idx.end(), rec.index_out.begin());
    if (!r.get_lp(rec.predecessor_address)) return std::nullopt;
    if (!r.get_bytes(96, rec.pseudonym)) return std::nullopt;
    uint8_t flag;
    if (!r.get_u8(flag) || flag > 1) return std::nullopt;
    if (flag) {
      auto sp = SignedPseudonym::parse(r);
      if (!sp) return std::nullopt;
      rec.inbound.signature = std::move(sp);
    } else {
      Bytes addr;
      if (!r.get_lp(addr)) return std::nullopt;
      rec.inbound.user_address = std::move(addr);
    }
    auto outbound = SignedPseudonym::parse(r);
    if (!outbound) return std::nullopt;
    rec.outbound = std::move(*outbound);
    if (!r.get_u32(rec.stored_ts) || !r.done()) return std::nullopt;
    return rec;
  }
};

// Exit node record: stream request joined to the endorsed exit pseudonym.
struct ExitEvidenceRecord {
  Digest index{};  // H(m)
  Bytes predecessor_address;
  SignedPseudonym endorsed_pseudonym;  // {X_exit ‖ ts}_{sigma_prev-node}
  StreamRequest request;
  Bytes stream_sigma;  // 48 bytes
  Timestamp request_ts = 0;  // ts_xm
  Timestamp stored_ts = 0;

  Bytes serialize() const {
    Bytes out;
    append(out, index);
    put_lp(out, predecessor_address);
    append(out, endorsed_pseudonym.serialize());
    append(out, request.serialize());
    append(out, stream_sigma);
    put_u32(out, request_ts);
    put_u32(out, stored_ts);
    return out;
  }

  static std::optional<ExitEvidenceRecord> deserialize(ByteSpan b) {
    ByteReader r(b);
    ExitEvidenceRecord rec;
    Bytes idx;
    if (!r.get_bytes(32, idx)) return std::nullopt;
    std::copy(idx.begin(), idx.end(), rec.index.begin());
    if (!r.get_lp(rec.predecessor_address)) return std::nullopt;
    auto sp = SignedPseudonym::parse(r);
    if (!sp) return std::nullopt;
    rec.endorsed_pseudonym = std::move(*sp);
    auto req = StreamRequest::parse(r);
    if (!req) return std::nullopt;
    rec.request = std::move(*req);
    if (!r.get_bytes(48, rec.stream_sigma)) return std::nullopt;
    if (!r.get_u32(rec.request_ts)) return std::nullopt;
    if (!r.get_u32(rec.stored_ts) || !r.done()) return std::nullopt;
    return rec;
  }
};

using EvidenceRecord = std::variant<RelayEvidenceRecord, ExitEvidenceRecord>;

enum class AppendError : uint8_t {
  kDuplicateIndex = 1,   // pseudonym or stream reuse; honest runs never hit it
  kVerificationFailed = 2,
};

// signature-only re-checks at write time (no freshness window; records outlive it)
inline bool record_signatures_verify(const RelayEvidenceRecord& rec) {
  if (rec.outbound.signer_kind != SignerKind::kPseudonymKey) return false;
  if (rec.outbound.signer_ref != rec.pseudonym) return false;
  if (verify_signed_pseudonym(rec.pseudonym, rec.outbound, rec.outbound.ts, 0) !=
      VerifyStatus::kOk)
    return false;
  if (rec.inbound.signature) {
    const SignedPseudonym& in = *rec.inbound.signature;
    if (in.element != rec.pseudonym) return false;
    if (verify_signed_pseudonym(in.signer_ref, in, in.ts, 0) != VerifyStatus::kOk) return false;
  } else if (!rec.inbound.user_address || rec.inbound.user_address->empty()) {
    return false;
  }
  return true;
}

inline bool record_signatures_verify(const ExitEvidenceRecord& rec) {
  const SignedPseudonym& sp = rec.endorsed_pseudonym;
  if (sp.signer_kind != SignerKind::kNodeLongTermKey) return false;
  if (verify_signed_pseudonym(sp.signer_ref, sp, sp.ts, 0) != VerifyStatus::kOk) return false;
  if (verify_stream(sp.element, rec.request, rec.stream_sigma, rec.request.ts, 0) !=
      VerifyStatus::kOk)
    return false;
  return rec.request_ts == rec.request.ts;
}

inline Bytes serialize_record(const EvidenceRecord& rec) {
  Bytes body = std::visit([](const auto& r) { return r.serialize(); }, rec);
  Bytes out;
  out.push_back(std::holds_alternative<RelayEvidenceRecord>(rec) ? 1 : 2);
  put_u32(out, uint32_t(body.size()));
  append(out, body);
  return out;
}

inline std::optional<EvidenceRecord> parse_record(ByteReader& r) {
  uint8_t type;
  uint32_t len;
  Bytes body;
  if (!r.get_u8(type) || !r.get_u32(len) || !r.get_bytes(len, body)) return std::nullopt;
  if (type == 1) {
    auto rec = RelayEvidenceRecord::deserialize(body);
    if (!rec) return std::nullopt;
    return EvidenceRecord(std::move(*rec));
  }
  if (type == 2) {
    auto rec = ExitEvidenceRecord::deserialize(body);
    if (!rec) return std::nullopt;
    return EvidenceRecord(std::move(*rec));
  }
  return std::nullopt;
}

inline constexpr char kLogMagic[9] = "BKRFLOG1";
inline constexpr Timestamp kDefaultRetentionSeconds = 7 * 24 * 3600;

// Append-only per-node evidence log with an in-memory index over H(·) keys.
// Single-writer; readers work from exported snapshots.
class LogStore {
 public:
  explicit LogStore(Bytes node_id = {}, Timestamp retention = kDefaultRetentionSeconds)
      : node_id_(std::move(node_id)), retention_(retention) {}

  // write-time verification plus duplicate-index rejection
  std::optional<AppendError> append(EvidenceRecord rec) {
    bool ok = std::visit([](const auto& r) { return record_signatures_verify(r); }, rec);
    if (!ok) return AppendError::kVerificationFailed;
    std::vector<Digest> keys = indexes_of(rec);
    for (const Digest& k : keys)
      if (index_.count(k)) return AppendError::kDuplicateIndex;
    records_.push_back(std::move(rec));
    for (const Digest& k : keys) index_[k] = records_.size() - 1;
    return std::nullopt;
  }

  std::optional<EvidenceRecord> lookup(const Digest& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return records_[it->second];
  }

  // erase records with stored_ts < now - horizon; returns count erased
  size_t sweep(Timestamp now) {
    Timestamp cutoff = retention_ > now ? 0 : now - retention_;
    std::vector<EvidenceRecord> kept;
    size_t erased = 0;
    for (auto& rec : records_) {
      Timestamp ts = std::visit([](const auto& r) { return r.stored_ts; }, rec);
      if (ts < cutoff) {
        ++erased;
      } else {
        kept.push_back(std::move(rec));
      }
    }
    if (erased) {
      records_ = std::move(kept);
      index_.clear();
      for (size_t i = 0; i < records_.size(); ++i)
        for (const Digest& k : indexes_of(records_[i])) index_[k] = i;
    }
    return erased;
  }

  size_t size() const { return records_.size(); }
  const std::vector<EvidenceRecord>& records() const { return records_; }
  const Bytes& node_id() const { return node_id_; }
  Timestamp retention() const { return retention_; }
  void set_retention(Timestamp r) { retention_ = r; }

  // BKRFLOG1 ‖ node-id(lp) ‖ count(u32) ‖ records. coarsen_ts > 0 rounds the
  // unsigned stored_ts metadata down to that granularity (signed timestamps
  // are never touched: they would stop verifying).
  Bytes export_log(uint32_t coarsen_ts = 0) const {
    Bytes out(kLogMagic, kLogMagic + 8);
    put_lp(out, node_id_);
    put_u32(out, uint32_t(records_.size()));
    for (const auto& rec : records_) {
      if (coarsen_ts > 0) {
        EvidenceRecord copy = rec;
        std::visit([&](auto& r) { r.stored_ts -= r.stored_ts % coarsen_ts; }, copy);
        backref::append(out, serialize_record(copy));
      } else {
        backref::append(out, serialize_record(rec));
      }
    }
    return out;
  }

  // plain-text form for the trace-audit path: one base-16 record per line
  std::string export_text() const {
    std::string out;
    for (const auto& rec : records_) {
      out += to_hex(serialize_record(rec));
      out += '\n';
    }
    return out;
  }

  // Optional at-rest sealing hook: the export wrapped in one AEAD layer under
  // a single symmetric key. This is a hook only; it is NOT the distributed
  // trustee-escrow design for log publication, which is out of scope.
  std::optional<Bytes> export_sealed(ByteSpan key, Drbg& rng, uint32_t coarsen_ts = 0) const {
    if (key.size() != 32) return std::nullopt;
    Bytes nonce = rng.next_bytes(kAeadNonceBytes);
    auto sealed = detail::aead_seal(key, nonce, export_log(coarsen_ts));
    if (!sealed) return std::nullopt;
    Bytes out = to_bytes("BKRFSEAL");
    backref::append(out, nonce);
    backref::append(out, *sealed);
    return out;
  }

  static std::optional<LogStore> import_sealed(ByteSpan data, ByteSpan key) {
    if (key.size() != 32 || data.size() < 8 + kAeadNonceBytes) return std::nullopt;
    if (to_string(data.first(8)) != "BKRFSEAL") return std::nullopt;
    ByteSpan nonce = data.subspan(8, kAeadNonceBytes);
    auto plain = detail::aead_open(key, nonce, data.subspan(8 + kAeadNonceBytes));
    if (!plain) return std::nullopt;
    return import_log(*plain);
  }

  static std::optional<LogStore> import_log(ByteSpan data) {
    ByteReader r(data);
    Bytes magic;
    if (!r.get_bytes(8, magic) || !std::equal(magic.begin(), magic.end(), kLogMagic))
      return std::nullopt;
    LogStore store;
    if (!r.get_lp(store.node_id_)) return std::nullopt;
    uint32_t count;
    if (!r.get_u32(count)) return std::nullopt;
    for (uint32_t i = 0; i < count; ++i) {
      auto rec = parse_record(r);
      if (!rec) return std::nullopt;
      store.records_.push_back(std::move(*rec));
      for (const Digest& k : indexes_of(store.records_.back()))
        store.index_[k] = store.records_.size() - 1;
    }
    if (!r.done()) return std::nullopt;
    return store;
  }

 private:
  static std::vector<Digest> indexes_of(const EvidenceRecord& rec) {
    if (const auto* relay = std::get_if<RelayEvidenceRecord>(&rec))
      return {relay->index_in, relay->index_out};
    return {std::get<ExitEvidenceRecord>(rec).index};
  }

  Bytes node_id_;
  Timestamp retention_;
  std::vector<EvidenceRecord> records_;
  std::map<Digest, size_t> index_;
};

}  // namespace backref
