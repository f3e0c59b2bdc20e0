#include "lainsim/ledger.hpp"

#include <algorithm>
#include <cstring>

#include <json.hpp>

namespace lain {

const std::vector<Identity> MembershipLedger::kEmptyHistory;

namespace {

void put_u8(Bytes& b, std::uint8_t v) { b.push_back(v); }
void put_u32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_u64(Bytes& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void put_f64(Bytes& b, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  put_u64(b, bits);
}
void put_digest(Bytes& b, const Digest& d) { b.insert(b.end(), d.begin(), d.end()); }

struct Reader {
  const Bytes* bytes;
  size_t pos = 0;
  bool ok = true;

  bool take(void* out, size_t n) {
    if (!ok || pos + n > bytes->size()) {
      ok = false;
      return false;
    }
    std::memcpy(out, bytes->data() + pos, n);
    pos += n;
    return true;
  }
  std::uint8_t u8() {
    std::uint8_t v = 0;
    take(&v, 1);
    return v;
  }
  std::uint32_t u32() {
    std::uint8_t raw[4] = {};
    take(raw, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | raw[i];
    return v;
  }
  std::uint64_t u64() {
    std::uint8_t raw[8] = {};
    take(raw, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | raw[i];
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  Digest digest() {
    Digest d{};
    take(d.data(), d.size());
    return d;
  }
};

Bytes serialize_tx(const Transaction& tx) {
  Bytes b;
  put_u32(b, tx.author.index);
  put_u8(b, static_cast<std::uint8_t>(tx.kind));
  put_u64(b, tx.nonce);
  put_u32(b, static_cast<std::uint32_t>(tx.payload.size()));
  b.insert(b.end(), tx.payload.begin(), tx.payload.end());
  put_digest(b, tx.signature);
  return b;
}

bool parse_tx(Reader& r, Transaction& tx) {
  tx.author = NodeId{r.u32()};
  const std::uint8_t kind = r.u8();
  if (!r.ok || kind > 2) return false;
  tx.kind = static_cast<TxKind>(kind);
  tx.nonce = r.u64();
  const std::uint32_t len = r.u32();
  if (!r.ok || r.pos + len > r.bytes->size()) return false;
  tx.payload.assign(r.bytes->begin() + r.pos, r.bytes->begin() + r.pos + len);
  r.pos += len;
  tx.signature = r.digest();
  return r.ok;
}

Bytes serialize_block(const Block& b) {
  Bytes out;
  put_u64(out, b.height);
  put_digest(out, b.prev_hash);
  put_digest(out, b.payload_hash);
  put_u32(out, b.proposer.index);
  put_u32(out, static_cast<std::uint32_t>(b.transactions.size()));
  for (const auto& tx : b.transactions) {
    Bytes t = serialize_tx(tx);
    out.insert(out.end(), t.begin(), t.end());
  }
  put_u32(out, static_cast<std::uint32_t>(b.certificate.size()));
  for (const auto& [node, sig] : b.certificate) {
    put_u32(out, node.index);
    put_digest(out, sig);
  }
  return out;
}

bool parse_block(Reader& r, Block& b) {
  b.height = r.u64();
  b.prev_hash = r.digest();
  b.payload_hash = r.digest();
  b.proposer = NodeId{r.u32()};
  const std::uint32_t ntx = r.u32();
  if (!r.ok || ntx > 1'000'000) return false;
  b.transactions.resize(ntx);
  for (auto& tx : b.transactions)
    if (!parse_tx(r, tx)) return false;
  const std::uint32_t ncert = r.u32();
  if (!r.ok || ncert > 1'000'000) return false;
  b.certificate.resize(ncert);
  for (auto& [node, sig] : b.certificate) {
    node = NodeId{r.u32()};
    sig = r.digest();
  }
  return r.ok;
}

std::string hex(std::span<const std::uint8_t> data) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(data.size() * 2);
  for (std::uint8_t b : data) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 0xf]);
  }
  return out;
}

}  // namespace

Bytes encode_status(const StatusPayload& s) {
  Bytes b;
  put_u32(b, s.queue_len);
  put_f64(b, s.position.x);
  put_f64(b, s.position.y);
  put_f64(b, s.position.z);
  put_u32(b, static_cast<std::uint32_t>(s.neighbors.size()));
  for (NodeId n : s.neighbors) put_u32(b, n.index);
  return b;
}

std::optional<StatusPayload> decode_status(const Bytes& bytes) {
  Reader r{&bytes};
  StatusPayload s;
  s.queue_len = r.u32();
  s.position = {r.f64(), r.f64(), r.f64()};
  const std::uint32_t n = r.u32();
  if (!r.ok || n > 1'000'000) return std::nullopt;
  s.neighbors.resize(n);
  for (auto& id : s.neighbors) id = NodeId{r.u32()};
  if (!r.ok || r.pos != bytes.size()) return std::nullopt;
  return s;
}

Bytes tx_signing_bytes(const Transaction& tx) {
  Bytes b;
  put_u32(b, tx.author.index);
  put_u8(b, static_cast<std::uint8_t>(tx.kind));
  put_u64(b, tx.nonce);
  put_u32(b, static_cast<std::uint32_t>(tx.payload.size()));
  b.insert(b.end(), tx.payload.begin(), tx.payload.end());
  return b;
}

Transaction make_signed_tx(const CryptoSuite& crypto, const Bytes& key, NodeId author,
                           TxKind kind, std::uint64_t nonce, Bytes payload) {
  Transaction tx;
  tx.author = author;
  tx.kind = kind;
  tx.nonce = nonce;
  tx.payload = std::move(payload);
  tx.signature = crypto.sign(key, tx_signing_bytes(tx));
  return tx;
}

Digest payload_hash_of(const CryptoSuite& crypto, const std::vector<Transaction>& txs) {
  Bytes all;
  for (const auto& tx : txs) {
    Bytes t = serialize_tx(tx);
    all.insert(all.end(), t.begin(), t.end());
  }
  return crypto.digest(all);
}

Digest block_hash(const CryptoSuite& crypto, const Block& b) {
  Bytes h;
  put_u64(h, b.height);
  put_digest(h, b.prev_hash);
  put_digest(h, b.payload_hash);
  put_u32(h, b.proposer.index);
  return crypto.digest(h);
}

Bytes certificate_message(const CryptoSuite& crypto, const Block& b) {
  Bytes m;
  put_u64(m, b.height);
  put_digest(m, block_hash(crypto, b));
  return m;
}

Bytes serialize_chain(const std::vector<Block>& chain) {
  Bytes out;
  for (const Block& b : chain) {
    Bytes rec = serialize_block(b);
    put_u32(out, static_cast<std::uint32_t>(rec.size()));
    out.insert(out.end(), rec.begin(), rec.end());
  }
  return out;
}

std::optional<std::vector<Block>> parse_chain(const Bytes& bytes) {
  std::vector<Block> chain;
  size_t pos = 0;
  while (pos < bytes.size()) {
    if (pos + 4 > bytes.size()) return std::nullopt;
    std::uint32_t len = 0;
    for (int i = 3; i >= 0; --i) len = (len << 8) | bytes[pos + i];
    pos += 4;
    if (pos + len > bytes.size()) return std::nullopt;
    Bytes rec(bytes.begin() + pos, bytes.begin() + pos + len);
    Reader r{&rec};
    Block b;
    if (!parse_block(r, b) || r.pos != rec.size()) return std::nullopt;
    chain.push_back(std::move(b));
    pos += len;
  }
  return chain;
}

std::string chain_jsonl(const std::vector<Block>& chain) {
  std::string out;
  for (const Block& b : chain) {
    nlohmann::json j;
    j["height"] = b.height;
    j["prev_hash"] = hex(b.prev_hash);
    j["payload_hash"] = hex(b.payload_hash);
    j["proposer"] = b.proposer.index;
    auto& txs = j["transactions"] = nlohmann::json::array();
    for (const auto& tx : b.transactions) {
      txs.push_back({{"author", tx.author.index},
                     {"kind", static_cast<int>(tx.kind)},
                     {"nonce", tx.nonce},
                     {"payload", hex(tx.payload)},
                     {"signature", hex(tx.signature)}});
    }
    auto& cert = j["certificate"] = nlohmann::json::array();
    for (const auto& [node, sig] : b.certificate)
      cert.push_back({{"replica", node.index}, {"signature", hex(sig)}});
    out += j.dump();
    out += '\n';
  }
  return out;
}

namespace {
bool tx_signature_ok(const Transaction& tx, const CryptoSuite& crypto,
                     const std::map<NodeId, Bytes>& keys) {
  if (tx.kind == TxKind::Join) {
    // Join requests are self-certified by the key they register.
    return crypto.verify(tx.payload, tx_signing_bytes(tx), tx.signature);
  }
  auto it = keys.find(tx.author);
  if (it == keys.end()) return false;
  return crypto.verify(it->second, tx_signing_bytes(tx), tx.signature);
}
}  // namespace

ChainVerdict verify_chain(const std::vector<Block>& chain, const CryptoSuite& crypto,
                          const std::map<NodeId, Bytes>& keys, int f) {
  Digest prev{};
  for (size_t i = 0; i < chain.size(); ++i) {
    const Block& b = chain[i];
    const auto bad = [&] { return ChainVerdict{false, static_cast<std::uint64_t>(i)}; };
    if (b.height != i) return bad();
    if (b.prev_hash != prev) return bad();
    if (b.payload_hash != payload_hash_of(crypto, b.transactions)) return bad();
    for (const auto& tx : b.transactions)
      if (!tx_signature_ok(tx, crypto, keys)) return bad();

    const Bytes msg = certificate_message(crypto, b);
    std::set<std::uint32_t> signers;
    for (const auto& [node, sig] : b.certificate) {
      auto it = keys.find(node);
      if (it == keys.end()) continue;
      if (crypto.verify(it->second, msg, sig)) signers.insert(node.index);
    }
    if (static_cast<int>(signers.size()) < 2 * f + 1) return bad();
    prev = block_hash(crypto, b);
  }
  return {true, 0};
}

AdmissionOutcome MembershipLedger::admit(NodeId node, const Bytes& public_key,
                                         const Bytes& proof_payload,
                                         const Digest& proof_signature, int step) {
  (void)step;
  if (!crypto_->verify(public_key, proof_payload, proof_signature))
    return {false, RejectReason::BadCredential};
  if (rules_.require_unique_active) {
    auto it = identities_.find(node);
    if (it != identities_.end() && !it->second.empty()) {
      const IdentityStatus s = it->second.back().status;
      if (s == IdentityStatus::Active || s == IdentityStatus::Pending)
        return {false, RejectReason::AlreadyMember};
    }
  }
  Identity id;
  id.node = node;
  id.public_key = public_key;
  identities_[node].push_back(id);
  keys_[node] = public_key;
  pool_tx(make_signed_tx(*crypto_, public_key, node, TxKind::Join, next_nonce(node),
                         public_key));
  return {true, RejectReason::BadCredential};
}

bool MembershipLedger::submit_exit(NodeId node, int step) {
  (void)step;
  auto key = keys_.find(node);
  if (key == keys_.end()) return false;
  Bytes payload;
  put_u32(payload, node.index);
  pool_tx(make_signed_tx(*crypto_, key->second, node, TxKind::Exit, next_nonce(node),
                         std::move(payload)));
  return true;
}

bool MembershipLedger::submit_status(NodeId node, const StatusPayload& status) {
  auto key = keys_.find(node);
  if (key == keys_.end() || !is_active(node)) return false;
  pool_tx(make_signed_tx(*crypto_, key->second, node, TxKind::Status,
                         next_nonce(node), encode_status(status)));
  return true;
}

std::vector<NodeId> MembershipLedger::reauthenticate_epoch(int step,
                                                           const std::set<NodeId>& silent,
                                                           NodeId authority) {
  std::vector<NodeId> revoked;
  auto auth_key = keys_.find(authority);
  for (auto& [node, history] : identities_) {
    if (history.empty()) continue;
    Identity& id = history.back();
    if (id.status != IdentityStatus::Active) continue;
    const bool stale =
        id.last_auth_at < 0 ||
        static_cast<std::uint64_t>(step - id.last_auth_at) >= auth_period_;
    if (!silent.count(node)) {
      // Signed-nonce challenge-response modeled as liveness.
      id.last_auth_at = step;
      continue;
    }
    if (!stale) continue;
    revoked.push_back(node);
    if (auth_key != keys_.end()) {
      Bytes payload;
      put_u32(payload, node.index);
      pool_tx(make_signed_tx(*crypto_, auth_key->second, authority, TxKind::Exit,
                             next_nonce(authority), std::move(payload)));
    }
  }
  return revoked;
}

void MembershipLedger::apply_block(const Block& b, int step) {
  for (const Transaction& tx : b.transactions) {
    if (tx.kind == TxKind::Join) {
      auto it = identities_.find(tx.author);
      if (it == identities_.end() || it->second.empty()) continue;
      Identity& id = it->second.back();
      if (id.status == IdentityStatus::Pending) {
        id.status = IdentityStatus::Active;
        id.admitted_at = step;
        id.last_auth_at = step;
      }
    } else if (tx.kind == TxKind::Exit) {
      if (tx.payload.size() != 4) continue;
      Reader r{&tx.payload};
      NodeId target{r.u32()};
      auto it = identities_.find(target);
      if (it == identities_.end() || it->second.empty()) continue;
      Identity& id = it->second.back();
      if (id.status != IdentityStatus::Revoked) id.status = IdentityStatus::Revoked;
    }
  }
}

std::vector<Transaction> MembershipLedger::drain_pool(size_t max_txs) {
  const size_t n = std::min(max_txs, pool_.size());
  std::vector<Transaction> out(pool_.begin(), pool_.begin() + n);
  pool_.erase(pool_.begin(), pool_.begin() + n);
  return out;
}

bool MembershipLedger::is_active(NodeId node) const {
  auto it = identities_.find(node);
  if (it == identities_.end() || it->second.empty()) return false;
  return it->second.back().status == IdentityStatus::Active;
}

std::optional<Identity> MembershipLedger::identity(NodeId node) const {
  auto it = identities_.find(node);
  if (it == identities_.end() || it->second.empty()) return std::nullopt;
  return it->second.back();
}

const std::vector<Identity>& MembershipLedger::history(NodeId node) const {
  auto it = identities_.find(node);
  return it == identities_.end() ? kEmptyHistory : it->second;
}

bool MembershipLedger::verify_tx(const Transaction& tx) const {
  return tx_signature_ok(tx, *crypto_, keys_);
}

void MembershipLedger::pool_tx(Transaction tx) {
  const auto dedup_key = std::make_pair(tx.author.index, tx.nonce);
  if (seen_.count(dedup_key)) return;
  seen_.insert(dedup_key);
  pool_.push_back(std::move(tx));
}

}  // namespace lain
