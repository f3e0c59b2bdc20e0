#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lainsim/core.hpp"
#include "lainsim/crypto.hpp"

namespace lain {

enum class TxKind : std::uint8_t { Status, Join, Exit };

struct Transaction {
  NodeId author;
  TxKind kind = TxKind::Status;
  std::uint64_t nonce = 0;
  Bytes payload;
  Digest signature{};
};

// Status payload: queue buffer length, location, neighbor ids.
struct StatusPayload {
  std::uint32_t queue_len = 0;
  Vec3 position;
  std::vector<NodeId> neighbors;
};

Bytes encode_status(const StatusPayload& s);
std::optional<StatusPayload> decode_status(const Bytes& b);

Bytes tx_signing_bytes(const Transaction& tx);
Transaction make_signed_tx(const CryptoSuite& crypto, const Bytes& key, NodeId author,
                           TxKind kind, std::uint64_t nonce, Bytes payload);

struct Block {
  std::uint64_t height = 0;
  Digest prev_hash{};
  Digest payload_hash{};
  NodeId proposer;
  std::vector<Transaction> transactions;
  // (replica, signature over height||block hash); needs 2f+1 distinct entries.
  std::vector<std::pair<NodeId, Digest>> certificate;
};

Digest payload_hash_of(const CryptoSuite& crypto, const std::vector<Transaction>& txs);
Digest block_hash(const CryptoSuite& crypto, const Block& b);
// The byte string a replica signs when committing a block.
Bytes certificate_message(const CryptoSuite& crypto, const Block& b);

// Length-prefixed binary chain records.
Bytes serialize_chain(const std::vector<Block>& chain);
std::optional<std::vector<Block>> parse_chain(const Bytes& bytes);
std::string chain_jsonl(const std::vector<Block>& chain);

struct ChainVerdict {
  bool valid = true;
  std::uint64_t tampered_height = 0;
};

// Recomputes every hash link, transaction signature, and commit certificate.
// The key registry maps node ids to their registered keys; `f` is the fault
// bound the certificates must clear (2f+1 distinct valid signatures).
ChainVerdict verify_chain(const std::vector<Block>& chain, const CryptoSuite& crypto,
                          const std::map<NodeId, Bytes>& keys, int f);

enum class IdentityStatus : std::uint8_t { Pending, Active, Revoked };

struct Identity {
  NodeId node;
  Bytes public_key;
  int admitted_at = -1;
  int last_auth_at = -1;
  IdentityStatus status = IdentityStatus::Pending;
};

enum class RejectReason : std::uint8_t { BadCredential, AlreadyMember };

struct AdmissionOutcome {
  bool accepted = false;
  RejectReason reason = RejectReason::BadCredential;
};

struct AdmissionRules {
  bool require_unique_active = true;
};

// Zero-trust membership: joins, exits, and periodic re-authentication are
// applied only when the enclosing block commits.
class MembershipLedger {
 public:
  MembershipLedger(const CryptoSuite& crypto, AdmissionRules rules,
                   std::uint64_t auth_period_steps)
      : crypto_(&crypto), rules_(rules), auth_period_(auth_period_steps) {}

  // Validates a signed join request; pools a Join transaction on success.
  AdmissionOutcome admit(NodeId node, const Bytes& public_key, const Bytes& proof_payload,
                         const Digest& proof_signature, int step);

  // Voluntary exit: pools a signed Exit transaction for the node itself.
  bool submit_exit(NodeId node, int step);

  // Pools a status transaction authored by an active node.
  bool submit_status(NodeId node, const StatusPayload& status);

  // Challenge-response over all Active identities. Nodes for which
  // `responds` is false (and whose last authentication is stale) are revoked
  // via pooled Exit transactions authored by `authority`.
  std::vector<NodeId> reauthenticate_epoch(int step,
                                           const std::set<NodeId>& silent,
                                           NodeId authority);

  // Applies a committed block's transactions to membership state.
  void apply_block(const Block& b, int step);

  // Drains up to `max_txs` pooled transactions, FIFO.
  std::vector<Transaction> drain_pool(size_t max_txs);
  size_t pool_size() const { return pool_.size(); }

  bool is_active(NodeId node) const;
  std::optional<Identity> identity(NodeId node) const;
  const std::vector<Identity>& history(NodeId node) const;
  const std::map<NodeId, Bytes>& key_registry() const { return keys_; }
  void register_key(NodeId node, Bytes key) { keys_[node] = std::move(key); }
  std::uint64_t next_nonce(NodeId node) { return nonces_[node]++; }
  std::uint64_t auth_period() const { return auth_period_; }

  bool verify_tx(const Transaction& tx) const;

 private:
  void pool_tx(Transaction tx);

  const CryptoSuite* crypto_;
  AdmissionRules rules_;
  std::uint64_t auth_period_;
  std::map<NodeId, Bytes> keys_;
  std::map<NodeId, std::vector<Identity>> identities_;
  std::map<NodeId, std::uint64_t> nonces_;
  std::vector<Transaction> pool_;
  std::set<std::pair<std::uint32_t, std::uint64_t>> seen_;  // (author, nonce)
  static const std::vector<Identity> kEmptyHistory;
};

}  // namespace lain
