#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "lainsim/crypto.hpp"
#include "lainsim/ledger.hpp"

namespace lain {

enum class PbftMsgType : std::uint8_t { PrePrepare, Prepare, Commit, ViewChange, NewView };

struct PbftMsg {
  PbftMsgType type = PbftMsgType::PrePrepare;
  std::uint64_t view = 0;
  std::uint64_t height = 0;
  Digest value{};
  int sender = 0;
  int receiver = 0;
  // ViewChange: self-reported prepared certificate (unforgeable in the real
  // protocol; the modeled Byzantine behaviors never fabricate one).
  bool has_prepared = false;
  Digest prepared_value{};
  std::uint64_t prepared_view = 0;
};

enum class PbftFault : std::uint8_t {
  Mute,              // never sends anything
  EquivocatePrimary  // as primary, proposes two different blocks split by receiver
};

struct FaultSpec {
  int replica = -1;
  PbftFault behavior = PbftFault::Mute;
  std::set<int> equivocate_to;  // receivers of the alternate proposal
};

using FaultScript = std::vector<FaultSpec>;

// Per-(sender, message type) delivery delay in scheduler rounds. Unlisted
// entries deliver in the next round (delay 0).
using DelaySchedule = std::map<std::pair<int, PbftMsgType>, int>;

// One replica's view of a single consensus slot (height). Pure state
// machine: inputs arrive via on_message/on_round, outputs accumulate in
// the outbox. No wall clock: timeouts are counted in scheduler rounds.
class PbftReplica {
 public:
  PbftReplica(int index, int n, int timeout_rounds)
      : index_(index), n_(n), f_((n - 1) / 3), timeout_rounds_(timeout_rounds) {}

  void set_candidate(const Block& proposal, const CryptoSuite& crypto);
  void begin_round();
  void on_message(const PbftMsg& m);
  void end_round();

  std::vector<PbftMsg>& outbox() { return outbox_; }
  bool committed() const { return committed_.has_value(); }
  std::optional<Digest> committed_value() const { return committed_; }
  std::optional<Block> committed_block() const;
  std::uint64_t view() const { return view_; }
  int index() const { return index_; }
  bool is_primary() const { return static_cast<int>(view_ % n_) == index_; }

 private:
  void broadcast(PbftMsgType type, const Digest& value);
  void try_prepare(std::uint64_t view, const Digest& value);
  void try_commit(std::uint64_t view, const Digest& value);
  void enter_view(std::uint64_t view);
  void propose(const Digest& value);

  int index_;
  int n_;
  int f_;
  int timeout_rounds_;
  std::uint64_t view_ = 0;
  bool sent_preprepare_ = false;
  bool sent_viewchange_ = false;
  int rounds_waiting_ = 0;

  std::optional<Digest> accepted_;  // pre-prepared value in the current view
  std::map<std::pair<std::uint64_t, Digest>, std::set<int>> prepares_;
  std::map<std::pair<std::uint64_t, Digest>, std::set<int>> commits_;
  bool prepared_ = false;
  Digest prepared_value_{};
  std::uint64_t prepared_view_ = 0;
  bool sent_commit_ = false;
  std::optional<Digest> committed_;

  std::map<std::uint64_t, std::map<int, PbftMsg>> view_changes_;
  std::map<Digest, Block> blocks_seen_;
  std::optional<Block> candidate_;
  const CryptoSuite* crypto_ = nullptr;
  std::vector<PbftMsg> outbox_;

  friend class PbftHarness;
};

struct ConsensusOutcome {
  bool committed = false;          // every honest replica committed the same value
  bool conflicting_commits = false;
  std::optional<Digest> value;
  std::optional<Block> block;
  std::map<int, Digest> committed_by;
  std::uint64_t max_view = 0;      // number of view changes = max_view
  int rounds_used = 0;
  bool stalled = false;
};

// Deterministic in-process scheduler: replicas exchange messages in
// synchronous rounds, optionally reordered by a delay schedule and
// perturbed by a fault script.
class PbftHarness {
 public:
  PbftHarness(int n, const CryptoSuite& crypto, int timeout_rounds = 6);

  void set_faults(FaultScript faults) { faults_ = std::move(faults); }
  void set_delays(DelaySchedule delays) { delays_ = std::move(delays); }
  void set_alternate_proposal(const Block& alt);

  ConsensusOutcome run(const Block& proposal, int max_rounds = 200);

  const PbftReplica& replica(int i) const { return replicas_[i]; }

 private:
  bool is_byzantine(int replica, PbftFault* out = nullptr,
                    const FaultSpec** spec = nullptr) const;

  int n_;
  const CryptoSuite* crypto_;
  int timeout_rounds_;
  std::vector<PbftReplica> replicas_;
  FaultScript faults_;
  DelaySchedule delays_;
  std::optional<Block> alternate_;
};

// Runs one consensus slot over the given proposal with the scripted faults.
ConsensusOutcome pbft_round(int n, const CryptoSuite& crypto, const Block& proposal,
                            const FaultScript& faults = {},
                            const DelaySchedule& delays = {}, int max_rounds = 200);

}  // namespace lain
