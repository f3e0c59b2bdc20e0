#include "lainsim/pbft.hpp"

#include <algorithm>
#include <deque>

namespace lain {

void PbftReplica::set_candidate(const Block& proposal, const CryptoSuite& crypto) {
  crypto_ = &crypto;
  candidate_ = proposal;
  blocks_seen_[block_hash(crypto, proposal)] = proposal;
}

void PbftReplica::broadcast(PbftMsgType type, const Digest& value) {
  PbftMsg m;
  m.type = type;
  m.view = view_;
  m.value = value;
  m.sender = index_;
  if (type == PbftMsgType::ViewChange) {
    m.view = view_ + 1;
    m.has_prepared = prepared_;
    m.prepared_value = prepared_value_;
    m.prepared_view = prepared_view_;
  }
  for (int r = 0; r < n_; ++r) {
    if (r == index_) continue;
    m.receiver = r;
    outbox_.push_back(m);
  }
}

void PbftReplica::propose(const Digest& value) {
  sent_preprepare_ = true;
  accepted_ = value;
  prepares_[{view_, value}].insert(index_);
  broadcast(view_ == 0 ? PbftMsgType::PrePrepare : PbftMsgType::NewView, value);
  try_prepare(view_, value);
}

void PbftReplica::begin_round() {
  if (view_ == 0 && is_primary() && !sent_preprepare_ && candidate_ && !committed_) {
    propose(block_hash(*crypto_, *candidate_));
  }
}

void PbftReplica::try_prepare(std::uint64_t view, const Digest& value) {
  if (prepared_ && prepared_view_ == view) return;
  if (view != view_ || !accepted_ || *accepted_ != value) return;
  if (static_cast<int>(prepares_[{view, value}].size()) < 2 * f_ + 1) return;
  prepared_ = true;
  prepared_value_ = value;
  prepared_view_ = view;
  sent_commit_ = true;
  commits_[{view, value}].insert(index_);
  broadcast(PbftMsgType::Commit, value);
  try_commit(view, value);
}

void PbftReplica::try_commit(std::uint64_t view, const Digest& value) {
  if (committed_) return;
  if (!prepared_ || prepared_view_ != view || prepared_value_ != value) return;
  if (static_cast<int>(commits_[{view, value}].size()) < 2 * f_ + 1) return;
  committed_ = value;
}

void PbftReplica::enter_view(std::uint64_t view) {
  view_ = view;
  accepted_.reset();
  sent_preprepare_ = false;
  sent_viewchange_ = false;
  sent_commit_ = false;
  rounds_waiting_ = 0;
  if (!is_primary() || committed_) return;
  // New primary re-proposes the highest prepared value reported in the
  // view-change quorum; absent any, its own candidate.
  bool found = false;
  Digest value{};
  std::uint64_t best_view = 0;
  for (const auto& [sender, vc] : view_changes_[view]) {
    (void)sender;
    if (!vc.has_prepared) continue;
    if (!found || vc.prepared_view > best_view ||
        (vc.prepared_view == best_view && vc.prepared_value < value)) {
      found = true;
      best_view = vc.prepared_view;
      value = vc.prepared_value;
    }
  }
  if (!found && prepared_) {
    found = true;
    value = prepared_value_;
  }
  if (!found) {
    if (!candidate_) return;
    value = block_hash(*crypto_, *candidate_);
  }
  propose(value);
}

void PbftReplica::on_message(const PbftMsg& m) {
  switch (m.type) {
    case PbftMsgType::PrePrepare: {
      if (m.view != view_ || accepted_ || committed_) return;
      if (static_cast<int>(m.view % n_) != m.sender) return;
      accepted_ = m.value;
      prepares_[{m.view, m.value}].insert(m.sender);
      prepares_[{m.view, m.value}].insert(index_);
      broadcast(PbftMsgType::Prepare, m.value);
      try_prepare(m.view, m.value);
      break;
    }
    case PbftMsgType::Prepare: {
      prepares_[{m.view, m.value}].insert(m.sender);
      try_prepare(m.view, m.value);
      break;
    }
    case PbftMsgType::Commit: {
      // Counted regardless of the current view: a commit certificate for the
      // view a replica prepared in stays valid after later view changes.
      commits_[{m.view, m.value}].insert(m.sender);
      try_commit(m.view, m.value);
      break;
    }
    case PbftMsgType::ViewChange: {
      view_changes_[m.view][m.sender] = m;
      const auto& set = view_changes_[m.view];
      if (m.view > view_ && static_cast<int>(set.size()) >= 2 * f_ + 1) {
        enter_view(m.view);
      }
      break;
    }
    case PbftMsgType::NewView: {
      if (m.view < view_ || committed_) return;
      if (static_cast<int>(m.view % n_) != m.sender) return;
      if (m.view > view_) enter_view(m.view);
      if (accepted_) return;
      accepted_ = m.value;
      prepares_[{m.view, m.value}].insert(m.sender);
      prepares_[{m.view, m.value}].insert(index_);
      broadcast(PbftMsgType::Prepare, m.value);
      try_prepare(m.view, m.value);
      break;
    }
  }
}

void PbftReplica::end_round() {
  if (committed_) return;
  ++rounds_waiting_;
  if (rounds_waiting_ > timeout_rounds_ && !sent_viewchange_) {
    sent_viewchange_ = true;
    broadcast(PbftMsgType::ViewChange, Digest{});
    // Own view-change message participates in the quorum.
    PbftMsg own;
    own.type = PbftMsgType::ViewChange;
    own.view = view_ + 1;
    own.sender = index_;
    own.has_prepared = prepared_;
    own.prepared_value = prepared_value_;
    own.prepared_view = prepared_view_;
    view_changes_[own.view][index_] = own;
    const auto& set = view_changes_[own.view];
    if (static_cast<int>(set.size()) >= 2 * f_ + 1) enter_view(own.view);
  }
}

std::optional<Block> PbftReplica::committed_block() const {
  if (!committed_) return std::nullopt;
  auto it = blocks_seen_.find(*committed_);
  if (it == blocks_seen_.end()) return std::nullopt;
  return it->second;
}

PbftHarness::PbftHarness(int n, const CryptoSuite& crypto, int timeout_rounds)
    : n_(n), crypto_(&crypto), timeout_rounds_(timeout_rounds) {
  if (n < 4) throw BadConfig("pbft requires at least 4 replicas");
  for (int i = 0; i < n; ++i) replicas_.emplace_back(i, n, timeout_rounds);
}

void PbftHarness::set_alternate_proposal(const Block& alt) { alternate_ = alt; }

bool PbftHarness::is_byzantine(int replica, PbftFault* out,
                               const FaultSpec** spec) const {
  for (const auto& fs : faults_) {
    if (fs.replica == replica) {
      if (out) *out = fs.behavior;
      if (spec) *spec = &fs;
      return true;
    }
  }
  return false;
}

ConsensusOutcome PbftHarness::run(const Block& proposal, int max_rounds) {
  const Digest main_digest = block_hash(*crypto_, proposal);
  Digest alt_digest{};
  for (auto& r : replicas_) {
    r.set_candidate(proposal, *crypto_);
    if (alternate_) {
      alt_digest = block_hash(*crypto_, *alternate_);
      r.blocks_seen_[alt_digest] = *alternate_;
    }
  }

  struct Queued {
    int due_round;
    std::uint64_t seq;
    PbftMsg msg;
  };
  std::vector<Queued> queue;
  std::uint64_t seq = 0;

  ConsensusOutcome outcome;
  int round = 0;
  for (; round < max_rounds; ++round) {
    for (auto& r : replicas_) r.begin_round();

    // Collect outboxes, applying the fault script on the way out.
    for (auto& r : replicas_) {
      PbftFault fault{};
      const FaultSpec* spec = nullptr;
      const bool byz = is_byzantine(r.index(), &fault, &spec);
      for (PbftMsg& m : r.outbox()) {
        if (byz && fault == PbftFault::Mute) continue;
        PbftMsg sent = m;
        if (byz && fault == PbftFault::EquivocatePrimary && alternate_ &&
            (sent.type == PbftMsgType::PrePrepare ||
             sent.type == PbftMsgType::NewView ||
             sent.type == PbftMsgType::Prepare ||
             sent.type == PbftMsgType::Commit)) {
          sent.value = spec->equivocate_to.count(sent.receiver) ? alt_digest
                                                                : main_digest;
        }
        int delay = 0;
        auto it = delays_.find({sent.sender, sent.type});
        if (it != delays_.end()) delay = it->second;
        queue.push_back({round + 1 + delay, seq++, sent});
      }
      r.outbox().clear();
    }

    // Deliver everything due this round, in deterministic order.
    std::stable_sort(queue.begin(), queue.end(), [](const Queued& a, const Queued& b) {
      if (a.due_round != b.due_round) return a.due_round < b.due_round;
      return a.seq < b.seq;
    });
    std::vector<Queued> later;
    for (auto& q : queue) {
      if (q.due_round <= round + 1) {
        replicas_[q.msg.receiver].on_message(q.msg);
      } else {
        later.push_back(q);
      }
    }
    queue = std::move(later);

    for (auto& r : replicas_) r.end_round();

    bool all_honest_committed = true;
    for (auto& r : replicas_) {
      if (is_byzantine(r.index())) continue;
      if (!r.committed()) all_honest_committed = false;
    }
    if (all_honest_committed) {
      ++round;
      break;
    }
  }

  outcome.rounds_used = round;
  std::optional<Digest> value;
  bool any = false;
  bool conflict = false;
  bool all = true;
  for (auto& r : replicas_) {
    if (is_byzantine(r.index())) continue;
    outcome.max_view = std::max(outcome.max_view, r.view());
    if (r.committed()) {
      outcome.committed_by[r.index()] = *r.committed_value();
      if (any && *value != *r.committed_value()) conflict = true;
      value = r.committed_value();
      any = true;
    } else {
      all = false;
    }
  }
  outcome.conflicting_commits = conflict;
  outcome.committed = all && any && !conflict;
  outcome.stalled = !outcome.committed;
  if (outcome.committed) {
    outcome.value = value;
    for (auto& r : replicas_) {
      if (is_byzantine(r.index())) continue;
      if (auto b = r.committed_block()) {
        outcome.block = b;
        break;
      }
    }
  }
  return outcome;
}

ConsensusOutcome pbft_round(int n, const CryptoSuite& crypto, const Block& proposal,
                            const FaultScript& faults, const DelaySchedule& delays,
                            int max_rounds) {
  PbftHarness h(n, crypto);
  h.set_faults(faults);
  h.set_delays(delays);
  return h.run(proposal, max_rounds);
}

}  // namespace lain
