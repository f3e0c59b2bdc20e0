#pragma once

#include <map>
#include <set>
#include <vector>

#include "lainsim/core.hpp"
#include "lainsim/ledger.hpp"

namespace lain {

struct GossipReport {
  int rounds = 0;
  std::set<NodeId> reached;      // nodes holding the transaction at the end
  std::set<NodeId> full_reached; // full nodes among them
  std::size_t discarded = 0;     // per-hop signature rejections
  bool all_full_reached = false;
};

// Synchronous push gossip over an overlay adjacency. Every holder forwards
// to up to `fanout` randomly chosen neighbors per round; duplicates are
// suppressed by (author, nonce); receivers verify the signature and discard
// forgeries. Deterministic given the rng state.
GossipReport gossip_broadcast(const Transaction& tx, NodeId origin,
                              const std::map<NodeId, std::vector<NodeId>>& overlay,
                              const std::set<NodeId>& full_nodes, int fanout,
                              const MembershipLedger& membership, Rng& rng,
                              int max_rounds = 32);

}  // namespace lain
