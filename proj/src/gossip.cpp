#include "lainsim/gossip.hpp"

#include <algorithm>

namespace lain {

GossipReport gossip_broadcast(const Transaction& tx, NodeId origin,
                              const std::map<NodeId, std::vector<NodeId>>& overlay,
                              const std::set<NodeId>& full_nodes, int fanout,
                              const MembershipLedger& membership, Rng& rng,
                              int max_rounds) {
  GossipReport report;
  if (!membership.verify_tx(tx)) {
    ++report.discarded;
    return report;
  }
  report.reached.insert(origin);
  if (full_nodes.count(origin)) report.full_reached.insert(origin);
  report.all_full_reached =
      std::includes(report.reached.begin(), report.reached.end(),
                    full_nodes.begin(), full_nodes.end());
  if (report.all_full_reached) return report;  // delivered in 0 rounds

  std::set<NodeId> frontier{origin};
  for (int round = 1; round <= max_rounds; ++round) {
    std::set<NodeId> next;
    for (NodeId holder : frontier) {
      auto adj = overlay.find(holder);
      if (adj == overlay.end()) continue;
      std::vector<NodeId> targets = adj->second;
      std::sort(targets.begin(), targets.end());
      std::shuffle(targets.begin(), targets.end(), rng);
      const int k = std::min<int>(fanout, static_cast<int>(targets.size()));
      for (int i = 0; i < k; ++i) {
        NodeId t = targets[i];
        if (report.reached.count(t)) continue;  // duplicate suppressed
        if (!membership.verify_tx(tx)) {
          ++report.discarded;
          continue;
        }
        report.reached.insert(t);
        next.insert(t);
      }
    }
    if (!next.empty()) report.rounds = round;
    for (NodeId n : next)
      if (full_nodes.count(n)) report.full_reached.insert(n);
    report.all_full_reached = report.full_reached == full_nodes;
    if (report.all_full_reached) {
      report.rounds = round;
      return report;
    }
    frontier.insert(next.begin(), next.end());
    if (next.empty()) break;
  }
  return report;
}

}  // namespace lain
