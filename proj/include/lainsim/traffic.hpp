#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lainsim/channel.hpp"
#include "lainsim/core.hpp"
#include "lainsim/topology.hpp"

namespace lain {

using DemandId = std::uint64_t;

enum class DemandState : std::uint8_t { Queued, InFlight, Delivered, Expired, Dropped };

struct HopRecord {
  int step = 0;
  NodeId from;
  NodeId to;
  double bandwidth_hz = 0.0;
  double rate_bps = 0.0;
  double delay_s = 0.0;
};

struct Demand {
  DemandId id = 0;
  NodeId source;
  NodeId destination;
  double size_bits = 0.0;
  double max_delay_s = 0.0;
  int born_step = 0;
  DemandState state = DemandState::Queued;
  NodeId location;          // node currently queuing the demand
  int resolved_step = -1;   // step of delivery/expiry/drop
  double accumulated_delay_s = 0.0;
  int hop_count = 0;
  std::vector<HopRecord> path;
};

struct DemandGenConfig {
  double arrival_probability = 0.0;  // per SD per step
  double size_min_bits = 400e3;
  double size_max_bits = 600e3;
  double max_delay_s = 1e9;
};

struct RunStats {
  std::uint64_t generated = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t expired = 0;

  friend bool operator==(const RunStats&, const RunStats&) = default;
};

// Outcome of one demand's movement during a forward_all transition.
struct HopOutcome {
  DemandId demand = 0;
  NodeId from;
  NodeId to;
  double delay_s = 0.0;
  bool delivered = false;
  bool dropped = false;   // target queue was full
  bool expired = false;   // accumulated delay crossed the tolerance
};

struct StepReport {
  std::vector<HopOutcome> hops;
  // Per sending node, the parallel-transmission delay of the step (the max
  // over that node's forwarded demands).
  std::map<NodeId, double> node_step_delay_s;
};

struct ConservationReport {
  RunStats stats;
  std::uint64_t queued_now = 0;
  bool balanced = false;
};

enum class EnqueueResult : std::uint8_t { Accepted, Dropped };

// Demand bookkeeping and queue dynamics. Owned by the simulation loop;
// forward_all is the single atomic world transition for data movement.
class TrafficState {
 public:
  explicit TrafficState(int default_capacity = 50)
      : default_capacity_(default_capacity) {}

  void set_capacity(NodeId n, int capacity) { capacity_override_[n] = capacity; }
  int capacity_of(NodeId n) const;
  void set_node_bandwidth_hz(double hz) { node_bandwidth_hz_ = hz; }
  double node_bandwidth_hz() const { return node_bandwidth_hz_; }

  DemandId add_demand(NodeId source, NodeId destination, double size_bits,
                      double max_delay_s, int born_step);

  // Bernoulli arrivals at each active SD; destination uniform over BSs.
  std::vector<DemandId> generate(const Topology& topo, const DemandGenConfig& cfg,
                                 int step, Rng& rng);

  EnqueueResult enqueue(NodeId n, DemandId d);

  // Executes one parallel-forwarding step. `decisions` maps demands (keyed by
  // their current node) to next hops; demands without an entry hold in place.
  // Targets must be communicable links of the holding node.
  StepReport forward_all(const std::map<DemandId, NodeId>& decisions,
                         const Topology& topo, const ChannelParams& params,
                         int step);

  // Re-homes the queued demands of a deactivated UAV onto its nearest active
  // UAV neighbor with spare capacity; drops what cannot be placed.
  std::vector<HopOutcome> redistribute_from(NodeId gone, const Topology& topo,
                                            int step);

  ConservationReport conservation_audit() const;

  const Demand& demand(DemandId id) const;
  const std::map<DemandId, Demand>& demands() const { return demands_; }
  const std::vector<DemandId>& queue_of(NodeId n) const;
  std::uint64_t total_queued() const;
  const RunStats& stats() const { return stats_; }

  // CSV rows: demand,state,source,destination,size_bits,delay_s,hops
  static std::string ledger_csv_header();
  std::string ledger_csv() const;

 private:
  double link_path_loss_db(const Topology& topo, const ChannelParams& params,
                           NodeId from, NodeId to) const;

  int default_capacity_;
  double node_bandwidth_hz_ = 2e6;
  std::map<NodeId, int> capacity_override_;
  std::map<NodeId, std::vector<DemandId>> queues_;
  std::map<DemandId, Demand> demands_;
  DemandId next_id_ = 0;
  RunStats stats_;
  static const std::vector<DemandId> kEmptyQueue;
};

}  // namespace lain
