#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lainsim/core.hpp"

namespace lain {

struct TopologyConfig {
  double area_x_m = 15000.0;
  double area_y_m = 5000.0;
  double altitude_min_m = 200.0;
  double altitude_max_m = 400.0;
  double d_min_m = 10.0;
  double d_max_uav_m = 100.0;     // UAV-UAV communication range
  double d_max_ground_m = 500.0;  // SD-UAV and UAV-BS range
  double max_step_displacement_m = 0.0;
  int mobility_retries = 8;
};

// Owns nodes, positions, connectivity and the safety/range constraints.
// Single-writer: the simulation loop mutates it, snapshots are read-only.
class Topology {
 public:
  Topology() = default;
  explicit Topology(TopologyConfig cfg) : cfg_(std::move(cfg)) {}

  NodeId add_node(NodeKind kind, Cluster cluster, Vec3 position, double capability);

  const TopologyConfig& config() const { return cfg_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(NodeId id) const;
  Node& node_mut(NodeId id);
  int time_step() const { return time_step_; }

  void set_active(NodeId id, bool active);
  void set_d_max_override(NodeId uav, double d_max_m);
  double d_max_of(NodeId uav) const;

  // Active UAVs within the caller's communication range, sorted by id.
  std::vector<NodeId> neighbors(NodeId u) const;
  // Base stations connected to a downlink UAV (Z_u); empty for other clusters.
  std::vector<NodeId> reachable_bs(NodeId u) const;
  // Collection-cluster UAVs in range of a sensor device.
  std::vector<NodeId> uplink_candidates(NodeId sd) const;

  // Whether a directed communicable link n -> m exists under the
  // SD->collection / UAV->UAV / downlink->BS structure.
  bool comm_link(NodeId n, NodeId m) const;

  // Highest-capability active UAV of a cluster, ties to the lowest id.
  std::optional<NodeId> cluster_head(Cluster c) const;
  std::vector<NodeId> uavs_of_cluster(Cluster c) const;
  std::vector<NodeId> active_uavs() const;
  std::vector<NodeId> base_stations() const;
  std::vector<NodeId> sensor_devices() const;

  // Moves every active UAV by a bounded random displacement. Candidate
  // moves violating the minimum separation are resampled up to the
  // configured retry count, then the UAV stays put.
  void step_mobility(Rng& rng);
  void advance_time() { ++time_step_; }

  // Throws on any violated structural invariant.
  void assert_invariants() const;

  // CSV rows: step,node,kind,x,y,z,active
  static std::string snapshot_csv_header();
  std::string snapshot_csv() const;

 private:
  bool uav_move_ok(NodeId id, Vec3 candidate) const;

  TopologyConfig cfg_;
  std::vector<Node> nodes_;
  std::map<NodeId, double> d_max_override_;
  int time_step_ = 0;
};

}  // namespace lain
