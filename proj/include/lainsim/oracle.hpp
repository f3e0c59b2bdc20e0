#pragma once

#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "lainsim/env.hpp"

namespace lain {

struct OracleDemand {
  NodeId source;
  NodeId destination;
  double size_bits = 500e3;
};

// A frozen world: static topology, static link model, a fixed demand set,
// and a step horizon. Queue and bandwidth coupling mirror the simulator.
struct Snapshot {
  Topology topology;
  ChannelParams channel;
  double node_bandwidth_hz = 2e6;
  int queue_capacity = 50;
  int max_neighbor_slots = 6;  // mirrors the policy's action truncation
  std::vector<OracleDemand> demands;
  int horizon = 10;
};

struct OraclePath {
  std::vector<NodeId> nodes;     // source ... destination
  std::vector<int> hop_steps;    // time step of each traversal
  std::vector<double> hop_delays_s;
  double delay_s = 0.0;
};

struct OracleSolution {
  std::vector<OraclePath> paths;  // per demand, in input order
  double total_delay_s = 0.0;
};

// Exhaustive minimum-total-delay search over per-step joint forwarding
// assignments. Instance size is enforced (<= 8 UAVs, <= 3 demands, H <= 10).
// Ties break lexicographically over the per-step assignment vectors.
OracleSolution solve_exact(const Snapshot& s);

// Recomputes the delay of given paths through the channel functions,
// replaying the step-aligned bandwidth coupling.
double recompute_paths_delay(const Snapshot& s,
                             const std::vector<OraclePath>& paths);

Snapshot snapshot_from_env(const Environment& env, int horizon);
ScenarioSpec scenario_from_snapshot(const Snapshot& s);

using StepPolicy = std::function<std::map<DemandId, NodeId>(const Environment&)>;

struct GapReport {
  double ratio = 0.0;  // mean policy delay / mean oracle delay
  double mean_policy_delay_s = 0.0;
  double mean_oracle_delay_s = 0.0;
  int episodes = 0;
  int optimal_path_matches = 0;  // policy delay equals the oracle optimum
  int undelivered = 0;
};

// Rolls the policy greedily (epsilon = 0) on the snapshot world over
// episodes with resampled demand sizes and compares against the oracle.
GapReport policy_gap(const StepPolicy& policy, const Snapshot& s, int episodes,
                     std::uint64_t eval_seed, double size_min_bits = 400e3,
                     double size_max_bits = 600e3);

}  // namespace lain
