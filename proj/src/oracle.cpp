#include "lainsim/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace lain {

namespace {

constexpr std::uint8_t kDelivered = 0xff;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct SearchContext {
  const Snapshot* snap;
  std::vector<std::vector<NodeId>> candidates_by_node;  // per node index
  std::vector<NodeId> uplink_target;                    // per SD node index
  std::unordered_map<std::uint64_t, double> memo;
};

std::uint64_t state_key(int step, const std::vector<std::uint8_t>& locs) {
  std::uint64_t key = static_cast<std::uint64_t>(step);
  for (size_t i = 0; i < locs.size(); ++i)
    key |= static_cast<std::uint64_t>(locs[i]) << (8 * (i + 1));
  return key;
}

double link_loss_db(const Snapshot& s, NodeId from, NodeId to) {
  const Node& a = s.topology.node(from);
  const Node& b = s.topology.node(to);
  const double d = distance(a, b);
  if (a.kind == NodeKind::Uav && b.kind == NodeKind::Uav)
    return path_loss_db(d, 1.0, LinkKind::AirAir, s.channel);
  const Vec3 diff = a.position - b.position;
  const double pr = los_probability(diff.horizontal_norm(), diff.z, s.channel);
  return path_loss_db(d, pr, LinkKind::GroundAir, s.channel);
}

// Candidate next hops for a demand held at `loc`, mirroring the simulator:
// SDs follow the deterministic uplink rule, UAVs offer their (truncated)
// neighbor slots plus the destination BS for downlink UAVs.
std::vector<NodeId> candidates_for(const SearchContext& ctx, std::uint8_t loc,
                                   const OracleDemand& demand) {
  const Snapshot& s = *ctx.snap;
  const Node& node = s.topology.node(NodeId{loc});
  std::vector<NodeId> out;
  if (node.kind == NodeKind::SensorDevice) {
    const NodeId up = ctx.uplink_target[loc];
    if (up.index != 0xffffffff) out.push_back(up);
    return out;
  }
  out = ctx.candidates_by_node[loc];
  if (node.cluster == Cluster::Downlink) {
    const auto reach = s.topology.reachable_bs(node.id);
    if (std::find(reach.begin(), reach.end(), demand.destination) != reach.end())
      out.push_back(demand.destination);
  }
  return out;
}

struct JointMove {
  // Target node per demand; kDelivered demands and holds keep their entry.
  std::vector<std::uint8_t> target;
  double cost = 0.0;  // sum of this step's hop delays
  bool feasible = false;
};

// Applies one joint assignment: splits bandwidth per sending node, prices
// every hop, and checks arrival capacity in demand-id order.
JointMove price_joint_move(const SearchContext& ctx,
                           const std::vector<std::uint8_t>& locs,
                           const std::vector<std::uint8_t>& targets) {
  const Snapshot& s = *ctx.snap;
  JointMove jm;
  jm.target = targets;

  std::map<std::uint8_t, std::vector<QueuedSize>> sending;
  for (size_t r = 0; r < locs.size(); ++r) {
    if (locs[r] == kDelivered || targets[r] == locs[r]) continue;
    sending[locs[r]].push_back({r, s.demands[r].size_bits});
  }
  std::vector<double> hop_delay(locs.size(), 0.0);
  for (const auto& [node, queued] : sending) {
    const auto shares = allocate_bandwidth(queued, s.node_bandwidth_hz);
    for (const auto& share : shares) {
      const size_t r = share.demand_id;
      const double loss = link_loss_db(s, NodeId{locs[r]}, NodeId{targets[r]});
      const double rate = shannon_rate_bps(share.bandwidth_hz, loss, s.channel);
      hop_delay[r] = hop_delay_s(s.demands[r].size_bits, rate);
      jm.cost += hop_delay[r];
    }
  }

  // Occupancy after departures: demands that hold keep their slot.
  std::map<std::uint8_t, int> occupancy;
  for (size_t r = 0; r < locs.size(); ++r) {
    if (locs[r] == kDelivered) continue;
    if (targets[r] == locs[r] &&
        s.topology.node(NodeId{locs[r]}).kind != NodeKind::BaseStation)
      ++occupancy[locs[r]];
  }
  for (size_t r = 0; r < locs.size(); ++r) {
    if (locs[r] == kDelivered || targets[r] == locs[r]) continue;
    const Node& tgt = s.topology.node(NodeId{targets[r]});
    if (tgt.kind == NodeKind::BaseStation) continue;  // delivery, no queue
    if (occupancy[targets[r]] >= s.queue_capacity) return jm;  // drop: dead branch
    ++occupancy[targets[r]];
  }
  jm.feasible = true;
  return jm;
}

// Minimum cost-to-go from (step, locs); infinity when no feasible schedule
// delivers everything within the horizon.
double best_cost(SearchContext& ctx, int step, std::vector<std::uint8_t>& locs) {
  const Snapshot& s = *ctx.snap;
  bool all_done = true;
  for (auto l : locs)
    if (l != kDelivered) all_done = false;
  if (all_done) return 0.0;
  if (step >= s.horizon) return kInf;

  const std::uint64_t key = state_key(step, locs);
  auto hit = ctx.memo.find(key);
  if (hit != ctx.memo.end()) return hit->second;

  std::vector<std::vector<std::uint8_t>> options(locs.size());
  for (size_t r = 0; r < locs.size(); ++r) {
    if (locs[r] == kDelivered) {
      options[r] = {kDelivered};
      continue;
    }
    const auto cands = candidates_for(ctx, locs[r], s.demands[r]);
    if (cands.empty()) {
      options[r] = {locs[r]};  // hold in place
    } else {
      for (NodeId c : cands) options[r].push_back(static_cast<std::uint8_t>(c.index));
    }
  }

  double best = kInf;
  std::vector<std::uint8_t> pick(locs.size(), 0);
  std::vector<size_t> idx(locs.size(), 0);
  while (true) {
    for (size_t r = 0; r < locs.size(); ++r) pick[r] = options[r][idx[r]];
    const JointMove jm = price_joint_move(ctx, locs, pick);
    if (jm.feasible) {
      std::vector<std::uint8_t> next(locs.size());
      for (size_t r = 0; r < locs.size(); ++r) {
        if (locs[r] == kDelivered) {
          next[r] = kDelivered;
        } else if (s.topology.node(NodeId{pick[r]}).kind == NodeKind::BaseStation) {
          next[r] = kDelivered;
        } else {
          next[r] = pick[r];
        }
      }
      const double tail = best_cost(ctx, step + 1, next);
      if (jm.cost + tail < best) best = jm.cost + tail;
    }
    // Advance the mixed-radix counter (lexicographic enumeration order).
    size_t r = locs.size();
    while (r-- > 0) {
      if (++idx[r] < options[r].size()) break;
      idx[r] = 0;
      if (r == 0) {
        ctx.memo[key] = best;
        return best;
      }
    }
  }
}

SearchContext make_context(const Snapshot& s) {
  const auto uavs = s.topology.active_uavs();
  if (uavs.size() > 8) throw BadConfig("oracle instance too large: > 8 UAVs");
  if (s.demands.size() > 3) throw BadConfig("oracle instance too large: > 3 demands");
  if (s.horizon > 10) throw BadConfig("oracle instance too large: horizon > 10");
  if (s.demands.empty()) throw BadConfig("oracle needs at least one demand");

  SearchContext ctx;
  ctx.snap = &s;
  const size_t n = s.topology.nodes().size();
  ctx.candidates_by_node.resize(n);
  ctx.uplink_target.assign(n, NodeId{0xffffffff});
  for (const Node& node : s.topology.nodes()) {
    if (node.kind == NodeKind::Uav && node.active) {
      auto nbrs = s.topology.neighbors(node.id);
      if (static_cast<int>(nbrs.size()) > s.max_neighbor_slots)
        nbrs.resize(s.max_neighbor_slots);
      ctx.candidates_by_node[node.id.index] = nbrs;
    } else if (node.kind == NodeKind::SensorDevice) {
      const auto ups = s.topology.uplink_candidates(node.id);
      NodeId best{0xffffffff};
      double best_d = kInf;
      for (NodeId c : ups) {
        const double d = distance(s.topology.node(node.id), s.topology.node(c));
        if (d < best_d || (d == best_d && c < best)) {
          best = c;
          best_d = d;
        }
      }
      ctx.uplink_target[node.id.index] = best;
    }
  }
  return ctx;
}

}  // namespace

OracleSolution solve_exact(const Snapshot& s) {
  SearchContext ctx = make_context(s);
  std::vector<std::uint8_t> locs;
  for (const auto& d : s.demands) locs.push_back(static_cast<std::uint8_t>(d.source.index));

  const double total = best_cost(ctx, 0, locs);
  if (!std::isfinite(total))
    throw Infeasible("no feasible routing within the horizon");

  // Replay the argmin (first lexicographic minimizer) to extract paths.
  OracleSolution sol;
  sol.total_delay_s = total;
  sol.paths.resize(s.demands.size());
  for (size_t r = 0; r < s.demands.size(); ++r)
    sol.paths[r].nodes.push_back(s.demands[r].source);

  std::vector<std::uint8_t> cur = locs;
  for (int step = 0; step < s.horizon; ++step) {
    bool all_done = true;
    for (auto l : cur)
      if (l != kDelivered) all_done = false;
    if (all_done) break;

    const double want = best_cost(ctx, step, cur);
    std::vector<std::vector<std::uint8_t>> options(cur.size());
    for (size_t r = 0; r < cur.size(); ++r) {
      if (cur[r] == kDelivered) {
        options[r] = {kDelivered};
        continue;
      }
      const auto cands = candidates_for(ctx, cur[r], s.demands[r]);
      if (cands.empty()) {
        options[r] = {cur[r]};
      } else {
        for (NodeId c : cands) options[r].push_back(static_cast<std::uint8_t>(c.index));
      }
    }
    std::vector<size_t> idx(cur.size(), 0);
    std::vector<std::uint8_t> pick(cur.size(), 0);
    bool advanced = false;
    while (!advanced) {
      for (size_t r = 0; r < cur.size(); ++r) pick[r] = options[r][idx[r]];
      const JointMove jm = price_joint_move(ctx, cur, pick);
      if (jm.feasible) {
        std::vector<std::uint8_t> next(cur.size());
        for (size_t r = 0; r < cur.size(); ++r) {
          if (cur[r] == kDelivered)
            next[r] = kDelivered;
          else if (s.topology.node(NodeId{pick[r]}).kind == NodeKind::BaseStation)
            next[r] = kDelivered;
          else
            next[r] = pick[r];
        }
        const double tail = best_cost(ctx, step + 1, next);
        if (jm.cost + tail == want) {
          // Record the hops of this step.
          std::map<std::uint8_t, std::vector<QueuedSize>> sending;
          for (size_t r = 0; r < cur.size(); ++r) {
            if (cur[r] == kDelivered || pick[r] == cur[r]) continue;
            sending[cur[r]].push_back({r, s.demands[r].size_bits});
          }
          for (const auto& [node, queued] : sending) {
            const auto shares = allocate_bandwidth(queued, s.node_bandwidth_hz);
            for (const auto& share : shares) {
              const size_t r = share.demand_id;
              const double loss = link_loss_db(s, NodeId{cur[r]}, NodeId{pick[r]});
              const double rate = shannon_rate_bps(share.bandwidth_hz, loss, s.channel);
              const double delay = hop_delay_s(s.demands[r].size_bits, rate);
              sol.paths[r].nodes.push_back(NodeId{pick[r]});
              sol.paths[r].hop_steps.push_back(step);
              sol.paths[r].hop_delays_s.push_back(delay);
              sol.paths[r].delay_s += delay;
            }
          }
          cur = next;
          advanced = true;
          break;
        }
      }
      size_t r = cur.size();
      bool more = false;
      while (r-- > 0) {
        if (++idx[r] < options[r].size()) {
          more = true;
          break;
        }
        idx[r] = 0;
        if (r == 0) break;
      }
      if (!more) break;
    }
    if (!advanced) throw Error("oracle path replay failed to match the optimum");
  }
  return sol;
}

double recompute_paths_delay(const Snapshot& s, const std::vector<OraclePath>& paths) {
  // Rebuild the step-aligned co-location groups and price every hop again.
  double total = 0.0;
  std::map<int, std::map<std::uint8_t, std::vector<QueuedSize>>> by_step;
  struct HopRef {
    size_t demand;
    NodeId from;
    NodeId to;
  };
  std::map<int, std::vector<HopRef>> hops_by_step;
  for (size_t r = 0; r < paths.size(); ++r) {
    for (size_t h = 0; h + 1 < paths[r].nodes.size(); ++h) {
      const int step = paths[r].hop_steps[h];
      by_step[step][static_cast<std::uint8_t>(paths[r].nodes[h].index)].push_back(
          {r, s.demands[r].size_bits});
      hops_by_step[step].push_back({r, paths[r].nodes[h], paths[r].nodes[h + 1]});
    }
  }
  for (const auto& [step, groups] : by_step) {
    for (const auto& [node, queued] : groups) {
      const auto shares = allocate_bandwidth(queued, s.node_bandwidth_hz);
      for (const auto& share : shares) {
        const size_t r = share.demand_id;
        NodeId to{};
        for (const auto& hop : hops_by_step[step])
          if (hop.demand == r && hop.from == NodeId{node}) to = hop.to;
        const double loss = link_loss_db(s, NodeId{node}, to);
        const double rate = shannon_rate_bps(share.bandwidth_hz, loss, s.channel);
        total += hop_delay_s(s.demands[r].size_bits, rate);
      }
    }
  }
  return total;
}

Snapshot snapshot_from_env(const Environment& env, int horizon) {
  Snapshot s;
  s.topology = env.topology();
  s.channel = env.channel();
  s.node_bandwidth_hz = env.traffic().node_bandwidth_hz();
  s.queue_capacity = env.scenario().queue_capacity;
  s.max_neighbor_slots = env.config().max_neighbor_slots;
  s.horizon = horizon;
  for (const auto& [id, d] : env.traffic().demands()) {
    (void)id;
    s.demands.push_back({d.source, d.destination, d.size_bits});
  }
  return s;
}

ScenarioSpec scenario_from_snapshot(const Snapshot& s) {
  ScenarioSpec spec;
  spec.topo = s.topology.config();
  spec.channel = s.channel;
  spec.queue_capacity = s.queue_capacity;
  spec.node_bandwidth_hz = s.node_bandwidth_hz;
  for (const Node& n : s.topology.nodes())
    spec.nodes.push_back({n.kind, n.cluster, n.position, n.capability});
  spec.gen.arrival_probability = 0.0;
  return spec;
}

GapReport policy_gap(const StepPolicy& policy, const Snapshot& s, int episodes,
                     std::uint64_t eval_seed, double size_min_bits,
                     double size_max_bits) {
  GapReport report;
  report.episodes = episodes;

  EnvConfig env_cfg;
  env_cfg.max_neighbor_slots = s.max_neighbor_slots;
  env_cfg.mobility_enabled = false;
  Environment env(scenario_from_snapshot(s), env_cfg, derive_seed(eval_seed, "gap"));

  Rng size_rng(derive_seed(eval_seed, "sizes"));
  std::uniform_real_distribution<double> size_dist(size_min_bits, size_max_bits);

  double policy_total = 0.0;
  double oracle_total = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    Snapshot inst = s;
    for (auto& d : inst.demands) d.size_bits = size_dist(size_rng);
    const OracleSolution opt = solve_exact(inst);

    env.reset(ep);
    for (const auto& d : inst.demands)
      env.traffic_mut().add_demand(d.source, d.destination, d.size_bits, 1e18, 0);

    for (int t = 0; t < inst.horizon; ++t) {
      if (env.traffic().total_queued() == 0) break;
      env.step(policy(env));
    }

    double ep_policy = 0.0;
    bool all_delivered = true;
    for (const auto& [id, d] : env.traffic().demands()) {
      (void)id;
      ep_policy += d.accumulated_delay_s;
      if (d.state != DemandState::Delivered) {
        all_delivered = false;
        ++report.undelivered;
      }
    }
    policy_total += ep_policy;
    oracle_total += opt.total_delay_s;
    if (all_delivered &&
        std::abs(ep_policy - opt.total_delay_s) <=
            1e-9 * std::max(1.0, opt.total_delay_s))
      ++report.optimal_path_matches;
  }
  report.mean_policy_delay_s = policy_total / std::max(1, episodes);
  report.mean_oracle_delay_s = oracle_total / std::max(1, episodes);
  report.ratio = report.mean_policy_delay_s / report.mean_oracle_delay_s;
  return report;
}

}  // namespace lain
