#include "lainsim/traffic.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

namespace lain {

const std::vector<DemandId> TrafficState::kEmptyQueue;

int TrafficState::capacity_of(NodeId n) const {
  auto it = capacity_override_.find(n);
  return it == capacity_override_.end() ? default_capacity_ : it->second;
}

DemandId TrafficState::add_demand(NodeId source, NodeId destination,
                                  double size_bits, double max_delay_s,
                                  int born_step) {
  if (size_bits <= 0.0) throw BadConfig("demand size must be positive");
  DemandId id = next_id_++;
  Demand d;
  d.id = id;
  d.source = source;
  d.destination = destination;
  d.size_bits = size_bits;
  d.max_delay_s = max_delay_s;
  d.born_step = born_step;
  d.location = source;
  d.state = DemandState::InFlight;  // not in any queue yet
  demands_[id] = d;
  ++stats_.generated;
  if (enqueue(source, id) == EnqueueResult::Dropped) {
    demands_.at(id).resolved_step = born_step;  // no room at the source
  }
  return id;
}

std::vector<DemandId> TrafficState::generate(const Topology& topo,
                                             const DemandGenConfig& cfg, int step,
                                             Rng& rng) {
  std::vector<DemandId> out;
  if (cfg.arrival_probability <= 0.0) return out;
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_real_distribution<double> size(cfg.size_min_bits, cfg.size_max_bits);
  const auto bss = topo.base_stations();
  if (bss.empty()) throw BadConfig("demand generation requires a base station");
  // Draws are consumed in a fixed order per SD so the arrival sequence is a
  // pure function of the stream, independent of routing decisions.
  for (NodeId sd : topo.sensor_devices()) {
    if (!topo.node(sd).active) continue;
    const double u = coin(rng);
    const double bits = size(rng);
    std::uniform_int_distribution<size_t> pick(0, bss.size() - 1);
    const size_t bs_idx = pick(rng);
    if (u < cfg.arrival_probability) {
      out.push_back(add_demand(sd, bss[bs_idx], bits, cfg.max_delay_s, step));
    }
  }
  return out;
}

EnqueueResult TrafficState::enqueue(NodeId n, DemandId id) {
  auto& q = queues_[n];
  if (std::find(q.begin(), q.end(), id) != q.end())
    throw Error("enqueue: demand already queued at this node");
  Demand& d = demands_.at(id);
  if (d.state == DemandState::Queued)
    throw Error("enqueue: demand already occupies another queue");
  if (static_cast<int>(q.size()) >= capacity_of(n)) {
    d.state = DemandState::Dropped;
    ++stats_.dropped;
    return EnqueueResult::Dropped;
  }
  q.push_back(id);
  d.state = DemandState::Queued;
  d.location = n;
  return EnqueueResult::Accepted;
}

double TrafficState::link_path_loss_db(const Topology& topo,
                                       const ChannelParams& params, NodeId from,
                                       NodeId to) const {
  const Node& a = topo.node(from);
  const Node& b = topo.node(to);
  const double d = distance(a, b);
  const bool ground = a.kind != NodeKind::Uav || b.kind != NodeKind::Uav;
  if (!ground) return path_loss_db(d, 1.0, LinkKind::AirAir, params);
  const Vec3 diff = a.position - b.position;
  const double pr = los_probability(diff.horizontal_norm(), diff.z, params);
  return path_loss_db(d, pr, LinkKind::GroundAir, params);
}

StepReport TrafficState::forward_all(const std::map<DemandId, NodeId>& decisions,
                                     const Topology& topo,
                                     const ChannelParams& params, int step) {
  StepReport report;

  // Validate up front: a bad decision is a caller bug, not a modeled event.
  for (const auto& [id, target] : decisions) {
    auto it = demands_.find(id);
    if (it == demands_.end()) throw IllegalAction("decision for unknown demand");
    const Demand& d = it->second;
    if (d.state != DemandState::Queued)
      throw IllegalAction("decision for a non-queued demand");
    if (!topo.comm_link(d.location, target))
      throw IllegalAction("decision targets a node without a communicable link");
    if (topo.node(target).kind == NodeKind::BaseStation && target != d.destination)
      throw IllegalAction("decision targets a base station that is not the destination");
  }

  // Departure phase: every decided demand leaves its node this step.
  struct Move {
    DemandId id;
    NodeId from;
    NodeId to;
    double delay_s;
    double bw_hz;
    double rate_bps;
  };
  std::vector<Move> moves;
  std::map<NodeId, std::vector<QueuedSize>> sending;
  for (const auto& [id, target] : decisions) {
    (void)target;
    const Demand& d = demands_.at(id);
    sending[d.location].push_back({id, d.size_bits});
  }
  for (const auto& [node, queued] : sending) {
    const auto shares = allocate_bandwidth(queued, node_bandwidth_hz_);
    double worst = 0.0;
    for (const auto& share : shares) {
      const Demand& d = demands_.at(share.demand_id);
      const NodeId target = decisions.at(share.demand_id);
      const double loss = link_path_loss_db(topo, params, node, target);
      const double rate = shannon_rate_bps(share.bandwidth_hz, loss, params);
      const double delay = hop_delay_s(d.size_bits, rate);
      moves.push_back({share.demand_id, node, target, delay, share.bandwidth_hz, rate});
      worst = std::max(worst, delay);
    }
    report.node_step_delay_s[node] = worst;
  }

  // All departures vacate their queues before any arrival lands.
  for (const Move& m : moves) {
    auto& q = queues_[m.from];
    q.erase(std::remove(q.begin(), q.end(), m.id), q.end());
    demands_.at(m.id).state = DemandState::InFlight;
  }

  // Arrival phase, in demand-id order (the documented capacity tie-break).
  std::sort(moves.begin(), moves.end(),
            [](const Move& a, const Move& b) { return a.id < b.id; });
  for (const Move& m : moves) {
    Demand& d = demands_.at(m.id);
    d.accumulated_delay_s += m.delay_s;
    d.hop_count += 1;
    d.path.push_back({step, m.from, m.to, m.bw_hz, m.rate_bps, m.delay_s});

    HopOutcome out;
    out.demand = m.id;
    out.from = m.from;
    out.to = m.to;
    out.delay_s = m.delay_s;

    if (d.accumulated_delay_s > d.max_delay_s) {
      d.state = DemandState::Expired;
      d.resolved_step = step;
      d.location = m.to;
      ++stats_.expired;
      out.expired = true;
    } else if (topo.node(m.to).kind == NodeKind::BaseStation) {
      d.state = DemandState::Delivered;
      d.resolved_step = step;
      d.location = m.to;
      ++stats_.delivered;
      out.delivered = true;
    } else {
      if (enqueue(m.to, m.id) == EnqueueResult::Dropped) {
        d.resolved_step = step;
        d.location = m.to;
        out.dropped = true;
      }
    }
    report.hops.push_back(out);
  }
  return report;
}

std::vector<HopOutcome> TrafficState::redistribute_from(NodeId gone,
                                                        const Topology& topo,
                                                        int step) {
  std::vector<HopOutcome> out;
  auto it = queues_.find(gone);
  if (it == queues_.end()) return out;
  std::vector<DemandId> stranded = it->second;
  std::sort(stranded.begin(), stranded.end());
  queues_.erase(it);

  const Node& src = topo.node(gone);
  const double d_max = topo.d_max_of(gone);
  for (DemandId id : stranded) {
    Demand& d = demands_.at(id);
    // Nearest active UAV still within the lost node's radio range.
    NodeId best{};
    double best_dist = std::numeric_limits<double>::infinity();
    bool found = false;
    for (const Node& cand : topo.nodes()) {
      if (cand.kind != NodeKind::Uav || !cand.active || cand.id == gone) continue;
      const double dist = distance(src, cand);
      if (dist > d_max) continue;
      if (static_cast<int>(queue_of(cand.id).size()) >= capacity_of(cand.id)) continue;
      if (dist < best_dist || (dist == best_dist && cand.id < best)) {
        best = cand.id;
        best_dist = dist;
        found = true;
      }
    }
    HopOutcome o;
    o.demand = id;
    o.from = gone;
    if (found) {
      // Recovery transfer: bookkeeping move, no transmission is modeled.
      d.state = DemandState::Queued;
      queues_[best].push_back(id);
      d.location = best;
      o.to = best;
    } else {
      d.state = DemandState::Dropped;
      d.resolved_step = step;
      ++stats_.dropped;
      o.dropped = true;
    }
    out.push_back(o);
  }
  return out;
}

ConservationReport TrafficState::conservation_audit() const {
  ConservationReport r;
  r.stats = stats_;
  r.queued_now = total_queued();
  const std::uint64_t accounted =
      r.queued_now + stats_.delivered + stats_.dropped + stats_.expired;
  r.balanced = accounted == stats_.generated;
  if (!r.balanced)
    throw ConservationViolation("demand conservation violated: generated=" +
                                std::to_string(stats_.generated) +
                                " accounted=" + std::to_string(accounted));
  return r;
}

const Demand& TrafficState::demand(DemandId id) const {
  auto it = demands_.find(id);
  if (it == demands_.end()) throw Error("unknown demand id");
  return it->second;
}

const std::vector<DemandId>& TrafficState::queue_of(NodeId n) const {
  auto it = queues_.find(n);
  return it == queues_.end() ? kEmptyQueue : it->second;
}

std::uint64_t TrafficState::total_queued() const {
  std::uint64_t total = 0;
  for (const auto& [node, q] : queues_) total += q.size();
  return total;
}

std::string TrafficState::ledger_csv_header() {
  return "demand,state,source,destination,size_bits,delay_s,hops\n";
}

std::string TrafficState::ledger_csv() const {
  std::string out;
  char buf[192];
  for (const auto& [id, d] : demands_) {
    const char* state = d.state == DemandState::Queued      ? "queued"
                        : d.state == DemandState::InFlight  ? "inflight"
                        : d.state == DemandState::Delivered ? "delivered"
                        : d.state == DemandState::Expired   ? "expired"
                                                            : "dropped";
    std::snprintf(buf, sizeof(buf), "%llu,%s,%u,%u,%.17g,%.17g,%d\n",
                  static_cast<unsigned long long>(id), state, d.source.index,
                  d.destination.index, d.size_bits, d.accumulated_delay_s,
                  d.hop_count);
    out += buf;
  }
  return out;
}

}  // namespace lain
