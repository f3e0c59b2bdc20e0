#include "lainsim/env.hpp"

#include <algorithm>
#include <cstdio>
#include <queue>

namespace lain {

double base_reward(double hop_delay_s) {
  if (hop_delay_s <= 0.0) throw DegenerateDelay("base_reward: zero hop delay");
  return 1.0 / hop_delay_s;
}

double sherb_reward(double hop_delay_s, double d_uk_m, double d_kb_m, double sigma) {
  if (d_uk_m + d_kb_m <= 0.0)
    throw DegenerateGeometry("sherb_reward: both distances zero");
  return (1.0 / (hop_delay_s + sigma)) * (d_uk_m / (d_uk_m + d_kb_m));
}

bool ActionSet::empty() const {
  return neighbor_slots.empty() && !destination_bs.has_value();
}

std::optional<NodeId> ActionSet::resolve(int slot) const {
  if (slot >= 0 && slot < static_cast<int>(neighbor_slots.size()))
    return neighbor_slots[slot];
  if (destination_bs && slot == destination_bs_slot) return destination_bs;
  return std::nullopt;
}

std::vector<NodeSpec> generate_layout(const ScenarioGenerator& g,
                                      const TopologyConfig& topo, Rng& rng) {
  const double cy = topo.area_y_m / 2.0;
  const double span = g.corridor_end_x - g.corridor_start_x;
  std::uniform_real_distribution<double> jitter(-g.band_jitter_m, g.band_jitter_m);
  std::uniform_real_distribution<double> alt(0.0, g.altitude_jitter_m);
  std::uniform_real_distribution<double> cap(g.capability_min, g.capability_max);

  auto spread = [&](int i, int n, double pitch) {
    return (i - (n - 1) / 2.0) * pitch;
  };

  std::vector<NodeSpec> out;
  for (int i = 0; i < g.sd_count; ++i) {
    out.push_back({NodeKind::SensorDevice, Cluster::None,
                   {g.corridor_start_x, cy + spread(i, g.sd_count, 60.0), 0.0}, 0.0});
  }
  for (int i = 0; i < g.collection_count; ++i) {
    Vec3 p{g.corridor_start_x + 0.20 * span + jitter(rng),
           cy + spread(i, g.collection_count, 55.0) + jitter(rng),
           g.altitude_base_m + alt(rng)};
    out.push_back({NodeKind::Uav, Cluster::Collection, p, cap(rng)});
  }
  for (int i = 0; i < g.relay_count; ++i) {
    const double fx = g.relay_count == 1
                          ? 0.5
                          : 0.32 + 0.36 * static_cast<double>(i) / (g.relay_count - 1);
    Vec3 p{g.corridor_start_x + fx * span + jitter(rng),
           cy + spread(i % 2, 2, 50.0) + jitter(rng), g.altitude_base_m + alt(rng)};
    out.push_back({NodeKind::Uav, Cluster::Relay, p, cap(rng)});
  }
  for (int i = 0; i < g.downlink_count; ++i) {
    Vec3 p{g.corridor_start_x + 0.80 * span + jitter(rng),
           cy + spread(i, g.downlink_count, 55.0) + jitter(rng),
           g.altitude_base_m + alt(rng)};
    out.push_back({NodeKind::Uav, Cluster::Downlink, p, cap(rng)});
  }
  for (int i = 0; i < g.bs_count; ++i) {
    out.push_back({NodeKind::BaseStation, Cluster::None,
                   {g.corridor_end_x, cy + spread(i, g.bs_count, 80.0), 0.0}, 0.0});
  }
  return out;
}

namespace {

bool layout_connected(const std::vector<NodeSpec>& specs, const TopologyConfig& cfg) {
  Topology probe(cfg);
  for (const auto& s : specs) probe.add_node(s.kind, s.cluster, s.position, s.capability);
  // Every SD must reach some BS through the cluster-structured link graph.
  const auto sds = probe.sensor_devices();
  const auto n = probe.nodes().size();
  for (NodeId sd : sds) {
    std::vector<bool> seen(n, false);
    std::queue<NodeId> q;
    q.push(sd);
    seen[sd.index] = true;
    bool reached = false;
    while (!q.empty() && !reached) {
      NodeId cur = q.front();
      q.pop();
      for (const Node& other : probe.nodes()) {
        if (seen[other.id.index]) continue;
        if (!probe.comm_link(cur, other.id)) continue;
        if (other.kind == NodeKind::BaseStation) {
          reached = true;
          break;
        }
        seen[other.id.index] = true;
        q.push(other.id);
      }
    }
    if (!reached) return false;
  }
  return true;
}

void separate(std::vector<NodeSpec>& specs, double d_min) {
  // Nudge UAVs apart until the safety separation holds.
  for (int pass = 0; pass < 32; ++pass) {
    bool clean = true;
    for (size_t i = 0; i < specs.size(); ++i) {
      for (size_t j = i + 1; j < specs.size(); ++j) {
        if (specs[i].kind != NodeKind::Uav || specs[j].kind != NodeKind::Uav) continue;
        if (distance(specs[i].position, specs[j].position) < d_min) {
          specs[j].position.z += d_min;
          clean = false;
        }
      }
    }
    if (clean) return;
  }
}

}  // namespace

Environment::Environment(ScenarioSpec scenario, EnvConfig cfg, std::uint64_t env_seed)
    : scenario_(std::move(scenario)), cfg_(cfg), env_seed_(env_seed) {
  reset(0);
}

void Environment::build_topology() {
  topo_ = Topology(scenario_.topo);
  std::vector<NodeSpec> specs = scenario_.nodes;
  if (specs.empty()) {
    if (!scenario_.generator) throw BadConfig("scenario has neither nodes nor generator");
    Rng layout_rng(derive_seed(env_seed_, "layout"));
    for (int attempt = 0;; ++attempt) {
      specs = generate_layout(*scenario_.generator, scenario_.topo, layout_rng);
      separate(specs, scenario_.topo.d_min_m);
      if (layout_connected(specs, scenario_.topo)) break;
      if (attempt >= 50) throw BadConfig("could not generate a connected layout");
    }
  }
  for (const auto& s : specs) topo_.add_node(s.kind, s.cluster, s.position, s.capability);
  topo_.assert_invariants();

  initial_uavs_ = topo_.active_uavs();
  bs_ids_ = topo_.base_stations();
  cfg_.max_bs_slots = std::max<int>(cfg_.max_bs_slots, static_cast<int>(bs_ids_.size()));
}

void Environment::setup_ledger() {
  membership_.reset();
  chain_.clear();
  committee_.clear();
  node_keys_.clear();
  chain_report_ = {};
  if (!cfg_.ledger.enabled) return;

  if (cfg_.ledger.use_fast_crypto)
    crypto_ = std::make_unique<FastCrypto>();
  else
    crypto_ = std::make_unique<Sha256Crypto>();
  membership_ = std::make_unique<MembershipLedger>(
      *crypto_, AdmissionRules{}, cfg_.ledger.auth_period_steps);

  // The ground control center initializes all mission UAVs: their join
  // transactions form the genesis block.
  Rng key_rng(derive_seed(env_seed_, "keys"));
  for (NodeId u : initial_uavs_) {
    Bytes key = random_key(key_rng);
    node_keys_[u] = key;
    Bytes proof = {0x6a, 0x6f, 0x69, 0x6e};  // "join"
    const Digest sig = crypto_->sign(key, proof);
    auto outcome = membership_->admit(u, key, proof, sig, 0);
    if (!outcome.accepted) throw BadConfig("genesis admission failed");
  }

  // Committee: cluster heads first, then the highest-capability remainder.
  std::vector<NodeId> picked;
  for (Cluster c : {Cluster::Collection, Cluster::Relay, Cluster::Downlink}) {
    if (auto head = topo_.cluster_head(c)) picked.push_back(*head);
  }
  std::vector<NodeId> rest;
  for (NodeId u : initial_uavs_)
    if (std::find(picked.begin(), picked.end(), u) == picked.end()) rest.push_back(u);
  std::sort(rest.begin(), rest.end(), [&](NodeId a, NodeId b) {
    const double ca = topo_.node(a).capability;
    const double cb = topo_.node(b).capability;
    return ca != cb ? ca > cb : a < b;
  });
  for (NodeId u : rest) {
    if (static_cast<int>(picked.size()) >= cfg_.ledger.committee_size) break;
    picked.push_back(u);
  }
  std::sort(picked.begin(), picked.end());
  committee_ = picked;

  Block genesis;
  genesis.height = 0;
  genesis.proposer = committee_.empty() ? NodeId{0} : committee_.front();
  genesis.transactions = membership_->drain_pool(1 << 20);
  genesis.payload_hash = payload_hash_of(*crypto_, genesis.transactions);
  const Bytes msg = certificate_message(*crypto_, genesis);
  for (NodeId r : committee_)
    genesis.certificate.push_back({r, crypto_->sign(node_keys_[r], msg)});
  chain_.push_back(genesis);
  membership_->apply_block(genesis, 0);
}

void Environment::reset(int episode) {
  episode_ = episode;
  step_ = 0;
  build_topology();
  traffic_ = TrafficState(scenario_.queue_capacity);
  traffic_.set_node_bandwidth_hz(scenario_.node_bandwidth_hz);
  demand_rng_.seed(derive_seed(env_seed_, "demand", episode));
  mobility_rng_.seed(derive_seed(env_seed_, "mobility", episode));
  gossip_rng_.seed(derive_seed(env_seed_, "gossip", episode));
  gen_hash_ = 0xcbf29ce484222325ULL;
  silent_.clear();
  trace_.clear();
  setup_ledger();
}

int Environment::observation_dim() const {
  return 8 * (1 + cfg_.max_neighbor_slots);
}

int Environment::input_dim() const { return observation_dim() + 4; }

int Environment::action_dim() const {
  return cfg_.max_neighbor_slots + cfg_.max_bs_slots;
}

void Environment::encode_node_block(const Node& n, std::vector<double>& out) const {
  const auto& s = cfg_.scales;
  out.push_back(n.position.x / s.position_m);
  out.push_back(n.position.y / s.position_m);
  out.push_back(n.position.z / s.position_m);
  const auto& q = traffic_.queue_of(n.id);
  double total_bits = 0.0;
  int oldest_age = 0;
  Vec3 centroid{};
  for (DemandId id : q) {
    const Demand& d = traffic_.demand(id);
    total_bits += d.size_bits;
    oldest_age = std::max(oldest_age, step_ - d.born_step);
    centroid = centroid + topo_.node(d.destination).position;
  }
  if (!q.empty()) centroid = (1.0 / static_cast<double>(q.size())) * centroid;
  out.push_back(static_cast<double>(q.size()) / s.queue_len);
  out.push_back(total_bits / s.bits);
  out.push_back(static_cast<double>(oldest_age) / s.age_steps);
  out.push_back(centroid.x / s.position_m);
  out.push_back(centroid.y / s.position_m);
}

Observation Environment::observe(NodeId u) const {
  const Node& self = topo_.node(u);
  if (self.kind != NodeKind::Uav || !self.active)
    throw NodeNotActive("observe: not an active UAV");
  Observation obs;
  obs.features.reserve(observation_dim());
  encode_node_block(self, obs.features);
  auto nbrs = topo_.neighbors(u);
  if (static_cast<int>(nbrs.size()) > cfg_.max_neighbor_slots)
    nbrs.resize(cfg_.max_neighbor_slots);
  for (NodeId nb : nbrs) encode_node_block(topo_.node(nb), obs.features);
  obs.features.resize(observation_dim(), 0.0);
  return obs;
}

std::vector<double> Environment::observe_with_demand(NodeId u, DemandId r) const {
  std::vector<double> x = observe(u).features;
  const Demand& d = traffic_.demand(r);
  const Vec3 dest = topo_.node(d.destination).position;
  const auto& s = cfg_.scales;
  x.push_back(dest.x / s.position_m);
  x.push_back(dest.y / s.position_m);
  x.push_back(d.size_bits / s.bits);
  x.push_back(static_cast<double>(step_ - d.born_step) / s.age_steps);
  return x;
}

ActionSet Environment::action_set(NodeId u, DemandId r) const {
  const Node& self = topo_.node(u);
  if (self.kind != NodeKind::Uav || !self.active)
    throw NodeNotActive("action_set: not an active UAV");
  ActionSet as;
  as.neighbor_slots = topo_.neighbors(u);
  if (static_cast<int>(as.neighbor_slots.size()) > cfg_.max_neighbor_slots)
    as.neighbor_slots.resize(cfg_.max_neighbor_slots);
  as.mask.assign(action_dim(), false);
  for (size_t i = 0; i < as.neighbor_slots.size(); ++i) as.mask[i] = true;

  const Demand& d = traffic_.demand(r);
  if (self.cluster == Cluster::Downlink) {
    const auto reach = topo_.reachable_bs(u);
    if (std::find(reach.begin(), reach.end(), d.destination) != reach.end()) {
      const auto it = std::find(bs_ids_.begin(), bs_ids_.end(), d.destination);
      const int ordinal = static_cast<int>(it - bs_ids_.begin());
      as.destination_bs = d.destination;
      as.destination_bs_slot = cfg_.max_neighbor_slots + ordinal;
      as.mask[as.destination_bs_slot] = true;
    }
  }
  return as;
}

std::map<DemandId, NodeId> Environment::uplink_decisions() const {
  std::map<DemandId, NodeId> out;
  for (NodeId sd : topo_.sensor_devices()) {
    if (!topo_.node(sd).active) continue;
    auto queue = traffic_.queue_of(sd);
    if (queue.empty()) continue;
    const auto candidates = topo_.uplink_candidates(sd);
    if (candidates.empty()) continue;  // demand holds at the SD
    NodeId best = candidates.front();
    double best_d = distance(topo_.node(sd), topo_.node(best));
    for (NodeId c : candidates) {
      const double dist = distance(topo_.node(sd), topo_.node(c));
      if (dist < best_d || (dist == best_d && c < best)) {
        best = c;
        best_d = dist;
      }
    }
    for (DemandId id : queue) out[id] = best;
  }
  return out;
}

double Environment::reward_for(const HopOutcome& hop, const Demand& d) const {
  double r;
  if (hop.dropped) {
    r = cfg_.drop_penalty;
  } else if (hop.expired) {
    r = cfg_.expiry_penalty;
  } else if (cfg_.reward.mode == RewardMode::Base) {
    r = base_reward(hop.delay_s) * cfg_.reward_scale;
  } else {
    const double d_uk = distance(topo_.node(hop.from), topo_.node(hop.to));
    const double d_kb = distance(topo_.node(hop.to), topo_.node(d.destination));
    r = sherb_reward(hop.delay_s, d_uk, d_kb, cfg_.reward.sigma_hyper) *
        cfg_.reward_scale;
  }
  return cfg_.negate_rewards ? -r : r;
}

StepResult Environment::step(const std::map<DemandId, NodeId>& joint_actions) {
  StepResult result;
  result.step = step_;

  result.generated = traffic_.generate(topo_, scenario_.gen, step_, demand_rng_);
  for (DemandId id : result.generated) {
    const Demand& d = traffic_.demand(id);
    gen_hash_ ^= splitmix64(id * 0x9e3779b97f4a7c15ULL ^ d.source.index);
    gen_hash_ ^= splitmix64(d.destination.index + 0x1000);
    gen_hash_ ^= std::hash<double>{}(d.size_bits);
    gen_hash_ = splitmix64(gen_hash_);
  }

  std::map<DemandId, NodeId> decisions = uplink_decisions();
  for (const auto& [id, target] : joint_actions) {
    const Demand& d = traffic_.demand(id);
    if (d.state != DemandState::Queued)
      throw IllegalAction("action for a demand that is not queued");
    const Node& holder = topo_.node(d.location);
    if (holder.kind != NodeKind::Uav || !holder.active)
      throw IllegalAction("action for a demand not held by an active UAV");
    const ActionSet as = action_set(d.location, id);
    const bool is_neighbor =
        std::find(as.neighbor_slots.begin(), as.neighbor_slots.end(), target) !=
        as.neighbor_slots.end();
    const bool is_dest_bs = as.destination_bs && *as.destination_bs == target;
    if (!is_neighbor && !is_dest_bs)
      throw IllegalAction("action target outside the agent's action set");
    decisions[id] = target;
  }

  const StepReport rep = traffic_.forward_all(decisions, topo_, scenario_.channel, step_);

  char buf[160];
  for (const HopOutcome& hop : rep.hops) {
    const Node& from = topo_.node(hop.from);
    if (from.kind != NodeKind::Uav) continue;  // SD uplink is not an agent hop
    const Demand& d = traffic_.demand(hop.demand);
    AgentHopResult ar;
    ar.agent = hop.from;
    ar.demand = hop.demand;
    ar.target = hop.to;
    ar.delivered = hop.delivered;
    ar.dropped = hop.dropped;
    ar.expired = hop.expired;
    ar.hop_delay_s = hop.delay_s;
    ar.flag = hop.to == d.destination &&
              topo_.node(hop.to).kind == NodeKind::BaseStation;
    ar.reward = reward_for(hop, d);
    result.agent_hops.push_back(ar);
    std::snprintf(buf, sizeof(buf), "%d,%u,%llu,%u,%.17g,%d\n", step_,
                  ar.agent.index, static_cast<unsigned long long>(ar.demand),
                  ar.target.index, ar.reward, ar.flag ? 1 : 0);
    trace_ += buf;
  }

  if (cfg_.mobility_enabled && scenario_.topo.max_step_displacement_m > 0.0) {
    topo_.step_mobility(mobility_rng_);
    topo_.assert_invariants();
  } else {
    topo_.advance_time();
  }

  if (cfg_.ledger.enabled) run_ledger_epoch();

  ++step_;
  return result;
}

void Environment::apply_churn_events() {
  for (const ChurnEvent& ev : churn_) {
    if (ev.step != step_) continue;
    if (ev.uav_ordinal >= initial_uavs_.size()) continue;
    const NodeId u = initial_uavs_[ev.uav_ordinal];
    switch (ev.kind) {
      case ChurnEvent::Kind::Exit:
        membership_->submit_exit(u, step_);
        silent_.insert(u);
        break;
      case ChurnEvent::Kind::Silence:
        silent_.insert(u);
        break;
      case ChurnEvent::Kind::Rejoin: {
        Rng key_rng(derive_seed(env_seed_, "rejoin-key", ev.step * 1000 + u.index));
        Bytes key = random_key(key_rng);
        Bytes proof = {0x72, 0x65};  // "re"
        const Digest sig = crypto_->sign(key, proof);
        if (membership_->admit(u, key, proof, sig, step_).accepted) {
          node_keys_[u] = key;
          silent_.erase(u);
        }
        break;
      }
    }
  }
}

void Environment::run_ledger_epoch() {
  apply_churn_events();

  if (cfg_.ledger.status_period_steps > 0 &&
      step_ % cfg_.ledger.status_period_steps == 0) {
    std::set<NodeId> full(committee_.begin(), committee_.end());
    std::map<NodeId, std::vector<NodeId>> overlay;
    for (NodeId u : topo_.active_uavs()) overlay[u] = topo_.neighbors(u);
    for (NodeId u : topo_.active_uavs()) {
      if (silent_.count(u)) continue;
      StatusPayload status;
      status.queue_len = static_cast<std::uint32_t>(traffic_.queue_of(u).size());
      status.position = topo_.node(u).position;
      status.neighbors = topo_.neighbors(u);
      if (membership_->submit_status(u, status)) {
        // Pool insertion is authoritative; gossip is simulated for the
        // delivery statistics only.
        Transaction tx = make_signed_tx(*crypto_, node_keys_[u], u, TxKind::Status,
                                        0xffffffffULL, encode_status(status));
        gossip_broadcast(tx, u, overlay, full, cfg_.ledger.gossip_fanout,
                         *membership_, gossip_rng_);
      }
    }
  }

  if (cfg_.ledger.auth_period_steps > 0 && step_ > 0 &&
      step_ % cfg_.ledger.auth_period_steps == 0) {
    NodeId authority = committee_.empty() ? NodeId{0} : committee_.front();
    const auto revoked = membership_->reauthenticate_epoch(step_, silent_, authority);
    for (NodeId r : revoked) chain_report_.revoked.push_back(r);
  }

  if (cfg_.ledger.block_period_steps > 0 && step_ > 0 &&
      step_ % cfg_.ledger.block_period_steps == 0 &&
      membership_->pool_size() > 0 && committee_.size() >= 4) {
    Block proposal;
    proposal.height = chain_.size();
    proposal.prev_hash = block_hash(*crypto_, chain_.back());
    const int primary_idx =
        static_cast<int>(proposal.height % committee_.size());
    proposal.proposer = committee_[primary_idx];
    proposal.transactions = membership_->drain_pool(256);
    proposal.payload_hash = payload_hash_of(*crypto_, proposal.transactions);

    // Primary rotation is by height; replicas are the committee in id order.
    auto outcome = pbft_round(static_cast<int>(committee_.size()), *crypto_,
                              proposal, {}, {});
    chain_report_.view_changes += static_cast<int>(outcome.max_view);
    if (!outcome.committed) {
      ++chain_report_.consensus_failures;
      return;
    }
    Block committed = *outcome.block;
    const Bytes msg = certificate_message(*crypto_, committed);
    for (size_t i = 0; i < committee_.size(); ++i) {
      if (!outcome.committed_by.count(static_cast<int>(i))) continue;
      const NodeId r = committee_[i];
      committed.certificate.push_back({r, crypto_->sign(node_keys_[r], msg)});
    }
    chain_.push_back(committed);
    ++chain_report_.blocks_committed;
    membership_->apply_block(committed, step_);

    for (const Transaction& tx : committed.transactions) {
      if (tx.kind == TxKind::Exit) {
        auto payload = tx.payload;
        if (payload.size() != 4) continue;
        std::uint32_t idx = payload[0] | (payload[1] << 8) | (payload[2] << 16) |
                            (static_cast<std::uint32_t>(payload[3]) << 24);
        const NodeId target{idx};
        if (!membership_->is_active(target) && topo_.node(target).active) {
          const auto moved = traffic_.redistribute_from(target, topo_, step_);
          for (const auto& m : moved) {
            if (m.dropped)
              ++chain_report_.demands_dropped_on_churn;
            else
              ++chain_report_.demands_redistributed;
          }
          topo_.set_active(target, false);
        }
      } else if (tx.kind == TxKind::Join) {
        if (membership_->is_active(tx.author) && !topo_.node(tx.author).active)
          topo_.set_active(tx.author, true);
      }
    }
  }
}

void Environment::inject_demands(int count, double max_delay_s) {
  const auto sds = topo_.sensor_devices();
  if (sds.empty() || bs_ids_.empty()) throw BadConfig("inject needs SDs and BSs");
  std::uniform_real_distribution<double> size(scenario_.gen.size_min_bits,
                                              scenario_.gen.size_max_bits);
  for (int i = 0; i < count; ++i) {
    const NodeId sd = sds[i % sds.size()];
    const NodeId bs = bs_ids_[i % bs_ids_.size()];
    const double bits = size(demand_rng_);
    const DemandId id = traffic_.add_demand(sd, bs, bits, max_delay_s, step_);
    gen_hash_ ^= splitmix64(id ^ bs.index);
    gen_hash_ ^= std::hash<double>{}(bits);
    gen_hash_ = splitmix64(gen_hash_);
  }
}

std::vector<NodeId> Environment::active_agents() const { return topo_.active_uavs(); }

std::string Environment::trace_csv_header() {
  return "step,agent,demand,action,reward,flag\n";
}

}  // namespace lain
