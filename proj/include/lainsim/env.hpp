#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "lainsim/channel.hpp"
#include "lainsim/core.hpp"
#include "lainsim/crypto.hpp"
#include "lainsim/gossip.hpp"
#include "lainsim/ledger.hpp"
#include "lainsim/pbft.hpp"
#include "lainsim/topology.hpp"
#include "lainsim/traffic.hpp"

namespace lain {

enum class RewardMode : std::uint8_t { Base, Sherb };

struct RewardSpec {
  RewardMode mode = RewardMode::Sherb;
  double sigma_hyper = 0.5;  // delay/distance balance, Sherb only
};

// Reciprocal of the executed hop's transmission delay.
double base_reward(double hop_delay_s);

// Delay-and-progress shaped reward: [1/(T + sigma)] * [d_uk / (d_uk + d_kb)].
double sherb_reward(double hop_delay_s, double d_uk_m, double d_kb_m, double sigma);

struct NodeSpec {
  NodeKind kind = NodeKind::Uav;
  Cluster cluster = Cluster::None;
  Vec3 position;
  double capability = 0.0;
};

// Procedural corridor layout: SDs at one end, BSs at the other, the three
// UAV clusters in bands between them, jittered per seed.
struct ScenarioGenerator {
  int sd_count = 2;
  int bs_count = 2;
  int collection_count = 3;
  int relay_count = 4;
  int downlink_count = 3;
  double corridor_start_x = 50.0;
  double corridor_end_x = 700.0;
  double band_jitter_m = 30.0;
  double altitude_base_m = 210.0;
  double altitude_jitter_m = 20.0;
  double capability_min = 1.0;
  double capability_max = 10.0;
};

struct ScenarioSpec {
  TopologyConfig topo;
  ChannelParams channel;
  int queue_capacity = 50;
  double node_bandwidth_hz = 2e6;
  std::vector<NodeSpec> nodes;  // explicit layout wins over the generator
  std::optional<ScenarioGenerator> generator;
  DemandGenConfig gen;
};

struct FeatureScales {
  double position_m = 1000.0;
  double bits = 600e3;
  double age_steps = 20.0;
  double queue_len = 10.0;
};

struct LedgerConfig {
  bool enabled = false;
  int block_period_steps = 5;
  int auth_period_steps = 10;
  int status_period_steps = 5;
  int committee_size = 4;
  int gossip_fanout = 2;
  bool use_fast_crypto = false;
};

struct EnvConfig {
  int max_neighbor_slots = 6;  // K_max
  int max_bs_slots = 2;        // B_max; raised to the scenario BS count
  FeatureScales scales;
  RewardSpec reward;
  double reward_scale = 1.0;
  bool negate_rewards = false;  // curve-shape comparison only
  double drop_penalty = -1.0;
  double expiry_penalty = -1.0;
  bool mobility_enabled = false;
  LedgerConfig ledger;
};

// Scripted membership churn for chain scenarios and robustness tests.
struct ChurnEvent {
  int step = 0;
  enum class Kind : std::uint8_t { Exit, Silence, Rejoin } kind = Kind::Silence;
  std::uint32_t uav_ordinal = 0;  // index into the initial UAV list
};

struct Observation {
  std::vector<double> features;  // fixed layout, see encoder
};

struct ActionSet {
  std::vector<NodeId> neighbor_slots;      // sorted by id, <= K_max
  std::optional<NodeId> destination_bs;    // valid only for downlink agents
  int destination_bs_slot = -1;            // K_max + bs ordinal
  std::vector<bool> mask;                  // size K_max + B_max

  bool empty() const;
  std::optional<NodeId> resolve(int slot) const;
};

struct AgentHopResult {
  NodeId agent;
  DemandId demand = 0;
  NodeId target;
  double reward = 0.0;
  bool flag = false;       // f^r: the action was the destination BS
  bool delivered = false;
  bool dropped = false;
  bool expired = false;
  double hop_delay_s = 0.0;
};

struct StepResult {
  std::vector<AgentHopResult> agent_hops;
  std::vector<DemandId> generated;
  int step = 0;
};

struct ChainEpochReport {
  int blocks_committed = 0;
  int consensus_failures = 0;
  int view_changes = 0;
  std::vector<NodeId> revoked;
  int demands_redistributed = 0;
  int demands_dropped_on_churn = 0;
};

// The Dec-POMDP wrapper: per-agent observations, per-demand actions, shaped
// or base rewards, and the step contract binding agents to the simulator.
class Environment {
 public:
  Environment(ScenarioSpec scenario, EnvConfig cfg, std::uint64_t env_seed);

  // Rebuilds the world for an episode. Topology layout depends only on the
  // construction seed; the per-episode streams depend on (seed, episode).
  void reset(int episode);

  Observation observe(NodeId u) const;
  std::vector<double> observe_with_demand(NodeId u, DemandId r) const;
  ActionSet action_set(NodeId u, DemandId r) const;
  int observation_dim() const;
  int input_dim() const;   // observation + demand feature block
  int action_dim() const;  // K_max + B_max

  // Advances the world one step: demand generation, SD uplink, the joint
  // forwarding transition, rewards and flags, mobility, ledger epoch.
  StepResult step(const std::map<DemandId, NodeId>& joint_actions);

  void inject_demands(int count, double max_delay_s);
  void schedule_churn(std::vector<ChurnEvent> events) { churn_ = std::move(events); }

  const Topology& topology() const { return topo_; }
  Topology& topology_mut() { return topo_; }
  const TrafficState& traffic() const { return traffic_; }
  TrafficState& traffic_mut() { return traffic_; }
  const ChannelParams& channel() const { return scenario_.channel; }
  const EnvConfig& config() const { return cfg_; }
  const ScenarioSpec& scenario() const { return scenario_; }
  int current_step() const { return step_; }
  const std::vector<NodeId>& agents() const { return initial_uavs_; }
  std::vector<NodeId> active_agents() const;

  const std::vector<Block>& chain() const { return chain_; }
  const MembershipLedger* membership() const { return membership_.get(); }
  const ChainEpochReport& chain_report() const { return chain_report_; }
  const std::vector<NodeId>& committee() const { return committee_; }

  // FNV hash of the demand-generation draw sequence; equal hashes across
  // paired runs certify the environment streams stayed aligned.
  std::uint64_t generation_sequence_hash() const { return gen_hash_; }

  // Per-demand hop trace rows: step,agent,demand,action,reward,flag
  static std::string trace_csv_header();
  const std::string& trace_csv() const { return trace_; }

 private:
  void build_topology();
  void setup_ledger();
  void run_ledger_epoch();
  void apply_churn_events();
  std::map<DemandId, NodeId> uplink_decisions() const;
  double reward_for(const HopOutcome& hop, const Demand& d) const;
  void encode_node_block(const Node& n, std::vector<double>& out) const;

  ScenarioSpec scenario_;
  EnvConfig cfg_;
  std::uint64_t env_seed_;
  int episode_ = 0;
  int step_ = 0;

  Topology topo_;
  TrafficState traffic_;
  std::vector<NodeId> initial_uavs_;
  std::vector<NodeId> bs_ids_;
  std::vector<ChurnEvent> churn_;
  std::set<NodeId> silent_;

  Rng demand_rng_;
  Rng mobility_rng_;
  Rng gossip_rng_;
  std::uint64_t gen_hash_ = 0xcbf29ce484222325ULL;

  std::unique_ptr<CryptoSuite> crypto_;
  std::unique_ptr<MembershipLedger> membership_;
  std::map<NodeId, Bytes> node_keys_;
  std::vector<NodeId> committee_;
  std::vector<Block> chain_;
  ChainEpochReport chain_report_;

  std::string trace_;
};

// Builds node placements for a generated scenario; exposed for tests.
std::vector<NodeSpec> generate_layout(const ScenarioGenerator& g,
                                      const TopologyConfig& topo, Rng& rng);

}  // namespace lain
