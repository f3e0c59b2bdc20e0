#include "lainsim/config.hpp"

#include <json.hpp>

using nlohmann::json;

namespace lain {

namespace {

NodeKind parse_kind(const std::string& s) {
  if (s == "sd") return NodeKind::SensorDevice;
  if (s == "uav") return NodeKind::Uav;
  if (s == "bs") return NodeKind::BaseStation;
  throw BadConfig("unknown node kind: " + s);
}

Cluster parse_cluster(const std::string& s) {
  if (s == "collection") return Cluster::Collection;
  if (s == "relay") return Cluster::Relay;
  if (s == "downlink") return Cluster::Downlink;
  if (s == "none") return Cluster::None;
  throw BadConfig("unknown cluster: " + s);
}

void parse_topology(const json& j, TopologyConfig& t) {
  t.area_x_m = j.value("area_x_m", t.area_x_m);
  t.area_y_m = j.value("area_y_m", t.area_y_m);
  t.altitude_min_m = j.value("altitude_min_m", t.altitude_min_m);
  t.altitude_max_m = j.value("altitude_max_m", t.altitude_max_m);
  t.d_min_m = j.value("d_min_m", t.d_min_m);
  t.d_max_uav_m = j.value("d_max_uav_m", t.d_max_uav_m);
  t.d_max_ground_m = j.value("d_max_ground_m", t.d_max_ground_m);
  t.max_step_displacement_m = j.value("max_step_displacement_m", t.max_step_displacement_m);
  t.mobility_retries = j.value("mobility_retries", t.mobility_retries);
}

void parse_channel(const json& j, ChannelParams& c) {
  c.carrier_frequency_hz = j.value("carrier_frequency_hz", c.carrier_frequency_hz);
  c.light_speed_mps = j.value("light_speed_mps", c.light_speed_mps);
  c.rho1 = j.value("rho1", c.rho1);
  c.rho2 = j.value("rho2", c.rho2);
  c.excess_los_db = j.value("excess_los_db", c.excess_los_db);
  c.excess_nlos_db = j.value("excess_nlos_db", c.excess_nlos_db);
  c.noise_power_dbm = j.value("noise_power_dbm", c.noise_power_dbm);
  c.tx_power_dbm = j.value("tx_power_dbm", c.tx_power_dbm);
}

void parse_scenario(const json& j, ScenarioSpec& s) {
  if (j.contains("topology")) parse_topology(j["topology"], s.topo);
  if (j.contains("channel")) parse_channel(j["channel"], s.channel);
  s.queue_capacity = j.value("queue_capacity", s.queue_capacity);
  s.node_bandwidth_hz = j.value("node_bandwidth_hz", s.node_bandwidth_hz);
  if (j.contains("nodes")) {
    for (const auto& n : j["nodes"]) {
      NodeSpec spec;
      spec.kind = parse_kind(n.at("kind").get<std::string>());
      spec.cluster = parse_cluster(n.value("cluster", std::string("none")));
      const auto& p = n.at("position");
      spec.position = {p.at(0).get<double>(), p.at(1).get<double>(),
                       p.at(2).get<double>()};
      spec.capability = n.value("capability", 0.0);
      s.nodes.push_back(spec);
    }
  }
  if (j.contains("generator")) {
    ScenarioGenerator g;
    const auto& jg = j["generator"];
    g.sd_count = jg.value("sd_count", g.sd_count);
    g.bs_count = jg.value("bs_count", g.bs_count);
    g.collection_count = jg.value("collection_count", g.collection_count);
    g.relay_count = jg.value("relay_count", g.relay_count);
    g.downlink_count = jg.value("downlink_count", g.downlink_count);
    g.corridor_start_x = jg.value("corridor_start_x", g.corridor_start_x);
    g.corridor_end_x = jg.value("corridor_end_x", g.corridor_end_x);
    g.band_jitter_m = jg.value("band_jitter_m", g.band_jitter_m);
    g.altitude_base_m = jg.value("altitude_base_m", g.altitude_base_m);
    g.altitude_jitter_m = jg.value("altitude_jitter_m", g.altitude_jitter_m);
    g.capability_min = jg.value("capability_min", g.capability_min);
    g.capability_max = jg.value("capability_max", g.capability_max);
    s.generator = g;
  }
  if (j.contains("traffic")) {
    const auto& jt = j["traffic"];
    s.gen.arrival_probability = jt.value("arrival_probability", s.gen.arrival_probability);
    s.gen.size_min_bits = jt.value("size_min_bits", s.gen.size_min_bits);
    s.gen.size_max_bits = jt.value("size_max_bits", s.gen.size_max_bits);
    s.gen.max_delay_s = jt.value("max_delay_s", s.gen.max_delay_s);
  }
}

void parse_env(const json& j, EnvConfig& e) {
  e.max_neighbor_slots = j.value("max_neighbor_slots", e.max_neighbor_slots);
  e.max_bs_slots = j.value("max_bs_slots", e.max_bs_slots);
  if (j.contains("reward")) {
    const auto& jr = j["reward"];
    const std::string mode = jr.value("mode", std::string("sherb"));
    if (mode == "base")
      e.reward.mode = RewardMode::Base;
    else if (mode == "sherb")
      e.reward.mode = RewardMode::Sherb;
    else
      throw BadConfig("unknown reward mode: " + mode);
    e.reward.sigma_hyper = jr.value("sigma", e.reward.sigma_hyper);
  }
  e.reward_scale = j.value("reward_scale", e.reward_scale);
  e.negate_rewards = j.value("negate_rewards", e.negate_rewards);
  e.drop_penalty = j.value("drop_penalty", e.drop_penalty);
  e.expiry_penalty = j.value("expiry_penalty", e.expiry_penalty);
  e.mobility_enabled = j.value("mobility_enabled", e.mobility_enabled);
  if (j.contains("scales")) {
    const auto& js = j["scales"];
    e.scales.position_m = js.value("position_m", e.scales.position_m);
    e.scales.bits = js.value("bits", e.scales.bits);
    e.scales.age_steps = js.value("age_steps", e.scales.age_steps);
    e.scales.queue_len = js.value("queue_len", e.scales.queue_len);
  }
  if (j.contains("ledger")) {
    const auto& jl = j["ledger"];
    e.ledger.enabled = jl.value("enabled", e.ledger.enabled);
    e.ledger.block_period_steps = jl.value("block_period_steps", e.ledger.block_period_steps);
    e.ledger.auth_period_steps = jl.value("auth_period_steps", e.ledger.auth_period_steps);
    e.ledger.status_period_steps = jl.value("status_period_steps", e.ledger.status_period_steps);
    e.ledger.committee_size = jl.value("committee_size", e.ledger.committee_size);
    e.ledger.gossip_fanout = jl.value("gossip_fanout", e.ledger.gossip_fanout);
    e.ledger.use_fast_crypto = jl.value("use_fast_crypto", e.ledger.use_fast_crypto);
  }
}

void parse_train(const json& j, TrainConfig& t) {
  t.learning_rate = j.value("learning_rate", t.learning_rate);
  t.gamma = j.value("gamma", t.gamma);
  t.batch = j.value("batch", t.batch);
  t.target_period = j.value("target_period", t.target_period);
  t.tau = j.value("tau", t.tau);
  t.eps_start = j.value("eps_start", t.eps_start);
  t.eps_end = j.value("eps_end", t.eps_end);
  t.eps_decay_fraction = j.value("eps_decay_fraction", t.eps_decay_fraction);
  t.episodes = j.value("episodes", t.episodes);
  t.steps_per_episode = j.value("steps_per_episode", t.steps_per_episode);
  t.buffer_capacity = j.value("buffer_capacity", t.buffer_capacity);
  t.hidden_units = j.value("hidden_units", t.hidden_units);
  t.hidden_layers = j.value("hidden_layers", t.hidden_layers);
  t.inject_per_episode = j.value("inject_per_episode", t.inject_per_episode);
  t.inject_max_delay_s = j.value("inject_max_delay_s", t.inject_max_delay_s);
  t.checkpoint_every = j.value("checkpoint_every", t.checkpoint_every);
  t.checkpoint_path = j.value("checkpoint_path", t.checkpoint_path);
  const std::string opt = j.value("optimizer", std::string("sgd"));
  if (opt == "sgd")
    t.optimizer = OptimizerKind::Sgd;
  else if (opt == "momentum")
    t.optimizer = OptimizerKind::Momentum;
  else if (opt == "adam")
    t.optimizer = OptimizerKind::Adam;
  else
    throw BadConfig("unknown optimizer: " + opt);
  const std::string sel = j.value("selector", std::string("online"));
  if (sel == "online")
    t.selector = TargetSelector::Online;
  else if (sel == "target")
    t.selector = TargetSelector::Target;
  else
    throw BadConfig("unknown selector: " + sel);
}

}  // namespace

ExperimentConfig parse_experiment_config(const std::string& text) {
  const json j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  ExperimentConfig cfg;
  if (j.contains("scenario")) parse_scenario(j["scenario"], cfg.scenario);
  if (j.contains("env")) parse_env(j["env"], cfg.env);
  if (j.contains("train")) parse_train(j["train"], cfg.train);
  if (j.contains("experiments")) {
    const auto& je = j["experiments"];
    if (je.contains("algorithms")) {
      cfg.algorithms.clear();
      for (const auto& a : je["algorithms"]) cfg.algorithms.push_back(a.get<std::string>());
    }
    if (je.contains("seeds")) {
      cfg.seeds.clear();
      for (const auto& s : je["seeds"]) cfg.seeds.push_back(s.get<std::uint64_t>());
    }
    if (je.contains("eval_loads")) {
      cfg.eval_loads.clear();
      for (const auto& l : je["eval_loads"]) cfg.eval_loads.push_back(l.get<int>());
    }
    cfg.eval_episodes_per_load = je.value("eval_episodes_per_load", cfg.eval_episodes_per_load);
    cfg.eval_horizon = je.value("eval_horizon", cfg.eval_horizon);
    cfg.eval_max_delay_s = je.value("eval_max_delay_s", cfg.eval_max_delay_s);
    cfg.out_dir = je.value("out_dir", cfg.out_dir);
    cfg.chain_steps = je.value("chain_steps", cfg.chain_steps);
  }
  if (j.contains("churn")) {
    for (const auto& c : j["churn"]) {
      ChurnEvent ev;
      ev.step = c.at("step").get<int>();
      const std::string kind = c.at("kind").get<std::string>();
      if (kind == "exit")
        ev.kind = ChurnEvent::Kind::Exit;
      else if (kind == "silence")
        ev.kind = ChurnEvent::Kind::Silence;
      else if (kind == "rejoin")
        ev.kind = ChurnEvent::Kind::Rejoin;
      else
        throw BadConfig("unknown churn kind: " + kind);
      ev.uav_ordinal = c.at("uav_ordinal").get<std::uint32_t>();
      cfg.churn.push_back(ev);
    }
  }
  if (j.contains("oracle")) {
    const auto& jo = j["oracle"];
    cfg.oracle_horizon = jo.value("horizon", cfg.oracle_horizon);
    cfg.oracle_episodes = jo.value("episodes", cfg.oracle_episodes);
    if (jo.contains("demands")) {
      for (const auto& d : jo["demands"]) {
        OracleDemand od;
        // Ordinals into the SD / BS lists; resolved once the world is built.
        od.source = NodeId{d.value("source_sd", 0u)};
        od.destination = NodeId{d.value("dest_bs", 0u)};
        od.size_bits = d.value("size_bits", od.size_bits);
        cfg.oracle_demands.push_back(od);
      }
    }
  }
  if (cfg.seeds.empty()) throw BadConfig("experiments.seeds must be nonempty");
  for (int l : cfg.eval_loads)
    if (l <= 0) throw BadConfig("eval_loads must be positive");
  return cfg;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  return parse_experiment_config(read_text_file(path));
}

std::string config_template() {
  return R"(// lainsim experiment configuration (JSON with // comments)
{
  "scenario": {
    "topology": {
      "area_x_m": 1500.0,            // simulation area
      "area_y_m": 500.0,
      "altitude_min_m": 200.0,       // UAV altitude band
      "altitude_max_m": 400.0,
      "d_min_m": 10.0,               // UAV safety separation
      "d_max_uav_m": 100.0,          // UAV-UAV radio range
      "d_max_ground_m": 500.0,       // SD-UAV and UAV-BS range
      "max_step_displacement_m": 8.0 // per-step mobility bound
    },
    "channel": {
      "carrier_frequency_hz": 2.4e9,
      "light_speed_mps": 3.0e8,
      "rho1": 5.0188,
      "rho2": 0.3511,
      "excess_los_db": 0.1,
      "excess_nlos_db": 21.0,
      "noise_power_dbm": -110.0,
      "tx_power_dbm": 40.0
    },
    "queue_capacity": 50,
    "node_bandwidth_hz": 2.0e6,
    // Either list nodes explicitly ...
    // "nodes": [{"kind": "uav", "cluster": "relay", "position": [100, 250, 210], "capability": 3.0}],
    // ... or let the corridor generator place them:
    "generator": {
      "sd_count": 2, "bs_count": 2,
      "collection_count": 3, "relay_count": 4, "downlink_count": 3,
      "corridor_start_x": 50.0, "corridor_end_x": 700.0,
      "band_jitter_m": 20.0,
      "altitude_base_m": 210.0, "altitude_jitter_m": 20.0,
      "capability_min": 1.0, "capability_max": 10.0
    },
    "traffic": {
      "arrival_probability": 0.25,   // per SD per step
      "size_min_bits": 400e3,
      "size_max_bits": 600e3,
      "max_delay_s": 1e9
    }
  },
  "env": {
    "max_neighbor_slots": 6,
    "max_bs_slots": 2,
    "reward": {"mode": "sherb", "sigma": 0.5},
    "reward_scale": 1.0,
    "negate_rewards": false,
    "drop_penalty": -1.0,
    "expiry_penalty": -1.0,
    "mobility_enabled": true,
    "ledger": {
      "enabled": false,
      "block_period_steps": 5,
      "auth_period_steps": 10,
      "status_period_steps": 5,
      "committee_size": 4,
      "gossip_fanout": 2
    }
  },
  "train": {
    "learning_rate": 1e-3,
    "gamma": 0.95,
    "batch": 64,
    "target_period": 100,
    "tau": 0.01,
    "eps_start": 1.0, "eps_end": 0.05, "eps_decay_fraction": 0.5,
    "episodes": 600,
    "steps_per_episode": 30,
    "buffer_capacity": 20000,
    "hidden_units": 64, "hidden_layers": 2,
    "optimizer": "sgd",              // sgd | momentum | adam
    "selector": "online"             // double-DQN action selection parameters
  },
  "experiments": {
    "algorithms": ["sherb-maddqn", "sherb-madqn", "hherb-maddqn", "hherb-madqn"],
    "seeds": [1, 2, 3, 4, 5],
    "eval_loads": [2, 4, 6, 8],
    "eval_episodes_per_load": 20,
    "eval_horizon": 80,
    "eval_max_delay_s": 1e9,
    "out_dir": "out",
    "chain_steps": 60
  },
  // Scripted membership churn for chain scenarios.
  "churn": [
    {"step": 20, "kind": "silence", "uav_ordinal": 4},
    {"step": 35, "kind": "exit", "uav_ordinal": 7}
  ],
  "oracle": {
    "horizon": 8,
    "episodes": 100,
    "demands": [{"source_sd": 0, "dest_bs": 0, "size_bits": 500e3}]
  }
}
)";
}

}  // namespace lain
