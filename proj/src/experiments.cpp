#include "lainsim/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace lain {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string run_key(const std::string& algo, std::uint64_t seed) {
  return algo + ":s" + std::to_string(seed);
}

json run_to_json(const RunRecord& r) {
  json j;
  j["algorithm"] = r.algorithm;
  j["seed"] = r.seed;
  j["gen_hash"] = r.gen_hash;
  j["failed"] = r.failed;
  j["error"] = r.error;
  auto& tr = j["training"] = json::array();
  for (const auto& row : r.training)
    tr.push_back({{"episode", row.episode},
                  {"reward", row.cumulative_reward},
                  {"loss", row.mean_loss},
                  {"epsilon", row.epsilon}});
  auto& ev = j["eval"] = json::array();
  for (const auto& row : r.eval)
    ev.push_back({{"load", row.load},
                  {"mean_delay_s", row.mean_delay_s},
                  {"mean_hops", row.mean_hops},
                  {"delivery_rate", row.delivery_rate},
                  {"drop_rate", row.drop_rate},
                  {"delivered", row.delivered},
                  {"generated", row.generated}});
  return j;
}

RunRecord run_from_json(const json& j) {
  RunRecord r;
  r.algorithm = j.at("algorithm").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.gen_hash = j.value("gen_hash", 0ULL);
  r.failed = j.value("failed", false);
  r.error = j.value("error", std::string{});
  for (const auto& row : j.value("training", json::array())) {
    EpisodeRow e;
    e.episode = row.at("episode").get<int>();
    e.cumulative_reward = row.at("reward").get<double>();
    e.mean_loss = row.at("loss").get<double>();
    e.epsilon = row.at("epsilon").get<double>();
    r.training.push_back(e);
  }
  for (const auto& row : j.value("eval", json::array())) {
    EvalRow e;
    e.load = row.at("load").get<int>();
    e.mean_delay_s = row.at("mean_delay_s").get<double>();
    e.mean_hops = row.at("mean_hops").get<double>();
    e.delivery_rate = row.at("delivery_rate").get<double>();
    e.drop_rate = row.at("drop_rate").get<double>();
    e.delivered = row.at("delivered").get<std::uint64_t>();
    e.generated = row.at("generated").get<std::uint64_t>();
    r.eval.push_back(e);
  }
  return r;
}

void write_run_csvs(const std::string& out_dir, const RunRecord& r) {
  std::string training = "episode,cumulative_reward,mean_loss,epsilon\n";
  for (const auto& row : r.training)
    training += std::to_string(row.episode) + "," + fmt(row.cumulative_reward) +
                "," + fmt(row.mean_loss) + "," + fmt(row.epsilon) + "\n";
  write_text_file(out_dir + "/training_" + r.algorithm + "_s" +
                      std::to_string(r.seed) + ".csv",
                  training);

  std::string eval = "load,mean_delay_s,mean_hops,delivery_rate,drop_rate,delivered,generated\n";
  for (const auto& row : r.eval)
    eval += std::to_string(row.load) + "," + fmt(row.mean_delay_s) + "," +
            fmt(row.mean_hops) + "," + fmt(row.delivery_rate) + "," +
            fmt(row.drop_rate) + "," + std::to_string(row.delivered) + "," +
            std::to_string(row.generated) + "\n";
  write_text_file(out_dir + "/eval_" + r.algorithm + "_s" +
                      std::to_string(r.seed) + ".csv",
                  eval);
}

}  // namespace

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoFailure("cannot write " + path);
  out << content;
  if (!out) throw IoFailure("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoFailure("cannot read " + path);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

AlgorithmSpec algorithm_by_name(const std::string& name) {
  if (name == "sherb-maddqn") return {name, RewardMode::Sherb, BufferMode::Sherb, true};
  if (name == "sherb-madqn") return {name, RewardMode::Sherb, BufferMode::Sherb, false};
  if (name == "hherb-maddqn") return {name, RewardMode::Base, BufferMode::Hherb, true};
  if (name == "hherb-madqn") return {name, RewardMode::Base, BufferMode::Hherb, false};
  throw BadConfig("unknown algorithm: " + name);
}

double RunRecord::overall_mean_delay() const {
  double total = 0.0;
  std::uint64_t delivered = 0;
  for (const auto& row : eval) {
    total += row.mean_delay_s * static_cast<double>(row.delivered);
    delivered += row.delivered;
  }
  return delivered ? total / static_cast<double>(delivered) : 0.0;
}

const RunRecord* MetricsTable::find(const std::string& algo, std::uint64_t seed) const {
  for (const auto& r : runs)
    if (r.algorithm == algo && r.seed == seed) return &r;
  return nullptr;
}

EvalRow evaluate_policy(Environment& env, const std::map<NodeId, ValueNet>& policies,
                        int load, int episodes, int horizon, double max_delay_s,
                        int episode_offset) {
  EvalRow row;
  row.load = load;
  double delay_sum = 0.0;
  double hop_sum = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    env.reset(episode_offset + ep);
    env.inject_demands(load, max_delay_s);
    for (int t = 0; t < horizon; ++t) {
      if (env.traffic().total_queued() == 0) break;
      env.step(greedy_actions(env, policies));
    }
    for (const auto& [id, d] : env.traffic().demands()) {
      (void)id;
      ++row.generated;
      if (d.state == DemandState::Delivered) {
        ++row.delivered;
        delay_sum += d.accumulated_delay_s;
        hop_sum += d.hop_count;
      } else if (d.state == DemandState::Dropped) {
        row.drop_rate += 1.0;
      }
    }
  }
  row.mean_delay_s = row.delivered ? delay_sum / static_cast<double>(row.delivered) : 0.0;
  row.mean_hops = row.delivered ? hop_sum / static_cast<double>(row.delivered) : 0.0;
  row.delivery_rate =
      row.generated ? static_cast<double>(row.delivered) / row.generated : 0.0;
  row.drop_rate = row.generated ? row.drop_rate / static_cast<double>(row.generated) : 0.0;
  return row;
}

MetricsTable run_matrix(const ExperimentConfig& cfg, bool verbose) {
  MetricsTable table;
  fs::create_directories(cfg.out_dir);
  const std::string manifest_path = cfg.out_dir + "/manifest.json";
  json manifest = json::object();
  manifest["completed"] = json::array();
  if (fs::exists(manifest_path)) manifest = json::parse(read_text_file(manifest_path));

  auto completed = [&](const std::string& key) {
    for (const auto& k : manifest["completed"])
      if (k.get<std::string>() == key) return true;
    return false;
  };

  for (std::uint64_t seed : cfg.seeds) {
    for (const std::string& name : cfg.algorithms) {
      const std::string key = run_key(name, seed);
      const std::string run_path = cfg.out_dir + "/run_" + name + "_s" +
                                   std::to_string(seed) + ".json";
      if (completed(key) && fs::exists(run_path)) {
        table.runs.push_back(run_from_json(json::parse(read_text_file(run_path))));
        if (verbose) std::printf("resume: %s (cached)\n", key.c_str());
        continue;
      }

      const AlgorithmSpec spec = algorithm_by_name(name);
      RunRecord record;
      record.algorithm = name;
      record.seed = seed;
      try {
        EnvConfig env_cfg = cfg.env;
        env_cfg.reward.mode = spec.reward;
        TrainConfig train_cfg = cfg.train;
        train_cfg.buffer_mode = spec.buffer;
        train_cfg.double_dqn = spec.double_dqn;

        Environment env(cfg.scenario, env_cfg, derive_seed(seed, "env"));
        TrainResult result = train(env, train_cfg, derive_seed(seed, "agent"));
        record.training = result.series;
        record.gen_hash = result.env_generation_hash;

        for (int load : cfg.eval_loads) {
          record.eval.push_back(evaluate_policy(
              env, result.policies, load, cfg.eval_episodes_per_load,
              cfg.eval_horizon, cfg.eval_max_delay_s, 1'000'000 + load * 10'000));
        }
      } catch (const std::exception& e) {
        record.failed = true;
        record.error = e.what();
      }

      write_text_file(run_path, run_to_json(record).dump(2) + "\n");
      write_run_csvs(cfg.out_dir, record);
      manifest["completed"].push_back(key);
      write_text_file(manifest_path, manifest.dump(2) + "\n");
      if (verbose)
        std::printf("run: %s %s\n", key.c_str(), record.failed ? "FAILED" : "ok");
      table.runs.push_back(std::move(record));
    }
  }
  return table;
}

std::map<DemandId, NodeId> heuristic_actions(const Environment& env) {
  std::map<DemandId, NodeId> actions;
  const auto& topo = env.topology();
  for (NodeId u : topo.active_uavs()) {
    for (DemandId r : env.traffic().queue_of(u)) {
      const ActionSet as = env.action_set(u, r);
      if (as.empty()) continue;
      if (as.destination_bs) {
        actions[r] = *as.destination_bs;
        continue;
      }
      const Vec3 dest = topo.node(env.traffic().demand(r).destination).position;
      NodeId best = as.neighbor_slots.front();
      double best_d = distance(topo.node(best).position, dest);
      for (NodeId cand : as.neighbor_slots) {
        const double d = distance(topo.node(cand).position, dest);
        if (d < best_d || (d == best_d && cand < best)) {
          best = cand;
          best_d = d;
        }
      }
      actions[r] = best;
    }
  }
  return actions;
}

namespace {

EvalRow churn_probe(const ExperimentConfig& cfg, bool with_churn) {
  EnvConfig env_cfg = cfg.env;
  env_cfg.ledger.enabled = true;
  ScenarioSpec scenario = cfg.scenario;
  if (scenario.gen.arrival_probability <= 0.0) scenario.gen.arrival_probability = 0.3;
  Environment env(scenario, env_cfg, derive_seed(cfg.seeds.front(), "chain-env"));
  if (with_churn) env.schedule_churn(cfg.churn);
  env.reset(0);
  for (int t = 0; t < cfg.chain_steps; ++t) env.step(heuristic_actions(env));

  EvalRow row;
  double delay_sum = 0.0;
  for (const auto& [id, d] : env.traffic().demands()) {
    (void)id;
    ++row.generated;
    if (d.state == DemandState::Delivered) {
      ++row.delivered;
      delay_sum += d.accumulated_delay_s;
    }
  }
  row.mean_delay_s = row.delivered ? delay_sum / static_cast<double>(row.delivered) : 0.0;
  row.delivery_rate =
      row.generated ? static_cast<double>(row.delivered) / row.generated : 0.0;
  return row;
}

}  // namespace

ChainScenarioReport chain_scenarios(const ExperimentConfig& cfg) {
  ChainScenarioReport report;
  report.steps = cfg.chain_steps;

  // Integrated run: scripted churn, consensus every block period.
  {
    EnvConfig env_cfg = cfg.env;
    env_cfg.ledger.enabled = true;
    ScenarioSpec scenario = cfg.scenario;
    if (scenario.gen.arrival_probability <= 0.0) scenario.gen.arrival_probability = 0.3;
    Environment env(scenario, env_cfg, derive_seed(cfg.seeds.front(), "chain-env"));
    env.schedule_churn(cfg.churn);
    env.reset(0);
    for (int t = 0; t < cfg.chain_steps; ++t) env.step(heuristic_actions(env));

    const auto& cr = env.chain_report();
    report.blocks_committed = cr.blocks_committed;
    report.consensus_failures = cr.consensus_failures;
    report.view_changes = cr.view_changes;
    report.revocations = cr.revoked.size();
    report.demands_redistributed = cr.demands_redistributed;
    report.demands_dropped_on_churn = cr.demands_dropped_on_churn;
    report.chain_length = env.chain().size();
    const int attempts = cr.blocks_committed + cr.consensus_failures;
    report.consensus_success_rate =
        attempts ? static_cast<double>(cr.blocks_committed) / attempts : 1.0;
    if (env.membership()) {
      Sha256Crypto sha;
      FastCrypto fast;
      const CryptoSuite& crypto =
          env_cfg.ledger.use_fast_crypto ? static_cast<const CryptoSuite&>(fast)
                                         : static_cast<const CryptoSuite&>(sha);
      const int f = (static_cast<int>(env.committee().size()) - 1) / 3;
      report.chain_valid =
          verify_chain(env.chain(), crypto, env.membership()->key_registry(), f).valid;
    }
  }

  // Replica-level fault cases at n = 4.
  {
    Sha256Crypto crypto;
    Block proposal;
    proposal.height = 1;
    proposal.proposer = NodeId{0};
    proposal.payload_hash = crypto.digest(Bytes{1, 2, 3});

    for (int mute = 0; mute < 4; ++mute) {
      auto outcome = pbft_round(4, crypto, proposal, {{mute, PbftFault::Mute, {}}});
      report.fault_cases.push_back({"mute replica " + std::to_string(mute),
                                    outcome.committed, outcome.conflicting_commits,
                                    static_cast<int>(outcome.max_view)});
    }
    auto two_mute =
        pbft_round(4, crypto, proposal,
                   {{1, PbftFault::Mute, {}}, {2, PbftFault::Mute, {}}}, {}, 80);
    report.fault_cases.push_back({"two mute replicas (f exceeded)", two_mute.committed,
                                  two_mute.conflicting_commits,
                                  static_cast<int>(two_mute.max_view)});
  }

  // Routing impact of churn, paired streams.
  const EvalRow base = churn_probe(cfg, false);
  const EvalRow churned = churn_probe(cfg, true);
  report.mean_delay_no_churn_s = base.mean_delay_s;
  report.mean_delay_churn_s = churned.mean_delay_s;
  report.delivery_rate_no_churn = base.delivery_rate;
  report.delivery_rate_churn = churned.delivery_rate;
  return report;
}

std::string chain_report_json(const ChainScenarioReport& r) {
  json j;
  j["steps"] = r.steps;
  j["blocks_committed"] = r.blocks_committed;
  j["consensus_failures"] = r.consensus_failures;
  j["consensus_success_rate"] = r.consensus_success_rate;
  j["view_changes"] = r.view_changes;
  j["revocations"] = r.revocations;
  j["demands_redistributed"] = r.demands_redistributed;
  j["demands_dropped_on_churn"] = r.demands_dropped_on_churn;
  j["chain_valid"] = r.chain_valid;
  j["chain_length"] = r.chain_length;
  auto& cases = j["fault_cases"] = json::array();
  for (const auto& c : r.fault_cases)
    cases.push_back({{"name", c.name},
                     {"committed", c.committed},
                     {"conflicting", c.conflicting},
                     {"view_changes", c.view_changes}});
  j["mean_delay_no_churn_s"] = r.mean_delay_no_churn_s;
  j["mean_delay_churn_s"] = r.mean_delay_churn_s;
  j["delivery_rate_no_churn"] = r.delivery_rate_no_churn;
  j["delivery_rate_churn"] = r.delivery_rate_churn;
  return j.dump(2) + "\n";
}

namespace {

struct SeriesSpec {
  std::string file;
  std::string x_name;
  // extracts (x, value) pairs from a run
  std::function<std::vector<std::pair<double, double>>(const RunRecord&)> extract;
};

void emit_series(const MetricsTable& table, const std::string& out_dir,
                 const SeriesSpec& spec,
                 const std::vector<std::string>& algorithms) {
  // Collect the x grid.
  std::vector<double> grid;
  for (const auto& r : table.runs)
    for (const auto& [x, v] : spec.extract(r)) {
      (void)v;
      if (std::find(grid.begin(), grid.end(), x) == grid.end()) grid.push_back(x);
    }
  std::sort(grid.begin(), grid.end());

  std::string header = spec.x_name;
  std::vector<const RunRecord*> cols;
  for (const auto& algo : algorithms)
    for (const auto& r : table.runs)
      if (r.algorithm == algo && !r.failed) {
        header += "," + r.algorithm + "_s" + std::to_string(r.seed);
        cols.push_back(&r);
      }
  for (const auto& algo : algorithms) header += "," + algo + "_mean," + algo + "_std";
  header += "\n";

  std::string body;
  for (double x : grid) {
    body += fmt(x);
    std::map<std::string, std::vector<double>> per_algo;
    for (const RunRecord* r : cols) {
      double v = std::nan("");
      for (const auto& [xx, vv] : spec.extract(*r))
        if (xx == x) v = vv;
      body += ",";
      if (!std::isnan(v)) {
        body += fmt(v);
        per_algo[r->algorithm].push_back(v);
      }
    }
    for (const auto& algo : algorithms) {
      const auto& vals = per_algo[algo];
      if (vals.empty()) {
        body += ",,";
        continue;
      }
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      const double sd = vals.size() > 1 ? std::sqrt(var / (vals.size() - 1)) : 0.0;
      body += "," + fmt(mean) + "," + fmt(sd);
    }
    body += "\n";
  }
  write_text_file(out_dir + "/" + spec.file, header + body);
}

}  // namespace

void emit_plot_data(const MetricsTable& table, const std::string& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> algorithms;
  for (const auto& r : table.runs)
    if (std::find(algorithms.begin(), algorithms.end(), r.algorithm) ==
        algorithms.end())
      algorithms.push_back(r.algorithm);

  emit_series(table, out_dir,
              {"reward_vs_episode.csv", "episode",
               [](const RunRecord& r) {
                 std::vector<std::pair<double, double>> out;
                 for (const auto& e : r.training)
                   out.push_back({static_cast<double>(e.episode), e.cumulative_reward});
                 return out;
               }},
              algorithms);
  emit_series(table, out_dir,
              {"loss_vs_episode.csv", "episode",
               [](const RunRecord& r) {
                 std::vector<std::pair<double, double>> out;
                 for (const auto& e : r.training)
                   out.push_back({static_cast<double>(e.episode), e.mean_loss});
                 return out;
               }},
              algorithms);
  emit_series(table, out_dir,
              {"delay_vs_load.csv", "load",
               [](const RunRecord& r) {
                 std::vector<std::pair<double, double>> out;
                 for (const auto& e : r.eval)
                   out.push_back({static_cast<double>(e.load), e.mean_delay_s});
                 return out;
               }},
              algorithms);
  emit_series(table, out_dir,
              {"hops_vs_load.csv", "load",
               [](const RunRecord& r) {
                 std::vector<std::pair<double, double>> out;
                 for (const auto& e : r.eval)
                   out.push_back({static_cast<double>(e.load), e.mean_hops});
                 return out;
               }},
              algorithms);
}

}  // namespace lain
