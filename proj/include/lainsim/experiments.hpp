#pragma once

#include <string>
#include <vector>

#include "lainsim/env.hpp"
#include "lainsim/learner.hpp"
#include "lainsim/oracle.hpp"

namespace lain {

struct AlgorithmSpec {
  std::string name;
  RewardMode reward = RewardMode::Sherb;
  BufferMode buffer = BufferMode::Sherb;
  bool double_dqn = true;
};

// The four-way comparison matrix: {SHERB, HHERB} x {double DQN, DQN}.
AlgorithmSpec algorithm_by_name(const std::string& name);

struct ExperimentConfig {
  ScenarioSpec scenario;
  EnvConfig env;
  TrainConfig train;
  std::vector<std::string> algorithms = {"sherb-maddqn", "sherb-madqn",
                                         "hherb-maddqn", "hherb-madqn"};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::vector<int> eval_loads = {2, 4, 6, 8};
  int eval_episodes_per_load = 20;
  int eval_horizon = 80;
  double eval_max_delay_s = 1e9;
  std::string out_dir = "out";
  std::vector<ChurnEvent> churn;
  int chain_steps = 60;
  // oracle-eval settings
  std::vector<OracleDemand> oracle_demands;
  int oracle_horizon = 8;
  int oracle_episodes = 100;
};

struct EvalRow {
  int load = 0;
  double mean_delay_s = 0.0;  // over delivered demands
  double mean_hops = 0.0;
  double delivery_rate = 0.0;
  double drop_rate = 0.0;
  std::uint64_t delivered = 0;
  std::uint64_t generated = 0;
};

struct RunRecord {
  std::string algorithm;
  std::uint64_t seed = 0;
  std::vector<EpisodeRow> training;
  std::vector<EvalRow> eval;
  std::uint64_t gen_hash = 0;
  bool failed = false;
  std::string error;

  double overall_mean_delay() const;
};

struct MetricsTable {
  std::vector<RunRecord> runs;
  const RunRecord* find(const std::string& algo, std::uint64_t seed) const;
};

// Trains and evaluates every (algorithm, seed) cell with paired environment
// streams; persists each run incrementally and resumes from the manifest.
MetricsTable run_matrix(const ExperimentConfig& cfg, bool verbose = false);

// Greedy evaluation of trained policies at one demand load.
EvalRow evaluate_policy(Environment& env, const std::map<NodeId, ValueNet>& policies,
                        int load, int episodes, int horizon, double max_delay_s,
                        int episode_offset);

// Straight-line-progress heuristic used by ledger scenarios (no training).
std::map<DemandId, NodeId> heuristic_actions(const Environment& env);

struct FaultCase {
  std::string name;
  bool committed = false;
  bool conflicting = false;
  int view_changes = 0;
};

struct ChainScenarioReport {
  // integrated run with scripted churn
  int steps = 0;
  int blocks_committed = 0;
  int consensus_failures = 0;
  int view_changes = 0;
  std::size_t revocations = 0;
  int demands_redistributed = 0;
  int demands_dropped_on_churn = 0;
  bool chain_valid = false;
  std::size_t chain_length = 0;
  double consensus_success_rate = 1.0;
  // replica-level fault cases
  std::vector<FaultCase> fault_cases;
  // routing impact of churn (paired seeds)
  double mean_delay_no_churn_s = 0.0;
  double mean_delay_churn_s = 0.0;
  double delivery_rate_no_churn = 0.0;
  double delivery_rate_churn = 0.0;
};

ChainScenarioReport chain_scenarios(const ExperimentConfig& cfg);
std::string chain_report_json(const ChainScenarioReport& r);

// One CSV per figure analog, with per-run columns and mean/std aggregates.
void emit_plot_data(const MetricsTable& table, const std::string& out_dir);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace lain
