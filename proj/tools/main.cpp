#include <cstdio>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "lainsim/config.hpp"
#include "lainsim/experiments.hpp"
#include "lainsim/learner.hpp"
#include "lainsim/oracle.hpp"

namespace fs = std::filesystem;
using namespace lain;

namespace {

int cmd_run(const std::string& config_path, const std::string& out_override,
            std::uint64_t seed_override, bool emit_plots) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (seed_override != 0) cfg.seeds = {seed_override};

  const MetricsTable table = run_matrix(cfg, /*verbose=*/true);
  if (emit_plots) emit_plot_data(table, cfg.out_dir);

  int failed = 0;
  for (const auto& r : table.runs) {
    if (r.failed) {
      ++failed;
      std::fprintf(stderr, "FAILED %s seed %llu: %s\n", r.algorithm.c_str(),
                   static_cast<unsigned long long>(r.seed), r.error.c_str());
    }
  }
  std::printf("%zu runs, %d failed, output in %s\n", table.runs.size(), failed,
              cfg.out_dir.c_str());
  return failed == 0 ? 0 : 1;
}

int cmd_oracle_eval(const std::string& config_path, const std::string& checkpoint,
                    int episodes_override) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (episodes_override > 0) cfg.oracle_episodes = episodes_override;

  Environment env(cfg.scenario, cfg.env, derive_seed(cfg.seeds.front(), "env"));
  Snapshot snap = snapshot_from_env(env, cfg.oracle_horizon);
  snap.demands.clear();
  const auto sds = env.topology().sensor_devices();
  const auto bss = env.topology().base_stations();
  for (const auto& od : cfg.oracle_demands) {
    if (od.source.index >= sds.size() || od.destination.index >= bss.size())
      throw BadConfig("oracle demand ordinal out of range");
    snap.demands.push_back({sds[od.source.index], bss[od.destination.index],
                            od.size_bits});
  }
  if (snap.demands.empty())
    snap.demands.push_back({sds.front(), bss.front(), 500e3});

  std::map<NodeId, ValueNet> policies;
  if (!checkpoint.empty()) {
    policies = load_checkpoint(checkpoint);
    std::printf("loaded policies from %s\n", checkpoint.c_str());
  } else {
    std::printf("training %d episodes...\n", cfg.train.episodes);
    TrainResult result = train(env, cfg.train, derive_seed(cfg.seeds.front(), "agent"));
    policies = std::move(result.policies);
  }

  const auto policy = [&policies](const Environment& e) {
    return greedy_actions(e, policies);
  };
  const GapReport gap = policy_gap(policy, snap, cfg.oracle_episodes,
                                   derive_seed(cfg.seeds.front(), "gap-eval"),
                                   cfg.scenario.gen.size_min_bits,
                                   cfg.scenario.gen.size_max_bits);
  std::printf("policy_gap: ratio=%.6f policy=%.6fs oracle=%.6fs optimal=%d/%d undelivered=%d\n",
              gap.ratio, gap.mean_policy_delay_s, gap.mean_oracle_delay_s,
              gap.optimal_path_matches, gap.episodes, gap.undelivered);
  return gap.ratio <= 1.15 ? 0 : 1;
}

int cmd_chain_test(const std::string& config_path, const std::string& out_path) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  const ChainScenarioReport report = chain_scenarios(cfg);
  const std::string text = chain_report_json(report);
  if (!out_path.empty()) {
    write_text_file(out_path, text);
    std::printf("report written to %s\n", out_path.c_str());
  } else {
    std::fputs(text.c_str(), stdout);
  }
  bool ok = report.chain_valid && report.consensus_failures == 0;
  for (const auto& c : report.fault_cases)
    if (c.conflicting) ok = false;
  return ok ? 0 : 1;
}

int cmd_export(const std::string& config_path, const std::string& dir) {
  ExperimentConfig cfg = load_experiment_config(config_path);
  if (!dir.empty()) cfg.out_dir = dir;
  // Reuses the resume path: cached runs are loaded, nothing is recomputed.
  const MetricsTable table = run_matrix(cfg, /*verbose=*/false);
  emit_plot_data(table, cfg.out_dir);
  std::printf("plot data written to %s\n", cfg.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"UAV relay-network routing simulator with blockchain membership"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool no_plots = false;
  auto* run = app.add_subcommand("run", "train and evaluate the algorithm matrix");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--out", out_dir, "output directory override");
  run->add_option("--seed", seed, "single-seed override");
  run->add_flag("--no-plots", no_plots, "skip plot-data emission");

  std::string oe_config, oe_checkpoint;
  int oe_episodes = 0;
  auto* oracle_eval =
      app.add_subcommand("oracle-eval", "compare a policy against the exact solver");
  oracle_eval->add_option("config", oe_config, "config file")->required();
  oracle_eval->add_option("--checkpoint", oe_checkpoint, "policy checkpoint to load");
  oracle_eval->add_option("--episodes", oe_episodes, "evaluation episodes");

  std::string ct_config, ct_out;
  auto* chain_test =
      app.add_subcommand("chain-test", "ledger fault-injection scenarios");
  chain_test->add_option("config", ct_config, "config file")->required();
  chain_test->add_option("--out", ct_out, "write the JSON report here");

  std::string ex_config, ex_dir;
  auto* exp = app.add_subcommand("export", "re-emit plot CSVs from completed runs");
  exp->add_option("config", ex_config, "config file")->required();
  exp->add_option("--dir", ex_dir, "output directory override");

  auto* tmpl = app.add_subcommand("template", "print a commented config template");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, out_dir, seed, !no_plots);
    if (oracle_eval->parsed()) return cmd_oracle_eval(oe_config, oe_checkpoint, oe_episodes);
    if (chain_test->parsed()) return cmd_chain_test(ct_config, ct_out);
    if (exp->parsed()) return cmd_export(ex_config, ex_dir);
    if (tmpl->parsed()) {
      std::fputs(config_template().c_str(), stdout);
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
