#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "uavsec/scenario.hpp"

namespace uavsec::cli {

struct ConfigOptions {
  std::string config_path;               // empty: built-in defaults
  std::vector<std::string> overrides;    // dotted.key=value
  std::optional<std::string> mode;
  std::optional<int> episodes;
  std::optional<std::uint64_t> seed;
  std::string out = "runs";
};

/// Defaults or file, then --set overrides, then --mode/--episodes/--seed.
SimConfig resolve_config(const ConfigOptions& opts);

/// `<MODE>-seed<seed>-<first 8 hex of the config hash>`.
std::string run_id(const SimConfig& cfg);

struct TrainOutcome {
  std::string run_dir;
  nlohmann::json manifest;
};

/// Trains and writes metrics.csv, losses.csv, trajectories.csv (greedy
/// rollout of the final policy), checkpoints/ and manifest.json.
TrainOutcome cmd_train(const ConfigOptions& opts, std::ostream& log);

struct EvalRow {
  std::uint64_t seed = 0;
  double total_fst_mbit = 0.0;
  double total_st_mbit = 0.0;
  double avg_fairness = 0.0;
  std::vector<char> arrived;  // per agent
};

struct EvalSummary {
  std::vector<EvalRow> rows;
  // mean and population std over seeds
  double fst_mean = 0.0, fst_std = 0.0;
  double st_mean = 0.0, st_std = 0.0;
  double fairness_mean = 0.0, fairness_std = 0.0;
  std::vector<double> arrival_rate;  // per agent
};

/// Greedy rollouts of a checkpoint. Each seed perturbs the training user
/// layout by N(0, jitter_m) per coordinate (clamped to the user area) while
/// keeping the training cluster membership. Writes eval.csv and
/// eval_summary.csv into the checkpoint directory.
EvalSummary cmd_eval(const std::string& checkpoint_dir, const std::vector<std::uint64_t>& seeds, double jitter_m,
                     std::ostream& log);

/// Places and clusters users; writes clusters.csv and ess.csv under
/// `<out>/CLUSTER-seed<seed>-<hash8>/`. Returns that directory.
std::string cmd_cluster(const ConfigOptions& opts, std::ostream& log);

/// Writes `<run_dir>/export_<what>.csv` and returns its path.
///   trajectories  slot,uav,x,y
///   speeds        slot,uav,speed
///   scheduling    slot,cluster,user,secrecy_rate,fairness_factor,fst
///   losses        episode,agent,actor_loss,critic_loss
std::string cmd_export(const std::string& run_dir, const std::string& what);

/// Command-line entry point. Returns the process exit code.
int run(int argc, char** argv);

}  // namespace uavsec::cli
