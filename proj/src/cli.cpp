#include "uavsec/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <stdexcept>

#include <CLI11.hpp>

#include "uavsec/clustering.hpp"
#include "uavsec/csv.hpp"
#include "uavsec/env.hpp"
#include "uavsec/maddpg.hpp"

namespace uavsec::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(p.string() + ": " + e.what());
  }
}

void write_json(const fs::path& p, const json& doc) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << doc.dump(2) << "\n";
}

// Empty cell for NaN so that loss columns stay numeric where defined.
CsvCell number_or_blank(double v) {
  if (std::isnan(v)) return std::string();
  return v;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double pop_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

std::string agent_name(const SimConfig& cfg, int i) {
  return (cfg.has_jammer() && i == cfg.agent_count() - 1) ? std::string("jammer") : "uav" + std::to_string(i);
}

void save_checkpoint(const Maddpg& agents, const SimConfig& cfg, int episodes, const fs::path& dir) {
  agents.save(dir.string());
  json m;
  m["seed"] = cfg.seed;
  m["mode"] = std::string(to_string(cfg.mode));
  m["config_hash"] = config_hash(cfg);
  m["episodes"] = episodes;
  m["config"] = to_json(cfg);
  write_json(dir / "manifest.json", m);
}

json stats_json(const EpisodeStats& s) {
  json j;
  j["slots"] = s.slots();
  j["total_fst_mbit"] = s.total_fst_mbit();
  j["total_st_mbit"] = s.total_st_mbit();
  j["avg_fairness"] = s.average_fairness();
  j["avg_cum_reward"] = s.average_cumulative_reward();
  j["avg_speed"] = s.average_speed();
  j["accel_violation_rate"] = s.accel_violation_rate();
  j["dist_violation_rate"] = s.separation_violation_rate();
  std::vector<int> arrived(s.arrived().begin(), s.arrived().end());
  j["arrived"] = arrived;
  return j;
}

}  // namespace

SimConfig resolve_config(const ConfigOptions& opts) {
  std::vector<std::string> overrides = opts.overrides;
  if (opts.mode) overrides.push_back("mode=\"" + *opts.mode + "\"");
  if (opts.episodes) overrides.push_back("training.episodes=" + std::to_string(*opts.episodes));
  if (opts.seed) overrides.push_back("seed=" + std::to_string(*opts.seed));
  return load_config_file(opts.config_path, overrides);
}

std::string run_id(const SimConfig& cfg) {
  return std::string(to_string(cfg.mode)) + "-seed" + std::to_string(cfg.seed) + "-" + config_hash(cfg).substr(0, 8);
}

TrainOutcome cmd_train(const ConfigOptions& opts, std::ostream& log) {
  const SimConfig cfg = resolve_config(opts);
  const fs::path dir = fs::path(opts.out) / run_id(cfg);
  fs::create_directories(dir / "checkpoints");
  const std::string started = utc_now();

  CsvWriter metrics((dir / "metrics.csv").string(),
                    {"episode", "avg_cum_reward", "avg_cum_st", "avg_fairness", "fst", "avg_speed",
                     "accel_violation_rate", "dist_violation_rate", "actor_loss", "critic_loss"});
  CsvWriter losses((dir / "losses.csv").string(), {"episode", "agent", "actor_loss", "critic_loss"});

  SecureUavEnv env = SecureUavEnv::build(cfg);
  TrainHooks hooks;
  hooks.on_episode = [&](const EpisodeLog& e) {
    metrics.row({static_cast<long long>(e.episode), e.avg_cum_reward, e.avg_cum_st_mbit, e.avg_fairness, e.fst_mbit,
                 e.avg_speed, e.accel_violation_rate, e.dist_violation_rate, number_or_blank(e.actor_loss),
                 number_or_blank(e.critic_loss)});
    for (std::size_t i = 0; i < e.agent_actor_loss.size(); ++i)
      losses.row({static_cast<long long>(e.episode), agent_name(cfg, static_cast<int>(i)),
                  number_or_blank(e.agent_actor_loss[i]), number_or_blank(e.agent_critic_loss[i])});
    if ((e.episode + 1) % 10 == 0 || e.episode + 1 == cfg.training.episodes)
      log << "episode " << e.episode + 1 << "/" << cfg.training.episodes << " reward " << e.avg_cum_reward
          << " fst " << e.fst_mbit << " fairness " << e.avg_fairness << "\n";
  };
  hooks.on_checkpoint = [&](const Maddpg& agents, int episodes) {
    char name[32];
    std::snprintf(name, sizeof name, "ep_%04d", episodes);
    save_checkpoint(agents, cfg, episodes, dir / "checkpoints" / name);
  };

  TrainResult result = train(env, cfg.training, cfg.seed, hooks);
  save_checkpoint(result.agents, cfg, cfg.training.episodes, dir / "checkpoints" / "final");

  EpisodeTrace trace(env);
  const EpisodeStats greedy = greedy_rollout(env, result.agents, &trace);
  trace.write_csv((dir / "trajectories.csv").string());

  json summary;
  summary["episodes"] = static_cast<int>(result.logs.size());
  const std::size_t tail = std::min<std::size_t>(50, result.logs.size());
  std::vector<double> r, f, fair, acc;
  for (std::size_t k = result.logs.size() - tail; k < result.logs.size(); ++k) {
    r.push_back(result.logs[k].avg_cum_reward);
    f.push_back(result.logs[k].fst_mbit);
    fair.push_back(result.logs[k].avg_fairness);
    acc.push_back(result.logs[k].accel_violation_rate);
  }
  summary["last50_avg_cum_reward"] = mean_of(r);
  summary["last50_fst_mbit"] = mean_of(f);
  summary["last50_avg_fairness"] = mean_of(fair);
  summary["last50_accel_violation_rate"] = mean_of(acc);
  summary["greedy"] = stats_json(greedy);

  json manifest;
  manifest["run_id"] = run_id(cfg);
  manifest["seed"] = cfg.seed;
  manifest["mode"] = std::string(to_string(cfg.mode));
  manifest["config_hash"] = config_hash(cfg);
  manifest["config"] = to_json(cfg);
  manifest["started_utc"] = started;
  manifest["finished_utc"] = utc_now();
  manifest["summary"] = summary;
  write_json(dir / "manifest.json", manifest);
  log << "run written to " << dir.string() << "\n";
  return {dir.string(), manifest};
}

EvalSummary cmd_eval(const std::string& checkpoint_dir, const std::vector<std::uint64_t>& seeds, double jitter_m,
                     std::ostream& log) {
  if (seeds.empty()) throw std::invalid_argument("eval: at least one seed is required");
  if (!(jitter_m >= 0.0)) throw std::invalid_argument("eval: jitter must be non-negative");
  const fs::path dir(checkpoint_dir);
  if (!fs::exists(dir / "manifest.json")) throw std::runtime_error("missing checkpoint: " + dir.string());
  const SimConfig cfg = load_config(read_json(dir / "manifest.json").at("config"));
  const Maddpg agents = Maddpg::load(dir.string());

  const UserLayout base = place_users(cfg);
  ClusterAssignment ca = kmeans(base.positions, cfg.m_comm_uavs, cfg.seed, cfg.kmeans_max_iters);
  std::vector<Vec2> starts;
  for (const auto& p : cfg.uav_paths) starts.push_back(p.start);
  ca.uav_of_cluster = assign_to_uavs(ca.centroids, starts);

  EvalSummary out;
  std::vector<double> fst, st, fair;
  std::vector<double> arrivals(static_cast<std::size_t>(cfg.agent_count()), 0.0);
  for (std::uint64_t s : seeds) {
    UserLayout layout = base;
    std::mt19937_64 rng(s);
    std::normal_distribution<double> jitter(0.0, 1.0);
    for (auto& p : layout.positions) {
      p.x = std::clamp(p.x + jitter_m * jitter(rng), cfg.user_area.x_min, cfg.user_area.x_max);
      p.y = std::clamp(p.y + jitter_m * jitter(rng), cfg.user_area.y_min, cfg.user_area.y_max);
    }
    SecureUavEnv env(cfg, layout, ca);
    const EpisodeStats stats = greedy_rollout(env, agents);
    EvalRow row{s, stats.total_fst_mbit(), stats.total_st_mbit(), stats.average_fairness(), stats.arrived()};
    for (std::size_t i = 0; i < arrivals.size(); ++i) arrivals[i] += row.arrived[i] ? 1.0 : 0.0;
    fst.push_back(row.total_fst_mbit);
    st.push_back(row.total_st_mbit);
    fair.push_back(row.avg_fairness);
    out.rows.push_back(std::move(row));
  }
  out.fst_mean = mean_of(fst);
  out.fst_std = pop_std(fst);
  out.st_mean = mean_of(st);
  out.st_std = pop_std(st);
  out.fairness_mean = mean_of(fair);
  out.fairness_std = pop_std(fair);
  for (double& a : arrivals) a /= static_cast<double>(seeds.size());
  out.arrival_rate = arrivals;

  std::vector<std::string> header{"seed", "total_fst", "total_st", "avg_fairness"};
  for (int i = 0; i < cfg.agent_count(); ++i) header.push_back(agent_name(cfg, i) + "_arrived");
  {
    CsvWriter w((dir / "eval.csv").string(), header);
    for (const auto& row : out.rows) {
      std::vector<CsvCell> cells{static_cast<long long>(row.seed), row.total_fst_mbit, row.total_st_mbit,
                                 row.avg_fairness};
      for (char a : row.arrived) cells.emplace_back(static_cast<long long>(a ? 1 : 0));
      w.row(cells);
    }
  }
  {
    CsvWriter w((dir / "eval_summary.csv").string(), {"metric", "mean", "std"});
    w.row({std::string("total_fst"), out.fst_mean, out.fst_std});
    w.row({std::string("total_st"), out.st_mean, out.st_std});
    w.row({std::string("avg_fairness"), out.fairness_mean, out.fairness_std});
    for (int i = 0; i < cfg.agent_count(); ++i) {
      const double p = arrivals[static_cast<std::size_t>(i)];
      w.row({agent_name(cfg, i) + "_arrival", p, std::sqrt(p * (1.0 - p))});
    }
  }
  log << "total_fst " << format_number(out.fst_mean) << " +- " << format_number(out.fst_std) << "\n"
      << "total_st " << format_number(out.st_mean) << " +- " << format_number(out.st_std) << "\n"
      << "avg_fairness " << format_number(out.fairness_mean) << " +- " << format_number(out.fairness_std) << "\n";
  for (int i = 0; i < cfg.agent_count(); ++i)
    log << agent_name(cfg, i) << "_arrival " << format_number(arrivals[static_cast<std::size_t>(i)]) << "\n";
  return out;
}

std::string cmd_cluster(const ConfigOptions& opts, std::ostream& log) {
  const SimConfig cfg = resolve_config(opts);
  const fs::path dir = fs::path(opts.out) / ("CLUSTER-seed" + std::to_string(cfg.seed) + "-" +
                                             config_hash(cfg).substr(0, 8));
  fs::create_directories(dir);
  const UserLayout layout = place_users(cfg);
  ClusterAssignment ca = kmeans(layout.positions, cfg.m_comm_uavs, cfg.seed, cfg.kmeans_max_iters);
  std::vector<Vec2> starts;
  for (const auto& p : cfg.uav_paths) starts.push_back(p.start);
  ca.uav_of_cluster = assign_to_uavs(ca.centroids, starts);
  {
    CsvWriter w((dir / "clusters.csv").string(), {"kind", "id", "x", "y", "cluster", "uav"});
    for (std::size_t u = 0; u < layout.positions.size(); ++u) {
      const int c = ca.labels[u];
      w.row({std::string("user"), static_cast<long long>(u), layout.positions[u].x, layout.positions[u].y,
             static_cast<long long>(c), static_cast<long long>(ca.uav_of_cluster[static_cast<std::size_t>(c)])});
    }
    for (std::size_t c = 0; c < ca.centroids.size(); ++c)
      w.row({std::string("centroid"), static_cast<long long>(c), ca.centroids[c].x, ca.centroids[c].y,
             static_cast<long long>(c), static_cast<long long>(ca.uav_of_cluster[c])});
  }
  {
    CsvWriter w((dir / "ess.csv").string(), {"iteration", "ess"});
    for (std::size_t k = 0; k < ca.ess_history.size(); ++k)
      w.row(std::vector<CsvCell>{static_cast<long long>(k), ca.ess_history[k]});
  }
  log << "clusters " << ca.centroids.size() << " ess " << format_number(ca.ess) << " iterations "
      << ca.iterations << "\n"
      << "written to " << dir.string() << "\n";
  return dir.string();
}

std::string cmd_export(const std::string& run_dir, const std::string& what) {
  const fs::path dir(run_dir);
  const fs::path target = dir / ("export_" + what + ".csv");
  if (what == "losses") {
    const CsvTable t = read_csv((dir / "losses.csv").string());
    CsvWriter w(target.string(), {"episode", "agent", "actor_loss", "critic_loss"});
    const std::size_t e = t.column("episode"), a = t.column("agent"), al = t.column("actor_loss"),
                      cl = t.column("critic_loss");
    for (const auto& r : t.rows) w.row({r[e], r[a], r[al], r[cl]});
    return target.string();
  }
  if (what != "trajectories" && what != "speeds" && what != "scheduling")
    throw std::invalid_argument("unknown export kind '" + what +
                                "' (expected trajectories, speeds, scheduling or losses)");

  const SimConfig cfg = load_config(read_json(dir / "manifest.json").at("config"));
  const CsvTable t = read_csv((dir / "trajectories.csv").string());
  const std::size_t slot = t.column("slot");
  auto num = [](const std::string& s) { return std::stod(s); };

  if (what == "scheduling") {
    CsvWriter w(target.string(), {"slot", "cluster", "user", "secrecy_rate", "fairness_factor", "fst"});
    for (const auto& r : t.rows) {
      if (num(r[slot]) < 1.0) continue;  // reset row carries no schedule
      for (int c = 0; c < cfg.m_comm_uavs; ++c) {
        const std::string p = "cluster" + std::to_string(c);
        const double user = num(r[t.column(p + "_user")]);
        if (user < 0.0) continue;
        const double rate = num(r[t.column(p + "_secrecy_rate")]);
        const double factor = num(r[t.column(p + "_factor")]);
        w.row(std::vector<CsvCell>{static_cast<long long>(num(r[slot])), static_cast<long long>(c),
                                   static_cast<long long>(user), rate, factor, rate * factor * cfg.slot_s * 1e-6});
      }
    }
    return target.string();
  }

  CsvWriter w(target.string(), what == "speeds" ? std::vector<std::string>{"slot", "uav", "speed"}
                                                : std::vector<std::string>{"slot", "uav", "x", "y"});
  for (const auto& r : t.rows) {
    for (int i = 0; i < cfg.agent_count(); ++i) {
      const std::string name = agent_name(cfg, i);
      if (what == "speeds")
        w.row({static_cast<long long>(num(r[slot])), name, num(r[t.column(name + "_v")])});
      else
        w.row({static_cast<long long>(num(r[slot])), name, num(r[t.column(name + "_x")]),
               num(r[t.column(name + "_y")])});
    }
  }
  return target.string();
}

int run(int argc, char** argv) {
  CLI::App app{"Secure multi-UAV trajectory and power design: training and evaluation"};
  app.require_subcommand(1);

  ConfigOptions opts;
  std::string mode;
  int episodes = 0;
  std::uint64_t seed = 0;
  auto add_config_flags = [&](CLI::App* sub) {
    sub->add_option("--config", opts.config_path, "JSON configuration file");
    sub->add_option("--set", opts.overrides, "Override a config key: dotted.key=value (repeatable)");
    sub->add_option("--mode", mode, "SCTPD, BEN1 or BEN2");
    sub->add_option("--seed", seed, "Scenario and training seed");
    sub->add_option("--out", opts.out, "Output directory")->capture_default_str();
  };

  CLI::App* train_cmd = app.add_subcommand("train", "Train agents and write a run directory");
  add_config_flags(train_cmd);
  train_cmd->add_option("--episodes", episodes, "Number of training episodes");

  CLI::App* cluster_cmd = app.add_subcommand("cluster", "Place and cluster users");
  add_config_flags(cluster_cmd);

  std::string checkpoint;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  double jitter = 10.0;
  CLI::App* eval_cmd = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory")->required();
  eval_cmd->add_option("--seeds", seeds, "Evaluation seeds")->capture_default_str();
  eval_cmd->add_option("--jitter", jitter, "User position jitter (m, std per coordinate)")->capture_default_str();

  std::string run_dir, what;
  CLI::App* export_cmd = app.add_subcommand("export", "Write plot-ready tables from a run");
  export_cmd->add_option("--run", run_dir, "Run directory")->required();
  export_cmd->add_option("what", what, "trajectories, speeds, scheduling or losses")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    for (CLI::App* sub : {train_cmd, cluster_cmd}) {
      if (!sub->parsed()) continue;
      if (sub->count("--mode")) opts.mode = mode;
      if (sub->count("--seed")) opts.seed = seed;
    }
    if (train_cmd->parsed() && train_cmd->count("--episodes")) opts.episodes = episodes;

    if (train_cmd->parsed()) cmd_train(opts, std::cout);
    else if (cluster_cmd->parsed()) cmd_cluster(opts, std::cout);
    else if (eval_cmd->parsed()) cmd_eval(checkpoint, seeds, jitter, std::cout);
    else if (export_cmd->parsed()) std::cout << cmd_export(run_dir, what) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace uavsec::cli
