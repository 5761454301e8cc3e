#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "helpers.hpp"
#include "uavsec/csv.hpp"
#include "uavsec/env.hpp"

using namespace uavsec;

namespace {

double power_oracle(double v) {
  const double pb = 79.86, pi = 88.63, ut = 120, v0 = 4.03, d0 = 0.6, s = 0.05, rho = 1.225, a = 0.503;
  const double induced = std::sqrt(std::sqrt(1 + std::pow(v, 4) / (4 * std::pow(v0, 4))) - v * v / (2 * v0 * v0));
  return pb * (1 + 3 * v * v / (ut * ut)) + pi * induced + 0.5 * d0 * rho * s * a * v * v * v;
}

double a2g_gain_oracle(double r, double h) {
  const double d = std::sqrt(h * h + r * r);
  const double theta = std::asin(h / d) * 180.0 / std::numbers::pi;
  const double p = 1.0 / (1.0 + 12.08 * std::exp(-0.11 * (theta - 12.08)));
  const double lfs = 20 * std::log10(d) + 20 * std::log10(2e9) + 20 * std::log10(4 * std::numbers::pi / 299792458.0);
  return std::pow(10.0, -(lfs + (1.6 - 23.0) * p + 23.0) / 10.0);
}

// Two 5-user blobs, one near each UAV start.
SimConfig two_blob_config(const char* mode) {
  std::string doc = R"({"schema_version": 1, "mode": ")" + std::string(mode) + R"(",
    "users": [[100, 60], [110, 80], [90, 100], [120, 120], [80, 140],
              [400, 60], [390, 80], [410, 100], [380, 120], [420, 140]]})";
  return load_config_text(doc);
}

// One UAV flying (0,0) -> (100,0), one user, no jammer, single slot.
SimConfig single_link_config(double e_max) {
  return load_config_text(R"({"schema_version": 1, "mode": "BEN2", "m_comm_uavs": 1, "k_users": 1,
      "uav_paths": [{"start": [0, 0], "end": [100, 0]}], "users": [[60, 60]], "max_slots": 1,
      "e_max_j": )" + std::to_string(e_max) + "}");
}

struct OracleSlot {
  double power, r_user, r_eve, secrecy;
};

OracleSlot single_link_oracle() {
  // raw (0,0,0): commanded 10 m/s at azimuth 0 with 0.5 W; from rest the
  // acceleration clamps at 5 m/s^2 so the UAV ends at (2.5, 0) doing 5 m/s
  OracleSlot o{};
  o.power = power_oracle(5.0);
  const double g_user = a2g_gain_oracle(std::hypot(60 - 2.5, 60.0), 70);
  const double g_eve = 1e-5 / (std::pow(510 - 2.5, 2) + 300.0 * 300.0);  // E at its end point after one slot
  o.r_user = 1e6 * std::log2(1 + 0.5 * g_user / 1e-14);
  o.r_eve = 1e6 * std::log2(1 + 0.5 * g_eve / 1e-14);
  o.secrecy = std::max(o.r_user - o.r_eve, 0.0);
  return o;
}

}  // namespace

TEST_CASE("raw action map") {
  const ActionTriple mid = map_action({0, 0, 0}, 20, 1);
  CHECK(mid.speed_mps == 10);
  CHECK(mid.azimuth_rad == doctest::Approx(0).epsilon(1e-15));
  CHECK(mid.power_w == 0.5);
  CHECK(map_action({0, 0, 0}, 20, 0.3).power_w == doctest::Approx(0.15));
  const ActionTriple lo = map_action({-1, -1, -1}, 20, 1);
  CHECK(lo.speed_mps == 0);
  CHECK(lo.azimuth_rad == doctest::Approx(-std::numbers::pi));
  CHECK(lo.power_w == 0);
  const ActionTriple hi = map_action({3, 1, 1}, 20, 1);
  CHECK(hi.raw[0] == 1);
  CHECK(hi.speed_mps == 20);
  CHECK(hi.azimuth_rad == doctest::Approx(std::numbers::pi));
  CHECK(hi.power_w == 1);
}

TEST_CASE("observation lengths follow the closed forms") {
  SecureUavEnv env = SecureUavEnv::build(two_blob_config("SCTPD"));
  REQUIRE(env.agent_count() == 3);
  CHECK(env.cluster_users(0).size() == 5);
  CHECK(env.cluster_users(1).size() == 5);
  const auto obs = env.reset();
  CHECK(obs[0].values.size() == 16);
  CHECK(obs[1].values.size() == 16);
  CHECK(obs[2].values.size() == 11);
  CHECK(obs[2].role == Role::Jammer);
  CHECK(env.observation_dim(0) == 16);
  CHECK(env.observation_scale(2).size() == 11);

  for (int m = 1; m <= 4; ++m) {
    SimConfig c = load_config_text(R"({"schema_version": 1, "k_users": 12})");
    c.m_comm_uavs = m;
    c.uav_paths.clear();
    for (int i = 0; i < m; ++i) c.uav_paths.push_back({{100.0 * i, 0}, {100.0 * i, 0}});
    SecureUavEnv e = SecureUavEnv::build(c);
    const auto o = e.reset();
    for (int i = 0; i < m; ++i)
      CHECK(o[static_cast<std::size_t>(i)].values.size() == static_cast<std::size_t>(2 * m + 7) + e.cluster_users(i).size());
    CHECK(o[static_cast<std::size_t>(m)].values.size() == static_cast<std::size_t>(2 * m + 7));
  }
}

TEST_CASE("observation layout after reset") {
  SecureUavEnv env = SecureUavEnv::build(two_blob_config("SCTPD"));
  const auto obs = env.reset();
  const auto& o = obs[0].values;
  CHECK(o[0] == 200);  // uav0 x
  CHECK(o[2] == 300);  // uav1 x
  CHECK(o[4] == 250);  // jammer
  CHECK(o[5] == 250);
  CHECK(o[6] == 0);    // eavesdropper
  CHECK(o[7] == 300);
  for (int k = 8; k < 13; ++k) CHECK(o[static_cast<std::size_t>(k)] == 0);
  CHECK(o[13] == 0);   // start equals end
  CHECK(o[14] == 0);   // at rest
  CHECK(o[15] == 13000);
}

TEST_CASE("reset is repeatable") {
  SecureUavEnv a = SecureUavEnv::build(two_blob_config("SCTPD"));
  SecureUavEnv b = SecureUavEnv::build(two_blob_config("SCTPD"));
  const auto oa = a.reset();
  std::vector<RawAction> acts(3, RawAction{0.3, -0.2, 0.1});
  a.step(acts);
  const auto oa2 = a.reset();
  const auto ob = b.reset();
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(oa[i].values == ob[i].values);
    CHECK(oa2[i].values == ob[i].values);
  }
}

TEST_CASE("BEN2 runs without the jammer") {
  SecureUavEnv env = SecureUavEnv::build(two_blob_config("BEN2"));
  CHECK(env.agent_count() == 2);
  const auto obs = env.reset();
  CHECK(obs[0].values.size() == 14);
  const auto out = env.step(std::vector<RawAction>(2, RawAction{0, 0, 0}));
  CHECK(out.rewards.size() == 2);
  CHECK(out.metrics.power_w.size() == 2);
}

TEST_CASE("single-slot reward equals the hand pipeline") {
  const SimConfig cfg = single_link_config(13000);
  SecureUavEnv env = SecureUavEnv::build(cfg);
  env.reset();
  const StepOutcome out = env.step(std::vector<RawAction>{RawAction{0, 0, 0}});
  const OracleSlot o = single_link_oracle();
  REQUIRE(o.secrecy > 0);

  CHECK(env.agent_state(0).position.x == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(testutil::rel_err(env.agent_state(0).energy_j, 13000 - o.power) < 1e-12);
  CHECK(testutil::rel_err(out.metrics.selected_secrecy_bps[0], o.secrecy) < 1e-9);
  CHECK(out.metrics.selected_factor[0] == 1.0);  // a lone user is perfectly fair from the start

  const double dist_after = 97.5;
  const double want = -0.001 * o.power * 1.0  // energy
                      + 0.0                   // far from depletion
                      + -100.0                // final slot, 97.5 m short of the endpoint
                      + 25.0 * o.secrecy * 1e-6
                      + -5.0                  // 10 m/s^2 requested from rest
                      + 0.0;
  CHECK(out.flags[0].final_slot);
  CHECK_FALSE(out.flags[0].arrived);
  CHECK_FALSE(out.flags[0].near_depletion);
  CHECK(out.flags[0].accel_violated);
  CHECK(std::hypot(env.agent_state(0).position.x - 100, env.agent_state(0).position.y) == doctest::Approx(dist_after));
  CHECK(testutil::rel_err(out.rewards[0], want) < 1e-9);
  CHECK(out.terminal);
  CHECK_THROWS_AS(env.step(std::vector<RawAction>{RawAction{0, 0, 0}}), std::logic_error);
}

TEST_CASE("single-slot reward in the return regime") {
  // 1000 J is below the 200 J reserve plus the 100 m return cost
  const SimConfig cfg = single_link_config(1000);
  SecureUavEnv env = SecureUavEnv::build(cfg);
  env.reset();
  const StepOutcome out = env.step(std::vector<RawAction>{RawAction{0, 0, 0}});
  const OracleSlot o = single_link_oracle();
  REQUIRE(out.flags[0].near_depletion);
  const double want = -0.001 * o.power + (1.0 * (100.0 - 97.5) + 10.0 / (1.0 + 0.05 * 100.0)) - 100.0 +
                      1.0 * o.secrecy * 1e-6 - 5.0;
  CHECK(testutil::rel_err(out.rewards[0], want) < 1e-9);
  CHECK(out.terms[0].rd > 0);
}

TEST_CASE("reward component spot values") {
  const RewardWeights w;
  RewardContext c;
  c.power_w = 168.49;
  c.dist_before_m = 50;
  c.dist_after_m = 40;
  RewardTerms t = reward_components(w, c);
  CHECK(t.rd == 0);
  CHECK(t.ec == doctest::Approx(-0.16849));
  CHECK(t.ar == 0);
  c.near_depletion = true;
  t = reward_components(w, c);
  CHECK(t.rd == doctest::Approx(10 + 10.0 / 3.5));
  c.final_slot = true;
  c.arrived = true;
  CHECK(reward_components(w, c).ar == 100);
  c.arrived = false;
  CHECK(reward_components(w, c).ar == -100);
  c.accel_violated = true;
  c.separation_violated = true;
  t = reward_components(w, c);
  CHECK(t.accel == -5);
  CHECK(t.sep == -10);
  CHECK(t.total() == doctest::Approx(t.ec + t.rd + t.ar + t.sec + t.accel + t.sep));
}

TEST_CASE("random episodes keep the environment invariants") {
  for (const char* mode : {"SCTPD", "BEN1", "BEN2"}) {
    SimConfig cfg = two_blob_config(mode);
    cfg.e_max_j = 3000;
    cfg.max_slots = default_max_slots(cfg);
    SecureUavEnv env = SecureUavEnv::build(cfg);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1, 1);
    env.reset();
    std::vector<double> energy(static_cast<std::size_t>(env.agent_count()));
    for (int i = 0; i < env.agent_count(); ++i) energy[static_cast<std::size_t>(i)] = env.agent_state(i).energy_j;
    int slots = 0;
    while (!env.terminal()) {
      std::vector<RawAction> acts(static_cast<std::size_t>(env.agent_count()));
      for (auto& a : acts) a = {u(rng), u(rng), u(rng)};
      const StepOutcome out = env.step(acts);
      ++slots;
      CHECK(out.metrics.r_ins_bits >= 0);
      CHECK(out.metrics.r_ins_bits <= out.metrics.st_bits * (1 + 1e-12));
      if (cfg.mode == Mode::Ben1) CHECK(out.metrics.r_ins_bits == doctest::Approx(out.metrics.st_bits).epsilon(1e-12));
      double shared = -1;
      for (int i = 0; i < env.agent_count(); ++i) {
        const auto idx = static_cast<std::size_t>(i);
        CHECK(env.agent_state(i).energy_j <= energy[idx]);
        energy[idx] = env.agent_state(i).energy_j;
        if (!out.flags[idx].active) {
          CHECK(out.rewards[idx] == 0);
          continue;
        }
        const double k = out.flags[idx].near_depletion ? cfg.reward.k_nth : cfg.reward.k_th;
        const double r_ins = out.terms[idx].sec / k;
        if (shared < 0) shared = r_ins;
        CHECK(r_ins == doctest::Approx(shared).epsilon(1e-12));
      }
    }
    CHECK(slots <= cfg.max_slots);
  }
}

TEST_CASE("fixed action sequences reproduce bit for bit") {
  auto run = [] {
    SimConfig cfg = two_blob_config("SCTPD");
    cfg.e_max_j = 2500;
    cfg.max_slots = default_max_slots(cfg);
    SecureUavEnv env = SecureUavEnv::build(cfg);
    env.reset();
    std::mt19937_64 rng(44);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> trace;
    while (!env.terminal()) {
      std::vector<RawAction> acts(3);
      for (auto& a : acts) a = {u(rng), u(rng), u(rng)};
      const auto out = env.step(acts);
      trace.insert(trace.end(), out.rewards.begin(), out.rewards.end());
      trace.push_back(out.metrics.r_ins_bits);
    }
    return trace;
  };
  CHECK(run() == run());
}

TEST_CASE("depleted UAVs freeze and end the episode") {
  SimConfig cfg = two_blob_config("SCTPD");
  cfg.e_max_j = 150;  // less than one hover slot
  cfg.max_slots = 30;
  SecureUavEnv env = SecureUavEnv::build(cfg);
  env.reset();
  const StepOutcome out = env.step(std::vector<RawAction>(3, RawAction{-1, 0, 0}));
  for (int i = 0; i < 3; ++i) {
    CHECK(out.flags[static_cast<std::size_t>(i)].final_slot);
    CHECK_FALSE(env.agent_active(i));
    CHECK(env.agent_state(i).speed_mps == 0);
    CHECK(env.agent_power(i) == 0);
    CHECK(env.agent_state(i).energy_j <= 0);
  }
  CHECK(out.terminal);
}

TEST_CASE("horizon ends the episode with arrival judged at the endpoint") {
  SimConfig cfg = two_blob_config("SCTPD");
  cfg.max_slots = 3;
  SecureUavEnv env = SecureUavEnv::build(cfg);
  env.reset();
  StepOutcome out;
  for (int n = 0; n < 3; ++n) out = env.step(std::vector<RawAction>(3, RawAction{-1, 0, -1}));  // hover
  CHECK(out.terminal);
  for (const auto& f : out.flags) {
    CHECK(f.final_slot);
    CHECK(f.arrived);  // start and end coincide in the default paths
  }
  CHECK(out.terms[0].ar == cfg.reward.k_ar);
}

TEST_CASE("episode trace rows and statistics") {
  SimConfig cfg = two_blob_config("SCTPD");
  cfg.max_slots = 5;
  SecureUavEnv env = SecureUavEnv::build(cfg);
  env.reset();
  EpisodeTrace trace(env);
  EpisodeStats stats(env);
  trace.record_reset(env);
  double fst = 0;
  while (!env.terminal()) {
    const auto out = env.step(std::vector<RawAction>(3, RawAction{0.2, 0.1, 0.5}));
    trace.record(env, out);
    stats.observe(env, out);
    fst += out.metrics.r_ins_bits;
  }
  CHECK(trace.rows().size() == 6);
  CHECK(trace.header().size() == trace.rows()[0].size());
  CHECK(trace.header()[0] == "slot");
  CHECK(stats.slots() == 5);
  CHECK(stats.total_fst_mbit() == doctest::Approx(fst * 1e-6));
  CHECK(stats.average_fairness() >= 0.2 - 1e-12);
  CHECK(stats.average_fairness() <= 1.0);
  testutil::TempDir tmp("trace");
  const std::string path = (tmp.path() / "t.csv").string();
  trace.write_csv(path);
  const CsvTable t = read_csv(path);
  CHECK(t.rows.size() == 6);
  CHECK_NOTHROW(t.column("jammer_x"));
  CHECK_NOTHROW(t.column("cluster1_factor"));
}
