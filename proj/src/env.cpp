#include "uavsec/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "uavsec/csv.hpp"

namespace uavsec {

ActionTriple map_action(const RawAction& raw, double max_speed_mps, double max_power_w) {
  ActionTriple a;
  for (std::size_t i = 0; i < 3; ++i) a.raw[i] = std::clamp(raw[i], -1.0, 1.0);
  a.speed_mps = std::min((a.raw[0] + 1.0) / 2.0 * max_speed_mps, max_speed_mps);
  a.azimuth_rad = (a.raw[1] + 1.0) / 2.0 * (2.0 * std::numbers::pi) - std::numbers::pi;
  a.power_w = std::min((a.raw[2] + 1.0) / 2.0 * max_power_w, max_power_w);
  return a;
}

RewardTerms reward_components(const RewardWeights& w, const RewardContext& c) {
  RewardTerms t;
  t.ec = -w.k_ec * c.power_w * c.dt;
  if (c.near_depletion) {
    const double delta = c.dist_before_m - c.dist_after_m;
    t.rd = w.k_rd1 * delta + w.k_rd2 / (1.0 + w.k_rd3 * c.dist_before_m);
  }
  if (c.final_slot) t.ar = c.arrived ? w.k_ar : w.k_nar;
  t.sec = (c.near_depletion ? w.k_nth : w.k_th) * c.r_ins_mbit;
  t.accel = c.accel_violated ? w.k_accel : 0.0;
  t.sep = c.separation_violated ? w.k_sep : 0.0;
  return t;
}

namespace {

// The far-field gain is not meaningful inside the 1 m reference distance.
double a2a_gain_floored(Vec2 a, Vec2 b, double beta0_linear) {
  return beta0_linear / std::max((a - b).squared_norm(), 1.0);
}

}  // namespace

SecureUavEnv::SecureUavEnv(const SimConfig& cfg, UserLayout users, const ClusterAssignment& ca)
    : cfg_(cfg),
      channel_(ChannelParams::from(cfg)),
      energy_(cfg.rotor, cfg.max_speed_mps),
      users_(std::move(users.positions)),
      clusters_([&] {
        const std::size_t m = static_cast<std::size_t>(cfg.m_comm_uavs);
        if (ca.labels.size() != users_.size() || ca.uav_of_cluster.size() != m)
          throw std::invalid_argument("SecureUavEnv: clustering does not match the scenario");
        std::vector<std::vector<int>> per_uav(m);
        for (std::size_t u = 0; u < ca.labels.size(); ++u) {
          const int label = ca.labels[u];
          if (label < 0 || static_cast<std::size_t>(label) >= m)
            throw std::invalid_argument("SecureUavEnv: label out of range");
          per_uav[static_cast<std::size_t>(ca.uav_of_cluster[static_cast<std::size_t>(label)])].push_back(
              static_cast<int>(u));
        }
        for (const auto& c : per_uav)
          if (c.empty()) throw std::invalid_argument("SecureUavEnv: empty cluster");
        return per_uav;
      }()),
      ledger_([&] {
        std::vector<std::size_t> sizes;
        for (const auto& c : clusters_) sizes.push_back(c.size());
        return sizes;
      }()) {
  validate(cfg_);
  agents_.resize(static_cast<std::size_t>(cfg_.agent_count()));
  active_.assign(agents_.size(), 0);
  power_.assign(agents_.size(), 0.0);
}

SecureUavEnv SecureUavEnv::build(const SimConfig& cfg) {
  UserLayout layout = place_users(cfg);
  ClusterAssignment ca = kmeans(layout.positions, cfg.m_comm_uavs, cfg.seed, cfg.kmeans_max_iters);
  std::vector<Vec2> starts;
  for (const auto& p : cfg.uav_paths) starts.push_back(p.start);
  ca.uav_of_cluster = assign_to_uavs(ca.centroids, starts);
  return SecureUavEnv(cfg, std::move(layout), ca);
}

Role SecureUavEnv::role(int agent) const {
  return agent < cfg_.m_comm_uavs ? Role::Comm : Role::Jammer;
}

const FlightPath& SecureUavEnv::agent_path(int agent) const {
  return role(agent) == Role::Comm ? cfg_.uav_paths[static_cast<std::size_t>(agent)] : cfg_.jammer_path;
}

double SecureUavEnv::max_power(int agent) const {
  return role(agent) == Role::Comm ? cfg_.p_comm_max_w : cfg_.p_jam_max_w;
}

std::size_t SecureUavEnv::observation_dim(int agent) const {
  const std::size_t positions = 2 * static_cast<std::size_t>(agent_count() + 1);
  const std::size_t cum = role(agent) == Role::Comm ? clusters_[static_cast<std::size_t>(agent)].size() : 0;
  return positions + cum + 3;
}

std::vector<double> SecureUavEnv::observation_scale(int agent) const {
  const Box arena = arena_bounds(cfg_);
  const double diag = std::hypot(arena.width(), arena.height());
  std::vector<double> s;
  s.reserve(observation_dim(agent));
  for (int i = 0; i < 2 * (agent_count() + 1); ++i) s.push_back(1.0 / diag);
  if (role(agent) == Role::Comm) {
    for (std::size_t u = 0; u < clusters_[static_cast<std::size_t>(agent)].size(); ++u)
      s.push_back(1.0 / (cfg_.r_max_threshold_mbit * 1e6));
  }
  s.push_back(1.0 / diag);
  s.push_back(1.0 / cfg_.max_speed_mps);
  s.push_back(1.0 / cfg_.e_max_j);
  return s;
}

Observation SecureUavEnv::observe(int agent) const {
  Observation o;
  o.role = role(agent);
  o.uav = agent;
  o.values.reserve(observation_dim(agent));
  for (const auto& a : agents_) {
    o.values.push_back(a.position.x);
    o.values.push_back(a.position.y);
  }
  o.values.push_back(eve_.x);
  o.values.push_back(eve_.y);
  if (o.role == Role::Comm) {
    const auto cum = ledger_.user_cum_bits(static_cast<std::size_t>(agent));
    o.values.insert(o.values.end(), cum.begin(), cum.end());
  }
  const auto& self = agents_[static_cast<std::size_t>(agent)];
  o.values.push_back(distance(self.position, agent_path(agent).end));
  o.values.push_back(self.speed_mps);
  o.values.push_back(self.energy_j);
  return o;
}

std::vector<Observation> SecureUavEnv::reset() {
  for (int i = 0; i < agent_count(); ++i) {
    auto& a = agents_[static_cast<std::size_t>(i)];
    a.position = agent_path(i).start;
    a.speed_mps = 0.0;
    a.heading_rad = 0.0;
    a.energy_j = cfg_.e_max_j;
  }
  std::fill(active_.begin(), active_.end(), 1);
  std::fill(power_.begin(), power_.end(), 0.0);
  std::vector<std::size_t> sizes;
  for (const auto& c : clusters_) sizes.push_back(c.size());
  ledger_ = ThroughputLedger(sizes);
  eve_ = eavesdropper_position(0, cfg_);
  slot_ = 0;
  terminal_ = false;

  std::vector<Observation> obs;
  for (int i = 0; i < agent_count(); ++i) obs.push_back(observe(i));
  return obs;
}

StepOutcome SecureUavEnv::step(std::span<const RawAction> raw_actions) {
  if (terminal_) throw std::logic_error("SecureUavEnv::step after terminal");
  const int n_agents = agent_count();
  const int m_comm = cfg_.m_comm_uavs;
  if (static_cast<int>(raw_actions.size()) != n_agents)
    throw std::invalid_argument("SecureUavEnv::step: expected one action per agent");

  const double dt = cfg_.slot_s;
  const auto limits = MotionLimits::from(cfg_);
  StepOutcome out;
  out.flags.resize(static_cast<std::size_t>(n_agents));
  out.rewards.assign(static_cast<std::size_t>(n_agents), 0.0);
  out.terms.resize(static_cast<std::size_t>(n_agents));

  std::vector<double> dist_before(static_cast<std::size_t>(n_agents), 0.0);
  std::vector<double> drive_power(static_cast<std::size_t>(n_agents), 0.0);

  // Actions, motion and the return-threshold indicator (slot-start state).
  for (int i = 0; i < n_agents; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    auto& flags = out.flags[idx];
    auto& state = agents_[idx];
    flags.active = active_[idx] != 0;
    if (!flags.active) {
      power_[idx] = 0.0;
      continue;
    }
    const Vec2 endpoint = agent_path(i).end;
    dist_before[idx] = distance(state.position, endpoint);
    flags.near_depletion =
        state.energy_j <= energy_.adaptive_threshold(state.position, endpoint, cfg_.e0_compensation_j);

    const ActionTriple act = map_action(raw_actions[idx], cfg_.max_speed_mps, max_power(i));
    power_[idx] = act.power_w;
    const MotionOutcome mo = step_motion(state, act.speed_mps, act.azimuth_rad, dt, limits);
    flags.accel_violated = mo.accel_violated;
    state = mo.next;
    drive_power[idx] = energy_.power(state.speed_mps);
    state.energy_j -= drive_power[idx] * dt;
  }
  ++slot_;
  eve_ = eavesdropper_position(slot_, cfg_);

  // Separation among flying UAVs and the eavesdropper (last entry).
  {
    std::vector<Vec2> pos;
    std::vector<int> owner;
    for (int i = 0; i < n_agents; ++i) {
      if (!out.flags[static_cast<std::size_t>(i)].active) continue;
      pos.push_back(agents_[static_cast<std::size_t>(i)].position);
      owner.push_back(i);
    }
    pos.push_back(eve_);
    owner.push_back(-1);
    for (auto [a, b] : check_separation(pos, cfg_.min_sep_m)) {
      for (int o : {owner[static_cast<std::size_t>(a)], owner[static_cast<std::size_t>(b)]})
        if (o >= 0) out.flags[static_cast<std::size_t>(o)].separation_violated = true;
    }
  }

  // Rates, scheduling and throughput accounting.
  const double beta0 = cfg_.beta0_linear();
  const bool jammer = cfg_.has_jammer();
  const double jam_power = jammer ? power_[static_cast<std::size_t>(m_comm)] : 0.0;
  const Vec2 jam_pos = jammer ? agents_[static_cast<std::size_t>(m_comm)].position : Vec2{};

  RateInputs eve_in;
  eve_in.noise_w = channel_.noise_w;
  eve_in.bandwidth_hz = channel_.bandwidth_hz;
  eve_in.jam_power_w = jam_power;
  eve_in.jam_gain = jammer ? a2a_gain_floored(jam_pos, eve_, beta0) : 0.0;
  for (int m = 0; m < m_comm; ++m) {
    eve_in.tx_powers_w.push_back(power_[static_cast<std::size_t>(m)]);
    eve_in.gains_to_target.push_back(
        a2a_gain_floored(agents_[static_cast<std::size_t>(m)].position, eve_, beta0));
  }

  auto& metrics = out.metrics;
  metrics.selected_user.assign(static_cast<std::size_t>(m_comm), -1);
  metrics.selected_secrecy_bps.assign(static_cast<std::size_t>(m_comm), 0.0);
  metrics.selected_factor.assign(static_cast<std::size_t>(m_comm), 0.0);
  metrics.power_w = power_;

  ledger_.begin_slot(cfg_.fairness_target);
  std::vector<double> sel_factor, sel_rate;
  for (int m = 0; m < m_comm; ++m) {
    const auto mi = static_cast<std::size_t>(m);
    if (!out.flags[mi].active) continue;
    const auto& members = clusters_[mi];
    const double r_eve = eve_rate(mi, eve_in);

    std::vector<double> rates;
    rates.reserve(members.size());
    RateInputs in = eve_in;
    for (int u : members) {
      const Vec2 up = users_[static_cast<std::size_t>(u)];
      for (int i = 0; i < m_comm; ++i)
        in.gains_to_target[static_cast<std::size_t>(i)] =
            a2g_gain(agents_[static_cast<std::size_t>(i)].position, up, channel_).gain_linear;
      in.jam_gain = jammer ? a2g_gain(jam_pos, up, channel_).gain_linear : 0.0;
      rates.push_back(secrecy_rate(user_rate(mi, in), r_eve));
    }

    std::vector<double> factors = cfg_.mode == Mode::Ben1
                                      ? std::vector<double>(members.size(), 1.0)
                                      : ledger_.factors(mi, cfg_.r_max_threshold_mbit, cfg_.decay_kgp);
    const std::size_t pick = schedule(factors, rates, ledger_.user_cum_bits(mi));
    ledger_.accrue(mi, pick, rates[pick], dt);

    metrics.selected_user[mi] = members[pick];
    metrics.selected_secrecy_bps[mi] = rates[pick];
    metrics.selected_factor[mi] = factors[pick];
    sel_factor.push_back(factors[pick]);
    sel_rate.push_back(rates[pick]);
  }
  ledger_.end_slot();
  metrics.r_ins_bits = instantaneous_fst(sel_factor, sel_rate, dt);
  for (double r : sel_rate) metrics.st_bits += r * dt;
  for (std::size_t c = 0; c < ledger_.cluster_count(); ++c) metrics.jain.push_back(ledger_.jain(c));

  // Rewards and per-agent termination.
  const bool horizon = slot_ >= cfg_.max_slots;
  for (int i = 0; i < n_agents; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    auto& flags = out.flags[idx];
    if (!flags.active) continue;
    auto& state = agents_[idx];
    const double dist_after = distance(state.position, agent_path(i).end);
    flags.final_slot = state.energy_j <= 0.0 || horizon;
    flags.arrived = flags.final_slot && dist_after <= cfg_.arrival_radius_m;

    RewardContext ctx;
    ctx.power_w = drive_power[idx];
    ctx.dt = dt;
    ctx.near_depletion = flags.near_depletion;
    ctx.dist_before_m = dist_before[idx];
    ctx.dist_after_m = dist_after;
    ctx.final_slot = flags.final_slot;
    ctx.arrived = flags.arrived;
    ctx.r_ins_mbit = metrics.r_ins_bits * 1e-6;
    ctx.accel_violated = flags.accel_violated;
    ctx.separation_violated = flags.separation_violated;
    out.terms[idx] = reward_components(cfg_.reward, ctx);
    out.rewards[idx] = out.terms[idx].total();

    if (state.energy_j <= 0.0) {
      active_[idx] = 0;
      state.speed_mps = 0.0;
      power_[idx] = 0.0;
    }
  }

  terminal_ = horizon || std::none_of(active_.begin(), active_.end(), [](char a) { return a != 0; });
  out.terminal = terminal_;
  for (int i = 0; i < n_agents; ++i) out.next_obs.push_back(observe(i));
  return out;
}

// ---------------------------------------------------------------------------

EpisodeStats::EpisodeStats(const SecureUavEnv& env)
    : comm_uavs_(env.config().m_comm_uavs),
      reward_sum_(static_cast<std::size_t>(env.agent_count()), 0.0),
      arrived_(static_cast<std::size_t>(env.agent_count()), 0) {}

void EpisodeStats::observe(const SecureUavEnv& env, const StepOutcome& out) {
  ++slots_;
  for (std::size_t i = 0; i < out.rewards.size(); ++i) {
    reward_sum_[i] += out.rewards[i];
    const auto& f = out.flags[i];
    if (!f.active) continue;
    ++active_agent_slots_;
    accel_violations_ += f.accel_violated ? 1 : 0;
    sep_violations_ += f.separation_violated ? 1 : 0;
    speed_sum_ += env.agent_state(static_cast<int>(i)).speed_mps;
    if (f.final_slot) arrived_[i] = f.arrived ? 1 : 0;
  }
  st_bits_ += out.metrics.st_bits;
  fst_bits_ += out.metrics.r_ins_bits;
  for (double j : out.metrics.jain) jain_sum_ += j;
}

double EpisodeStats::average_cumulative_reward() const {
  double s = 0.0;
  for (double r : reward_sum_) s += r;
  return s / static_cast<double>(reward_sum_.size());
}

double EpisodeStats::average_cumulative_st_mbit() const {
  return st_bits_ * 1e-6 / comm_uavs_;
}

double EpisodeStats::average_fairness() const {
  return slots_ == 0 ? 0.0 : jain_sum_ / (static_cast<double>(comm_uavs_) * slots_);
}

double EpisodeStats::average_speed() const {
  return active_agent_slots_ == 0 ? 0.0 : speed_sum_ / static_cast<double>(active_agent_slots_);
}

double EpisodeStats::accel_violation_rate() const {
  return active_agent_slots_ == 0 ? 0.0
                                  : static_cast<double>(accel_violations_) / static_cast<double>(active_agent_slots_);
}

double EpisodeStats::separation_violation_rate() const {
  return active_agent_slots_ == 0 ? 0.0
                                  : static_cast<double>(sep_violations_) / static_cast<double>(active_agent_slots_);
}

// ---------------------------------------------------------------------------

EpisodeTrace::EpisodeTrace(const SecureUavEnv& env)
    : agents_(env.agent_count()),
      clusters_(env.config().m_comm_uavs),
      has_jammer_(env.config().has_jammer()) {}

std::vector<std::string> EpisodeTrace::header() const {
  std::vector<std::string> h{"slot"};
  auto name = [&](int i) {
    return (has_jammer_ && i == agents_ - 1) ? std::string("jammer") : "uav" + std::to_string(i);
  };
  for (int i = 0; i < agents_; ++i)
    for (const char* f : {"_x", "_y", "_v", "_p", "_energy"}) h.push_back(name(i) + f);
  h.push_back("eve_x");
  h.push_back("eve_y");
  for (int c = 0; c < clusters_; ++c)
    for (const char* f : {"_user", "_secrecy_rate", "_factor", "_jain"})
      h.push_back("cluster" + std::to_string(c) + f);
  h.push_back("r_ins");
  h.push_back("st");
  for (int i = 0; i < agents_; ++i)
    for (const char* f : {"_active", "_rd", "_accel", "_sep", "_arrived"}) h.push_back(name(i) + f);
  return h;
}

void EpisodeTrace::record_reset(const SecureUavEnv& env) {
  std::vector<double> row{static_cast<double>(env.slot())};
  for (int i = 0; i < agents_; ++i) {
    const auto& s = env.agent_state(i);
    row.insert(row.end(), {s.position.x, s.position.y, s.speed_mps, 0.0, s.energy_j});
  }
  row.push_back(env.eve_position().x);
  row.push_back(env.eve_position().y);
  for (int c = 0; c < clusters_; ++c)
    row.insert(row.end(), {-1.0, 0.0, 0.0, env.ledger().jain(static_cast<std::size_t>(c))});
  row.push_back(0.0);
  row.push_back(0.0);
  for (int i = 0; i < agents_; ++i) row.insert(row.end(), {1.0, 0.0, 0.0, 0.0, 0.0});
  rows_.push_back(std::move(row));
}

void EpisodeTrace::record(const SecureUavEnv& env, const StepOutcome& out) {
  std::vector<double> row{static_cast<double>(env.slot())};
  for (int i = 0; i < agents_; ++i) {
    const auto& s = env.agent_state(i);
    row.insert(row.end(), {s.position.x, s.position.y, s.speed_mps,
                           out.metrics.power_w[static_cast<std::size_t>(i)], s.energy_j});
  }
  row.push_back(env.eve_position().x);
  row.push_back(env.eve_position().y);
  const auto& m = out.metrics;
  for (std::size_t c = 0; c < static_cast<std::size_t>(clusters_); ++c)
    row.insert(row.end(), {static_cast<double>(m.selected_user[c]), m.selected_secrecy_bps[c],
                           m.selected_factor[c], m.jain[c]});
  row.push_back(m.r_ins_bits);
  row.push_back(m.st_bits);
  for (const auto& f : out.flags)
    row.insert(row.end(), {f.active ? 1.0 : 0.0, f.near_depletion ? 1.0 : 0.0, f.accel_violated ? 1.0 : 0.0,
                           f.separation_violated ? 1.0 : 0.0, f.arrived ? 1.0 : 0.0});
  rows_.push_back(std::move(row));
}

void EpisodeTrace::write_csv(const std::string& path) const {
  CsvWriter w(path, header());
  for (const auto& r : rows_) w.row(r);
}

}  // namespace uavsec
