#include "uavsec/scenario.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "uavsec/energy.hpp"

namespace uavsec {

using nlohmann::json;

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::Sctpd: return "SCTPD";
    case Mode::Ben1: return "BEN1";
    case Mode::Ben2: return "BEN2";
  }
  return "SCTPD";
}

Mode parse_mode(std::string_view text) {
  std::string upper(text);
  std::transform(upper.begin(), upper.end(), upper.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  if (upper == "SCTPD") return Mode::Sctpd;
  if (upper == "BEN1") return Mode::Ben1;
  if (upper == "BEN2") return Mode::Ben2;
  throw ConfigError("mode", "unknown mode '" + std::string(text) + "' (expected SCTPD, BEN1 or BEN2)");
}

ConfigError::ConfigError(std::string field, const std::string& what)
    : std::runtime_error(field.empty() ? what : field + ": " + what), field_(std::move(field)) {}

double SimConfig::noise_w() const {
  // dBm/Hz -> W/Hz, times bandwidth.
  return std::pow(10.0, (noise_psd_dbm_hz - 30.0) / 10.0) * bandwidth_hz;
}

double SimConfig::beta0_linear() const { return std::pow(10.0, beta0_db / 10.0); }

namespace {

/// Reads keys out of one JSON object and remembers which were consumed so
/// that leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) throw ConfigError(prefix_.empty() ? "<root>" : prefix_, "expected an object");
  }

  std::string path(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    const json* v = find(key);
    if (v == nullptr) return;
    try {
      if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) throw ConfigError(path(key), "expected a number");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer() && !v->is_number_unsigned())
          throw ConfigError(path(key), "expected an integer");
      }
      out = v->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path(key), e.what());
    }
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ConfigError(path(it.key()), "unknown key");
    }
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::set<std::string> seen_;
};

Vec2 parse_point(const json& v, const std::string& field) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(field, "expected [x, y]");
  return {v[0].get<double>(), v[1].get<double>()};
}

FlightPath parse_path(const json& v, const std::string& field) {
  if (!v.is_object()) throw ConfigError(field, "expected {\"start\": [x, y], \"end\": [x, y]}");
  ObjectReader r(v, field);
  FlightPath p;
  if (const json* s = r.find("start")) p.start = parse_point(*s, field + ".start");
  else throw ConfigError(field + ".start", "missing");
  if (const json* e = r.find("end")) p.end = parse_point(*e, field + ".end");
  else throw ConfigError(field + ".end", "missing");
  r.finish();
  return p;
}

json point_json(Vec2 p) { return json::array({p.x, p.y}); }
json path_json(const FlightPath& p) { return {{"start", point_json(p.start)}, {"end", point_json(p.end)}}; }

void require(bool ok, const char* field, const std::string& what) {
  if (!ok) throw ConfigError(field, what);
}

bool finite_point(Vec2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

}  // namespace

void validate(const SimConfig& c) {
  require(c.schema_version == kSchemaVersion, "schema_version",
          "unsupported version " + std::to_string(c.schema_version));
  require(c.m_comm_uavs >= 1, "m_comm_uavs", "must be >= 1");
  require(c.k_users >= c.m_comm_uavs, "k_users", "must be >= m_comm_uavs");
  require(c.altitude_m > 0, "altitude_m", "must be > 0");
  require(c.slot_s > 0, "slot_s", "must be > 0");
  require(c.max_speed_mps > 0, "max_speed_mps", "must be > 0");
  require(c.accel_min_mps2 < 0, "accel_min_mps2", "must be < 0");
  require(c.accel_max_mps2 > 0, "accel_max_mps2", "must be > 0");
  require(c.p_comm_max_w > 0, "p_comm_max_w", "must be > 0");
  require(c.p_jam_max_w > 0, "p_jam_max_w", "must be > 0");
  require(c.min_sep_m > 0, "min_sep_m", "must be > 0");
  require(c.e_max_j > 0, "e_max_j", "must be > 0");
  require(c.e0_compensation_j >= 0, "e0_compensation_j", "must be >= 0");
  require(c.fairness_target > 0 && c.fairness_target <= 1, "fairness_target", "must be in (0, 1]");
  require(c.decay_kgp > 0, "decay_kgp", "must be > 0");
  require(c.r_max_threshold_mbit > 0, "r_max_threshold_mbit", "must be > 0");
  require(c.arrival_radius_m > 0, "arrival_radius_m", "must be > 0");
  require(c.bandwidth_hz > 0, "bandwidth_hz", "must be > 0");
  require(std::isfinite(c.noise_psd_dbm_hz), "noise_psd_dbm_hz", "must be finite");
  require(std::isfinite(c.beta0_db), "beta0_db", "must be finite");
  require(c.carrier_hz > 0, "carrier_hz", "must be > 0");
  require(c.eta_a > 0, "eta_a", "must be > 0");
  require(c.eta_b > 0, "eta_b", "must be > 0");
  require(std::isfinite(c.eta_los_db), "eta_los_db", "must be finite");
  require(std::isfinite(c.eta_nlos_db), "eta_nlos_db", "must be finite");
  require(static_cast<int>(c.uav_paths.size()) == c.m_comm_uavs, "uav_paths",
          "needs exactly m_comm_uavs entries");
  for (const auto& p : c.uav_paths)
    require(finite_point(p.start) && finite_point(p.end), "uav_paths", "non-finite waypoint");
  require(finite_point(c.jammer_path.start) && finite_point(c.jammer_path.end), "jammer_path",
          "non-finite waypoint");
  require(finite_point(c.eve_path.start) && finite_point(c.eve_path.end), "eve_path",
          "non-finite waypoint");

  const auto& w = c.reward;
  require(w.k_ec >= 0, "reward.k_ec", "must be >= 0");
  require(w.k_th > w.k_nth, "reward.k_th", "must exceed reward.k_nth");
  require(w.k_nar <= 0, "reward.k_nar", "must be <= 0");
  require(w.k_accel <= 0, "reward.k_accel", "must be <= 0");
  require(w.k_sep <= 0, "reward.k_sep", "must be <= 0");
  require(w.k_rd3 >= 0, "reward.k_rd3", "must be >= 0");

  require(c.max_slots >= 1, "max_slots", "must be >= 1");

  const auto& r = c.rotor;
  for (auto [v, name] : std::array<std::pair<double, const char*>, 8>{{
           {r.p_blade_w, "rotor.p_blade_w"},
           {r.p_induced_w, "rotor.p_induced_w"},
           {r.tip_speed_mps, "rotor.tip_speed_mps"},
           {r.hover_induced_mps, "rotor.hover_induced_mps"},
           {r.body_drag_ratio, "rotor.body_drag_ratio"},
           {r.rotor_solidity, "rotor.rotor_solidity"},
           {r.air_density_kg_m3, "rotor.air_density_kg_m3"},
           {r.disk_area_m2, "rotor.disk_area_m2"}}}) {
    require(v > 0, name, "must be > 0");
  }

  require(c.user_area.x_max > c.user_area.x_min && c.user_area.y_max > c.user_area.y_min,
          "user_area", "degenerate box");
  if (!c.users.empty()) {
    require(static_cast<int>(c.users.size()) == c.k_users, "users", "needs exactly k_users entries");
    for (std::size_t i = 0; i < c.users.size(); ++i) {
      require(c.user_area.contains(c.users[i]), "users",
              "user " + std::to_string(i) + " lies outside user_area");
      for (std::size_t j = 0; j < i; ++j)
        require(!(c.users[i] == c.users[j]), "users", "users " + std::to_string(j) + " and " +
                                                          std::to_string(i) + " coincide");
    }
  }
  require(c.kmeans_max_iters >= 1, "kmeans_max_iters", "must be >= 1");

  const auto& t = c.training;
  require(t.episodes >= 1, "training.episodes", "must be >= 1");
  require(!t.hidden.empty(), "training.hidden", "needs at least one layer");
  for (int h : t.hidden) require(h >= 1, "training.hidden", "layer widths must be >= 1");
  require(t.expansion_dims >= 1, "training.expansion_dims", "must be >= 1");
  require(t.batch_size >= 1, "training.batch_size", "must be >= 1");
  require(t.buffer_capacity >= t.batch_size, "training.buffer_capacity", "must be >= batch_size");
  require(t.gamma >= 0 && t.gamma <= 1, "training.gamma", "must be in [0, 1]");
  require(t.learning_rate > 0, "training.learning_rate", "must be > 0");
  require(t.tau >= 0 && t.tau <= 1, "training.tau", "must be in [0, 1]");
  require(t.noise_std >= 0, "training.noise_std", "must be >= 0");
  require(t.noise_decay > 0 && t.noise_decay <= 1, "training.noise_decay", "must be in (0, 1]");
  require(t.update_every >= 1, "training.update_every", "must be >= 1");
  require(t.checkpoint_every >= 0, "training.checkpoint_every", "must be >= 0");
}

int default_max_slots(const SimConfig& cfg) {
  const double v_mp = min_power_speed(cfg.rotor, 2.0 * cfg.max_speed_mps);
  const double p = propulsion_power(v_mp, cfg.rotor);
  return static_cast<int>(std::ceil(cfg.e_max_j / (p * cfg.slot_s))) + 20;
}

SimConfig load_config(const json& doc) {
  SimConfig c;
  ObjectReader r(doc, "");
  const json* version = r.find("schema_version");
  if (version == nullptr) throw ConfigError("schema_version", "missing");
  r.read("schema_version", c.schema_version);

  r.read("m_comm_uavs", c.m_comm_uavs);
  r.read("k_users", c.k_users);
  r.read("altitude_m", c.altitude_m);
  r.read("slot_s", c.slot_s);
  r.read("max_speed_mps", c.max_speed_mps);
  r.read("accel_min_mps2", c.accel_min_mps2);
  r.read("accel_max_mps2", c.accel_max_mps2);
  r.read("p_comm_max_w", c.p_comm_max_w);
  r.read("p_jam_max_w", c.p_jam_max_w);
  r.read("min_sep_m", c.min_sep_m);
  r.read("e_max_j", c.e_max_j);
  r.read("e0_compensation_j", c.e0_compensation_j);
  r.read("fairness_target", c.fairness_target);
  r.read("decay_kgp", c.decay_kgp);
  r.read("r_max_threshold_mbit", c.r_max_threshold_mbit);
  r.read("arrival_radius_m", c.arrival_radius_m);
  r.read("bandwidth_hz", c.bandwidth_hz);
  r.read("noise_psd_dbm_hz", c.noise_psd_dbm_hz);
  r.read("beta0_db", c.beta0_db);
  r.read("carrier_hz", c.carrier_hz);
  r.read("eta_a", c.eta_a);
  r.read("eta_b", c.eta_b);
  r.read("eta_los_db", c.eta_los_db);
  r.read("eta_nlos_db", c.eta_nlos_db);

  if (const json* paths = r.find("uav_paths")) {
    if (!paths->is_array()) throw ConfigError("uav_paths", "expected an array");
    c.uav_paths.clear();
    for (std::size_t i = 0; i < paths->size(); ++i)
      c.uav_paths.push_back(parse_path((*paths)[i], "uav_paths[" + std::to_string(i) + "]"));
  }
  if (const json* p = r.find("jammer_path")) c.jammer_path = parse_path(*p, "jammer_path");
  if (const json* p = r.find("eve_path")) c.eve_path = parse_path(*p, "eve_path");

  if (const json* w = r.find("reward")) {
    ObjectReader rw(*w, "reward");
    rw.read("k_ec", c.reward.k_ec);
    rw.read("k_rd1", c.reward.k_rd1);
    rw.read("k_rd2", c.reward.k_rd2);
    rw.read("k_rd3", c.reward.k_rd3);
    rw.read("k_ar", c.reward.k_ar);
    rw.read("k_nar", c.reward.k_nar);
    rw.read("k_th", c.reward.k_th);
    rw.read("k_nth", c.reward.k_nth);
    rw.read("k_accel", c.reward.k_accel);
    rw.read("k_sep", c.reward.k_sep);
    rw.finish();
  }

  if (const json* m = r.find("mode")) {
    if (!m->is_string()) throw ConfigError("mode", "expected a string");
    c.mode = parse_mode(m->get<std::string>());
  }
  r.read("seed", c.seed);
  r.read("max_slots", c.max_slots);

  if (const json* rot = r.find("rotor")) {
    ObjectReader rr(*rot, "rotor");
    rr.read("p_blade_w", c.rotor.p_blade_w);
    rr.read("p_induced_w", c.rotor.p_induced_w);
    rr.read("tip_speed_mps", c.rotor.tip_speed_mps);
    rr.read("hover_induced_mps", c.rotor.hover_induced_mps);
    rr.read("body_drag_ratio", c.rotor.body_drag_ratio);
    rr.read("rotor_solidity", c.rotor.rotor_solidity);
    rr.read("air_density_kg_m3", c.rotor.air_density_kg_m3);
    rr.read("disk_area_m2", c.rotor.disk_area_m2);
    rr.finish();
  }

  if (const json* a = r.find("user_area")) {
    ObjectReader ra(*a, "user_area");
    ra.read("x_min", c.user_area.x_min);
    ra.read("y_min", c.user_area.y_min);
    ra.read("x_max", c.user_area.x_max);
    ra.read("y_max", c.user_area.y_max);
    ra.finish();
  }
  if (const json* u = r.find("users")) {
    if (!u->is_array()) throw ConfigError("users", "expected an array of [x, y]");
    c.users.clear();
    for (std::size_t i = 0; i < u->size(); ++i)
      c.users.push_back(parse_point((*u)[i], "users[" + std::to_string(i) + "]"));
  }
  r.read("kmeans_max_iters", c.kmeans_max_iters);

  if (const json* t = r.find("training")) {
    ObjectReader rt(*t, "training");
    rt.read("episodes", c.training.episodes);
    rt.read("hidden", c.training.hidden);
    rt.read("expansion_dims", c.training.expansion_dims);
    rt.read("batch_size", c.training.batch_size);
    rt.read("buffer_capacity", c.training.buffer_capacity);
    rt.read("gamma", c.training.gamma);
    rt.read("learning_rate", c.training.learning_rate);
    rt.read("tau", c.training.tau);
    rt.read("noise_std", c.training.noise_std);
    rt.read("noise_decay", c.training.noise_decay);
    rt.read("update_every", c.training.update_every);
    rt.read("checkpoint_every", c.training.checkpoint_every);
    rt.finish();
  }
  r.finish();

  if (c.max_slots == 0) {
    // Rotor constants feed the default horizon, so check them first.
    SimConfig probe = c;
    probe.max_slots = 1;
    validate(probe);
    c.max_slots = default_max_slots(c);
  }
  validate(c);
  return c;
}

SimConfig load_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("parse error: ") + e.what());
  }
  return load_config(doc);
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0)
    throw ConfigError("", "override '" + std::string(assignment) + "' is not KEY=VALUE");
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));

  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;
  }

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError(key, "empty path component");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    json& child = (*node)[part];
    if (child.is_null()) child = json::object();
    if (!child.is_object()) throw ConfigError(key, "'" + part + "' is not an object");
    node = &child;
    start = dot + 1;
  }
}

SimConfig load_config_file(const std::string& path, const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("", "parse error in '" + path + "': " + e.what());
    }
  } else {
    doc["schema_version"] = kSchemaVersion;
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return load_config(doc);
}

json to_json(const SimConfig& c) {
  json doc;
  doc["schema_version"] = c.schema_version;
  doc["m_comm_uavs"] = c.m_comm_uavs;
  doc["k_users"] = c.k_users;
  doc["altitude_m"] = c.altitude_m;
  doc["slot_s"] = c.slot_s;
  doc["max_speed_mps"] = c.max_speed_mps;
  doc["accel_min_mps2"] = c.accel_min_mps2;
  doc["accel_max_mps2"] = c.accel_max_mps2;
  doc["p_comm_max_w"] = c.p_comm_max_w;
  doc["p_jam_max_w"] = c.p_jam_max_w;
  doc["min_sep_m"] = c.min_sep_m;
  doc["e_max_j"] = c.e_max_j;
  doc["e0_compensation_j"] = c.e0_compensation_j;
  doc["fairness_target"] = c.fairness_target;
  doc["decay_kgp"] = c.decay_kgp;
  doc["r_max_threshold_mbit"] = c.r_max_threshold_mbit;
  doc["arrival_radius_m"] = c.arrival_radius_m;
  doc["bandwidth_hz"] = c.bandwidth_hz;
  doc["noise_psd_dbm_hz"] = c.noise_psd_dbm_hz;
  doc["beta0_db"] = c.beta0_db;
  doc["carrier_hz"] = c.carrier_hz;
  doc["eta_a"] = c.eta_a;
  doc["eta_b"] = c.eta_b;
  doc["eta_los_db"] = c.eta_los_db;
  doc["eta_nlos_db"] = c.eta_nlos_db;
  doc["uav_paths"] = json::array();
  for (const auto& p : c.uav_paths) doc["uav_paths"].push_back(path_json(p));
  doc["jammer_path"] = path_json(c.jammer_path);
  doc["eve_path"] = path_json(c.eve_path);
  const auto& w = c.reward;
  doc["reward"] = {{"k_ec", w.k_ec},   {"k_rd1", w.k_rd1}, {"k_rd2", w.k_rd2},
                   {"k_rd3", w.k_rd3}, {"k_ar", w.k_ar},   {"k_nar", w.k_nar},
                   {"k_th", w.k_th},   {"k_nth", w.k_nth}, {"k_accel", w.k_accel},
                   {"k_sep", w.k_sep}};
  doc["mode"] = std::string(to_string(c.mode));
  doc["seed"] = c.seed;
  doc["max_slots"] = c.max_slots;
  const auto& r = c.rotor;
  doc["rotor"] = {{"p_blade_w", r.p_blade_w},
                  {"p_induced_w", r.p_induced_w},
                  {"tip_speed_mps", r.tip_speed_mps},
                  {"hover_induced_mps", r.hover_induced_mps},
                  {"body_drag_ratio", r.body_drag_ratio},
                  {"rotor_solidity", r.rotor_solidity},
                  {"air_density_kg_m3", r.air_density_kg_m3},
                  {"disk_area_m2", r.disk_area_m2}};
  doc["user_area"] = {{"x_min", c.user_area.x_min},
                      {"y_min", c.user_area.y_min},
                      {"x_max", c.user_area.x_max},
                      {"y_max", c.user_area.y_max}};
  if (!c.users.empty()) {
    doc["users"] = json::array();
    for (auto u : c.users) doc["users"].push_back(point_json(u));
  }
  doc["kmeans_max_iters"] = c.kmeans_max_iters;
  const auto& t = c.training;
  doc["training"] = {{"episodes", t.episodes},
                     {"hidden", t.hidden},
                     {"expansion_dims", t.expansion_dims},
                     {"batch_size", t.batch_size},
                     {"buffer_capacity", t.buffer_capacity},
                     {"gamma", t.gamma},
                     {"learning_rate", t.learning_rate},
                     {"tau", t.tau},
                     {"noise_std", t.noise_std},
                     {"noise_decay", t.noise_decay},
                     {"update_every", t.update_every},
                     {"checkpoint_every", t.checkpoint_every}};
  return doc;
}

UserLayout place_users(const SimConfig& cfg) {
  if (!cfg.users.empty()) return {cfg.users};
  const Box& area = cfg.user_area;
  if (!(area.width() > 0 && area.height() > 0)) throw ConfigError("user_area", "degenerate box");

  constexpr double kMinSpacing = 1.0;
  constexpr int kAttemptsPerUser = 10000;
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> ux(area.x_min, area.x_max);
  std::uniform_real_distribution<double> uy(area.y_min, area.y_max);

  UserLayout layout;
  layout.positions.reserve(static_cast<std::size_t>(cfg.k_users));
  for (int k = 0; k < cfg.k_users; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kAttemptsPerUser && !placed; ++attempt) {
      const Vec2 p{ux(rng), uy(rng)};
      const bool clear = std::all_of(layout.positions.begin(), layout.positions.end(),
                                     [&](Vec2 q) { return distance(p, q) >= kMinSpacing; });
      if (clear) {
        layout.positions.push_back(p);
        placed = true;
      }
    }
    if (!placed)
      throw ConfigError("user_area", "could not place " + std::to_string(cfg.k_users) +
                                         " users with 1 m spacing");
  }
  return layout;
}

Box arena_bounds(const SimConfig& cfg) {
  Box b = cfg.user_area;
  auto grow = [&](Vec2 p) {
    b.x_min = std::min(b.x_min, p.x);
    b.y_min = std::min(b.y_min, p.y);
    b.x_max = std::max(b.x_max, p.x);
    b.y_max = std::max(b.y_max, p.y);
  };
  for (const auto& p : cfg.uav_paths) {
    grow(p.start);
    grow(p.end);
  }
  grow(cfg.jammer_path.start);
  grow(cfg.jammer_path.end);
  grow(cfg.eve_path.start);
  grow(cfg.eve_path.end);
  for (auto u : cfg.users) grow(u);
  return b;
}

std::string config_hash(const SimConfig& cfg) {
  const std::string body = to_json(cfg).dump();
  const std::string blob = "blob " + std::to_string(body.size()) + std::string(1, '\0') + body;
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(blob.data(), blob.size(), digest, &len, EVP_sha1(), nullptr);
  std::ostringstream out;
  out << std::hex;
  for (unsigned int i = 0; i < len; ++i) {
    out.width(2);
    out.fill('0');
    out << static_cast<int>(digest[i]);
  }
  return out.str();
}

}  // namespace uavsec
