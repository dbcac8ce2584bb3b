#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "spdcas/error.hpp"
#include "spdcas/logic.hpp"
#include "spdcas/simulator.hpp"

namespace spdcas {

/// Configuration error; the CLI maps it to the usage exit code.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

namespace config_detail {

inline void allow_keys(const nlohmann::json& j, const std::string& where, std::initializer_list<std::string_view> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, _] : j.items()) {
    bool ok = false;
    for (auto allowed : keys) ok = ok || k == allowed;
    if (!ok) throw ConfigError("unknown key \"" + k + "\" in " + where);
  }
}

inline void read(const nlohmann::json& j, const char* key, double& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (!j[key].is_number()) throw ConfigError(where + "." + key + " must be a number");
  out = j[key].get<double>();
}

inline void read(const nlohmann::json& j, const char* key, std::size_t& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (!j[key].is_number_unsigned()) throw ConfigError(where + "." + key + " must be a nonnegative integer");
  out = j[key].get<std::size_t>();
}

inline void read(const nlohmann::json& j, const char* key, bool& out, const std::string& where) {
  if (!j.contains(key)) return;
  if (!j[key].is_boolean()) throw ConfigError(where + "." + key + " must be true or false");
  out = j[key].get<bool>();
}

}  // namespace config_detail

/// Throws ConfigError when a logic's parameters are unusable.
inline void validate(const LogicSpec& s) {
  try {
    s.weights.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("weights: ") + e.what());
  }
  for (double n : {s.noise.own_speed, s.noise.intruder_speed, s.noise.own_heading_rate, s.noise.intruder_heading_rate})
    if (!(n >= 0.0)) throw ConfigError("noise sigmas must be nonnegative");
  if (!(s.accel_g > 0.0)) throw ConfigError("accel_g must be positive");
  if (!(s.turn_rate_deg > 0.0)) throw ConfigError("turn_rate_deg must be positive");
  if (!(s.vertical_rate_fpm > 0.0)) throw ConfigError("vertical_rate_fpm must be positive");
  if (!(s.coaltitude_dt > 0.0)) throw ConfigError("coaltitude.dt must be positive");
  if (!(s.coaltitude_discount > 0.0 && s.coaltitude_discount <= 1.0))
    throw ConfigError("coaltitude.discount must be in (0, 1]");
  if (!(s.limits.own_min >= 0.0 && s.limits.own_max > s.limits.own_min && s.limits.intruder_min >= 0.0 &&
        s.limits.intruder_max > s.limits.intruder_min))
    throw ConfigError("invalid speed limits");
}

/// Logic parameters over the defaults for `kind`.
inline LogicSpec logic_from_json(LogicKind kind, const nlohmann::json& j) {
  using namespace config_detail;
  LogicSpec s;
  if (!j.is_null()) {
    allow_keys(j, "logic", {"accel_g", "turn_rate_deg", "vertical_rate_fpm", "min_turn_speed_kt", "include_maintain",
                            "noise", "weights", "limits", "coaltitude"});
    read(j, "accel_g", s.accel_g, "logic");
    read(j, "turn_rate_deg", s.turn_rate_deg, "logic");
    read(j, "vertical_rate_fpm", s.vertical_rate_fpm, "logic");
    read(j, "min_turn_speed_kt", s.min_turn_speed_kt, "logic");
    read(j, "include_maintain", s.include_maintain, "logic");
    if (j.contains("noise")) {
      const auto& n = j["noise"];
      allow_keys(n, "logic.noise", {"own_speed", "intruder_speed", "own_heading_rate", "intruder_heading_rate"});
      read(n, "own_speed", s.noise.own_speed, "logic.noise");
      read(n, "intruder_speed", s.noise.intruder_speed, "logic.noise");
      read(n, "own_heading_rate", s.noise.own_heading_rate, "logic.noise");
      read(n, "intruder_heading_rate", s.noise.intruder_heading_rate, "logic.noise");
    }
    if (j.contains("weights")) {
      const auto& w = j["weights"];
      allow_keys(w, "logic.weights",
                 {"nmac_penalty", "alert_cost", "strengthen_cost", "reversal_cost", "maintain_cost", "discount"});
      read(w, "nmac_penalty", s.weights.nmac_penalty, "logic.weights");
      read(w, "alert_cost", s.weights.alert_cost, "logic.weights");
      read(w, "strengthen_cost", s.weights.strengthen_cost, "logic.weights");
      read(w, "reversal_cost", s.weights.reversal_cost, "logic.weights");
      read(w, "maintain_cost", s.weights.maintain_cost, "logic.weights");
      read(w, "discount", s.weights.discount, "logic.weights");
    }
    if (j.contains("limits")) {
      const auto& l = j["limits"];
      allow_keys(l, "logic.limits", {"own_min", "own_max", "intruder_min", "intruder_max"});
      read(l, "own_min", s.limits.own_min, "logic.limits");
      read(l, "own_max", s.limits.own_max, "logic.limits");
      read(l, "intruder_min", s.limits.intruder_min, "logic.limits");
      read(l, "intruder_max", s.limits.intruder_max, "logic.limits");
    }
    if (j.contains("coaltitude")) {
      const auto& c = j["coaltitude"];
      allow_keys(c, "logic.coaltitude", {"dt", "sweeps", "discount"});
      read(c, "dt", s.coaltitude_dt, "logic.coaltitude");
      read(c, "sweeps", s.coaltitude_sweeps, "logic.coaltitude");
      read(c, "discount", s.coaltitude_discount, "logic.coaltitude");
    }
  }
  s = make_logic(kind, s);
  validate(s);
  return s;
}

inline nlohmann::json to_json(const LogicSpec& s) {
  return {{"kind", std::string(to_string(s.kind))},
          {"accel_g", s.accel_g},
          {"turn_rate_deg", s.turn_rate_deg},
          {"vertical_rate_fpm", s.vertical_rate_fpm},
          {"min_turn_speed_kt", s.min_turn_speed_kt},
          {"include_maintain", s.include_maintain},
          {"noise",
           {{"own_speed", s.noise.own_speed},
            {"intruder_speed", s.noise.intruder_speed},
            {"own_heading_rate", s.noise.own_heading_rate},
            {"intruder_heading_rate", s.noise.intruder_heading_rate}}},
          {"weights",
           {{"nmac_penalty", s.weights.nmac_penalty},
            {"alert_cost", s.weights.alert_cost},
            {"strengthen_cost", s.weights.strengthen_cost},
            {"reversal_cost", s.weights.reversal_cost},
            {"maintain_cost", s.weights.maintain_cost},
            {"discount", s.weights.discount}}},
          {"limits",
           {{"own_min", s.limits.own_min},
            {"own_max", s.limits.own_max},
            {"intruder_min", s.limits.intruder_min},
            {"intruder_max", s.limits.intruder_max}}},
          {"coaltitude",
           {{"dt", s.coaltitude_dt}, {"sweeps", s.coaltitude_sweeps}, {"discount", s.coaltitude_discount}}}};
}

inline SimConfig sim_from_json(const nlohmann::json& j) {
  using namespace config_detail;
  SimConfig c;
  if (j.is_null()) return c;
  allow_keys(j, "sim", {"dt", "repetitions", "belief_particles", "equipage", "sensor", "pilot", "speed_min",
                        "speed_max", "min_turn_speed_kt", "slow_turn_accel_g", "record_timeline"});
  read(j, "dt", c.dt, "sim");
  read(j, "repetitions", c.repetitions, "sim");
  read(j, "belief_particles", c.belief_particles, "sim");
  read(j, "speed_min", c.speed_min, "sim");
  read(j, "speed_max", c.speed_max, "sim");
  read(j, "min_turn_speed_kt", c.min_turn_speed_kt, "sim");
  read(j, "slow_turn_accel_g", c.slow_turn_accel_g, "sim");
  read(j, "record_timeline", c.record_timeline, "sim");
  if (j.contains("equipage")) {
    if (!j["equipage"].is_string()) throw ConfigError("sim.equipage must be a string");
    try {
      c.equipage = parse_equipage(j["equipage"].get<std::string>());
    } catch (const InvalidArgument& e) {
      throw ConfigError(std::string("sim.equipage: ") + e.what());
    }
  }
  if (j.contains("sensor")) {
    const auto& s = j["sensor"];
    allow_keys(s, "sim.sensor", {"range", "bearing", "intruder_speed", "altitude"});
    read(s, "range", c.sensor.range, "sim.sensor");
    read(s, "bearing", c.sensor.bearing, "sim.sensor");
    read(s, "intruder_speed", c.sensor.intruder_speed, "sim.sensor");
    read(s, "altitude", c.sensor.altitude, "sim.sensor");
  }
  if (j.contains("pilot")) {
    const auto& p = j["pilot"];
    allow_keys(p, "sim.pilot", {"delay", "p_no_response"});
    read(p, "delay", c.pilot.delay, "sim.pilot");
    read(p, "p_no_response", c.pilot.p_no_response, "sim.pilot");
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("sim: ") + e.what());
  }
  return c;
}

inline nlohmann::json to_json(const SimConfig& c) {
  return {{"dt", c.dt},
          {"repetitions", c.repetitions},
          {"belief_particles", c.belief_particles},
          {"equipage", std::string(to_string(c.equipage))},
          {"sensor",
           {{"range", c.sensor.range},
            {"bearing", c.sensor.bearing},
            {"intruder_speed", c.sensor.intruder_speed},
            {"altitude", c.sensor.altitude}}},
          {"pilot", {{"delay", c.pilot.delay}, {"p_no_response", c.pilot.p_no_response}}},
          {"speed_min", c.speed_min},
          {"speed_max", c.speed_max},
          {"min_turn_speed_kt", c.min_turn_speed_kt},
          {"slow_turn_accel_g", c.slow_turn_accel_g},
          {"record_timeline", c.record_timeline}};
}

/// Whole-run configuration file.
struct RunConfig {
  double scale = 0.1;
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::size_t threads = 1;
  nlohmann::json logic;  // raw logic overrides, applied per kind
  SimConfig sim;
};

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  using namespace config_detail;
  RunConfig rc;
  allow_keys(j, "config", {"scale", "seed", "threads", "logic", "sim"});
  read(j, "scale", rc.scale, "config");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError("config.seed must be a nonnegative integer");
    rc.seed = j["seed"].get<std::uint64_t>();
    rc.has_seed = true;
  }
  read(j, "threads", rc.threads, "config");
  if (!(rc.scale > 0.0 && rc.scale <= 1.0)) throw ConfigError("scale must be in (0, 1]");
  if (j.contains("logic")) {
    rc.logic = j["logic"];
    logic_from_json(LogicKind::speed, rc.logic);
  }
  if (j.contains("sim")) rc.sim = sim_from_json(j["sim"]);
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace spdcas
