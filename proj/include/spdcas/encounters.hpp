#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spdcas/error.hpp"
#include "spdcas/kinematics.hpp"
#include "spdcas/rng.hpp"

namespace spdcas {

/// Initial conditions. Heading is clockwise from north in radians, vertical
/// rate in ft/min.
struct AircraftInit {
  double x = 0.0, y = 0.0, z = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double vertical_rate = 0.0;

  AircraftState to_state() const { return {x, y, z, heading, speed, vertical_rate / 60.0}; }
  bool operator==(const AircraftInit&) const = default;
};

/// Intruder maneuver taking effect at time t and held until the next entry.
struct ScriptEntry {
  double t = 0.0;
  double turn_rate = 0.0;      // rad/s, clockwise
  double accel = 0.0;          // ft/s^2 along track
  double vertical_rate = 0.0;  // ft/min
  bool operator==(const ScriptEntry&) const = default;
};

/// Geometry the generator constructed at closest approach.
struct CpaGeometry {
  double time = 0.0;
  double hmd = 0.0;
  double vmd = 0.0;
  double rel_heading = 0.0;  // intruder heading minus ownship heading, [0, 2pi)
  bool operator==(const CpaGeometry&) const = default;
};

struct Encounter {
  std::string id;
  std::string kind;
  double weight = 1.0;
  AircraftInit ownship;
  AircraftInit intruder;
  std::vector<ScriptEntry> script;
  double duration = 180.0;
  CpaGeometry cpa;

  void validate() const {
    if (!(weight > 0.0)) throw InvalidArgument("encounter " + id + ": weight must be positive");
    if (!(duration > 0.0)) throw InvalidArgument("encounter " + id + ": duration must be positive");
    if (ownship.speed < 0.0 || intruder.speed < 0.0) throw InvalidArgument("encounter " + id + ": negative speed");
    for (std::size_t i = 0; i < script.size(); ++i) {
      if (script[i].t < 0.0 || script[i].t > duration)
        throw InvalidArgument("encounter " + id + ": script time outside [0, duration]");
      if (i > 0 && !(script[i].t > script[i - 1].t))
        throw InvalidArgument("encounter " + id + ": script times must ascend");
    }
  }

  bool operator==(const Encounter&) const = default;
};

/// Intruder controls in effect at time t.
inline AircraftControls scripted_controls(const Encounter& e, double t) {
  AircraftControls u{0.0, 0.0, e.intruder.vertical_rate / 60.0};
  for (const ScriptEntry& s : e.script) {
    if (s.t > t + 1e-9) break;
    u = {s.accel, s.turn_rate, s.vertical_rate / 60.0};
  }
  return u;
}

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline std::string numbered_id(std::string_view prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", i);
  return std::string(prefix) + "-" + buf;
}

// ---------------------------------------------------------------------------
// Generators

struct OpsuitParams {
  double duration = 180.0;
  double cpa_time = 90.0;
  double hmd_max = 10000.0;
  double vmd_max = 2000.0;
  double own_speed_min = 50.0, own_speed_max = 237.0;
  double intruder_speed_min = 0.0, intruder_speed_max = 237.0;
  double intruder_vertical_rate_max = 0.0;  // ft/min, sampled symmetric
  double altitude = 3000.0;
};

/// Unit vector perpendicular to (vx, vy), falling back to the perpendicular
/// of `heading` when the vector vanishes.
inline std::pair<double, double> perpendicular(double vx, double vy, double heading) {
  const double n = std::hypot(vx, vy);
  if (n < 1e-9) return {std::cos(heading), -std::sin(heading)};
  return {-vy / n, vx / n};
}

/// Straight-line encounters built backwards from a sampled closest approach.
inline std::vector<Encounter> gen_opsuit_like(std::size_t n, std::uint64_t seed, const OpsuitParams& p = {}) {
  if (n == 0) throw InvalidArgument("encounter count must be at least 1");
  std::vector<Encounter> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    const double own_speed = rng.uniform(p.own_speed_min, p.own_speed_max);
    const double own_heading = rng.uniform(0.0, kTwoPi);
    const double int_speed = rng.uniform(p.intruder_speed_min, p.intruder_speed_max);
    const double rel = rng.uniform(0.0, kTwoPi);
    const double hmd = rng.uniform(0.0, p.hmd_max);
    const double vmd = rng.uniform(0.0, p.vmd_max);
    const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
    const double above = rng.bernoulli(0.5) ? 1.0 : -1.0;
    const double vrate = rng.uniform(-p.intruder_vertical_rate_max, p.intruder_vertical_rate_max);

    const double int_heading = std::fmod(own_heading + rel, kTwoPi);
    const double vox = own_speed * std::sin(own_heading), voy = own_speed * std::cos(own_heading);
    const double vix = int_speed * std::sin(int_heading), viy = int_speed * std::cos(int_heading);
    const auto [nx, ny] = perpendicular(vix - vox, viy - voy, own_heading);
    const double T = p.cpa_time;
    const double cx = vox * T + side * hmd * nx, cy = voy * T + side * hmd * ny;

    Encounter e;
    e.id = numbered_id("opsuit", i);
    e.kind = "opsuit";
    e.weight = 1.0 / static_cast<double>(n);
    e.duration = p.duration;
    e.ownship = {0.0, 0.0, p.altitude, own_heading, own_speed, 0.0};
    const double z_cpa = p.altitude + above * vmd;
    e.intruder = {cx - vix * T, cy - viy * T, z_cpa - vrate / 60.0 * T, int_heading, int_speed, vrate};
    e.cpa = {T, hmd, vmd, rel};
    out.push_back(std::move(e));
  }
  return out;
}

struct HoverParams {
  double duration = 180.0;
  double cpa_time = 90.0;
  double hmd_max = 2000.0;
  double intruder_speed_min = 50.0, intruder_speed_max = 237.0;
  double transit_fraction = 0.7;
  double loiter_turn_min_deg = 1.5, loiter_turn_max_deg = 3.0;
  double loiter_turn_seconds = 30.0;
  double altitude = 1000.0;
};

/// Hovering ownship (speed 0, heading north) against a passing intruder.
/// Loitering intruders turn early in the encounter and fly straight through
/// closest approach; samples whose turn would pass closer than the sampled
/// miss distance are redrawn.
inline std::vector<Encounter> gen_hovering(std::size_t n, std::uint64_t seed, const HoverParams& p = {}) {
  if (n == 0) throw InvalidArgument("encounter count must be at least 1");
  std::vector<Encounter> out;
  out.reserve(n);
  const double T = p.cpa_time;
  const auto steps = static_cast<long>(std::llround(T));
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(derive_seed(seed, i));
    for (int attempt = 0;; ++attempt) {
      const double rel = rng.uniform(0.0, kTwoPi);
      const double speed = rng.uniform(p.intruder_speed_min, p.intruder_speed_max);
      const double hmd = rng.uniform(0.0, p.hmd_max);
      const double side = rng.bernoulli(0.5) ? 1.0 : -1.0;
      const bool loiter = !rng.bernoulli(p.transit_fraction);
      const double turn = (rng.bernoulli(0.5) ? 1.0 : -1.0) *
                          rng.uniform(p.loiter_turn_min_deg, p.loiter_turn_max_deg) * std::numbers::pi / 180.0;

      Encounter e;
      e.id = numbered_id("hover", i);
      e.kind = loiter ? "hover-loiter" : "hover-transit";
      e.weight = 1.0 / static_cast<double>(n);
      e.duration = p.duration;
      e.ownship = {0.0, 0.0, p.altitude, 0.0, 0.0, 0.0};
      e.cpa = {T, hmd, 0.0, rel};
      if (loiter) e.script = {{0.0, turn, 0.0, 0.0}, {p.loiter_turn_seconds, 0.0, 0.0, 0.0}};

      const auto [nx, ny] = perpendicular(std::sin(rel), std::cos(rel), rel);
      AircraftState s{side * hmd * nx, side * hmd * ny, p.altitude, rel, speed, 0.0};
      for (long k = steps - 1; k >= 0; --k) s = advance(s, scripted_controls(e, static_cast<double>(k)), -1.0, 0.0, 1e9);
      e.intruder = {s.x, s.y, s.z, s.heading, s.speed, 0.0};

      if (!loiter) {
        out.push_back(std::move(e));
        break;
      }
      // Fly it forward and keep it only if closest approach is where we built it.
      AircraftState f = e.intruder.to_state();
      bool ok = true;
      for (long k = 0; k < static_cast<long>(std::llround(p.duration)); ++k) {
        const double sep = std::hypot(f.x, f.y);
        if (k != steps && sep < hmd + 1.0) ok = false;
        if (k == steps && std::abs(sep - hmd) > 1e-6) ok = false;
        f = advance(f, scripted_controls(e, static_cast<double>(k)), 1.0, 0.0, 1e9);
      }
      if (ok || attempt >= 100) {
        if (!ok) e.kind = "hover-transit", e.script.clear();
        if (!ok) {
          // Fall back to a straight transit through the same closest approach.
          AircraftState b{side * hmd * nx, side * hmd * ny, p.altitude, rel, speed, 0.0};
          b = advance(b, {}, -T, 0.0, 1e9);
          e.intruder = {b.x, b.y, b.z, b.heading, b.speed, 0.0};
        }
        out.push_back(std::move(e));
        break;
      }
    }
  }
  return out;
}

enum class PairwiseGeometry { head_on, overtake, crossing };

inline PairwiseGeometry parse_pairwise_geometry(std::string_view s) {
  if (s == "head_on" || s == "head-on") return PairwiseGeometry::head_on;
  if (s == "overtake") return PairwiseGeometry::overtake;
  if (s == "crossing") return PairwiseGeometry::crossing;
  throw InvalidArgument("unknown pairwise geometry '" + std::string(s) + "'");
}

/// Deterministic collision-course encounter. Ownship starts at the origin
/// heading north. `crossing_deg` is the intruder's heading relative to the
/// ownship for crossing geometries. Non-closing overtakes are still built,
/// with the intruder r0 ahead, and reported through `warnings`.
inline Encounter gen_pairwise(PairwiseGeometry geometry, double r0, double v_own, double v_int,
                              double altitude_offset = 0.0, double crossing_deg = 90.0,
                              std::vector<std::string>* warnings = nullptr) {
  if (!(r0 > 0.0)) throw InvalidArgument("initial range must be positive");
  if (v_own < 0.0 || v_int < 0.0) throw InvalidArgument("speeds must be nonnegative");
  const double altitude = 1000.0;
  double rel = 0.0;
  std::string name;
  switch (geometry) {
    case PairwiseGeometry::head_on: rel = std::numbers::pi; name = "head_on"; break;
    case PairwiseGeometry::overtake: rel = 0.0; name = "overtake"; break;
    case PairwiseGeometry::crossing:
      rel = std::fmod(std::fmod(crossing_deg, 360.0) + 360.0, 360.0) * std::numbers::pi / 180.0;
      name = "crossing";
      break;
  }
  const double vix = v_int * std::sin(rel), viy = v_int * std::cos(rel);
  const double rx = vix, ry = viy - v_own;
  const double closure = std::hypot(rx, ry);

  Encounter e;
  e.id = "pairwise-" + name;
  e.kind = "pairwise-" + name;
  e.weight = 1.0;
  e.ownship = {0.0, 0.0, altitude, 0.0, v_own, 0.0};
  const bool closing = closure > 1e-9 && !(geometry == PairwiseGeometry::overtake && v_own <= v_int);
  if (closing) {
    const double T = r0 / closure;
    e.intruder = {-rx * T, -ry * T, altitude + altitude_offset, rel, v_int, 0.0};
    e.cpa = {T, 0.0, std::abs(altitude_offset), rel};
    e.duration = std::max(60.0, 2.0 * std::ceil(T) + 20.0);
  } else {
    if (warnings) warnings->push_back("pairwise " + name + " geometry is not closing; intruder placed " +
                                      std::to_string(r0) + " ft ahead");
    e.intruder = {0.0, r0, altitude + altitude_offset, rel, v_int, 0.0};
    e.cpa = {0.0, r0, std::abs(altitude_offset), rel};
    e.duration = 180.0;
  }
  return e;
}

// ---------------------------------------------------------------------------
// JSON-lines persistence

inline nlohmann::json to_json(const AircraftInit& a) {
  return {{"x", a.x}, {"y", a.y}, {"z", a.z}, {"heading", a.heading}, {"speed", a.speed},
          {"vertical_rate", a.vertical_rate}};
}

inline nlohmann::json to_json(const Encounter& e) {
  nlohmann::json script = nlohmann::json::array();
  for (const auto& s : e.script)
    script.push_back({{"t", s.t}, {"turn_rate", s.turn_rate}, {"accel", s.accel}, {"vertical_rate", s.vertical_rate}});
  return {{"id", e.id},
          {"kind", e.kind},
          {"weight", e.weight},
          {"duration", e.duration},
          {"cpa", {{"time", e.cpa.time}, {"hmd", e.cpa.hmd}, {"vmd", e.cpa.vmd}, {"rel_heading", e.cpa.rel_heading}}},
          {"ownship", to_json(e.ownship)},
          {"intruder", to_json(e.intruder)},
          {"script", script}};
}

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& j, const char* name, const std::string& where) {
  if (!j.is_object() || !j.contains(name)) throw InvalidArgument(where + "missing field \"" + name + "\"");
  return j.at(name);
}

inline double number(const nlohmann::json& j, const char* name, const std::string& where = "") {
  const auto& v = field(j, name, where);
  if (!v.is_number()) throw InvalidArgument(where + "field \"" + std::string(name) + "\" is not a number");
  return v.get<double>();
}

inline AircraftInit aircraft_from_json(const nlohmann::json& j, const std::string& where) {
  return {number(j, "x", where), number(j, "y", where), number(j, "z", where), number(j, "heading", where),
          number(j, "speed", where), number(j, "vertical_rate", where)};
}

}  // namespace detail

inline Encounter encounter_from_json(const nlohmann::json& j) {
  Encounter e;
  const auto& id = detail::field(j, "id", "");
  if (!id.is_string()) throw InvalidArgument("field \"id\" is not a string");
  e.id = id.get<std::string>();
  if (j.contains("kind") && j["kind"].is_string()) e.kind = j["kind"].get<std::string>();
  e.weight = detail::number(j, "weight");
  e.duration = detail::number(j, "duration");
  const auto& cpa = detail::field(j, "cpa", "");
  e.cpa = {detail::number(cpa, "time", "cpa."), detail::number(cpa, "hmd", "cpa."), detail::number(cpa, "vmd", "cpa."),
           detail::number(cpa, "rel_heading", "cpa.")};
  e.ownship = detail::aircraft_from_json(detail::field(j, "ownship", ""), "ownship.");
  e.intruder = detail::aircraft_from_json(detail::field(j, "intruder", ""), "intruder.");
  if (j.contains("script")) {
    for (const auto& s : j["script"])
      e.script.push_back({detail::number(s, "t", "script."), detail::number(s, "turn_rate", "script."),
                          detail::number(s, "accel", "script."), detail::number(s, "vertical_rate", "script.")});
  }
  e.validate();
  return e;
}

inline void write_jsonl_line(std::ostream& os, const nlohmann::json& j) { os << j.dump() << '\n'; }

inline std::string encounters_to_jsonl(const std::vector<Encounter>& set) {
  std::ostringstream os;
  for (const auto& e : set) write_jsonl_line(os, to_json(e));
  return os.str();
}

inline std::vector<Encounter> encounters_from_jsonl(std::istream& in, const std::string& source = "<stream>") {
  std::vector<Encounter> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(encounter_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, lineno, e.what());
    } catch (const InvalidArgument& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return out;
}

inline void save_set(const std::vector<Encounter>& set, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << encounters_to_jsonl(set);
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

inline std::vector<Encounter> load_set(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return encounters_from_jsonl(f, path.string());
}

}  // namespace spdcas
