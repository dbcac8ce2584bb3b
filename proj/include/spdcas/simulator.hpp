#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spdcas/encounters.hpp"
#include "spdcas/error.hpp"
#include "spdcas/kinematics.hpp"
#include "spdcas/logic.hpp"
#include "spdcas/policy.hpp"
#include "spdcas/qtable.hpp"
#include "spdcas/rng.hpp"
#include "spdcas/solver.hpp"

namespace spdcas {

/// Bit of a dimension in response and alert masks: H = 1, V = 2, S = 4.
inline unsigned dim_bit(Dimension d) {
  switch (d) {
    case Dimension::horizontal: return 1u;
    case Dimension::vertical: return 2u;
    case Dimension::speed: return 4u;
  }
  return 0u;
}

/// "H+V+S" style label of a mask; "none" when empty.
inline std::string mask_label(unsigned mask) {
  std::string s;
  for (auto [bit, name] : {std::pair{1u, "H"}, std::pair{2u, "V"}, std::pair{4u, "S"}}) {
    if (!(mask & bit)) continue;
    if (!s.empty()) s += "+";
    s += name;
  }
  return s.empty() ? "none" : s;
}

inline unsigned parse_mask_label(std::string_view s) {
  if (s == "none" || s == "None" || s.empty()) return 0u;
  unsigned mask = 0;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto end = std::min(s.find('+', pos), s.size());
    const auto tok = s.substr(pos, end - pos);
    unsigned bit = 0;
    if (tok == "H") bit = 1;
    else if (tok == "V") bit = 2;
    else if (tok == "S") bit = 4;
    else throw InvalidArgument("unknown dimension '" + std::string(tok) + "' in '" + std::string(s) + "'");
    if (mask & bit) throw InvalidArgument("dimension repeated in '" + std::string(s) + "'");
    mask |= bit;
    pos = end + 1;
  }
  return mask;
}

struct SensorNoise {
  double range = 50.0;           // ft
  double bearing = 0.0175;       // rad
  double intruder_speed = 3.0;   // ft/s
  double altitude = 50.0;        // ft

  static SensorNoise none() { return {0.0, 0.0, 0.0, 0.0}; }
  bool zero() const { return range == 0.0 && bearing == 0.0 && intruder_speed == 0.0 && altitude == 0.0; }
};

struct PilotModel {
  double delay = 5.0;          // s between an advisory and the pilot flying it
  double p_no_response = 0.0;  // probability no dimension responds
};

enum class Equipage { equipped_unequipped, equipped_equipped };

inline std::string_view to_string(Equipage e) {
  return e == Equipage::equipped_equipped ? "equipped-equipped" : "equipped-unequipped";
}

inline Equipage parse_equipage(std::string_view s) {
  if (s == "equipped-equipped" || s == "equipped_equipped") return Equipage::equipped_equipped;
  if (s == "equipped-unequipped" || s == "equipped_unequipped") return Equipage::equipped_unequipped;
  throw InvalidArgument("unknown equipage '" + std::string(s) + "'");
}

struct SimConfig {
  double dt = 1.0;
  SensorNoise sensor;
  PilotModel pilot;
  Equipage equipage = Equipage::equipped_unequipped;
  std::size_t repetitions = 1;
  std::size_t belief_particles = 0;  // > 0 switches lookups to QMDP over sampled particles
  double speed_min = 0.0;
  double speed_max = GridExtents::own_speed_max;
  double min_turn_speed_kt = 30.0;
  double slow_turn_accel_g = 0.0625;  // acceleration flown instead of a turn below the minimum turn speed
  bool record_timeline = true;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be positive");
    if (!(pilot.delay >= 0.0)) throw InvalidArgument("pilot delay must be nonnegative");
    if (!(pilot.p_no_response >= 0.0 && pilot.p_no_response <= 1.0))
      throw InvalidArgument("p_no_response must be in [0, 1]");
    for (double s : {sensor.range, sensor.bearing, sensor.intruder_speed, sensor.altitude})
      if (!(s >= 0.0)) throw InvalidArgument("sensor noise sigmas must be nonnegative");
    if (repetitions == 0) throw InvalidArgument("repetitions must be at least 1");
    if (!(speed_min >= 0.0 && speed_max > speed_min)) throw InvalidArgument("invalid simulation speed limits");
  }
};

struct TimelineEntry {
  double t = 0.0;
  CompositeAdvisory ownship;
  CompositeAdvisory intruder;
  bool operator==(const TimelineEntry&) const = default;
};

struct SimResult {
  std::string id;
  std::uint64_t seed = 0;
  std::size_t repetition = 0;
  bool nmac = false;
  std::optional<double> nmac_time;
  double min_horizontal_sep = 0.0;
  double min_vertical_sep = 0.0;
  double cpa_time = 0.0;
  bool alerted = false;
  std::optional<double> first_alert_time;
  std::optional<double> first_alert_range;
  unsigned alerted_dims = 0;    // every dimension the ownship alerted in
  unsigned responded_dims = 0;  // dimensions the ownship pilot flew
  bool intruder_alerted = false;
  std::vector<TimelineEntry> timeline;

  bool operator==(const SimResult&) const = default;
};

/// Responding subset of `available_mask`; each dimension responds
/// independently with probability 1 - p_no_response^(1/n).
inline unsigned sample_pilot_response(double p_no_response, unsigned available_mask, Rng& rng) {
  if (!(p_no_response >= 0.0 && p_no_response <= 1.0)) throw InvalidArgument("p_no_response must be in [0, 1]");
  const int n = std::popcount(available_mask);
  if (n == 0) return 0u;
  const double p_resp = 1.0 - std::pow(p_no_response, 1.0 / n);
  unsigned out = 0;
  for (unsigned bit : {1u, 2u, 4u})
    if ((available_mask & bit) && rng.bernoulli(p_resp)) out |= bit;
  return out;
}

/// Seeded form over n_dims in {1, 2, 3}; with n_dims = 2 the dimensions are H and V.
inline unsigned sample_pilot_response(double p_no_response, int n_dims, std::uint64_t seed) {
  if (n_dims < 1 || n_dims > 3) throw InvalidArgument("n_dims must be 1, 2 or 3");
  Rng rng(seed);
  const unsigned mask = n_dims == 1 ? 4u : n_dims == 2 ? 3u : 7u;
  return sample_pilot_response(p_no_response, mask, rng);
}

/// The set of logics one aircraft runs, at most one per dimension.
class CasSystem {
 public:
  CasSystem() = default;
  explicit CasSystem(const std::vector<const QTable*>& tables) {
    for (const QTable* t : tables) {
      if (!t) throw InvalidArgument("null table");
      if (t->kind == LogicKind::custom) throw InvalidArgument("custom tables cannot be flown in simulation");
      t->validate();
      TablePolicy p(*t);
      if (mask_ & dim_bit(p.dimension()))
        throw InvalidArgument("two logics in the " + std::string(to_string(p.dimension())) + " dimension");
      mask_ |= dim_bit(p.dimension());
      logics_.push_back(std::move(p));
    }
  }

  bool empty() const { return logics_.empty(); }
  unsigned mask() const { return mask_; }
  const std::vector<TablePolicy>& logics() const { return logics_; }

 private:
  std::vector<TablePolicy> logics_;
  unsigned mask_ = 0;
};

/// Time to vertical conflict (|h| < 100 ft) under constant vertical rates,
/// clamped to [0, 100]; never converging maps to 100.
inline double tau_from_vertical(double h, double hdot) {
  constexpr double kMax = 100.0;
  if (std::abs(h) < kNmacVertical) return 0.0;
  if (h * hdot >= 0.0) return kMax;
  return std::min(kMax, (std::abs(h) - kNmacVertical) / std::abs(hdot));
}

struct Observation {
  double range = 0.0;
  double bearing = 0.0;  // world, clockwise from north
  double intruder_speed = 0.0;
  double h = 0.0;        // own altitude above the other aircraft
};

/// Logic state seen by `self` for an observation of `other`.
inline RelativeState relative_state(const AircraftState& self, const AircraftState& other, const Observation& o) {
  RelativeState s;
  s.r = std::max(0.0, o.range);
  s.theta = wrap_angle(self.heading - o.bearing);
  s.psi = wrap_angle(self.heading - other.heading);
  s.v0 = self.speed;
  s.v1 = std::max(0.0, o.intruder_speed);
  s.h = o.h;
  s.tau = tau_from_vertical(o.h, self.vertical_rate - other.vertical_rate);
  return s;
}

inline Observation true_observation(const AircraftState& self, const AircraftState& other) {
  return {horizontal_separation(self, other), std::atan2(other.x - self.x, other.y - self.y), other.speed,
          self.z - other.z};
}

inline Observation noisy(const Observation& o, const SensorNoise& n, Rng& rng) {
  Observation out = o;
  out.range += rng.normal(n.range);
  out.bearing += rng.normal(n.bearing);
  out.intruder_speed += rng.normal(n.intruder_speed);
  out.h += rng.normal(n.altitude);
  return out;
}

namespace detail {

struct Pilot {
  const CasSystem* cas = nullptr;
  std::vector<std::size_t> a_prev;
  std::vector<CompositeAdvisory> issued;  // one per step
  unsigned responding = 0;
  bool alerted = false;
  unsigned alerted_dims = 0;
  Rng sensor_rng;
  Rng pilot_rng;

  Pilot(const CasSystem* c, std::uint64_t seed)
      : cas(c), a_prev(c ? c->logics().size() : 0, 0), sensor_rng(derive_seed(seed, 1)),
        pilot_rng(derive_seed(seed, 2)) {}

  CompositeAdvisory query(const AircraftState& self, const AircraftState& other, const SimConfig& cfg) {
    CompositeAdvisory c;
    if (!cas || cas->empty()) return c;
    const Observation obs = noisy(true_observation(self, other), cfg.sensor, sensor_rng);
    std::vector<BeliefParticle> belief;
    if (cfg.belief_particles > 0) {
      belief.resize(cfg.belief_particles);
      const double w = 1.0 / static_cast<double>(cfg.belief_particles);
      for (auto& p : belief) {
        p.state = relative_state(self, other, noisy(obs, cfg.sensor, sensor_rng));
        p.weight = w;
      }
    }
    const RelativeState base = relative_state(self, other, obs);
    for (std::size_t i = 0; i < cas->logics().size(); ++i) {
      const TablePolicy& logic = cas->logics()[i];
      std::size_t action;
      if (belief.empty()) {
        RelativeState s = base;
        s.a_prev = a_prev[i];
        action = logic.lookup(s).action;
      } else {
        for (auto& p : belief) p.state.a_prev = a_prev[i];
        action = logic.lookup(belief).action;
      }
      a_prev[i] = action;
      const Advisory& adv = logic.actions()[action];
      switch (adv.dim) {
        case Dimension::speed: c.speed = adv; break;
        case Dimension::horizontal: c.horizontal = adv; break;
        case Dimension::vertical: c.vertical = adv; break;
      }
      if (adv.alerting()) alerted_dims |= dim_bit(adv.dim);
    }
    if (c.alert() && !alerted) {
      alerted = true;
      responding = sample_pilot_response(cfg.pilot.p_no_response, cas->mask(), pilot_rng);
    }
    return c;
  }

  /// Advisory the pilot is flying at step k.
  CompositeAdvisory flown(std::size_t k, std::size_t delay_steps) const {
    if (k < delay_steps) return {};
    return issued[k - delay_steps];
  }
};

inline AircraftControls fly(AircraftControls u, const CompositeAdvisory& cmd, unsigned responding, double speed,
                            const SimConfig& cfg) {
  bool speed_set = false;
  if ((responding & dim_bit(Dimension::speed)) && cmd.speed.alerting()) {
    u.accel = cmd.speed.kind == AdvisoryKind::MA ? 0.0 : cmd.speed.command * kGravity;
    speed_set = true;
  }
  if ((responding & dim_bit(Dimension::horizontal)) && cmd.horizontal.alerting()) {
    if (speed < cfg.min_turn_speed_kt * kFeetPerSecondPerKnot) {
      if (!speed_set) u.accel = cfg.slow_turn_accel_g * kGravity;
    } else {
      u.turn_rate = -cmd.horizontal.command * kDegToRad;
    }
  }
  if ((responding & dim_bit(Dimension::vertical)) && cmd.vertical.alerting())
    u.vertical_rate = cmd.vertical.command / 60.0;
  return u;
}

}  // namespace detail

/// One seeded run of an encounter. Separation is tracked continuously by
/// assuming straight relative motion within each step.
inline SimResult simulate(const Encounter& e, const CasSystem& own, const CasSystem& intruder, const SimConfig& cfg,
                          std::uint64_t seed, std::size_t repetition = 0) {
  cfg.validate();
  e.validate();
  SimResult res;
  res.id = e.id;
  res.seed = seed;
  res.repetition = repetition;

  const CasSystem* intr = nullptr;
  if (cfg.equipage == Equipage::equipped_equipped) intr = intruder.empty() ? &own : &intruder;
  detail::Pilot p_own(&own, derive_seed(seed, 0, 1));
  detail::Pilot p_int(intr, derive_seed(seed, 0, 2));

  AircraftState o = e.ownship.to_state();
  AircraftState in = e.intruder.to_state();
  const auto steps = static_cast<std::size_t>(std::llround(e.duration / cfg.dt));
  const auto delay_steps = static_cast<std::size_t>(std::llround(cfg.pilot.delay / cfg.dt));

  auto check = [&](double t, double hsep, double vsep) {
    if (hsep < res.min_horizontal_sep) {
      res.min_horizontal_sep = hsep;
      res.cpa_time = t;
    }
    res.min_vertical_sep = std::min(res.min_vertical_sep, vsep);
    if (!res.nmac && is_nmac(hsep, vsep)) {
      res.nmac = true;
      res.nmac_time = t;
    }
  };
  res.min_horizontal_sep = horizontal_separation(o, in);
  res.min_vertical_sep = vertical_separation(o, in);
  res.cpa_time = 0.0;
  check(0.0, res.min_horizontal_sep, res.min_vertical_sep);

  CompositeAdvisory last_own, last_int;
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    const CompositeAdvisory a_own = p_own.query(o, in, cfg);
    const CompositeAdvisory a_int = p_int.query(in, o, cfg);
    p_own.issued.push_back(a_own);
    p_int.issued.push_back(a_int);
    if (a_own.alert() && !res.alerted) {
      res.alerted = true;
      res.first_alert_time = t;
      res.first_alert_range = horizontal_separation(o, in);
    }
    if (cfg.record_timeline && (a_own != last_own || a_int != last_int)) res.timeline.push_back({t, a_own, a_int});
    last_own = a_own;
    last_int = a_int;

    const AircraftControls u_own = detail::fly({0.0, 0.0, e.ownship.vertical_rate / 60.0},
                                               p_own.flown(k, delay_steps), p_own.responding, o.speed, cfg);
    const AircraftControls u_int = detail::fly(scripted_controls(e, t), p_int.flown(k, delay_steps),
                                               p_int.responding, in.speed, cfg);
    const AircraftState o2 = advance(o, u_own, cfg.dt, cfg.speed_min, cfg.speed_max);
    const AircraftState in2 = advance(in, u_int, cfg.dt, cfg.speed_min, cfg.speed_max);

    // Closest point of the straight-line relative segment inside this step.
    const double px = in.x - o.x, py = in.y - o.y, pz = in.z - o.z;
    const double dx = (in2.x - o2.x) - px, dy = (in2.y - o2.y) - py, dz = (in2.z - o2.z) - pz;
    const double dd = dx * dx + dy * dy;
    const double s = dd > 0.0 ? std::clamp(-(px * dx + py * dy) / dd, 0.0, 1.0) : 0.0;
    if (s > 0.0 && s < 1.0)
      check(t + s * cfg.dt, std::hypot(px + s * dx, py + s * dy), std::abs(pz + s * dz));
    o = o2;
    in = in2;
    check(t + cfg.dt, horizontal_separation(o, in), vertical_separation(o, in));
  }
  res.alerted_dims = p_own.alerted_dims;
  res.responded_dims = p_own.responding;
  res.intruder_alerted = p_int.alerted;
  return res;
}

inline SimResult simulate(const Encounter& e, const SimConfig& cfg, std::uint64_t seed, std::size_t repetition = 0) {
  static const CasSystem none;
  return simulate(e, none, none, cfg, seed, repetition);
}

inline std::uint64_t repetition_seed(std::uint64_t base_seed, std::size_t encounter_index, std::size_t repetition) {
  return derive_seed(base_seed, encounter_index, repetition + 1);
}

/// All repetitions of all encounters, ordered by encounter then repetition.
inline std::vector<SimResult> run_set(const std::vector<Encounter>& set, const CasSystem& own,
                                      const CasSystem& intruder, const SimConfig& cfg, std::uint64_t base_seed,
                                      std::size_t threads = 1) {
  if (set.empty()) throw InvalidArgument("encounter set is empty");
  cfg.validate();
  const std::size_t R = cfg.repetitions;
  std::vector<SimResult> out(set.size() * R);
  detail::parallel_ranges(out.size(), threads, [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      const std::size_t enc = i / R, rep = i % R;
      try {
        out[i] = simulate(set[enc], own, intruder, cfg, repetition_seed(base_seed, enc, rep), rep);
      } catch (const InvalidArgument& ex) {
        throw InvalidArgument("encounter " + set[enc].id + ": " + ex.what());
      } catch (const std::exception& ex) {
        throw std::runtime_error("encounter " + set[enc].id + ": " + ex.what());
      }
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline nlohmann::json to_json(const Advisory& a) {
  return {{"kind", std::string(to_string(a.kind))}, {"command", a.command}};
}

inline nlohmann::json to_json(const CompositeAdvisory& c) {
  return {{"S", std::string(to_string(c.speed.kind))},
          {"H", std::string(to_string(c.horizontal.kind))},
          {"V", std::string(to_string(c.vertical.kind))}};
}

inline CompositeAdvisory composite_from_json(const nlohmann::json& j) {
  CompositeAdvisory c;
  c.speed.kind = parse_advisory_kind(j.at("S").get<std::string>());
  c.horizontal.kind = parse_advisory_kind(j.at("H").get<std::string>());
  c.vertical.kind = parse_advisory_kind(j.at("V").get<std::string>());
  for (Advisory* a : {&c.speed, &c.horizontal, &c.vertical}) {
    if (!a->alerting()) continue;
    const LogicKind k = a->dim == Dimension::speed        ? LogicKind::speed
                        : a->dim == Dimension::horizontal ? LogicKind::horizontal
                                                          : LogicKind::vertical;
    for (const Advisory& cand : actions_for(k, LogicSpec{}))
      if (cand.kind == a->kind) a->command = cand.command;
  }
  return c;
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const SimResult& r) {
  nlohmann::json timeline = nlohmann::json::array();
  for (const auto& e : r.timeline)
    timeline.push_back({{"t", e.t}, {"ownship", to_json(e.ownship)}, {"intruder", to_json(e.intruder)}});
  return {{"id", r.id},
          {"repetition", r.repetition},
          {"seed", r.seed},
          {"nmac", r.nmac},
          {"nmac_time", optional_json(r.nmac_time)},
          {"min_horizontal_sep", r.min_horizontal_sep},
          {"min_vertical_sep", r.min_vertical_sep},
          {"cpa_time", r.cpa_time},
          {"alerted", r.alerted},
          {"first_alert_time", optional_json(r.first_alert_time)},
          {"first_alert_range", optional_json(r.first_alert_range)},
          {"alerted_dims", mask_label(r.alerted_dims)},
          {"responded", mask_label(r.responded_dims)},
          {"intruder_alerted", r.intruder_alerted},
          {"timeline", timeline}};
}

inline SimResult result_from_json(const nlohmann::json& j) {
  auto opt = [&](const char* k) -> std::optional<double> {
    if (!j.contains(k) || j[k].is_null()) return std::nullopt;
    return j[k].get<double>();
  };
  SimResult r;
  r.id = j.at("id").get<std::string>();
  r.repetition = j.at("repetition").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.nmac = j.at("nmac").get<bool>();
  r.nmac_time = opt("nmac_time");
  r.min_horizontal_sep = detail::number(j, "min_horizontal_sep");
  r.min_vertical_sep = detail::number(j, "min_vertical_sep");
  r.cpa_time = detail::number(j, "cpa_time");
  r.alerted = j.at("alerted").get<bool>();
  r.first_alert_time = opt("first_alert_time");
  r.first_alert_range = opt("first_alert_range");
  r.alerted_dims = parse_mask_label(j.value("alerted_dims", std::string("none")));
  r.responded_dims = parse_mask_label(j.value("responded", std::string("none")));
  r.intruder_alerted = j.value("intruder_alerted", false);
  if (j.contains("timeline"))
    for (const auto& e : j["timeline"])
      r.timeline.push_back(
          {e.at("t").get<double>(), composite_from_json(e.at("ownship")), composite_from_json(e.at("intruder"))});
  if (r.alerted != r.first_alert_time.has_value())
    throw InvalidArgument("first_alert_time must be present exactly when alerted");
  return r;
}

inline void write_results_jsonl(std::ostream& os, const std::vector<SimResult>& results) {
  for (const auto& r : results) os << to_json(r).dump() << '\n';
}

inline std::vector<SimResult> results_from_jsonl(std::istream& in, const std::string& source = "<stream>") {
  std::vector<SimResult> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(result_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, lineno, e.what());
    } catch (const InvalidArgument& e) {
      throw ParseError(source, lineno, e.what());
    }
  }
  return out;
}

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline constexpr std::string_view kSummaryHeader =
    "id,repetition,seed,nmac,min_horizontal_sep_ft,min_vertical_sep_ft,cpa_time_s,alerted,first_alert_time_s,"
    "first_alert_range_ft,responded";

inline void write_summary_csv(std::ostream& os, const std::vector<SimResult>& results) {
  os << kSummaryHeader << '\n';
  for (const auto& r : results) {
    os << r.id << ',' << r.repetition << ',' << r.seed << ',' << (r.nmac ? 1 : 0) << ','
       << format_number(r.min_horizontal_sep) << ',' << format_number(r.min_vertical_sep) << ','
       << format_number(r.cpa_time) << ',' << (r.alerted ? 1 : 0) << ','
       << (r.first_alert_time ? format_number(*r.first_alert_time) : "") << ','
       << (r.first_alert_range ? format_number(*r.first_alert_range) : "") << ',' << mask_label(r.responded_dims)
       << '\n';
  }
}

}  // namespace spdcas
