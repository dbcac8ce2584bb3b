#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spdcas/error.hpp"
#include "spdcas/grid.hpp"

namespace spdcas {

inline constexpr double kGravity = 32.185;          // ft/s^2
inline constexpr double kNmacHorizontal = 500.0;    // ft
inline constexpr double kNmacVertical = 100.0;      // ft
inline constexpr double kFeetPerSecondPerKnot = 1.6878098571;
inline constexpr double kDegToRad = std::numbers::pi / 180.0;

/// Strict NMAC test on horizontal and vertical separation in feet.
inline bool is_nmac(double horizontal_sep, double vertical_sep) {
  return horizontal_sep < kNmacHorizontal && vertical_sep < kNmacVertical;
}

enum class LogicKind : std::uint32_t { speed = 0, horizontal = 1, vertical = 2, custom = 255 };

inline std::string_view to_string(LogicKind k) {
  switch (k) {
    case LogicKind::speed: return "speed";
    case LogicKind::horizontal: return "horizontal";
    case LogicKind::vertical: return "vertical";
    case LogicKind::custom: return "custom";
  }
  return "custom";
}

inline LogicKind parse_logic_kind(std::string_view s) {
  if (s == "speed") return LogicKind::speed;
  if (s == "horizontal") return LogicKind::horizontal;
  if (s == "vertical") return LogicKind::vertical;
  throw InvalidArgument("unknown logic kind '" + std::string(s) + "'");
}

enum class Dimension : std::uint8_t { speed = 0, horizontal = 1, vertical = 2 };

inline std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::speed: return "S";
    case Dimension::horizontal: return "H";
    case Dimension::vertical: return "V";
  }
  return "?";
}

inline Dimension dimension_of(LogicKind k) {
  switch (k) {
    case LogicKind::speed: return Dimension::speed;
    case LogicKind::horizontal: return Dimension::horizontal;
    case LogicKind::vertical: return Dimension::vertical;
    case LogicKind::custom: break;
  }
  throw InvalidArgument("custom logics have no advisory dimension");
}

enum class AdvisoryKind : std::uint8_t { COC, SD, SA, MA, TL, TR, CL, DS };

inline std::string_view to_string(AdvisoryKind k) {
  constexpr std::array<std::string_view, 8> names{"COC", "SD", "SA", "MA", "TL", "TR", "CL", "DS"};
  return names[static_cast<std::size_t>(k)];
}

inline AdvisoryKind parse_advisory_kind(std::string_view s) {
  constexpr std::array<std::string_view, 8> names{"COC", "SD", "SA", "MA", "TL", "TR", "CL", "DS"};
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == s) return static_cast<AdvisoryKind>(i);
  throw InvalidArgument("unknown advisory '" + std::string(s) + "'");
}

/// Direction of the commanded maneuver: +1 accelerate/left/climb,
/// -1 decelerate/right/descend, 0 for COC and maintain.
inline int sense(AdvisoryKind k) {
  switch (k) {
    case AdvisoryKind::SA:
    case AdvisoryKind::TL:
    case AdvisoryKind::CL: return 1;
    case AdvisoryKind::SD:
    case AdvisoryKind::TR:
    case AdvisoryKind::DS: return -1;
    default: return 0;
  }
}

/// An advisory in one dimension. `command` carries the commanded magnitude in
/// the dimension's native unit: g-multiple of along-track acceleration for
/// speed, turn rate in deg/s (positive left) for horizontal, vertical rate in
/// ft/min (positive up) for vertical.
struct Advisory {
  Dimension dim = Dimension::speed;
  AdvisoryKind kind = AdvisoryKind::COC;
  double command = 0.0;

  bool alerting() const { return kind != AdvisoryKind::COC; }
  bool operator==(const Advisory&) const = default;
};

/// Relative encounter state in the ownship frame. Angles are counterclockwise
/// from the ownship track and wrapped to [-pi, pi). `h` (ownship altitude above
/// intruder) is only read by logics whose grid has an "h" axis.
struct RelativeState {
  double r = 0.0;
  double theta = 0.0;
  double psi = 0.0;
  double v0 = 0.0;
  double v1 = 0.0;
  double h = 0.0;
  std::size_t a_prev = 0;
  double tau = 0.0;
};

struct NoiseModel {
  double own_speed = 1.64;            // ft/s, per transition
  double intruder_speed = 3.64;       // ft/s, per transition
  double own_heading_rate = 1.0027;   // deg/s
  double intruder_heading_rate = 1.0027;  // deg/s
};

struct RewardWeights {
  double nmac_penalty = -1.0;
  double alert_cost = -0.01;
  double strengthen_cost = -0.005;
  double reversal_cost = -0.02;
  double maintain_cost = -0.002;
  double discount = 1.0;

  void validate() const {
    if (!(nmac_penalty < 0.0)) throw InvalidArgument("nmac_penalty must be negative");
    for (double c : {alert_cost, strengthen_cost, reversal_cost, maintain_cost})
      if (c > 0.0) throw InvalidArgument("operational costs must be <= 0");
    if (!(discount > 0.0 && discount <= 1.0)) throw InvalidArgument("discount must be in (0, 1]");
  }
};

struct SpeedLimits {
  double own_min = GridExtents::own_speed_min;
  double own_max = GridExtents::own_speed_max;
  double intruder_min = GridExtents::intruder_speed_min;
  double intruder_max = GridExtents::intruder_speed_max;
};

/// Everything needed to build and solve one logic variant.
struct LogicSpec {
  LogicKind kind = LogicKind::speed;
  std::vector<Advisory> actions;
  NoiseModel noise;
  RewardWeights weights;
  SpeedLimits limits;
  double accel_g = 0.0625;
  double turn_rate_deg = 3.0;
  double vertical_rate_fpm = 500.0;
  double min_turn_speed_kt = 30.0;
  // Backups of the co-altitude (tau = 0) stage, each advancing this many seconds.
  double coaltitude_dt = 10.0;
  std::size_t coaltitude_sweeps = 10;
  double coaltitude_discount = 0.9;
  bool include_maintain = true;

  std::size_t action_count() const { return actions.size(); }
  bool has_vertical_axis() const { return kind == LogicKind::vertical; }
};

inline std::vector<Advisory> actions_for(LogicKind kind, const LogicSpec& p) {
  switch (kind) {
    case LogicKind::speed: {
      std::vector<Advisory> a{{Dimension::speed, AdvisoryKind::COC, 0.0},
                              {Dimension::speed, AdvisoryKind::SD, -p.accel_g},
                              {Dimension::speed, AdvisoryKind::SA, p.accel_g}};
      if (p.include_maintain) a.push_back({Dimension::speed, AdvisoryKind::MA, 0.0});
      return a;
    }
    case LogicKind::horizontal:
      return {{Dimension::horizontal, AdvisoryKind::COC, 0.0},
              {Dimension::horizontal, AdvisoryKind::TL, p.turn_rate_deg},
              {Dimension::horizontal, AdvisoryKind::TR, -p.turn_rate_deg}};
    case LogicKind::vertical:
      return {{Dimension::vertical, AdvisoryKind::COC, 0.0},
              {Dimension::vertical, AdvisoryKind::CL, p.vertical_rate_fpm},
              {Dimension::vertical, AdvisoryKind::DS, -p.vertical_rate_fpm}};
    case LogicKind::custom: break;
  }
  throw InvalidArgument("no action set for custom logic");
}

/// Action list as stored in a table of the given kind and action count.
inline std::vector<Advisory> actions_for(LogicKind kind, std::size_t action_count) {
  LogicSpec p;
  p.include_maintain = action_count >= 4;
  auto a = actions_for(kind, p);
  if (a.size() != action_count)
    throw InvalidArgument(std::string(to_string(kind)) + " logic has " + std::to_string(a.size()) +
                          " actions, table has " + std::to_string(action_count));
  return a;
}

inline LogicSpec speed_logic(LogicSpec base = {}) {
  base.kind = LogicKind::speed;
  base.actions = actions_for(LogicKind::speed, base);
  return base;
}

/// Simplified comparison logic over the same horizontal geometry:
/// "horizontal" turns at a fixed rate, "vertical" climbs or descends at a
/// fixed rate and adds a relative altitude axis.
inline LogicSpec baseline_logic(LogicKind kind, LogicSpec params = {}) {
  if (kind != LogicKind::horizontal && kind != LogicKind::vertical)
    throw InvalidArgument("baseline logic must be horizontal or vertical");
  params.kind = kind;
  params.actions = actions_for(kind, params);
  return params;
}

inline LogicSpec baseline_logic(std::string_view kind, LogicSpec params = {}) {
  if (kind != "horizontal" && kind != "vertical")
    throw InvalidArgument("baseline logic must be horizontal or vertical, got '" + std::string(kind) + "'");
  return baseline_logic(parse_logic_kind(kind), std::move(params));
}

inline LogicSpec make_logic(LogicKind kind, LogicSpec params = {}) {
  return kind == LogicKind::speed ? speed_logic(std::move(params)) : baseline_logic(kind, std::move(params));
}

/// Relative altitude axis of the vertical baseline; fixed, not scaled.
inline Axis vertical_separation_axis() { return Axis{"h", linspace(-400.0, 400.0, 9), Unit::feet, false}; }

inline DiscretizationGrid logic_grid(const LogicSpec& spec, double scale) {
  auto axes = horizontal_axes(scale);
  if (spec.kind == LogicKind::vertical) {
    axes.push_back(vertical_separation_axis());
    axes.push_back(action_axis(spec.action_count()));
    // Relative altitude is explicit, so only the co-altitude stage exists.
    axes.push_back(Axis{"tau", {0.0}, Unit::seconds, false});
  } else {
    axes.push_back(action_axis(spec.action_count()));
    axes.push_back(tau_axis());
  }
  return DiscretizationGrid(std::move(axes));
}

// ---------------------------------------------------------------------------
// State <-> lattice coordinates

class StateCodec {
 public:
  StateCodec() = default;
  explicit StateCodec(const DiscretizationGrid& grid) : n_(grid.axis_count()) {
    r_ = require(grid, "r");
    theta_ = require(grid, "theta");
    psi_ = require(grid, "psi");
    v0_ = require(grid, "v0");
    v1_ = require(grid, "v1");
    a_prev_ = require(grid, "a_prev");
    h_ = grid.find_axis("h");
    tau_ = grid.find_axis("tau");
  }

  std::size_t size() const { return n_; }
  bool has_vertical() const { return h_.has_value(); }

  void encode(const RelativeState& s, std::span<double> point) const {
    point[r_] = s.r;
    point[theta_] = s.theta;
    point[psi_] = s.psi;
    point[v0_] = s.v0;
    point[v1_] = s.v1;
    point[a_prev_] = static_cast<double>(s.a_prev);
    if (h_) point[*h_] = s.h;
    if (tau_) point[*tau_] = s.tau;
  }

  std::vector<double> encode(const RelativeState& s) const {
    std::vector<double> p(n_, 0.0);
    encode(s, p);
    return p;
  }

  RelativeState decode(std::span<const double> p) const {
    RelativeState s;
    s.r = p[r_];
    s.theta = p[theta_];
    s.psi = p[psi_];
    s.v0 = p[v0_];
    s.v1 = p[v1_];
    s.a_prev = static_cast<std::size_t>(p[a_prev_]);
    if (h_) s.h = p[*h_];
    if (tau_) s.tau = p[*tau_];
    return s;
  }

 private:
  static std::size_t require(const DiscretizationGrid& g, std::string_view name) {
    auto i = g.find_axis(name);
    if (!i) throw InvalidArgument("grid lacks required axis '" + std::string(name) + "'");
    return *i;
  }

  std::size_t n_ = 0;
  std::size_t r_ = 0, theta_ = 0, psi_ = 0, v0_ = 0, v1_ = 0, a_prev_ = 0;
  std::optional<std::size_t> h_, tau_;
};

// ---------------------------------------------------------------------------
// Dynamics

/// Controls held constant over one step. Rates are counterclockwise rad/s,
/// accelerations ft/s^2, `*_speed_jitter` a speed perturbation in ft/s.
struct StepControls {
  double own_accel = 0.0;
  double own_turn_rate = 0.0;
  double own_vertical_rate = 0.0;  // ft/s
  double own_speed_jitter = 0.0;
  double intruder_accel = 0.0;
  double intruder_turn_rate = 0.0;
  double intruder_speed_jitter = 0.0;
};

/// Turn-dependent trigonometry of one step, shared by every state that
/// flies the same controls for the same dt.
struct StepTurns {
  double own_turn = 0.0;  // rad over the step
  double int_turn = 0.0;
  double cos_own_half = 1.0, sin_own_half = 0.0;
  double cos_int_half = 1.0, sin_int_half = 0.0;

  StepTurns() = default;
  StepTurns(double own_turn_rate, double int_turn_rate, double dt)
      : own_turn(own_turn_rate * dt), int_turn(int_turn_rate * dt) {
    cos_own_half = std::cos(0.5 * own_turn);
    sin_own_half = std::sin(0.5 * own_turn);
    cos_int_half = std::cos(0.5 * int_turn);
    sin_int_half = std::sin(0.5 * int_turn);
  }
};

/// Bearing and relative-heading trigonometry of a state.
struct StateTrig {
  double cos_theta, sin_theta, cos_psi, sin_psi;
  explicit StateTrig(const RelativeState& s)
      : cos_theta(std::cos(s.theta)), sin_theta(std::sin(s.theta)), cos_psi(std::cos(s.psi)),
        sin_psi(std::sin(s.psi)) {}
};

/// propagate() with the trigonometry supplied by the caller.
inline RelativeState propagate(const RelativeState& s, const StateTrig& st, const StepControls& u,
                               const StepTurns& turns, double dt, const SpeedLimits& lim) {
  const double v0n = std::clamp(s.v0 + u.own_accel * dt + u.own_speed_jitter, lim.own_min, lim.own_max);
  const double own_dist = 0.5 * (s.v0 + v0n) * dt;
  const double ox = own_dist * turns.cos_own_half;
  const double oy = own_dist * turns.sin_own_half;

  const double v1n =
      std::clamp(s.v1 + u.intruder_accel * dt + u.intruder_speed_jitter, lim.intruder_min, lim.intruder_max);
  const double int_dist = 0.5 * (s.v1 + v1n) * dt;
  // Intruder track at mid-step: psi + int_turn / 2.
  const double cm = st.cos_psi * turns.cos_int_half - st.sin_psi * turns.sin_int_half;
  const double sm = st.sin_psi * turns.cos_int_half + st.cos_psi * turns.sin_int_half;
  const double ix = s.r * st.cos_theta + int_dist * cm;
  const double iy = s.r * st.sin_theta + int_dist * sm;

  const double dx = ix - ox;
  const double dy = iy - oy;
  RelativeState n = s;
  n.r = std::hypot(dx, dy);
  n.theta = wrap_angle(std::atan2(dy, dx) - turns.own_turn);
  n.psi = wrap_angle(s.psi + turns.int_turn - turns.own_turn);
  n.v0 = v0n;
  n.v1 = v1n;
  n.h = s.h + u.own_vertical_rate * dt;
  n.tau = std::max(0.0, s.tau - dt);
  return n;
}

/// Flies both aircraft for dt with midpoint-heading integration and
/// re-expresses the geometry in the ownship's new frame.
inline RelativeState propagate(const RelativeState& s, const StepControls& u, double dt,
                               const SpeedLimits& lim = {}) {
  return propagate(s, StateTrig(s), u, StepTurns(u.own_turn_rate, u.intruder_turn_rate, dt), dt, lim);
}

/// Controls an advisory commands in the logic model.
inline StepControls controls_for(const Advisory& a) {
  StepControls u;
  switch (a.dim) {
    case Dimension::speed: u.own_accel = a.command * kGravity; break;
    case Dimension::horizontal: u.own_turn_rate = a.command * kDegToRad; break;
    case Dimension::vertical: u.own_vertical_rate = a.command / 60.0; break;
  }
  return u;
}

/// One deterministic step under `action` (an ordinal into spec.actions).
inline RelativeState dynamics_step(const LogicSpec& spec, const RelativeState& s, std::size_t action,
                                   double intruder_accel, double dt) {
  StepControls u = controls_for(spec.actions.at(action));
  u.intruder_accel = intruder_accel;
  RelativeState n = propagate(s, u, dt, spec.limits);
  n.a_prev = action;
  return n;
}

// ---------------------------------------------------------------------------
// Rewards

inline bool is_nmac_state(const RelativeState& s, bool vertical_axis) {
  if (s.tau != 0.0) return false;
  return vertical_axis ? is_nmac(s.r, std::abs(s.h)) : s.r < kNmacHorizontal;
}

inline double reward(const RelativeState& s, AdvisoryKind prev, AdvisoryKind action, const RewardWeights& w,
                     bool vertical_axis = false) {
  double r = 0.0;
  if (is_nmac_state(s, vertical_axis)) r += w.nmac_penalty;
  if (action != AdvisoryKind::COC) r += w.alert_cost;
  if (sense(prev) * sense(action) < 0) r += w.reversal_cost;
  if (prev == AdvisoryKind::COC && sense(action) != 0) r += w.strengthen_cost;
  if (action == AdvisoryKind::MA) r += w.maintain_cost;
  return r;
}

inline double reward(const LogicSpec& spec, const RelativeState& s, std::size_t action) {
  return reward(s, spec.actions.at(s.a_prev).kind, spec.actions.at(action).kind, spec.weights,
                spec.has_vertical_axis());
}

// ---------------------------------------------------------------------------
// Transitions

struct NoiseNode {
  double own_speed = 0.0;
  double intruder_speed = 0.0;
  double own_turn = 0.0;       // rad/s
  double intruder_turn = 0.0;  // rad/s
  double weight = 1.0;
};

/// Three-point Gauss-Hermite nodes for N(0, sigma^2): {-sqrt3 s, 0, +sqrt3 s}
/// with weights {1/6, 2/3, 1/6}. A zero sigma collapses to one node.
inline std::vector<std::pair<double, double>> gauss_hermite3(double sigma) {
  if (sigma == 0.0) return {{0.0, 1.0}};
  const double d = std::sqrt(3.0) * sigma;
  return {{-d, 1.0 / 6.0}, {0.0, 2.0 / 3.0}, {d, 1.0 / 6.0}};
}

/// Product quadrature over the noisy dimensions. Ownship noise applies only
/// under COC; advisories make the ownship deterministic.
inline std::vector<NoiseNode> noise_nodes(const NoiseModel& n, bool ownship_noisy) {
  const auto ov = gauss_hermite3(ownship_noisy ? n.own_speed : 0.0);
  const auto iv = gauss_hermite3(n.intruder_speed);
  const auto oh = gauss_hermite3(ownship_noisy ? n.own_heading_rate * kDegToRad : 0.0);
  const auto ih = gauss_hermite3(n.intruder_heading_rate * kDegToRad);
  std::vector<NoiseNode> out;
  out.reserve(ov.size() * iv.size() * oh.size() * ih.size());
  for (auto [a, wa] : ov)
    for (auto [b, wb] : iv)
      for (auto [c, wc] : oh)
        for (auto [d, wd] : ih) out.push_back({a, b, c, d, wa * wb * wc * wd});
  return out;
}

/// Precomputed pieces for repeatedly expanding transitions of one logic.
class TransitionModel {
 public:
  TransitionModel(const LogicSpec& spec, const DiscretizationGrid& grid)
      : spec_(&spec), grid_(&grid), codec_(grid) {
    if (grid.axis(*grid.find_axis("a_prev")).size() != spec.action_count())
      throw InvalidArgument("a_prev axis size does not match the logic's action count");
    coc_nodes_ = noise_nodes(spec.noise, true);
    advisory_nodes_ = noise_nodes(spec.noise, false);
  }

  const LogicSpec& spec() const { return *spec_; }
  const DiscretizationGrid& grid() const { return *grid_; }
  const StateCodec& codec() const { return codec_; }

  /// Caches per-node turn trigonometry for steps of `dt` seconds. Not
  /// thread-safe; call before sharing the model.
  void prepare(double dt) {
    for (const auto& p : prepared_)
      if (p.dt == dt) return;
    Prepared p{dt, {}};
    for (std::size_t a = 0; a < spec_->action_count(); ++a) p.turns.push_back(turns_for(a, dt));
    prepared_.push_back(std::move(p));
  }

  /// fn(successor_flat_index, probability) for every successor of `s` under
  /// `action` after `dt` seconds.
  template <class Fn>
  void for_each(const RelativeState& s, std::size_t action, double dt, Fn&& fn) const {
    const Advisory& adv = spec_->actions.at(action);
    const auto& nodes = adv.alerting() ? advisory_nodes_ : coc_nodes_;
    const StepControls base = controls_for(adv);
    const std::vector<StepTurns>* turns = nullptr;
    std::vector<StepTurns> local;
    for (const auto& p : prepared_)
      if (p.dt == dt) turns = &p.turns[action];
    if (!turns) {
      local = turns_for(action, dt);
      turns = &local;
    }
    const StateTrig trig(s);
    std::array<double, kMaxAxes> point{};
    const std::span<double> pt(point.data(), codec_.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const NoiseNode& node = nodes[k];
      StepControls u = base;
      u.own_speed_jitter = node.own_speed;
      u.intruder_speed_jitter = node.intruder_speed;
      u.own_turn_rate += node.own_turn;
      u.intruder_turn_rate = node.intruder_turn;
      RelativeState n = propagate(s, trig, u, (*turns)[k], dt, spec_->limits);
      n.a_prev = action;
      codec_.encode(n, pt);
      grid_->for_each_interpolant(pt, [&](std::size_t idx, double w) { fn(idx, node.weight * w); });
    }
  }

 private:
  struct Prepared {
    double dt;
    std::vector<std::vector<StepTurns>> turns;  // [action][node]
  };

  std::vector<StepTurns> turns_for(std::size_t action, double dt) const {
    const Advisory& adv = spec_->actions.at(action);
    const auto& nodes = adv.alerting() ? advisory_nodes_ : coc_nodes_;
    const StepControls base = controls_for(adv);
    std::vector<StepTurns> out;
    out.reserve(nodes.size());
    for (const NoiseNode& node : nodes) out.emplace_back(base.own_turn_rate + node.own_turn, node.intruder_turn, dt);
    return out;
  }

  const LogicSpec* spec_;
  const DiscretizationGrid* grid_;
  StateCodec codec_;
  std::vector<NoiseNode> coc_nodes_;
  std::vector<NoiseNode> advisory_nodes_;
  std::vector<Prepared> prepared_;
};

/// Successor distribution of lattice vertex `vertex` under `action`.
inline std::vector<Interpolant> transitions(const LogicSpec& spec, const DiscretizationGrid& grid, std::size_t vertex,
                                            std::size_t action, double dt) {
  TransitionModel tm(spec, grid);
  const auto point = grid.vertex_of(vertex);
  std::vector<Interpolant> out;
  tm.for_each(tm.codec().decode(point), action, dt, [&](std::size_t idx, double p) { out.push_back({idx, p}); });
  return out;
}

/// As above for a state given by value; it must sit exactly on a vertex.
inline std::vector<Interpolant> transitions(const LogicSpec& spec, const DiscretizationGrid& grid,
                                            const RelativeState& vertex_state, std::size_t action, double dt) {
  StateCodec codec(grid);
  const auto point = codec.encode(vertex_state);
  std::vector<std::size_t> multi(grid.axis_count());
  for (std::size_t i = 0; i < grid.axis_count(); ++i) {
    const auto& cuts = grid.axis(i).cuts;
    auto it = std::find(cuts.begin(), cuts.end(), point[i]);
    if (it == cuts.end())
      throw InvalidArgument("state is off-lattice on axis '" + grid.axis(i).name + "'");
    multi[i] = static_cast<std::size_t>(it - cuts.begin());
  }
  return transitions(spec, grid, grid.index_of(multi), action, dt);
}

/// Merges duplicate successor indices; output sorted by index.
inline std::vector<Interpolant> merge_successors(std::vector<Interpolant> s) {
  std::sort(s.begin(), s.end(), [](const Interpolant& a, const Interpolant& b) { return a.index < b.index; });
  std::vector<Interpolant> out;
  for (const auto& e : s) {
    if (!out.empty() && out.back().index == e.index)
      out.back().weight += e.weight;
    else
      out.push_back(e);
  }
  return out;
}

}  // namespace spdcas
