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
#include <utility>
#include <vector>

#include "spdcas/error.hpp"

namespace spdcas {

enum class Unit : std::uint8_t { none = 0, feet = 1, radians = 2, feet_per_second = 3, seconds = 4 };

inline std::string_view unit_name(Unit u) {
  switch (u) {
    case Unit::feet: return "ft";
    case Unit::radians: return "rad";
    case Unit::feet_per_second: return "ft/s";
    case Unit::seconds: return "s";
    case Unit::none: break;
  }
  return "";
}

/// One discretized state variable.
///
/// Angular axes (unit radians) spanning a full turn are periodic: the last
/// cut is the same physical angle as the first and lookups never reference
/// it. The axis named "tau" is the stage axis: it is laid out outermost and
/// lookups snap to the nearest stage instead of interpolating.
struct Axis {
  std::string name;
  std::vector<double> cuts;
  Unit unit = Unit::none;
  bool categorical = false;

  std::size_t size() const { return cuts.size(); }
  bool is_stage() const { return name == "tau"; }
  bool periodic() const {
    return unit == Unit::radians && !categorical && cuts.size() >= 2 &&
           std::abs((cuts.back() - cuts.front()) - 2.0 * std::numbers::pi) < 1e-9;
  }
  bool operator==(const Axis&) const = default;
};

inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  if (a >= -std::numbers::pi && a < std::numbers::pi) return a;
  double w = std::remainder(a, two_pi);
  if (w >= std::numbers::pi) w -= two_pi;
  if (w < -std::numbers::pi) w += two_pi;
  return w;
}

struct Interpolant {
  std::size_t index;
  double weight;
  bool operator==(const Interpolant&) const = default;
};

inline constexpr std::size_t kMaxAxes = 16;
// Axes interpolated at once; 2^10 corners bounds the stack buffers.
inline constexpr std::size_t kMaxInterpolated = 10;

class DiscretizationGrid {
 public:
  DiscretizationGrid() = default;

  explicit DiscretizationGrid(std::vector<Axis> axes) : axes_(std::move(axes)) {
    if (axes_.empty()) throw InvalidArgument("grid needs at least one axis");
    if (axes_.size() > kMaxAxes) throw InvalidArgument("grid supports at most 16 axes");
    for (std::size_t i = 0; i < axes_.size(); ++i) {
      const Axis& ax = axes_[i];
      const std::size_t min_cuts = (ax.categorical || ax.is_stage()) ? 1 : 2;
      if (ax.cuts.size() < min_cuts)
        throw InvalidArgument("axis '" + ax.name + "' needs at least " + std::to_string(min_cuts) + " cuts");
      for (std::size_t k = 1; k < ax.cuts.size(); ++k) {
        if (!(ax.cuts[k] > ax.cuts[k - 1]))
          throw InvalidArgument("axis '" + ax.name + "' cuts must be strictly ascending");
      }
      if (ax.is_stage()) {
        if (stage_axis_) throw InvalidArgument("grid has more than one stage axis");
        stage_axis_ = i;
      }
    }
    strides_.assign(axes_.size(), 0);
    std::size_t stride = 1;
    for (std::size_t i = axes_.size(); i-- > 0;) {
      if (stage_axis_ && *stage_axis_ == i) continue;
      strides_[i] = stride;
      stride *= axes_[i].size();
    }
    stage_size_ = stride;
    if (stage_axis_) {
      strides_[*stage_axis_] = stride;
      stride *= axes_[*stage_axis_].size();
    }
    vertex_count_ = stride;
    uniform_step_.assign(axes_.size(), 0.0);
    role_.assign(axes_.size(), Role::plain);
    for (std::size_t i = 0; i < axes_.size(); ++i) {
      const Axis& ax = axes_[i];
      role_[i] = ax.categorical ? Role::categorical : ax.is_stage() ? Role::stage : ax.periodic() ? Role::periodic : Role::plain;
      const auto& c = ax.cuts;
      if (c.size() < 2) continue;
      const double step = (c.back() - c.front()) / static_cast<double>(c.size() - 1);
      bool uniform = true;
      for (std::size_t k = 1; k < c.size() && uniform; ++k)
        uniform = std::abs((c[k] - c[k - 1]) - step) <= 1e-9 * std::max(1.0, std::abs(step));
      if (uniform) uniform_step_[i] = 1.0 / step;
    }
  }

  const std::vector<Axis>& axes() const { return axes_; }
  const Axis& axis(std::size_t i) const { return axes_.at(i); }
  std::size_t axis_count() const { return axes_.size(); }
  std::size_t vertex_count() const { return vertex_count_; }
  std::size_t stage_size() const { return stage_size_; }
  std::size_t stage_count() const { return stage_axis_ ? axes_[*stage_axis_].size() : 1; }
  std::optional<std::size_t> stage_axis() const { return stage_axis_; }
  std::size_t stride(std::size_t axis) const { return strides_.at(axis); }

  std::optional<std::size_t> find_axis(std::string_view name) const {
    for (std::size_t i = 0; i < axes_.size(); ++i)
      if (axes_[i].name == name) return i;
    return std::nullopt;
  }

  std::size_t index_of(std::span<const std::size_t> multi) const {
    if (multi.size() != axes_.size()) throw InvalidArgument("multi-index has wrong number of axes");
    std::size_t flat = 0;
    for (std::size_t i = 0; i < axes_.size(); ++i) {
      if (multi[i] >= axes_[i].size())
        throw InvalidArgument("index " + std::to_string(multi[i]) + " out of bounds on axis '" + axes_[i].name + "'");
      flat += multi[i] * strides_[i];
    }
    return flat;
  }

  std::vector<std::size_t> multi_index_of(std::size_t flat) const {
    if (flat >= vertex_count_) throw InvalidArgument("flat index " + std::to_string(flat) + " out of bounds");
    std::vector<std::size_t> multi(axes_.size());
    for (std::size_t i = 0; i < axes_.size(); ++i) multi[i] = (flat / strides_[i]) % axes_[i].size();
    return multi;
  }

  std::vector<double> vertex_of(std::size_t flat) const {
    std::vector<double> point(axes_.size());
    vertex_into(flat, point);
    return point;
  }

  void vertex_into(std::size_t flat, std::span<double> point) const {
    if (flat >= vertex_count_) throw InvalidArgument("flat index " + std::to_string(flat) + " out of bounds");
    for (std::size_t i = 0; i < axes_.size(); ++i) point[i] = axes_[i].cuts[(flat / strides_[i]) % axes_[i].size()];
  }

  /// Round-half-up snap onto the stage axis. Returns 0 when there is no stage axis.
  std::size_t nearest_stage(double tau) const {
    if (!stage_axis_) return 0;
    return nearest_cut(axes_[*stage_axis_].cuts, tau);
  }

  /// Calls fn(flat_index, weight) for every lattice vertex with nonzero
  /// multilinear weight around `point`.
  template <class Fn>
  void for_each_interpolant(std::span<const double> point, Fn&& fn) const {
    if (point.size() != axes_.size()) throw InvalidArgument("point has wrong number of coordinates");
    std::size_t base = 0;
    std::array<std::size_t, kMaxAxes> offset{};
    std::array<double, kMaxAxes> frac{};
    std::size_t active = 0;
    for (std::size_t i = 0; i < axes_.size(); ++i) {
      const Axis& ax = axes_[i];
      const auto& c = ax.cuts;
      const double x = point[i];
      const Role role = role_[i];
      if (role == Role::categorical) {
        auto it = std::find(c.begin(), c.end(), x);
        if (it == c.end())
          throw InvalidArgument("categorical coordinate " + std::to_string(x) + " is not a value of axis '" + ax.name + "'");
        base += static_cast<std::size_t>(it - c.begin()) * strides_[i];
        continue;
      }
      if (role == Role::stage) {
        base += nearest_cut(c, x) * strides_[i];
        continue;
      }
      const bool wraps = role == Role::periodic;
      const double v = wraps ? wrap_angle(x) : x;
      std::size_t lo = 0;
      double f = 0.0;
      if (!(v > c.front())) {
        lo = 0;
      } else if (!(v < c.back())) {
        lo = c.size() - 1;
      } else {
        if (uniform_step_[i] > 0.0) {
          // Direct index from the spacing, then nudged so c[lo] <= v < c[lo + 1].
          lo = std::min(static_cast<std::size_t>((v - c.front()) * uniform_step_[i]), c.size() - 2);
          while (lo > 0 && c[lo] > v) --lo;
          while (c[lo + 1] <= v) ++lo;
        } else {
          lo = static_cast<std::size_t>(std::upper_bound(c.begin(), c.end(), v) - c.begin()) - 1;
        }
        f = (v - c[lo]) / (c[lo + 1] - c[lo]);
      }
      if (wraps && lo == c.size() - 1) lo = 0;
      base += lo * strides_[i];
      if (f > 0.0) {
        std::size_t hi = lo + 1;
        if (wraps && hi == c.size() - 1) hi = 0;
        offset[active] = (hi * strides_[i]) - (lo * strides_[i]);
        frac[active] = f;
        ++active;
      }
    }
    // Corner c has bit k set when it takes the upper cut of active axis k.
    std::array<std::size_t, std::size_t{1} << kMaxInterpolated> idx;
    std::array<double, std::size_t{1} << kMaxInterpolated> w;
    if (active > kMaxInterpolated) throw InvalidArgument("too many interpolated axes");
    idx[0] = base;
    w[0] = 1.0;
    std::size_t n = 1;
    for (std::size_t k = 0; k < active; ++k) {
      for (std::size_t c = 0; c < n; ++c) {
        idx[n + c] = idx[c] + offset[k];
        w[n + c] = w[c] * frac[k];
        w[c] *= 1.0 - frac[k];
      }
      n *= 2;
    }
    for (std::size_t c = 0; c < n; ++c) fn(idx[c], w[c]);
  }

  std::vector<Interpolant> interpolants(std::span<const double> point) const {
    std::vector<Interpolant> out;
    for_each_interpolant(point, [&](std::size_t idx, double w) { out.push_back({idx, w}); });
    return out;
  }

  bool operator==(const DiscretizationGrid& o) const { return axes_ == o.axes_; }

 private:
  static std::size_t nearest_cut(const std::vector<double>& c, double x) {
    if (!(x > c.front())) return 0;
    if (!(x < c.back())) return c.size() - 1;
    const auto hi_it = std::upper_bound(c.begin(), c.end(), x);
    const std::size_t hi = static_cast<std::size_t>(hi_it - c.begin());
    const std::size_t lo = hi - 1;
    return (x - c[lo]) >= 0.5 * (c[hi] - c[lo]) ? hi : lo;
  }

  std::vector<Axis> axes_;
  std::vector<std::size_t> strides_;
  enum class Role : std::uint8_t { plain, periodic, categorical, stage };
  std::vector<Role> role_;
  std::vector<double> uniform_step_;  // 1 / spacing for evenly spaced axes, else 0
  std::optional<std::size_t> stage_axis_;
  std::size_t stage_size_ = 0;
  std::size_t vertex_count_ = 0;
};

// ---------------------------------------------------------------------------
// Speed logic lattice

struct GridExtents {
  static constexpr double range_min = 499.0, range_max = 48169.0;
  static constexpr std::size_t range_count = 71;
  static constexpr std::size_t angle_count = 121;
  static constexpr double own_speed_min = 50.0, own_speed_max = 237.0;
  static constexpr std::size_t own_speed_count = 94;
  static constexpr double intruder_speed_min = 0.0, intruder_speed_max = 237.0;
  static constexpr std::size_t intruder_speed_count = 4;
  static constexpr double tau_min = 0.0, tau_max = 100.0;
  static constexpr std::size_t tau_count = 10;
};

inline std::size_t scaled_count(std::size_t n, double scale) {
  // Subtracting a hair keeps e.g. 0.3 * 10 from rounding up to 4.
  const double s = std::ceil(scale * static_cast<double>(n) - 1e-9);
  return std::max<std::size_t>(2, static_cast<std::size_t>(s));
}

inline void check_scale(double scale) {
  if (!(scale > 0.0 && scale <= 1.0)) throw InvalidArgument("scale must be in (0, 1], got " + std::to_string(scale));
}

inline Axis action_axis(std::size_t action_count) {
  std::vector<double> cuts(action_count);
  for (std::size_t i = 0; i < action_count; ++i) cuts[i] = static_cast<double>(i);
  return Axis{"a_prev", std::move(cuts), Unit::none, true};
}

/// Horizontal geometry axes r, theta, psi, v0, v1 at the given scale.
inline std::vector<Axis> horizontal_axes(double scale) {
  check_scale(scale);
  using E = GridExtents;
  constexpr double pi = std::numbers::pi;
  return {
      Axis{"r", linspace(E::range_min, E::range_max, scaled_count(E::range_count, scale)), Unit::feet, false},
      Axis{"theta", linspace(-pi, pi, scaled_count(E::angle_count, scale)), Unit::radians, false},
      Axis{"psi", linspace(-pi, pi, scaled_count(E::angle_count, scale)), Unit::radians, false},
      Axis{"v0", linspace(E::own_speed_min, E::own_speed_max, scaled_count(E::own_speed_count, scale)),
           Unit::feet_per_second, false},
      Axis{"v1", linspace(E::intruder_speed_min, E::intruder_speed_max, scaled_count(E::intruder_speed_count, scale)),
           Unit::feet_per_second, false},
  };
}

inline Axis tau_axis() {
  using E = GridExtents;
  return Axis{"tau", linspace(E::tau_min, E::tau_max, E::tau_count), Unit::seconds, false};
}

/// The speed logic lattice. The stage axis always keeps its 10 stages; the
/// other continuous axes shrink to max(2, ceil(scale * N)) cuts.
inline DiscretizationGrid default_speed_grid(double scale, std::size_t action_count = 4) {
  auto axes = horizontal_axes(scale);
  axes.push_back(action_axis(action_count));
  axes.push_back(tau_axis());
  return DiscretizationGrid(std::move(axes));
}

}  // namespace spdcas
