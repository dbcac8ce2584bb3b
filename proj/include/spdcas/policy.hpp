#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "spdcas/error.hpp"
#include "spdcas/grid.hpp"
#include "spdcas/logic.hpp"
#include "spdcas/qtable.hpp"

namespace spdcas {

struct ActionValues {
  std::size_t action = 0;
  std::vector<double> values;
};

/// First maximum in ordinal order; ordinal 0 is COC, so ties prefer no alert.
inline std::size_t argmax_preferring_coc(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < values.size(); ++a)
    if (values[a] > values[best]) best = a;
  return best;
}

/// Interpolated action values at a continuous lattice point.
inline std::vector<double> action_values(const QTable& table, std::span<const double> point) {
  if (point.size() != table.grid.axis_count())
    throw InvalidArgument("state has " + std::to_string(point.size()) + " coordinates, table grid has " +
                          std::to_string(table.grid.axis_count()));
  if (table.values.size() != table.grid.vertex_count() * table.action_count)
    throw InvalidArgument("table values do not match its grid");
  for (double x : point)
    if (!std::isfinite(x)) throw InvalidArgument("state coordinates must be finite");
  std::vector<double> q(table.action_count, 0.0);
  const std::size_t A = table.action_count;
  table.grid.for_each_interpolant(point, [&](std::size_t idx, double w) {
    const float* row = table.values.data() + idx * A;
    for (std::size_t a = 0; a < A; ++a) q[a] += w * static_cast<double>(row[a]);
  });
  return q;
}

inline ActionValues best_action(const QTable& table, std::span<const double> point) {
  ActionValues out;
  out.values = action_values(table, point);
  out.action = argmax_preferring_coc(out.values);
  return out;
}

inline ActionValues best_action(const QTable& table, const RelativeState& s) {
  const StateCodec codec(table.grid);
  return best_action(table, codec.encode(s));
}

struct BeliefParticle {
  RelativeState state;
  double weight = 0.0;
};

/// QMDP: argmax over actions of the belief-weighted interpolated values.
inline ActionValues qmdp_action(const QTable& table, std::span<const BeliefParticle> belief) {
  if (belief.empty()) throw InvalidArgument("belief is empty");
  double total = 0.0;
  for (const auto& p : belief) {
    if (!(p.weight >= 0.0)) throw InvalidArgument("belief weights must be nonnegative");
    total += p.weight;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("belief weights must sum to 1");
  const StateCodec codec(table.grid);
  std::vector<double> point(codec.size());
  ActionValues out;
  out.values.assign(table.action_count, 0.0);
  for (const auto& p : belief) {
    codec.encode(p.state, point);
    const auto q = action_values(table, point);
    for (std::size_t a = 0; a < q.size(); ++a) out.values[a] += p.weight * q[a];
  }
  out.action = argmax_preferring_coc(out.values);
  return out;
}

/// Table bound to its action set, for repeated online lookups.
class TablePolicy {
 public:
  explicit TablePolicy(const QTable& table)
      : table_(&table), codec_(table.grid), actions_(actions_for(table.kind, table.action_count)) {
    dim_ = dimension_of(table.kind);
  }

  const QTable& table() const { return *table_; }
  Dimension dimension() const { return dim_; }
  const std::vector<Advisory>& actions() const { return actions_; }
  bool wants_altitude() const { return codec_.has_vertical(); }

  ActionValues lookup(const RelativeState& s) const {
    std::array<double, kMaxAxes> p{};
    const std::span<double> pt(p.data(), codec_.size());
    codec_.encode(s, pt);
    return best_action(*table_, pt);
  }

  ActionValues lookup(std::span<const BeliefParticle> belief) const { return qmdp_action(*table_, belief); }

 private:
  const QTable* table_;
  StateCodec codec_;
  std::vector<Advisory> actions_;
  Dimension dim_ = Dimension::speed;
};

/// Concurrent advisories of one aircraft, one slot per dimension.
struct CompositeAdvisory {
  Advisory speed{Dimension::speed, AdvisoryKind::COC, 0.0};
  Advisory horizontal{Dimension::horizontal, AdvisoryKind::COC, 0.0};
  Advisory vertical{Dimension::vertical, AdvisoryKind::COC, 0.0};

  bool alert() const { return speed.alerting() || horizontal.alerting() || vertical.alerting(); }

  const Advisory& in(Dimension d) const {
    switch (d) {
      case Dimension::speed: return speed;
      case Dimension::horizontal: return horizontal;
      case Dimension::vertical: return vertical;
    }
    return speed;
  }

  bool operator==(const CompositeAdvisory&) const = default;
};

inline CompositeAdvisory blend(std::span<const Advisory> advisories) {
  CompositeAdvisory c;
  std::array<bool, 3> seen{};
  for (const Advisory& a : advisories) {
    const auto d = static_cast<std::size_t>(a.dim);
    if (seen[d]) throw InvalidArgument("two advisories in the " + std::string(to_string(a.dim)) + " dimension");
    seen[d] = true;
    switch (a.dim) {
      case Dimension::speed: c.speed = a; break;
      case Dimension::horizontal: c.horizontal = a; break;
      case Dimension::vertical: c.vertical = a; break;
    }
  }
  return c;
}

}  // namespace spdcas
