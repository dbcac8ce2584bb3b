#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <exception>
#include <functional>
#include <iostream>
#include <limits>
#include <span>
#include <thread>
#include <vector>

#include "spdcas/error.hpp"
#include "spdcas/grid.hpp"
#include "spdcas/logic.hpp"
#include "spdcas/qtable.hpp"

namespace spdcas {

inline constexpr std::uint32_t kSolverVersion = 1;

/// A finite-horizon MDP laid out as stages of equal size.
///
/// Stage 0 starts from Q = R. Every later stage k is one backup whose
/// successors live in stage k-1. A stage may then run `self_sweeps(k)` extra
/// backups whose successors live in stage k itself. `discount(k, target)`
/// applies to the backup from stage k into `target`. Terminal vertices keep
/// Q = R. `group_size()` consecutive vertices of a stage share successor
/// distributions, so the solver expands them once per group.
template <class M>
concept StagedModel = requires(const M& m, std::size_t stage, std::size_t v, std::size_t a) {
  { m.stage_count() } -> std::convertible_to<std::size_t>;
  { m.stage_size() } -> std::convertible_to<std::size_t>;
  { m.action_count() } -> std::convertible_to<std::size_t>;
  { m.discount(stage, stage) } -> std::convertible_to<double>;
  { m.self_sweeps(stage) } -> std::convertible_to<std::size_t>;
  { m.group_size() } -> std::convertible_to<std::size_t>;
  { m.reward(stage, v, a) } -> std::convertible_to<double>;
  { m.is_terminal(stage, v) } -> std::convertible_to<bool>;
  m.for_each_successor(stage, stage, v, a, [](std::size_t, double) {});
};

/// Explicit small MDP, mostly for tests and hand-built examples.
struct TabularModel {
  std::size_t stages = 1;
  std::size_t states = 1;
  std::size_t actions = 1;
  double gamma = 1.0;
  std::size_t sweeps_at_stage0 = 0;
  // rewards[(stage * states + s) * actions + a]
  std::vector<double> rewards;
  // successors[(stage * states + s) * actions + a] -> (state in target stage, probability)
  std::vector<std::vector<Interpolant>> successors;
  std::vector<bool> terminal;  // optional, [stage * states + s]

  std::size_t stage_count() const { return stages; }
  std::size_t stage_size() const { return states; }
  std::size_t action_count() const { return actions; }
  double discount(std::size_t, std::size_t) const { return gamma; }
  std::size_t self_sweeps(std::size_t stage) const { return stage == 0 ? sweeps_at_stage0 : 0; }
  std::size_t group_size() const { return 1; }
  double reward(std::size_t stage, std::size_t s, std::size_t a) const {
    return rewards.at((stage * states + s) * actions + a);
  }
  bool is_terminal(std::size_t stage, std::size_t s) const {
    return !terminal.empty() && terminal.at(stage * states + s);
  }
  template <class Fn>
  void for_each_successor(std::size_t stage, std::size_t, std::size_t s, std::size_t a, Fn&& fn) const {
    for (const auto& e : successors.at((stage * states + s) * actions + a)) fn(e.index, e.weight);
  }
};

/// Collision avoidance logic on its lattice. Stage k sits at tau cut k; the
/// co-altitude stage (tau = 0) runs `coaltitude_sweeps` extra backups of
/// `coaltitude_dt` seconds, discounted by `coaltitude_discount`, so the
/// horizontal encounter keeps evolving while the aircraft are vertically
/// co-incident. NMAC vertices are absorbing.
class LogicModel {
 public:
  LogicModel(const LogicSpec& spec, const DiscretizationGrid& grid) : tm_(spec, grid) {
    const auto a_axis = *grid.find_axis("a_prev");
    group_ = grid.stride(a_axis) == 1 ? spec.action_count() : 1;
    if (auto t = grid.find_axis("tau")) tau_ = grid.axis(*t).cuts;
    else tau_ = {0.0};
    tm_.prepare(spec.coaltitude_dt);
    for (std::size_t k = 1; k < tau_.size(); ++k) tm_.prepare(tau_[k] - tau_[k - 1]);
  }

  const LogicSpec& spec() const { return tm_.spec(); }
  const DiscretizationGrid& grid() const { return tm_.grid(); }

  std::size_t stage_count() const { return grid().stage_count(); }
  std::size_t stage_size() const { return grid().stage_size(); }
  std::size_t action_count() const { return spec().action_count(); }
  double discount(std::size_t stage, std::size_t target) const {
    return stage == target ? spec().coaltitude_discount : spec().weights.discount;
  }
  std::size_t self_sweeps(std::size_t stage) const { return stage == 0 ? spec().coaltitude_sweeps : 0; }
  std::size_t group_size() const { return group_; }

  RelativeState state(std::size_t stage, std::size_t v) const {
    std::array<double, kMaxAxes> p{};
    const std::span<double> pt(p.data(), grid().axis_count());
    grid().vertex_into(stage * stage_size() + v, pt);
    return tm_.codec().decode(pt);
  }

  double reward(std::size_t stage, std::size_t v, std::size_t a) const {
    return spdcas::reward(spec(), state(stage, v), a);
  }

  bool is_terminal(std::size_t stage, std::size_t v) const {
    return is_nmac_state(state(stage, v), spec().has_vertical_axis());
  }

  double step_seconds(std::size_t stage, std::size_t target) const {
    return stage == target ? spec().coaltitude_dt : tau_[stage] - tau_[target];
  }

  template <class Fn>
  void for_each_successor(std::size_t stage, std::size_t target, std::size_t v, std::size_t a, Fn&& fn) const {
    const std::size_t offset = target * stage_size();
    tm_.for_each(state(stage, v), a, step_seconds(stage, target), [&](std::size_t idx, double p) {
      // Successors always land in the target stage by construction.
      fn(idx - offset, p);
    });
  }

 private:
  TransitionModel tm_;
  std::size_t group_ = 1;
  std::vector<double> tau_;
};

struct SolveOptions {
  std::size_t threads = 1;
  std::ostream* progress = nullptr;
};

namespace detail {

template <StagedModel M>
double expected_next(const M& m, std::size_t stage, std::size_t target, std::size_t v, std::size_t a,
                     std::span<const double> next_values) {
  double sum = 0.0;
  m.for_each_successor(stage, target, v, a, [&](std::size_t idx, double p) { sum += p * next_values[idx]; });
  return sum;
}

inline void max_per_vertex(std::span<const double> q, std::size_t actions, std::vector<double>& out) {
  out.resize(q.size() / actions);
  for (std::size_t v = 0; v < out.size(); ++v) {
    double best = q[v * actions];
    for (std::size_t a = 1; a < actions; ++a) best = std::max(best, q[v * actions + a]);
    out[v] = best;
  }
}

template <class Fn>
void parallel_ranges(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    fn(std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    const std::size_t lo = std::min(n, t * chunk), hi = std::min(n, lo + chunk);
    pool.emplace_back([&, t, lo, hi] {
      try {
        fn(lo, hi);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Right-hand side of the Bellman update at one vertex, one entry per action.
template <StagedModel M>
std::vector<double> bellman_backup(const M& m, std::size_t stage, std::size_t target,
                                   std::span<const double> next_values, std::size_t v) {
  std::vector<double> out(m.action_count());
  const bool terminal = m.is_terminal(stage, v);
  for (std::size_t a = 0; a < out.size(); ++a) {
    const double r = m.reward(stage, v, a);
    out[a] = terminal ? r : r + m.discount(stage, target) * detail::expected_next(m, stage, target, v, a, next_values);
  }
  return out;
}

/// Backward induction over all stages. `sink(stage, q)` receives each finished
/// stage as double-precision values laid out vertex-major, action-minor.
template <StagedModel M, class Sink>
void solve_stages(const M& m, const SolveOptions& opt, Sink&& sink) {
  const std::size_t S = m.stage_size(), A = m.action_count(), G = std::max<std::size_t>(1, m.group_size());
  if (m.stage_count() == 0) throw InvalidArgument("model has no stages");
  if (S % G != 0) throw InvalidArgument("stage size is not a multiple of the group size");
  std::vector<double> rewards(S * A), q(S * A), q_next(S * A), next_values;
  std::vector<char> terminal(S);

  auto backup = [&](std::size_t stage, std::size_t target, std::span<const double> nv, std::vector<double>& out) {
    const double gamma = m.discount(stage, target);
    detail::parallel_ranges(S / G, opt.threads, [&](std::size_t g_lo, std::size_t g_hi) {
      std::vector<double> expect(A);
      for (std::size_t g = g_lo; g < g_hi; ++g) {
        bool expanded = false;
        for (std::size_t v = g * G; v < (g + 1) * G; ++v) {
          if (terminal[v]) {
            for (std::size_t a = 0; a < A; ++a) out[v * A + a] = rewards[v * A + a];
            continue;
          }
          if (!expanded) {
            for (std::size_t a = 0; a < A; ++a) expect[a] = detail::expected_next(m, stage, target, v, a, nv);
            expanded = true;
          }
          for (std::size_t a = 0; a < A; ++a) out[v * A + a] = rewards[v * A + a] + gamma * expect[a];
        }
      }
    });
  };

  auto check_finite = [&](std::size_t stage, const std::vector<double>& values) {
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!std::isfinite(values[i])) throw SolverFailure(stage, i / A, "non-finite action value");
  };

  for (std::size_t k = 0; k < m.stage_count(); ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    detail::parallel_ranges(S, opt.threads, [&](std::size_t lo, std::size_t hi) {
      for (std::size_t v = lo; v < hi; ++v) {
        terminal[v] = m.is_terminal(k, v) ? 1 : 0;
        for (std::size_t a = 0; a < A; ++a) rewards[v * A + a] = m.reward(k, v, a);
      }
    });
    check_finite(k, rewards);
    if (k == 0) {
      q = rewards;
    } else {
      backup(k, k - 1, next_values, q);
      check_finite(k, q);
    }
    const std::size_t sweeps = m.self_sweeps(k);
    for (std::size_t j = 0; j < sweeps; ++j) {
      detail::max_per_vertex(q, A, next_values);
      backup(k, k, next_values, q_next);
      check_finite(k, q_next);
      q.swap(q_next);
    }
    if (opt.progress) {
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      const double backups = static_cast<double>(S) * static_cast<double>((k == 0 ? 0 : 1) + sweeps);
      *opt.progress << "stage " << k + 1 << "/" << m.stage_count() << ": " << S << " vertices, " << sweeps
                    << " self-sweeps, " << secs << " s";
      if (secs > 0.0) *opt.progress << " (" << static_cast<long long>(backups / secs) << " vertices/s)";
      *opt.progress << "\n";
    }
    sink(k, std::span<const double>(q));
    detail::max_per_vertex(q, A, next_values);
  }
}

/// All stages at full precision, stage-major.
template <StagedModel M>
std::vector<double> solve_values(const M& m, const SolveOptions& opt = {}) {
  std::vector<double> all;
  all.reserve(m.stage_count() * m.stage_size() * m.action_count());
  solve_stages(m, opt, [&](std::size_t, std::span<const double> q) { all.insert(all.end(), q.begin(), q.end()); });
  return all;
}

/// Compiles a logic into a table. Accumulates in double, stores float.
inline QTable solve(const LogicSpec& spec, const DiscretizationGrid& grid, const SolveOptions& opt = {}) {
  LogicModel model(spec, grid);
  QTable t;
  t.kind = spec.kind;
  t.grid = grid;
  t.action_count = static_cast<std::uint32_t>(spec.action_count());
  t.values.reserve(grid.vertex_count() * spec.action_count());
  solve_stages(model, opt, [&](std::size_t, std::span<const double> q) {
    for (double v : q) t.values.push_back(static_cast<float>(v));
  });
  return t;
}

}  // namespace spdcas
