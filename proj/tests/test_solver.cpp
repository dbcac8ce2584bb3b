#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "spdcas/solver.hpp"

using namespace spdcas;

namespace {

// Random tabular MDP with 3 successors per (stage, state, action).
TabularModel random_model(std::size_t stages, std::size_t states, std::size_t actions, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, states - 1);
  TabularModel m;
  m.stages = stages;
  m.states = states;
  m.actions = actions;
  m.rewards.resize(stages * states * actions);
  for (auto& r : m.rewards) r = u(rng) < 0.2 ? -1.0 : -0.01 * u(rng);
  m.successors.resize(stages * states * actions);
  for (auto& s : m.successors) {
    double a = u(rng), b = u(rng), c = u(rng);
    const double t = a + b + c;
    s = {{pick(rng), a / t}, {pick(rng), b / t}, {pick(rng), c / t}};
  }
  return m;
}

// Exhaustive finite-horizon expectimax: value of (stage, state, action)
// computed recursively without sharing any solver code.
double expectimax(const TabularModel& m, std::size_t stage, std::size_t s, std::size_t a) {
  const double r = m.reward(stage, s, a);
  if (stage == 0 || m.is_terminal(stage, s)) return r;
  double acc = 0.0;
  for (const auto& e : m.successors[(stage * m.states + s) * m.actions + a]) {
    double best = -1e300;
    for (std::size_t b = 0; b < m.actions; ++b) best = std::max(best, expectimax(m, stage - 1, e.index, b));
    acc += e.weight * best;
  }
  return r + m.gamma * acc;
}

}  // namespace

TEST(Solver, ZeroRewardsGiveZeroValues) {
  auto m = random_model(3, 5, 2, 1);
  std::fill(m.rewards.begin(), m.rewards.end(), 0.0);
  for (double v : solve_values(m)) EXPECT_EQ(v, 0.0);
}

TEST(Solver, TwoStateTwoActionToy) {
  TabularModel m;
  m.stages = 2;
  m.states = 2;
  m.actions = 2;
  // stage 0 rewards, then stage 1
  m.rewards = {0.0, -0.1, -1.0, -0.5, /**/ 0.0, -0.2, 0.0, -0.3};
  m.successors = {{}, {}, {}, {},
                  {{0, 0.5}, {1, 0.5}}, {{0, 1.0}},
                  {{1, 1.0}}, {{0, 0.25}, {1, 0.75}}};
  const auto q = solve_values(m);
  ASSERT_EQ(q.size(), 8u);
  // V0 = {0, -0.5}
  EXPECT_NEAR(q[4], 0.5 * 0.0 + 0.5 * -0.5, 1e-12);
  EXPECT_NEAR(q[5], -0.2 + 0.0, 1e-12);
  EXPECT_NEAR(q[6], -0.5, 1e-12);
  EXPECT_NEAR(q[7], -0.3 + 0.75 * -0.5, 1e-12);
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t a = 0; a < 2; ++a) EXPECT_NEAR(q[(2 + s) * 2 + a], expectimax(m, 1, s, a), 1e-12);
}

TEST(Solver, NmacSelfLoopAccumulates) {
  TabularModel m;
  m.stages = 3;
  m.states = 1;
  m.actions = 4;
  m.rewards.assign(12, -1.0);
  m.successors.assign(12, {{0, 1.0}});
  const auto q = solve_values(m);
  for (std::size_t a = 0; a < 4; ++a) EXPECT_DOUBLE_EQ(q[2 * 4 + a], -3.0);
}

TEST(Solver, MatchesExpectimaxOracle) {
  for (std::uint64_t seed : {2u, 3u, 4u}) {
    auto m = random_model(4, 12, 3, seed);
    m.gamma = seed == 3 ? 0.9 : 1.0;
    const auto q = solve_values(m);
    for (std::size_t k = 0; k < m.stages; ++k)
      for (std::size_t s = 0; s < m.states; ++s)
        for (std::size_t a = 0; a < m.actions; ++a)
          EXPECT_NEAR(q[(k * m.states + s) * m.actions + a], expectimax(m, k, s, a), 1e-9);
  }
}

TEST(Solver, TerminalStatesKeepReward) {
  auto m = random_model(3, 6, 2, 7);
  m.terminal.assign(18, false);
  m.terminal[2 * 6 + 1] = true;
  const auto q = solve_values(m);
  EXPECT_EQ(q[(2 * 6 + 1) * 2 + 0], m.reward(2, 1, 0));
  EXPECT_EQ(q[(2 * 6 + 1) * 2 + 1], m.reward(2, 1, 1));
}

TEST(Solver, HorizonBound) {
  auto m = random_model(5, 10, 3, 11);
  const auto q = solve_values(m);
  double rmax = 0.0;
  for (double r : m.rewards) rmax = std::max(rmax, std::abs(r));
  for (std::size_t k = 0; k < m.stages; ++k)
    for (std::size_t i = 0; i < m.states * m.actions; ++i)
      EXPECT_LE(std::abs(q[k * m.states * m.actions + i]), static_cast<double>(k + 1) * rmax + 1e-12);
}

TEST(Solver, MonotoneInNmacPenalty) {
  const auto base = random_model(4, 10, 3, 13);
  auto harsher = base;
  for (auto& r : harsher.rewards)
    if (r == -1.0) r = -5.0;
  const auto a = solve_values(base), b = solve_values(harsher);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_LE(b[i], a[i] + 1e-12);
}

TEST(Solver, StageLocality) {
  const auto base = random_model(4, 8, 2, 17);
  auto perturbed = base;
  // Rewards of stage 1 only reach stage 3 through stage 2.
  for (std::size_t i = 0; i < 16; ++i) perturbed.rewards[16 + i] -= 0.5;
  const auto a = solve_values(base), b = solve_values(perturbed);
  bool stage2_changed = false;
  for (std::size_t i = 32; i < 48; ++i) stage2_changed |= a[i] != b[i];
  EXPECT_TRUE(stage2_changed);
  // Stage 3 is a function of stage-2 values only: recompute it from b's stage 2.
  std::vector<double> v2(8);
  for (std::size_t s = 0; s < 8; ++s) v2[s] = std::max(b[32 + s * 2], b[32 + s * 2 + 1]);
  for (std::size_t s = 0; s < 8; ++s)
    for (std::size_t act = 0; act < 2; ++act) {
      double acc = perturbed.reward(3, s, act);
      for (const auto& e : perturbed.successors[(3 * 8 + s) * 2 + act]) acc += e.weight * v2[e.index];
      EXPECT_NEAR(b[48 + s * 2 + act], acc, 1e-12);
    }
}

TEST(Solver, BellmanBackupCases) {
  TabularModel m;
  m.stages = 2;
  m.states = 3;
  m.actions = 2;
  m.rewards.assign(12, 0.0);
  m.successors.assign(12, {});
  m.successors[(1 * 3 + 0) * 2 + 0] = {{2, 1.0}};
  m.successors[(1 * 3 + 0) * 2 + 1] = {{0, 0.2}, {1, 0.3}, {2, 0.5}};
  const std::vector<double> zeros(3, 0.0);
  for (double v : bellman_backup(m, 1, 0, zeros, 0)) EXPECT_EQ(v, 0.0);
  const std::vector<double> next{-1.0, -2.0, -0.25};
  const auto out = bellman_backup(m, 1, 0, next, 0);
  EXPECT_DOUBLE_EQ(out[0], -0.25);
  EXPECT_DOUBLE_EQ(out[1], 0.2 * -1.0 + 0.3 * -2.0 + 0.5 * -0.25);
}

TEST(Solver, LogicSolveDeterministicAcrossThreads) {
  const auto spec = speed_logic();
  const auto g = logic_grid(spec, 0.03);
  SolveOptions one, three;
  three.threads = 3;
  const QTable a = solve(spec, g, one), b = solve(spec, g, three);
  a.validate();
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.values.size(), g.vertex_count() * 4);
}

TEST(Solver, LogicStageZeroSelfSweeps) {
  LogicSpec p;
  p.coaltitude_sweeps = 0;
  const auto spec = speed_logic(p);
  const auto g = logic_grid(spec, 0.03);
  LogicModel m(spec, g);
  const auto q = solve_values(m);
  for (std::size_t v = 0; v < m.stage_size(); ++v)
    for (std::size_t a = 0; a < 4; ++a) EXPECT_EQ(q[v * 4 + a], m.reward(0, v, a));
}

TEST(Solver, LogicMatchesBruteForceOnSmallLattice) {
  LogicSpec p;
  p.coaltitude_sweeps = 2;
  const auto spec = speed_logic(p);
  const DiscretizationGrid g({Axis{"r", linspace(499.0, 12000.0, 4), Unit::feet, false},
                              Axis{"theta", linspace(-std::numbers::pi, std::numbers::pi, 5), Unit::radians, false},
                              Axis{"psi", linspace(-std::numbers::pi, std::numbers::pi, 5), Unit::radians, false},
                              Axis{"v0", {50.0, 237.0}, Unit::feet_per_second, false},
                              Axis{"v1", {0.0, 237.0}, Unit::feet_per_second, false}, action_axis(4),
                              Axis{"tau", {0.0, 10.0, 20.0}, Unit::seconds, false}});
  ASSERT_LE(g.vertex_count(), 10000u);
  LogicModel m(spec, g);
  const auto q = solve_values(m);
  const std::size_t S = m.stage_size(), A = 4;
  // Stage 0 by repeated backups from R, then stages 1 and 2.
  auto vmax = [&](const std::vector<double>& qs, std::size_t s) {
    double b = qs[s * A];
    for (std::size_t a = 1; a < A; ++a) b = std::max(b, qs[s * A + a]);
    return b;
  };
  std::vector<double> q0(S * A);
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t a = 0; a < A; ++a) q0[s * A + a] = m.reward(0, s, a);
  for (std::size_t sweep = 0; sweep < 2; ++sweep) {
    std::vector<double> nxt(S * A);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) {
        if (m.is_terminal(0, s)) {
          nxt[s * A + a] = m.reward(0, s, a);
          continue;
        }
        double acc = 0.0;
        m.for_each_successor(0, 0, s, a, [&](std::size_t i, double w) { acc += w * vmax(q0, i); });
        nxt[s * A + a] = m.reward(0, s, a) + spec.coaltitude_discount * acc;
      }
    q0 = nxt;
  }
  std::vector<double> prev = q0;
  std::vector<double> all = q0;
  for (std::size_t k = 1; k < 3; ++k) {
    std::vector<double> cur(S * A);
    for (std::size_t s = 0; s < S; ++s)
      for (std::size_t a = 0; a < A; ++a) {
        double acc = 0.0;
        m.for_each_successor(k, k - 1, s, a, [&](std::size_t i, double w) { acc += w * vmax(prev, i); });
        cur[s * A + a] = m.is_terminal(k, s) ? m.reward(k, s, a) : m.reward(k, s, a) + acc;
      }
    all.insert(all.end(), cur.begin(), cur.end());
    prev = cur;
  }
  ASSERT_EQ(all.size(), q.size());
  for (std::size_t i = 0; i < q.size(); ++i) EXPECT_NEAR(q[i], all[i], 1e-9);
}

TEST(Solver, NonFiniteRewardIsReported) {
  auto m = random_model(2, 4, 2, 19);
  m.rewards[(1 * 4 + 3) * 2 + 1] = std::nan("");
  try {
    solve_values(m);
    FAIL() << "expected SolverFailure";
  } catch (const SolverFailure& e) {
    EXPECT_EQ(e.stage(), 1u);
    EXPECT_EQ(e.vertex(), 3u);
  }
}
