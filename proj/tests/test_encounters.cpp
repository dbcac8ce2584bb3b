#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "spdcas/encounters.hpp"

using namespace spdcas;

namespace {

// Exact CPA of two straight-line tracks.
std::pair<double, double> straight_cpa(const AircraftInit& a, const AircraftInit& b) {
  const double px = b.x - a.x, py = b.y - a.y;
  const double vx = b.speed * std::sin(b.heading) - a.speed * std::sin(a.heading);
  const double vy = b.speed * std::cos(b.heading) - a.speed * std::cos(a.heading);
  const double vv = vx * vx + vy * vy;
  const double t = vv > 0.0 ? -(px * vx + py * vy) / vv : 0.0;
  return {t, std::hypot(px + vx * t, py + vy * t)};
}

// Integrates the scripted intruder and returns its separation from a static origin at each second.
std::vector<double> hover_separations(const Encounter& e) {
  std::vector<double> out;
  AircraftState s = e.intruder.to_state();
  for (long k = 0; k <= static_cast<long>(e.duration); ++k) {
    out.push_back(std::hypot(s.x - e.ownship.x, s.y - e.ownship.y));
    s = advance(s, scripted_controls(e, static_cast<double>(k)), 1.0, 0.0, 1e9);
  }
  return out;
}

}  // namespace

TEST(Opsuit, DeterministicPerSeed) {
  const auto a = gen_opsuit_like(50, 42), b = gen_opsuit_like(50, 42), c = gen_opsuit_like(50, 43);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  EXPECT_EQ(encounters_to_jsonl(a), encounters_to_jsonl(b));
  // Prefixes agree: encounter i depends only on (seed, i).
  const auto d = gen_opsuit_like(10, 42);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(d[i].ownship, a[i].ownship);
  EXPECT_THROW(gen_opsuit_like(0, 1), InvalidArgument);
}

TEST(Opsuit, ConstructedClosestApproachHolds) {
  const OpsuitParams p;
  const auto set = gen_opsuit_like(300, 7, p);
  double wsum = 0.0;
  for (const auto& e : set) {
    wsum += e.weight;
    EXPECT_EQ(e.kind, "opsuit");
    EXPECT_GE(e.ownship.speed, p.own_speed_min);
    EXPECT_LE(e.ownship.speed, p.own_speed_max);
    EXPECT_LE(e.intruder.speed, p.intruder_speed_max);
    EXPECT_GE(e.cpa.hmd, 0.0);
    EXPECT_LE(e.cpa.hmd, p.hmd_max);
    EXPECT_LE(e.cpa.vmd, p.vmd_max);
    EXPECT_DOUBLE_EQ(e.intruder.vertical_rate, 0.0);
    const auto [t, hmd] = straight_cpa(e.ownship, e.intruder);
    EXPECT_NEAR(hmd, e.cpa.hmd, 1e-6 * std::max(1.0, e.cpa.hmd));
    const double closure =
        std::hypot(e.intruder.speed * std::sin(e.intruder.heading) - e.ownship.speed * std::sin(e.ownship.heading),
                   e.intruder.speed * std::cos(e.intruder.heading) - e.ownship.speed * std::cos(e.ownship.heading));
    if (closure > 1.0) EXPECT_NEAR(t, p.cpa_time, 1e-6);
    EXPECT_NEAR(std::abs(e.intruder.z - e.ownship.z), e.cpa.vmd, 1e-9);
    EXPECT_GE(e.cpa.rel_heading, 0.0);
    EXPECT_LT(e.cpa.rel_heading, 2.0 * std::numbers::pi);
  }
  EXPECT_NEAR(wsum, 1.0, 1e-12);
}

TEST(Hovering, OwnshipStaticAndCpaAtConstruction) {
  const HoverParams p;
  const auto set = gen_hovering(400, 11, p);
  std::size_t loiter = 0;
  for (const auto& e : set) {
    EXPECT_DOUBLE_EQ(e.ownship.speed, 0.0);
    EXPECT_DOUBLE_EQ(e.ownship.heading, 0.0);
    EXPECT_DOUBLE_EQ(e.intruder.z, e.ownship.z);
    EXPECT_GE(e.intruder.speed, p.intruder_speed_min);
    EXPECT_LE(e.intruder.speed, p.intruder_speed_max);
    const auto sep = hover_separations(e);
    const auto cpa_k = static_cast<std::size_t>(p.cpa_time);
    EXPECT_NEAR(sep[cpa_k], e.cpa.hmd, 1e-6);
    for (std::size_t k = 0; k < sep.size(); ++k)
      if (k != cpa_k) EXPECT_GE(sep[k], e.cpa.hmd - 1e-6);
    if (e.kind == "hover-loiter") {
      ++loiter;
      ASSERT_EQ(e.script.size(), 2u);
      EXPECT_NE(e.script[0].turn_rate, 0.0);
      EXPECT_DOUBLE_EQ(e.script[1].turn_rate, 0.0);
    } else {
      EXPECT_EQ(e.kind, "hover-transit");
      EXPECT_TRUE(e.script.empty());
    }
  }
  EXPECT_GT(loiter, 60u);
  EXPECT_LT(loiter, 180u);
  EXPECT_EQ(gen_hovering(20, 11, p), gen_hovering(20, 11, p));
}

TEST(Pairwise, HeadOnMeetsAtRangeOverClosure) {
  const Encounter e = gen_pairwise(PairwiseGeometry::head_on, 4000.0, 100.0, 100.0);
  EXPECT_DOUBLE_EQ(e.cpa.time, 20.0);
  EXPECT_NEAR(e.intruder.y, 4000.0, 1e-9);
  EXPECT_NEAR(e.intruder.x, 0.0, 1e-9);
  EXPECT_NEAR(e.intruder.heading, std::numbers::pi, 1e-12);
  const auto [t, hmd] = straight_cpa(e.ownship, e.intruder);
  EXPECT_NEAR(t, 20.0, 1e-9);
  EXPECT_NEAR(hmd, 0.0, 1e-9);
  EXPECT_GE(e.duration, 2.0 * t);
}

TEST(Pairwise, CrossingAndOvertake) {
  const Encounter c = gen_pairwise(PairwiseGeometry::crossing, 5000.0, 100.0, 100.0, 0.0, 90.0);
  const auto [t, hmd] = straight_cpa(c.ownship, c.intruder);
  EXPECT_NEAR(hmd, 0.0, 1e-9);
  EXPECT_NEAR(t, 5000.0 / std::hypot(100.0, 100.0), 1e-9);
  std::vector<std::string> warnings;
  const Encounter o = gen_pairwise(PairwiseGeometry::overtake, 3000.0, 100.0, 150.0, 0.0, 90.0, &warnings);
  EXPECT_EQ(warnings.size(), 1u);
  EXPECT_DOUBLE_EQ(o.intruder.y, 3000.0);
  warnings.clear();
  const Encounter ok = gen_pairwise(PairwiseGeometry::overtake, 3000.0, 150.0, 100.0, 0.0, 90.0, &warnings);
  EXPECT_TRUE(warnings.empty());
  EXPECT_NEAR(ok.cpa.time, 60.0, 1e-9);
  EXPECT_THROW(gen_pairwise(PairwiseGeometry::head_on, 0.0, 100.0, 100.0), InvalidArgument);
  EXPECT_THROW(gen_pairwise(PairwiseGeometry::head_on, 100.0, -1.0, 100.0), InvalidArgument);
  EXPECT_EQ(parse_pairwise_geometry("head-on"), PairwiseGeometry::head_on);
  EXPECT_THROW(parse_pairwise_geometry("sideways"), InvalidArgument);
}

TEST(Jsonl, RoundTrip) {
  auto set = gen_hovering(30, 3);
  const auto more = gen_opsuit_like(30, 3);
  set.insert(set.end(), more.begin(), more.end());
  std::istringstream in(encounters_to_jsonl(set));
  const auto back = encounters_from_jsonl(in);
  ASSERT_EQ(back.size(), set.size());
  // Doubles are serialized with round-trip precision.
  EXPECT_EQ(back, set);
}

TEST(Jsonl, MalformedLinesNamed) {
  const std::string good = encounters_to_jsonl(gen_opsuit_like(2, 1));
  {
    std::istringstream in(good + "{not json}\n");
    try {
      encounters_from_jsonl(in, "set.jsonl");
      FAIL();
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 3u);
      EXPECT_NE(std::string(e.what()).find("set.jsonl:3"), std::string::npos);
    }
  }
  {
    auto j = to_json(gen_opsuit_like(1, 1)[0]);
    j.erase("weight");
    std::istringstream in(j.dump() + "\n");
    try {
      encounters_from_jsonl(in);
      FAIL();
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 1u);
      EXPECT_NE(std::string(e.what()).find("weight"), std::string::npos);
    }
  }
  {
    auto j = to_json(gen_opsuit_like(1, 1)[0]);
    j["weight"] = -1.0;
    std::istringstream in("\n" + j.dump() + "\n");
    try {
      encounters_from_jsonl(in);
      FAIL();
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), 2u);
    }
  }
}

TEST(Script, ControlsHeldUntilNextEntry) {
  Encounter e = gen_hovering(1, 5)[0];
  e.script = {{0.0, 0.01, 0.0, 0.0}, {10.0, 0.0, 1.5, 600.0}};
  EXPECT_DOUBLE_EQ(scripted_controls(e, 0.0).turn_rate, 0.01);
  EXPECT_DOUBLE_EQ(scripted_controls(e, 9.99).turn_rate, 0.01);
  const auto u = scripted_controls(e, 10.0);
  EXPECT_DOUBLE_EQ(u.turn_rate, 0.0);
  EXPECT_DOUBLE_EQ(u.accel, 1.5);
  EXPECT_DOUBLE_EQ(u.vertical_rate, 10.0);
  e.script = {{5.0, 0.0, 0.0, 0.0}, {4.0, 0.0, 0.0, 0.0}};
  EXPECT_THROW(e.validate(), InvalidArgument);
}
