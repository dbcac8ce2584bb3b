#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "spdcas/metrics.hpp"

using namespace spdcas;

namespace {

SimResult result(const std::string& id, bool nmac, bool alerted = false, std::size_t rep = 0) {
  SimResult r;
  r.id = id;
  r.repetition = rep;
  r.nmac = nmac;
  r.alerted = alerted;
  if (alerted) r.first_alert_time = 1.0;
  return r;
}

SubsetMap table5() {
  std::ifstream f(std::string(SPDCAS_DATA_DIR) + "/table5.csv");
  return read_subset_csv(f, "table5.csv");
}

}  // namespace

TEST(RiskRatio, SelfIsOne) {
  const std::vector<SimResult> a{result("a", true), result("b", false), result("c", true)};
  EXPECT_DOUBLE_EQ(risk_ratio(a, a), 1.0);
}

TEST(RiskRatio, ZeroNumeratorAndUndefinedDenominator) {
  const std::vector<SimResult> cas{result("a", false), result("b", false)};
  const std::vector<SimResult> base{result("a", true), result("b", false)};
  EXPECT_DOUBLE_EQ(risk_ratio(cas, base), 0.0);
  EXPECT_THROW(risk_ratio(base, cas), UndefinedRatio);
}

TEST(RiskRatio, WeightedAndRepetitions) {
  const std::vector<SimResult> cas{result("a", true, false, 0), result("a", false, false, 1), result("b", false)};
  const std::vector<SimResult> base{result("a", true), result("b", true)};
  const WeightMap w{{"a", 0.25}, {"b", 0.75}};
  EXPECT_DOUBLE_EQ(risk_ratio(cas, base, w), 0.25 * 0.5 / 1.0);
  EXPECT_DOUBLE_EQ(risk_ratio(cas, base), 0.5 / 2.0);
  EXPECT_DOUBLE_EQ(weighted_pnmac(cas, w), 0.125);
}

TEST(RiskRatio, InvariantUnderWeightRescale) {
  const std::vector<SimResult> cas{result("a", true), result("b", false), result("c", true)};
  const std::vector<SimResult> base{result("a", true), result("b", true), result("c", true)};
  const WeightMap w{{"a", 0.2}, {"b", 0.5}, {"c", 0.3}};
  WeightMap tiny;
  for (const auto& [k, v] : w) tiny[k] = v * 1e-12;
  EXPECT_NEAR(risk_ratio(cas, base, tiny), risk_ratio(cas, base, w), 1e-12);
}

TEST(RiskRatio, MismatchedSetsRejected) {
  const std::vector<SimResult> a{result("a", true)}, b{result("b", true)};
  EXPECT_THROW(risk_ratio(a, b), InvalidArgument);
  const std::vector<SimResult> c{result("a", true), result("b", true)};
  EXPECT_THROW(risk_ratio(a, c), InvalidArgument);
  EXPECT_THROW(weighted_pnmac(a, WeightMap{{"z", 1.0}}), InvalidArgument);
}

TEST(AlertRate, AnyRepetitionCounts) {
  const std::vector<SimResult> r{result("a", false, true, 0), result("a", false, false, 1), result("b", false),
                                 result("c", false, true)};
  EXPECT_DOUBLE_EQ(alert_rate(r), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(alert_rate(r, WeightMap{{"a", 1.0}, {"b", 2.0}, {"c", 1.0}}), 0.5);
  EXPECT_THROW(alert_rate({}), InvalidArgument);
}

TEST(ResponseModel, SubsetProbabilities) {
  const auto p = response_subset_probs(0.1, 3);
  ASSERT_EQ(p.size(), 8u);
  double sum = 0.0;
  for (const auto& [m, v] : p) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(p.at(0), 0.1);
  EXPECT_NEAR(response_probability(0.1, 3), 0.53584, 5e-6);
  EXPECT_NEAR(p.at(1), 0.11544, 5e-6);
  EXPECT_NEAR(p.at(3), 0.13327, 5e-6);
  EXPECT_NEAR(p.at(7), 0.15385, 5e-6);
  const auto two = response_subset_probs(0.1, 2);
  ASSERT_EQ(two.size(), 4u);
  EXPECT_DOUBLE_EQ(two.at(0), 0.1);
  EXPECT_THROW(response_subset_probs(-0.1, 3), InvalidArgument);
  EXPECT_THROW(response_subset_probs(0.1, 1), InvalidArgument);
}

TEST(ResponseModel, EndpointsAndMonotone) {
  const auto pn = table5();
  for (int n : {2, 3}) {
    const auto all = restrict_subsets(pn, n == 3 ? 7u : 3u);
    EXPECT_DOUBLE_EQ(weighted_system_pnmac(all, response_subset_probs(1.0, n)), pn.at(0));
    EXPECT_DOUBLE_EQ(weighted_system_pnmac(all, response_subset_probs(0.0, n)), pn.at(n == 3 ? 7u : 3u));
  }
  const auto curve = response_curve(pn, sweep_points(0.05));
  ASSERT_EQ(curve.size(), 21u);
  EXPECT_DOUBLE_EQ(curve.back().with_speed, 1.0);
  EXPECT_DOUBLE_EQ(curve.back().without_speed, 1.0);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_GE(curve[i].with_speed, curve[i - 1].with_speed);
    EXPECT_GE(curve[i].without_speed, curve[i - 1].without_speed);
  }
}

TEST(ResponseModel, MissingSubsetRejected) {
  auto pn = table5();
  pn.erase(5u);
  EXPECT_THROW(weighted_system_pnmac(pn, response_subset_probs(0.1, 3)), InvalidArgument);
  SubsetMap no_none{{1u, 0.1}};
  EXPECT_THROW(response_curve(no_none, {0.5}), InvalidArgument);
  SubsetMap zero_none{{0u, 0.0}, {1u, 0.0}, {2u, 0.0}, {3u, 0.0}};
  EXPECT_THROW(response_curve(zero_none, {0.5}), UndefinedRatio);
}

TEST(ResponseModel, SubsetCsv) {
  std::istringstream ok("subset,pnmac\nNone,0.5\nH+V,0.25\r\n\n");
  const auto m = read_subset_csv(ok);
  EXPECT_EQ(m.size(), 2u);
  EXPECT_DOUBLE_EQ(m.at(3u), 0.25);
  std::istringstream bad_header("a,b\n");
  EXPECT_THROW(read_subset_csv(bad_header), ParseError);
  std::istringstream bad_value("subset,pnmac\nH,1.5\n");
  try {
    read_subset_csv(bad_value);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream dup("subset,pnmac\nH,0.1\nH,0.2\n");
  EXPECT_THROW(read_subset_csv(dup), ParseError);
  std::istringstream junk("subset,pnmac\nQ,0.1\n");
  EXPECT_THROW(read_subset_csv(junk), ParseError);
}

TEST(Histogram, BinsEachNmacOnce) {
  std::vector<Encounter> set(3);
  set[0].id = "a";
  set[0].cpa.rel_heading = 5.0 * std::numbers::pi / 180.0;
  set[1].id = "b";
  set[1].cpa.rel_heading = 185.0 * std::numbers::pi / 180.0;
  set[2].id = "c";
  set[2].cpa.rel_heading = 359.9 * std::numbers::pi / 180.0;
  const std::vector<SimResult> r{result("a", true, false, 0), result("a", true, false, 1), result("b", true),
                                 result("c", false)};
  const auto h = nmac_heading_histogram(r, set, 10.0);
  ASSERT_EQ(h.counts.size(), 36u);
  EXPECT_EQ(h.counts[0], 2u);
  EXPECT_EQ(h.counts[18], 1u);
  EXPECT_EQ(h.total(), 3u);
  EXPECT_EQ(h.count_in(0.0, 90.0), 2u);
  EXPECT_THROW(nmac_heading_histogram(r, set, 7.0), InvalidArgument);
  EXPECT_THROW(nmac_heading_histogram({result("zz", true)}, set, 10.0), InvalidArgument);
  std::ostringstream os;
  write_histogram_csv(os, h);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "bin_start_deg,bin_end_deg,nmac_count");
}

TEST(Profile, Categories) {
  EXPECT_EQ(profile_category(0), "COC");
  EXPECT_EQ(profile_category(3), "V+H");
  EXPECT_EQ(profile_category(5), "H+S");
  EXPECT_EQ(profile_category(6), "V+S");
  EXPECT_EQ(profile_category(7), "V+H+S");
}

TEST(Profile, SpeedOnlyTableUsesCocAndS) {
  const LogicSpec spec = speed_logic();
  QTable t;
  t.kind = LogicKind::speed;
  t.grid = logic_grid(spec, 0.03);
  t.action_count = 4;
  t.values.assign(t.grid.vertex_count() * 4, -1.0f);
  // Alert only where the range is at the smallest cut.
  const std::size_t r_axis = *t.grid.find_axis("r");
  for (std::size_t v = 0; v < t.grid.vertex_count(); ++v)
    t.values[v * 4 + (t.grid.multi_index_of(v)[r_axis] == 0 ? 1 : 0)] = 0.0f;
  ProfileParams p;
  p.extent_nmi = 1.0;
  p.cell_nmi = 0.5;
  p.seed = 3;
  p.sensor = {0.0, 0.0, 0.0, 0.0};
  const auto prof = alerting_profile({&t}, p);
  ASSERT_EQ(prof.cross_track_nmi.size(), 5u);
  bool any_s = false;
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 5; ++c) {
      const auto cat = prof.category(r, c);
      EXPECT_TRUE(cat == "COC" || cat == "S");
      any_s |= cat == "S";
    }
  EXPECT_TRUE(any_s);
  std::ostringstream os;
  write_profile_csv(os, prof);
  std::size_t lines = 0;
  for (char ch : os.str()) lines += ch == '\n';
  EXPECT_EQ(lines, 26u);
  p.threads = 2;
  EXPECT_EQ(alerting_profile({&t}, p).masks, prof.masks);
}

TEST(Report, EvaluateAndJson) {
  std::vector<Encounter> set(2);
  set[0].id = "a";
  set[0].weight = 0.5;
  set[1].id = "b";
  set[1].weight = 0.5;
  const std::vector<SimResult> cas{result("a", false, true), result("b", true, true)};
  const std::vector<SimResult> base{result("a", true), result("b", true)};
  EvaluateInputs in;
  in.results = &cas;
  in.baseline = &base;
  in.encounters = &set;
  in.p_no_response = 0.1;
  const auto rep = evaluate(in);
  EXPECT_DOUBLE_EQ(rep.p_nmac, 0.5);
  EXPECT_DOUBLE_EQ(*rep.risk_ratio, 0.5);
  EXPECT_DOUBLE_EQ(rep.alert_rate, 1.0);
  const auto j = to_json(rep);
  EXPECT_EQ(j["nmac_count"], 1);
  EXPECT_EQ(j["thresholds"].size(), 3u);
  EXPECT_FALSE(j["thresholds"][0]["meets"].get<bool>());
  EXPECT_EQ(j["pilot_response"]["subset_probs"].size(), 8u);
  EXPECT_EQ(j["nmac_heading_histogram"]["counts"].size(), 36u);

  const std::vector<SimResult> clean{result("a", false), result("b", false)};
  in.baseline = &clean;
  const auto undefined = evaluate(in);
  EXPECT_FALSE(undefined.risk_ratio.has_value());
  EXPECT_FALSE(undefined.risk_ratio_note.empty());
  EXPECT_TRUE(to_json(undefined)["risk_ratio"].is_null());
}
