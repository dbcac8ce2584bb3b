#include <gtest/gtest.h>

#include "spdcas/config.hpp"

using namespace spdcas;
using nlohmann::json;

TEST(Config, DefaultsWhenEmpty) {
  const RunConfig rc = run_config_from_json(json::object());
  EXPECT_DOUBLE_EQ(rc.scale, 0.1);
  EXPECT_FALSE(rc.has_seed);
  EXPECT_EQ(rc.threads, 1u);
  EXPECT_EQ(rc.sim.repetitions, 1u);
}

TEST(Config, FullFileParses) {
  const json j = json::parse(R"({
    "scale": 0.2, "seed": 17, "threads": 2,
    "logic": {"accel_g": 0.1, "noise": {"own_speed": 2.0}, "weights": {"nmac_penalty": -2.0},
              "coaltitude": {"dt": 5.0, "sweeps": 3, "discount": 0.8}},
    "sim": {"dt": 0.5, "repetitions": 4, "equipage": "equipped-equipped",
            "sensor": {"range": 10.0}, "pilot": {"delay": 3.0, "p_no_response": 0.1}}
  })");
  const RunConfig rc = run_config_from_json(j);
  EXPECT_DOUBLE_EQ(rc.scale, 0.2);
  EXPECT_TRUE(rc.has_seed);
  EXPECT_EQ(rc.seed, 17u);
  EXPECT_EQ(rc.threads, 2u);
  EXPECT_DOUBLE_EQ(rc.sim.dt, 0.5);
  EXPECT_EQ(rc.sim.repetitions, 4u);
  EXPECT_EQ(rc.sim.equipage, Equipage::equipped_equipped);
  EXPECT_DOUBLE_EQ(rc.sim.sensor.range, 10.0);
  EXPECT_DOUBLE_EQ(rc.sim.pilot.delay, 3.0);
  const LogicSpec s = logic_from_json(LogicKind::speed, rc.logic);
  EXPECT_DOUBLE_EQ(s.accel_g, 0.1);
  EXPECT_DOUBLE_EQ(s.noise.own_speed, 2.0);
  EXPECT_DOUBLE_EQ(s.weights.nmac_penalty, -2.0);
  EXPECT_DOUBLE_EQ(s.coaltitude_dt, 5.0);
  EXPECT_EQ(s.coaltitude_sweeps, 3u);
  EXPECT_DOUBLE_EQ(s.actions[1].command, -0.1);
  const LogicSpec h = logic_from_json(LogicKind::horizontal, rc.logic);
  EXPECT_EQ(h.actions.size(), 3u);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(run_config_from_json(json::parse(R"({"scal": 0.1})")), ConfigError);
  EXPECT_THROW(run_config_from_json(json::parse(R"({"sim": {"pilot": {"lag": 1}}})")), ConfigError);
  EXPECT_THROW(logic_from_json(LogicKind::speed, json::parse(R"({"noise": {"x": 1}})")), ConfigError);
}

TEST(Config, BadValuesNamed) {
  auto message = [](const json& j) {
    try {
      run_config_from_json(j);
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message(json::parse(R"({"scale": 0})")).find("scale"), std::string::npos);
  EXPECT_NE(message(json::parse(R"({"scale": 1.5})")).find("scale"), std::string::npos);
  EXPECT_NE(message(json::parse(R"({"scale": "big"})")).find("scale"), std::string::npos);
  EXPECT_NE(message(json::parse(R"({"seed": -3})")).find("seed"), std::string::npos);
  EXPECT_NE(message(json::parse(R"({"sim": {"pilot": {"p_no_response": 2}}})")).find("p_no_response"),
            std::string::npos);
  EXPECT_NE(message(json::parse(R"({"sim": {"equipage": "both"}})")).find("equipage"), std::string::npos);
  EXPECT_NE(message(json::parse(R"({"logic": {"weights": {"nmac_penalty": 1}}})")).find("weights"),
            std::string::npos);
  EXPECT_NE(message(json::parse(R"({"logic": {"coaltitude": {"discount": 0}}})")).find("discount"),
            std::string::npos);
  EXPECT_NE(message(json::parse(R"({"threads": 1.5})")).find("threads"), std::string::npos);
}

TEST(Config, SimJsonRoundTrip) {
  SimConfig c;
  c.dt = 0.25;
  c.repetitions = 3;
  c.belief_particles = 5;
  c.equipage = Equipage::equipped_equipped;
  c.pilot.p_no_response = 0.2;
  c.record_timeline = false;
  const SimConfig back = sim_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, LogicJsonRoundTrip) {
  LogicSpec s = speed_logic();
  s.accel_g = 0.08;
  s.coaltitude_sweeps = 4;
  json j = to_json(s);
  j.erase("kind");
  const LogicSpec back = logic_from_json(LogicKind::speed, j);
  EXPECT_EQ(to_json(back), to_json(s));
}

TEST(Config, MissingFileIsConfigError) {
  EXPECT_THROW(load_run_config("/nonexistent/spdcas.json"), ConfigError);
}
