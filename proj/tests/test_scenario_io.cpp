#include <gtest/gtest.h>

#include <sstream>
#include <string>

#include "mnp/scenario_io.hpp"
#include "support.hpp"

using namespace mnp;
using nlohmann::json;

namespace {

json golden_json() {
  std::ifstream in(fixtures::source_path("scenarios/golden_yield.json"));
  return json::parse(in);
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST(ScenarioJson, GoldenFileLoads) {
  const auto cfg = fixtures::golden("golden_yield");
  EXPECT_EQ(cfg.routes.size(), 2u);
  EXPECT_EQ(cfg.intention, Maneuver::Yield);
  EXPECT_EQ(cfg.planner.horizon_points, 37);
  EXPECT_DOUBLE_EQ(cfg.planner.dt, 0.25);
  EXPECT_EQ(cfg.tc_variants, (std::vector<double>{0.25, 0.5}));
  EXPECT_DOUBLE_EQ(cfg.fov.angular_extent_deg, 210.0);
  EXPECT_DOUBLE_EQ(cfg.fov.range, 40.0);
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(fixtures::golden("golden_drive").intention, Maneuver::Drive);
}

TEST(ScenarioJson, OptionalSectionsKeepDefaults) {
  json j = golden_json();
  j.erase("weights");
  j.erase("thresholds");
  const auto cfg = scenario_from_json(j);
  EXPECT_DOUBLE_EQ(cfg.weights.w_coll, ResidualWeights{}.w_coll);
  EXPECT_DOUBLE_EQ(cfg.thresholds.entropy_max, 0.45);
}

TEST(ScenarioJson, OverridesApply) {
  json j = golden_json();
  j["planner"]["weighting"] = "as_printed";
  j["planner"]["tc_variants"] = {0.25, 0.75};
  j["weights"]["j_range"] = {-3.0, 3.0};
  j["noise"]["R"] = {{0.1, 0.0}, {0.0, 0.2}};
  const auto cfg = scenario_from_json(j);
  EXPECT_EQ(cfg.weighting, Weighting::AsPrinted);
  EXPECT_EQ(cfg.tc_variants, (std::vector<double>{0.25, 0.75}));
  EXPECT_DOUBLE_EQ(cfg.weights.j_range.lo, -3.0);
  EXPECT_DOUBLE_EQ(cfg.noise.R(1, 1), 0.2);
}

TEST(ScenarioJson, MalformedInputIsConfigError) {
  json j = golden_json();
  j["other"]["intention"] = "hover";
  EXPECT_THROW(scenario_from_json(j), ConfigError);
  j = golden_json();
  j.erase("merge");
  EXPECT_THROW(scenario_from_json(j), ConfigError);
  j = golden_json();
  j["schema_version"] = 7;
  EXPECT_THROW(scenario_from_json(j), ConfigError);
  j = golden_json();
  j["weights"]["v_range"] = {1.0};
  EXPECT_THROW(scenario_from_json(j), ConfigError);
  j = golden_json();
  j["ego"]["s"] = "far";
  EXPECT_THROW(scenario_from_json(j), ConfigError);
}

TEST(ScenarioJson, MissingFileIsConfigError) {
  EXPECT_THROW(load_scenario("/nonexistent/scenario.json"), ConfigError);
}

TEST(ResultsCsv, HeaderAndFormatting) {
  const std::vector<SimLogRow> rows{{0.0, "-", 0.0, 0.0, 18.8814, "straight"},
                                    {76.5, "lead (t_pin)", 0.0361234567, 0.02, 114.6741, "yield"}};
  const auto l = lines(results_csv(rows));
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[0], "timestamp,alternative,collision_prob,risk,cost,decision");
  EXPECT_EQ(l[1], "0.00,-,0.000000,0.000000,18.881,straight");
  EXPECT_EQ(l[2], "76.50,lead (t_pin),0.036123,0.020000,114.674,yield");
}

TEST(ProfilesCsv, BackwardDifferencesWithEmptyCells) {
  CycleRecord c;
  c.cycle = 3;
  c.t = 0.75;
  c.branches.push_back({"straight", {0.0, 1.0, 3.0, 6.0}});
  const auto l = lines(profiles_csv({c}, 1.0));
  ASSERT_EQ(l.size(), 5u);
  EXPECT_EQ(l[0], kProfilesHeader);
  EXPECT_EQ(l[1], "3,0.75,straight,0,0.75,0.000000,,,");
  EXPECT_EQ(l[2], "3,0.75,straight,1,1.75,1.000000,1.000000,,");
  EXPECT_EQ(l[3], "3,0.75,straight,2,2.75,3.000000,2.000000,1.000000,");
  EXPECT_EQ(l[4], "3,0.75,straight,3,3.75,6.000000,3.000000,1.000000,0.000000");
}

TEST(PathTimeJson, CarriesBandsAndMarkers) {
  const auto cfg = fixtures::golden("golden_yield");
  const SimResult r = run(cfg);
  const json pt = pathtime_json(r.cycles, cfg);
  EXPECT_EQ(pt["schema_version"], kPathTimeSchemaVersion);
  EXPECT_DOUBLE_EQ(pt["s_merge"].get<double>(), cfg.merge.s_merge_a);
  ASSERT_EQ(pt["cycles"].size(), r.cycles.size());
  bool saw_interaction = false;
  for (const auto& c : pt["cycles"]) {
    if (!c["combinatorial"].get<bool>()) continue;
    saw_interaction = true;
    EXPECT_FALSE(c["t_o"].is_null());
    EXPECT_EQ(c["ego_branches"].size(), 2 * c["t_c"].size());
    for (const auto& h : c["hypotheses"]) {
      const auto mu = h["mu"].get<std::vector<double>>();
      const auto sigma = h["sigma"].get<std::vector<double>>();
      const auto lo = h["band_lower"].get<std::vector<double>>();
      ASSERT_EQ(mu.size(), sigma.size());
      for (std::size_t k = 0; k < mu.size(); ++k) EXPECT_NEAR(lo[k], mu[k] - 2.0 * sigma[k], 1e-12);
      EXPECT_EQ(h["trunc_upper"].size(), mu.size());
    }
  }
  EXPECT_TRUE(saw_interaction);
}
