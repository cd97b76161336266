#ifndef MNP_SCENARIO_IO_HPP
#define MNP_SCENARIO_IO_HPP

// Scenario files and output artifacts. Requires nlohmann/json ("json.hpp").

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "mnp/error.hpp"
#include "mnp/simulator.hpp"

namespace mnp {

inline constexpr int kScenarioSchemaVersion = 1;
inline constexpr const char* kPathTimeSchemaVersion = "1.0";

inline constexpr const char* kResultsHeader = "timestamp,alternative,collision_prob,risk,cost,decision";
inline constexpr const char* kProfilesHeader = "cycle,t_plan,branch,k,t,s,v,a,j";

namespace detail {

using nlohmann::json;

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline Maneuver parse_maneuver(const std::string& s) {
  if (s == "drive") return Maneuver::Drive;
  if (s == "yield") return Maneuver::Yield;
  throw ConfigError("scenario: unknown intention '" + s + "' (expected drive|yield)");
}

inline Interval parse_interval(const json& j) {
  if (!j.is_array() || j.size() != 2) throw ConfigError("scenario: range must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline std::string fixed(double v, int decimals = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v == 0.0 ? 0.0 : v);
  return buf;
}

inline VehicleState parse_vehicle(const json& j) {
  VehicleState v;
  v.route = j.at("route").get<std::string>();
  v.s = j.at("s").get<double>();
  v.v = j.at("v").get<double>();
  read_opt(j, "a", v.a);
  return v;
}

}  // namespace detail

/// Build a scenario from its JSON representation; every field except the
/// geometry and initial states has a default.
inline ScenarioConfig scenario_from_json(const nlohmann::json& j) {
  using detail::read_opt;
  ScenarioConfig cfg;
  try {
    const int version = j.value("schema_version", kScenarioSchemaVersion);
    if (version != kScenarioSchemaVersion) {
      throw ConfigError("scenario: unsupported schema_version " + std::to_string(version));
    }
    for (const auto& r : j.at("routes")) {
      std::vector<Point2> pts;
      for (const auto& p : r.at("centerline")) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      cfg.routes.emplace_back(r.at("id").get<std::string>(), std::move(pts));
    }
    const auto& m = j.at("merge");
    cfg.merge.route_a = m.at("route_a").get<std::string>();
    cfg.merge.route_b = m.at("route_b").get<std::string>();
    cfg.merge.s_merge_a = m.at("s_merge_a").get<double>();
    cfg.merge.s_merge_b = m.at("s_merge_b").get<double>();

    const auto& ego = j.at("ego");
    cfg.ego = detail::parse_vehicle(ego);
    read_opt(ego, "desired_speed", cfg.ego_desired_speed);

    const auto& other = j.at("other");
    cfg.other = detail::parse_vehicle(other);
    cfg.intention = detail::parse_maneuver(other.value("intention", std::string("yield")));
    read_opt(other, "reveal_time", cfg.reveal_time);
    if (other.contains("idm")) {
      const auto& idm = other.at("idm");
      read_opt(idm, "v0", cfg.other_idm.v0);
      read_opt(idm, "T", cfg.other_idm.T);
      read_opt(idm, "a_max", cfg.other_idm.a_max);
      read_opt(idm, "b_comf", cfg.other_idm.b_comf);
      read_opt(idm, "s0", cfg.other_idm.s0);
      read_opt(idm, "delta", cfg.other_idm.delta);
      read_opt(idm, "b_hard", cfg.other_idm.b_hard);
    }

    if (j.contains("fov")) {
      read_opt(j.at("fov"), "angular_extent_deg", cfg.fov.angular_extent_deg);
      read_opt(j.at("fov"), "range_m", cfg.fov.range);
    }
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      read_opt(n, "sigma_a_sq", cfg.noise.sigma_a_sq);
      if (n.contains("R")) {
        const auto& r = n.at("R");
        cfg.noise.R << r.at(0).at(0).get<double>(), r.at(0).at(1).get<double>(),
                       r.at(1).at(0).get<double>(), r.at(1).at(1).get<double>();
      }
      if (n.contains("P0")) {
        const auto& p = n.at("P0");
        for (int a = 0; a < 3; ++a) {
          for (int b = 0; b < 3; ++b) cfg.P0(a, b) = p.at(a).at(b).get<double>();
        }
      }
    }
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      auto& cw = cfg.weights;
      read_opt(w, "w_v_vel", cw.w_v_vel);
      read_opt(w, "w_v_acc", cw.w_v_acc);
      read_opt(w, "w_v_jrk", cw.w_v_jrk);
      read_opt(w, "w_r_vel", cw.w_r_vel);
      read_opt(w, "w_r_acc", cw.w_r_acc);
      read_opt(w, "w_r_jrk", cw.w_r_jrk);
      read_opt(w, "w_coll", cw.w_coll);
      read_opt(w, "a_des", cw.a_des);
      if (w.contains("v_range")) cw.v_range = detail::parse_interval(w.at("v_range"));
      if (w.contains("a_range")) cw.a_range = detail::parse_interval(w.at("a_range"));
      if (w.contains("j_range")) cw.j_range = detail::parse_interval(w.at("j_range"));
    }
    if (j.contains("thresholds")) {
      read_opt(j.at("thresholds"), "entropy_max", cfg.thresholds.entropy_max);
      read_opt(j.at("thresholds"), "p_coll_max", cfg.thresholds.p_coll_max);
    }
    if (j.contains("planner")) {
      const auto& p = j.at("planner");
      auto& s = cfg.planner;
      read_opt(p, "horizon_points", s.horizon_points);
      read_opt(p, "dt", s.dt);
      read_opt(p, "pin_index", s.pin_index);
      read_opt(p, "epsilon", s.epsilon);
      read_opt(p, "mixture_weighted_collision", s.mixture_weighted_collision);
      read_opt(p, "ego_a_max", s.ego_a_max);
      read_opt(p, "ego_b_hard", s.ego_b_hard);
      read_opt(p, "max_iterations", s.minimize.max_iterations);
      read_opt(p, "gradient_tolerance", s.minimize.gradient_tolerance);
      read_opt(p, "tc_variants", cfg.tc_variants);
      read_opt(p, "safety_gap", cfg.safety_gap);
      read_opt(p, "reach_sigma", cfg.reach_sigma);
      read_opt(p, "history_points", cfg.history_points);
      if (p.contains("weighting")) {
        const auto w = p.at("weighting").get<std::string>();
        if (w == "inverse") {
          cfg.weighting = Weighting::Inverse;
        } else if (w == "as_printed") {
          cfg.weighting = Weighting::AsPrinted;
        } else {
          throw ConfigError("scenario: unknown weighting '" + w + "'");
        }
      }
    }
    if (j.contains("sim")) {
      const auto& s = j.at("sim");
      read_opt(s, "duration", cfg.duration);
      read_opt(s, "seed", cfg.seed);
      read_opt(s, "vehicle_length", cfg.vehicle_length);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
  return cfg;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("scenario '" + path + "': " + e.what());
  }
  return scenario_from_json(j);
}

// ---------------------------------------------------------------------------
// Output artifacts
// ---------------------------------------------------------------------------

inline std::string results_csv(const std::vector<SimLogRow>& rows) {
  std::ostringstream os;
  os << kResultsHeader << '\n';
  for (const auto& r : rows) {
    os << detail::fixed(r.timestamp, 2) << ',' << r.alternative << ',' << detail::fixed(r.collision_prob)
       << ',' << detail::fixed(r.risk) << ',' << detail::fixed(r.cost, 3) << ',' << r.decision << '\n';
  }
  return os.str();
}

/// Position, speed, acceleration and jerk of every planned branch. Speed at
/// point k is the backward difference ending at k; higher orders likewise,
/// left empty where undefined.
inline std::string profiles_csv(const std::vector<CycleRecord>& cycles, double dt) {
  std::ostringstream os;
  os << kProfilesHeader << '\n';
  for (const auto& c : cycles) {
    for (const auto& b : c.branches) {
      const Derivatives d = finite_differences(b.x, dt);
      for (std::size_t k = 0; k < b.x.size(); ++k) {
        os << c.cycle << ',' << detail::fixed(c.t, 2) << ',' << b.label << ',' << k << ','
           << detail::fixed(c.t + k * dt, 2) << ',' << detail::fixed(b.x[k]) << ',';
        if (k >= 1) os << detail::fixed(d.v[k - 1]);
        os << ',';
        if (k >= 2) os << detail::fixed(d.acc[k - 2]);
        os << ',';
        if (k >= 3) os << detail::fixed(d.jrk[k - 3]);
        os << '\n';
      }
    }
  }
  return os.str();
}

/// Path-time data per cycle: ego branches, hypothesis bands and markers.
inline nlohmann::json pathtime_json(const std::vector<CycleRecord>& cycles, const ScenarioConfig& cfg) {
  using nlohmann::json;
  json root;
  root["schema_version"] = kPathTimeSchemaVersion;
  root["dt"] = cfg.planner.dt;
  root["s_merge"] = cfg.merge.s_merge_a;
  root["cycles"] = json::array();
  for (const auto& c : cycles) {
    json jc;
    jc["cycle"] = c.cycle;
    jc["t"] = c.t;
    jc["combinatorial"] = c.combinatorial;
    jc["decision"] = c.decision;
    jc["belief"] = {{"p_yield", c.belief.p(Maneuver::Yield)},
                    {"p_drive", c.belief.p(Maneuver::Drive)},
                    {"entropy", c.belief.entropy}};
    jc["t_c"] = c.tc;
    jc["t_o"] = std::isfinite(c.t_o) ? json(c.t_o) : json(nullptr);
    jc["ego_branches"] = json::array();
    for (const auto& b : c.branches) jc["ego_branches"].push_back({{"label", b.label}, {"s", b.x}});
    jc["hypotheses"] = json::array();
    for (const auto& h : c.hypotheses.components) {
      const auto& tr = h.trajectory;
      std::vector<double> times, lo2, hi2;
      for (std::size_t k = 0; k < tr.size(); ++k) {
        times.push_back(tr.time_of(k));
        lo2.push_back(tr.mu[k] - 2.0 * tr.sigma[k]);
        hi2.push_back(tr.mu[k] + 2.0 * tr.sigma[k]);
      }
      jc["hypotheses"].push_back({{"label", std::string(to_string(h.label))},
                                  {"weight", h.weight},
                                  {"t", times},
                                  {"mu", tr.mu},
                                  {"sigma", tr.sigma},
                                  {"band_lower", lo2},
                                  {"band_upper", hi2},
                                  {"trunc_lower", tr.lower},
                                  {"trunc_upper", tr.upper}});
    }
    root["cycles"].push_back(std::move(jc));
  }
  return root;
}

}  // namespace mnp

#endif  // MNP_SCENARIO_IO_HPP
