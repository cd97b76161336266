#ifndef MNP_SIMULATOR_HPP
#define MNP_SIMULATOR_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mnp/decision.hpp"
#include "mnp/error.hpp"
#include "mnp/estimation.hpp"
#include "mnp/maneuver.hpp"
#include "mnp/planner.hpp"
#include "mnp/prediction.hpp"
#include "mnp/world.hpp"

namespace mnp {

struct ScenarioConfig {
  std::vector<RoutePath> routes;
  MergeGeometry merge;

  VehicleState ego;               // route, s, v at t = 0
  double ego_desired_speed = 10.0;

  VehicleState other;
  IdmParams other_idm;
  Maneuver intention = Maneuver::Yield;
  double reveal_time = 0.0;

  FieldOfView fov;
  NoiseParams noise;
  Eigen::Matrix3d P0 = Eigen::Vector3d(0.25, 0.25, 0.25).asDiagonal();

  ResidualWeights weights;
  DecisionThresholds thresholds;
  PlannerSettings planner;
  std::vector<double> tc_variants{0.25, 0.5};
  double safety_gap = 6.0;
  double reach_sigma = 3.0;  // truncation margin in prior standard deviations
  Weighting weighting = Weighting::Inverse;
  int history_points = 8;

  double duration = 12.0;
  std::uint64_t seed = 1;
  double vehicle_length = 5.0;

  const RoutePath& route(const std::string& id) const {
    for (const auto& r : routes) {
      if (r.id() == id) return r;
    }
    throw ConfigError("scenario: unknown route '" + id + "'");
  }

  void validate() const {
    const RoutePath& ra = route(merge.route_a);
    const RoutePath& rb = route(merge.route_b);
    if (ego.route != merge.route_a) throw ConfigError("scenario: ego must drive on merge.route_a");
    if (other.route != merge.route_b) throw ConfigError("scenario: other must drive on merge.route_b");
    if (!(merge.s_merge_a > 0.0 && merge.s_merge_a < ra.length()) ||
        !(merge.s_merge_b > 0.0 && merge.s_merge_b < rb.length())) {
      throw ConfigError("scenario: merge points must lie inside their routes");
    }
    if (ego.s < 0.0 || ego.s > ra.length() || other.s < 0.0 || other.s > rb.length()) {
      throw ConfigError("scenario: initial positions outside routes");
    }
    if (ego.v < 0.0 || other.v < 0.0) throw ConfigError("scenario: negative initial speed");
    if (!(duration > 0.0)) throw ConfigError("scenario: duration must be positive");
    if (reveal_time < 0.0 || reveal_time > duration) {
      throw ConfigError("scenario: reveal time outside the simulated duration");
    }
    if (!(planner.dt > 0.0)) throw ConfigError("scenario: dt must be positive");
    if (planner.horizon_points < 4) throw ConfigError("scenario: horizon_points must be >= 4");
    if (planner.pin_index < 1 || planner.pin_index > planner.horizon_points - 2) {
      throw ConfigError("scenario: pin_index must lie in [1, horizon_points - 2]");
    }
    if (tc_variants.empty()) throw ConfigError("scenario: no t_c variants");
    if (history_points < 1) throw ConfigError("scenario: history_points must be >= 1");
    if (!(safety_gap >= 0.0) || !(reach_sigma >= 0.0) || !(vehicle_length > 0.0)) {
      throw ConfigError("scenario: gap, reach_sigma and vehicle_length must be non-negative");
    }
    try {
      other_idm.validate();
      fov.validate();
      weights.validate();
      thresholds.validate();
    } catch (const DomainError& e) {
      throw ConfigError(std::string("scenario: ") + e.what());
    }
    if (noise.sigma_a_sq < 0.0) throw ConfigError("scenario: negative process noise");
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(noise.R);
    if (es.eigenvalues().minCoeff() < -1e-12) throw ConfigError("scenario: R not positive semidefinite");
  }
};

// ---------------------------------------------------------------------------
// Other vehicle and perception
// ---------------------------------------------------------------------------

/// What the other vehicle's scripted driver sees of the scene.
struct OtherScene {
  MergeGeometry merge;
  double t = 0.0;
  double ego_s = 0.0;   // ego route coordinate
  double ego_v = 0.0;
  double vehicle_length = 5.0;
};

struct OtherScript {
  IdmParams idm;
  Maneuver intention = Maneuver::Drive;
  double reveal_time = 0.0;
};

/// Scripted IDM driver: free road (Drive, or before the reveal), stop line at
/// the merge (Yield while ego has not passed), car following once ego is on
/// the merged lane ahead. Piecewise-constant acceleration over dt.
inline VehicleState step_other_vehicle(const VehicleState& state, const OtherScript& script,
                                       const OtherScene& scene, double dt) {
  if (!(dt > 0.0)) throw DomainError("step_other_vehicle: dt must be positive");
  const double ego_b = scene.ego_s - scene.merge.b_to_a_offset();
  const bool ego_merged = scene.ego_s > scene.merge.s_merge_a;
  const bool ego_ahead = ego_merged && ego_b > state.s;
  const bool yielding = script.intention == Maneuver::Yield && scene.t >= script.reveal_time;

  double acc = 0.0;
  auto toward = [&](double gap, double lead_v) {
    return gap > 0.0 ? idm_acceleration(state.v, gap, lead_v, script.idm) : -script.idm.b_hard;
  };
  if (ego_ahead) {
    acc = toward(ego_b - state.s - scene.vehicle_length, scene.ego_v);
  } else if (yielding && !ego_merged && state.s < scene.merge.s_merge_b) {
    acc = toward(scene.merge.s_merge_b - state.s, 0.0);
  } else {
    acc = idm_acceleration(state.v, kFreeRoad, 0.0, script.idm);
  }
  acc = stop_guarded(state.v, acc, dt);

  VehicleState next = state;
  next.s = state.s + state.v * dt + 0.5 * acc * dt * dt;
  next.v = std::max(0.0, state.v + acc * dt);
  next.a = acc;
  next.t = state.t + dt;
  return next;
}

/// Noisy [position, speed] measurement when the target is visible.
template <class Rng>
std::optional<Eigen::Vector2d> perceive(const VehicleState& observer, const VehicleState& target,
                                        const FieldOfView& fov, const NoiseParams& noise,
                                        Rng& rng) {
  if (!in_field_of_view(observer, fov, target)) return std::nullopt;
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(noise.R);
  const Eigen::Vector2d root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::Matrix2d L = es.eigenvectors() * root.asDiagonal();
  std::normal_distribution<double> n01(0.0, 1.0);
  const double n0 = n01(rng);
  const double n1 = n01(rng);
  return Eigen::Vector2d(target.s, target.v) + L * Eigen::Vector2d(n0, n1);
}

// ---------------------------------------------------------------------------
// Logging records
// ---------------------------------------------------------------------------

struct SimLogRow {
  double timestamp = 0.0;
  std::string alternative;  // "lead (t_pin)", "follow (2t_pin)", "-" ...
  double collision_prob = 0.0;
  double risk = 0.0;
  double cost = 0.0;        // ride cost
  std::string decision;
};

struct TraceSample {
  double t = 0.0;
  double ego_s = 0.0, ego_v = 0.0, ego_a = 0.0, ego_j = 0.0;
  double other_s = 0.0, other_v = 0.0, other_a = 0.0;  // ground truth, own route
  bool other_visible = false;
  std::string decision;
};

struct BranchRecord {
  std::string label;
  std::vector<double> x;
};

struct CycleRecord {
  int cycle = 0;
  double t = 0.0;
  bool combinatorial = false;
  ManeuverBelief belief;
  std::string decision;
  double t_o = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> tc;
  std::vector<BranchRecord> branches;       // ego coordinates, support points from t
  ManeuverHypothesisSet hypotheses;         // ego coordinates
  std::vector<std::string> variant_errors;
  std::vector<PlanResult> plans;            // every successful optimization of the cycle
};

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

struct SimOptions {
  std::function<void(LogLevel, const std::string&)> log;
};

struct SimResult {
  std::vector<SimLogRow> rows;
  std::vector<TraceSample> trace;
  std::vector<CycleRecord> cycles;
  bool fatal = false;
  std::string error;
};

// ---------------------------------------------------------------------------
// Closed loop
// ---------------------------------------------------------------------------

namespace detail {

inline ManeuverContext context_for(const ScenarioConfig& cfg, const GaussianState& start) {
  ManeuverContext ctx;
  ctx.s_merge = cfg.merge.s_merge_b;
  ctx.reach = {cfg.other_idm.a_max, cfg.other_idm.b_hard,
               cfg.reach_sigma * std::sqrt(std::max(start.cov(0, 0), 0.0))};
  return ctx;
}

/// Prediction of one maneuver, or nothing when it is no longer possible.
inline std::optional<GaussianTrajectory> try_predict(const ScenarioConfig& cfg,
                                                     const GaussianState& start, Maneuver m,
                                                     int steps) {
  if (m == Maneuver::Yield && start.mean(0) >= cfg.merge.s_merge_b) return std::nullopt;
  try {
    return predict_maneuver(start, m, context_for(cfg, start), cfg.other_idm, cfg.noise, steps,
                            cfg.planner.dt);
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

/// Compare the filtered track over the history window with what each
/// hypothesis predicted from the window start.
inline ManeuverBelief estimate_belief(const ScenarioConfig& cfg,
                                      const std::vector<GaussianState>& posteriors) {
  if (posteriors.empty()) return {};
  const std::size_t last = posteriors.size() - 1;
  const std::size_t span = std::min<std::size_t>(last, cfg.history_points - 1);
  if (span == 0) return maneuver_probabilities(0.0, 0.0, cfg.weighting);
  const GaussianState& start = posteriors[last - span];
  std::vector<double> executed;
  for (std::size_t k = last - span + 1; k <= last; ++k) executed.push_back(posteriors[k].mean(0));
  const auto drive = try_predict(cfg, start, Maneuver::Drive, static_cast<int>(span));
  const auto yield = try_predict(cfg, start, Maneuver::Yield, static_cast<int>(span));
  if (!drive && !yield) return {};
  if (!yield) return certain(Maneuver::Drive);
  if (!drive) return certain(Maneuver::Yield);
  return maneuver_probabilities(dissimilarity(executed, yield->mu), dissimilarity(executed, drive->mu),
                                cfg.weighting);
}

inline std::string alternative_label(BranchKind kind, int tc_index, int pin_index, double tc) {
  std::string when;
  if (tc_index == pin_index) {
    when = "t_pin";
  } else if (tc_index == 2 * pin_index) {
    when = "2t_pin";
  } else {
    char buf[32];
    std::snprintf(buf, sizeof buf, "t_c=%.2f", tc);
    when = buf;
  }
  return std::string(to_string(kind)) + " (" + when + ")";
}

}  // namespace detail

inline SimResult run(const ScenarioConfig& cfg, const SimOptions& options = {}) {
  cfg.validate();
  auto log = [&](LogLevel level, const std::string& msg) {
    if (options.log) options.log(level, msg);
  };

  const RoutePath& route_a = cfg.route(cfg.merge.route_a);
  const RoutePath& route_b = cfg.route(cfg.merge.route_b);
  const double dt = cfg.planner.dt;
  const int N = cfg.planner.horizon_points;
  const int pin = cfg.planner.pin_index;
  const double offset = cfg.merge.b_to_a_offset();
  const int cycles = static_cast<int>(std::floor(cfg.duration / dt + 1e-9));

  std::mt19937_64 rng(cfg.seed);
  ResidualWeights weights = cfg.weights;
  weights.v_des = cfg.ego_desired_speed;
  const OtherScript script{cfg.other_idm, cfg.intention, cfg.reveal_time};

  // Committed ego support points at t, t + dt, ..., t + pin*dt.
  std::vector<double> committed;
  for (int k = 0; k <= pin; ++k) committed.push_back(cfg.ego.s + cfg.ego.v * k * dt);

  VehicleState other = cfg.other;
  other.t = 0.0;
  std::optional<GaussianState> track;
  std::vector<GaussianState> posteriors;
  std::vector<double> executed;  // ego positions at cycle starts

  SimResult out;
  for (int cycle = 0; cycle < cycles; ++cycle) {
    const double t = cycle * dt;
    VehicleState ego;
    ego.route = cfg.merge.route_a;
    ego.s = committed.front();
    ego.v = (committed[1 < committed.size() ? 1 : 0] - committed.front()) / dt;
    ego.t = t;
    if (ego.s > route_a.length()) {
      log(LogLevel::Info, "ego reached the end of its route");
      break;
    }
    ego = with_pose(ego, route_a);
    const bool other_on_route = other.s <= route_b.length();
    if (other_on_route) other = with_pose(other, route_b);

    // Perception and tracking.
    const auto z = other_on_route ? perceive(ego, other, cfg.fov, cfg.noise, rng) : std::nullopt;
    if (z) {
      if (!track) {
        track = GaussianState{Eigen::Vector3d((*z)(0), (*z)(1), 0.0), cfg.P0};
        log(LogLevel::Info, "t=" + std::to_string(t) + " other vehicle detected");
      } else {
        track = kalman_update(*track, *z, cfg.noise);
      }
    }
    if (track) posteriors.push_back(*track);

    CycleRecord rec;
    rec.cycle = cycle;
    rec.t = t;

    const double other_est = track ? track->mean(0) : 0.0;
    // Yielding stays an alternative only while ego can still stop short of
    // the merge clearance within the admissible deceleration.
    const double v_pin = std::max((committed.back() - committed[committed.size() - 2]) / dt, 0.0);
    const double decel = std::max(-weights.a_range.lo, 1e-3);
    const bool can_yield = committed.back() + 0.5 * v_pin * v_pin / decel <=
                           cfg.merge.s_merge_a - cfg.safety_gap;
    const bool conflict = track && can_yield && ego.s < cfg.merge.s_merge_a &&
                          other_est < cfg.merge.s_merge_b;
    const bool other_ahead = track && other_est >= cfg.merge.s_merge_b &&
                             other_est + offset > ego.s;

    PlanRequest req;
    req.pinned = committed;
    req.weights = weights;
    req.geometry = {cfg.merge.s_merge_a, cfg.safety_gap};
    req.settings = cfg.planner;
    req.belief = track ? detail::estimate_belief(cfg, posteriors) : ManeuverBelief{};
    if (track) {
      std::vector<std::pair<Maneuver, GaussianTrajectory>> preds;
      for (Maneuver m : kManeuvers) {
        if (auto p = detail::try_predict(cfg, *track, m, N - 1)) preds.emplace_back(m, p->shifted(offset));
      }
      if (std::none_of(preds.begin(), preds.end(), [](const auto& p) { return p.first == Maneuver::Yield; })) {
        req.belief = certain(Maneuver::Drive);
      }
      req.hypotheses = build_hypothesis_set(preds, req.belief);
    }
    rec.belief = req.belief;
    rec.hypotheses = req.hypotheses;

    std::vector<double> next_plan;
    std::string decision_label = "straight";
    try {
      std::vector<double> feasible_tc;
      double t_o = std::numeric_limits<double>::infinity();
      if (conflict && !req.hypotheses.components.empty()) {
        t_o = compute_t_o(req.hypotheses, cfg.merge.s_merge_a);
        rec.t_o = t_o;
        for (double tc : cfg.tc_variants) {
          if (tc >= cfg.planner.t_pin() - 1e-9 && tc < t_o) feasible_tc.push_back(tc);
        }
      }
      if (!feasible_tc.empty()) {
        rec.combinatorial = true;
        req.tc_candidates = feasible_tc;
        CycleResult plans = plan_cycle(req);
        rec.variant_errors = plans.errors;
        for (const auto& e : plans.errors) log(LogLevel::Warn, "t=" + std::to_string(t) + " " + e);
        std::sort(plans.results.begin(), plans.results.end(),
                  [](const PlanResult& a, const PlanResult& b) { return a.tc_index < b.tc_index; });
        const Decision d = select(plans.results, req.belief, cfg.thresholds);
        decision_label = std::string(to_string(d.kind));
        if (d.kind == DecisionKind::Emergency) {
          next_plan = emergency_profile(committed.back(), std::max(req.pinned_speed(), 0.0),
                                        cfg.planner.ego_b_hard, N - pin, dt);
          next_plan.insert(next_plan.begin(), committed.begin(), committed.end() - 1);
        } else {
          next_plan = d.trajectory;
        }
        for (BranchKind kind : {BranchKind::Lead, BranchKind::Follow}) {
          for (const auto& r : plans.results) {
            const BranchPlan* b = r.branch(kind);
            if (!b) continue;
            out.rows.push_back({t, detail::alternative_label(kind, r.tc_index, pin, r.tc),
                                b->peak_collision_probability, b->risk, b->ride_cost, decision_label});
          }
        }
        rec.plans = plans.results;
        for (const auto& r : plans.results) {
          rec.tc.push_back(r.tc);
          for (const auto& b : r.branches) {
            rec.branches.push_back({detail::alternative_label(b.kind, r.tc_index, pin, r.tc), b.x});
          }
        }
      } else {
        const std::optional<BranchKind> pairing =
            (other_ahead || conflict) && req.hypotheses.find(Maneuver::Drive)
                ? std::optional<BranchKind>(BranchKind::Follow)
                : std::nullopt;
        if (!pairing) req.hypotheses = {};
        const PlanResult r = plan_straight(req, pairing);
        const BranchPlan& b = r.branches.front();
        next_plan = b.x;
        out.rows.push_back({t, "-", b.peak_collision_probability, b.risk, b.ride_cost, decision_label});
        rec.branches.push_back({"straight", b.x});
        rec.plans.push_back(r);
      }
    } catch (const std::exception& e) {
      out.fatal = true;
      out.error = "t=" + std::to_string(t) + ": " + e.what();
      log(LogLevel::Error, out.error);
      break;
    }
    rec.decision = decision_label;

    // Trace from the executed ego positions.
    executed.push_back(ego.s);
    TraceSample ts;
    ts.t = t;
    ts.ego_s = ego.s;
    ts.ego_v = ego.v;
    const std::size_t n = executed.size();
    if (n >= 2) {
      const double v_prev = (executed[n - 1] - executed[n - 2]) / dt;
      ts.ego_a = (ego.v - v_prev) / dt;
      if (n >= 3 && !out.trace.empty()) ts.ego_j = (ts.ego_a - out.trace.back().ego_a) / dt;
    }
    ts.other_s = other.s;
    ts.other_v = other.v;
    ts.other_a = other.a;
    ts.other_visible = z.has_value();
    ts.decision = decision_label;
    out.trace.push_back(ts);
    out.cycles.push_back(std::move(rec));
    log(LogLevel::Debug, "t=" + std::to_string(t) + " ego s=" + std::to_string(ego.s) +
                             " v=" + std::to_string(ego.v) + " decision=" + decision_label);

    // Advance one replanning period.
    const OtherScene scene{cfg.merge, t, ego.s, ego.v, cfg.vehicle_length};
    other = step_other_vehicle(other, script, scene, dt);
    if (track) track = kalman_predict(*track, 0.0, dt, cfg.noise);
    committed.erase(committed.begin());
    committed.push_back(next_plan.at(pin + 1));
  }
  return out;
}

}  // namespace mnp

#endif  // MNP_SIMULATOR_HPP
