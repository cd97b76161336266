#ifndef MNP_PLANNER_HPP
#define MNP_PLANNER_HPP

#include <algorithm>
#include <cmath>
#include <future>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mnp/error.hpp"
#include "mnp/maneuver.hpp"
#include "mnp/optimizer.hpp"
#include "mnp/prediction.hpp"
#include "mnp/world.hpp"

namespace mnp {

/// Lead, follow (ego yields) or a single straight trajectory.
enum class BranchKind { Straight, Lead, Follow };

inline constexpr std::string_view to_string(BranchKind k) {
  switch (k) {
    case BranchKind::Straight: return "straight";
    case BranchKind::Lead: return "lead";
    default: return "follow";
  }
}

/// Ordering an ego branch assumes relative to the other vehicle.
inline constexpr ConflictSide side_of(BranchKind k) {
  return k == BranchKind::Lead ? ConflictSide::Ahead : ConflictSide::Behind;
}

/// Other-vehicle maneuver a branch is optimized against: leading presumes the
/// other yields, following presumes it drives.
inline constexpr Maneuver paired_maneuver(BranchKind k) {
  return k == BranchKind::Lead ? Maneuver::Yield : Maneuver::Drive;
}

struct PlannerSettings {
  int horizon_points = 37;
  double dt = 0.25;
  int pin_index = 1;
  double epsilon = 0.5;             // initialization distance from hard bounds (m)
  bool mixture_weighted_collision = false;
  double ego_a_max = 2.0;           // ego reachability for initialization
  double ego_b_hard = 8.0;
  MinimizeOptions minimize;

  double t_pin() const { return pin_index * dt; }
};

struct PlanRequest {
  std::vector<double> pinned;       // ego support points 0..pin_index
  ManeuverHypothesisSet hypotheses; // in ego coordinates
  ManeuverBelief belief;
  ResidualWeights weights;
  ConflictGeometry geometry;        // merge begin in ego coordinates
  PlannerSettings settings;
  std::vector<double> tc_candidates;  // seconds after the plan start

  double pinned_speed() const {
    if (pinned.size() < 2) return weights.v_des;
    return (pinned.back() - pinned[pinned.size() - 2]) / settings.dt;
  }
};

struct BranchPlan {
  BranchKind kind = BranchKind::Straight;
  std::vector<double> x;
  double ride_cost = 0.0;
  double collision_cost = 0.0;
  double peak_collision_probability = 0.0;  // against the paired component
  double risk = 0.0;  // peak belief-weighted probability over all components
};

struct PlanResult {
  bool combinatorial = false;
  double tc = 0.0;
  int tc_index = 0;
  std::vector<BranchPlan> branches;
  double total_cost = 0.0;
  TermCosts per_term_costs;
  double shared_ride_cost = 0.0;  // residuals inside the shared prefix, counted once
  bool converged = false;
  int iterations = 0;
  int num_params = 0;

  const BranchPlan* branch(BranchKind k) const {
    for (const auto& b : branches) {
      if (b.kind == k) return &b;
    }
    return nullptr;
  }
};

/// Earliest time a component mean crosses the merge begin.
inline double compute_t_o(const ManeuverHypothesisSet& hypotheses, double s_merge) {
  double t_o = std::numeric_limits<double>::infinity();
  for (const auto& c : hypotheses.components) {
    t_o = std::min(t_o, time_to_merge_mean(c.trajectory, s_merge));
  }
  if (!std::isfinite(t_o)) throw DomainError("compute_t_o: empty hypothesis set");
  return t_o;
}

inline double ride_cost_of(std::span<const double> x, double dt, const ResidualWeights& w) {
  TermCosts c = trajectory_residual_costs(x, dt, w);
  c.erase(term::kCollision);
  return sum_of(c);
}

/// Peak over support points of the belief-weighted conflict probability
/// against every component of the mixture.
inline double mixture_risk(std::span<const double> x, const ManeuverHypothesisSet& hyp,
                           ConflictSide side, const ConflictGeometry& geo) {
  std::vector<double> acc(x.size(), 0.0);
  for (const auto& c : hyp.components) {
    if (c.weight <= 0.0) continue;
    const auto p = pointwise_conflict(x, c.trajectory, side, geo);
    for (std::size_t i = 0; i < x.size(); ++i) acc[i] += c.weight * p[i];
  }
  return acc.empty() ? 0.0 : *std::max_element(acc.begin(), acc.end());
}

namespace detail {

inline void check_request(const PlanRequest& req) {
  const auto& s = req.settings;
  if (s.horizon_points < 4) throw DomainError("plan: horizon_points must be at least 4");
  if (s.pin_index < 0 || s.pin_index > s.horizon_points - 2) {
    throw DomainError("plan: pin_index out of range");
  }
  if (static_cast<int>(req.pinned.size()) != s.pin_index + 1) {
    throw DomainError("plan: pinned motion must hold pin_index + 1 points");
  }
}

/// Constant-speed profile after the pinned points, clipped by ego reachability.
inline std::vector<double> free_profile(const PlanRequest& req) {
  const auto& s = req.settings;
  const double v_pin = std::max(req.pinned_speed(), 0.0);
  const double v_init = std::clamp(req.weights.v_des, req.weights.v_range.lo, req.weights.v_range.hi);
  std::vector<double> x(req.pinned);
  const double x_pin = req.pinned.back();
  for (int k = s.pin_index + 1; k < s.horizon_points; ++k) {
    const double t = (k - s.pin_index) * s.dt;
    const double reach_hi = x_pin + v_pin * t + 0.5 * s.ego_a_max * t * t;
    const double t_stop = v_pin / s.ego_b_hard;
    const double reach_lo = x_pin + (t < t_stop ? v_pin * t - 0.5 * s.ego_b_hard * t * t
                                                : 0.5 * v_pin * v_pin / s.ego_b_hard);
    x.push_back(std::clamp(x_pin + v_init * t, reach_lo, reach_hi));
  }
  return x;
}

/// Profile that stays epsilon behind the other vehicle's predicted mean (or
/// the merge begin while it has not arrived), never exceeding `free` and never
/// moving backwards.
inline std::vector<double> follow_profile(const PlanRequest& req, const std::vector<double>& free,
                                          const GaussianTrajectory* other) {
  const auto& s = req.settings;
  std::vector<double> x(req.pinned);
  const double v_pin = std::max(req.pinned_speed(), 0.0);
  const double x_pin = req.pinned.back();
  const double stop_reach = x_pin + 0.5 * v_pin * v_pin / s.ego_b_hard;
  for (int k = s.pin_index + 1; k < s.horizon_points; ++k) {
    double bound = req.geometry.merge;
    if (other) {
      const long j = aligned_sample(*other, k);
      if (j >= 0) bound = std::max(other->mu[j], req.geometry.merge);
    }
    bound = std::max(bound - req.geometry.gap - s.epsilon, std::min(stop_reach, free[k]));
    x.push_back(std::max(x.back(), std::min(free[k], bound)));
  }
  return x;
}

inline std::vector<bool> pinned_mask(int num_params, int pin_index) {
  std::vector<bool> fixed(num_params, false);
  for (int i = 0; i <= pin_index; ++i) fixed[i] = true;
  return fixed;
}

inline BranchConflict conflict_for(const PlanRequest& req, BranchKind kind) {
  const auto* comp = req.hypotheses.find(paired_maneuver(kind));
  if (!comp) return {};
  return {&comp->trajectory, side_of(kind),
          req.settings.mixture_weighted_collision ? comp->weight : 1.0};
}

inline BranchPlan summarize_branch(const PlanRequest& req, BranchKind kind,
                                   std::vector<double> x, const BranchConflict& conflict,
                                   ConflictSide risk_side) {
  BranchPlan b;
  b.kind = kind;
  b.ride_cost = ride_cost_of(x, req.settings.dt, req.weights);
  if (conflict.other) {
    const auto p = pointwise_conflict(x, *conflict.other, conflict.side, req.geometry);
    b.peak_collision_probability = *std::max_element(p.begin(), p.end());
    for (double pi : p) b.collision_cost += req.weights.w_coll * conflict.weight_scale * pi;
  }
  b.risk = mixture_risk(x, req.hypotheses, risk_side, req.geometry);
  b.x = std::move(x);
  return b;
}

}  // namespace detail

/// Single-trajectory optimization. `conflict_kind` selects an optional
/// collision pairing (Follow: stay behind the drive component).
inline PlanResult plan_straight(const PlanRequest& req,
                                std::optional<BranchKind> conflict_kind = std::nullopt) {
  detail::check_request(req);
  const auto& s = req.settings;
  const int N = s.horizon_points;
  std::vector<BranchConflict> conflicts;
  BranchConflict conflict;
  if (conflict_kind) {
    conflict = detail::conflict_for(req, *conflict_kind);
    if (conflict.other) conflicts.push_back(conflict);
  }
  const CostProblem problem = assemble_straight(N, s.dt, req.weights, conflicts, req.geometry);
  std::vector<double> init = detail::free_profile(req);
  if (conflict_kind == BranchKind::Follow) init = detail::follow_profile(req, init, conflict.other);
  const Eigen::VectorXd x0 = Eigen::Map<const Eigen::VectorXd>(init.data(), N);
  const OptimizationResult opt = minimize(problem, x0, detail::pinned_mask(N, s.pin_index), s.minimize);

  PlanResult res;
  res.combinatorial = false;
  res.total_cost = opt.total_cost;
  res.per_term_costs = opt.per_term_costs;
  res.converged = opt.converged;
  res.iterations = opt.iterations;
  res.num_params = N;
  std::vector<double> x(opt.params.data(), opt.params.data() + N);
  res.branches.push_back(detail::summarize_branch(
      req, BranchKind::Straight, std::move(x), conflict,
      conflict_kind ? side_of(*conflict_kind) : ConflictSide::Behind));
  return res;
}

/// Joint optimization of lead and follow branches sharing support points up
/// to tc.
inline PlanResult plan_combinatorial(const PlanRequest& req, double tc) {
  detail::check_request(req);
  const auto& s = req.settings;
  const int N = s.horizon_points;
  const double t_o = compute_t_o(req.hypotheses, req.geometry.merge);
  if (tc < s.t_pin() - 1e-9 || !(tc < t_o)) {
    throw DomainError("plan_combinatorial: t_c = " + std::to_string(tc) +
                      " outside [t_pin, t_o) = [" + std::to_string(s.t_pin()) + ", " +
                      std::to_string(t_o) + ")");
  }
  const int tc_index = static_cast<int>(std::lround(tc / s.dt));
  const CombinatorialLayout layout = build_layout(N, tc_index, s.pin_index);
  const BranchConflict lead_conflict = detail::conflict_for(req, BranchKind::Lead);
  const BranchConflict follow_conflict = detail::conflict_for(req, BranchKind::Follow);
  const CostProblem problem =
      assemble_combinatorial(layout, s.dt, req.weights, lead_conflict, follow_conflict, req.geometry);

  const std::vector<double> lead_init = detail::free_profile(req);
  const std::vector<double> follow_init = detail::follow_profile(req, lead_init, follow_conflict.other);
  Eigen::VectorXd x0(layout.total_params());
  for (int i : layout.shared_indices) x0[i] = follow_init[i];
  for (std::size_t k = 0; k < layout.lead_indices.size(); ++k) {
    const int i = tc_index + 1 + static_cast<int>(k);
    x0[layout.lead_indices[k]] = lead_init[i];
    x0[layout.yield_indices[k]] = follow_init[i];
  }
  const OptimizationResult opt =
      minimize(problem, x0, detail::pinned_mask(layout.total_params(), s.pin_index), s.minimize);

  PlanResult res;
  res.combinatorial = true;
  res.tc = tc;
  res.tc_index = tc_index;
  res.total_cost = opt.total_cost;
  res.per_term_costs = opt.per_term_costs;
  res.converged = opt.converged;
  res.iterations = opt.iterations;
  res.num_params = layout.total_params();
  auto gather = [&](const std::vector<int>& idx) {
    std::vector<double> x;
    x.reserve(idx.size());
    for (int i : idx) x.push_back(opt.params[i]);
    return x;
  };
  res.branches.push_back(detail::summarize_branch(req, BranchKind::Lead,
                                                  gather(layout.lead_trajectory()), lead_conflict,
                                                  ConflictSide::Ahead));
  res.branches.push_back(detail::summarize_branch(req, BranchKind::Follow,
                                                  gather(layout.yield_trajectory()),
                                                  follow_conflict, ConflictSide::Behind));
  {
    const auto& lead_x = res.branches.front().x;
    CostProblem shared(tc_index + 1, s.dt, req.weights);
    shared.add_windows(trajectory_windows(iota_indices(tc_index + 1)));
    res.shared_ride_cost =
        shared.cost(Eigen::Map<const Eigen::VectorXd>(lead_x.data(), tc_index + 1));
  }
  return res;
}

struct CycleResult {
  std::vector<PlanResult> results;
  std::vector<std::string> errors;
};

/// Every t_c candidate planned concurrently; failures are collected per
/// variant. Results keep the candidate order.
inline CycleResult plan_cycle(const PlanRequest& req) {
  std::vector<std::future<PlanResult>> futures;
  futures.reserve(req.tc_candidates.size());
  for (double tc : req.tc_candidates) {
    futures.push_back(std::async(std::launch::async, [&req, tc] { return plan_combinatorial(req, tc); }));
  }
  CycleResult out;
  for (std::size_t i = 0; i < futures.size(); ++i) {
    try {
      out.results.push_back(futures[i].get());
    } catch (const std::exception& e) {
      out.errors.push_back("t_c=" + std::to_string(req.tc_candidates[i]) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace mnp

#endif  // MNP_PLANNER_HPP
