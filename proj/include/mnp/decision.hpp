#ifndef MNP_DECISION_HPP
#define MNP_DECISION_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mnp/error.hpp"
#include "mnp/maneuver.hpp"
#include "mnp/optimizer.hpp"
#include "mnp/planner.hpp"

namespace mnp {

struct DecisionThresholds {
  double entropy_max = 0.45;
  double p_coll_max = 0.05;

  void validate() const {
    if (!(entropy_max > 0.0 && entropy_max <= std::numbers::ln2)) {
      throw DomainError("DecisionThresholds: entropy_max must be in (0, ln 2]");
    }
    if (!(p_coll_max > 0.0 && p_coll_max < 1.0)) {
      throw DomainError("DecisionThresholds: p_coll_max must be in (0, 1)");
    }
  }
};

enum class DecisionKind { Lead, Yield, Neutral, Emergency };

inline constexpr std::string_view to_string(DecisionKind k) {
  switch (k) {
    case DecisionKind::Lead: return "lead";
    case DecisionKind::Yield: return "yield";
    case DecisionKind::Neutral: return "neutral";
    default: return "emergency";
  }
}

struct DecisionRationale {
  double entropy = 0.0;
  double p_yield = 0.0;
  double p_drive = 0.0;
  double chosen_ride_cost = 0.0;
  double chosen_risk = 0.0;
};

struct Decision {
  DecisionKind kind = DecisionKind::Emergency;
  std::optional<std::size_t> result_index;  // into the plan results
  BranchKind branch = BranchKind::Follow;
  std::vector<double> trajectory;           // empty for Emergency
  DecisionRationale rationale;
};

/// Highest pointwise conflict probability of `trajectory` against one
/// prediction component.
inline double peak_collision_probability(std::span<const double> trajectory,
                                         const GaussianTrajectory& component, ConflictSide side,
                                         const ConflictGeometry& geo) {
  const auto p = pointwise_conflict(trajectory, component, side, geo);
  return p.empty() ? 0.0 : *std::max_element(p.begin(), p.end());
}

/// Objective of a trajectory without the collision term.
inline double ride_cost(std::span<const double> trajectory, double dt,
                        const ResidualWeights& weights) {
  return ride_cost_of(trajectory, dt, weights);
}

/// Full braking at b_hard until standstill, then hold.
inline std::vector<double> emergency_profile(double s, double v, double b_hard, int N, double dt) {
  if (v < 0.0) throw DomainError("emergency_profile: negative speed");
  if (!(b_hard > 0.0)) throw DomainError("emergency_profile: b_hard must be positive");
  std::vector<double> x;
  x.reserve(N);
  const double t_stop = v / b_hard;
  for (int k = 0; k < N; ++k) {
    const double t = k * dt;
    x.push_back(t < t_stop ? s + v * t - 0.5 * b_hard * t * t : s + 0.5 * v * v / b_hard);
  }
  return x;
}

namespace detail {

/// Immediate plan (smallest t_c) and the postponed plan (next larger t_c).
inline std::pair<std::optional<std::size_t>, std::optional<std::size_t>> locate_variants(
    const std::vector<PlanResult>& results) {
  std::optional<std::size_t> immediate;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].combinatorial) continue;
    if (!immediate || results[i].tc_index < results[*immediate].tc_index) immediate = i;
  }
  std::optional<std::size_t> postponed;
  for (std::size_t i = 0; i < results.size(); ++i) {
    if (!results[i].combinatorial || i == immediate) continue;
    if (immediate && results[i].tc_index <= results[*immediate].tc_index) continue;
    if (!postponed || results[i].tc_index < results[*postponed].tc_index) postponed = i;
  }
  return {immediate, postponed};
}

}  // namespace detail

/// Maneuver selection.
///
/// 1. Unclear intention (entropy above threshold): drive the shared prefix of
///    the postponed plan, provided each of its branches is safe against the
///    hypothesis it is paired with.
/// 2. Otherwise commit to the immediate-plan branch with least ride cost among
///    those whose belief-weighted risk does not exceed the threshold; ties go
///    to Yield.
/// 3. No admissible branch: Emergency.
inline Decision select(const std::vector<PlanResult>& results, const ManeuverBelief& belief,
                       const DecisionThresholds& thresholds) {
  if (results.empty()) throw PlanningError("select: no plan results");
  Decision d;
  d.rationale.entropy = belief.entropy;
  d.rationale.p_yield = belief.p(Maneuver::Yield);
  d.rationale.p_drive = belief.p(Maneuver::Drive);
  const auto [immediate, postponed] = detail::locate_variants(results);

  if (belief.entropy > thresholds.entropy_max && postponed) {
    const PlanResult& plan = results[*postponed];
    const bool safe = std::all_of(plan.branches.begin(), plan.branches.end(), [&](const BranchPlan& b) {
      return b.peak_collision_probability <= thresholds.p_coll_max;
    });
    if (safe) {
      const BranchPlan* follow = plan.branch(BranchKind::Follow);
      d.kind = DecisionKind::Neutral;
      d.result_index = *postponed;
      d.branch = BranchKind::Follow;
      d.trajectory = follow->x;
      d.rationale.chosen_ride_cost = follow->ride_cost;
      d.rationale.chosen_risk = follow->peak_collision_probability;
      return d;
    }
  }

  if (immediate) {
    const PlanResult& plan = results[*immediate];
    const BranchPlan* best = nullptr;
    // Follow is examined first so that it wins ties.
    for (BranchKind k : {BranchKind::Follow, BranchKind::Lead}) {
      const BranchPlan* b = plan.branch(k);
      if (!b || b->risk > thresholds.p_coll_max) continue;
      if (!best || b->ride_cost < best->ride_cost) best = b;
    }
    if (best) {
      d.kind = best->kind == BranchKind::Lead ? DecisionKind::Lead : DecisionKind::Yield;
      d.result_index = *immediate;
      d.branch = best->kind;
      d.trajectory = best->x;
      d.rationale.chosen_ride_cost = best->ride_cost;
      d.rationale.chosen_risk = best->risk;
      return d;
    }
  }
  d.kind = DecisionKind::Emergency;
  return d;
}

}  // namespace mnp

#endif  // MNP_DECISION_HPP
