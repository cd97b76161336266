#ifndef MNP_TESTS_SUPPORT_HPP
#define MNP_TESTS_SUPPORT_HPP

// Shared fixtures for the unit tests and the acceptance binary.

#include <Eigen/Dense>
#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "mnp/planner.hpp"
#include "mnp/scenario_io.hpp"
#include "mnp/simulator.hpp"

namespace mnp::fixtures {

inline std::string source_path(const std::string& rel) { return std::string(MNP_SOURCE_DIR) + "/" + rel; }

inline ScenarioConfig golden(const std::string& name) {
  return load_scenario(source_path("scenarios/" + name + ".json"));
}

/// Rebuild the planning request of a recorded combinatorial cycle.
inline PlanRequest request_from_cycle(const ScenarioConfig& cfg, const CycleRecord& rec) {
  PlanRequest req;
  const auto& x = rec.branches.at(0).x;
  req.pinned.assign(x.begin(), x.begin() + cfg.planner.pin_index + 1);
  req.hypotheses = rec.hypotheses;
  req.belief = rec.belief;
  req.weights = cfg.weights;
  req.weights.v_des = cfg.ego_desired_speed;
  req.geometry = {cfg.merge.s_merge_a, cfg.safety_gap};
  req.settings = cfg.planner;
  req.tc_candidates = rec.tc;
  return req;
}

/// First `count` combinatorial cycles of a run.
inline std::vector<const CycleRecord*> combinatorial_cycles(const SimResult& r, std::size_t count = 1000) {
  std::vector<const CycleRecord*> out;
  for (const auto& c : r.cycles) {
    if (c.combinatorial && out.size() < count) out.push_back(&c);
  }
  return out;
}

/// Synthetic merge in ego coordinates. Ego starts at 0 with 10 m/s, the
/// merge begin lies at `merge` and both hypotheses start at `other_start`,
/// so with the defaults both vehicles reach the merge after about 3 s.
inline PlanRequest synthetic_request(double merge = 30.0, double other_start = 0.0,
                                     double other_v = 10.0) {
  PlanRequest req;
  req.settings.horizon_points = 37;
  req.settings.dt = 0.25;
  req.settings.pin_index = 1;
  req.weights.v_des = 10.0;
  req.weights.w_coll = 300.0;
  req.geometry = {merge, 6.0};
  req.pinned = {0.0, 2.5};
  const int steps = req.settings.horizon_points - 1;
  GaussianState start;
  NoiseParams noise;
  noise.sigma_a_sq = 0.002;
  start.cov = Eigen::Vector3d(0.04, 0.04, 0.0025).asDiagonal();
  IdmParams idm;
  std::vector<std::pair<Maneuver, GaussianTrajectory>> preds;
  for (Maneuver m : kManeuvers) {
    start.mean = Eigen::Vector3d(other_start, other_v, 0.0);
    ManeuverContext ctx;
    ctx.s_merge = merge;
    ctx.reach = {idm.a_max, idm.b_hard, 0.6};
    preds.emplace_back(m, predict_maneuver(start, m, ctx, idm, noise, steps, req.settings.dt));
  }
  req.belief = maneuver_probabilities(1.0, 1.0);
  req.hypotheses = build_hypothesis_set(preds, req.belief);
  req.tc_candidates = {0.25, 0.5};
  return req;
}

/// Central finite-difference gradient.
inline Eigen::VectorXd numeric_gradient(const CostProblem& problem, const Eigen::VectorXd& x,
                                        double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (problem.cost(xp) - problem.cost(xm)) / (2.0 * h);
  }
  return g;
}

/// Largest gradient deviation relative to the gradient scale.
inline double gradient_relative_error(const CostProblem& problem, const Eigen::VectorXd& x) {
  const Eigen::VectorXd analytic = problem.evaluate(x).gradient;
  const Eigen::VectorXd numeric = numeric_gradient(problem, x);
  const double scale = std::max(1.0, numeric.lpNorm<Eigen::Infinity>());
  return (analytic - numeric).lpNorm<Eigen::Infinity>() / scale;
}

/// Combinatorial cost of the synthetic scene (t_c = 2 t_pin) together with a
/// parameter vector built from the free-drive and stop profiles.
inline std::pair<CostProblem, Eigen::VectorXd> synthetic_combinatorial_problem() {
  const PlanRequest req = synthetic_request();
  const int N = req.settings.horizon_points;
  const CombinatorialLayout layout = build_layout(N, 2, req.settings.pin_index);
  const auto lead = detail::conflict_for(req, BranchKind::Lead);
  const auto follow = detail::conflict_for(req, BranchKind::Follow);
  CostProblem problem = assemble_combinatorial(layout, req.settings.dt, req.weights, lead, follow, req.geometry);
  const auto lead_init = detail::free_profile(req);
  const auto follow_init = detail::follow_profile(req, lead_init, follow.other);
  Eigen::VectorXd x(layout.total_params());
  for (int i : layout.shared_indices) x[i] = follow_init[i];
  for (std::size_t k = 0; k < layout.lead_indices.size(); ++k) {
    x[layout.lead_indices[k]] = lead_init[layout.tc_index + 1 + k];
    x[layout.yield_indices[k]] = follow_init[layout.tc_index + 1 + k];
  }
  return {std::move(problem), std::move(x)};
}

/// Two-branch plan result with prescribed ride costs and probabilities.
/// `peak` and `risk` are set to the same value.
inline PlanResult synthetic_plan(int tc_index, double lead_cost, double follow_cost, double lead_p,
                                 double follow_p) {
  PlanResult r;
  r.combinatorial = true;
  r.tc_index = tc_index;
  r.tc = 0.25 * tc_index;
  BranchPlan lead;
  lead.kind = BranchKind::Lead;
  lead.x = {0.0, 2.5, 5.0 + tc_index};
  lead.ride_cost = lead_cost;
  lead.peak_collision_probability = lead.risk = lead_p;
  BranchPlan follow = lead;
  follow.kind = BranchKind::Follow;
  follow.x = {0.0, 2.5, 4.0 + tc_index};
  follow.ride_cost = follow_cost;
  follow.peak_collision_probability = follow.risk = follow_p;
  r.branches = {lead, follow};
  return r;
}

/// Belief whose Shannon entropy equals `h` (nats), yield being the likelier.
inline ManeuverBelief belief_with_entropy(double h) {
  double lo = 0.5, hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    const std::vector<double> p{mid, 1.0 - mid};
    (entropy(p) > h ? lo : hi) = mid;
  }
  ManeuverBelief b;
  b.probabilities[index_of(Maneuver::Yield)] = hi;
  b.probabilities[index_of(Maneuver::Drive)] = 1.0 - hi;
  b.entropy = h;
  return b;
}

}  // namespace mnp::fixtures

#endif  // MNP_TESTS_SUPPORT_HPP
