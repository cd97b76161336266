#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "mnp/planner.hpp"
#include "support.hpp"

using namespace mnp;

namespace {

GaussianTrajectory linear_means(double speed, int steps = 36, double dt = 0.25) {
  GaussianTrajectory t;
  t.dt = dt;
  for (int k = 1; k <= steps; ++k) {
    t.mu.push_back(speed * k * dt);
    t.sigma.push_back(1.0);
    t.lower.push_back(-1e3);
    t.upper.push_back(1e3);
  }
  return t;
}

ManeuverHypothesisSet pair_of(const GaussianTrajectory& drive, const GaussianTrajectory& yield) {
  return build_hypothesis_set({{Maneuver::Drive, drive}, {Maneuver::Yield, yield}}, ManeuverBelief{});
}

// Independent evaluation of the rear-side conflict of one support point.
double behind_oracle(double x, double mu, double sigma, double a, double b, double merge, double gap) {
  const double y = x + gap;
  if (y <= merge) return 0.0;
  auto Phi = [&](double v) { return 0.5 * std::erfc(-(v - mu) / (sigma * std::sqrt(2.0))); };
  const double lo = std::max(merge, a);
  const double hi = std::min(y, b);
  if (hi <= lo) return 0.0;
  return (Phi(hi) - Phi(lo)) / (Phi(b) - Phi(a));
}

}  // namespace

TEST(TimeOfArrival, MinimumOverComponents) {
  const double merge = 30.0;
  EXPECT_NEAR(compute_t_o(pair_of(linear_means(10.0), linear_means(0.0)), merge), 3.0, 1e-12);
  EXPECT_NEAR(compute_t_o(pair_of(linear_means(0.0), linear_means(0.0)), merge), 9.0, 1e-12);
  EXPECT_NEAR(compute_t_o(pair_of(linear_means(30.0 / 3.2), linear_means(5.0)), merge), 3.2, 1e-9);
}

TEST(TimeOfArrival, EmptySetThrows) {
  EXPECT_THROW(compute_t_o(ManeuverHypothesisSet{}, 1.0), DomainError);
}

TEST(PlanStraight, FreeRoadHoldsDesiredSpeed) {
  PlanRequest req;
  req.weights.v_des = 10.0;
  req.pinned = {0.0, 2.5};
  const PlanResult r = plan_straight(req);
  ASSERT_EQ(r.branches.size(), 1u);
  const auto& x = r.branches[0].x;
  ASSERT_EQ(x.size(), 37u);
  EXPECT_LT(r.total_cost, 1e-8);
  for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(x[k], 2.5 * k, 1e-6);
}

TEST(PlanStraight, PinnedPrefixRespected) {
  PlanRequest req;
  req.weights.v_des = 12.0;
  req.settings.pin_index = 2;
  req.pinned = {3.0, 4.5, 6.1};
  const PlanResult r = plan_straight(req);
  EXPECT_EQ(r.branches[0].x[0], 3.0);
  EXPECT_EQ(r.branches[0].x[1], 4.5);
  EXPECT_EQ(r.branches[0].x[2], 6.1);
}

TEST(PlanStraight, RejectsWrongPinnedLength) {
  PlanRequest req;
  req.pinned = {0.0};
  EXPECT_THROW(plan_straight(req), DomainError);
}

TEST(PlanCombinatorial, PostponedBranchesShareThePrefix) {
  const auto req = fixtures::synthetic_request();
  const PlanResult r = plan_combinatorial(req, 0.5);
  ASSERT_TRUE(r.combinatorial);
  EXPECT_EQ(r.tc_index, 2);
  EXPECT_EQ(r.num_params, 2 * 37 - 2 - 1);
  const auto& lead = r.branch(BranchKind::Lead)->x;
  const auto& follow = r.branch(BranchKind::Follow)->x;
  for (int k = 0; k <= 2; ++k) EXPECT_EQ(lead[k], follow[k]);
  EXPECT_NE(lead[3], follow[3]);
}

TEST(PlanCombinatorial, FollowStaysBehindDriveComponent) {
  const auto req = fixtures::synthetic_request();
  const PlanResult r = plan_combinatorial(req, 0.25);
  const BranchPlan& follow = *r.branch(BranchKind::Follow);
  const auto& drive = req.hypotheses.find(Maneuver::Drive)->trajectory;
  double peak = 0.0;
  for (std::size_t k = 1; k < follow.x.size(); ++k) {
    const std::size_t j = k - 1;
    peak = std::max(peak, behind_oracle(follow.x[k], drive.mu[j], drive.sigma[j], drive.lower[j], drive.upper[j],
                                        req.geometry.merge, req.geometry.gap));
  }
  EXPECT_NEAR(follow.peak_collision_probability, peak, 1e-12);
  EXPECT_LE(follow.peak_collision_probability, 0.05);
}

TEST(PlanCombinatorial, TotalCostDecomposes) {
  const auto req = fixtures::synthetic_request();
  for (double tc : {0.25, 0.5}) {
    const PlanResult r = plan_combinatorial(req, tc);
    double sum = -r.shared_ride_cost;
    for (const auto& b : r.branches) sum += b.ride_cost + b.collision_cost;
    EXPECT_NEAR(r.total_cost, sum, 1e-6 * std::max(1.0, r.total_cost));
  }
}

TEST(PlanCombinatorial, BranchTimeOutsideWindowThrows) {
  const auto req = fixtures::synthetic_request();
  EXPECT_THROW(plan_combinatorial(req, 0.1), DomainError);
  const double t_o = compute_t_o(req.hypotheses, req.geometry.merge);
  EXPECT_THROW(plan_combinatorial(req, t_o + 0.25), DomainError);
}

TEST(PlanCombinatorial, DecouplesAtPinnedBranchTime) {
  const auto req = fixtures::synthetic_request();
  const PlanResult joint = plan_combinatorial(req, req.settings.t_pin());
  const PlanResult lead = plan_straight(req, BranchKind::Lead);
  const PlanResult follow = plan_straight(req, BranchKind::Follow);
  for (std::size_t k = 0; k < lead.branches[0].x.size(); ++k) {
    EXPECT_NEAR(joint.branch(BranchKind::Lead)->x[k], lead.branches[0].x[k], 1e-3);
    EXPECT_NEAR(joint.branch(BranchKind::Follow)->x[k], follow.branches[0].x[k], 1e-3);
  }
}

TEST(PlanCycle, BothVariantsProduceFourBranches) {
  const auto req = fixtures::synthetic_request();
  const CycleResult c = plan_cycle(req);
  ASSERT_EQ(c.results.size(), 2u);
  EXPECT_TRUE(c.errors.empty());
  std::size_t branches = 0;
  for (const auto& r : c.results) branches += r.branches.size();
  EXPECT_EQ(branches, 4u);
}

TEST(PlanCycle, FailedVariantIsCollected) {
  auto req = fixtures::synthetic_request();
  req.tc_candidates = {0.25, 8.5};
  const CycleResult c = plan_cycle(req);
  EXPECT_EQ(c.results.size(), 1u);
  ASSERT_EQ(c.errors.size(), 1u);
  EXPECT_NE(c.errors[0].find("t_c"), std::string::npos);
}

TEST(PlanCycle, VariantOrderDoesNotMatter) {
  auto req = fixtures::synthetic_request();
  const CycleResult a = plan_cycle(req);
  std::reverse(req.tc_candidates.begin(), req.tc_candidates.end());
  const CycleResult b = plan_cycle(req);
  ASSERT_EQ(a.results.size(), b.results.size());
  for (std::size_t i = 0; i < a.results.size(); ++i) {
    const auto& ra = a.results[i];
    const auto& rb = b.results[a.results.size() - 1 - i];
    EXPECT_EQ(ra.tc_index, rb.tc_index);
    EXPECT_EQ(ra.total_cost, rb.total_cost);
    EXPECT_EQ(ra.branches[0].x, rb.branches[0].x);
  }
}

TEST(Pairing, LeadAgainstYieldFollowAgainstDrive) {
  EXPECT_EQ(paired_maneuver(BranchKind::Lead), Maneuver::Yield);
  EXPECT_EQ(paired_maneuver(BranchKind::Follow), Maneuver::Drive);
  EXPECT_EQ(side_of(BranchKind::Lead), ConflictSide::Ahead);
  EXPECT_EQ(side_of(BranchKind::Follow), ConflictSide::Behind);
}
