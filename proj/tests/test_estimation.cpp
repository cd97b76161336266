#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mnp/estimation.hpp"

using namespace mnp;

TEST(Dissimilarity, IdenticalSequencesAreZero) {
  const std::vector<double> x{1.0, 2.5, 4.0};
  EXPECT_DOUBLE_EQ(dissimilarity(x, x), 0.0);
}

TEST(Dissimilarity, SumOfSquares) {
  const std::vector<double> exec{0.0, 1.0, 2.0};
  const std::vector<double> hyp{0.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(dissimilarity(exec, hyp), 5.0);
}

TEST(Dissimilarity, LengthMismatchThrows) {
  const std::vector<double> a{0.0, 1.0};
  const std::vector<double> b{0.0};
  EXPECT_THROW(dissimilarity(a, b), DomainError);
}

TEST(ManeuverProbabilities, EqualDissimilaritiesAreEven) {
  const auto b = maneuver_probabilities(2.0, 2.0);
  EXPECT_DOUBLE_EQ(b.p(Maneuver::Yield), 0.5);
  EXPECT_DOUBLE_EQ(b.p(Maneuver::Drive), 0.5);
  EXPECT_NEAR(b.entropy, std::numbers::ln2, 1e-15);
}

TEST(ManeuverProbabilities, InverseWeighting) {
  const auto b = maneuver_probabilities(1.0, 3.0);
  EXPECT_DOUBLE_EQ(b.p(Maneuver::Yield), 0.75);
  EXPECT_DOUBLE_EQ(b.p(Maneuver::Drive), 0.25);
}

TEST(ManeuverProbabilities, AsPrintedWeightingIsTheMirror) {
  const auto b = maneuver_probabilities(1.0, 3.0, Weighting::AsPrinted);
  EXPECT_DOUBLE_EQ(b.p(Maneuver::Yield), 0.25);
}

TEST(ManeuverProbabilities, PerfectMatchIsCertain) {
  const auto b = maneuver_probabilities(0.0, 4.0);
  EXPECT_DOUBLE_EQ(b.p(Maneuver::Yield), 1.0);
  EXPECT_DOUBLE_EQ(b.entropy, 0.0);
}

TEST(ManeuverProbabilities, BothZeroIsIndistinguishable) {
  const auto b = maneuver_probabilities(0.0, 0.0);
  EXPECT_DOUBLE_EQ(b.p(Maneuver::Yield), 0.5);
}

TEST(ManeuverProbabilities, NegativeThrows) {
  EXPECT_THROW(maneuver_probabilities(-1.0, 1.0), DomainError);
}

TEST(Entropy, ReferenceValues) {
  const std::vector<double> certain_p{1.0, 0.0};
  const std::vector<double> even{0.5, 0.5};
  const std::vector<double> skewed{0.9, 0.1};
  EXPECT_DOUBLE_EQ(entropy(certain_p), 0.0);
  EXPECT_NEAR(entropy(even), 0.6931, 1e-4);
  EXPECT_NEAR(entropy(skewed), 0.3251, 1e-4);
}

TEST(Entropy, CertainBeliefHelper) {
  const auto b = certain(Maneuver::Drive);
  EXPECT_DOUBLE_EQ(b.p(Maneuver::Drive), 1.0);
  EXPECT_DOUBLE_EQ(b.entropy, 0.0);
}

TEST(Entropy, DefaultBeliefIsMaximal) {
  const ManeuverBelief b;
  EXPECT_NEAR(b.entropy, entropy(b.probabilities), 1e-15);
}
