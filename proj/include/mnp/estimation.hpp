#ifndef MNP_ESTIMATION_HPP
#define MNP_ESTIMATION_HPP

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "mnp/error.hpp"
#include "mnp/maneuver.hpp"

namespace mnp {

/// Last n+1 observed longitudinal positions at a uniform sampling interval.
struct ExecutionHistory {
  double dt = 0.25;
  std::vector<double> positions;
  std::vector<double> timestamps;
};

/// Sum of squared position differences over the overlapping samples.
inline double dissimilarity(std::span<const double> executed,
                            std::span<const double> hypothesis) {
  if (executed.size() != hypothesis.size()) {
    throw DomainError("dissimilarity: sequences differ in length");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < executed.size(); ++k) {
    const double d = executed[k] - hypothesis[k];
    sum += d * d;
  }
  return sum;
}

/// -sum p ln p with 0 ln 0 = 0.
inline double entropy(std::span<const double> probabilities) {
  double h = 0.0;
  for (double p : probabilities) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

/// How dissimilarities map to the yield probability.
enum class Weighting {
  Inverse,   // p_yield = m_drive / (m_yield + m_drive)
  AsPrinted  // p_yield = m_yield / (m_yield + m_drive)
};

/// Relative weighting of the two dissimilarities into a maneuver belief.
/// Both zero means the hypotheses are indistinguishable: (0.5, 0.5).
inline ManeuverBelief maneuver_probabilities(double m_yield, double m_drive,
                                             Weighting weighting = Weighting::Inverse) {
  if (m_yield < 0.0 || m_drive < 0.0) {
    throw DomainError("maneuver_probabilities: negative dissimilarity");
  }
  ManeuverBelief belief;
  const double total = m_yield + m_drive;
  double p_yield = 0.5;
  if (total > 0.0) {
    p_yield = (weighting == Weighting::Inverse ? m_drive : m_yield) / total;
  }
  belief.probabilities[index_of(Maneuver::Yield)] = p_yield;
  belief.probabilities[index_of(Maneuver::Drive)] = 1.0 - p_yield;
  belief.entropy = entropy(belief.probabilities);
  return belief;
}

/// Belief that puts all mass on one maneuver.
inline ManeuverBelief certain(Maneuver m) {
  ManeuverBelief belief;
  belief.probabilities = {0.0, 0.0};
  belief.probabilities[index_of(m)] = 1.0;
  belief.entropy = 0.0;
  return belief;
}

}  // namespace mnp

#endif  // MNP_ESTIMATION_HPP
