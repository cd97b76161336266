#ifndef MNP_GAUSSIAN_TRAJECTORY_HPP
#define MNP_GAUSSIAN_TRAJECTORY_HPP

#include <cstddef>
#include <vector>

#include "mnp/error.hpp"

namespace mnp {

/// Per-step longitudinal position distribution of a predicted vehicle.
///
/// Sample j describes the position at time (start_step + j) * dt relative to
/// the prediction origin. Each sample is a Gaussian N(mu, sigma^2) truncated
/// to [lower, upper].
struct GaussianTrajectory {
  double dt = 0.25;
  int start_step = 1;
  std::vector<double> mu;
  std::vector<double> sigma;
  std::vector<double> lower;
  std::vector<double> upper;

  std::size_t size() const { return mu.size(); }
  bool empty() const { return mu.empty(); }
  double time_of(std::size_t j) const {
    return (start_step + static_cast<double>(j)) * dt;
  }

  void validate() const {
    const auto n = mu.size();
    if (sigma.size() != n || lower.size() != n || upper.size() != n) {
      throw DomainError("GaussianTrajectory: array lengths differ");
    }
    for (std::size_t j = 0; j < n; ++j) {
      if (sigma[j] < 0.0) throw DomainError("GaussianTrajectory: negative sigma");
      if (!(lower[j] < upper[j])) {
        throw DegenerateTruncation("GaussianTrajectory: lower >= upper");
      }
    }
  }

  /// Same distribution expressed in a coordinate shifted by `offset`.
  GaussianTrajectory shifted(double offset) const {
    GaussianTrajectory out = *this;
    for (std::size_t j = 0; j < out.size(); ++j) {
      out.mu[j] += offset;
      out.lower[j] += offset;
      out.upper[j] += offset;
    }
    return out;
  }
};

}  // namespace mnp

#endif  // MNP_GAUSSIAN_TRAJECTORY_HPP
