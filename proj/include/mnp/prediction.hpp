#ifndef MNP_PREDICTION_HPP
#define MNP_PREDICTION_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "mnp/error.hpp"
#include "mnp/gaussian_trajectory.hpp"
#include "mnp/maneuver.hpp"

namespace mnp {

// ---------------------------------------------------------------------------
// Intelligent Driver Model
// ---------------------------------------------------------------------------

struct IdmParams {
  double v0 = 10.0;      // desired speed (m/s)
  double T = 1.5;        // time headway (s)
  double a_max = 1.5;    // maximum acceleration (m/s^2)
  double b_comf = 2.0;   // comfortable deceleration (m/s^2, positive)
  double s0 = 2.0;       // minimum gap (m)
  double delta = 4.0;    // acceleration exponent
  double b_hard = 8.0;   // physical deceleration limit used for clamping (m/s^2)

  void validate() const {
    if (!(v0 > 0 && T > 0 && a_max > 0 && b_comf > 0 && s0 > 0 && delta > 0 &&
          b_hard > 0)) {
      throw DomainError("IdmParams: all parameters must be positive");
    }
  }
};

inline constexpr double kFreeRoad = std::numeric_limits<double>::infinity();

/// IDM acceleration, clamped to [-b_hard, a_max]. `gap` may be kFreeRoad.
inline double idm_acceleration(double ego_v, double gap, double lead_v,
                               const IdmParams& p) {
  if (!(gap > 0.0)) throw DomainError("idm_acceleration: non-positive gap");
  const double free_term = std::pow(std::max(ego_v, 0.0) / p.v0, p.delta);
  double interaction = 0.0;
  if (std::isfinite(gap)) {
    const double dv = ego_v - lead_v;
    const double s_star =
        p.s0 + std::max(0.0, ego_v * p.T + ego_v * dv / (2.0 * std::sqrt(p.a_max * p.b_comf)));
    interaction = (s_star / gap) * (s_star / gap);
  }
  const double acc = p.a_max * (1.0 - free_term - interaction);
  return std::clamp(acc, -p.b_hard, p.a_max);
}

// ---------------------------------------------------------------------------
// Linear system and Kalman filter on x = [position, speed, acceleration]
// ---------------------------------------------------------------------------

struct GaussianState {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
};

struct NoiseParams {
  double sigma_a_sq = 0.2;
  Eigen::Matrix2d R = Eigen::Vector2d(0.04, 0.04).asDiagonal();
};

inline Eigen::Matrix3d transition_matrix(double dt) {
  Eigen::Matrix3d F;
  F << 1.0, dt, 0.5 * dt * dt,
       0.0, 1.0, dt,
       0.0, 0.0, 1.0;
  return F;
}

inline Eigen::Vector3d input_matrix(double dt) {
  return {0.5 * dt * dt, dt, 1.0};
}

inline Eigen::Matrix3d process_noise(double dt, double sigma_a_sq) {
  const double dt2 = dt * dt;
  const double dt3 = dt2 * dt;
  const double dt4 = dt2 * dt2;
  Eigen::Matrix3d Q;
  Q << dt4 / 4.0, dt3 / 2.0, dt2 / 2.0,
       dt3 / 2.0, dt2,       dt,
       dt2 / 2.0, dt,        1.0;
  return Q * sigma_a_sq;
}

inline Eigen::Matrix<double, 2, 3> measurement_matrix() {
  Eigen::Matrix<double, 2, 3> H;
  H << 1.0, 0.0, 0.0,
       0.0, 1.0, 0.0;
  return H;
}

inline Eigen::Matrix3d symmetrized(const Eigen::Matrix3d& m) {
  return 0.5 * (m + m.transpose());
}

/// Prediction step: mean = F mean + B u, cov = F cov F^T + Q.
inline GaussianState kalman_predict(const GaussianState& prior, double u, double dt,
                                    const NoiseParams& noise) {
  if (!(dt > 0.0)) throw DomainError("kalman_predict: dt must be positive");
  const Eigen::Matrix3d F = transition_matrix(dt);
  GaussianState out;
  out.mean = F * prior.mean + input_matrix(dt) * u;
  out.cov = symmetrized(F * prior.cov * F.transpose() + process_noise(dt, noise.sigma_a_sq));
  return out;
}

/// Update step with a position/speed measurement.
inline GaussianState kalman_update(const GaussianState& prior, const Eigen::Vector2d& z,
                                   const NoiseParams& noise) {
  const auto H = measurement_matrix();
  const Eigen::Matrix2d S = H * prior.cov * H.transpose() + noise.R;
  Eigen::FullPivLU<Eigen::Matrix2d> lu(S);
  const double scale = std::max(1.0, S.cwiseAbs().maxCoeff());
  if (!lu.isInvertible() || std::abs(S.determinant()) < 1e-18 * scale * scale) {
    throw NumericalError("kalman_update: singular innovation covariance");
  }
  const Eigen::Matrix<double, 3, 2> K = prior.cov * H.transpose() * lu.inverse();
  GaussianState out;
  out.mean = prior.mean + K * (z - H * prior.mean);
  out.cov = symmetrized((Eigen::Matrix3d::Identity() - K * H) * prior.cov);
  return out;
}

// ---------------------------------------------------------------------------
// Reachability and truncation
// ---------------------------------------------------------------------------

struct ReachabilityLimits {
  double a_max = 1.5;   // m/s^2
  double b_hard = 8.0;  // m/s^2, positive
  double margin = 0.0;  // widening applied to both sides (m)
};

struct ReachabilityEnvelope {
  std::vector<double> lower;
  std::vector<double> upper;
};

/// Positions reachable from (x0, v0) under full braking / full throttle,
/// sampled at times (start_step + j) * dt. Speed never becomes negative.
inline ReachabilityEnvelope compute_reachability(double x0, double v0,
                                                 const ReachabilityLimits& lim,
                                                 double dt, int steps,
                                                 int start_step = 1) {
  v0 = std::max(v0, 0.0);
  ReachabilityEnvelope env;
  env.lower.reserve(steps);
  env.upper.reserve(steps);
  for (int j = 0; j < steps; ++j) {
    const double t = (start_step + j) * dt;
    const double t_stop = v0 / lim.b_hard;
    const double brake = (t < t_stop) ? v0 * t - 0.5 * lim.b_hard * t * t
                                      : 0.5 * v0 * v0 / lim.b_hard;
    env.lower.push_back(x0 + brake - lim.margin);
    env.upper.push_back(x0 + v0 * t + 0.5 * lim.a_max * t * t + lim.margin);
  }
  return env;
}

/// Truncation bounds per maneuver: Drive keeps the reachability envelope,
/// Yield additionally caps the upper bound at the merge begin.
inline std::pair<std::vector<double>, std::vector<double>> truncate_bounds(
    Maneuver maneuver, const ReachabilityEnvelope& env, double s_merge) {
  if (env.lower.size() != env.upper.size()) {
    throw DomainError("truncate_bounds: envelope lengths differ");
  }
  std::vector<double> lower = env.lower;
  std::vector<double> upper = env.upper;
  for (std::size_t j = 0; j < upper.size(); ++j) {
    if (maneuver == Maneuver::Yield) upper[j] = std::min(upper[j], s_merge);
    if (!(lower[j] < upper[j])) {
      throw DegenerateTruncation("truncate_bounds: empty support for " +
                                 std::string(to_string(maneuver)) + " hypothesis");
    }
  }
  return {std::move(lower), std::move(upper)};
}

// ---------------------------------------------------------------------------
// Maneuver-conditioned prediction
// ---------------------------------------------------------------------------

/// A leader assumed to keep constant speed; `s` is its rear position.
struct ConstantSpeedLeader {
  double s = 0.0;
  double v = 0.0;
};

struct ManeuverContext {
  double s_merge = 0.0;                         // merge begin in the predicted vehicle's route
  std::optional<ConstantSpeedLeader> leader;    // used by Drive only
  ReachabilityLimits reach;
};

/// IDM acceleration the predicted vehicle applies at `elapsed` seconds into
/// the prediction when executing `maneuver`.
inline double maneuver_acceleration(Maneuver maneuver, double s, double v, double elapsed,
                                    const ManeuverContext& ctx, const IdmParams& p) {
  if (maneuver == Maneuver::Yield) {
    return idm_acceleration(v, ctx.s_merge - s, 0.0, p);
  }
  if (ctx.leader) {
    const double lead_s = ctx.leader->s + ctx.leader->v * elapsed;
    return idm_acceleration(v, lead_s - s, ctx.leader->v, p);
  }
  return idm_acceleration(v, kFreeRoad, 0.0, p);
}

/// Acceleration to hold over one step so that speed does not turn negative.
inline double stop_guarded(double v, double acc, double dt) {
  if (v + acc * dt < 0.0) return -std::max(v, 0.0) / dt;
  return acc;
}

/// Iterate IDM control through the Kalman prediction step for
/// `horizon_steps` steps. The IDM output is applied as the acceleration held
/// over each step, so u_k = a_idm - a_{k-1}.
inline GaussianTrajectory predict_maneuver(const GaussianState& start, Maneuver maneuver,
                                           const ManeuverContext& ctx, const IdmParams& p,
                                           const NoiseParams& noise, int horizon_steps,
                                           double dt) {
  if (horizon_steps < 1) throw DomainError("predict_maneuver: horizon_steps < 1");
  GaussianTrajectory traj;
  traj.dt = dt;
  traj.start_step = 1;
  traj.mu.reserve(horizon_steps);
  traj.sigma.reserve(horizon_steps);
  GaussianState state = start;
  for (int k = 1; k <= horizon_steps; ++k) {
    const double elapsed = (k - 1) * dt;
    double acc = maneuver_acceleration(maneuver, state.mean(0), state.mean(1), elapsed, ctx, p);
    acc = stop_guarded(state.mean(1), acc, dt);
    state = kalman_predict(state, acc - state.mean(2), dt, noise);
    traj.mu.push_back(state.mean(0));
    traj.sigma.push_back(std::sqrt(std::max(state.cov(0, 0), 0.0)));
  }
  const auto env = compute_reachability(start.mean(0), start.mean(1), ctx.reach, dt,
                                        horizon_steps, traj.start_step);
  auto [lower, upper] = truncate_bounds(maneuver, env, ctx.s_merge);
  traj.lower = std::move(lower);
  traj.upper = std::move(upper);
  return traj;
}

// ---------------------------------------------------------------------------
// Mixture of maneuver hypotheses
// ---------------------------------------------------------------------------

struct HypothesisComponent {
  Maneuver label = Maneuver::Drive;
  GaussianTrajectory trajectory;
  double weight = 0.0;
};

struct ManeuverHypothesisSet {
  std::vector<HypothesisComponent> components;

  const HypothesisComponent* find(Maneuver m) const {
    for (const auto& c : components) {
      if (c.label == m) return &c;
    }
    return nullptr;
  }

  /// Weighted mean of the component means at sample j.
  double mixture_mean(std::size_t j) const {
    double acc = 0.0;
    for (const auto& c : components) acc += c.weight * c.trajectory.mu.at(j);
    return acc;
  }
};

/// One component per available maneuver, weighted by the belief. Missing
/// maneuvers (e.g. a yield that is no longer physically possible) are skipped
/// and the remaining weights renormalized.
inline ManeuverHypothesisSet build_hypothesis_set(
    const std::vector<std::pair<Maneuver, GaussianTrajectory>>& predictions,
    const ManeuverBelief& belief) {
  ManeuverHypothesisSet set;
  double total = 0.0;
  for (const auto& [label, traj] : predictions) {
    if (set.find(label)) throw DomainError("build_hypothesis_set: duplicate maneuver label");
    const double w = belief.p(label);
    if (w < 0.0) throw DomainError("build_hypothesis_set: negative probability");
    set.components.push_back({label, traj, w});
    total += w;
  }
  if (!set.components.empty()) {
    for (auto& c : set.components) {
      c.weight = total > 0.0 ? c.weight / total : 1.0 / set.components.size();
    }
  }
  return set;
}

}  // namespace mnp

#endif  // MNP_PREDICTION_HPP
