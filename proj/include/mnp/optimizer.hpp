#ifndef MNP_OPTIMIZER_HPP
#define MNP_OPTIMIZER_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "mnp/error.hpp"
#include "mnp/gaussian_trajectory.hpp"

namespace mnp {

// ---------------------------------------------------------------------------
// Normal and truncated-normal primitives
// ---------------------------------------------------------------------------

/// Standard normal CDF. Uses erfc so that the far tails keep full relative
/// precision.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

inline constexpr double kMinTruncationMass = 1e-12;

/// Weighted CDF of N(mu, sigma^2) truncated to [a, b], evaluated at x and
/// clamped to [0, w_coll]. The unweighted value is the probability that the
/// predicted position lies at or below x.
inline double collision_cost(double x, double mu, double sigma, double a, double b,
                             double w_coll) {
  if (!(a < b)) throw DegenerateTruncation("collision_cost: a >= b");
  if (!(sigma > 0.0)) throw DomainError("collision_cost: sigma must be positive");
  const double fa = normal_cdf((a - mu) / sigma);
  const double mass = normal_cdf((b - mu) / sigma) - fa;
  if (mass < kMinTruncationMass) {
    throw DegenerateTruncation("collision_cost: truncated mass vanishes");
  }
  const double value = (normal_cdf((x - mu) / sigma) - fa) / mass;
  return w_coll * std::clamp(value, 0.0, 1.0);
}

/// Truncated normal with cached normalizer; value, density and density slope.
class TruncatedNormal {
 public:
  TruncatedNormal(double mu, double sigma, double a, double b)
      : mu_(mu), sigma_(sigma), a_(a), b_(b) {
    if (!(a < b)) throw DegenerateTruncation("TruncatedNormal: a >= b");
    if (!(sigma > 0.0)) throw DomainError("TruncatedNormal: sigma must be positive");
    fa_ = normal_cdf((a - mu) / sigma);
    mass_ = normal_cdf((b - mu) / sigma) - fa_;
    if (mass_ < kMinTruncationMass) {
      throw DegenerateTruncation("TruncatedNormal: truncated mass vanishes");
    }
  }

  double cdf(double x) const {
    if (x <= a_) return 0.0;
    if (x >= b_) return 1.0;
    return std::clamp((normal_cdf((x - mu_) / sigma_) - fa_) / mass_, 0.0, 1.0);
  }
  double pdf(double x) const {
    if (x <= a_ || x >= b_) return 0.0;
    return normal_pdf((x - mu_) / sigma_) / (sigma_ * mass_);
  }
  double pdf_slope(double x) const {
    if (x <= a_ || x >= b_) return 0.0;
    const double z = (x - mu_) / sigma_;
    return -z * normal_pdf(z) / (sigma_ * sigma_ * mass_);
  }

 private:
  double mu_, sigma_, a_, b_;
  double fa_ = 0.0, mass_ = 1.0;
};

/// Which side of the predicted vehicle an ego branch must stay on once both
/// occupy the merged lane.
enum class ConflictSide {
  Behind,  // ego yields: bad if the other is merged and at or behind ego + gap
  Ahead    // ego leads: bad if the other is merged and ahead of ego - gap
};

/// Merge coordinate (ego frame) and the longitudinal clearance demanded.
struct ConflictGeometry {
  double merge = 0.0;
  double gap = 6.0;
};

struct ConflictValue {
  double p = 0.0;      // probability
  double dp = 0.0;     // derivative w.r.t. ego position
  double d2p = 0.0;    // second derivative
};

/// Probability that ego position x violates the branch ordering against one
/// truncated-normal prediction sample. Only mass beyond the merge begin can
/// conflict, so positions before the merge contribute nothing.
inline ConflictValue conflict_probability(const TruncatedNormal& other, double x,
                                          ConflictSide side, const ConflictGeometry& geo) {
  ConflictValue out;
  if (side == ConflictSide::Behind) {
    const double y = x + geo.gap;
    const double base = other.cdf(geo.merge);
    if (y > geo.merge) {
      out.p = std::max(0.0, other.cdf(y) - base);
      out.dp = other.pdf(y);
      out.d2p = other.pdf_slope(y);
    }
  } else {
    const double y = x - geo.gap;
    const double at = other.cdf(std::max(y, geo.merge));
    out.p = std::max(0.0, 1.0 - at);
    if (y > geo.merge) {
      out.dp = -other.pdf(y);
      out.d2p = -other.pdf_slope(y);
    }
  }
  return out;
}

/// Sample of `traj` aligned with ego support point `i` (support point i sits
/// at i*dt), or -1 when the prediction has no sample there.
inline long aligned_sample(const GaussianTrajectory& traj, int i) {
  const long j = static_cast<long>(i) - traj.start_step;
  return (j >= 0 && j < static_cast<long>(traj.size())) ? j : -1;
}

inline constexpr double kSigmaFloor = 1e-6;

inline TruncatedNormal sample_distribution(const GaussianTrajectory& traj, std::size_t j) {
  return TruncatedNormal(traj.mu[j], std::max(traj.sigma[j], kSigmaFloor), traj.lower[j],
                         traj.upper[j]);
}

/// Pointwise conflict probabilities of an N-point ego trajectory.
inline std::vector<double> pointwise_conflict(std::span<const double> x,
                                              const GaussianTrajectory& other,
                                              ConflictSide side, const ConflictGeometry& geo) {
  std::vector<double> p(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long j = aligned_sample(other, static_cast<int>(i));
    if (j < 0) continue;
    p[i] = conflict_probability(sample_distribution(other, j), x[i], side, geo).p;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Finite differences and residual primitives
// ---------------------------------------------------------------------------

struct Derivatives {
  std::vector<double> v;
  std::vector<double> acc;
  std::vector<double> jrk;
};

inline constexpr std::array<std::array<double, 4>, 3> kDifferenceStencils = {{
    {-1.0, 1.0, 0.0, 0.0},
    {1.0, -2.0, 1.0, 0.0},
    {-1.0, 3.0, -3.0, 1.0},
}};

/// Forward differences of orders 1..3; lengths N-1, N-2, N-3.
inline Derivatives finite_differences(std::span<const double> x, double dt) {
  if (x.size() < 4) throw DomainError("finite_differences: need at least 4 points");
  if (!(dt > 0.0)) throw DomainError("finite_differences: dt must be positive");
  Derivatives d;
  const std::size_t n = x.size();
  for (std::size_t i = 0; i + 1 < n; ++i) d.v.push_back((x[i + 1] - x[i]) / dt);
  for (std::size_t i = 0; i + 2 < n; ++i) {
    d.acc.push_back((x[i + 2] - 2.0 * x[i + 1] + x[i]) / (dt * dt));
  }
  for (std::size_t i = 0; i + 3 < n; ++i) {
    d.jrk.push_back((x[i + 3] - 3.0 * x[i + 2] + 3.0 * x[i + 1] - x[i]) / (dt * dt * dt));
  }
  return d;
}

inline double value_residual(double y, double y_des, double w) {
  return w * (y - y_des) * (y - y_des);
}

/// One-sided quadratic outside [lo, hi].
inline double range_residual(double y, double lo, double hi, double w) {
  if (y < lo) return w * (y - lo) * (y - lo);
  if (y > hi) return w * (y - hi) * (y - hi);
  return 0.0;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Weights, targets and admissible ranges of the residual terms.
struct ResidualWeights {
  double w_v_vel = 1.0;
  double w_v_acc = 1.0;
  double w_v_jrk = 0.1;
  double w_r_vel = 20.0;
  double w_r_acc = 100.0;
  double w_r_jrk = 100.0;
  double w_coll = 500.0;
  double v_des = 10.0;
  double a_des = 0.0;
  Interval v_range{0.0, 10.0};
  Interval a_range{-4.0, 2.0};
  Interval j_range{-4.0, 4.0};

  void validate() const {
    for (double w : {w_v_vel, w_v_acc, w_v_jrk, w_r_vel, w_r_acc, w_r_jrk, w_coll}) {
      if (w < 0.0) throw DomainError("ResidualWeights: negative weight");
    }
    for (const Interval& r : {v_range, a_range, j_range}) {
      if (r.lo > r.hi) throw DomainError("ResidualWeights: empty range");
    }
  }
};

namespace term {
inline constexpr const char* kValueVel = "value_vel";
inline constexpr const char* kValueAcc = "value_acc";
inline constexpr const char* kValueJrk = "value_jrk";
inline constexpr const char* kRangeVel = "range_vel";
inline constexpr const char* kRangeAcc = "range_acc";
inline constexpr const char* kRangeJrk = "range_jrk";
inline constexpr const char* kCollision = "collision";
}  // namespace term

using TermCosts = std::map<std::string, double>;

inline TermCosts empty_term_costs() {
  return {{term::kValueVel, 0.0}, {term::kValueAcc, 0.0}, {term::kValueJrk, 0.0},
          {term::kRangeVel, 0.0}, {term::kRangeAcc, 0.0}, {term::kRangeJrk, 0.0},
          {term::kCollision, 0.0}};
}

inline double sum_of(const TermCosts& costs) {
  double s = 0.0;
  for (const auto& [name, c] : costs) s += c;
  return s;
}

/// Value and range residual cost of one finite-difference window.
struct WindowTerms {
  double value = 0.0;
  double range = 0.0;
};

struct WindowWeights {
  double w_value, target, w_range;
  Interval range;
  const char* value_name;
  const char* range_name;
};

inline WindowWeights window_weights(const ResidualWeights& w, int order) {
  switch (order) {
    case 1: return {w.w_v_vel, w.v_des, w.w_r_vel, w.v_range, term::kValueVel, term::kRangeVel};
    case 2: return {w.w_v_acc, w.a_des, w.w_r_acc, w.a_range, term::kValueAcc, term::kRangeAcc};
    default: return {w.w_v_jrk, 0.0, w.w_r_jrk, w.j_range, term::kValueJrk, term::kRangeJrk};
  }
}

/// Sum of all value and range residuals of a standalone trajectory.
inline TermCosts trajectory_residual_costs(std::span<const double> x, double dt,
                                           const ResidualWeights& w) {
  const Derivatives d = finite_differences(x, dt);
  TermCosts costs = empty_term_costs();
  const std::array<const std::vector<double>*, 3> series = {&d.v, &d.acc, &d.jrk};
  for (int order = 1; order <= 3; ++order) {
    const WindowWeights ww = window_weights(w, order);
    for (double y : *series[order - 1]) {
      costs[ww.value_name] += value_residual(y, ww.target, ww.w_value);
      costs[ww.range_name] += range_residual(y, ww.range.lo, ww.range.hi, ww.w_range);
    }
  }
  return costs;
}

// ---------------------------------------------------------------------------
// Combinatorial parameter layout
// ---------------------------------------------------------------------------

/// Index bookkeeping for (shared, ego lead, ego yield) packed in one array.
struct CombinatorialLayout {
  int N = 0;
  int tc_index = 0;
  std::vector<int> shared_indices;
  std::vector<int> lead_indices;
  std::vector<int> yield_indices;
  /// Finite-difference windows (parameter indices) that straddle the end of
  /// the shared part and the beginning of the yield part.
  std::vector<std::vector<int>> bridge_residuals;

  int total_params() const { return 2 * N - tc_index - 1; }

  std::vector<int> lead_trajectory() const {
    std::vector<int> idx = shared_indices;
    idx.insert(idx.end(), lead_indices.begin(), lead_indices.end());
    return idx;
  }
  std::vector<int> yield_trajectory() const {
    std::vector<int> idx = shared_indices;
    idx.insert(idx.end(), yield_indices.begin(), yield_indices.end());
    return idx;
  }
};

/// A finite-difference window of the given order over parameter indices.
struct DifferenceWindow {
  int order = 1;
  std::array<int, 4> idx{};
};

/// All windows of a trajectory whose support points map to `traj`.
inline std::vector<DifferenceWindow> trajectory_windows(std::span<const int> traj) {
  std::vector<DifferenceWindow> out;
  const int n = static_cast<int>(traj.size());
  for (int order = 1; order <= 3; ++order) {
    for (int i = 0; i + order < n; ++i) {
      DifferenceWindow w{order, {}};
      for (int k = 0; k <= order; ++k) w.idx[k] = traj[i + k];
      out.push_back(w);
    }
  }
  return out;
}

inline CombinatorialLayout build_layout(int N, int tc_index, int pin_index = 0) {
  if (N < 4) throw DomainError("build_layout: N must be at least 4");
  if (pin_index < 0 || tc_index < pin_index || tc_index > N - 2) {
    throw DomainError("build_layout: tc_index outside [pin_index, N-2]");
  }
  CombinatorialLayout layout;
  layout.N = N;
  layout.tc_index = tc_index;
  for (int i = 0; i <= tc_index; ++i) layout.shared_indices.push_back(i);
  for (int i = tc_index + 1; i < N; ++i) layout.lead_indices.push_back(i);
  for (int i = 0; i < N - tc_index - 1; ++i) layout.yield_indices.push_back(N + i);
  const auto yield = layout.yield_trajectory();
  for (const auto& w : trajectory_windows(yield)) {
    bool has_shared = false;
    bool has_branch = false;
    for (int k = 0; k <= w.order; ++k) {
      (w.idx[k] <= tc_index ? has_shared : has_branch) = true;
    }
    if (has_shared && has_branch) {
      layout.bridge_residuals.emplace_back(w.idx.begin(), w.idx.begin() + w.order + 1);
    }
  }
  return layout;
}

// ---------------------------------------------------------------------------
// Cost assembly
// ---------------------------------------------------------------------------

/// Collision term on one parameter against one prediction sample.
struct CollisionTerm {
  int param = 0;
  ConflictSide side = ConflictSide::Behind;
  TruncatedNormal distribution{0.0, 1.0, -1.0, 1.0};
  double weight = 0.0;
};

/// Prediction an ego branch is costed against.
struct BranchConflict {
  const GaussianTrajectory* other = nullptr;
  ConflictSide side = ConflictSide::Behind;
  double weight_scale = 1.0;
};

struct Evaluation {
  double total = 0.0;
  TermCosts per_term;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;  // Gauss-Newton style, positive semidefinite
};

/// Residual-sum objective over a flat parameter array.
class CostProblem {
 public:
  CostProblem(int num_params, double dt, ResidualWeights weights)
      : num_params_(num_params), dt_(dt), weights_(weights) {
    if (!(dt > 0.0)) throw DomainError("CostProblem: dt must be positive");
  }

  int num_params() const { return num_params_; }
  double dt() const { return dt_; }
  const ResidualWeights& weights() const { return weights_; }
  const std::vector<DifferenceWindow>& windows() const { return windows_; }
  const std::vector<CollisionTerm>& collisions() const { return collisions_; }

  void add_window(const DifferenceWindow& w) { windows_.push_back(w); }
  void add_windows(const std::vector<DifferenceWindow>& ws) {
    windows_.insert(windows_.end(), ws.begin(), ws.end());
  }

  /// Collision terms for every support point of `traj` that has an aligned
  /// prediction sample.
  void add_branch_conflict(std::span<const int> traj, const BranchConflict& conflict) {
    if (!conflict.other || weights_.w_coll * conflict.weight_scale == 0.0) return;
    for (int i = 0; i < static_cast<int>(traj.size()); ++i) {
      const long j = aligned_sample(*conflict.other, i);
      if (j < 0) continue;
      collisions_.push_back({traj[i], conflict.side, sample_distribution(*conflict.other, j),
                             weights_.w_coll * conflict.weight_scale});
    }
  }

  void set_geometry(const ConflictGeometry& geo) { geometry_ = geo; }
  const ConflictGeometry& geometry() const { return geometry_; }

  Evaluation evaluate(const Eigen::VectorXd& x, bool derivatives = true) const {
    if (x.size() != num_params_) throw DomainError("CostProblem: parameter length mismatch");
    Evaluation ev;
    ev.per_term = empty_term_costs();
    if (derivatives) {
      ev.gradient = Eigen::VectorXd::Zero(num_params_);
      ev.hessian = Eigen::MatrixXd::Zero(num_params_, num_params_);
    }
    for (const auto& w : windows_) {
      const WindowWeights ww = window_weights(weights_, w.order);
      const double scale = std::pow(dt_, -w.order);
      const auto& stencil = kDifferenceStencils[w.order - 1];
      double y = 0.0;
      for (int k = 0; k <= w.order; ++k) y += stencil[k] * scale * x[w.idx[k]];
      // d(cost)/dy and d2(cost)/dy2 of the value + range residual pair.
      double dc = 2.0 * ww.w_value * (y - ww.target);
      double d2c = 2.0 * ww.w_value;
      ev.per_term[ww.value_name] += value_residual(y, ww.target, ww.w_value);
      const double rr = range_residual(y, ww.range.lo, ww.range.hi, ww.w_range);
      ev.per_term[ww.range_name] += rr;
      if (y < ww.range.lo || y > ww.range.hi) {
        const double bound = y < ww.range.lo ? ww.range.lo : ww.range.hi;
        dc += 2.0 * ww.w_range * (y - bound);
        d2c += 2.0 * ww.w_range;
      }
      if (!derivatives) continue;
      for (int k = 0; k <= w.order; ++k) {
        const double ck = stencil[k] * scale;
        ev.gradient[w.idx[k]] += dc * ck;
        for (int l = 0; l <= w.order; ++l) {
          ev.hessian(w.idx[k], w.idx[l]) += d2c * ck * stencil[l] * scale;
        }
      }
    }
    for (const auto& c : collisions_) {
      const ConflictValue cv = conflict_probability(c.distribution, x[c.param], c.side, geometry_);
      ev.per_term[term::kCollision] += c.weight * cv.p;
      if (!derivatives) continue;
      ev.gradient[c.param] += c.weight * cv.dp;
      ev.hessian(c.param, c.param) += c.weight * std::max(cv.d2p, 0.0);
    }
    ev.total = sum_of(ev.per_term);
    return ev;
  }

  double cost(const Eigen::VectorXd& x) const { return evaluate(x, false).total; }

 private:
  int num_params_;
  double dt_;
  ResidualWeights weights_;
  ConflictGeometry geometry_;
  std::vector<DifferenceWindow> windows_;
  std::vector<CollisionTerm> collisions_;
};

inline std::vector<int> iota_indices(int n) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

/// Single N-point trajectory, optionally costed against one prediction.
inline CostProblem assemble_straight(int N, double dt, const ResidualWeights& weights,
                                     const std::vector<BranchConflict>& conflicts = {},
                                     const ConflictGeometry& geo = {}) {
  if (N < 4) throw DomainError("assemble_straight: N must be at least 4");
  CostProblem problem(N, dt, weights);
  problem.set_geometry(geo);
  const auto traj = iota_indices(N);
  problem.add_windows(trajectory_windows(traj));
  for (const auto& c : conflicts) problem.add_branch_conflict(traj, c);
  return problem;
}

/// Both branches in the shared-prefix layout. Windows lying entirely inside
/// the shared part are added once.
inline CostProblem assemble_combinatorial(const CombinatorialLayout& layout, double dt,
                                          const ResidualWeights& weights,
                                          const BranchConflict& lead_conflict,
                                          const BranchConflict& yield_conflict,
                                          const ConflictGeometry& geo) {
  CostProblem problem(layout.total_params(), dt, weights);
  problem.set_geometry(geo);
  const auto lead = layout.lead_trajectory();
  const auto yield = layout.yield_trajectory();
  problem.add_windows(trajectory_windows(lead));
  for (const auto& w : trajectory_windows(yield)) {
    bool shared_only = true;
    for (int k = 0; k <= w.order; ++k) shared_only = shared_only && w.idx[k] <= layout.tc_index;
    if (!shared_only) problem.add_window(w);
  }
  problem.add_branch_conflict(lead, lead_conflict);
  problem.add_branch_conflict(yield, yield_conflict);
  return problem;
}

// ---------------------------------------------------------------------------
// Minimizer
// ---------------------------------------------------------------------------

struct MinimizeOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
  double step_tolerance = 1e-12;
  double function_tolerance = 1e-15;
};

struct OptimizationResult {
  Eigen::VectorXd params;
  double total_cost = 0.0;
  TermCosts per_term_costs;
  bool converged = false;
  int iterations = 0;
  std::vector<double> cost_history;  // cost after each accepted iteration
};

/// Damped Newton (Levenberg-Marquardt) descent on the residual sum. Entries
/// with `fixed[i]` set are held at their initial value. Only steps that
/// decrease the cost are accepted.
inline OptimizationResult minimize(const CostProblem& problem, Eigen::VectorXd x,
                                   const std::vector<bool>& fixed,
                                   const MinimizeOptions& opt = {}) {
  const int n = problem.num_params();
  if (x.size() != n || static_cast<int>(fixed.size()) != n) {
    throw DomainError("minimize: parameter/mask length mismatch");
  }
  if (!x.allFinite()) throw NumericalError("minimize: non-finite initial parameters");
  std::vector<int> free;
  for (int i = 0; i < n; ++i) {
    if (!fixed[i]) free.push_back(i);
  }
  const int m = static_cast<int>(free.size());

  OptimizationResult res;
  Evaluation ev = problem.evaluate(x);
  if (!std::isfinite(ev.total)) throw NumericalError("minimize: non-finite initial cost");
  res.cost_history.push_back(ev.total);
  double lambda = 1e-6;
  Eigen::VectorXd g(m);
  Eigen::MatrixXd H(m, m);

  for (res.iterations = 0; res.iterations < opt.max_iterations;) {
    for (int a = 0; a < m; ++a) {
      g[a] = ev.gradient[free[a]];
      for (int b = 0; b < m; ++b) H(a, b) = ev.hessian(free[a], free[b]);
    }
    if (m == 0 || g.lpNorm<Eigen::Infinity>() < opt.gradient_tolerance) {
      res.converged = true;
      break;
    }
    bool accepted = false;
    bool stalled = false;
    bool no_descent = false;
    while (!accepted) {
      Eigen::MatrixXd A = H;
      for (int a = 0; a < m; ++a) A(a, a) += lambda * std::max(H(a, a), 1e-9) + 1e-12;
      const Eigen::VectorXd step = A.ldlt().solve(-g);
      if (!step.allFinite()) throw NumericalError("minimize: non-finite step");
      Eigen::VectorXd trial = x;
      for (int a = 0; a < m; ++a) trial[free[a]] += step[a];
      const double trial_cost = problem.cost(trial);
      if (!std::isfinite(trial_cost)) {
        throw NumericalError("minimize: non-finite cost at iteration " +
                             std::to_string(res.iterations));
      }
      if (trial_cost < ev.total) {
        const double decrease = ev.total - trial_cost;
        const double step_norm = step.lpNorm<Eigen::Infinity>();
        x = trial;
        ev = problem.evaluate(x);
        res.cost_history.push_back(ev.total);
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
        if (step_norm < opt.step_tolerance * (1.0 + x.lpNorm<Eigen::Infinity>()) ||
            decrease < opt.function_tolerance * (1.0 + std::abs(ev.total))) {
          stalled = true;
        }
      } else {
        lambda *= 4.0;
        if (lambda > 1e16) {
          no_descent = true;
          break;
        }
      }
    }
    if (accepted) ++res.iterations;
    if (stalled) {
      res.converged = true;
      break;
    }
    if (no_descent) {
      // No decreasing step exists at machine precision; accept a gradient
      // that is small relative to the cost scale.
      res.converged = g.lpNorm<Eigen::Infinity>() <= 1e-6 * (1.0 + std::abs(ev.total));
      break;
    }
  }
  res.params = x;
  res.total_cost = ev.total;
  res.per_term_costs = ev.per_term;
  return res;
}

}  // namespace mnp

#endif  // MNP_OPTIMIZER_HPP
