#ifndef MNP_WORLD_HPP
#define MNP_WORLD_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "mnp/error.hpp"
#include "mnp/gaussian_trajectory.hpp"

namespace mnp {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;  // rad, counter-clockwise from +x
};

/// Polyline lane centerline with precomputed arclength.
class RoutePath {
 public:
  RoutePath() = default;

  RoutePath(std::string id, std::vector<Point2> centerline)
      : id_(std::move(id)), centerline_(std::move(centerline)) {
    if (centerline_.size() < 2) {
      throw DomainError("RoutePath '" + id_ + "': needs at least two points");
    }
    arclength_.reserve(centerline_.size());
    arclength_.push_back(0.0);
    for (std::size_t i = 1; i < centerline_.size(); ++i) {
      const double seg = std::hypot(centerline_[i].x - centerline_[i - 1].x,
                                    centerline_[i].y - centerline_[i - 1].y);
      if (!(seg > 0.0)) {
        throw DomainError("RoutePath '" + id_ + "': coincident consecutive points");
      }
      arclength_.push_back(arclength_.back() + seg);
    }
  }

  const std::string& id() const { return id_; }
  const std::vector<Point2>& centerline() const { return centerline_; }
  const std::vector<double>& cumulative_arclength() const { return arclength_; }
  double length() const { return arclength_.empty() ? 0.0 : arclength_.back(); }

 private:
  std::string id_;
  std::vector<Point2> centerline_;
  std::vector<double> arclength_;
};

/// Where two routes join: arclength of the merge begin on each route.
struct MergeGeometry {
  std::string route_a;
  std::string route_b;
  double s_merge_a = 0.0;
  double s_merge_b = 0.0;

  /// Offset that maps a route_b arclength into the route_a coordinate.
  double b_to_a_offset() const { return s_merge_a - s_merge_b; }
};

struct VehicleState {
  std::string route;
  double s = 0.0;
  double v = 0.0;
  double a = 0.0;
  double t = 0.0;
  Pose2 pose;
};

struct FieldOfView {
  double angular_extent_deg = 210.0;
  double range = 40.0;

  void validate() const {
    if (!(angular_extent_deg > 0.0 && angular_extent_deg <= 360.0)) {
      throw DomainError("FieldOfView: angular extent must be in (0, 360]");
    }
    if (!(range > 0.0)) throw DomainError("FieldOfView: range must be positive");
  }
};

/// Interpolated pose at arclength `s`. At a vertex the heading is that of the
/// following segment.
inline Pose2 project(const RoutePath& route, double s) {
  const auto& arc = route.cumulative_arclength();
  const auto& pts = route.centerline();
  if (pts.size() < 2) throw DomainError("project: empty route");
  const double eps = 1e-9 * std::max(1.0, route.length());
  if (s < -eps || s > route.length() + eps) {
    throw DomainError("project: s outside route '" + route.id() + "'");
  }
  s = std::clamp(s, 0.0, route.length());
  // First segment whose end lies strictly beyond s; the last segment owns s == length.
  auto it = std::upper_bound(arc.begin(), arc.end(), s);
  std::size_t seg = static_cast<std::size_t>(std::distance(arc.begin(), it));
  seg = std::clamp<std::size_t>(seg, 1, pts.size() - 1) - 1;
  const Point2& p0 = pts[seg];
  const Point2& p1 = pts[seg + 1];
  const double len = arc[seg + 1] - arc[seg];
  const double u = (s - arc[seg]) / len;
  return {p0.x + u * (p1.x - p0.x), p0.y + u * (p1.y - p0.y),
          std::atan2(p1.y - p0.y, p1.x - p0.x)};
}

/// Attach the 2-D pose implied by (route, s).
inline VehicleState with_pose(VehicleState state, const RoutePath& route) {
  state.pose = project(route, state.s);
  return state;
}

/// Directed visibility: within range and within half the angular extent of
/// the observer heading.
inline bool in_field_of_view(const VehicleState& observer, const FieldOfView& fov,
                             const VehicleState& target) {
  const double dx = target.pose.x - observer.pose.x;
  const double dy = target.pose.y - observer.pose.y;
  const double dist = std::hypot(dx, dy);
  if (dist > fov.range) return false;
  if (dist == 0.0) return true;
  double bearing = std::atan2(dy, dx) - observer.pose.heading;
  bearing = std::remainder(bearing, 2.0 * std::numbers::pi);
  const double half = 0.5 * fov.angular_extent_deg * std::numbers::pi / 180.0;
  return std::abs(bearing) <= half + 1e-12;
}

/// Earliest time the mean position reaches `s_merge`, linearly interpolated
/// between samples; the last sample time when it is never reached.
inline double time_to_merge_mean(const GaussianTrajectory& traj, double s_merge) {
  if (traj.empty()) throw DomainError("time_to_merge_mean: empty trajectory");
  if (traj.mu.front() >= s_merge) return traj.time_of(0);
  for (std::size_t j = 1; j < traj.size(); ++j) {
    const double m0 = traj.mu[j - 1];
    const double m1 = traj.mu[j];
    if (m1 >= s_merge) {
      const double u = (m1 > m0) ? (s_merge - m0) / (m1 - m0) : 1.0;
      return traj.time_of(j - 1) + u * traj.dt;
    }
  }
  return traj.time_of(traj.size() - 1);
}

}  // namespace mnp

#endif  // MNP_WORLD_HPP
