#ifndef MNP_MANEUVER_HPP
#define MNP_MANEUVER_HPP

#include <array>
#include <numbers>
#include <cstddef>
#include <string_view>

namespace mnp {

/// Maneuver of the other vehicle at the merge.
enum class Maneuver { Drive = 0, Yield = 1 };

inline constexpr std::array<Maneuver, 2> kManeuvers = {Maneuver::Drive,
                                                       Maneuver::Yield};

inline constexpr std::size_t index_of(Maneuver m) {
  return static_cast<std::size_t>(m);
}

inline constexpr std::string_view to_string(Maneuver m) {
  return m == Maneuver::Drive ? "drive" : "yield";
}

/// Probability per maneuver plus the entropy of that distribution (nats).
struct ManeuverBelief {
  std::array<double, 2> probabilities{0.5, 0.5};
  double entropy = std::numbers::ln2;

  double p(Maneuver m) const { return probabilities[index_of(m)]; }
};

}  // namespace mnp

#endif  // MNP_MANEUVER_HPP
