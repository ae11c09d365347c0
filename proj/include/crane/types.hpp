#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace crane {

/// Velocity, acceleration and jerk bounds of one drive.
struct KinematicLimits {
  double v_max = 0.0;  // [m/s]
  double a_max = 0.0;  // [m/s^2]
  double j_max = 0.0;  // [m/s^3]

  bool valid() const {
    return std::isfinite(v_max) && std::isfinite(a_max) && std::isfinite(j_max) &&
           v_max > 0.0 && a_max > 0.0 && j_max > 0.0;
  }
  void validate() const {
    if (!valid()) throw std::domain_error("kinematic limits must be finite and strictly positive");
  }
};

enum class VerticalDirection { Up, Down };
enum class HorizontalDirection { Right, Left };
enum class Axis { X, Y };

/// One commanded movement of the crane: horizontal and vertical distance,
/// directions, and the payload carried.
struct TravelSpec {
  double s_x = 0.0;  // [m] >= 0
  double s_y = 0.0;  // [m] >= 0
  VerticalDirection vertical_direction = VerticalDirection::Up;
  HorizontalDirection horizontal_direction = HorizontalDirection::Right;
  double load_mass = 0.0;  // [kg] >= 0

  void validate() const {
    if (!(s_x >= 0.0) || !(s_y >= 0.0) || !std::isfinite(s_x) || !std::isfinite(s_y))
      throw std::domain_error("travel distances must be finite and nonnegative");
    if (s_x == 0.0 && s_y == 0.0)
      throw std::domain_error("travel must move at least one axis");
    if (!(load_mass >= 0.0) || !std::isfinite(load_mass))
      throw std::domain_error("load mass must be finite and nonnegative");
  }
};

// Distances below this are treated as "drive stays idle".
inline constexpr double kIdleDistance = 1e-6;  // [m]

struct InfeasiblePlanError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularElError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ElDivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace crane
