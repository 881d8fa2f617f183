// Copyright 2026 The prefdrive Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefdrive/error.hpp"

namespace prefdrive {

inline constexpr double kDegToRad = std::numbers::pi / 180.0;
inline constexpr double kKphToMps = 1.0 / 3.6;

enum class Maneuver { LLC, RLC, LK };
enum class Size { Small, Big };
enum class SpeedRelation { Slower, Faster };
enum class LaneRelation { LL, EL, RL };
enum class RelativePosition { Rear, Front };

/// The five surrounding vehicles that can influence the ego car.
enum class Role { RLAC, LLAC, RLLC, LLLC, ELLC };
inline constexpr std::array<Role, 5> kAllRoles = {Role::RLAC, Role::LLAC, Role::RLLC,
                                                  Role::LLLC, Role::ELLC};

constexpr std::string_view to_string(Maneuver m) {
  switch (m) {
    case Maneuver::LLC: return "LLC";
    case Maneuver::RLC: return "RLC";
    case Maneuver::LK: return "LK";
  }
  return "?";
}
constexpr std::string_view to_string(Size s) { return s == Size::Small ? "small" : "big"; }
constexpr std::string_view to_string(SpeedRelation f) {
  return f == SpeedRelation::Slower ? "slower" : "faster";
}
constexpr std::string_view to_string(LaneRelation l) {
  switch (l) {
    case LaneRelation::LL: return "LL";
    case LaneRelation::EL: return "EL";
    case LaneRelation::RL: return "RL";
  }
  return "?";
}
constexpr std::string_view to_string(RelativePosition r) {
  return r == RelativePosition::Rear ? "rear" : "front";
}
constexpr std::string_view to_string(Role r) {
  switch (r) {
    case Role::RLAC: return "RLAC";
    case Role::LLAC: return "LLAC";
    case Role::RLLC: return "RLLC";
    case Role::LLLC: return "LLLC";
    case Role::ELLC: return "ELLC";
  }
  return "?";
}

// Parsers throw ParseError on unknown names.
inline Maneuver parse_maneuver(std::string_view s) {
  if (s == "LLC") return Maneuver::LLC;
  if (s == "RLC") return Maneuver::RLC;
  if (s == "LK") return Maneuver::LK;
  throw ParseError("unknown maneuver '" + std::string(s) + "'");
}
inline Size parse_size(std::string_view s) {
  if (s == "small") return Size::Small;
  if (s == "big") return Size::Big;
  throw ParseError("unknown size '" + std::string(s) + "'");
}
inline SpeedRelation parse_speed_relation(std::string_view s) {
  if (s == "slower") return SpeedRelation::Slower;
  if (s == "faster") return SpeedRelation::Faster;
  throw ParseError("unknown speed relation '" + std::string(s) + "'");
}
inline LaneRelation parse_lane_relation(std::string_view s) {
  if (s == "LL") return LaneRelation::LL;
  if (s == "EL") return LaneRelation::EL;
  if (s == "RL") return LaneRelation::RL;
  throw ParseError("unknown lane '" + std::string(s) + "'");
}
inline RelativePosition parse_relative_position(std::string_view s) {
  if (s == "rear") return RelativePosition::Rear;
  if (s == "front") return RelativePosition::Front;
  throw ParseError("unknown relative position '" + std::string(s) + "'");
}
inline Role parse_role(std::string_view s) {
  for (Role r : kAllRoles) {
    if (to_string(r) == s) return r;
  }
  throw ParseError("unknown target role '" + std::string(s) + "'");
}

/// Lane the role lives in, relative to the ego lane.
constexpr LaneRelation lane_of(Role r) {
  switch (r) {
    case Role::RLAC:
    case Role::RLLC: return LaneRelation::RL;
    case Role::LLAC:
    case Role::LLLC: return LaneRelation::LL;
    case Role::ELLC: return LaneRelation::EL;
  }
  return LaneRelation::EL;
}

/// Leading cars are ahead of the ego, adjacent cars behind it.
constexpr bool is_leading(Role r) {
  return r == Role::RLLC || r == Role::LLLC || r == Role::ELLC;
}

constexpr int lane_offset(LaneRelation l) {
  switch (l) {
    case LaneRelation::LL: return -1;
    case LaneRelation::EL: return 0;
    case LaneRelation::RL: return 1;
  }
  return 0;
}

/// Straight multi-lane road. Lane 0 is the leftmost lane; the lateral axis
/// points left, so lane centers decrease with the lane index and the road
/// occupies y in [0, lane_count * lane_width].
struct RoadModel {
  int lane_count = 2;
  double lane_width = 3.5;

  [[nodiscard]] double lane_center(int lane) const {
    return (static_cast<double>(lane_count - lane) - 0.5) * lane_width;
  }
  [[nodiscard]] bool has_lane(int lane) const { return lane >= 0 && lane < lane_count; }
  [[nodiscard]] double width() const { return lane_count * lane_width; }

  /// Index of the lane whose center is nearest to y (clamped to the road).
  [[nodiscard]] int nearest_lane(double y) const {
    const double from_left = (width() - y) / lane_width;
    int lane = static_cast<int>(std::floor(from_left));
    if (lane < 0) lane = 0;
    if (lane >= lane_count) lane = lane_count - 1;
    return lane;
  }

  void validate() const {
    if (lane_count < 1) throw InvalidScene("road needs at least one lane");
    if (!(lane_width > 0.0)) throw InvalidScene("lane width must be positive");
  }
};

struct VehicleState {
  double x = 0.0;    // longitudinal [m]
  double y = 0.0;    // lateral [m]
  double v = 0.0;    // speed [m/s]
  double psi = 0.0;  // heading relative to the road axis [rad]
  double length = 4.5;
  double width = 2.0;

  [[nodiscard]] double front() const { return x + 0.5 * length; }
  [[nodiscard]] double rear() const { return x - 0.5 * length; }
};

/// Axis-aligned rectangle in road coordinates.
struct Box {
  double x_lo, x_hi, y_lo, y_hi;

  /// True when the open interiors overlap.
  [[nodiscard]] bool overlaps(const Box& o) const {
    return x_lo < o.x_hi && o.x_lo < x_hi && y_lo < o.y_hi && o.y_lo < y_hi;
  }
  [[nodiscard]] bool contains_strictly(double x, double y) const {
    return x > x_lo && x < x_hi && y > y_lo && y < y_hi;
  }
};

inline Box footprint(const VehicleState& s, double grow_x = 0.0, double grow_y = 0.0) {
  return {s.x - 0.5 * s.length - grow_x, s.x + 0.5 * s.length + grow_x,
          s.y - 0.5 * s.width - grow_y, s.y + 0.5 * s.width + grow_y};
}

struct Scene {
  VehicleState ego;
  std::array<std::optional<VehicleState>, 5> targets{};
  RoadModel road;

  [[nodiscard]] const std::optional<VehicleState>& target(Role r) const {
    return targets[static_cast<std::size_t>(r)];
  }
  std::optional<VehicleState>& target(Role r) { return targets[static_cast<std::size_t>(r)]; }
  [[nodiscard]] bool has(Role r) const { return target(r).has_value(); }
  [[nodiscard]] int ego_lane() const { return road.nearest_lane(ego.y); }
};

struct Attributes {
  Maneuver t_m = Maneuver::LK;
  Size b = Size::Small;
  SpeedRelation f = SpeedRelation::Slower;
  LaneRelation l = LaneRelation::EL;
  RelativePosition r = RelativePosition::Rear;

  friend bool operator==(const Attributes&, const Attributes&) = default;
};

inline constexpr double kManeuverThreshold = 8.0 * kDegToRad;
inline constexpr double kBigVehicleLength = 7.0;

inline Maneuver classify_maneuver(double psi) {
  if (psi >= kManeuverThreshold) return Maneuver::LLC;
  if (psi <= -kManeuverThreshold) return Maneuver::RLC;
  return Maneuver::LK;
}

inline Size classify_size(double length) {
  return length >= kBigVehicleLength ? Size::Big : Size::Small;
}

/// Lane of `target` relative to the ego lane; throws LaneOutOfRange when the
/// target is more than one lane away.
inline LaneRelation relative_lane(const VehicleState& target, const VehicleState& ego,
                                  const RoadModel& road) {
  const int d = road.nearest_lane(target.y) - road.nearest_lane(ego.y);
  switch (d) {
    case -1: return LaneRelation::LL;
    case 0: return LaneRelation::EL;
    case 1: return LaneRelation::RL;
    default: throw LaneOutOfRange("target is " + std::to_string(d) + " lanes from the ego lane");
  }
}

// Ties resolve to slower (equal speeds) and rear (equal x).
inline Attributes classify_attributes(const VehicleState& target, const VehicleState& ego,
                                      const RoadModel& road) {
  Attributes a;
  a.t_m = classify_maneuver(target.psi);
  a.b = classify_size(target.length);
  a.f = ego.v > target.v ? SpeedRelation::Faster : SpeedRelation::Slower;
  a.l = relative_lane(target, ego, road);
  a.r = target.x > ego.x ? RelativePosition::Front : RelativePosition::Rear;
  return a;
}

/// Constant-velocity prediction with at most one lane change. A target
/// classified LLC/RLC moves laterally with its observed heading until it
/// reaches the next lane center in that direction, then keeps that lane.
inline std::vector<VehicleState> predict_trajectory(const VehicleState& target,
                                                    const RoadModel& road, int steps,
                                                    double dt) {
  std::vector<VehicleState> out;
  out.reserve(static_cast<std::size_t>(steps) + 1);
  VehicleState s = target;
  out.push_back(s);

  const Maneuver m = classify_maneuver(target.psi);
  bool changing = m != Maneuver::LK;
  double destination = s.y;
  if (changing) {
    // First lane center strictly beyond the current position in the
    // direction of travel.
    const int lane = road.nearest_lane(s.y);
    const int step = m == Maneuver::LLC ? -1 : 1;
    const double eps = 1e-9;
    int cand = lane;
    const bool beyond = m == Maneuver::LLC ? road.lane_center(lane) > s.y + eps
                                           : road.lane_center(lane) < s.y - eps;
    if (!beyond) cand = lane + step;
    if (road.has_lane(cand)) {
      destination = road.lane_center(cand);
    } else {
      changing = false;
    }
  }
  for (int k = 0; k < steps; ++k) {
    s.x += s.v * std::cos(s.psi) * dt;
    if (changing) {
      s.y += s.v * std::sin(s.psi) * dt;
      const bool reached = s.psi > 0.0 ? s.y >= destination : s.y <= destination;
      if (reached) {
        s.y = destination;
        s.psi = 0.0;
        changing = false;
      }
    }
    out.push_back(s);
  }
  return out;
}

inline VehicleState predict_target(const VehicleState& target, const RoadModel& road, int k,
                                   double dt) {
  return predict_trajectory(target, road, k, dt).back();
}

/// Builds the five-role scene around the ego: the closest vehicle ahead in
/// each lane and the closest vehicle behind in each adjacent lane. Vehicles
/// further than one lane away, and vehicles behind in the ego lane, are not
/// targets.
inline Scene assign_roles(const VehicleState& ego, std::span<const VehicleState> vehicles,
                          const RoadModel& road) {
  Scene scene;
  scene.ego = ego;
  scene.road = road;
  const int ego_lane = road.nearest_lane(ego.y);
  auto consider = [&](Role role, const VehicleState& v) {
    auto& slot = scene.target(role);
    if (!slot) {
      slot = v;
      return;
    }
    if (is_leading(role) ? v.x < slot->x : v.x > slot->x) slot = v;
  };
  for (const auto& v : vehicles) {
    const int d = road.nearest_lane(v.y) - ego_lane;
    const bool ahead = v.x > ego.x;
    if (d == 0) {
      if (ahead) consider(Role::ELLC, v);
    } else if (d == 1) {
      consider(ahead ? Role::RLLC : Role::RLAC, v);
    } else if (d == -1) {
      consider(ahead ? Role::LLLC : Role::LLAC, v);
    }
  }
  return scene;
}

/// Checks the role/lane/position consistency of a scene.
inline void validate_scene(const Scene& scene) {
  scene.road.validate();
  auto check_vehicle = [](const VehicleState& v, std::string_view what) {
    if (!(v.length > 0.0) || !(v.width > 0.0)) {
      throw InvalidScene(std::string(what) + ": vehicle dimensions must be positive");
    }
    if (!(v.v >= 0.0) || !std::isfinite(v.x) || !std::isfinite(v.y)) {
      throw InvalidScene(std::string(what) + ": invalid kinematic state");
    }
    if (std::abs(v.psi) > 0.5 * std::numbers::pi) {
      throw InvalidScene(std::string(what) + ": heading out of range");
    }
  };
  check_vehicle(scene.ego, "ego");
  if (scene.ego.y < 0.0 || scene.ego.y > scene.road.width()) {
    throw InvalidScene("ego is off the road");
  }
  for (Role r : kAllRoles) {
    const auto& t = scene.target(r);
    if (!t) continue;
    check_vehicle(*t, to_string(r));
    LaneRelation l;
    try {
      l = relative_lane(*t, scene.ego, scene.road);
    } catch (const LaneOutOfRange&) {
      throw InvalidScene(std::string(to_string(r)) + " is not adjacent to the ego lane");
    }
    if (l != lane_of(r)) {
      throw InvalidScene(std::string(to_string(r)) + " is in lane " +
                         std::string(to_string(l)));
    }
    const bool ahead = t->x > scene.ego.x;
    if (ahead != is_leading(r)) {
      throw InvalidScene(std::string(to_string(r)) + " is on the wrong side of the ego");
    }
  }
}

}  // namespace prefdrive
