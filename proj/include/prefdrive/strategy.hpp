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

#include <algorithm>
#include <array>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "prefdrive/error.hpp"
#include "prefdrive/scenario.hpp"

namespace prefdrive {

/// Which side of a mentioned vehicle the ego must stay on. A rear bound keeps
/// the ego ahead of the vehicle ("ahead of X"), a front bound behind it.
enum class BoundKind { FrontBound, RearBound };

constexpr std::string_view to_string(BoundKind k) {
  return k == BoundKind::FrontBound ? "front_bound" : "rear_bound";
}

struct Mention {
  Role role;
  BoundKind bound;
  /// Fixed speed relation for "faster/slower than X" lane-keeping rows.
  std::optional<SpeedRelation> speed{};

  friend bool operator==(const Mention&, const Mention&) = default;
};

enum class SpeedLevel { Fast, Moderate, Slow, Stop };

constexpr std::string_view to_string(SpeedLevel s) {
  switch (s) {
    case SpeedLevel::Fast: return "v_f";
    case SpeedLevel::Moderate: return "v_m";
    case SpeedLevel::Slow: return "v_s";
    case SpeedLevel::Stop: return "0";
  }
  return "?";
}

struct SpeedConfig {
  double fast = 60.0 * kKphToMps;
  double moderate = 45.0 * kKphToMps;
  double slow = 30.0 * kKphToMps;

  [[nodiscard]] double of(SpeedLevel s) const {
    switch (s) {
      case SpeedLevel::Fast: return fast;
      case SpeedLevel::Moderate: return moderate;
      case SpeedLevel::Slow: return slow;
      case SpeedLevel::Stop: return 0.0;
    }
    return 0.0;
  }
};

struct Strategy {
  int id = 0;
  Maneuver ego_maneuver = Maneuver::LK;
  std::vector<Mention> mentioned;
  SpeedLevel speed_level = SpeedLevel::Stop;
  double v_des = 0.0;
  LaneRelation y_des_lane = LaneRelation::EL;
  std::string description;

  [[nodiscard]] bool mentions(Role r) const {
    return std::any_of(mentioned.begin(), mentioned.end(),
                       [r](const Mention& m) { return m.role == r; });
  }
  [[nodiscard]] const Mention* mention(Role r) const {
    for (const auto& m : mentioned) {
      if (m.role == r) return &m;
    }
    return nullptr;
  }
  [[nodiscard]] bool is_stop() const { return speed_level == SpeedLevel::Stop; }
};

inline constexpr int kStrategyCount = 32;
inline constexpr int kStopStrategyId = 32;

using StrategyCatalog = std::array<Strategy, kStrategyCount>;

namespace detail {

inline void add_lane_change_rows(std::vector<Strategy>& out, int first_id, Maneuver m) {
  const bool right = m == Maneuver::RLC;
  const Role lc = right ? Role::RLLC : Role::LLLC;
  const Role ac = right ? Role::RLAC : Role::LLAC;
  const LaneRelation lane = right ? LaneRelation::RL : LaneRelation::LL;
  const std::string mn(to_string(m));
  const std::string lcs(to_string(lc)), acs(to_string(ac));
  using BK = BoundKind;
  const std::vector<std::pair<std::vector<Mention>, std::string>> rows = {
      {{{lc, BK::RearBound}}, mn + " ahead of " + lcs},
      {{{ac, BK::RearBound}, {lc, BK::RearBound}}, mn + " ahead of " + acs + " and " + lcs},
      {{{ac, BK::RearBound}, {lc, BK::FrontBound}},
       mn + " ahead of " + acs + " and behind " + lcs},
      {{{lc, BK::FrontBound}}, mn + " behind " + lcs},
      {{{lc, BK::FrontBound}, {ac, BK::FrontBound}}, mn + " behind " + lcs + " and " + acs},
      {{{ac, BK::RearBound}}, mn + " ahead of " + acs},
      {{{ac, BK::FrontBound}}, mn + " behind " + acs},
  };
  int id = first_id;
  for (const auto& [mentions, text] : rows) {
    out.push_back({id++, m, mentions, SpeedLevel::Fast, 0.0, lane, text});
  }
  out.push_back({id++, m, {}, SpeedLevel::Fast, 0.0, lane,
                 mn + " without target vehicles at high speed"});
  out.push_back({id++, m, {}, SpeedLevel::Moderate, 0.0, lane,
                 mn + " without target vehicles at moderate speed"});
  out.push_back({id++, m, {}, SpeedLevel::Slow, 0.0, lane,
                 mn + " without target vehicles at slow speed"});
}

inline std::vector<Strategy> table_rows() {
  std::vector<Strategy> rows;
  rows.reserve(kStrategyCount);
  add_lane_change_rows(rows, 1, Maneuver::RLC);
  add_lane_change_rows(rows, 11, Maneuver::LLC);

  using BK = BoundKind;
  using SR = SpeedRelation;
  const auto lk = [&](int id, std::vector<Mention> m, SpeedLevel s, std::string text) {
    rows.push_back({id, Maneuver::LK, std::move(m), s, 0.0, LaneRelation::EL, std::move(text)});
  };
  const Role r = Role::RLLC, l = Role::LLLC;
  lk(21, {{r, BK::FrontBound, SR::Faster}, {l, BK::FrontBound, SR::Faster}}, SpeedLevel::Fast,
     "LK faster than RLLC and LLLC");
  lk(22, {{r, BK::FrontBound, SR::Faster}, {l, BK::FrontBound, SR::Slower}},
     SpeedLevel::Moderate, "LK faster than RLLC and slower than LLLC");
  lk(23, {{r, BK::FrontBound, SR::Slower}, {l, BK::FrontBound, SR::Faster}},
     SpeedLevel::Moderate, "LK faster than LLLC and slower than RLLC");
  lk(24, {{r, BK::FrontBound, SR::Slower}, {l, BK::FrontBound, SR::Slower}}, SpeedLevel::Slow,
     "LK slower than RLLC and LLLC");
  lk(25, {{r, BK::FrontBound, SR::Faster}}, SpeedLevel::Fast, "LK faster than RLLC");
  lk(26, {{r, BK::FrontBound, SR::Slower}}, SpeedLevel::Moderate, "LK slower than RLLC");
  lk(27, {{l, BK::FrontBound, SR::Faster}}, SpeedLevel::Fast, "LK faster than LLLC");
  lk(28, {{l, BK::FrontBound, SR::Slower}}, SpeedLevel::Moderate, "LK slower than LLLC");
  lk(29, {}, SpeedLevel::Fast, "LK without RLLC and LLLC at high speed");
  lk(30, {}, SpeedLevel::Moderate, "LK without RLLC and LLLC at moderate speed");
  lk(31, {}, SpeedLevel::Slow, "LK without RLLC and LLLC at slow speed");
  lk(32, {}, SpeedLevel::Stop, "LK stop");
  return rows;
}

}  // namespace detail

/// The 32 low-level strategies with desired speeds substituted from `speeds`.
inline StrategyCatalog catalog(const SpeedConfig& speeds = {}) {
  StrategyCatalog out;
  auto rows = detail::table_rows();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].v_des = speeds.of(rows[i].speed_level);
    out[i] = std::move(rows[i]);
  }
  return out;
}

inline const Strategy& strategy_by_id(const StrategyCatalog& cat, int id) {
  if (id < 1 || id > kStrategyCount) throw Error("no strategy with id " + std::to_string(id));
  return cat[static_cast<std::size_t>(id - 1)];
}

/// Roles whose presence decides whether a strategy applies.
inline std::vector<Role> concerned_roles(const Strategy& s) {
  switch (s.ego_maneuver) {
    case Maneuver::RLC: return {Role::RLLC, Role::RLAC};
    case Maneuver::LLC: return {Role::LLLC, Role::LLAC};
    case Maneuver::LK: return {Role::RLLC, Role::LLLC};
  }
  return {};
}

/// Lane index of the strategy's target lane, if it exists on the road.
inline std::optional<int> target_lane_index(const Strategy& s, const RoadModel& road,
                                            int ego_lane) {
  const int lane = ego_lane + lane_offset(s.y_des_lane);
  if (!road.has_lane(lane)) return std::nullopt;
  return lane;
}

/// A strategy applies when the vehicles present among its concerned roles are
/// exactly the ones it mentions and its lane change is geometrically possible.
/// "LK stop" always applies.
inline bool applicable(const Strategy& s, const Scene& scene) {
  if (!target_lane_index(s, scene.road, scene.ego_lane())) return false;
  if (s.id == kStopStrategyId) return true;
  for (Role r : concerned_roles(s)) {
    if (scene.has(r) != s.mentions(r)) return false;
  }
  return true;
}

inline std::vector<int> applicable_ids(const StrategyCatalog& cat, const Scene& scene) {
  std::vector<int> ids;
  for (const auto& s : cat) {
    if (applicable(s, scene)) ids.push_back(s.id);
  }
  return ids;
}

struct StrategyTargets {
  double v_des;
  double y_des;
};

inline StrategyTargets targets_of(const Strategy& s, const RoadModel& road, int ego_lane) {
  const auto lane = target_lane_index(s, road, ego_lane);
  if (!lane) {
    throw LaneOutOfRange("strategy " + std::to_string(s.id) + " needs lane " +
                         std::to_string(ego_lane + lane_offset(s.y_des_lane)));
  }
  return {s.v_des, road.lane_center(*lane)};
}

/// CSV rendering of the catalog, one row per strategy.
inline std::string catalog_csv(const StrategyCatalog& cat) {
  std::ostringstream os;
  os << "id,low_level_strategy,ego_maneuver,mentioned,v_des,v_des_mps,y_des\n";
  os.setf(std::ios::fixed);
  os.precision(4);
  for (const auto& s : cat) {
    os << s.id << ',' << '"' << s.description << '"' << ',' << to_string(s.ego_maneuver) << ',';
    for (std::size_t i = 0; i < s.mentioned.size(); ++i) {
      if (i) os << ';';
      os << to_string(s.mentioned[i].role) << ':' << to_string(s.mentioned[i].bound);
      if (s.mentioned[i].speed) os << ':' << to_string(*s.mentioned[i].speed);
    }
    os << ',' << to_string(s.speed_level) << ',' << s.v_des << ",f_c(" << to_string(s.y_des_lane)
       << ")\n";
  }
  return os.str();
}

}  // namespace prefdrive
