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

// Scene documents: {road:{lanes,width}, ego:{...}, targets:{ROLE:{...}}}.
// `width` is the lane width; vehicle length/width default to a car.

#include <istream>
#include <optional>
#include <string>

#include <json.hpp>

#include "prefdrive/error.hpp"
#include "prefdrive/questionnaire.hpp"
#include "prefdrive/scenario.hpp"

namespace prefdrive {

namespace detail {

inline double number_field(const nlohmann::json& obj, const char* name, const std::string& where,
                           std::optional<double> fallback = std::nullopt) {
  if (!obj.contains(name)) {
    if (fallback) return *fallback;
    throw ParseError(where + ": missing field '" + name + "'");
  }
  const auto& v = obj[name];
  if (!v.is_number()) throw ParseError(where + ": field '" + name + "' must be a number");
  return v.get<double>();
}

inline VehicleState vehicle_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ParseError(where + " must be an object");
  VehicleState v;
  v.x = number_field(j, "x", where);
  v.y = number_field(j, "y", where);
  v.v = number_field(j, "v", where);
  v.psi = number_field(j, "psi", where, 0.0);
  v.length = number_field(j, "length", where, v.length);
  v.width = number_field(j, "width", where, v.width);
  return v;
}

}  // namespace detail

inline nlohmann::json vehicle_to_json(const VehicleState& v) {
  return {{"x", v.x},     {"y", v.y},           {"v", v.v},
          {"psi", v.psi}, {"length", v.length}, {"width", v.width}};
}

inline nlohmann::json scene_to_json(const Scene& s) {
  nlohmann::json targets = nlohmann::json::object();
  for (Role r : kAllRoles) {
    if (s.has(r)) targets[std::string(to_string(r))] = vehicle_to_json(*s.target(r));
  }
  return {{"road", {{"lanes", s.road.lane_count}, {"width", s.road.lane_width}}},
          {"ego", vehicle_to_json(s.ego)},
          {"targets", std::move(targets)}};
}

/// Builds and validates a scene. Structural problems raise ParseError,
/// inconsistent geometry raises InvalidScene.
inline Scene scene_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("scene document must be an object");
  if (!doc.contains("road") || !doc["road"].is_object()) throw ParseError("missing 'road' object");
  if (!doc.contains("ego")) throw ParseError("missing 'ego' object");
  Scene s;
  const auto& road = doc["road"];
  const double lanes = detail::number_field(road, "lanes", "road");
  if (lanes != static_cast<int>(lanes)) throw ParseError("road: 'lanes' must be an integer");
  s.road.lane_count = static_cast<int>(lanes);
  s.road.lane_width = detail::number_field(road, "width", "road", s.road.lane_width);
  s.ego = detail::vehicle_from_json(doc["ego"], "ego");
  if (doc.contains("targets")) {
    const auto& t = doc["targets"];
    if (!t.is_object()) throw ParseError("'targets' must be an object keyed by role");
    for (const auto& [name, v] : t.items()) {
      s.target(parse_role(name)) = detail::vehicle_from_json(v, name);
    }
  }
  validate_scene(s);
  return s;
}

inline Scene load_scene(std::istream& in) { return scene_from_json(parse_json_document(in)); }

}  // namespace prefdrive
