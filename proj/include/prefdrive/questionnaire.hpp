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
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "prefdrive/error.hpp"
#include "prefdrive/scenario.hpp"

namespace prefdrive {

/// One cell of the questionnaire: target maneuver, ego maneuver, and the
/// discretized relation of the target to the ego.
struct QuestionKey {
  Maneuver t_m = Maneuver::LK;
  Maneuver e_m = Maneuver::LK;
  Size b = Size::Small;
  SpeedRelation f = SpeedRelation::Slower;
  LaneRelation l = LaneRelation::EL;
  RelativePosition r = RelativePosition::Front;

  friend auto operator<=>(const QuestionKey&, const QuestionKey&) = default;

  /// Position in the fixed lexicographic enumeration, 0..215.
  [[nodiscard]] int index() const {
    int i = static_cast<int>(t_m);
    i = i * 3 + static_cast<int>(e_m);
    i = i * 2 + static_cast<int>(b);
    i = i * 2 + static_cast<int>(f);
    i = i * 3 + static_cast<int>(l);
    i = i * 2 + static_cast<int>(r);
    return i;
  }

  [[nodiscard]] std::string str() const {
    std::ostringstream os;
    os << '(' << to_string(t_m) << ',' << to_string(e_m) << ',' << to_string(b) << ','
       << to_string(f) << ',' << to_string(l) << ',' << to_string(r) << ')';
    return os.str();
  }
};

inline constexpr int kQuestionKeyCount = 3 * 3 * 2 * 2 * 3 * 2;

inline QuestionKey make_key(Maneuver ego_maneuver, const Attributes& a) {
  return {a.t_m, ego_maneuver, a.b, a.f, a.l, a.r};
}

/// A key is used when it describes one of the five target roles. There is no
/// target behind the ego in its own lane, so (EL, rear) cells are unused.
constexpr bool is_used(const QuestionKey& k) {
  return !(k.l == LaneRelation::EL && k.r == RelativePosition::Rear);
}

struct EnumeratedKey {
  QuestionKey key;
  bool used;
};

inline std::vector<EnumeratedKey> enumerate_keys() {
  std::vector<EnumeratedKey> out;
  out.reserve(kQuestionKeyCount);
  for (int tm = 0; tm < 3; ++tm)
    for (int em = 0; em < 3; ++em)
      for (int b = 0; b < 2; ++b)
        for (int f = 0; f < 2; ++f)
          for (int l = 0; l < 3; ++l)
            for (int r = 0; r < 2; ++r) {
              QuestionKey k{static_cast<Maneuver>(tm), static_cast<Maneuver>(em),
                            static_cast<Size>(b),      static_cast<SpeedRelation>(f),
                            static_cast<LaneRelation>(l), static_cast<RelativePosition>(r)};
              out.push_back({k, is_used(k)});
            }
  return out;
}

inline constexpr double kMarginBin = 5.0;

/// Snaps a clearance to the midpoint of its 5 m answer bin.
inline double quantize_margin(double meters) {
  if (!std::isfinite(meters) || meters < 0.0) {
    throw InvalidMargin("margin must be a finite non-negative number");
  }
  return std::floor(meters / kMarginBin) * kMarginBin + 0.5 * kMarginBin;
}

struct MarginAnswer {
  enum class Kind { Margin, DontCare };
  Kind kind = Kind::DontCare;
  std::optional<double> margin;

  static MarginAnswer dont_care() { return {}; }
  static MarginAnswer meters(double m) { return {Kind::Margin, quantize_margin(m)}; }

  [[nodiscard]] bool is_dont_care() const { return kind == Kind::DontCare; }
  friend bool operator==(const MarginAnswer&, const MarginAnswer&) = default;
};

class ResponseSet {
 public:
  ResponseSet() = default;
  ResponseSet(std::string profile, std::map<QuestionKey, MarginAnswer> answers)
      : profile_(std::move(profile)), answers_(std::move(answers)) {}

  [[nodiscard]] const std::string& profile_name() const { return profile_; }
  [[nodiscard]] const std::map<QuestionKey, MarginAnswer>& answers() const { return answers_; }

  [[nodiscard]] const MarginAnswer* find(const QuestionKey& k) const {
    auto it = answers_.find(k);
    return it == answers_.end() ? nullptr : &it->second;
  }

  /// Throws IncompleteResponse naming the first missing used key.
  void check_complete() const {
    for (const auto& [key, used] : enumerate_keys()) {
      if (used && !answers_.contains(key)) {
        throw IncompleteResponse("no answer for " + key.str());
      }
      if (!used && answers_.contains(key)) {
        throw UnusedKey("answer given for unused key " + key.str());
      }
    }
  }

  friend bool operator==(const ResponseSet&, const ResponseSet&) = default;

 private:
  std::string profile_;
  std::map<QuestionKey, MarginAnswer> answers_;
};

/// Margin in meters for a used key; "I don't care" maps to 0 m.
inline double lookup_margin(const ResponseSet& responses, const QuestionKey& key) {
  if (!is_used(key)) throw UnusedKey("key " + key.str() + " is structurally unused");
  const MarginAnswer* a = responses.find(key);
  if (a == nullptr) throw IncompleteResponse("no answer for " + key.str());
  return a->is_dont_care() ? 0.0 : *a->margin;
}

// --- serialization --------------------------------------------------------

inline nlohmann::json key_to_json(const QuestionKey& k) {
  return {{"t_m", to_string(k.t_m)}, {"e_m", to_string(k.e_m)}, {"b", to_string(k.b)},
          {"f", to_string(k.f)},     {"l", to_string(k.l)},     {"r", to_string(k.r)}};
}

inline QuestionKey key_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("question key must be an object");
  auto field = [&](const char* name) -> std::string {
    if (!j.contains(name) || !j.at(name).is_string()) {
      throw ParseError(std::string("question key lacks string field '") + name + "'");
    }
    return j.at(name).get<std::string>();
  };
  return {parse_maneuver(field("t_m")),       parse_maneuver(field("e_m")),
          parse_size(field("b")),             parse_speed_relation(field("f")),
          parse_lane_relation(field("l")),    parse_relative_position(field("r"))};
}

/// Serializes answers in enumeration order. `incomplete` marks a partially
/// filled questionnaire; such files are rejected by load_responses.
inline nlohmann::json responses_to_json(const ResponseSet& rs, bool incomplete = false) {
  nlohmann::json answers = nlohmann::json::array();
  for (const auto& [key, ans] : rs.answers()) {
    nlohmann::json a;
    a["key"] = key_to_json(key);
    if (ans.is_dont_care()) {
      a["margin_m"] = "dont_care";
    } else {
      a["margin_m"] = *ans.margin;
    }
    answers.push_back(std::move(a));
  }
  nlohmann::json doc{{"profile", rs.profile_name()}, {"answers", std::move(answers)}};
  if (incomplete) doc["incomplete"] = true;
  return doc;
}

inline std::string serialize_responses(const ResponseSet& rs, bool incomplete = false) {
  return responses_to_json(rs, incomplete).dump(2) + "\n";
}

/// Parses the answers without the completeness check (used to resume a
/// partially answered questionnaire).
inline ResponseSet parse_responses_partial(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("response document must be an object");
  std::string profile;
  if (doc.contains("profile")) {
    if (!doc["profile"].is_string()) throw ParseError("'profile' must be a string");
    profile = doc["profile"].get<std::string>();
  }
  if (!doc.contains("answers") || !doc["answers"].is_array()) {
    throw ParseError("response document lacks an 'answers' array");
  }
  std::map<QuestionKey, MarginAnswer> answers;
  for (const auto& a : doc["answers"]) {
    if (!a.is_object() || !a.contains("key") || !a.contains("margin_m")) {
      throw ParseError("each answer needs 'key' and 'margin_m'");
    }
    const QuestionKey key = key_from_json(a["key"]);
    if (!is_used(key)) throw UnusedKey("answer given for unused key " + key.str());
    const auto& m = a["margin_m"];
    MarginAnswer ans;
    if (m.is_string()) {
      if (m.get<std::string>() != "dont_care") {
        throw InvalidMargin("margin_m must be a number or \"dont_care\", got \"" +
                            m.get<std::string>() + "\"");
      }
      ans = MarginAnswer::dont_care();
    } else if (m.is_number()) {
      ans = MarginAnswer::meters(m.get<double>());
    } else {
      throw InvalidMargin("margin_m for " + key.str() + " is not a number");
    }
    if (!answers.emplace(key, ans).second) {
      throw ParseError("duplicate answer for " + key.str());
    }
  }
  return {std::move(profile), std::move(answers)};
}

inline nlohmann::json parse_json_document(std::istream& in) {
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what());
  }
}

inline ResponseSet load_responses(std::istream& in) {
  const nlohmann::json doc = parse_json_document(in);
  if (doc.is_object() && doc.value("incomplete", false)) {
    ResponseSet partial = parse_responses_partial(doc);
    partial.check_complete();
    throw IncompleteResponse("response file is marked incomplete");
  }
  ResponseSet rs = parse_responses_partial(doc);
  rs.check_complete();
  return rs;
}

inline ResponseSet load_responses(const std::string& text) {
  std::istringstream in(text);
  return load_responses(in);
}

/// Every used key answered "I don't care": planning with this set reduces
/// the preference corridor to pure collision avoidance.
inline ResponseSet collision_only_responses() {
  std::map<QuestionKey, MarginAnswer> answers;
  for (const auto& [key, used] : enumerate_keys()) {
    if (used) answers.emplace(key, MarginAnswer::dont_care());
  }
  return {"collision-only", std::move(answers)};
}

/// Bumper-to-bumper longitudinal clearance, clamped at zero.
inline double bumper_gap(const VehicleState& a, const VehicleState& b) {
  const double g = std::abs(a.x - b.x) - 0.5 * (a.length + b.length);
  return g > 0.0 ? g : 0.0;
}

/// Number of targets whose clearance to the ego is below the user's margin
/// for the target's current attributes. Zero means the scene is preferred.
inline int preference_violations(const Scene& scene, const ResponseSet& responses) {
  const Maneuver ego_m = classify_maneuver(scene.ego.psi);
  int count = 0;
  for (Role role : kAllRoles) {
    const auto& t = scene.target(role);
    if (!t) continue;
    Attributes a = classify_attributes(*t, scene.ego, scene.road);
    const QuestionKey key = make_key(ego_m, a);
    if (!is_used(key)) continue;
    if (bumper_gap(scene.ego, *t) < lookup_margin(responses, key)) ++count;
  }
  return count;
}

}  // namespace prefdrive
