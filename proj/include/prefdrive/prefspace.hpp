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
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "prefdrive/error.hpp"
#include "prefdrive/questionnaire.hpp"
#include "prefdrive/scenario.hpp"
#include "prefdrive/strategy.hpp"

namespace prefdrive {

struct AnchorPoint {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const AnchorPoint&, const AnchorPoint&) = default;
};

/// Rear and front anchor pairs in the ego lane (EL) and target lane (TL).
/// Anchors locate the ego *center*, so vehicle extents are already folded in.
struct Anchors {
  AnchorPoint r_el, r_tl, f_el, f_tl;

  friend bool operator==(const Anchors&, const Anchors&) = default;
};

struct SpaceConfig {
  double rear_default = -30.0;  // relative to ego x
  double front_default = 80.0;
  /// Extra longitudinal clearance on top of the vehicle half-lengths.
  double collision_buffer = 0.5;
  int horizon = 60;
  double dt = 0.05;
  /// Lane changes copy the target-lane rear anchor to the ego lane.
  bool rear_follows_target = true;
  /// Lateral ramp time of the reference path used by the collision-only space.
  double reference_change_time = 2.0;
};

/// a*x + b*y <= c with (a, b) of unit length.
struct HalfPlane {
  double a = 1.0, b = 0.0, c = 0.0;

  [[nodiscard]] double residual(double x, double y) const { return a * x + b * y - c; }
  friend bool operator==(const HalfPlane&, const HalfPlane&) = default;
};

struct StepSpace {
  Anchors anchors;
  HalfPlane rear, front;
  double y_min = 0.0, y_max = 0.0;
  bool nonempty = true;
  /// Extra per-target separating half-planes (collision-only baseline).
  std::vector<HalfPlane> obstacles;
};

struct PreferenceSpace {
  int strategy_id = 0;
  double y_el = 0.0, y_tl = 0.0;
  std::vector<StepSpace> steps;  // k = 0..N

  [[nodiscard]] int horizon() const { return static_cast<int>(steps.size()) - 1; }
};

/// Predicted states of every present role for k = 0..N.
using TargetTracks = std::array<std::vector<VehicleState>, kAllRoles.size()>;

inline TargetTracks predict_tracks(const Scene& scene, int steps, double dt) {
  TargetTracks tracks;
  for (Role r : kAllRoles) {
    if (const auto& t = scene.target(r)) {
      tracks[static_cast<std::size_t>(r)] = predict_trajectory(*t, scene.road, steps, dt);
    }
  }
  return tracks;
}

/// Target footprint grown by the ego's half extents plus the buffer: the set
/// of ego-center positions that would overlap the target.
inline Box inflated_box(const VehicleState& target, const VehicleState& ego,
                        double collision_buffer) {
  return footprint(target, 0.5 * ego.length + collision_buffer, 0.5 * ego.width);
}

/// True when the segment p-q passes through the open interior of `box`.
inline bool segment_hits_box(const AnchorPoint& p, const AnchorPoint& q, const Box& box) {
  const double dx = q.x - p.x, dy = q.y - p.y;
  double t0 = 0.0, t1 = 1.0;
  const double pk[4] = {-dx, dx, -dy, dy};
  const double qk[4] = {p.x - box.x_lo, box.x_hi - p.x, p.y - box.y_lo, box.y_hi - p.y};
  for (int i = 0; i < 4; ++i) {
    if (pk[i] == 0.0) {
      if (qk[i] < 0.0) return false;
      continue;
    }
    const double t = qk[i] / pk[i];
    if (pk[i] < 0.0) {
      t0 = std::max(t0, t);
    } else {
      t1 = std::min(t1, t);
    }
    if (t0 > t1) return false;
  }
  // The clipped piece lies in the closed box; it reaches the interior iff its
  // midpoint does. Points within 1e-9 m of a face count as on the face so
  // anchors placed exactly on a face are not reported through rounding.
  constexpr double tol = 1e-9;
  const double tm = 0.5 * (t0 + t1);
  const double mx = p.x + tm * dx, my = p.y + tm * dy;
  return mx > box.x_lo + tol && mx < box.x_hi - tol && my > box.y_lo + tol && my < box.y_hi - tol;
}

namespace detail {

inline BoundKind bound_for(const Strategy& s, Role role) {
  if (const Mention* m = s.mention(role)) return m->bound;
  return is_leading(role) ? BoundKind::FrontBound : BoundKind::RearBound;
}

inline Anchors default_anchors(const Scene& scene, double y_el, double y_tl,
                               const SpaceConfig& cfg) {
  const double r = scene.ego.x + cfg.rear_default;
  const double f = scene.ego.x + cfg.front_default;
  return {{r, y_el}, {r, y_tl}, {f, y_el}, {f, y_tl}};
}

inline Anchors anchors_at(const Strategy& s, const Scene& scene, const ResponseSet& responses,
                          const TargetTracks& tracks, int k, const SpaceConfig& cfg) {
  const int el = scene.ego_lane();
  const auto tl = target_lane_index(s, scene.road, el);
  if (!tl) throw LaneOutOfRange("strategy " + std::to_string(s.id) + " has no target lane");
  const double y_el = scene.road.lane_center(el);
  const double y_tl = scene.road.lane_center(*tl);
  Anchors a = default_anchors(scene, y_el, y_tl, cfg);
  const double half = 0.5 * scene.ego.length;

  for (Role role : kAllRoles) {
    const auto& observed = scene.target(role);
    if (!observed) continue;
    const VehicleState& p = tracks[static_cast<std::size_t>(role)][static_cast<std::size_t>(k)];
    const int lane = scene.road.nearest_lane(p.y);
    const bool in_el = lane == el;
    const bool in_tl = lane == *tl;
    if (!in_el && !in_tl) continue;

    const BoundKind bound = bound_for(s, role);
    Attributes attr = classify_attributes(*observed, scene.ego, scene.road);
    if (const Mention* m = s.mention(role); m && m->speed) attr.f = *m->speed;
    attr.l = in_el ? LaneRelation::EL : s.y_des_lane;
    attr.r = bound == BoundKind::FrontBound ? RelativePosition::Front : RelativePosition::Rear;
    const QuestionKey key = make_key(s.ego_maneuver, attr);
    const double margin = is_used(key) ? lookup_margin(responses, key) : 0.0;

    // The buffer is a floor on the bumper gap, not an addition to the margin.
    const double clearance = half + std::max(margin, cfg.collision_buffer);
    if (bound == BoundKind::FrontBound) {
      const double f = p.rear() - clearance;
      if (in_el) a.f_el.x = std::min(a.f_el.x, f);
      if (in_tl) a.f_tl.x = std::min(a.f_tl.x, f);
    } else {
      const double r = p.front() + clearance;
      if (in_el) a.r_el.x = std::max(a.r_el.x, r);
      if (in_tl) a.r_tl.x = std::max(a.r_tl.x, r);
    }
  }
  // No vehicle ever sets r_EL. During a lane change the follower's margin
  // holds across the whole maneuver, so the rear line does not slant.
  if (s.ego_maneuver != Maneuver::LK && cfg.rear_follows_target) {
    a.r_el.x = std::max(a.r_el.x, a.r_tl.x);
  }
  return a;
}

inline Anchors refine_with_tracks(Anchors a, const Scene& scene, const TargetTracks& tracks, int k,
                                  const SpaceConfig& cfg) {
  std::vector<Box> boxes;
  for (Role role : kAllRoles) {
    if (!scene.has(role)) continue;
    const auto& p = tracks[static_cast<std::size_t>(role)][static_cast<std::size_t>(k)];
    boxes.push_back(inflated_box(p, scene.ego, cfg.collision_buffer));
  }

  // Line value at lateral position y for the segment p-q (p.y != q.y).
  auto at = [](const AnchorPoint& p, const AnchorPoint& q, double y) {
    return p.x + (q.x - p.x) * (y - p.y) / (q.y - p.y);
  };
  // Line values at the two ends of the part of the box's open band lying in
  // the anchors' lateral span; nullopt when the segment cannot reach the box.
  auto band_values = [&](const AnchorPoint& p, const AnchorPoint& q,
                         const Box& b) -> std::optional<std::pair<double, double>> {
    if (p.y == q.y) {
      if (!(p.y > b.y_lo && p.y < b.y_hi)) return std::nullopt;
      return std::pair{p.x, q.x};
    }
    const double lo = std::max(std::min(p.y, q.y), b.y_lo);
    const double hi = std::min(std::max(p.y, q.y), b.y_hi);
    if (!(hi > lo)) return std::nullopt;
    return std::pair{at(p, q, lo), at(p, q, hi)};
  };

  // A side is pushed clear of a box (both anchors to the far face) as soon
  // as its line reaches past the box's near face inside the band. The
  // trigger and the push are both monotone in the anchors, so the fixed
  // point is monotone in the unrefined anchors as well.
  for (int iter = 0; iter < 4 * static_cast<int>(boxes.size()) + 4; ++iter) {
    bool changed = false;
    for (const Box& b : boxes) {
      if (auto v = band_values(a.f_el, a.f_tl, b); v && std::min(v->first, v->second) < b.x_hi) {
        for (AnchorPoint* p : {&a.f_el, &a.f_tl}) {
          if (p->x > b.x_lo) { p->x = b.x_lo; changed = true; }
        }
      }
      if (auto v = band_values(a.r_el, a.r_tl, b); v && std::max(v->first, v->second) > b.x_lo) {
        for (AnchorPoint* p : {&a.r_el, &a.r_tl}) {
          if (p->x < b.x_hi) { p->x = b.x_hi; changed = true; }
        }
      }
    }
    if (!changed) break;
  }
  return a;
}

/// Half-plane bounded by the line through p and q. `keep_low_x` selects the
/// side with smaller x (front bound) or larger x (rear bound).
inline HalfPlane line_halfplane(const AnchorPoint& p, const AnchorPoint& q, bool keep_low_x) {
  HalfPlane h;
  if (p.y == q.y) {
    const double x = keep_low_x ? std::min(p.x, q.x) : std::max(p.x, q.x);
    h.a = keep_low_x ? 1.0 : -1.0;
    h.b = 0.0;
    h.c = h.a * x;
    return h;
  }
  double a = q.y - p.y, b = -(q.x - p.x);
  if ((a < 0.0) == keep_low_x) {
    a = -a;
    b = -b;
  }
  const double n = std::hypot(a, b);
  h.a = a / n;
  h.b = b / n;
  h.c = h.a * p.x + h.b * p.y;
  return h;
}

/// x coordinate of the line through p and q at lateral position y.
inline double line_x_at(const AnchorPoint& p, const AnchorPoint& q, double y, bool low) {
  if (p.y == q.y) return low ? std::min(p.x, q.x) : std::max(p.x, q.x);
  return p.x + (q.x - p.x) * (y - p.y) / (q.y - p.y);
}

}  // namespace detail

/// Alg. 1 anchors for step k, before refinement.
inline Anchors build_anchors(const Strategy& s, const Scene& scene, const ResponseSet& responses,
                             int k, const SpaceConfig& cfg = {}) {
  const auto tracks = predict_tracks(scene, k, cfg.dt);
  return detail::anchors_at(s, scene, responses, tracks, k, cfg);
}

/// Pulls anchors back (front) or forward (rear) to the faces of inflated
/// target boxes until neither anchor segment crosses an occupied region.
inline Anchors refine_anchors(const Anchors& a, const Scene& scene, int k,
                              const SpaceConfig& cfg = {}) {
  const auto tracks = predict_tracks(scene, k, cfg.dt);
  return detail::refine_with_tracks(a, scene, tracks, k, cfg);
}

inline PreferenceSpace build_space(const Strategy& s, const Scene& scene,
                                   const ResponseSet& responses, const SpaceConfig& cfg = {}) {
  const int n = cfg.horizon;
  const auto tracks = predict_tracks(scene, n, cfg.dt);
  PreferenceSpace space;
  space.strategy_id = s.id;
  space.steps.resize(static_cast<std::size_t>(n) + 1);
  const double y_min = 0.5 * scene.ego.width;
  const double y_max = scene.road.width() - 0.5 * scene.ego.width;

  for (int k = 0; k <= n; ++k) {
    StepSpace& st = space.steps[static_cast<std::size_t>(k)];
    st.anchors = detail::refine_with_tracks(detail::anchors_at(s, scene, responses, tracks, k, cfg),
                                            scene, tracks, k, cfg);
    const Anchors& a = st.anchors;
    st.front = detail::line_halfplane(a.f_el, a.f_tl, true);
    st.rear = detail::line_halfplane(a.r_el, a.r_tl, false);
    st.y_min = y_min;
    st.y_max = y_max;
    // Width of the x interval is affine in y; check both ends of the span
    // between the anchor lanes.
    double widest = -1e300;
    for (double y : {a.f_el.y, a.f_tl.y}) {
      widest = std::max(widest, detail::line_x_at(a.f_el, a.f_tl, y, true) -
                                    detail::line_x_at(a.r_el, a.r_tl, y, false));
    }
    st.nonempty = widest > 0.0;
    if (k == 0) {
      space.y_el = a.f_el.y;
      space.y_tl = a.f_tl.y;
    }
  }
  if (!space.steps.front().nonempty) {
    throw EmptyCorridor("strategy " + std::to_string(s.id) +
                        ": front bound is not ahead of rear bound at k = 0");
  }
  return space;
}

/// Preference-agnostic space: default front and rear bounds plus, per step
/// and target, the face of the inflated box that best separates it from a
/// reference path (constant speed, linear lateral ramp to the target lane).
/// Unlike the corridor, the ego may pass a target once laterally clear.
inline PreferenceSpace build_collision_space(const Strategy& s, const Scene& scene,
                                             const SpaceConfig& cfg = {}) {
  const int n = cfg.horizon;
  const auto tracks = predict_tracks(scene, n, cfg.dt);
  const int el = scene.ego_lane();
  const auto tl = target_lane_index(s, scene.road, el);
  if (!tl) throw LaneOutOfRange("strategy " + std::to_string(s.id) + " has no target lane");
  const double y_el = scene.road.lane_center(el);
  const double y_tl = scene.road.lane_center(*tl);
  const Anchors a = detail::default_anchors(scene, y_el, y_tl, cfg);

  PreferenceSpace space;
  space.strategy_id = s.id;
  space.y_el = y_el;
  space.y_tl = y_tl;
  space.steps.resize(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) {
    StepSpace& st = space.steps[static_cast<std::size_t>(k)];
    st.anchors = a;
    st.front = detail::line_halfplane(a.f_el, a.f_tl, true);
    st.rear = detail::line_halfplane(a.r_el, a.r_tl, false);
    st.y_min = 0.5 * scene.ego.width;
    st.y_max = scene.road.width() - 0.5 * scene.ego.width;

    const double t = k * cfg.dt;
    const double xr = scene.ego.x + scene.ego.v * t;
    const double ramp = cfg.reference_change_time > 0.0
                            ? std::min(1.0, t / cfg.reference_change_time)
                            : 1.0;
    const double yr = scene.ego.y + (y_tl - scene.ego.y) * ramp;
    for (Role role : kAllRoles) {
      if (!scene.has(role)) continue;
      const Box b = inflated_box(tracks[static_cast<std::size_t>(role)][static_cast<std::size_t>(k)],
                                 scene.ego, cfg.collision_buffer);
      const std::array<std::pair<double, HalfPlane>, 4> faces = {{
          {b.x_lo - xr, {1.0, 0.0, b.x_lo}},
          {xr - b.x_hi, {-1.0, 0.0, -b.x_hi}},
          {b.y_lo - yr, {0.0, 1.0, b.y_lo}},
          {yr - b.y_hi, {0.0, -1.0, -b.y_hi}},
      }};
      const auto best = std::max_element(faces.begin(), faces.end(), [](const auto& l, const auto& r) {
        return l.first < r.first;
      });
      st.obstacles.push_back(best->second);
    }
  }
  return space;
}

inline bool contains(const PreferenceSpace& space, int k, double x, double y, double eps = 0.0) {
  const StepSpace& st = space.steps.at(static_cast<std::size_t>(k));
  for (const auto& h : st.obstacles) {
    if (h.residual(x, y) > eps) return false;
  }
  return st.front.residual(x, y) <= eps && st.rear.residual(x, y) <= eps &&
         y >= st.y_min - eps && y <= st.y_max + eps;
}

/// Per-step half-plane coefficients and refined anchors.
inline std::string space_csv(const PreferenceSpace& space) {
  std::ostringstream os;
  os.precision(10);
  os << "k,rear_a,rear_b,rear_c,front_a,front_b,front_c,y_min,y_max,nonempty,"
        "r_el_x,r_tl_x,f_el_x,f_tl_x\n";
  for (std::size_t k = 0; k < space.steps.size(); ++k) {
    const auto& s = space.steps[k];
    os << k << ',' << s.rear.a << ',' << s.rear.b << ',' << s.rear.c << ',' << s.front.a << ','
       << s.front.b << ',' << s.front.c << ',' << s.y_min << ',' << s.y_max << ','
       << (s.nonempty ? 1 : 0) << ',' << s.anchors.r_el.x << ',' << s.anchors.r_tl.x << ','
       << s.anchors.f_el.x << ',' << s.anchors.f_tl.x << '\n';
  }
  return os.str();
}

/// Top-down drawing of the k = 0 corridor, the targets, and an optional
/// planned path (x, y pairs).
inline std::string space_svg(const PreferenceSpace& space, const Scene& scene,
                             const std::vector<std::pair<double, double>>& path = {}) {
  const double scale = 8.0;
  const double x0 = scene.ego.x - 40.0, x1 = scene.ego.x + 90.0;
  const double w = (x1 - x0) * scale, h = scene.road.width() * scale;
  auto px = [&](double x) { return (x - x0) * scale; };
  auto py = [&](double y) { return h - y * scale; };
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
     << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\"#eeeeee\"/>\n";
  for (int i = 1; i < scene.road.lane_count; ++i) {
    const double y = py(i * scene.road.lane_width);
    os << "<line x1=\"0\" y1=\"" << y << "\" x2=\"" << w << "\" y2=\"" << y
       << "\" stroke=\"#999999\" stroke-dasharray=\"8,8\"/>\n";
  }
  if (!space.steps.empty()) {
    const auto& a = space.steps.front().anchors;
    os << "<polygon points=\"" << px(a.r_el.x) << ',' << py(a.r_el.y) << ' ' << px(a.f_el.x)
       << ',' << py(a.f_el.y) << ' ' << px(a.f_tl.x) << ',' << py(a.f_tl.y) << ' '
       << px(a.r_tl.x) << ',' << py(a.r_tl.y)
       << "\" fill=\"#66aaff\" fill-opacity=\"0.3\" stroke=\"#3366cc\"/>\n";
    for (const auto* p : {&a.r_el, &a.r_tl, &a.f_el, &a.f_tl}) {
      os << "<circle cx=\"" << px(p->x) << "\" cy=\"" << py(p->y) << "\" r=\"3\" fill=\"#3366cc\"/>\n";
    }
  }
  auto vehicle = [&](const VehicleState& v, const char* color) {
    const Box b = footprint(v);
    os << "<rect x=\"" << px(b.x_lo) << "\" y=\"" << py(b.y_hi) << "\" width=\""
       << (b.x_hi - b.x_lo) * scale << "\" height=\"" << (b.y_hi - b.y_lo) * scale
       << "\" fill=\"" << color << "\"/>\n";
  };
  for (Role r : kAllRoles) {
    if (const auto& t = scene.target(r)) vehicle(*t, "#cc3333");
  }
  vehicle(scene.ego, "#2255dd");
  if (!path.empty()) {
    os << "<polyline fill=\"none\" stroke=\"#22aa22\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : path) os << px(x) << ',' << py(y) << ' ';
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace prefdrive
