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

// Closed-loop highway simulation: constant-velocity lane-keeping targets,
// nonlinear ego plant, one planning cycle per step.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "prefdrive/dynamics.hpp"
#include "prefdrive/error.hpp"
#include "prefdrive/planner.hpp"
#include "prefdrive/prefspace.hpp"
#include "prefdrive/questionnaire.hpp"
#include "prefdrive/scenario.hpp"
#include "prefdrive/strategy.hpp"

namespace prefdrive {

inline constexpr double kBigLength = 10.0;
inline constexpr double kBigWidth = 2.5;

struct SimConfig {
  std::uint64_t seed = 1;
  double duration = 30.0;
  int lane_count = 2;
  double target_speed = 45.0 * kKphToMps;
  double ego_speed = 45.0 * kKphToMps;
  /// Longitudinal spacing of consecutive target slots [m].
  double gap = 15.0;
  bool mix_big_small = false;
  double big_probability = 0.3;
  int replan_hz = 20;
  /// Plant integration substeps per planning cycle.
  int substeps = 1;
  double range_behind = 100.0;
  double range_ahead = 300.0;
  /// Nearest-lane changes shorter than this do not count.
  double change_debounce = 0.5;
  /// Preference-agnostic baseline: plan with collision-only responses.
  bool baseline = false;
  PlannerConfig planner;

  void validate() const {
    if (!(duration > 0.0)) throw InvalidScene("duration must be positive");
    if (lane_count < 2 || lane_count > 3) throw InvalidScene("lane_count must be 2 or 3");
    const double longest = mix_big_small ? kBigLength : 4.5;
    if (!(gap > longest)) throw InvalidScene("gap must exceed the longest vehicle");
    if (replan_hz <= 0 || substeps <= 0) throw InvalidScene("rates must be positive");
  }
  [[nodiscard]] double dt() const { return 1.0 / replan_hz; }
  [[nodiscard]] int cycles() const {
    return static_cast<int>(std::lround(duration * replan_hz));
  }
};

struct World {
  RoadModel road;
  EgoState ego;
  VehicleState ego_shape;
  std::vector<VehicleState> targets;
};

/// Targets on slots i * gap (i != 0) around the ego, each in a random lane,
/// all lane keeping at the target speed.
inline World generate_scenario(const SimConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> lane(0, cfg.lane_count - 1);
  std::bernoulli_distribution big(cfg.big_probability);
  World w;
  w.road = {cfg.lane_count, 3.5};
  const int ego_lane = lane(rng);
  w.ego = {0.0, w.road.lane_center(ego_lane), cfg.ego_speed, 0.0, 0.0, 0.0};
  w.ego_shape = {0.0, w.ego.y, w.ego.v, 0.0, 4.5, 2.0};
  const int behind = static_cast<int>(std::floor(cfg.range_behind / cfg.gap));
  const int ahead = static_cast<int>(std::floor(cfg.range_ahead / cfg.gap));
  for (int i = -behind; i <= ahead; ++i) {
    if (i == 0) continue;
    VehicleState t;
    t.x = i * cfg.gap;
    t.y = w.road.lane_center(lane(rng));
    t.v = cfg.target_speed;
    if (cfg.mix_big_small && big(rng)) {
      t.length = kBigLength;
      t.width = kBigWidth;
    }
    w.targets.push_back(t);
  }
  if (cfg.mix_big_small && w.targets.size() >= 2) {
    const auto big_count = std::count_if(w.targets.begin(), w.targets.end(),
                                         [](const VehicleState& t) { return t.length > 7.0; });
    // Guarantee both size classes.
    VehicleState& flip = w.targets[static_cast<std::size_t>(behind + 1)];
    if (big_count == 0) {
      flip.length = kBigLength;
      flip.width = kBigWidth;
    } else if (big_count == static_cast<long>(w.targets.size())) {
      flip.length = 4.5;
      flip.width = 2.0;
    }
  }
  return w;
}

inline VehicleState ego_vehicle(const World& w) {
  VehicleState v = w.ego_shape;
  v.x = w.ego.x;
  v.y = w.ego.y;
  v.v = w.ego.v;
  v.psi = w.ego.psi;
  return v;
}

inline Scene observe(const World& w) {
  return assign_roles(ego_vehicle(w), w.targets, w.road);
}

/// Ego plant step: RK4 on the bicycle model, state limits, and no residual
/// acceleration pushing through a saturated speed.
inline EgoState plant_step(const EgoState& s, const ControlInput& u, double dt,
                           const Bounds& b = {}, const VehicleParams& p = {}) {
  EgoState n = clamp(rk4_step(s, clamp(u, b), dt, p), b);
  if (n.v <= b.v_min && n.a < 0.0) n.a = 0.0;
  if (n.v >= b.v_max && n.a > 0.0) n.a = 0.0;
  return n;
}

struct StepLog {
  int step = 0;
  double t = 0.0;
  EgoState ego;
  ControlInput control;
  int lane = 0;
  int selected_id = 0;
  bool fallback = false;
  bool in_preference = false;
  int violations = 0;
};

struct Metrics {
  double pref_rate = 0.0;
  double avg_speed = 0.0;
  double change_count = 0.0;
};

struct SimLog {
  SimConfig config;
  std::vector<StepLog> steps;
  std::vector<std::vector<VehicleState>> targets;  // per step
  bool collided = false;
  std::string failure;
  Metrics metrics;
};

/// Number of nearest-lane index changes that persist for at least
/// `debounce` seconds.
inline int count_lane_changes(const std::vector<int>& lanes, double dt, double debounce) {
  if (lanes.empty()) return 0;
  const int hold = std::max(1, static_cast<int>(std::lround(debounce / dt)));
  int settled = lanes.front();
  int count = 0;
  std::size_t i = 1;
  while (i < lanes.size()) {
    if (lanes[i] == settled) {
      ++i;
      continue;
    }
    const int cand = lanes[i];
    std::size_t j = i;
    while (j < lanes.size() && lanes[j] == cand) ++j;
    if (static_cast<int>(j - i) >= hold) {
      ++count;
      settled = cand;
    }
    i = j;
  }
  return count;
}

inline Metrics metrics(const SimLog& log) {
  Metrics m;
  if (log.steps.empty()) return m;
  int pref = 0;
  double speed = 0.0;
  std::vector<int> lanes;
  lanes.reserve(log.steps.size());
  for (const auto& s : log.steps) {
    pref += s.in_preference ? 1 : 0;
    speed += s.ego.v;
    lanes.push_back(s.lane);
  }
  const auto n = static_cast<double>(log.steps.size());
  m.pref_rate = 100.0 * pref / n;
  m.avg_speed = speed / n;
  m.change_count = count_lane_changes(lanes, log.config.dt(), log.config.change_debounce);
  return m;
}

/// Whether the ego state satisfies the user's preferences: no clearance
/// below a stated margin, a non-emergency plan, and the ego inside the
/// selected strategy's preference corridor.
inline bool in_preference(const Scene& scene, const ResponseSet& responses, int strategy_id,
                          bool fallback, const PreferenceSpace* space,
                          const PlannerConfig& cfg) {
  if (fallback || preference_violations(scene, responses) != 0) return false;
  const double eps = cfg.solver.slack_bound;
  if (space) return contains(*space, 0, scene.ego.x, scene.ego.y, eps);
  try {
    const StrategyCatalog cat = catalog(cfg.speeds);
    SpaceConfig sc = cfg.space;
    sc.horizon = 0;
    const auto sp = build_space(strategy_by_id(cat, strategy_id), scene, responses, sc);
    return contains(sp, 0, scene.ego.x, scene.ego.y, eps);
  } catch (const Error&) {
    return false;
  }
}

inline bool collides(const World& w) {
  const Box e = footprint(ego_vehicle(w));
  return std::any_of(w.targets.begin(), w.targets.end(),
                     [&](const VehicleState& t) { return footprint(t).overlaps(e); });
}

inline SimLog run(const SimConfig& cfg, const ResponseSet& responses) {
  World w = generate_scenario(cfg);
  SimLog log;
  log.config = cfg;
  PlannerConfig pc = cfg.planner;
  pc.enforce_budget = false;  // wall-clock decisions would break reproducibility
  pc.collision_only = pc.collision_only || cfg.baseline;
  Planner planner(cfg.baseline ? collision_only_responses() : responses, pc);
  const double dt = cfg.dt();
  const double sub = dt / cfg.substeps;
  const int cycles = cfg.cycles();
  log.steps.reserve(static_cast<std::size_t>(cycles));
  for (int k = 0; k < cycles; ++k) {
    const Scene scene = observe(w);
    const auto step = planner.replan_cycle(scene, w.ego);
    StepLog s;
    s.step = k;
    s.t = k * dt;
    s.ego = w.ego;
    s.control = step.control;
    s.lane = w.road.nearest_lane(w.ego.y);
    s.selected_id = step.selected_id;
    s.fallback = step.fallback;
    s.violations = preference_violations(scene, responses);
    const PreferenceSpace* sp = !cfg.baseline && step.plan ? &step.plan->space : nullptr;
    s.in_preference = in_preference(scene, responses, step.selected_id, step.fallback, sp, pc);
    log.steps.push_back(s);
    log.targets.push_back(w.targets);

    for (int i = 0; i < cfg.substeps && !log.collided; ++i) {
      w.ego = plant_step(w.ego, step.control, sub, pc.solver.bounds, pc.solver.vehicle);
      for (auto& t : w.targets) t.x += t.v * std::cos(t.psi) * sub;
      if (collides(w)) {
        log.collided = true;
        std::ostringstream os;
        os << "collision at t = " << (k * dt + (i + 1) * sub) << " s";
        log.failure = os.str();
      }
    }
    if (log.collided) break;
  }
  log.metrics = metrics(log);
  return log;
}

/// Experiment presets: 1 and 2 are the 2-lane 15 m / 25 m streams, 3 is the
/// 3-lane mixed-size stream used to compare driving styles.
inline SimConfig scenario_preset(int scenario, std::uint64_t seed = 1) {
  SimConfig c;
  c.seed = seed;
  switch (scenario) {
    case 1:
      c.gap = 15.0;
      break;
    case 2:
      c.gap = 25.0;
      break;
    case 3:
      c.lane_count = 3;
      c.gap = 25.0;
      c.mix_big_small = true;
      break;
    default:
      throw InvalidScene("unknown scenario " + std::to_string(scenario));
  }
  return c;
}

/// Runs independent configurations on up to `jobs` threads. Results are in
/// input order, so the batch output does not depend on scheduling.
inline std::vector<SimLog> run_batch(const std::vector<SimConfig>& cfgs,
                                     const ResponseSet& responses, int jobs = 1) {
  std::vector<SimLog> logs(cfgs.size());
  const int workers = std::min<int>(std::max(jobs, 1), static_cast<int>(cfgs.size()));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cfgs.size(); i = next++) logs[i] = run(cfgs[i], responses);
  };
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  return logs;
}

inline std::string log_csv(const SimLog& log) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "step,t,x,y,v,psi,a,delta,j,gamma,lane,selected_id,fallback,in_preference,violations\n";
  for (const auto& s : log.steps) {
    os << s.step << ',' << s.t << ',' << s.ego.x << ',' << s.ego.y << ',' << s.ego.v << ','
       << s.ego.psi << ',' << s.ego.a << ',' << s.ego.delta << ',' << s.control.j << ','
       << s.control.gamma << ',' << s.lane << ',' << s.selected_id << ',' << (s.fallback ? 1 : 0)
       << ',' << (s.in_preference ? 1 : 0) << ',' << s.violations << '\n';
  }
  return os.str();
}

inline std::string targets_csv(const SimLog& log) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "step,target,x,y,v,length,width\n";
  for (std::size_t k = 0; k < log.targets.size(); ++k) {
    for (std::size_t i = 0; i < log.targets[k].size(); ++i) {
      const auto& t = log.targets[k][i];
      os << k << ',' << i << ',' << t.x << ',' << t.y << ',' << t.v << ',' << t.length << ','
         << t.width << '\n';
    }
  }
  return os.str();
}

inline nlohmann::json config_json(const SimConfig& c) {
  return {{"seed", c.seed},           {"duration", c.duration},
          {"lane_count", c.lane_count}, {"target_speed", c.target_speed},
          {"ego_speed", c.ego_speed},   {"gap", c.gap},
          {"mix_big_small", c.mix_big_small}, {"replan_hz", c.replan_hz},
          {"substeps", c.substeps},     {"baseline", c.baseline}};
}

inline nlohmann::json summary_json(const SimLog& log) {
  return {{"config", config_json(log.config)},
          {"steps", log.steps.size()},
          {"collided", log.collided},
          {"failure", log.failure},
          {"pref_rate", log.metrics.pref_rate},
          {"avg_speed", log.metrics.avg_speed},
          {"change_count", log.metrics.change_count}};
}

struct BatchRow {
  std::string planner;
  int runs = 0;
  int failed = 0;
  Metrics mean;
};

inline BatchRow aggregate(std::string name, const std::vector<SimLog>& logs) {
  BatchRow r;
  r.planner = std::move(name);
  r.runs = static_cast<int>(logs.size());
  for (const auto& l : logs) {
    if (l.collided) ++r.failed;
    r.mean.pref_rate += l.metrics.pref_rate;
    r.mean.avg_speed += l.metrics.avg_speed;
    r.mean.change_count += l.metrics.change_count;
  }
  if (r.runs > 0) {
    r.mean.pref_rate /= r.runs;
    r.mean.avg_speed /= r.runs;
    r.mean.change_count /= r.runs;
  }
  return r;
}

/// Batch table: one row per planner with the mean of each metric.
inline std::string report_text(const std::string& title, const std::vector<BatchRow>& rows) {
  std::ostringstream os;
  os << title << '\n';
  os << std::left << std::setw(22) << "planner" << std::right << std::setw(12) << "pref_rate[%]"
     << std::setw(15) << "avg_speed[m/s]" << std::setw(14) << "change_count" << std::setw(6)
     << "runs" << std::setw(8) << "failed" << '\n';
  os << std::fixed;
  for (const auto& r : rows) {
    os << std::left << std::setw(22) << r.planner << std::right << std::setw(12)
       << std::setprecision(2) << r.mean.pref_rate << std::setw(15) << r.mean.avg_speed
       << std::setw(14) << r.mean.change_count << std::setw(6) << r.runs << std::setw(8)
       << r.failed << '\n';
  }
  return os.str();
}

inline nlohmann::json report_json(const std::vector<BatchRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"planner", r.planner},
                 {"runs", r.runs},
                 {"failed", r.failed},
                 {"pref_rate", r.mean.pref_rate},
                 {"avg_speed", r.mean.avg_speed},
                 {"change_count", r.mean.change_count}});
  }
  return j;
}

}  // namespace prefdrive
