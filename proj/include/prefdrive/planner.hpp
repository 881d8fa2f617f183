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

// One planning cycle: every applicable strategy gets its corridor and QP,
// the feasible plan with the lowest drive-speed cost J wins.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "prefdrive/dynamics.hpp"
#include "prefdrive/error.hpp"
#include "prefdrive/log.hpp"
#include "prefdrive/prefspace.hpp"
#include "prefdrive/questionnaire.hpp"
#include "prefdrive/scenario.hpp"
#include "prefdrive/solver.hpp"
#include "prefdrive/strategy.hpp"

namespace prefdrive {

struct PlannerConfig {
  SpaceConfig space;
  SolverConfig solver;
  SpeedConfig speeds;
  double v_drive = kDriveSpeed;
  /// Two J values closer than rel * max|J| + abs are a tie. J carries the
  /// solver tolerance in every speed sample, so abs sits well above that noise.
  double tie_rel = 1e-6;
  double tie_abs = 1e-3;
  /// Worker threads for the subproblems; 1 solves inline.
  int jobs = 1;
  double budget_ms = 50.0;
  bool enforce_budget = true;
  /// When non-empty, only these strategy ids are considered.
  std::vector<int> only_ids;
  /// Preference-agnostic baseline: per-target collision half-planes in place
  /// of the preference corridor.
  bool collision_only = false;
};

struct StrategyReport {
  int id = 0;
  bool feasible = false;
  std::string status;
  std::optional<double> J, V, max_slack;
  int iterations = 0;
  bool relaxed = false;
};

struct PlanResult {
  Trajectory trajectory;
  PreferenceSpace space;
  std::vector<StrategyReport> reports;  // one per applicable strategy, ascending id
  int selected_id = 0;
  bool fallback = false;
  double solve_ms = 0.0;
};

namespace detail {

struct Candidate {
  StrategyReport report;
  std::optional<Trajectory> trajectory;
  std::optional<PreferenceSpace> space;
};

inline Candidate evaluate_strategy(const Strategy& s, const Scene& scene, const EgoState& x0,
                                   const ResponseSet& responses, const LinearModel& model,
                                   const PlannerConfig& cfg) {
  Candidate c;
  c.report.id = s.id;
  try {
    PreferenceSpace space = cfg.collision_only ? build_collision_space(s, scene, cfg.space)
                                               : build_space(s, scene, responses, cfg.space);
    Trajectory t = solve(assemble(s, scene, space, x0, model, cfg.solver), space, cfg.solver);
    if (t.status != qp::Status::Solved) {
      SolverConfig relaxed = cfg.solver;
      relaxed.speed_from = std::max(relaxed.speed_from, relaxed.relaxed_speed_from);
      t = solve(assemble(s, scene, space, x0, model, relaxed), space, relaxed);
      c.report.relaxed = true;
    }
    t.cost_J = cost_J(t, cfg.v_drive);
    c.report.feasible = t.feasible;
    c.report.iterations = t.iterations;
    c.report.J = t.cost_J;
    c.report.V = t.cost_V;
    c.report.max_slack = t.max_slack;
    c.report.status = t.status == qp::Status::Solved && !t.feasible ? "slack_exceeded"
                                                                    : qp::to_string(t.status);
    c.trajectory = std::move(t);
    c.space = std::move(space);
  } catch (const EmptyCorridor&) {
    c.report.status = "empty_corridor";
  } catch (const InfeasibleAtStart&) {
    c.report.status = "infeasible_at_start";
  } catch (const LaneOutOfRange&) {
    c.report.status = "lane_out_of_range";
  }
  return c;
}

inline void run_all(std::vector<Candidate>& out, const std::vector<const Strategy*>& tasks,
                    const Scene& scene, const EgoState& x0, const ResponseSet& responses,
                    const LinearModel& model, const PlannerConfig& cfg) {
  out.resize(tasks.size());
  const int workers = std::min<int>(std::max(cfg.jobs, 1), static_cast<int>(tasks.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      out[i] = evaluate_strategy(*tasks[i], scene, x0, responses, model, cfg);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < tasks.size(); i = next++) {
      out[i] = evaluate_strategy(*tasks[i], scene, x0, responses, model, cfg);
    }
  };
  std::vector<std::jthread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
}

}  // namespace detail

/// Index of the selected candidate: lowest J among feasible ones; ties go to
/// lane keeping, then to the lower id. Returns -1 if none is feasible.
inline int select_candidate(const std::vector<StrategyReport>& reports,
                            const StrategyCatalog& cat, const PlannerConfig& cfg) {
  double best = INFINITY;
  for (const auto& r : reports) {
    if (r.feasible) best = std::min(best, *r.J);
  }
  if (!std::isfinite(best)) return -1;
  const double tol = cfg.tie_rel * std::abs(best) + cfg.tie_abs;
  int pick = -1;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    if (!r.feasible || *r.J > best + tol) continue;
    if (pick < 0) {
      pick = static_cast<int>(i);
      continue;
    }
    const bool lk = strategy_by_id(cat, r.id).ego_maneuver == Maneuver::LK;
    const bool pick_lk =
        strategy_by_id(cat, reports[static_cast<std::size_t>(pick)].id).ego_maneuver ==
        Maneuver::LK;
    if (lk && !pick_lk) pick = static_cast<int>(i);
  }
  return pick;
}

inline PlanResult plan(const Scene& scene, const EgoState& x0, const ResponseSet& responses,
                       const PlannerConfig& cfg = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const StrategyCatalog cat = catalog(cfg.speeds);
  const LinearModel model = linearize(x0, cfg.space.dt, cfg.solver.vehicle);

  std::vector<const Strategy*> tasks;
  for (int id : applicable_ids(cat, scene)) {
    if (!cfg.only_ids.empty() &&
        std::find(cfg.only_ids.begin(), cfg.only_ids.end(), id) == cfg.only_ids.end()) {
      continue;
    }
    tasks.push_back(&strategy_by_id(cat, id));
  }
  std::vector<detail::Candidate> cands;
  detail::run_all(cands, tasks, scene, x0, responses, model, cfg);

  PlanResult out;
  for (const auto& c : cands) out.reports.push_back(c.report);
  const int pick = select_candidate(out.reports, cat, cfg);
  if (pick >= 0) {
    auto& c = cands[static_cast<std::size_t>(pick)];
    out.trajectory = std::move(*c.trajectory);
    out.space = std::move(*c.space);
    out.selected_id = c.report.id;
  } else {
    // Emergency completion: stop in lane with collision-only constraints.
    log::info("no feasible strategy; falling back to collision-only stop");
    detail::Candidate fb = detail::evaluate_strategy(strategy_by_id(cat, kStopStrategyId), scene,
                                                     x0, collision_only_responses(), model, cfg);
    if (!fb.trajectory || fb.trajectory->status != qp::Status::Solved) {
      throw NoFeasiblePlan("no strategy feasible and the fallback failed (" + fb.report.status +
                           ")");
    }
    out.trajectory = std::move(*fb.trajectory);
    out.space = std::move(*fb.space);
    out.selected_id = kStopStrategyId;
    out.fallback = true;
  }
  out.solve_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

inline PlanResult plan(const Scene& scene, const ResponseSet& responses,
                       const PlannerConfig& cfg = {}) {
  const EgoState x0{scene.ego.x, scene.ego.y, scene.ego.v, scene.ego.psi, 0.0, 0.0};
  return plan(scene, x0, responses, cfg);
}

inline nlohmann::json diagnostics_json(const PlanResult& r, int cycle, bool with_timing = true) {
  nlohmann::json app = nlohmann::json::array();
  auto num = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  for (const auto& s : r.reports) {
    app.push_back({{"id", s.id},
                   {"feasible", s.feasible},
                   {"J", num(s.J)},
                   {"V", num(s.V)},
                   {"max_slack", num(s.max_slack)},
                   {"status", s.status},
                   {"relaxed", s.relaxed}});
  }
  nlohmann::json j = {{"cycle", cycle},
                      {"applicable", std::move(app)},
                      {"selected_id", r.selected_id},
                      {"fallback", r.fallback}};
  j["solve_ms"] = with_timing ? nlohmann::json(r.solve_ms) : nlohmann::json();
  return j;
}

/// Closed-loop wrapper: plans once per call and returns the control to apply.
/// Overruns of the cycle budget and planning failures fall back to the next
/// control of the previous plan.
class Planner {
 public:
  struct Step {
    ControlInput control;
    int selected_id = 0;
    bool fallback = false;
    bool reused = false;
    std::optional<PlanResult> plan;
  };

  explicit Planner(ResponseSet responses, PlannerConfig cfg = {})
      : responses_(std::move(responses)), cfg_(std::move(cfg)) {}

  /// The next n cycles are treated as budget overruns.
  void inject_timeouts(int n) { injected_ += n; }
  [[nodiscard]] int cycle() const { return cycle_; }
  [[nodiscard]] const PlannerConfig& config() const { return cfg_; }
  [[nodiscard]] const ResponseSet& responses() const { return responses_; }

  Step replan_cycle(const Scene& scene, const EgoState& x0) {
    ++cycle_;
    Step step;
    std::optional<PlanResult> result;
    try {
      result = plan(scene, x0, responses_, cfg_);
    } catch (const NoFeasiblePlan& e) {
      log::warn("cycle " + std::to_string(cycle_) + ": " + e.what());
    }
    bool overrun = false;
    if (injected_ > 0) {
      --injected_;
      overrun = true;
    } else if (result && cfg_.enforce_budget && result->solve_ms > cfg_.budget_ms) {
      overrun = true;
    }
    if (overrun) {
      log::warn("cycle " + std::to_string(cycle_) + ": planning budget exceeded (" +
                (result ? std::to_string(result->solve_ms) : std::string("n/a")) + " ms)");
    }
    if (result && (!overrun || !last_)) {
      step.control = result->trajectory.controls.front();
      step.selected_id = result->selected_id;
      step.fallback = result->fallback;
      last_ = result->trajectory;
      last_id_ = result->selected_id;
      next_ = 1;
    } else {
      step.reused = true;
      step.control = reuse(x0);
      step.selected_id = last_id_;
      step.fallback = true;
    }
    step.plan = std::move(result);
    return step;
  }

 private:
  ControlInput reuse(const EgoState& x0) {
    if (last_ && next_ < last_->controls.size()) return last_->controls[next_++];
    // Nothing left to replay: brake and straighten the wheels.
    const Bounds& b = cfg_.solver.bounds;
    ControlInput u;
    u.j = x0.a > b.a_min ? b.j_min : 0.0;
    u.gamma = std::clamp(-x0.delta / cfg_.space.dt, b.gamma_min, b.gamma_max);
    return u;
  }

  ResponseSet responses_;
  PlannerConfig cfg_;
  int cycle_ = 0;
  int injected_ = 0;
  std::optional<Trajectory> last_;
  int last_id_ = kStopStrategyId;
  std::size_t next_ = 0;
};

}  // namespace prefdrive
