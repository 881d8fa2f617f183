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

// Per-strategy trajectory QP: tracking cost on lateral position and speed,
// soft corridor, hard actuator and state bounds. Each step carries two
// non-negative slacks: one shared by the front and rear half-planes, one by
// the two lateral edges (neither pair can be violated on both sides at once).

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "prefdrive/dynamics.hpp"
#include "prefdrive/error.hpp"
#include "prefdrive/ocp_qp.hpp"
#include "prefdrive/prefspace.hpp"
#include "prefdrive/scenario.hpp"
#include "prefdrive/strategy.hpp"

namespace prefdrive {

inline constexpr double kDriveSpeed = 60.0 * kKphToMps;

struct Weights {
  double lateral = 100.0;
  double speed = 1.0;
  double slack = 1e4;
  // Small linear slack cost: keeps inactive slacks at zero to solver tolerance.
  double slack_linear = 1.0;
  // Input regularization, relative to the speed weight.
  double jerk = 0.05;
  double steer_rate = 1e4;
};

struct SolverConfig {
  Weights weights;
  Bounds bounds;
  VehicleParams vehicle;
  qp::Settings ipm;
  /// Largest corridor violation [m] for which a solution still counts as feasible.
  double slack_bound = 0.2;
  /// First step at which each state bound is imposed. Earlier steps are fixed
  /// by the initial state through the integrator chain.
  int accel_from = 1;
  int speed_from = 2;
  /// Speed/heading bounds start here in the retry after a failed solve. A
  /// plan that rode a bound can leave the plant where the strict problem has
  /// no solution; the plant clamps those states anyway.
  int relaxed_speed_from = 10;
};

struct QpProblem {
  qp::Problem ocp;
  int strategy_id = 0;
  double v_des = 0.0;
  double y_des = 0.0;
  LinearModel model;

  [[nodiscard]] int horizon() const { return ocp.horizon(); }
  [[nodiscard]] int control_dim() const { return 2 * horizon(); }
  [[nodiscard]] int slack_dim() const { return 2 * (horizon() + 1); }
  [[nodiscard]] int decision_dim() const { return control_dim() + slack_dim(); }
};

struct Trajectory {
  std::vector<EgoState> states;        // k = 0..N
  std::vector<ControlInput> controls;  // k = 0..N-1
  int strategy_id = 0;
  bool feasible = false;
  double cost_V = 0.0;
  double cost_J = 0.0;
  double max_slack = 0.0;
  qp::Status status = qp::Status::NumericalFailure;
  int iterations = 0;
  qp::Residuals residuals;
};

inline double cost_J(const std::vector<EgoState>& states, double v_drive = kDriveSpeed) {
  double j = 0.0;
  for (const auto& s : states) j += (s.v - v_drive) * (s.v - v_drive);
  return j;
}

inline double cost_J(const Trajectory& t, double v_drive = kDriveSpeed) {
  return cost_J(t.states, v_drive);
}

namespace detail {

using RowX = Eigen::Matrix<double, 1, kNx>;
using RowW = Eigen::Matrix<double, 1, qp::kNw>;

inline void add_box(qp::Stage& st, int idx, bool on_state, double lo, double hi) {
  RowX dx = RowX::Zero();
  RowW dw = RowW::Zero();
  (on_state ? dx[idx] : dw[idx]) = 1.0;
  st.add_row(dx, dw, hi);
  st.add_row(-dx, -dw, -lo);
}

inline void add_halfplane(qp::Stage& st, const HalfPlane& h, int slack_idx) {
  RowX dx = RowX::Zero();
  RowW dw = RowW::Zero();
  dx[0] = h.a;
  dx[1] = h.b;
  dw[slack_idx] = -1.0;
  st.add_row(dx, dw, h.c);
}

}  // namespace detail

/// Builds the QP of one strategy. x0 is the ego state the model was
/// linearized about. Throws InfeasibleAtStart when the ego already lies
/// outside the corridor by more than the slack bound.
inline QpProblem assemble(const Strategy& strategy, const Scene& scene,
                          const PreferenceSpace& space, const EgoState& x0,
                          const LinearModel& model, const SolverConfig& cfg = {}) {
  if (space.steps.empty()) throw InvalidScene("empty preference space");
  if (!space.steps.front().nonempty) {
    throw InfeasibleAtStart("strategy " + std::to_string(strategy.id) + ": empty corridor");
  }
  if (!contains(space, 0, x0.x, x0.y, cfg.slack_bound)) {
    throw InfeasibleAtStart("strategy " + std::to_string(strategy.id) +
                            ": ego starts outside the corridor");
  }
  const StrategyTargets tg = targets_of(strategy, scene.road, scene.ego_lane());
  const Weights& w = cfg.weights;
  const Bounds& b = cfg.bounds;
  const int n = space.horizon();

  QpProblem out;
  out.strategy_id = strategy.id;
  out.v_des = tg.v_des;
  out.y_des = tg.y_des;
  out.model = model;
  qp::Problem& p = out.ocp;
  p.x0 = x0.vec();
  p.A = model.A;
  p.B.setZero();
  p.B.leftCols<kNu>() = model.B;
  p.c = model.c;
  p.stages.resize(static_cast<std::size_t>(n) + 1);

  for (int k = 0; k <= n; ++k) {
    qp::Stage& st = p.stages[static_cast<std::size_t>(k)];
    st.Q(1, 1) = 2.0 * w.lateral;
    st.Q(2, 2) = 2.0 * w.speed;
    st.q[1] = -2.0 * w.lateral * tg.y_des;
    st.q[2] = -2.0 * w.speed * tg.v_des;
    p.constant += w.lateral * tg.y_des * tg.y_des + w.speed * tg.v_des * tg.v_des;
    st.R(0, 0) = 2.0 * w.speed * w.jerk;
    st.R(1, 1) = 2.0 * w.speed * w.steer_rate;
    st.R(2, 2) = 2.0 * w.slack;
    st.R(3, 3) = 2.0 * w.slack;
    st.r[2] = w.slack_linear;
    st.r[3] = w.slack_linear;

    if (k < n) {
      detail::add_box(st, 0, false, b.j_min, b.j_max);
      detail::add_box(st, 1, false, b.gamma_min, b.gamma_max);
    }
    if (k >= cfg.accel_from) {
      detail::add_box(st, 4, true, b.a_min, b.a_max);
      detail::add_box(st, 5, true, b.delta_min, b.delta_max);
    }
    if (k >= cfg.speed_from) {
      detail::add_box(st, 2, true, b.v_min, b.v_max);
      detail::add_box(st, 3, true, b.psi_min, b.psi_max);
    }
    const StepSpace& sp = space.steps[static_cast<std::size_t>(k)];
    detail::add_halfplane(st, sp.front, 2);
    detail::add_halfplane(st, sp.rear, 2);
    for (const auto& h : sp.obstacles) detail::add_halfplane(st, h, 2);
    detail::add_halfplane(st, HalfPlane{0.0, 1.0, sp.y_max}, 3);
    detail::add_halfplane(st, HalfPlane{0.0, -1.0, -sp.y_min}, 3);
    for (int i : {2, 3}) {
      detail::RowW dw = detail::RowW::Zero();
      dw[i] = -1.0;
      st.add_row(detail::RowX::Zero(), dw, 0.0);
    }
  }
  return out;
}

/// Tracking part of the objective (slack penalty and input regularization excluded).
inline double cost_V(const QpProblem& qp, const std::vector<EgoState>& states,
                     const Weights& w) {
  double v = 0.0;
  for (const auto& s : states) {
    v += w.lateral * (s.y - qp.y_des) * (s.y - qp.y_des) +
         w.speed * (s.v - qp.v_des) * (s.v - qp.v_des);
  }
  return v;
}

inline Trajectory solve(const QpProblem& qp, const PreferenceSpace& space,
                        const SolverConfig& cfg = {}) {
  const qp::Solution sol = qp::solve(qp.ocp, cfg.ipm);
  Trajectory t;
  t.strategy_id = qp.strategy_id;
  t.status = sol.status;
  t.iterations = sol.iterations;
  t.residuals = sol.residuals;
  const int n = qp.horizon();
  std::vector<qp::VecW> w = sol.w;
  w.back().setZero();
  const auto xs = qp::rollout(qp.ocp, w);
  t.states.reserve(xs.size());
  for (const auto& x : xs) t.states.push_back(EgoState::from(x));
  t.controls.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    t.controls.push_back({w[static_cast<std::size_t>(k)][0], w[static_cast<std::size_t>(k)][1]});
  }
  for (int k = 0; k <= n; ++k) {
    const StepSpace& sp = space.steps[static_cast<std::size_t>(k)];
    const EgoState& s = t.states[static_cast<std::size_t>(k)];
    t.max_slack = std::max({t.max_slack, sp.front.residual(s.x, s.y), sp.rear.residual(s.x, s.y),
                            s.y - sp.y_max, sp.y_min - s.y});
    for (const auto& h : sp.obstacles) t.max_slack = std::max(t.max_slack, h.residual(s.x, s.y));
  }
  t.cost_V = cost_V(qp, t.states, cfg.weights);
  t.cost_J = cost_J(t);
  t.feasible = t.status == qp::Status::Solved && std::isfinite(t.cost_J) &&
               t.max_slack <= cfg.slack_bound;
  return t;
}

/// Condensed form over z = [u_0 .. u_{N-1}, s_0 .. s_N] (controls, then the
/// per-step slack pairs): min 1/2 z'Hz + g'z + constant s.t. Gz <= h.
struct DenseQp {
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
  double constant = 0.0;
};

inline DenseQp condense(const qp::Problem& p) {
  const int n = p.horizon();
  const int nu = 2 * n;
  const int nz = nu + 2 * (n + 1);
  const int m = p.total_rows();
  DenseQp d;
  d.H = Eigen::MatrixXd::Zero(nz, nz);
  d.g = Eigen::VectorXd::Zero(nz);
  d.G = Eigen::MatrixXd::Zero(m, nz);
  d.h = Eigen::VectorXd::Zero(m);
  d.constant = p.constant;

  Eigen::MatrixXd S = Eigen::MatrixXd::Zero(kNx, nz);  // d x_k / d z
  StateVec xbar = p.x0;
  int row = 0;
  for (int k = 0; k <= n; ++k) {
    const qp::Stage& st = p.stages[static_cast<std::size_t>(k)];
    Eigen::MatrixXd Sw = Eigen::MatrixXd::Zero(qp::kNw, nz);  // d w_k / d z
    if (k < n) Sw.block<2, 2>(0, 2 * k).setIdentity();
    Sw.block<2, 2>(2, nu + 2 * k).setIdentity();

    d.H += S.transpose() * st.Q * S + Sw.transpose() * st.R * Sw;
    d.g += S.transpose() * (st.Q * xbar + st.q) + Sw.transpose() * st.r;
    d.constant += 0.5 * xbar.dot(st.Q * xbar) + st.q.dot(xbar);
    const int mk = st.rows();
    if (mk > 0) {
      d.G.middleRows(row, mk) = st.D * S + st.E * Sw;
      d.h.segment(row, mk) = st.d - st.D * xbar;
    }
    row += mk;
    if (k < n) {
      S = (p.A * S + p.B * Sw).eval();
      xbar = p.A * xbar + p.c;
    }
  }
  d.H = 0.5 * (d.H + d.H.transpose());
  return d;
}

/// Sparse triplet text of the condensed problem. Lines:
///   dims <nz> <rows>
///   const <value>
///   H <i> <j> <value>   (upper triangle, i <= j)
///   g <i> <value>
///   G <row> <j> <value>
///   h <row> <value>
/// Indices are zero-based; zero entries are omitted.
inline void write_qp_triplets(std::ostream& os, const DenseQp& d) {
  os << std::setprecision(17);
  os << "dims " << d.H.rows() << ' ' << d.G.rows() << '\n';
  os << "const " << d.constant << '\n';
  for (Eigen::Index j = 0; j < d.H.cols(); ++j) {
    for (Eigen::Index i = 0; i <= j; ++i) {
      if (d.H(i, j) != 0.0) os << "H " << i << ' ' << j << ' ' << d.H(i, j) << '\n';
    }
  }
  for (Eigen::Index i = 0; i < d.g.size(); ++i) {
    if (d.g[i] != 0.0) os << "g " << i << ' ' << d.g[i] << '\n';
  }
  for (Eigen::Index i = 0; i < d.G.rows(); ++i) {
    for (Eigen::Index j = 0; j < d.G.cols(); ++j) {
      if (d.G(i, j) != 0.0) os << "G " << i << ' ' << j << ' ' << d.G(i, j) << '\n';
    }
  }
  for (Eigen::Index i = 0; i < d.h.size(); ++i) {
    if (d.h[i] != 0.0) os << "h " << i << ' ' << d.h[i] << '\n';
  }
}

}  // namespace prefdrive
