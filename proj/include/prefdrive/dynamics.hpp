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
#include <cmath>

#include <Eigen/Core>

#include "prefdrive/scenario.hpp"

namespace prefdrive {

inline constexpr int kNx = 6;
inline constexpr int kNu = 2;

using StateVec = Eigen::Matrix<double, kNx, 1>;
using ControlVec = Eigen::Matrix<double, kNu, 1>;
using MatA = Eigen::Matrix<double, kNx, kNx>;
using MatB = Eigen::Matrix<double, kNx, kNu>;

struct EgoState {
  double x = 0.0;
  double y = 0.0;
  double v = 0.0;
  double psi = 0.0;
  double a = 0.0;
  double delta = 0.0;

  [[nodiscard]] StateVec vec() const {
    StateVec s;
    s << x, y, v, psi, a, delta;
    return s;
  }
  static EgoState from(const StateVec& s) { return {s[0], s[1], s[2], s[3], s[4], s[5]}; }

  friend bool operator==(const EgoState&, const EgoState&) = default;
};

struct ControlInput {
  double j = 0.0;
  double gamma = 0.0;

  [[nodiscard]] ControlVec vec() const { return ControlVec(j, gamma); }
  static ControlInput from(const ControlVec& u) { return {u[0], u[1]}; }

  friend bool operator==(const ControlInput&, const ControlInput&) = default;
};

struct Bounds {
  double v_min = 0.0, v_max = 60.0 * kKphToMps;
  double psi_min = -12.0 * kDegToRad, psi_max = 12.0 * kDegToRad;
  double a_min = -4.0, a_max = 2.0;
  double delta_min = -32.0 * kDegToRad, delta_max = 32.0 * kDegToRad;
  double j_min = -6.0, j_max = 6.0;
  double gamma_min = -0.346, gamma_max = 0.346;
};

struct VehicleParams {
  double wheelbase = 2.7;
};

/// Continuous-time kinematic bicycle model.
inline StateVec derivative(const StateVec& s, const ControlVec& u, const VehicleParams& p = {}) {
  StateVec d;
  d << s[2] * std::cos(s[3]), s[2] * std::sin(s[3]), s[4], s[2] / p.wheelbase * std::tan(s[5]),
      u[0], u[1];
  return d;
}

inline EgoState derivative(const EgoState& s, const ControlInput& u, const VehicleParams& p = {}) {
  return EgoState::from(derivative(s.vec(), u.vec(), p));
}

inline MatA jacobian_state(const StateVec& s, const VehicleParams& p = {}) {
  const double v = s[2], psi = s[3], delta = s[5];
  const double c = std::cos(psi), sn = std::sin(psi), t = std::tan(delta);
  MatA J = MatA::Zero();
  J(0, 2) = c;
  J(0, 3) = -v * sn;
  J(1, 2) = sn;
  J(1, 3) = v * c;
  J(2, 4) = 1.0;
  J(3, 2) = t / p.wheelbase;
  J(3, 5) = v / p.wheelbase * (1.0 + t * t);
  return J;
}

inline MatB jacobian_input() {
  MatB J = MatB::Zero();
  J(4, 0) = 1.0;
  J(5, 1) = 1.0;
  return J;
}

/// Affine discrete model s[k+1] = A s[k] + B u[k] + c.
struct LinearModel {
  MatA A = MatA::Identity();
  MatB B = MatB::Zero();
  StateVec c = StateVec::Zero();
  double dt = 0.05;

  [[nodiscard]] StateVec step(const StateVec& s, const ControlVec& u) const {
    return A * s + B * u + c;
  }
};

/// Jacobian linearization about (s0, u = 0), discretized with forward Euler.
inline LinearModel linearize(const StateVec& s0, double dt, const VehicleParams& p = {}) {
  const MatA Jx = jacobian_state(s0, p);
  LinearModel m;
  m.dt = dt;
  m.A = MatA::Identity() + dt * Jx;
  m.B = dt * jacobian_input();
  m.c = dt * (derivative(s0, ControlVec::Zero(), p) - Jx * s0);
  return m;
}

inline LinearModel linearize(const EgoState& s0, double dt, const VehicleParams& p = {}) {
  return linearize(s0.vec(), dt, p);
}

inline StateVec clamp(const StateVec& s, const Bounds& b = {}) {
  StateVec o = s;
  o[2] = std::clamp(o[2], b.v_min, b.v_max);
  o[3] = std::clamp(o[3], b.psi_min, b.psi_max);
  o[4] = std::clamp(o[4], b.a_min, b.a_max);
  o[5] = std::clamp(o[5], b.delta_min, b.delta_max);
  return o;
}

inline EgoState clamp(const EgoState& s, const Bounds& b = {}) {
  return EgoState::from(clamp(s.vec(), b));
}

inline ControlVec clamp(const ControlVec& u, const Bounds& b = {}) {
  return ControlVec(std::clamp(u[0], b.j_min, b.j_max),
                    std::clamp(u[1], b.gamma_min, b.gamma_max));
}

inline ControlInput clamp(const ControlInput& u, const Bounds& b = {}) {
  return ControlInput::from(clamp(u.vec(), b));
}

/// One classical fourth-order Runge-Kutta step with zero-order-hold input.
inline StateVec rk4_step(const StateVec& s, const ControlVec& u, double dt,
                         const VehicleParams& p = {}) {
  const StateVec k1 = derivative(s, u, p);
  const StateVec k2 = derivative(s + 0.5 * dt * k1, u, p);
  const StateVec k3 = derivative(s + 0.5 * dt * k2, u, p);
  const StateVec k4 = derivative(s + dt * k3, u, p);
  return s + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline EgoState rk4_step(const EgoState& s, const ControlInput& u, double dt,
                         const VehicleParams& p = {}) {
  return EgoState::from(rk4_step(s.vec(), u.vec(), dt, p));
}

}  // namespace prefdrive
