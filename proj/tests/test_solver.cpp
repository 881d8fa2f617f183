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

#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "prefdrive/solver.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace pd = prefdrive;
using namespace pd::testing;
using pd::Role;
using pd::testing::uniform_responses;
using pd::testing::vehicle;

namespace {

const pd::StrategyCatalog& cat() {
  static const pd::StrategyCatalog c = pd::catalog();
  return c;
}

}  // namespace

TEST(Assemble, DecisionDimensionAtDefaultHorizon) {
  pd::Scene s;
  s.road = {2, 3.5};
  s.ego = vehicle(0.0, s.road.lane_center(1));
  const auto& st = pd::strategy_by_id(cat(), 30);
  const auto sp = pd::build_space(st, s, uniform_responses(0.0));
  const auto x0 = ego_state(s);
  const auto qp = pd::assemble(st, s, sp, x0, pd::linearize(x0, 0.05));
  EXPECT_EQ(qp.control_dim(), 120);
  EXPECT_EQ(qp.slack_dim(), 122);
  const auto d = pd::condense(qp.ocp);
  EXPECT_EQ(d.H.rows(), 242);
  EXPECT_EQ(d.G.rows(), qp.ocp.total_rows());
}

TEST(Solve, CruisingAtDesiredStateCostsNothing) {
  pd::Scene s;
  s.road = {2, 3.5};
  s.ego = vehicle(0.0, s.road.lane_center(1), 45.0 * pd::kKphToMps);
  const auto& st = pd::strategy_by_id(cat(), 30);
  ASSERT_DOUBLE_EQ(st.v_des, 45.0 * pd::kKphToMps);
  const auto sp = pd::build_space(st, s, uniform_responses(0.0));
  const auto x0 = ego_state(s);
  const auto qp = pd::assemble(st, s, sp, x0, pd::linearize(x0, 0.05));
  const auto t = pd::solve(qp, sp);
  ASSERT_EQ(t.status, pd::qp::Status::Solved);
  EXPECT_NEAR(t.cost_V, 0.0, 1e-8);
  for (const auto& c : t.controls) {
    EXPECT_NEAR(c.j, 0.0, 1e-6);
    EXPECT_NEAR(c.gamma, 0.0, 1e-6);
  }
}

TEST(Assemble, EgoOutsideCorridorIsInfeasibleAtStart) {
  pd::Scene s;
  s.road = {2, 3.5};
  s.ego = vehicle(0.0, s.road.lane_center(0));
  s.target(Role::RLLC) = vehicle(10.0, s.road.lane_center(1), 10.0);
  const auto& st = pd::strategy_by_id(cat(), 1);
  const auto sp = pd::build_space(st, s, uniform_responses(2.5));
  const auto x0 = ego_state(s);
  EXPECT_THROW(pd::assemble(st, s, sp, x0, pd::linearize(x0, 0.05)), pd::InfeasibleAtStart);
}

// With every inequality inactive the QP is a linear least-squares problem in
// the controls. The oracle builds the control-to-state map by superposition
// of model steps and solves the normal equations.
TEST(Solve, MatchesUnconstrainedLeastSquares) {
  for (int n : {1, 4}) {
    const auto& st = pd::strategy_by_id(cat(), 29);
    pd::Scene s;
    s.road = {3, 3.5};
    s.ego = vehicle(0.0, s.road.lane_center(1) + 0.3, st.v_des - 1.5);
    pd::SpaceConfig sc;
    sc.horizon = n;
    sc.dt = 0.3;
    const auto sp = pd::build_space(st, s, uniform_responses(0.0), sc);
    const auto x0 = ego_state(s, 0.1, 0.002);
    const auto model = pd::linearize(x0, sc.dt);
    pd::SolverConfig cfg;
    const auto qp = pd::assemble(st, s, sp, x0, model, cfg);
    const auto t = pd::solve(qp, sp, cfg);
    ASSERT_EQ(t.status, pd::qp::Status::Solved);

    auto roll = [&](const Eigen::VectorXd& u) {
      std::vector<pd::StateVec> xs{x0.vec()};
      for (int k = 0; k < n; ++k) xs.push_back(model.step(xs.back(), u.segment<2>(2 * k)));
      return xs;
    };
    // Residual vector r(u) = M u + r0 with rows sqrt(W)(y - y_des), sqrt(W)(v - v_des), sqrt(reg) u.
    const auto& w = cfg.weights;
    auto residual = [&](const Eigen::VectorXd& u) {
      const auto xs = roll(u);
      Eigen::VectorXd r(2 * (n + 1) + 2 * n);
      for (int k = 0; k <= n; ++k) {
        r[2 * k] = std::sqrt(w.lateral) * (xs[k][1] - qp.y_des);
        r[2 * k + 1] = std::sqrt(w.speed) * (xs[k][2] - qp.v_des);
      }
      for (int k = 0; k < n; ++k) {
        r[2 * (n + 1) + 2 * k] = std::sqrt(w.speed * w.jerk) * u[2 * k];
        r[2 * (n + 1) + 2 * k + 1] = std::sqrt(w.speed * w.steer_rate) * u[2 * k + 1];
      }
      return r;
    };
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(2 * n);
    const Eigen::VectorXd r0 = residual(zero);
    Eigen::MatrixXd M(r0.size(), 2 * n);
    for (int i = 0; i < 2 * n; ++i) {
      Eigen::VectorXd e = zero;
      e[i] = 1.0;
      M.col(i) = residual(e) - r0;
    }
    const Eigen::VectorXd u_star = -(M.transpose() * M).ldlt().solve(M.transpose() * r0);
    // The oracle only applies while no bound is active.
    for (int k = 0; k < n; ++k) {
      ASSERT_LT(std::abs(u_star[2 * k]), cfg.bounds.j_max);
      ASSERT_LT(std::abs(u_star[2 * k + 1]), cfg.bounds.gamma_max);
    }
    for (const auto& x : roll(u_star)) {
      ASSERT_LT(x[2], cfg.bounds.v_max);
      ASSERT_LT(x[4], cfg.bounds.a_max);
    }
    // Stationarity tolerance over the smallest Hessian eigenvalue (jerk
    // regularization) bounds the control error.
    for (int k = 0; k < n; ++k) {
      EXPECT_NEAR(t.controls[k].j, u_star[2 * k], 1e-5) << "n=" << n << " k=" << k;
      EXPECT_NEAR(t.controls[k].gamma, u_star[2 * k + 1], 1e-5) << "n=" << n << " k=" << k;
    }
  }
}

TEST(Solve, BeatsExhaustiveGridOnSmallInstances) {
  std::mt19937_64 rng(20240611);
  const pd::SolverConfig cfg;
  int checked = 0, draws = 0;
  while (checked < 50) {
    ASSERT_LT(++draws, 5000);
    const int n = 1 + checked % 5;
    Instance in;
    const auto rs = pd::testing::random_responses(rng);
    if (!random_instance(rng, n, 0.3, in, rs, cfg)) continue;
    const double oracle = grid_oracle(in, cfg);
    if (!std::isfinite(oracle)) continue;
    const auto sol = pd::qp::solve(in.qp.ocp, cfg.ipm);
    ASSERT_EQ(sol.status, pd::qp::Status::Solved) << "draw " << draws;
    EXPECT_LE(sol.residuals.max(), 1e-6);
    const auto dense = pd::condense(in.qp.ocp);
    const auto kkt = dense_kkt(dense, stacked_decision(sol), stacked_duals(sol));
    EXPECT_LE(kkt.stationarity, 1e-6) << "draw " << draws;
    EXPECT_LE(kkt.primal, 1e-6) << "draw " << draws;
    EXPECT_LE(kkt.complementarity, 1e-6) << "draw " << draws;

    const auto t = pd::solve(in.qp, in.space, cfg);
    const double ours = evaluate(in, controls_of(t), cfg, 1e-6);
    EXPECT_LE(ours, oracle + 1e-3) << "draw " << draws << " n=" << n;
    ++checked;
  }
}

TEST(Condense, ObjectiveMatchesStageForm) {
  std::mt19937_64 rng(5);
  const pd::SolverConfig cfg;
  int checked = 0;
  while (checked < 20) {
    Instance in;
    if (!random_instance(rng, 60, 0.05, in, pd::testing::random_responses(rng), cfg)) continue;
    const auto sol = pd::qp::solve(in.qp.ocp, cfg.ipm);
    const auto d = pd::condense(in.qp.ocp);
    const Eigen::VectorXd z = stacked_decision(sol);
    auto w = sol.w;
    w.back().head<2>().setZero();
    const double stage = pd::qp::objective(in.qp.ocp, pd::qp::rollout(in.qp.ocp, w), w);
    const double dense = 0.5 * z.dot(d.H * z) + d.g.dot(z) + d.constant;
    EXPECT_NEAR(dense, stage, 1e-6 * std::max(1.0, std::abs(stage)));
    ++checked;
  }
}

TEST(Condense, HessianIsPositiveSemidefinite) {
  std::mt19937_64 rng(11);
  const pd::SolverConfig cfg;
  int checked = 0;
  while (checked < 40) {
    Instance in;
    if (!random_instance(rng, 60, 0.05, in, pd::testing::random_responses(rng), cfg)) continue;
    const auto d = pd::condense(in.qp.ocp);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(d.H, Eigen::EigenvaluesOnly);
    const double top = es.eigenvalues().maxCoeff();
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-9 * top);
    EXPECT_TRUE(d.G.allFinite());
    EXPECT_TRUE(d.h.allFinite());
    ++checked;
  }
}

TEST(Solve, TrajectoryInvariantsOnRandomScenes) {
  std::mt19937_64 rng(3);
  const pd::SolverConfig cfg;
  int checked = 0;
  while (checked < 60) {
    Instance in;
    if (!random_instance(rng, 60, 0.05, in, pd::testing::random_responses(rng), cfg)) continue;
    const auto t = pd::solve(in.qp, in.space, cfg);
    ASSERT_EQ(t.status, pd::qp::Status::Solved)
        << "x0 " << in.x0.vec().transpose() << " id " << in.qp.strategy_id;
    EXPECT_LE(t.residuals.max(), 1e-6);
    EXPECT_EQ(t.states.front(), in.x0);
    EXPECT_EQ(t.states.size(), 61u);
    EXPECT_EQ(t.controls.size(), 60u);
    EXPECT_DOUBLE_EQ(t.cost_J, pd::cost_J(t.states));
    if (!t.feasible) continue;
    const auto& b = cfg.bounds;
    for (int k = 0; k <= 60; ++k) {
      const auto& s = t.states[k];
      EXPECT_TRUE(pd::contains(in.space, k, s.x, s.y, t.max_slack + 1e-9));
      if (k >= cfg.speed_from) {
        EXPECT_LE(s.v, b.v_max + 1e-6);
        EXPECT_GE(s.v, b.v_min - 1e-6);
      }
      if (k >= cfg.accel_from) {
        EXPECT_LE(s.a, b.a_max + 1e-6);
        EXPECT_GE(s.a, b.a_min - 1e-6);
      }
    }
    for (const auto& c : t.controls) {
      EXPECT_LE(std::abs(c.j), b.j_max + 1e-6);
      EXPECT_LE(std::abs(c.gamma), b.gamma_max + 1e-6);
    }
    ++checked;
  }
}

TEST(Solve, CostScaleDoesNotMoveTheMinimizer) {
  pd::Scene s;
  s.road = {3, 3.5};
  s.ego = vehicle(0.0, s.road.lane_center(1), 11.0);
  for (int id : pd::applicable_ids(cat(), s)) {
    const auto& st = pd::strategy_by_id(cat(), id);
    const auto sp = pd::build_space(st, s, uniform_responses(0.0));
    const auto x0 = ego_state(s);
    const auto model = pd::linearize(x0, 0.05);
    pd::SolverConfig base, scaled;
    scaled.weights.lateral *= 7.0;
    scaled.weights.speed *= 7.0;
    const auto a = pd::solve(pd::assemble(st, s, sp, x0, model, base), sp, base);
    const auto b = pd::solve(pd::assemble(st, s, sp, x0, model, scaled), sp, scaled);
    ASSERT_EQ(a.status, pd::qp::Status::Solved);
    ASSERT_EQ(b.status, pd::qp::Status::Solved);
    for (std::size_t k = 0; k < a.states.size(); ++k) {
      EXPECT_NEAR(a.states[k].x, b.states[k].x, 1e-5) << "id " << id;
      EXPECT_NEAR(a.states[k].y, b.states[k].y, 1e-5) << "id " << id;
      EXPECT_NEAR(a.states[k].v, b.states[k].v, 1e-5) << "id " << id;
    }
  }
}

TEST(Solve, ZeroMarginsOnEmptyRoadLeaveSlacksInactive) {
  for (int lanes : {2, 3}) {
    for (int lane = 0; lane < lanes; ++lane) {
      pd::Scene s;
      s.road = {lanes, 3.5};
      s.ego = vehicle(0.0, s.road.lane_center(lane), 14.0);
      for (int id : pd::applicable_ids(cat(), s)) {
        const auto& st = pd::strategy_by_id(cat(), id);
        const auto sp = pd::build_space(st, s, uniform_responses(0.0));
        const auto x0 = ego_state(s);
        const auto sol =
            pd::qp::solve(pd::assemble(st, s, sp, x0, pd::linearize(x0, 0.05)).ocp);
        ASSERT_EQ(sol.status, pd::qp::Status::Solved);
        for (const auto& w : sol.w) {
          EXPECT_LE(w[2], 1e-6) << "id " << id;
          EXPECT_LE(w[3], 1e-6) << "id " << id;
        }
      }
    }
  }
}

TEST(Solve, RepeatedSolvesAreBitwiseIdentical) {
  std::mt19937_64 rng(99);
  const pd::SolverConfig cfg;
  int checked = 0;
  while (checked < 10) {
    Instance in;
    if (!random_instance(rng, 60, 0.05, in, pd::testing::random_responses(rng), cfg)) continue;
    const auto a = pd::solve(in.qp, in.space, cfg);
    const auto b = pd::solve(in.qp, in.space, cfg);
    ASSERT_EQ(a.states.size(), b.states.size());
    for (std::size_t k = 0; k < a.states.size(); ++k) EXPECT_EQ(a.states[k], b.states[k]);
    EXPECT_EQ(a.cost_J, b.cost_J);
    ++checked;
  }
}

TEST(Solve, UnreachableToleranceReturnsBestAcceptableIterate) {
  std::mt19937_64 rng(7);
  pd::SolverConfig cfg;
  cfg.ipm.tol = 0.0;
  int checked = 0;
  while (checked < 5) {
    Instance in;
    if (!random_instance(rng, 60, 0.05, in, pd::testing::random_responses(rng), cfg)) continue;
    const auto t = pd::solve(in.qp, in.space, cfg);
    if (t.status != pd::qp::Status::Solved) continue;
    EXPECT_LE(t.residuals.max(), cfg.ipm.acceptable_tol);
    ++checked;
  }
}

TEST(CostJ, Arithmetic) {
  std::vector<pd::EgoState> states(61);
  for (auto& s : states) s.v = pd::kDriveSpeed;
  EXPECT_DOUBLE_EQ(pd::cost_J(states), 0.0);
  for (auto& s : states) s.v = 0.0;
  // 61 * (50/3)^2
  EXPECT_NEAR(pd::cost_J(states), 16944.444444, 1e-5);
}

TEST(Condense, TripletDumpRoundTrips) {
  pd::Scene s;
  s.road = {2, 3.5};
  s.ego = vehicle(0.0, s.road.lane_center(1));
  s.target(Role::ELLC) = vehicle(25.0, s.road.lane_center(1), 10.0);
  const auto& st = pd::strategy_by_id(cat(), 28);
  pd::SpaceConfig sc;
  sc.horizon = 8;
  const auto sp = pd::build_space(st, s, uniform_responses(5.0), sc);
  const auto x0 = ego_state(s);
  const auto d = pd::condense(pd::assemble(st, s, sp, x0, pd::linearize(x0, 0.05)).ocp);
  std::ostringstream os;
  pd::write_qp_triplets(os, d);

  std::istringstream is(os.str());
  std::string tag;
  long nz = 0, m = 0;
  is >> tag >> nz >> m;
  ASSERT_EQ(tag, "dims");
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nz, nz), G = Eigen::MatrixXd::Zero(m, nz);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(nz), h = Eigen::VectorXd::Zero(m);
  double constant = 0.0;
  while (is >> tag) {
    long i = 0, j = 0;
    double v = 0.0;
    if (tag == "const") {
      is >> constant;
    } else if (tag == "H") {
      is >> i >> j >> v;
      H(i, j) = H(j, i) = v;
    } else if (tag == "G") {
      is >> i >> j >> v;
      G(i, j) = v;
    } else if (tag == "g") {
      is >> i >> v;
      g[i] = v;
    } else if (tag == "h") {
      is >> i >> v;
      h[i] = v;
    } else {
      FAIL() << "unknown tag " << tag;
    }
  }
  EXPECT_EQ(H, d.H);
  EXPECT_EQ(G, d.G);
  EXPECT_EQ(g, d.g);
  EXPECT_EQ(h, d.h);
  EXPECT_EQ(constant, d.constant);
}
