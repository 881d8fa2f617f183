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

// Stage-wise convex QP for linear optimal control and a primal-dual
// interior-point solver (Mehrotra predictor-corrector) whose Newton systems
// are solved by a Riccati recursion.
//
//   min  sum_k 1/2 x_k'Q_k x_k + q_k'x_k + 1/2 w_k'R_k w_k + r_k'w_k
//   s.t. x_{k+1} = A x_k + B w_k + c,   x_0 given,
//        D_k x_k + E_k w_k <= d_k,       k = 0..N.
//
// w_N has no successor state; it is kept so every stage has the same shape.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "prefdrive/dynamics.hpp"

namespace prefdrive::qp {

inline constexpr int kNw = 4;
inline constexpr int kMaxRows = 32;

using VecX = StateVec;
using MatX = MatA;
using VecW = Eigen::Matrix<double, kNw, 1>;
using MatW = Eigen::Matrix<double, kNw, kNw>;
using MatWX = Eigen::Matrix<double, kNw, kNx>;
using MatXW = Eigen::Matrix<double, kNx, kNw>;
using RowsX = Eigen::Matrix<double, Eigen::Dynamic, kNx, Eigen::ColMajor, kMaxRows, kNx>;
using RowsW = Eigen::Matrix<double, Eigen::Dynamic, kNw, Eigen::ColMajor, kMaxRows, kNw>;
using VecR = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxRows, 1>;

struct Stage {
  MatX Q = MatX::Zero();
  VecX q = VecX::Zero();
  MatW R = MatW::Zero();
  VecW r = VecW::Zero();
  RowsX D = RowsX(0, kNx);
  RowsW E = RowsW(0, kNw);
  VecR d = VecR(0);

  [[nodiscard]] int rows() const { return static_cast<int>(d.size()); }

  void add_row(const Eigen::Matrix<double, 1, kNx>& dx, const Eigen::Matrix<double, 1, kNw>& dw,
               double rhs) {
    const int m = rows();
    D.conservativeResize(m + 1, Eigen::NoChange);
    E.conservativeResize(m + 1, Eigen::NoChange);
    d.conservativeResize(m + 1);
    D.row(m) = dx;
    E.row(m) = dw;
    d[m] = rhs;
  }
};

struct Problem {
  VecX x0 = VecX::Zero();
  MatX A = MatX::Identity();
  MatXW B = MatXW::Zero();
  VecX c = VecX::Zero();
  std::vector<Stage> stages;  // N + 1 entries
  double constant = 0.0;

  [[nodiscard]] int horizon() const { return static_cast<int>(stages.size()) - 1; }
  [[nodiscard]] int total_rows() const {
    int m = 0;
    for (const auto& s : stages) m += s.rows();
    return m;
  }
};

enum class Status { Solved, MaxIterations, NumericalFailure };

constexpr const char* to_string(Status s) {
  switch (s) {
    case Status::Solved: return "solved";
    case Status::MaxIterations: return "max_iterations";
    case Status::NumericalFailure: return "numerical_failure";
  }
  return "?";
}

struct Settings {
  int max_iterations = 100;
  double tol = 1e-7;
  double step_fraction = 0.995;
  /// Give up when the primal residual has not dropped by 1% for this many
  /// iterations (an infeasible problem stalls there).
  int stall_iterations = 12;
  /// Late iterations can lose accuracy as the barrier vanishes; the best
  /// iterate is returned as solved when its residuals meet this bound.
  double acceptable_tol = 1e-6;
};

struct Residuals {
  double stationarity = 0.0;
  double primal = 0.0;
  double complementarity = 0.0;

  [[nodiscard]] double max() const { return std::max({stationarity, primal, complementarity}); }
};

struct Solution {
  Status status = Status::NumericalFailure;
  int iterations = 0;
  std::vector<VecX> x;   // k = 0..N
  std::vector<VecW> w;   // k = 0..N
  std::vector<VecR> lambda;
  std::vector<VecR> slack;  // inequality slacks t = d - Dx - Ew at convergence
  Residuals residuals;
  double objective = 0.0;
};

/// States obtained by rolling the dynamics forward from x0 under w.
inline std::vector<VecX> rollout(const Problem& p, const std::vector<VecW>& w) {
  const int n = p.horizon();
  std::vector<VecX> x(static_cast<std::size_t>(n) + 1);
  x[0] = p.x0;
  for (int k = 0; k < n; ++k) x[k + 1] = p.A * x[k] + p.B * w[k] + p.c;
  return x;
}

inline double objective(const Problem& p, const std::vector<VecX>& x, const std::vector<VecW>& w) {
  double f = p.constant;
  for (std::size_t k = 0; k < p.stages.size(); ++k) {
    const Stage& s = p.stages[k];
    f += 0.5 * x[k].dot(s.Q * x[k]) + s.q.dot(x[k]) + 0.5 * w[k].dot(s.R * w[k]) + s.r.dot(w[k]);
  }
  return f;
}

namespace detail {

struct Workspace {
  int n = 0;
  std::vector<Eigen::LLT<MatW>> llt;
  std::vector<MatWX> Hwx;
  std::vector<MatWX> K;
  std::vector<VecW> kf;
  std::vector<VecX> gx;      // linear term for x per stage
  std::vector<VecW> gw;      // linear term for w per stage
  std::vector<VecR> W;       // lambda / t per row
  std::vector<VecX> dx;
  std::vector<VecW> dw;

  explicit Workspace(int horizon)
      : n(horizon),
        llt(static_cast<std::size_t>(horizon) + 1),
        Hwx(static_cast<std::size_t>(horizon) + 1),
        K(static_cast<std::size_t>(horizon) + 1),
        kf(static_cast<std::size_t>(horizon) + 1),
        gx(static_cast<std::size_t>(horizon) + 1),
        gw(static_cast<std::size_t>(horizon) + 1),
        W(static_cast<std::size_t>(horizon) + 1),
        dx(static_cast<std::size_t>(horizon) + 1),
        dw(static_cast<std::size_t>(horizon) + 1) {}
};

/// Factorizes the Riccati recursion for the barrier-augmented Hessian.
/// Returns false if a stage Hessian is not positive definite.
inline bool factor(const Problem& p, Workspace& ws) {
  const int n = ws.n;
  MatX P;
  for (int k = n; k >= 0; --k) {
    const Stage& s = p.stages[static_cast<std::size_t>(k)];
    const auto& W = ws.W[static_cast<std::size_t>(k)];
    const RowsW WE = W.asDiagonal() * s.E;
    MatX Qt = s.Q + s.D.transpose() * (W.asDiagonal() * s.D);
    MatW Hww = s.R + s.E.transpose() * WE;
    MatWX Hwx = WE.transpose() * s.D;
    if (k < n) {
      const MatXW PB = P * p.B;
      Hww += p.B.transpose() * PB;
      Hwx += PB.transpose() * p.A;
      Qt += p.A.transpose() * P * p.A;
    }
    auto& llt = ws.llt[static_cast<std::size_t>(k)];
    llt.compute(Hww);
    if (llt.info() != Eigen::Success) return false;
    ws.Hwx[static_cast<std::size_t>(k)] = Hwx;
    const MatWX K = -llt.solve(Hwx);
    ws.K[static_cast<std::size_t>(k)] = K;
    P = Qt + Hwx.transpose() * K;
    P = 0.5 * (P + P.transpose()).eval();
  }
  return true;
}

/// Solves the Newton system for the linear terms in ws.gx / ws.gw using the
/// stored factorization; fills ws.dx / ws.dw.
inline void solve(const Problem& p, Workspace& ws) {
  const int n = ws.n;
  VecX pk = VecX::Zero();
  for (int k = n; k >= 0; --k) {
    const auto ku = static_cast<std::size_t>(k);
    VecW hw = ws.gw[ku];
    VecX qx = ws.gx[ku];
    if (k < n) {
      hw += p.B.transpose() * pk;
      qx += p.A.transpose() * pk;
    }
    ws.kf[ku] = -ws.llt[ku].solve(hw);
    pk = qx + ws.Hwx[ku].transpose() * ws.kf[ku];
  }
  ws.dx[0].setZero();
  for (int k = 0; k <= n; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    ws.dw[ku] = ws.K[ku] * ws.dx[ku] + ws.kf[ku];
    if (k < n) ws.dx[ku + 1] = p.A * ws.dx[ku] + p.B * ws.dw[ku];
  }
}

inline double max_step(const VecR& v, const VecR& dv) {
  double a = std::numeric_limits<double>::infinity();
  for (int i = 0; i < v.size(); ++i) {
    if (dv[i] < 0.0) a = std::min(a, -v[i] / dv[i]);
  }
  return a;
}

}  // namespace detail

/// KKT residuals of a primal-dual point. Stationarity is measured on the
/// reduced gradient after eliminating states through the dynamics, primal
/// feasibility on max(0, Dx + Ew - d), complementarity on max |lambda_i s_i|
/// with s_i = d_i - (Dx + Ew)_i.
inline Residuals kkt_residuals(const Problem& p, const std::vector<VecX>& x,
                               const std::vector<VecW>& w, const std::vector<VecR>& lambda) {
  const int n = p.horizon();
  Residuals r;
  VecX mu = VecX::Zero();
  for (int k = n; k >= 0; --k) {
    const auto ku = static_cast<std::size_t>(k);
    const Stage& s = p.stages[ku];
    const VecR& lam = lambda[ku];
    VecW gw = s.R * w[ku] + s.r + s.E.transpose() * lam;
    if (k < n) gw += p.B.transpose() * mu;
    r.stationarity = std::max(r.stationarity, gw.cwiseAbs().maxCoeff());
    VecX gx = s.Q * x[ku] + s.q + s.D.transpose() * lam;
    mu = gx + (k < n ? (p.A.transpose() * mu).eval() : VecX::Zero().eval());
    const VecR g = s.D * x[ku] + s.E * w[ku] - s.d;
    for (int i = 0; i < g.size(); ++i) {
      r.primal = std::max(r.primal, g[i]);
      r.complementarity = std::max(r.complementarity, std::abs(lam[i] * g[i]));
      if (lam[i] < 0.0) r.primal = std::max(r.primal, -lam[i]);
    }
  }
  return r;
}

inline Solution solve(const Problem& p, const Settings& st = {}) {
  const int n = p.horizon();
  const auto stages = static_cast<std::size_t>(n) + 1;
  Solution sol;
  detail::Workspace ws(n);

  std::vector<VecW> w(stages, VecW::Zero());
  std::vector<VecX> x = rollout(p, w);
  std::vector<VecR> lam(stages), t(stages), rp(stages), dlam(stages), dt(stages), rc(stages);
  int m_total = 0;
  for (std::size_t k = 0; k < stages; ++k) {
    const Stage& s = p.stages[k];
    const VecR slack = s.d - s.D * x[k] - s.E * w[k];
    t[k] = slack.cwiseMax(1.0);
    lam[k] = VecR::Ones(s.rows());
    m_total += s.rows();
  }

  struct Iterate {
    std::vector<VecX> x;
    std::vector<VecW> w;
    std::vector<VecR> lam, t;
  };
  std::optional<Iterate> best;
  double best_res = std::numeric_limits<double>::infinity();

  auto finish = [&](Status status, int iters) {
    if (status != Status::Solved && best && best_res <= st.acceptable_tol) {
      x = best->x;
      w = best->w;
      lam = best->lam;
      t = best->t;
      status = Status::Solved;
    }
    sol.status = status;
    sol.iterations = iters;
    sol.x = x;
    sol.w = w;
    sol.lambda = lam;
    sol.slack = t;
    sol.residuals = kkt_residuals(p, x, w, lam);
    sol.objective = objective(p, x, w);
    return sol;
  };

  // Gradient of the objective plus inequality multipliers, per stage.
  auto lagrangian_gradient = [&](std::size_t k, VecX& gx, VecW& gw, const VecR& dual) {
    const Stage& s = p.stages[k];
    gx = s.Q * x[k] + s.q + s.D.transpose() * dual;
    gw = s.R * w[k] + s.r + s.E.transpose() * dual;
  };

  double best_rp = std::numeric_limits<double>::infinity();
  int best_iter = 0;
  for (int iter = 0; iter < st.max_iterations; ++iter) {
    double mu = 0.0;
    for (std::size_t k = 0; k < stages; ++k) {
      const Stage& s = p.stages[k];
      rp[k] = s.D * x[k] + s.E * w[k] + t[k] - s.d;
      mu += lam[k].dot(t[k]);
    }
    mu = m_total > 0 ? mu / m_total : 0.0;

    const Residuals res = kkt_residuals(p, x, w, lam);
    if (!std::isfinite(res.max())) return finish(Status::NumericalFailure, iter);
    if (res.max() <= st.tol) return finish(Status::Solved, iter);
    if (res.max() < best_res) {
      best_res = res.max();
      best = Iterate{x, w, lam, t};
    }
    double rp_norm = 0.0;
    for (const auto& r : rp) rp_norm = std::max(rp_norm, r.size() ? r.cwiseAbs().maxCoeff() : 0.0);
    if (rp_norm < 0.99 * best_rp) {
      best_rp = rp_norm;
      best_iter = iter;
    } else if (rp_norm > st.tol && iter - best_iter >= st.stall_iterations) {
      return finish(Status::MaxIterations, iter);
    }

    for (std::size_t k = 0; k < stages; ++k) ws.W[k] = lam[k].cwiseQuotient(t[k]);
    if (!detail::factor(p, ws)) return finish(Status::NumericalFailure, iter);

    // Newton direction for a given complementarity target rc (= lambda*t - sigma*mu
    // plus the corrector term).
    auto direction = [&]() {
      for (std::size_t k = 0; k < stages; ++k) {
        const VecR v = ws.W[k].cwiseProduct(rp[k]) - rc[k].cwiseQuotient(t[k]);
        const Stage& s = p.stages[k];
        lagrangian_gradient(k, ws.gx[k], ws.gw[k], lam[k]);
        ws.gx[k] += s.D.transpose() * v;
        ws.gw[k] += s.E.transpose() * v;
      }
      detail::solve(p, ws);
      for (std::size_t k = 0; k < stages; ++k) {
        const Stage& s = p.stages[k];
        const VecR gdz = s.D * ws.dx[k] + s.E * ws.dw[k];
        dlam[k] = ws.W[k].cwiseProduct(gdz + rp[k]) - rc[k].cwiseQuotient(t[k]);
        dt[k] = -rp[k] - gdz;
      }
    };
    auto step_limit = [&]() {
      double a = 1.0;
      for (std::size_t k = 0; k < stages; ++k) {
        a = std::min({a, detail::max_step(t[k], dt[k]), detail::max_step(lam[k], dlam[k])});
      }
      return a;
    };

    // Predictor.
    for (std::size_t k = 0; k < stages; ++k) rc[k] = lam[k].cwiseProduct(t[k]);
    direction();
    const double a_aff = step_limit();
    double mu_aff = 0.0;
    for (std::size_t k = 0; k < stages; ++k) {
      mu_aff += (t[k] + a_aff * dt[k]).dot(lam[k] + a_aff * dlam[k]);
    }
    mu_aff = m_total > 0 ? mu_aff / m_total : 0.0;
    const double sigma = mu > 0.0 ? std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3) : 0.0;

    // Corrector.
    for (std::size_t k = 0; k < stages; ++k) {
      rc[k] = lam[k].cwiseProduct(t[k]) + dt[k].cwiseProduct(dlam[k]) -
              VecR::Constant(t[k].size(), sigma * mu);
    }
    direction();
    const double alpha = std::min(1.0, st.step_fraction * step_limit());
    if (!(alpha > 0.0) || !std::isfinite(alpha)) return finish(Status::NumericalFailure, iter);
    for (std::size_t k = 0; k < stages; ++k) {
      x[k] += alpha * ws.dx[k];
      w[k] += alpha * ws.dw[k];
      lam[k] += alpha * dlam[k];
      t[k] += alpha * dt[k];
    }
  }
  const Residuals res = kkt_residuals(p, x, w, lam);
  return finish(res.max() <= st.tol ? Status::Solved : Status::MaxIterations, st.max_iterations);
}

}  // namespace prefdrive::qp
