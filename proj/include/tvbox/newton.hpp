#pragma once

// Globalized Newton method for the penalized subproblems.
//
// Each iteration solves the coupled system G(y,p,u)(dy,dp,du) = -F(y,p,u)
// (state and adjoint residuals vanish because both are re-solved exactly),
// takes w = du, falls back to the negative lumped-L2 gradient when the
// directional derivative fails the descent test
//     grad j . w <= -eta ||w||^p,
// and backtracks with the Armijo rule  j(u + s w) - j(u) <= tau s grad j . w,
// s in {1, phi, phi^2, ...}. The iteration stops when the combined step norm
// ||du|| + ||dy|| + ||dp|| (L2) falls below step_tol.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "tvbox/penalized.hpp"

namespace tvbox {

struct NewtonConfig {
  double eta = 1e-8;      // descent-test constant
  double p_exp = 2.1;     // descent-test exponent
  double phi = 0.5;       // backtracking factor
  double tau = 1e-4;      // Armijo constant
  double step_tol = 1e-10;
  int max_iter = 200;
  int max_linesearch = 40;

  bool operator==(const NewtonConfig&) const = default;

  void validate() const {
    if (!(phi > 0.0 && phi < 1.0))
      throw std::invalid_argument("NewtonConfig: phi must lie in (0,1)");
    if (!(tau > 0.0 && tau < 0.5))
      throw std::invalid_argument("NewtonConfig: tau must lie in (0,1/2)");
    if (!(eta > 0.0)) throw std::invalid_argument("NewtonConfig: eta must be > 0");
    if (!(p_exp > 2.0)) throw std::invalid_argument("NewtonConfig: p must be > 2");
    if (!(step_tol > 0.0) || max_iter < 1 || max_linesearch < 1)
      throw std::invalid_argument("NewtonConfig: bad termination parameters");
  }
};

struct NewtonReport {
  int iterations = 0;
  int linesearch_total = 0;
  double final_step_norm = 0.0;
  bool converged = false;
  std::vector<double> j_history;
};

struct Direction {
  std::vector<double> w;        // control direction
  std::vector<double> dy, dp;   // Newton state/adjoint increments (empty on fallback)
  double slope = 0.0;           // grad j . w
  bool fallback = false;
  bool stationary = false;      // F_u = 0: nothing to do
};

namespace detail {

// Descent test of the globalization: keep the Newton direction only if
// grad j . w <= -eta ||w||_L2^p, otherwise replace it by the negative
// lumped-L2 Riesz representative of the gradient.
inline void apply_descent_test(Direction& d, const Fem& fem,
                               const std::vector<double>& F_u,
                               const NewtonConfig& cfg) {
  const double wnorm = fem.l2_norm(d.w);
  if (d.slope <= -cfg.eta * std::pow(wnorm, cfg.p_exp)) return;
  d.fallback = true;
  d.dy.clear();
  d.dp.clear();
  d.w.resize(F_u.size());
  d.slope = 0.0;
  for (size_t i = 0; i < F_u.size(); ++i) {
    d.w[i] = -F_u[i] / fem.lumped[i];
    d.slope += F_u[i] * d.w[i];
  }
}

inline double coupled_solve_direction(const CoupledSystem& sys,
                                      const std::vector<double>& F_u,
                                      std::vector<double>& dy,
                                      std::vector<double>& dp,
                                      std::vector<double>& du) {
  const int n = sys.n_nodes;
  std::vector<double> rhs(3 * n, 0.0);
  for (int i = 0; i < n; ++i) rhs[CoupledSystem::index(i, CoupledSystem::kU)] = -F_u[i];
  BandLU lu = BandLU::factor(sys.A);
  lu.solve_in_place(rhs);
  dy.resize(n);
  dp.resize(n);
  du.resize(n);
  for (int i = 0; i < n; ++i) {
    dy[i] = rhs[CoupledSystem::index(i, CoupledSystem::kY)];
    dp[i] = rhs[CoupledSystem::index(i, CoupledSystem::kP)];
    du[i] = rhs[CoupledSystem::index(i, CoupledSystem::kU)];
  }
  double slope = 0.0;
  for (int i = 0; i < n; ++i) slope += F_u[i] * du[i];
  return slope;
}

}  // namespace detail

// Direction from an already-assembled coupled system (lets tests tamper with
// the operator); applies the descent test and the steepest-descent fallback.
inline Direction direction_from_system(const PenalizedObjective& pen,
                                       const CoupledSystem& sys,
                                       const std::vector<double>& F_u,
                                       const NewtonConfig& cfg) {
  const Fem& fem = pen.problem().fem();
  Direction d;
  if (fem.dual_norm_lumped(F_u) == 0.0) {
    d.w.assign(F_u.size(), 0.0);
    d.stationary = true;
    return d;
  }
  d.slope = detail::coupled_solve_direction(sys, F_u, d.dy, d.dp, d.w);
  detail::apply_descent_test(d, fem, F_u, cfg);
  return d;
}

inline Direction compute_direction(const PenalizedObjective& pen,
                                   const StateTriple& t, const NewtonConfig& cfg) {
  const Fem& fem = pen.problem().fem();
  const std::vector<double> F_u = pen.control_residual(t);
  const HessianTerms ht = pen.problem().hessian_terms(t);

  if (!ht.pde_coupled) {
    // identity state map: the reduced Hessian M + Hu is banded and SPD
    Direction d;
    if (fem.dual_norm_lumped(F_u) == 0.0) {
      d.w.assign(F_u.size(), 0.0);
      d.stationary = true;
      return d;
    }
    BandCholesky chol = BandCholesky::factor(pen.reduced_spd_system(t));
    std::vector<double> rhs(F_u.size());
    for (size_t i = 0; i < F_u.size(); ++i) rhs[i] = -F_u[i];
    d.w = chol.solve(std::move(rhs));
    d.dy = d.w;  // dy = du through the identity map
    d.dp = d.w;
    d.slope = dot(F_u, d.w);
    detail::apply_descent_test(d, fem, F_u, cfg);
    return d;
  }
  const CoupledSystem sys = pen.assemble_G(t);
  return direction_from_system(pen, sys, F_u, cfg);
}

// Armijo backtracking on a 1-D slice. j_trial(s) evaluates the objective at
// step length s; slope is the directional derivative at s = 0 (must be < 0).
// Returns (sigma, j_at_sigma).
inline std::pair<double, double> armijo_backtrack(
    const std::function<double(double)>& j_trial, double j0, double slope,
    const NewtonConfig& cfg, int* trials = nullptr) {
  if (!(slope < 0.0))
    throw std::invalid_argument("armijo_backtrack: need a descent direction");
  double sigma = 1.0;
  for (int l = 0; l <= cfg.max_linesearch; ++l, sigma *= cfg.phi) {
    const double jt = j_trial(sigma);
    if (trials) ++(*trials);
    if (jt - j0 <= cfg.tau * sigma * slope) return {sigma, jt};
  }
  throw stagnation_error(
      "line search exhausted " + std::to_string(cfg.max_linesearch) +
      " backtracking steps (j0 = " + std::to_string(j0) +
      ", slope = " + std::to_string(slope) + ")");
}

// Standalone line search on the penalized objective along w (recomputes the
// slope from the current state/adjoint pair).
inline double line_search(const PenalizedObjective& pen, const NodalField& u,
                          const std::vector<double>& w, const NewtonConfig& cfg,
                          int* trials = nullptr) {
  cfg.validate();
  NodalField y = pen.problem().solve_state(u);
  NodalField p = pen.problem().solve_adjoint(y);
  const std::vector<double> F_u = pen.control_residual({y, p, u});
  const double slope = dot(F_u, w);
  const double j0 =
      pen.problem().smooth_value(u, y) + pen.problem().spec().beta * pen.tv_term(u) +
      pen.penalty_term(u);
  NodalField y_warm = y;
  NodalField trial(*u.mesh);
  const auto j_trial = [&](double s) {
    for (int i = 0; i < u.size(); ++i) trial.v[i] = u.v[i] + s * w[i];
    return pen.value(trial, &y_warm);
  };
  return armijo_backtrack(j_trial, j0, slope, cfg, trials).first;
}

inline std::pair<StateTriple, NewtonReport> newton_solve(
    const PenalizedObjective& pen, const NodalField& u0, const NewtonConfig& cfg) {
  cfg.validate();
  const Problem& prob = pen.problem();
  const Fem& fem = prob.fem();
  if (!u0.all_finite())
    throw std::invalid_argument("newton_solve: initial control not finite");

  StateTriple t;
  t.u = u0;
  t.y = prob.solve_state(t.u);
  t.p = prob.solve_adjoint(t.y);

  NewtonReport rep;
  double j = prob.smooth_value(t.u, t.y) + prob.spec().beta * pen.tv_term(t.u) +
             pen.penalty_term(t.u);
  rep.j_history.push_back(j);

  std::vector<double> diff(fem.n());
  const auto l2_of_diff = [&](const std::vector<double>& a,
                              const std::vector<double>& b) {
    for (int i = 0; i < fem.n(); ++i) diff[i] = a[i] - b[i];
    return fem.l2_norm(diff);
  };

  for (int it = 1; it <= cfg.max_iter; ++it) {
    Direction d = compute_direction(pen, t, cfg);
    if (d.stationary) {
      rep.converged = true;
      rep.final_step_norm = 0.0;
      break;
    }

    // Expected full-step movement; below step_tol the subproblem is done and
    // the Armijo decrease would drown in rounding noise.
    double predicted = fem.l2_norm(d.w);
    if (!d.dy.empty()) predicted += fem.l2_norm(d.dy) + fem.l2_norm(d.dp);
    if (predicted < cfg.step_tol) {
      rep.converged = true;
      rep.final_step_norm = predicted;
      break;
    }

    NodalField y_warm = t.y;
    NodalField trial(fem.mesh);
    const auto j_trial = [&](double s) {
      for (int i = 0; i < fem.n(); ++i) trial.v[i] = t.u.v[i] + s * d.w[i];
      return pen.value(trial, &y_warm);
    };
    double sigma = 0.0, j_new = 0.0;
    try {
      std::tie(sigma, j_new) =
          armijo_backtrack(j_trial, j, d.slope, cfg, &rep.linesearch_total);
    } catch (const stagnation_error&) {
      // The best possible Armijo decrease tau*|slope| is below the rounding
      // noise of j itself: the subproblem is solved to evaluation precision.
      const double noise =
          64.0 * std::numeric_limits<double>::epsilon() * (std::abs(j) + 1.0);
      if (cfg.tau * std::abs(d.slope) <= noise) {
        rep.converged = true;
        rep.final_step_norm = predicted;
        break;
      }
      throw;
    }
    rep.iterations = it;
    TVBOX_REQUIRE(j_new - j <= cfg.tau * sigma * d.slope,
                  "newton_solve: accepted step violates the Armijo condition");

    NodalField u_new(fem.mesh);
    for (int i = 0; i < fem.n(); ++i) u_new.v[i] = t.u.v[i] + sigma * d.w[i];
    NodalField y_new = prob.solve_state(u_new, &y_warm);
    NodalField p_new = prob.solve_adjoint(y_new);

    const double step = l2_of_diff(u_new.v, t.u.v) + l2_of_diff(y_new.v, t.y.v) +
                        l2_of_diff(p_new.v, t.p.v);
    t.u = std::move(u_new);
    t.y = std::move(y_new);
    t.p = std::move(p_new);
    j = j_new;
    rep.j_history.push_back(j);
    rep.final_step_norm = step;
    if (step < cfg.step_tol) {
      rep.converged = true;
      break;
    }
  }
  return {std::move(t), std::move(rep)};
}

}  // namespace tvbox
