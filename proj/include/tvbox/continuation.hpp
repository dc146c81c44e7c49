#pragma once

// Outer continuation loop: solve the penalized subproblem for a geometric
// schedule (eps_k, rho_k), warm-starting each solve from the previous
// iterate, and stop once both residuals meet their tolerances:
//     R_rho_k <= tol_R_rho   and   R_eps_k <= tol_R_eps.
//
// Iterations are indexed k = 1, 2, ... with
//     eps_k = eps0 * eps_factor^(k-1),   rho_k = rho0 * rho_factor^(k-1),
// so a run of N subproblems with the default schedule ends at
// eps = 2^-N, rho = 2^N.

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tvbox/newton.hpp"
#include "tvbox/penalized.hpp"

namespace tvbox {

struct ContinuationConfig {
  double eps0 = 0.5;
  double eps_factor = 0.5;
  double rho0 = 2.0;
  double rho_factor = 2.0;
  double tol_R_rho = 1e-4;
  double tol_R_eps = 1e-3;
  int max_outer = 40;

  void validate() const {
    if (!(eps0 > 0.0 && eps0 < 1.0))
      throw std::invalid_argument("ContinuationConfig: eps0 must lie in (0,1)");
    if (!(eps_factor > 0.0 && eps_factor < 1.0))
      throw std::invalid_argument("ContinuationConfig: eps_factor must lie in (0,1)");
    if (!(rho0 > 0.0) || !(rho_factor > 1.0))
      throw std::invalid_argument("ContinuationConfig: need rho0 > 0, rho_factor > 1");
    if (!(tol_R_rho > 0.0) || !(tol_R_eps > 0.0) || max_outer < 1)
      throw std::invalid_argument("ContinuationConfig: bad tolerances");
  }

  bool operator==(const ContinuationConfig&) const = default;

  double eps_at(int k) const { return eps0 * std::pow(eps_factor, k - 1); }
  double rho_at(int k) const { return rho0 * std::pow(rho_factor, k - 1); }
};

struct ContinuationRecord {
  int k = 0;
  double eps = 0.0, rho = 0.0;
  double R_eps = 0.0, R_rho = 0.0;
  double J_penalized = 0.0;  // j_{eps,rho}(u_k)
  double J_exact = 0.0;      // f(u_k) + beta ||grad u_k||_L1
  int newton_iters = 0;
  int linesearch_total = 0;
  double lambda_a_norm = 0.0, lambda_b_norm = 0.0;  // lumped L2
  std::optional<double> E_u, E_J;  // filled by compute_errors, absent for k_final
};

enum class RunStatus { Converged, MaxOuterReached, NewtonStagnation };

inline const char* run_status_name(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "converged";
    case RunStatus::MaxOuterReached: return "max_outer_reached";
    case RunStatus::NewtonStagnation: return "newton_stagnation";
  }
  return "?";
}

struct ContinuationResult {
  RunStatus status = RunStatus::MaxOuterReached;
  StateTriple final_triple;
  std::vector<ContinuationRecord> records;
  std::vector<NodalField> iterates;  // u_k per record
  std::vector<NewtonReport> newton_reports;
  int total_newton = 0;
  std::string message;
};

using IterationHook =
    std::function<void(const ContinuationRecord&, const StateTriple&)>;

inline ContinuationResult run_continuation(const Problem& prob,
                                           const ContinuationConfig& cfg,
                                           const NewtonConfig& ncfg,
                                           const IterationHook& hook = {}) {
  cfg.validate();
  ncfg.validate();
  const Fem& fem = prob.fem();
  ContinuationResult res;

  NodalField u(fem.mesh);  // start from zero
  for (int k = 1; k <= cfg.max_outer; ++k) {
    const double eps = cfg.eps_at(k);
    const double rho = cfg.rho_at(k);
    PenalizedObjective pen(prob, {eps, rho});

    StateTriple t;
    NewtonReport rep;
    try {
      std::tie(t, rep) = newton_solve(pen, u, ncfg);
    } catch (const stagnation_error& e) {
      res.status = RunStatus::NewtonStagnation;
      res.message = "outer iteration " + std::to_string(k) + ": " + e.what();
      return res;
    }

    ContinuationRecord rec;
    rec.k = k;
    rec.eps = eps;
    rec.rho = rho;
    rec.R_eps = residual_R_eps(eps, t.u);
    rec.R_rho = residual_R_rho(fem, rho, t.u, prob.spec().bounds);
    rec.J_penalized = prob.smooth_value(t.u, t.y) +
                      prob.spec().beta * pen.tv_term(t.u) + pen.penalty_term(t.u);
    rec.J_exact = exact_objective(prob, t.u, t.y);
    rec.newton_iters = rep.iterations;
    rec.linesearch_total = rep.linesearch_total;
    const NodalField la = lambda_a(rho, t.u, prob.spec().bounds.lower);
    const NodalField lb = lambda_b(rho, t.u, prob.spec().bounds.upper);
    rec.lambda_a_norm = fem.l2_norm_lumped(la.v);
    rec.lambda_b_norm = fem.l2_norm_lumped(lb.v);

    res.total_newton += rep.iterations;
    res.records.push_back(rec);
    res.iterates.push_back(t.u);
    res.newton_reports.push_back(std::move(rep));
    if (hook) hook(rec, t);

    u = t.u;
    res.final_triple = std::move(t);

    if (rec.R_rho <= cfg.tol_R_rho && rec.R_eps <= cfg.tol_R_eps) {
      res.status = RunStatus::Converged;
      return res;
    }
  }
  res.status = RunStatus::MaxOuterReached;
  res.message = "no convergence within " + std::to_string(cfg.max_outer) +
                " outer iterations";
  return res;
}

// Continuation on the convex model around u_bar (same TV weight and bounds).
inline ContinuationResult run_linearized(const Problem& base, const NodalField& u_bar,
                                         const ContinuationConfig& cfg,
                                         const NewtonConfig& ncfg,
                                         const IterationHook& hook = {}) {
  const ProblemSpec lin = base.linearized_objective(u_bar);
  Problem lin_prob(base.fem(), lin);
  return run_continuation(lin_prob, cfg, ncfg, hook);
}

// Fill E_u = ||u_k - u_ref|| and E_J = |J_k - J_ref| against the final iterate
// of the run (left empty for the final record itself).
inline void compute_errors(ContinuationResult& res) {
  if (res.records.empty()) return;
  TVBOX_REQUIRE(res.records.size() == res.iterates.size(),
                "compute_errors: records and iterates out of sync");
  const NodalField& u_ref = res.iterates.back();
  const double J_ref = res.records.back().J_exact;
  std::vector<double> diff(u_ref.size());
  for (size_t r = 0; r + 1 < res.records.size(); ++r) {
    const NodalField& uk = res.iterates[r];
    if (uk.mesh != u_ref.mesh)
      throw std::invalid_argument("compute_errors: iterates on different meshes");
    double s = 0.0;
    for (int i = 0; i < u_ref.size(); ++i) diff[i] = uk.v[i] - u_ref.v[i];
    // consistent-mass L2 norm of the difference
    const Mesh& m = *u_ref.mesh;
    const double a6 = m.element_area / 6.0;
    for (const auto& tri : m.triangles) {
      const double v0 = diff[tri.v[0]], v1 = diff[tri.v[1]], v2 = diff[tri.v[2]];
      s += a6 * (v0 * v0 + v1 * v1 + v2 * v2 + v0 * v1 + v0 * v2 + v1 * v2);
    }
    res.records[r].E_u = std::sqrt(s);
    res.records[r].E_J = std::abs(res.records[r].J_exact - J_ref);
  }
  res.records.back().E_u.reset();
  res.records.back().E_J.reset();
}

}  // namespace tvbox
