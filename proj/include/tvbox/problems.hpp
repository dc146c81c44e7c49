#pragma once

// The three smooth objective families and their PDE solvers.
//
//   LinearTracking      f(u) = 1/2 ||y - y_d||^2,  -Lap y = u,       y = 0 on bdry
//   SemilinearTracking  f(u) = 1/2 ||y - y_d||^2,  -Lap y + y^3 = u, y = 0 on bdry
//   Denoising           f(u) = 1/2 ||u - y_d||^2   (identity state map)
//   LinearizedAt        f(u) = (g0, u) + 1/2 ||u - u_bar||^2, g0 = grad f(u_bar)
//
// The adjoint state p is the L2 Riesz representative of grad f in all cases.

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "tvbox/assembly.hpp"
#include "tvbox/errors.hpp"
#include "tvbox/kernels.hpp"

namespace tvbox {

enum class Family { LinearTracking, SemilinearTracking, Denoising, LinearizedAt };

inline const char* family_name(Family f) {
  switch (f) {
    case Family::LinearTracking: return "linear_tracking";
    case Family::SemilinearTracking: return "semilinear_tracking";
    case Family::Denoising: return "denoising";
    case Family::LinearizedAt: return "linearized";
  }
  return "?";
}

struct Bounds {
  std::vector<double> lower, upper;
  bool is_constant = true;
  double lower_const = 0.0, upper_const = 0.0;
  double min_gap = 0.0;

  static Bounds constants(const Mesh& m, double a, double b) {
    if (!std::isfinite(a) || !std::isfinite(b) || !(a < b))
      throw std::invalid_argument("Bounds: need finite lower < upper");
    Bounds bd;
    bd.lower.assign(m.n_nodes(), a);
    bd.upper.assign(m.n_nodes(), b);
    bd.is_constant = true;
    bd.lower_const = a;
    bd.upper_const = b;
    bd.min_gap = b - a;
    return bd;
  }

  static Bounds nodal(const Mesh& m, std::vector<double> lo, std::vector<double> up) {
    if (static_cast<int>(lo.size()) != m.n_nodes() ||
        static_cast<int>(up.size()) != m.n_nodes())
      throw std::invalid_argument("Bounds: nodal arrays must match the mesh");
    Bounds bd;
    bd.min_gap = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m.n_nodes(); ++i) {
      if (!std::isfinite(lo[i]) || !std::isfinite(up[i]) || !(lo[i] < up[i]))
        throw std::invalid_argument("Bounds: need finite lower < upper at every node");
      bd.min_gap = std::min(bd.min_gap, up[i] - lo[i]);
    }
    bd.lower = std::move(lo);
    bd.upper = std::move(up);
    bd.is_constant = false;
    return bd;
  }
};

struct ProblemSpec {
  Family family = Family::LinearTracking;
  double beta = 1e-4;          // TV weight
  NodalField y_d;              // tracking target (the noisy datum for denoising)
  Bounds bounds;
  // LinearizedAt only:
  std::optional<NodalField> u_bar;
  std::optional<NodalField> grad_at_ubar;

  void validate(const Mesh& m) const {
    if (!(beta >= 0.0) || !std::isfinite(beta))
      throw std::invalid_argument("ProblemSpec: beta must be finite and >= 0");
    if (y_d.mesh != &m || !y_d.all_finite())
      throw std::invalid_argument("ProblemSpec: y_d must be a finite field on the mesh");
    if (static_cast<int>(bounds.lower.size()) != m.n_nodes())
      throw std::invalid_argument("ProblemSpec: bounds not materialized on the mesh");
    if (family == Family::LinearizedAt && (!u_bar || !grad_at_ubar))
      throw std::invalid_argument("ProblemSpec: LinearizedAt needs u_bar and its gradient");
  }
};

struct StateTriple {
  NodalField y, p, u;
};

struct StateSolveStats {
  int iterations = 0;
  double residual = 0.0;
};

// Lumped diagonal coefficients of the second-order blocks.
struct HessianTerms {
  bool pde_coupled = false;        // tracking families: 3x3 block Newton system
  bool identity_curvature = false; // denoising / linearized: d2f = mass
  std::vector<double> reaction;    // 3 m_i y_i^2   (semilinear, else empty)
  std::vector<double> cross;       // 6 m_i y_i p_i (semilinear, else empty)
};

class Problem {
 public:
  Problem(const Fem& fem, ProblemSpec spec) : fem_(&fem), spec_(std::move(spec)) {
    spec_.validate(fem.mesh);
    if (spec_.family == Family::LinearTracking ||
        spec_.family == Family::SemilinearTracking)
      poisson_ = BandCholesky::factor(fem.stiffness_dirichlet);
  }

  const Fem& fem() const { return *fem_; }
  const Mesh& mesh() const { return fem_->mesh; }
  const ProblemSpec& spec() const { return spec_; }

  // Solve the state equation. y0 (optional) warm-starts the semilinear Newton.
  NodalField solve_state(const NodalField& u, const NodalField* y0 = nullptr,
                         StateSolveStats* stats = nullptr) const {
    require_same_mesh(u, mesh(), "solve_state");
    switch (spec_.family) {
      case Family::LinearTracking: {
        std::vector<double> rhs = fem_->mass.mul(u.v);
        fem_->zero_boundary(rhs);
        NodalField y(mesh());
        y.v = poisson_.solve(std::move(rhs));
        if (stats) *stats = {0, 0.0};
        return y;
      }
      case Family::SemilinearTracking:
        return solve_semilinear_state(u, y0, stats);
      case Family::Denoising:
      case Family::LinearizedAt: {
        if (stats) *stats = {0, 0.0};
        return u;  // identity state map
      }
    }
    throw std::logic_error("solve_state: unknown family");
  }

  NodalField solve_adjoint(const NodalField& y) const {
    require_same_mesh(y, mesh(), "solve_adjoint");
    switch (spec_.family) {
      case Family::LinearTracking: {
        std::vector<double> rhs = tracking_misfit_dual(y);
        fem_->zero_boundary(rhs);
        NodalField p(mesh());
        p.v = poisson_.solve(std::move(rhs));
        return p;
      }
      case Family::SemilinearTracking: {
        std::vector<double> rhs = tracking_misfit_dual(y);
        fem_->zero_boundary(rhs);
        BandCholesky chol = BandCholesky::factor(semilinear_jacobian(y));
        NodalField p(mesh());
        p.v = chol.solve(std::move(rhs));
        return p;
      }
      case Family::Denoising: {
        NodalField p(mesh());
        for (int i = 0; i < fem_->n(); ++i) p.v[i] = y.v[i] - spec_.y_d.v[i];
        return p;
      }
      case Family::LinearizedAt: {
        // here "y" carries the control; grad = g0 + (u - u_bar)
        NodalField p(mesh());
        for (int i = 0; i < fem_->n(); ++i)
          p.v[i] = spec_.grad_at_ubar->v[i] + (y.v[i] - spec_.u_bar->v[i]);
        return p;
      }
    }
    throw std::logic_error("solve_adjoint: unknown family");
  }

  // L2 Riesz representative of grad f(u); equals the adjoint state.
  NodalField reduced_gradient(const StateTriple& t) const {
    require_same_mesh(t.p, mesh(), "reduced_gradient");
    return t.p;
  }

  HessianTerms hessian_terms(const StateTriple& t) const {
    HessianTerms h;
    switch (spec_.family) {
      case Family::LinearTracking:
        h.pde_coupled = true;
        return h;
      case Family::SemilinearTracking: {
        h.pde_coupled = true;
        const int n = fem_->n();
        h.reaction.resize(n);
        h.cross.resize(n);
        for (int i = 0; i < n; ++i) {
          h.reaction[i] = 3.0 * fem_->lumped[i] * t.y.v[i] * t.y.v[i];
          h.cross[i] = 6.0 * fem_->lumped[i] * t.y.v[i] * t.p.v[i];
        }
        return h;
      }
      case Family::Denoising:
      case Family::LinearizedAt:
        h.identity_curvature = true;
        return h;
    }
    throw std::logic_error("hessian_terms: unknown family");
  }

  // Value of the smooth part f(u), given the matching state y.
  double smooth_value(const NodalField& u, const NodalField& y) const {
    switch (spec_.family) {
      case Family::LinearTracking:
      case Family::SemilinearTracking:
      case Family::Denoising: {
        std::vector<double> d(fem_->n());
        for (int i = 0; i < fem_->n(); ++i) d[i] = y.v[i] - spec_.y_d.v[i];
        return 0.5 * dot(d, fem_->mass.mul(d));
      }
      case Family::LinearizedAt: {
        std::vector<double> d(fem_->n());
        for (int i = 0; i < fem_->n(); ++i) d[i] = u.v[i] - spec_.u_bar->v[i];
        return dot(spec_.grad_at_ubar->v, fem_->mass.mul(u.v)) +
               0.5 * dot(d, fem_->mass.mul(d));
      }
    }
    throw std::logic_error("smooth_value: unknown family");
  }

  // Convex model of this problem around u_bar (same TV weight and bounds):
  // smooth part  u -> (grad f(u_bar), u) + 1/2 ||u - u_bar||^2.
  ProblemSpec linearized_objective(const NodalField& u_bar) const {
    require_same_mesh(u_bar, mesh(), "linearized_objective");
    StateSolveStats st;
    const NodalField y = solve_state(u_bar, nullptr, &st);
    const NodalField p = solve_adjoint(y);
    ProblemSpec lin;
    lin.family = Family::LinearizedAt;
    lin.beta = spec_.beta;
    lin.y_d = spec_.y_d;
    lin.bounds = spec_.bounds;
    lin.u_bar = u_bar;
    lin.grad_at_ubar = p;
    return lin;
  }

  // Dirichlet-eliminated Jacobian of the semilinear state operator at y.
  BandMatrix semilinear_jacobian(const NodalField& y) const {
    BandMatrix j = fem_->stiffness_dirichlet;
    for (int i = 0; i < fem_->n(); ++i)
      if (!fem_->boundary[i]) j.at(i, i) += 3.0 * fem_->lumped[i] * y.v[i] * y.v[i];
    return j;
  }

 private:
  std::vector<double> tracking_misfit_dual(const NodalField& y) const {
    std::vector<double> d(fem_->n());
    for (int i = 0; i < fem_->n(); ++i) d[i] = y.v[i] - spec_.y_d.v[i];
    return fem_->mass.mul(d);
  }

  // residual r(y) = M u - K y - M_L y^3 (vertex quadrature for the cubic term)
  std::vector<double> semilinear_residual(const NodalField& y,
                                          const std::vector<double>& mu) const {
    std::vector<double> r = fem_->stiffness.mul(y.v);
    for (int i = 0; i < fem_->n(); ++i)
      r[i] = mu[i] - r[i] - fem_->lumped[i] * y.v[i] * y.v[i] * y.v[i];
    fem_->zero_boundary(r);
    return r;
  }

  NodalField solve_semilinear_state(const NodalField& u, const NodalField* y0,
                                    StateSolveStats* stats) const {
    constexpr double tol = 1e-11;
    constexpr int max_iter = 50;
    const std::vector<double> mu = fem_->mass.mul(u.v);
    NodalField y = (y0 && y0->mesh == &mesh()) ? *y0 : NodalField(mesh());
    fem_->zero_boundary(y.v);

    std::vector<double> r = semilinear_residual(y, mu);
    double rnorm = fem_->dual_norm_lumped(r);
    int it = 0;
    while (rnorm > tol) {
      if (++it > max_iter)
        throw solver_error("semilinear state solve: no convergence after " +
                           std::to_string(max_iter) + " iterations, residual " +
                           std::to_string(rnorm));
      BandCholesky chol = BandCholesky::factor(semilinear_jacobian(y));
      std::vector<double> step = chol.solve(r);
      // damped update: halve the step while the residual does not decrease
      double s = 1.0;
      NodalField y_trial(mesh());
      std::vector<double> r_trial;
      double rnorm_trial = 0.0;
      for (int half = 0; half < 60; ++half) {
        for (int i = 0; i < fem_->n(); ++i) y_trial.v[i] = y.v[i] + s * step[i];
        r_trial = semilinear_residual(y_trial, mu);
        rnorm_trial = fem_->dual_norm_lumped(r_trial);
        if (rnorm_trial < rnorm || rnorm_trial <= tol) break;
        s *= 0.5;
      }
      if (!(rnorm_trial < rnorm) && rnorm_trial > tol)
        throw solver_error("semilinear state solve: damping stalled, residual " +
                           std::to_string(rnorm));
      y = y_trial;
      r = std::move(r_trial);
      rnorm = rnorm_trial;
    }
    if (stats) *stats = {it, rnorm};
    return y;
  }

  const Fem* fem_;
  ProblemSpec spec_;
  BandCholesky poisson_;
};

}  // namespace tvbox
