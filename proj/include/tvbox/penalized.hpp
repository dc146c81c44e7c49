#pragma once

// The penalized subproblem
//
//   j_{eps,rho}(u) = f(u) + beta * int psi_eps(grad u)
//                  + int (1/rho) ( M_rho(rho(u_a - u)) + M_rho(rho(u - u_b)) )
//
// together with its first-order residual F(y,p,u), the coupled Newton
// operator G, and the continuation residuals R_eps / R_rho.
//
// Discrete conventions: the TV term is integrated exactly per element, the
// penalty term and the multipliers use vertex quadrature, f uses the
// consistent mass matrix.

#include <array>
#include <cmath>
#include <vector>

#include "tvbox/assembly.hpp"
#include "tvbox/banded.hpp"
#include "tvbox/kernels.hpp"
#include "tvbox/problems.hpp"

namespace tvbox {

struct PenalizedParams {
  double epsilon = 0.5;
  double rho = 2.0;

  void validate() const {
    if (!(epsilon > 0.0) || !(epsilon < 1.0))
      throw std::invalid_argument("PenalizedParams: epsilon must lie in (0,1)");
    if (!(rho > 0.0))
      throw std::invalid_argument("PenalizedParams: rho must be > 0");
  }
};

struct KktResidual {
  NodalField r_y, r_p, r_u;  // dual vectors; r_y, r_p respect the boundary rows
};

// Coupled Newton system on (dy, dp, du), interleaved per node.
struct CoupledSystem {
  BandMatrix A;
  int n_nodes = 0;
  static constexpr int kY = 0, kP = 1, kU = 2;
  static int index(int node, int comp) { return 3 * node + comp; }
};

// R_eps = ||grad u||_L1 - <mu, grad u> with mu = grad u / sqrt(eps + |grad u|^2).
// Nonnegative since |mu| <= 1 element-wise.
inline double residual_R_eps(double eps, const NodalField& u) {
  if (!(eps > 0.0)) throw std::invalid_argument("residual_R_eps: eps must be > 0");
  const auto g = element_gradient(u);
  double s = 0.0;
  for (const auto& q : g.vec) {
    const double n2 = q[0] * q[0] + q[1] * q[1];
    const double n1 = std::sqrt(n2);
    s += n1 - n2 / std::sqrt(eps + n2);
  }
  return s * u.mesh->element_area;
}

// R_rho = ||(u_a-u)_+|| + ||(u-u_b)_+|| + (lambda_a, u_a-u) + (lambda_b, u-u_b),
// norms and pairings by vertex quadrature.
inline double residual_R_rho(const Fem& fem, double rho, const NodalField& u,
                             const Bounds& bounds) {
  require_same_mesh(u, fem.mesh, "residual_R_rho");
  const int n = fem.n();
  double viol_a = 0.0, viol_b = 0.0, pair_a = 0.0, pair_b = 0.0;
  for (int i = 0; i < n; ++i) {
    const double m = fem.lumped[i];
    const double da = bounds.lower[i] - u.v[i];  // positive when below u_a
    const double db = u.v[i] - bounds.upper[i];  // positive when above u_b
    viol_a += m * std::max(0.0, da) * std::max(0.0, da);
    viol_b += m * std::max(0.0, db) * std::max(0.0, db);
    pair_a += m * kernels::max_rho(rho, rho * da) * da;
    pair_b += m * kernels::max_rho(rho, rho * db) * db;
  }
  return std::sqrt(viol_a) + std::sqrt(viol_b) + pair_a + pair_b;
}

class PenalizedObjective {
 public:
  PenalizedObjective(const Problem& prob, PenalizedParams params)
      : prob_(&prob), params_(params) {
    params_.validate();
  }

  const Problem& problem() const { return *prob_; }
  const PenalizedParams& params() const { return params_; }
  double epsilon() const { return params_.epsilon; }
  double rho() const { return params_.rho; }

  double tv_term(const NodalField& u) const {
    const auto g = element_gradient(u);
    double s = 0.0;
    for (const auto& q : g.vec) s += kernels::psi(params_.epsilon, q[0], q[1]);
    return s * prob_->mesh().element_area;
  }

  double penalty_term(const NodalField& u) const {
    const Fem& fem = prob_->fem();
    const Bounds& b = prob_->spec().bounds;
    const double rho = params_.rho;
    double s = 0.0;
    for (int i = 0; i < fem.n(); ++i)
      s += fem.lumped[i] * (kernels::m_rho(rho, rho * (b.lower[i] - u.v[i])) +
                            kernels::m_rho(rho, rho * (u.v[i] - b.upper[i])));
    return s / rho;
  }

  // j_{eps,rho}(u). If y_io is given it warm-starts the state solve and
  // receives the solved state.
  double value(const NodalField& u, NodalField* y_io = nullptr) const {
    require_same_mesh(u, prob_->mesh(), "PenalizedObjective::value");
    const NodalField* warm = (y_io && y_io->mesh == &prob_->mesh()) ? y_io : nullptr;
    NodalField y = prob_->solve_state(u, warm);
    const double f = prob_->smooth_value(u, y);
    const double val = f + prob_->spec().beta * tv_term(u) + penalty_term(u);
    if (y_io) *y_io = std::move(y);
    return val;
  }

  // Control-equation residual (third row of F), as a dual vector:
  //   F_u = M p + beta * sum_T area psi'_eps(grad u).grad phi_i
  //       + M_lumped (lambda_b - lambda_a)
  std::vector<double> control_residual(const StateTriple& t) const {
    const Fem& fem = prob_->fem();
    const Mesh& m = prob_->mesh();
    const Bounds& b = prob_->spec().bounds;
    const double beta = prob_->spec().beta;
    const double rho = params_.rho;

    std::vector<double> r = fem.mass.mul(t.p.v);
    if (beta != 0.0) {
      const auto g = element_gradient(t.u);
      const double a = m.element_area;
      for (int tr = 0; tr < m.n_triangles(); ++tr) {
        const auto pg = kernels::psi_grad(params_.epsilon, g.vec[tr][0], g.vec[tr][1]);
        const auto& tri = m.triangles[tr].v;
        const auto& gb = m.grad_basis[tr];
        for (int i = 0; i < 3; ++i)
          r[tri[i]] += beta * a * (pg[0] * gb[i][0] + pg[1] * gb[i][1]);
      }
    }
    for (int i = 0; i < fem.n(); ++i) {
      const double la = kernels::max_rho(rho, rho * (b.lower[i] - t.u.v[i]));
      const double lb = kernels::max_rho(rho, rho * (t.u.v[i] - b.upper[i]));
      r[i] += fem.lumped[i] * (lb - la);
    }
    return r;
  }

  KktResidual assemble_F(const StateTriple& t) const {
    const Fem& fem = prob_->fem();
    const Mesh& m = prob_->mesh();
    const ProblemSpec& spec = prob_->spec();
    KktResidual F;
    F.r_y = NodalField(m);
    F.r_p = NodalField(m);
    F.r_u = NodalField(m);
    F.r_u.v = control_residual(t);

    switch (spec.family) {
      case Family::LinearTracking:
      case Family::SemilinearTracking: {
        const bool semi = spec.family == Family::SemilinearTracking;
        std::vector<double> ky = fem.stiffness.mul(t.y.v);
        std::vector<double> kp = fem.stiffness.mul(t.p.v);
        std::vector<double> mu = fem.mass.mul(t.u.v);
        std::vector<double> misfit(fem.n());
        for (int i = 0; i < fem.n(); ++i) misfit[i] = t.y.v[i] - spec.y_d.v[i];
        misfit = fem.mass.mul(misfit);
        for (int i = 0; i < fem.n(); ++i) {
          if (fem.boundary[i]) {
            F.r_y.v[i] = t.y.v[i];
            F.r_p.v[i] = t.p.v[i];
          } else {
            const double y3 = semi ? fem.lumped[i] * t.y.v[i] * t.y.v[i] * t.y.v[i] : 0.0;
            const double re = semi ? 3.0 * fem.lumped[i] * t.y.v[i] * t.y.v[i] : 0.0;
            F.r_y.v[i] = ky[i] + y3 - mu[i];
            F.r_p.v[i] = kp[i] + re * t.p.v[i] - misfit[i];
          }
        }
        break;
      }
      case Family::Denoising:
        for (int i = 0; i < fem.n(); ++i) {
          F.r_y.v[i] = t.y.v[i] - t.u.v[i];
          F.r_p.v[i] = t.p.v[i] - (t.y.v[i] - spec.y_d.v[i]);
        }
        break;
      case Family::LinearizedAt:
        for (int i = 0; i < fem.n(); ++i) {
          F.r_y.v[i] = t.y.v[i] - t.u.v[i];
          F.r_p.v[i] = t.p.v[i] - (spec.grad_at_ubar->v[i] + t.u.v[i] - spec.u_bar->v[i]);
        }
        break;
    }
    return F;
  }

  // beta-weighted psi'' stiffness plus the penalty diagonal rho(Lambda_b - Lambda_a),
  // i.e. the (u,u) block of G.
  BandMatrix control_block(const StateTriple& t) const {
    const Fem& fem = prob_->fem();
    const Mesh& m = prob_->mesh();
    const Bounds& b = prob_->spec().bounds;
    const double beta = prob_->spec().beta;
    const double rho = params_.rho;

    const auto g = element_gradient(t.u);
    std::vector<std::array<double, 3>> w(m.n_triangles());
    for (int tr = 0; tr < m.n_triangles(); ++tr) {
      auto h = kernels::psi_hess(params_.epsilon, g.vec[tr][0], g.vec[tr][1]);
      w[tr] = {beta * h[0], beta * h[1], beta * h[2]};
    }
    BandMatrix H = assemble_weighted_stiffness(m, w);
    for (int i = 0; i < fem.n(); ++i) {
      const double wa = kernels::max_rho_prime(rho, rho * (b.lower[i] - t.u.v[i]));
      const double wb = kernels::max_rho_prime(rho, rho * (t.u.v[i] - b.upper[i]));
      H.at(i, i) += rho * fem.lumped[i] * (wa + wb);
    }
    return H;
  }

  // Full linearization of F at the triple, as one banded operator on
  // (dy, dp, du) interleaved per node. Boundary rows/columns of dy and dp
  // are eliminated to identity.
  CoupledSystem assemble_G(const StateTriple& t) const {
    const Fem& fem = prob_->fem();
    const int n = fem.n();
    const HessianTerms ht = prob_->hessian_terms(t);
    const int nb = node_bandwidth(prob_->mesh());
    const int bw = 3 * nb + 2;
    CoupledSystem sys{BandMatrix(3 * n, bw, bw), n};
    BandMatrix& A = sys.A;

    const BandMatrix Hu = control_block(t);
    const auto bdry = [&](int i) { return fem.boundary[i] != 0; };

    // scatter a node-coupled block, optionally skipping eliminated rows/cols
    const auto put = [&](const BandMatrix& B, double scale, int rc, int cc,
                         bool skip_bdry_rows, bool skip_bdry_cols) {
      for (int j = 0; j < n; ++j) {
        if (skip_bdry_cols && bdry(j)) continue;
        const int ilo = std::max(0, j - B.ku());
        const int ihi = std::min(n - 1, j + B.kl());
        for (int i = ilo; i <= ihi; ++i) {
          if (skip_bdry_rows && bdry(i)) continue;
          const double v = B.at(i, j);
          if (v != 0.0)
            A.add(CoupledSystem::index(i, rc), CoupledSystem::index(j, cc), v * scale);
        }
      }
    };

    if (ht.pde_coupled) {
      // state row: K(+reaction) dy - M du
      put(fem.stiffness, 1.0, CoupledSystem::kY, CoupledSystem::kY, true, true);
      put(fem.mass, -1.0, CoupledSystem::kY, CoupledSystem::kU, true, false);
      // adjoint row: (-M + cross) dy + K(+reaction) dp
      put(fem.mass, -1.0, CoupledSystem::kP, CoupledSystem::kY, true, true);
      put(fem.stiffness, 1.0, CoupledSystem::kP, CoupledSystem::kP, true, true);
      for (int i = 0; i < n; ++i) {
        if (bdry(i)) {
          A.at(CoupledSystem::index(i, CoupledSystem::kY),
               CoupledSystem::index(i, CoupledSystem::kY)) = 1.0;
          A.at(CoupledSystem::index(i, CoupledSystem::kP),
               CoupledSystem::index(i, CoupledSystem::kP)) = 1.0;
          continue;
        }
        if (!ht.reaction.empty()) {
          A.add(CoupledSystem::index(i, CoupledSystem::kY),
                CoupledSystem::index(i, CoupledSystem::kY), ht.reaction[i]);
          A.add(CoupledSystem::index(i, CoupledSystem::kP),
                CoupledSystem::index(i, CoupledSystem::kP), ht.reaction[i]);
        }
        if (!ht.cross.empty())
          A.add(CoupledSystem::index(i, CoupledSystem::kP),
                CoupledSystem::index(i, CoupledSystem::kY), ht.cross[i]);
      }
      // control row: M dp + Hu du   (dp columns on the boundary are zero)
      put(fem.mass, 1.0, CoupledSystem::kU, CoupledSystem::kP, false, true);
    } else {
      // identity state map: dy - du = 0, and dp couples to dy (denoising)
      // or du (linearized model)
      const bool lin = prob_->spec().family == Family::LinearizedAt;
      for (int i = 0; i < n; ++i) {
        A.at(CoupledSystem::index(i, CoupledSystem::kY),
             CoupledSystem::index(i, CoupledSystem::kY)) = 1.0;
        A.at(CoupledSystem::index(i, CoupledSystem::kY),
             CoupledSystem::index(i, CoupledSystem::kU)) = -1.0;
        A.at(CoupledSystem::index(i, CoupledSystem::kP),
             CoupledSystem::index(i, CoupledSystem::kP)) = 1.0;
        A.at(CoupledSystem::index(i, CoupledSystem::kP),
             CoupledSystem::index(i, lin ? CoupledSystem::kU : CoupledSystem::kY)) = -1.0;
      }
      put(fem.mass, 1.0, CoupledSystem::kU, CoupledSystem::kP, false, false);
    }
    put(Hu, 1.0, CoupledSystem::kU, CoupledSystem::kU, false, false);
    return sys;
  }

  // Reduced Hessian for the identity-curvature families: M + Hu (SPD).
  BandMatrix reduced_spd_system(const StateTriple& t) const {
    BandMatrix H = control_block(t);
    const BandMatrix& M = prob_->fem().mass;
    const int n = prob_->fem().n();
    for (int j = 0; j < n; ++j)
      for (int i = std::max(0, j - M.ku()); i <= std::min(n - 1, j + M.kl()); ++i)
        H.add(i, j, M.at(i, j));
    return H;
  }

 private:
  const Problem* prob_;
  PenalizedParams params_;
};

// Exact-seminorm objective J(u) = f(u) + beta ||grad u||_L1 (TV not smoothed).
inline double exact_objective(const Problem& prob, const NodalField& u,
                              const NodalField& y) {
  return prob.smooth_value(u, y) + prob.spec().beta * grad_l1(u);
}

}  // namespace tvbox
