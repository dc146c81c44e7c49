#include <doctest.h>

#include <cmath>
#include <random>

#include "tvbox/penalized.hpp"

using namespace tvbox;

namespace {

NodalField random_field(const Mesh& m, unsigned seed, double amp = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-amp, amp);
  NodalField u(m);
  for (auto& v : u.v) v = d(rng);
  return u;
}

ProblemSpec denoise_spec(const Mesh& m, double beta, double ua, double ub,
                         const NodalField& g) {
  ProblemSpec s;
  s.family = Family::Denoising;
  s.beta = beta;
  s.y_d = g;
  s.bounds = Bounds::constants(m, ua, ub);
  return s;
}

StateTriple exact_triple(const Problem& prob, const NodalField& u) {
  StateTriple t;
  t.u = u;
  t.y = prob.solve_state(u);
  t.p = prob.solve_adjoint(t.y);
  return t;
}

std::vector<double> stack_F(const KktResidual& F) {
  std::vector<double> s;
  s.reserve(3 * F.r_y.size());
  s.insert(s.end(), F.r_y.v.begin(), F.r_y.v.end());
  s.insert(s.end(), F.r_p.v.begin(), F.r_p.v.end());
  s.insert(s.end(), F.r_u.v.begin(), F.r_u.v.end());
  return s;
}

double euclid(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("eval_j on flat data reduces to the psi plateau") {
  const Fem fem = Fem::build({-1, 1, -1, 1}, 6, 6);
  NodalField g(fem.mesh, 0.0);
  Problem prob(fem, denoise_spec(fem.mesh, 1.0, -10, 10, g));
  PenalizedObjective pen(prob, {0.25, 8.0});
  // u = g constant: f = 0, penalty = 0, TV term = sqrt(eps)*|Omega|
  CHECK(pen.value(g) == doctest::Approx(0.5 * 4.0).epsilon(1e-13));
  CHECK(pen.penalty_term(g) == 0.0);
  CHECK(pen.tv_term(g) == doctest::Approx(0.5 * 4.0).epsilon(1e-13));

  // midpoint control with large rho: same plateau
  NodalField mid(fem.mesh, 0.0);
  PenalizedObjective pen2(prob, {0.25, 64.0});
  CHECK(pen2.penalty_term(mid) == 0.0);
  CHECK(pen2.tv_term(mid) == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("penalty term dominates the squared violation") {
  const Fem fem = Fem::build({-1, 1, -1, 1}, 7, 7);
  NodalField g(fem.mesh, 0.0);
  Problem prob(fem, denoise_spec(fem.mesh, 0.5, -1.0, 1.0, g));
  for (unsigned seed : {1u, 2u, 3u, 4u}) {
    const NodalField u = random_field(fem.mesh, seed, 3.0);
    for (double rho : {0.5, 2.0, 32.0}) {
      PenalizedObjective pen(prob, {0.25, rho});
      double viol = 0.0;  // lumped squared norms of both positive parts
      for (int i = 0; i < fem.n(); ++i) {
        const double da = std::max(0.0, -1.0 - u.v[i]);
        const double db = std::max(0.0, u.v[i] - 1.0);
        viol += fem.lumped[i] * (da * da + db * db);
      }
      CHECK(pen.penalty_term(u) >= 0.5 * rho * viol - 1e-13);
    }
  }
}

TEST_CASE("control residual equals central differences of eval_j") {
  const Fem fem = Fem::build({-1, 1, -1, 1}, 8, 8);
  NodalField target = random_field(fem.mesh, 11, 0.8);

  for (Family fam :
       {Family::LinearTracking, Family::SemilinearTracking, Family::Denoising}) {
    ProblemSpec spec;
    spec.family = fam;
    spec.beta = 1e-2;
    spec.y_d = target;
    spec.bounds = Bounds::constants(fem.mesh, -1.5, 1.5);
    Problem prob(fem, spec);
    PenalizedObjective pen(prob, {0.3, 2.0});

    const NodalField u = random_field(fem.mesh, 13, 2.0);  // bounds partly active
    const StateTriple t = exact_triple(prob, u);
    const KktResidual F = pen.assemble_F(t);
    // exact solves: state and adjoint residuals vanish
    CHECK(euclid(F.r_y.v) < 1e-10);
    CHECK(euclid(F.r_p.v) < 1e-10);

    for (unsigned seed = 0; seed < 3; ++seed) {
      const NodalField v = random_field(fem.mesh, 200 + seed);
      const double h = 1e-5;
      NodalField up(fem.mesh), um(fem.mesh);
      for (int i = 0; i < fem.n(); ++i) {
        up.v[i] = u.v[i] + h * v.v[i];
        um.v[i] = u.v[i] - h * v.v[i];
      }
      const double fd = (pen.value(up) - pen.value(um)) / (2 * h);
      const double an = dot(F.r_u.v, v.v);
      CHECK(std::abs(fd - an) / std::max(1e-10, std::abs(an)) < 1e-5);
    }
  }
}

TEST_CASE("denoising residual at u=g scales with the TV weight") {
  const Fem fem = Fem::build({0, 1, 0, 1}, 8, 8);
  const NodalField g = random_field(fem.mesh, 17, 0.5);
  double prev = -1.0, ratio0 = 0.0;
  for (double beta : {1e-4, 1e-6, 1e-8}) {
    Problem prob(fem, denoise_spec(fem.mesh, beta, -10, 10, g));
    PenalizedObjective pen(prob, {0.25, 2.0});
    const StateTriple t = exact_triple(prob, g);
    const KktResidual F = pen.assemble_F(t);
    const double r = fem.dual_norm_lumped(F.r_u.v);
    if (prev >= 0.0) CHECK(r < prev * 1.1e-2);  // linear decay in beta
    if (prev < 0.0) ratio0 = r / beta;
    CHECK(r / beta == doctest::Approx(ratio0).epsilon(1e-9));  // exactly linear
    prev = r;
  }
  CHECK(prev < 1e-5);
}

TEST_CASE("coupled operator is the derivative of F (Taylor remainder)") {
  const Fem fem = Fem::build({-1, 1, -1, 1}, 6, 6);
  NodalField target = random_field(fem.mesh, 23, 0.6);

  for (Family fam : {Family::LinearTracking, Family::SemilinearTracking}) {
    ProblemSpec spec;
    spec.family = fam;
    spec.beta = 0.05;
    spec.y_d = target;
    spec.bounds = Bounds::constants(fem.mesh, -50.0, 50.0);  // penalty inactive
    Problem prob(fem, spec);
    PenalizedObjective pen(prob, {0.3, 2.0});

    StateTriple t;  // generic point, not a solution
    t.u = random_field(fem.mesh, 31, 1.5);
    t.y = random_field(fem.mesh, 32, 0.7);
    t.p = random_field(fem.mesh, 33, 0.4);
    fem.zero_boundary(t.y.v);
    fem.zero_boundary(t.p.v);

    NodalField dy = random_field(fem.mesh, 41, 1.0);
    NodalField dp = random_field(fem.mesh, 42, 1.0);
    NodalField du = random_field(fem.mesh, 43, 1.0);
    fem.zero_boundary(dy.v);
    fem.zero_boundary(dp.v);

    const CoupledSystem sys = pen.assemble_G(t);
    std::vector<double> delta(3 * fem.n());
    for (int i = 0; i < fem.n(); ++i) {
      delta[CoupledSystem::index(i, CoupledSystem::kY)] = dy.v[i];
      delta[CoupledSystem::index(i, CoupledSystem::kP)] = dp.v[i];
      delta[CoupledSystem::index(i, CoupledSystem::kU)] = du.v[i];
    }
    const std::vector<double> Gd = sys.A.mul(delta);
    const std::vector<double> F0 = stack_F(pen.assemble_F(t));

    std::vector<double> errs;
    for (double h : {1e-3, 1e-4}) {
      StateTriple th;
      th.y = NodalField(fem.mesh);
      th.p = NodalField(fem.mesh);
      th.u = NodalField(fem.mesh);
      for (int i = 0; i < fem.n(); ++i) {
        th.y.v[i] = t.y.v[i] + h * dy.v[i];
        th.p.v[i] = t.p.v[i] + h * dp.v[i];
        th.u.v[i] = t.u.v[i] + h * du.v[i];
      }
      const std::vector<double> Fh = stack_F(pen.assemble_F(th));
      std::vector<double> rem(Fh.size());
      for (size_t k = 0; k < Fh.size(); ++k) {
        // stacked F order is (all y, all p, all u); Gd is interleaved
        const int node = static_cast<int>(k) % fem.n();
        const int comp = static_cast<int>(k) / fem.n();
        rem[k] = Fh[k] - F0[k] - h * Gd[CoupledSystem::index(node, comp)];
      }
      errs.push_back(euclid(rem));
    }
    if (fam == Family::LinearTracking) {
      // only the psi term is nonlinear; remainder still O(h^2)
      CHECK(errs[0] < 1e-5);
    }
    CHECK(errs[0] / errs[1] > 50.0);  // O(h^2) between h=1e-3 and 1e-4
    CHECK(errs[0] / errs[1] < 200.0);
  }
}

TEST_CASE("control block is elliptic: quadratic forms dominate 2 beta eps K") {
  const Fem fem = Fem::build({-1, 1, -1, 1}, 6, 6);
  NodalField g(fem.mesh, 0.0);
  const double beta = 0.05, eps = 0.3;
  Problem prob(fem, denoise_spec(fem.mesh, beta, -50, 50, g));
  PenalizedObjective pen(prob, {eps, 2.0});
  StateTriple t = exact_triple(prob, random_field(fem.mesh, 51, 1.0));
  const BandMatrix Hu = pen.control_block(t);
  for (unsigned seed = 0; seed < 20; ++seed) {
    const NodalField v = random_field(fem.mesh, 300 + seed);
    const double q = dot(v.v, Hu.mul(v.v));
    const double kq = dot(v.v, fem.stiffness.mul(v.v));
    CHECK(q >= 2.0 * beta * eps * kq - 1e-12);
    CHECK(q >= 0.0);
  }
}

TEST_CASE("semilinear coupled blocks at y=p=0 equal the linear ones bit for bit") {
  const Fem fem = Fem::build({-1, 1, -1, 1}, 5, 5);
  NodalField target = random_field(fem.mesh, 61, 0.5);
  ProblemSpec lin_spec, semi_spec;
  lin_spec.family = Family::LinearTracking;
  semi_spec.family = Family::SemilinearTracking;
  lin_spec.beta = semi_spec.beta = 1e-3;
  lin_spec.y_d = semi_spec.y_d = target;
  lin_spec.bounds = semi_spec.bounds = Bounds::constants(fem.mesh, -2, 2);
  Problem lin(fem, lin_spec), semi(fem, semi_spec);

  StateTriple t;
  t.u = random_field(fem.mesh, 62, 1.0);
  t.y = NodalField(fem.mesh, 0.0);
  t.p = NodalField(fem.mesh, 0.0);
  PenalizedObjective pl(lin, {0.4, 4.0}), ps(semi, {0.4, 4.0});
  const CoupledSystem a = pl.assemble_G(t);
  const CoupledSystem b = ps.assemble_G(t);
  const int N = a.A.n();
  REQUIRE(b.A.n() == N);
  for (int j = 0; j < N; ++j)
    for (int i = std::max(0, j - a.A.ku()); i <= std::min(N - 1, j + a.A.kl()); ++i)
      CHECK(a.A.at(i, j) == b.A.at(i, j));
}

TEST_CASE("residual R_eps") {
  const Fem fem = Fem::build({-1, 1, -1, 1}, 12, 12);
  NodalField c(fem.mesh, 3.7);
  CHECK(residual_R_eps(0.5, c) == 0.0);

  auto ux = interpolate(fem.mesh, [](double x, double) { return x; });
  // |grad u| = 1: R_eps = |Omega| (1 - 1/sqrt(1+eps)), eps = 1
  CHECK(residual_R_eps(1.0, ux) ==
        doctest::Approx(4.0 * (1.0 - 1.0 / std::sqrt(2.0))).epsilon(1e-12));
  CHECK(residual_R_eps(1e-12, ux) < 1e-6);

  for (unsigned seed = 0; seed < 10; ++seed) {
    const NodalField u = random_field(fem.mesh, 400 + seed, 2.0);
    for (double eps : {1e-6, 1e-2, 0.5})
      CHECK(residual_R_eps(eps, u) >= -1e-14);
  }
  CHECK_THROWS_AS(residual_R_eps(0.0, ux), std::invalid_argument);
}

TEST_CASE("residual R_rho vanishes for strictly feasible controls") {
  const Fem fem = Fem::build({-1, 1, -1, 1}, 9, 9);
  const Bounds b = Bounds::constants(fem.mesh, -2.0, 2.0);
  const double rho = 4.0;  // margin 1 > 1/(2 rho^2)
  const NodalField u = random_field(fem.mesh, 71, 0.9);
  CHECK(residual_R_rho(fem, rho, u, b) == 0.0);

  // active bounds give a positive residual
  const NodalField far = random_field(fem.mesh, 72, 4.0);
  CHECK(residual_R_rho(fem, rho, far, b) > 0.0);
}
