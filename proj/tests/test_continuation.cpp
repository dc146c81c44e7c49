#include <doctest.h>

#include <cmath>
#include <random>

#include "tvbox/continuation.hpp"
#include "tvbox/invariants.hpp"

using namespace tvbox;

namespace {

NodalField indicator_target(const Mesh& m) {
  return interpolate(m, [](double x, double y) {
    return (std::abs(x) < 0.5 && std::abs(y) < 0.5) ? 1.0 : 0.0;
  });
}

NodalField random_field(const Mesh& m, unsigned seed, double amp = 1.0) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> d(-amp, amp);
  NodalField u(m);
  for (auto& v : u.v) v = d(rng);
  return u;
}

}  // namespace

TEST_CASE("config validation") {
  ContinuationConfig bad;
  bad.eps0 = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ContinuationConfig{};
  bad.rho_factor = 0.9;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = ContinuationConfig{};
  bad.eps_factor = 1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("denoising with open bounds recovers the datum in one iteration") {
  const Fem fem = Fem::build({0, 1, 0, 1}, 8, 8);
  ProblemSpec spec;
  spec.family = Family::Denoising;
  spec.beta = 0.0;
  spec.y_d = random_field(fem.mesh, 3, 0.7);
  spec.bounds = Bounds::constants(fem.mesh, -1000.0, 1000.0);
  Problem prob(fem, spec);

  ContinuationConfig cfg;
  cfg.max_outer = 1;
  const ContinuationResult res = run_continuation(prob, cfg, NewtonConfig{});
  REQUIRE(res.records.size() == 1);
  CHECK(res.records[0].R_rho == 0.0);
  CHECK(res.records[0].lambda_a_norm == 0.0);
  CHECK(res.records[0].lambda_b_norm == 0.0);
  for (int i = 0; i < fem.n(); ++i)
    CHECK(res.final_triple.u.v[i] == doctest::Approx(spec.y_d.v[i]).epsilon(1e-10));
}

TEST_CASE("schedule follows the exact geometric law") {
  const Fem fem = Fem::build({-1, 1, -1, 1}, 8, 8);
  ProblemSpec spec;
  spec.family = Family::Denoising;
  spec.beta = 0.05;
  spec.y_d = random_field(fem.mesh, 5, 2.0);
  spec.bounds = Bounds::constants(fem.mesh, -1.0, 1.0);
  Problem prob(fem, spec);

  ContinuationConfig cfg;
  cfg.max_outer = 9;
  cfg.tol_R_eps = 1e-30;  // force a full schedule
  const ContinuationResult res = run_continuation(prob, cfg, NewtonConfig{});
  REQUIRE(res.records.size() == 9);
  for (size_t i = 0; i < res.records.size(); ++i) {
    const auto& r = res.records[i];
    CHECK(r.k == static_cast<int>(i) + 1);
    CHECK(r.eps == 0.5 * std::pow(0.5, static_cast<double>(i)));
    CHECK(r.rho == 2.0 * std::pow(2.0, static_cast<double>(i)));
    CHECK(r.R_eps >= -1e-14);
    if (i > 0) {
      CHECK(r.eps < res.records[i - 1].eps);
      CHECK(r.rho > res.records[i - 1].rho);
    }
  }
  CHECK(res.status == RunStatus::MaxOuterReached);

  // j-history of every subproblem is non-increasing (Armijo acceptance)
  for (const auto& rep : res.newton_reports)
    for (size_t i = 1; i < rep.j_history.size(); ++i)
      CHECK(rep.j_history[i] <= rep.j_history[i - 1]);
}

TEST_CASE("coarse tracking run converges and satisfies the a-priori bounds") {
  const Fem fem = Fem::build({-1, 1, -1, 1}, 16, 16);
  ProblemSpec spec;
  spec.family = Family::LinearTracking;
  spec.beta = 1e-4;
  spec.y_d = indicator_target(fem.mesh);
  spec.bounds = Bounds::constants(fem.mesh, -10.0, 10.0);
  Problem prob(fem, spec);

  ContinuationConfig cfg;
  cfg.max_outer = 25;
  int hook_calls = 0;
  int invariant_failures = 0;
  const ContinuationResult res = run_continuation(
      prob, cfg, NewtonConfig{},
      [&](const ContinuationRecord& rec, const StateTriple& t) {
        ++hook_calls;
        for (const auto& r : check_stationarity_invariants(prob, rec.eps, rec.rho, t))
          if (r.failed()) ++invariant_failures;
      });

  CHECK(res.status == RunStatus::Converged);
  CHECK(hook_calls == static_cast<int>(res.records.size()));
  CHECK(invariant_failures == 0);
  CHECK(res.records.back().R_eps <= cfg.tol_R_eps);
  CHECK(res.records.back().R_rho <= cfg.tol_R_rho);
  CHECK(res.records.size() >= 8);  // several parameter reductions are needed

  // the stationarity residual at the final converged subproblem is tiny
  {
    const auto& rec = res.records.back();
    PenalizedObjective pen(prob, {rec.eps, rec.rho});
    const KktResidual F = pen.assemble_F(res.final_triple);
    CHECK(fem.dual_norm_lumped(F.r_u.v) <= 1e-8);
  }

  // the control must exploit the full box on this example
  double umax = 0.0, umin = 0.0;
  for (double v : res.final_triple.u.v) {
    umax = std::max(umax, v);
    umin = std::min(umin, v);
  }
  CHECK(umax > 5.0);
  CHECK(umin < -5.0);
  CHECK(umax <= 10.0 + 1e-3);  // penalty keeps violations tiny
  CHECK(umin >= -10.0 - 1e-3);
}

TEST_CASE("compute_errors fills monotone distances to the final iterate") {
  const Fem fem = Fem::build({-1, 1, -1, 1}, 12, 12);
  ProblemSpec spec;
  spec.family = Family::LinearTracking;
  spec.beta = 1e-4;
  spec.y_d = indicator_target(fem.mesh);
  spec.bounds = Bounds::constants(fem.mesh, -10.0, 10.0);
  Problem prob(fem, spec);

  ContinuationConfig cfg;
  cfg.max_outer = 14;
  cfg.tol_R_eps = 1e-30;  // run the whole schedule
  ContinuationResult res = run_continuation(prob, cfg, NewtonConfig{});
  compute_errors(res);

  REQUIRE(res.records.size() == 14);
  CHECK(!res.records.back().E_u.has_value());
  CHECK(!res.records.back().E_J.has_value());
  for (size_t i = 0; i + 1 < res.records.size(); ++i) {
    REQUIRE(res.records[i].E_u.has_value());
    REQUIRE(res.records[i].E_J.has_value());
    CHECK(*res.records[i].E_u >= 0.0);
  }
  // distances shrink over the last few iterations
  const size_t nrec = res.records.size();
  for (size_t i = nrec - 5; i + 2 < nrec; ++i)
    CHECK(*res.records[i + 1].E_u < *res.records[i].E_u);

  // E_u against a manual norm computation
  const auto& u_ref = res.iterates.back();
  const auto& u0 = res.iterates[0];
  std::vector<double> diff(u_ref.size());
  for (int i = 0; i < u_ref.size(); ++i) diff[i] = u0.v[i] - u_ref.v[i];
  CHECK(*res.records[0].E_u == doctest::Approx(fem.l2_norm(diff)).epsilon(1e-13));
}

TEST_CASE("linearized continuation fixes a constant anchor") {
  const Fem fem = Fem::build({-1, 1, -1, 1}, 8, 8);
  ProblemSpec spec;
  spec.family = Family::Denoising;
  spec.beta = 1e-3;
  spec.y_d = NodalField(fem.mesh, 0.75);  // grad f(u_bar) = 0 at u_bar = y_d
  spec.bounds = Bounds::constants(fem.mesh, -50.0, 50.0);
  Problem prob(fem, spec);

  const NodalField u_bar(fem.mesh, 0.75);
  ContinuationConfig cfg;
  cfg.max_outer = 10;
  const ContinuationResult res = run_linearized(prob, u_bar, cfg, NewtonConfig{});
  for (int i = 0; i < fem.n(); ++i)
    CHECK(res.final_triple.u.v[i] == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("non-constant bounds are tracked nodally") {
  const Fem fem = Fem::build({-1, 1, -1, 1}, 10, 10);
  ProblemSpec spec;
  spec.family = Family::LinearTracking;
  spec.beta = 1e-4;
  spec.y_d = indicator_target(fem.mesh);
  const auto ub = interpolate(fem.mesh, [](double x, double y) {
    return 8.0 * std::sin(3.14159265358979324 * x) * std::sin(3.14159265358979324 * y);
  });
  spec.bounds = Bounds::nodal(fem.mesh, std::vector<double>(fem.n(), -100.0), ub.v);
  CHECK(!spec.bounds.is_constant);
  CHECK(spec.bounds.min_gap > 90.0);
  Problem prob(fem, spec);

  ContinuationConfig cfg;
  cfg.max_outer = 8;
  cfg.tol_R_eps = 1e-30;
  const ContinuationResult res = run_continuation(prob, cfg, NewtonConfig{});
  REQUIRE(res.records.size() == 8);

  // the control respects the oscillating upper bound up to the penalty slack
  const auto& u = res.final_triple.u;
  const double rho_final = res.records.back().rho;
  for (int i = 0; i < fem.n(); ++i)
    CHECK(u.v[i] <= spec.bounds.upper[i] + 1.0 / rho_final);

  // multiplier norms recorded; disjointness applies (gap > 1/rho^2 everywhere)
  for (const auto& rec : res.records) CHECK(rec.lambda_b_norm >= 0.0);
  const auto inv = check_stationarity_invariants(
      prob, res.records.back().eps, res.records.back().rho, res.final_triple);
  for (const auto& r : inv) {
    if (r.name == "disjoint_supports") CHECK(r.pass);
    if (r.name == "multiplier_norm_growth") CHECK(r.observational);
  }
}
