#include <doctest.h>

#include <cmath>
#include <random>

#include "tvbox/kernels.hpp"
#include "tvbox/mesh.hpp"

using namespace tvbox;
using namespace tvbox::kernels;

namespace {
// deterministic sample points covering small, moderate and large arguments
std::vector<std::array<double, 2>> sample_points(int count, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> mag(-4.0, 1.5);
  std::uniform_real_distribution<double> ang(0.0, 6.28318530717958648);
  std::vector<std::array<double, 2>> pts;
  for (int i = 0; i < count; ++i) {
    const double r = std::pow(10.0, mag(rng));
    const double a = ang(rng);
    pts.push_back({r * std::cos(a), r * std::sin(a)});
  }
  pts.push_back({0.0, 0.0});
  return pts;
}
}  // namespace

TEST_CASE("psi closed-form values") {
  CHECK(psi(0.25, 0.0, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(psi(0.25, 1.0, 0.0) ==
        doctest::Approx(std::sqrt(1.25) + 0.25).epsilon(1e-15));
  // directional derivative at t=(1,0): t/sqrt(eps+|t|^2) + 2 eps t
  const auto g = psi_grad(0.25, 1.0, 0.0);
  CHECK(g[0] == doctest::Approx(1.0 / std::sqrt(1.25) + 0.5).epsilon(1e-15));
  CHECK(g[1] == 0.0);
  CHECK(g[0] >= 1.0 - std::sqrt(0.25));  // psi'(t).t >= |t| - sqrt(eps)
  CHECK_THROWS_AS(psi(0.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(psi(-1.0, 1.0, 0.0), std::invalid_argument);
}

TEST_CASE("psi properties on random samples") {
  for (const auto& [tx, ty] : sample_points(200, 42)) {
    const double n1 = std::hypot(tx, ty);
    const double n2 = tx * tx + ty * ty;
    for (double eps : {1e-6, 1e-3, 0.25, 0.9}) {
      // lower bound and sign of psi'(t).t
      CHECK(psi(eps, tx, ty) >= n1 + eps * n2 - 1e-15);
      const auto g = psi_grad(eps, tx, ty);
      const double gt = g[0] * tx + g[1] * ty;
      CHECK(gt >= -1e-15);
      CHECK(gt >= n1 - std::sqrt(eps) - 1e-12 * (1.0 + n1));
      // Hessian eigenvalues >= 2 eps (convexity with margin)
      const auto h = psi_hess(eps, tx, ty);
      const double tr = h[0] + h[2];
      const double det = h[0] * h[2] - h[1] * h[1];
      const double lam_min = 0.5 * (tr - std::sqrt(std::max(0.0, tr * tr - 4 * det)));
      CHECK(lam_min >= 2.0 * eps * (1.0 - 1e-10));
    }
    // monotone in eps
    CHECK(psi(0.1, tx, ty) <= psi(0.2, tx, ty) + 1e-15);
    CHECK(psi(0.2, tx, ty) <= psi(0.7, tx, ty) + 1e-15);
  }
}

TEST_CASE("psi derivative matches central differences") {
  const double h = 1e-6;
  for (const auto& [tx, ty] : sample_points(50, 1)) {
    if (std::hypot(tx, ty) < 1e-3) continue;  // FD step must stay relatively small
    for (double eps : {1e-2, 0.25}) {
      const auto g = psi_grad(eps, tx, ty);
      const double fdx = (psi(eps, tx + h, ty) - psi(eps, tx - h, ty)) / (2 * h);
      const double fdy = (psi(eps, tx, ty + h) - psi(eps, tx, ty - h)) / (2 * h);
      const double scale = std::max(1.0, std::abs(g[0]) + std::abs(g[1]));
      CHECK(std::abs(g[0] - fdx) / scale < 1e-6);
      CHECK(std::abs(g[1] - fdy) / scale < 1e-6);

      // Hessian vs gradient differences
      const auto h0 = psi_hess(eps, tx, ty);
      const auto gxp = psi_grad(eps, tx + h, ty);
      const auto gxm = psi_grad(eps, tx - h, ty);
      CHECK(std::abs(h0[0] - (gxp[0] - gxm[0]) / (2 * h)) < 2e-5);
      CHECK(std::abs(h0[1] - (gxp[1] - gxm[1]) / (2 * h)) < 2e-5);
    }
  }
}

TEST_CASE("max_rho branch values") {
  CHECK(max_rho(2.0, 1.0) == 1.0);
  CHECK(max_rho(2.0, 0.0) == doctest::Approx(0.0625).epsilon(1e-15));
  for (double rho : {0.5, 2.0, 64.0, 4096.0})
    CHECK(max_rho_prime(rho, 0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_THROWS_AS(max_rho(0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(max_rho(-2.0, 1.0), std::invalid_argument);
}

TEST_CASE("max_rho sandwich and monotone derivative") {
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> xs(-3.0, 3.0);
  for (double rho : {0.7, 2.0, 33.0}) {
    double prev_x = -1e9, prev_d = 0.0;
    for (int i = 0; i < 300; ++i) {
      const double x = xs(rng);
      const double v = max_rho(rho, x);
      CHECK(v >= std::max(0.0, x) - 1e-15);
      CHECK(v <= std::max(0.0, x) + 0.5 / rho + 1e-15);
      const double d = max_rho_prime(rho, x);
      CHECK(d >= 0.0);
      CHECK(d <= 1.0);
      (void)prev_x;
      (void)prev_d;
    }
    // nondecreasing derivative on a sweep
    double last = -1.0;
    for (double x = -2.0; x <= 2.0; x += 1e-3) {
      const double d = max_rho_prime(rho, x);
      CHECK(d >= last - 1e-15);
      last = d;
    }
  }
}

TEST_CASE("M_rho branch values and calculus") {
  CHECK(m_rho(2.0, -1.0) == 0.0);
  CHECK(m_rho(2.0, 0.5) == doctest::Approx(0.125 + 1.0 / 96.0).epsilon(1e-15));
  CHECK(m_rho(2.0, 0.0) == doctest::Approx((2.0 / 6.0) * 0.015625).epsilon(1e-15));

  // derivative of M_rho is max_rho (central differences, away from breaks)
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> xs(-2.0, 2.0);
  for (double rho : {0.5, 2.0, 16.0}) {
    const double br = 0.5 / rho;
    for (int i = 0; i < 200; ++i) {
      const double x = xs(rng);
      const double h = 1e-5;
      if (std::abs(std::abs(x) - br) < 10 * h) continue;
      const double fd = (m_rho(rho, x + h) - m_rho(rho, x - h)) / (2 * h);
      CHECK(std::abs(fd - max_rho(rho, x)) < 1e-8);
      // convexity: M_rho >= max(0,x)^2 / 2
      CHECK(m_rho(rho, x) >= 0.5 * std::max(0.0, x) * std::max(0.0, x) - 1e-15);
    }
    // derivative of max_rho away from the break points
    for (int i = 0; i < 200; ++i) {
      const double x = xs(rng);
      const double h = 1e-6;
      if (std::abs(std::abs(x) - br) < 10 * h) continue;
      const double fd = (max_rho(rho, x + h) - max_rho(rho, x - h)) / (2 * h);
      CHECK(std::abs(fd - max_rho_prime(rho, x)) < 1e-8);
    }
  }
}

TEST_CASE("branch continuity at |x| = 1/(2 rho)") {
  // both branch formulas, evaluated at the break points, agree in value and
  // first derivative; the implementation picks the smooth branch there
  for (double rho : {0.25, 1.0, 2.0, 100.0}) {
    const double br = 0.5 / rho;
    const auto quad = [&](double x) { return 0.5 * rho * (x + br) * (x + br); };
    const auto quad_d = [&](double x) { return rho * (x + br); };
    const auto cubic = [&](double x) {
      return rho / 6.0 * (x + br) * (x + br) * (x + br);
    };
    CHECK(std::abs(quad(br) - br) < 1e-12 * (1 + br));            // vs max(0,x)=x
    CHECK(std::abs(quad(-br) - 0.0) < 1e-12);                     // vs 0
    CHECK(std::abs(quad_d(br) - 1.0) < 1e-12);
    CHECK(std::abs(quad_d(-br) - 0.0) < 1e-12);
    CHECK(std::abs(cubic(br) - (0.5 * br * br + 1.0 / (24 * rho * rho))) <
          1e-12 * (1 + br * br));
    CHECK(std::abs(cubic(-br) - 0.0) < 1e-12);

    // the implementation returns the smooth-branch values at the break points
    CHECK(max_rho(rho, br) == quad(br));
    CHECK(max_rho(rho, -br) == quad(-br));
    CHECK(max_rho_prime(rho, br) == quad_d(br));
    CHECK(m_rho(rho, br) == cubic(br));
    CHECK(m_rho(rho, -br) == cubic(-br));
  }
}

TEST_CASE("multiplier fields") {
  const Mesh m = Mesh::build({-1, 1, -1, 1}, 8, 8);
  std::vector<double> ua(m.n_nodes(), -10.0), ub(m.n_nodes(), 10.0);

  // deep interior control: both multipliers vanish
  auto u_mid = interpolate(m, [](double, double) { return 0.0; });
  const double rho = 4.0;
  auto la = lambda_a(rho, u_mid, ua);
  auto lb = lambda_b(rho, u_mid, ub);
  for (int i = 0; i < m.n_nodes(); ++i) {
    CHECK(la.v[i] == 0.0);
    CHECK(lb.v[i] == 0.0);
  }

  // below the lower bound by 0.5 at rho=4: lambda_a = max_rho(4, 2.0) = 2.0
  auto u_low = interpolate(m, [](double, double) { return -10.5; });
  la = lambda_a(4.0, u_low, ua);
  for (int i = 0; i < m.n_nodes(); ++i) CHECK(la.v[i] == doctest::Approx(2.0).epsilon(1e-15));

  // disjoint supports whenever rho^2 >= 1/(ub - ua)
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> uv(-12.0, 12.0);
  NodalField u_rand(m);
  for (auto& v : u_rand.v) v = uv(rng);
  la = lambda_a(rho, u_rand, ua);
  lb = lambda_b(rho, u_rand, ub);
  for (int i = 0; i < m.n_nodes(); ++i) CHECK(la.v[i] * lb.v[i] == 0.0);

  // derivative weights: ranges, saturation, and value at the bound
  auto u_hi = interpolate(m, [](double, double) { return 30.0; });
  auto Lb = Lambda_b(rho, u_hi, ub);
  for (int i = 0; i < m.n_nodes(); ++i) CHECK(Lb.v[i] == 1.0);
  auto u_at = interpolate(m, [](double, double) { return 10.0; });
  Lb = Lambda_b(rho, u_at, ub);
  for (int i = 0; i < m.n_nodes(); ++i) CHECK(Lb.v[i] == doctest::Approx(0.5).epsilon(1e-15));
  auto La = Lambda_a(rho, u_rand, ua);
  Lb = Lambda_b(rho, u_rand, ub);
  for (int i = 0; i < m.n_nodes(); ++i) {
    CHECK(La.v[i] <= 0.0);
    CHECK(La.v[i] >= -1.0);
    CHECK(Lb.v[i] >= 0.0);
    CHECK(Lb.v[i] <= 1.0);
  }
  La = Lambda_a(rho, u_mid, ua);
  Lb = Lambda_b(rho, u_mid, ub);
  for (int i = 0; i < m.n_nodes(); ++i) {
    CHECK(La.v[i] == 0.0);
    CHECK(Lb.v[i] == 0.0);
  }

  std::vector<double> short_bound(3, 0.0);
  CHECK_THROWS_AS(lambda_a(rho, u_mid, short_bound), std::invalid_argument);
}
