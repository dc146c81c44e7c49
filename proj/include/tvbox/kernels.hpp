#pragma once

// Scalar kernels of the regularization scheme.
//
// Smoothed total-variation integrand (eps > 0):
//     psi_eps(t)  = sqrt(eps + |t|^2) + eps*|t|^2,        t in R^2
// C1 smoothed positive part (rho > 0):
//     max_rho(x)  = max(0,x)                  for |x| >= 1/(2 rho)
//                 = (rho/2)(x + 1/(2 rho))^2  for |x| <= 1/(2 rho)
// and its C2 antiderivative M_rho, plus the penalty multipliers
//     lambda_a(u) = max_rho(rho (u_a - u)),  lambda_b(u) = max_rho(rho (u - u_b))
// with their derivative weights Lambda_a in [-1,0], Lambda_b in [0,1].
//
// On the break points |x| = 1/(2 rho) the smooth branch is used; both
// branches agree there in value and first derivative.

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "tvbox/mesh.hpp"

namespace tvbox {

struct SmoothingParams {
  double epsilon = 0.5;
  double rho = 2.0;

  void validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("SmoothingParams: epsilon must be > 0");
    if (!(rho > 0.0)) throw std::invalid_argument("SmoothingParams: rho must be > 0");
  }
};

namespace kernels {

inline void require_eps(double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("psi: eps must be > 0");
}
inline void require_rho(double rho) {
  if (!(rho > 0.0)) throw std::invalid_argument("max_rho: rho must be > 0");
}

inline double psi(double eps, double tx, double ty) {
  require_eps(eps);
  const double n2 = tx * tx + ty * ty;
  return std::sqrt(eps + n2) + eps * n2;
}

inline std::array<double, 2> psi_grad(double eps, double tx, double ty) {
  require_eps(eps);
  const double s = std::sqrt(eps + tx * tx + ty * ty);
  return {tx / s + 2.0 * eps * tx, ty / s + 2.0 * eps * ty};
}

// Symmetric 2x2 Hessian, packed (h11, h12, h22):
//     I/s - t t^T / s^3 + 2 eps I,   s = sqrt(eps + |t|^2).
// Eigenvalues are eps/s^3 + 2 eps and 1/s + 2 eps, hence >= 2 eps.
inline std::array<double, 3> psi_hess(double eps, double tx, double ty) {
  require_eps(eps);
  const double s2 = eps + tx * tx + ty * ty;
  const double s = std::sqrt(s2);
  const double s3 = s2 * s;
  return {1.0 / s - tx * tx / s3 + 2.0 * eps,
          -tx * ty / s3,
          1.0 / s - ty * ty / s3 + 2.0 * eps};
}

inline double max_rho(double rho, double x) {
  require_rho(rho);
  const double br = 0.5 / rho;
  if (x > br) return x;
  if (x < -br) return 0.0;
  const double z = x + br;
  return 0.5 * rho * z * z;
}

inline double max_rho_prime(double rho, double x) {
  require_rho(rho);
  const double br = 0.5 / rho;
  if (x > br) return 1.0;
  if (x < -br) return 0.0;
  return rho * (x + br);
}

// Antiderivative of max_rho with M_rho(-inf) = 0:
//     x^2/2 + 1/(24 rho^2)         for x > 1/(2 rho)
//     (rho/6)(x + 1/(2 rho))^3     for |x| <= 1/(2 rho)
//     0                            for x < -1/(2 rho)
inline double m_rho(double rho, double x) {
  require_rho(rho);
  const double br = 0.5 / rho;
  if (x > br) return 0.5 * x * x + 1.0 / (24.0 * rho * rho);
  if (x < -br) return 0.0;
  const double z = x + br;
  return rho / 6.0 * z * z * z;
}

}  // namespace kernels

// Nodal multiplier fields. The bound arrays hold one value per node
// (constant bounds are simply constant arrays).

inline NodalField lambda_a(double rho, const NodalField& u,
                           const std::vector<double>& ua) {
  if (!u.mesh || static_cast<int>(ua.size()) != u.size())
    throw std::invalid_argument("lambda_a: bound/field size mismatch");
  NodalField r(*u.mesh);
  for (int i = 0; i < u.size(); ++i)
    r.v[i] = kernels::max_rho(rho, rho * (ua[i] - u.v[i]));
  return r;
}

inline NodalField lambda_b(double rho, const NodalField& u,
                           const std::vector<double>& ub) {
  if (!u.mesh || static_cast<int>(ub.size()) != u.size())
    throw std::invalid_argument("lambda_b: bound/field size mismatch");
  NodalField r(*u.mesh);
  for (int i = 0; i < u.size(); ++i)
    r.v[i] = kernels::max_rho(rho, rho * (u.v[i] - ub[i]));
  return r;
}

// Lambda_a = -max_rho'(rho (u_a - u)) in [-1, 0]
inline NodalField Lambda_a(double rho, const NodalField& u,
                           const std::vector<double>& ua) {
  if (!u.mesh || static_cast<int>(ua.size()) != u.size())
    throw std::invalid_argument("Lambda_a: bound/field size mismatch");
  NodalField r(*u.mesh);
  for (int i = 0; i < u.size(); ++i)
    r.v[i] = -kernels::max_rho_prime(rho, rho * (ua[i] - u.v[i]));
  return r;
}

// Lambda_b = max_rho'(rho (u - u_b)) in [0, 1]
inline NodalField Lambda_b(double rho, const NodalField& u,
                           const std::vector<double>& ub) {
  if (!u.mesh || static_cast<int>(ub.size()) != u.size())
    throw std::invalid_argument("Lambda_b: bound/field size mismatch");
  NodalField r(*u.mesh);
  for (int i = 0; i < u.size(); ++i)
    r.v[i] = kernels::max_rho_prime(rho, rho * (u.v[i] - ub[i]));
  return r;
}

}  // namespace tvbox
