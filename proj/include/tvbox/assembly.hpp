#pragma once

// P1 assembly on structured rectangle meshes: mass/stiffness forms, lumped
// quadrature weights, norms, and the exact per-element TV quantities.
//
// Quadrature conventions used throughout the project:
//   * gradients are element-wise constant, so any integral of a function of
//     the gradient is evaluated exactly per triangle,
//   * integrals of nonlinear nodal integrands (penalty terms, cubic reaction)
//     use vertex quadrature, i.e. the lumped mass weights,
//   * products of P1 functions use the consistent mass matrix (exact).

#include <array>
#include <cmath>
#include <vector>

#include "tvbox/banded.hpp"
#include "tvbox/mesh.hpp"

namespace tvbox {

inline int node_bandwidth(const Mesh& m) { return m.nx + 2; }

inline BandMatrix assemble_mass(const Mesh& m) {
  const int bw = node_bandwidth(m);
  BandMatrix M(m.n_nodes(), bw, bw);
  const double a = m.element_area;
  for (const auto& tri : m.triangles) {
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        M.add(tri.v[i], tri.v[j], (i == j ? a / 6.0 : a / 12.0));
  }
  return M;
}

inline BandMatrix assemble_stiffness(const Mesh& m) {
  const int bw = node_bandwidth(m);
  BandMatrix K(m.n_nodes(), bw, bw);
  const double a = m.element_area;
  for (int t = 0; t < m.n_triangles(); ++t) {
    const auto& tri = m.triangles[t].v;
    const auto& g = m.grad_basis[t];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        K.add(tri[i], tri[j], a * (g[i][0] * g[j][0] + g[i][1] * g[j][1]));
  }
  return K;
}

// Vertex-quadrature weights; row sums of the consistent mass matrix.
inline std::vector<double> assemble_lumped_mass(const Mesh& m) {
  std::vector<double> w(m.n_nodes(), 0.0);
  const double third = m.element_area / 3.0;
  for (const auto& tri : m.triangles)
    for (int i = 0; i < 3; ++i) w[tri.v[i]] += third;
  return w;
}

// Stiffness-like form with a symmetric 2x2 matrix weight per triangle,
// given packed as (w11, w12, w22).
inline BandMatrix assemble_weighted_stiffness(
    const Mesh& m, const std::vector<std::array<double, 3>>& w) {
  const int bw = node_bandwidth(m);
  BandMatrix K(m.n_nodes(), bw, bw);
  const double a = m.element_area;
  for (int t = 0; t < m.n_triangles(); ++t) {
    const auto& tri = m.triangles[t].v;
    const auto& g = m.grad_basis[t];
    const auto& ww = w[t];
    for (int i = 0; i < 3; ++i) {
      const double wgx = ww[0] * g[i][0] + ww[1] * g[i][1];
      const double wgy = ww[1] * g[i][0] + ww[2] * g[i][1];
      for (int j = 0; j < 3; ++j)
        K.add(tri[i], tri[j], a * (wgx * g[j][0] + wgy * g[j][1]));
    }
  }
  return K;
}

// Weak divergence-form vector b_i = sum_T area_T * q_T . grad phi_i
// for an element-wise constant 2-vector field q.
inline std::vector<double> assemble_flux_vector(const Mesh& m,
                                                const ElementVectorField& q) {
  std::vector<double> b(m.n_nodes(), 0.0);
  const double a = m.element_area;
  for (int t = 0; t < m.n_triangles(); ++t) {
    const auto& tri = m.triangles[t].v;
    const auto& g = m.grad_basis[t];
    for (int i = 0; i < 3; ++i)
      b[tri[i]] += a * (q.vec[t][0] * g[i][0] + q.vec[t][1] * g[i][1]);
  }
  return b;
}

struct FieldNorms {
  double l1 = 0.0, l2 = 0.0, linf = 0.0;
};

// l1 by vertex quadrature, l2 exact (consistent mass), linf nodal.
inline FieldNorms norms(const NodalField& u) {
  const Mesh& m = *u.mesh;
  require_same_mesh(u, m, "norms");
  FieldNorms r;
  const auto w = assemble_lumped_mass(m);
  double l2sq = 0.0;
  const double a6 = m.element_area / 6.0;
  for (const auto& tri : m.triangles) {
    const double v0 = u.v[tri.v[0]], v1 = u.v[tri.v[1]], v2 = u.v[tri.v[2]];
    l2sq += a6 * (v0 * v0 + v1 * v1 + v2 * v2 + v0 * v1 + v0 * v2 + v1 * v2);
  }
  for (int i = 0; i < m.n_nodes(); ++i) {
    r.l1 += w[i] * std::abs(u.v[i]);
    r.linf = std::max(r.linf, std::abs(u.v[i]));
  }
  r.l2 = std::sqrt(l2sq);
  return r;
}

// || grad u ||_{L1}, exact because the gradient is constant per triangle.
inline double grad_l1(const NodalField& u) {
  const auto g = element_gradient(u);
  double s = 0.0;
  for (const auto& q : g.vec) s += std::hypot(q[0], q[1]);
  return s * u.mesh->element_area;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Cached discretization: one instance per mesh, shared by all solvers.
class Fem {
 public:
  Mesh mesh;
  BandMatrix mass;
  BandMatrix stiffness;           // pure Neumann form (row sums zero)
  BandMatrix stiffness_dirichlet; // rows/cols of boundary nodes eliminated
  std::vector<double> lumped;
  std::vector<uint8_t> boundary;  // 1 on boundary nodes

  static Fem build(const Rect& rect, int nx, int ny) {
    Fem f;
    f.mesh = Mesh::build(rect, nx, ny);
    f.mass = assemble_mass(f.mesh);
    f.stiffness = assemble_stiffness(f.mesh);
    f.lumped = assemble_lumped_mass(f.mesh);
    f.boundary.resize(f.mesh.n_nodes());
    for (int i = 0; i < f.mesh.n_nodes(); ++i)
      f.boundary[i] = f.mesh.is_boundary_node(i) ? 1 : 0;
    f.stiffness_dirichlet = f.stiffness;
    for (int i = 0; i < f.mesh.n_nodes(); ++i)
      if (f.boundary[i]) f.stiffness_dirichlet.eliminate_symmetric(i);
    return f;
  }

  int n() const { return mesh.n_nodes(); }

  double l2_norm(const std::vector<double>& v) const {
    return std::sqrt(std::max(0.0, dot(v, mass.mul(v))));
  }
  double l2_norm_lumped(const std::vector<double>& v) const {
    double s = 0.0;
    for (int i = 0; i < n(); ++i) s += lumped[i] * v[i] * v[i];
    return std::sqrt(s);
  }
  // Norm of the Riesz representative (w.r.t. lumped mass) of a dual vector.
  double dual_norm_lumped(const std::vector<double>& r) const {
    double s = 0.0;
    for (int i = 0; i < n(); ++i) s += r[i] * r[i] / lumped[i];
    return std::sqrt(s);
  }
  void zero_boundary(std::vector<double>& v) const {
    for (int i = 0; i < n(); ++i)
      if (boundary[i]) v[i] = 0.0;
  }
};

}  // namespace tvbox
