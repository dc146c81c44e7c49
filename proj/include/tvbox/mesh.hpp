#pragma once

// Structured P1 triangulations of axis-aligned rectangles.
//
// Every grid cell is split along the lower-left -> upper-right diagonal,
// so the mesh, node ordering and element geometry are fully deterministic.

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace tvbox {

struct Rect {
  double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;

  double width() const { return xmax - xmin; }
  double height() const { return ymax - ymin; }
  double area() const { return width() * height(); }
};

struct Triangle {
  std::array<int, 3> v;  // node indices, counter-clockwise
};

class Mesh {
 public:
  Rect rect;
  int nx = 0, ny = 0;                                   // cells per axis
  std::vector<std::array<double, 2>> nodes;             // row-major, x fastest
  std::vector<Triangle> triangles;
  double element_area = 0.0;                            // uniform on this grid
  std::vector<std::array<std::array<double, 2>, 3>> grad_basis;  // per tri, per vertex

  static Mesh build(const Rect& rect, int nx, int ny) {
    if (nx < 1 || ny < 1)
      throw std::invalid_argument("Mesh::build: need at least one cell per axis");
    if (!(rect.xmax > rect.xmin) || !(rect.ymax > rect.ymin))
      throw std::invalid_argument("Mesh::build: degenerate rectangle");

    Mesh m;
    m.rect = rect;
    m.nx = nx;
    m.ny = ny;
    const double dx = rect.width() / nx;
    const double dy = rect.height() / ny;

    m.nodes.reserve(static_cast<size_t>(nx + 1) * (ny + 1));
    for (int iy = 0; iy <= ny; ++iy)
      for (int ix = 0; ix <= nx; ++ix)
        m.nodes.push_back({rect.xmin + ix * dx, rect.ymin + iy * dy});

    m.element_area = 0.5 * dx * dy;
    m.triangles.reserve(static_cast<size_t>(2) * nx * ny);
    for (int cy = 0; cy < ny; ++cy) {
      for (int cx = 0; cx < nx; ++cx) {
        const int a = m.node_index(cx, cy);
        const int b = m.node_index(cx + 1, cy);
        const int c = m.node_index(cx + 1, cy + 1);
        const int d = m.node_index(cx, cy + 1);
        m.triangles.push_back({{a, b, c}});
        m.triangles.push_back({{a, c, d}});
      }
    }

    m.grad_basis.resize(m.triangles.size());
    for (size_t t = 0; t < m.triangles.size(); ++t) {
      const auto& tri = m.triangles[t].v;
      const auto& p0 = m.nodes[tri[0]];
      const auto& p1 = m.nodes[tri[1]];
      const auto& p2 = m.nodes[tri[2]];
      const double twice_area =
          (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
      // grad phi_i is the inward normal of the opposite edge over twice the area
      const std::array<const std::array<double, 2>*, 3> p = {&p0, &p1, &p2};
      for (int i = 0; i < 3; ++i) {
        const auto& pa = *p[(i + 1) % 3];
        const auto& pb = *p[(i + 2) % 3];
        m.grad_basis[t][i] = {(pa[1] - pb[1]) / twice_area,
                              (pb[0] - pa[0]) / twice_area};
      }
    }
    return m;
  }

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  int n_triangles() const { return static_cast<int>(triangles.size()); }
  int node_index(int ix, int iy) const { return iy * (nx + 1) + ix; }
  double domain_area() const { return rect.area(); }

  // characteristic mesh size: diagonal of one grid cell
  double h() const {
    const double dx = rect.width() / nx;
    const double dy = rect.height() / ny;
    return std::sqrt(dx * dx + dy * dy);
  }

  bool is_boundary_node(int i) const {
    const int ix = i % (nx + 1);
    const int iy = i / (nx + 1);
    return ix == 0 || ix == nx || iy == 0 || iy == ny;
  }
};

// A P1 finite-element function given by nodal coefficients.
struct NodalField {
  const Mesh* mesh = nullptr;
  std::vector<double> v;

  NodalField() = default;
  explicit NodalField(const Mesh& m, double fill = 0.0)
      : mesh(&m), v(m.n_nodes(), fill) {}

  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }
  int size() const { return static_cast<int>(v.size()); }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

// One constant 2-vector per triangle (gradients and TV dual variables live here).
struct ElementVectorField {
  const Mesh* mesh = nullptr;
  std::vector<std::array<double, 2>> vec;

  ElementVectorField() = default;
  explicit ElementVectorField(const Mesh& m)
      : mesh(&m), vec(m.n_triangles(), {0.0, 0.0}) {}
};

inline void require_same_mesh(const NodalField& a, const Mesh& m, const char* op) {
  if (a.mesh != &m || a.size() != m.n_nodes())
    throw std::invalid_argument(std::string(op) + ": field does not live on this mesh");
}

template <typename F>
NodalField interpolate(const Mesh& m, F&& f) {
  NodalField u(m);
  for (int i = 0; i < m.n_nodes(); ++i) u.v[i] = f(m.nodes[i][0], m.nodes[i][1]);
  return u;
}

inline ElementVectorField element_gradient(const NodalField& u) {
  if (!u.mesh) throw std::invalid_argument("element_gradient: unbound field");
  const Mesh& m = *u.mesh;
  require_same_mesh(u, m, "element_gradient");
  ElementVectorField g(m);
  for (int t = 0; t < m.n_triangles(); ++t) {
    double gx = 0.0, gy = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double ui = u.v[m.triangles[t].v[i]];
      gx += ui * m.grad_basis[t][i][0];
      gy += ui * m.grad_basis[t][i][1];
    }
    g.vec[t] = {gx, gy};
  }
  return g;
}

}  // namespace tvbox
