#pragma once

#include "ccsim/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace ccsim {

/// Rest geometry and connectivity for 1D segment chains and 2D triangle meshes.
/// Positions are stored flat, vertex-major: [x0, (y0,) x1, (y1,) ...].
/// Segments carry unit cross-section, triangles unit thickness, so element
/// volume is rest length (1D) or rest area (2D) and vertex volumes are the
/// usual lumped shares.
struct Mesh {
  int dim = 0;                               // 1 or 2
  Vec rest_positions;                        // n * dim
  std::vector<std::vector<int>> elements;    // pairs (1D) or triples (2D)
  Vec vertex_volumes;                        // n, lumped
  double total_volume = 0.0;

  int vertex_count() const { return static_cast<int>(rest_positions.size()) / dim; }

  Eigen::VectorBlock<const Vec> rest(int v) const {
    return rest_positions.segment(v * dim, dim);
  }
};

/// Which vertices a pin specification applies to. Selection is geometric on
/// the rest positions so it works for any mesh built by this library.
///   rod:  left_end, right_end, both_ends
///   grid: left_edge, right_edge, top_edge, bottom_edge, bottom_corners, top_corners
///   any:  vertex (explicit index), all
std::vector<int> select_vertices(const Mesh& mesh, const std::string& selector, int index = -1);

/// A pinned-vertex specification: selector plus an optional offset from the
/// rest position (the prescribed target starts at rest + offset).
struct PinSpec {
  std::string select;
  int index = -1;  // used when select == "vertex"
  Vec offset;      // dim entries; empty means zero
};

/// Dirichlet data handled by DOF elimination: pinned vertices carry prescribed
/// positions and contribute no rows/columns to the reduced system.
struct BoundaryConditions {
  int dim = 0;
  std::vector<char> is_pinned;           // per vertex
  std::map<int, Vec> pin_targets;        // vertex -> current prescribed position
  std::vector<int> free_vertices;        // ascending vertex ids
  std::vector<int> vertex_to_free;       // per vertex, -1 if pinned

  int free_vertex_count() const { return static_cast<int>(free_vertices.size()); }
  int free_dof_count() const { return free_vertex_count() * dim; }

  /// Full-space DOF index of (free vertex slot f, component c).
  int free_to_full(int f, int c) const { return free_vertices[static_cast<std::size_t>(f)] * dim + c; }

  /// Reduced index of a full-space DOF, or -1 if its vertex is pinned.
  int full_to_free(int full_dof) const {
    const int v = full_dof / dim;
    const int f = vertex_to_free[static_cast<std::size_t>(v)];
    return f < 0 ? -1 : f * dim + full_dof % dim;
  }

  void pin(int vertex, const Vec& target) {
    is_pinned[static_cast<std::size_t>(vertex)] = 1;
    pin_targets[vertex] = target;
  }

  /// Rebuild the free index maps after pins change.
  void finalize(int n_vertices) {
    free_vertices.clear();
    vertex_to_free.assign(static_cast<std::size_t>(n_vertices), -1);
    for (int v = 0; v < n_vertices; ++v) {
      if (!is_pinned[static_cast<std::size_t>(v)]) {
        vertex_to_free[static_cast<std::size_t>(v)] = static_cast<int>(free_vertices.size());
        free_vertices.push_back(v);
      }
    }
  }

  /// Overwrite pinned entries of a full-space position vector with targets.
  void apply_pins(Vec& x) const {
    for (const auto& [v, target] : pin_targets) x.segment(v * dim, dim) = target;
  }

  /// Scatter a reduced vector into full space (zeros at pinned DOFs).
  Vec expand(const Vec& reduced) const {
    Vec full = Vec::Zero(static_cast<Eigen::Index>(vertex_to_free.size()) * dim);
    for (int f = 0; f < free_vertex_count(); ++f)
      full.segment(free_vertices[static_cast<std::size_t>(f)] * dim, dim) = reduced.segment(f * dim, dim);
    return full;
  }

  /// Gather the free entries of a full-space vector.
  Vec reduce(const Vec& full) const {
    Vec r(free_dof_count());
    for (int f = 0; f < free_vertex_count(); ++f)
      r.segment(f * dim, dim) = full.segment(free_vertices[static_cast<std::size_t>(f)] * dim, dim);
    return r;
  }
};

struct MeshAndBC {
  Mesh mesh;
  BoundaryConditions bc;
};

inline std::vector<int> select_vertices(const Mesh& mesh, const std::string& selector, int index) {
  const int n = mesh.vertex_count();
  const double tol = 1e-9;
  auto coord_extreme = [&](int axis, bool want_min) {
    double best = want_min ? std::numeric_limits<double>::max() : std::numeric_limits<double>::lowest();
    for (int v = 0; v < n; ++v) {
      const double c = mesh.rest_positions[v * mesh.dim + axis];
      best = want_min ? std::min(best, c) : std::max(best, c);
    }
    std::vector<int> out;
    for (int v = 0; v < n; ++v)
      if (std::abs(mesh.rest_positions[v * mesh.dim + axis] - best) < tol) out.push_back(v);
    return out;
  };
  auto intersect = [](std::vector<int> a, const std::vector<int>& b) {
    std::vector<int> out;
    for (int v : a)
      if (std::find(b.begin(), b.end(), v) != b.end()) out.push_back(v);
    return out;
  };

  if (selector == "vertex") {
    if (index < 0 || index >= n) throw ConfigError("select_vertices: vertex index out of range");
    return {index};
  }
  if (selector == "all") {
    std::vector<int> out(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) out[static_cast<std::size_t>(v)] = v;
    return out;
  }
  if (selector == "left_end" || selector == "left_edge") return coord_extreme(0, true);
  if (selector == "right_end" || selector == "right_edge") return coord_extreme(0, false);
  if (selector == "both_ends") {
    auto l = coord_extreme(0, true), r = coord_extreme(0, false);
    l.insert(l.end(), r.begin(), r.end());
    return l;
  }
  if (mesh.dim == 2) {
    if (selector == "bottom_edge") return coord_extreme(1, true);
    if (selector == "top_edge") return coord_extreme(1, false);
    if (selector == "bottom_corners")
      return intersect(coord_extreme(1, true),
                       [&] { auto a = coord_extreme(0, true), b = coord_extreme(0, false);
                             a.insert(a.end(), b.begin(), b.end()); return a; }());
    if (selector == "top_corners")
      return intersect(coord_extreme(1, false),
                       [&] { auto a = coord_extreme(0, true), b = coord_extreme(0, false);
                             a.insert(a.end(), b.begin(), b.end()); return a; }());
    if (selector == "top_left")
      return intersect(coord_extreme(1, false), coord_extreme(0, true));
    if (selector == "top_right")
      return intersect(coord_extreme(1, false), coord_extreme(0, false));
  }
  throw ConfigError("select_vertices: unknown selector '" + selector + "'");
}

inline BoundaryConditions make_bc(const Mesh& mesh, const std::vector<PinSpec>& pins) {
  BoundaryConditions bc;
  bc.dim = mesh.dim;
  const int n = mesh.vertex_count();
  bc.is_pinned.assign(static_cast<std::size_t>(n), 0);
  for (const PinSpec& p : pins) {
    Vec offset = Vec::Zero(mesh.dim);
    if (p.offset.size() > 0) {
      if (p.offset.size() != mesh.dim) throw ConfigError("pin offset dimension mismatch");
      offset = p.offset;
    }
    for (int v : select_vertices(mesh, p.select, p.index)) {
      bc.pin(v, Vec(mesh.rest(v)) + offset);
    }
  }
  bc.finalize(n);
  return bc;
}

/// Uniform 1D segment chain of given length along the x axis.
inline MeshAndBC make_rod(int n_vertices, double length, const std::vector<PinSpec>& pins = {}) {
  if (n_vertices < 2) throw ConfigError("make_rod: need at least 2 vertices");
  if (!(length > 0)) throw ConfigError("make_rod: length must be positive");
  Mesh mesh;
  mesh.dim = 1;
  mesh.rest_positions.resize(n_vertices);
  const double dx = length / (n_vertices - 1);
  for (int v = 0; v < n_vertices; ++v) mesh.rest_positions[v] = v * dx;
  mesh.vertex_volumes = Vec::Zero(n_vertices);
  for (int e = 0; e + 1 < n_vertices; ++e) {
    mesh.elements.push_back({e, e + 1});
    mesh.vertex_volumes[e] += dx / 2;
    mesh.vertex_volumes[e + 1] += dx / 2;
    mesh.total_volume += dx;
  }
  return {mesh, make_bc(mesh, pins)};
}

/// Regular nx-by-ny triangulated grid; every quad is split along the same
/// diagonal so refinement is reproducible. Triangles are ordered CCW.
inline MeshAndBC make_grid(int nx, int ny, double width, double height,
                           const std::vector<PinSpec>& pins = {}) {
  if (nx < 2 || ny < 2) throw ConfigError("make_grid: need at least 2x2 vertices");
  if (!(width > 0) || !(height > 0)) throw ConfigError("make_grid: degenerate dimensions");
  Mesh mesh;
  mesh.dim = 2;
  const int n = nx * ny;
  mesh.rest_positions.resize(2 * n);
  auto id = [&](int i, int j) { return j * nx + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      mesh.rest_positions[2 * id(i, j) + 0] = width * i / (nx - 1);
      mesh.rest_positions[2 * id(i, j) + 1] = height * j / (ny - 1);
    }
  mesh.vertex_volumes = Vec::Zero(n);
  auto add_tri = [&](int a, int b, int c) {
    const Vec2 pa = mesh.rest_positions.segment<2>(2 * a);
    const Vec2 pb = mesh.rest_positions.segment<2>(2 * b);
    const Vec2 pc = mesh.rest_positions.segment<2>(2 * c);
    const double area2 = (pb.x() - pa.x()) * (pc.y() - pa.y()) - (pc.x() - pa.x()) * (pb.y() - pa.y());
    if (area2 <= 0) throw GeometryError("make_grid: non-positive triangle area");
    mesh.elements.push_back({a, b, c});
    const double area = area2 / 2;
    mesh.total_volume += area;
    for (int v : {a, b, c}) mesh.vertex_volumes[v] += area / 3;
  };
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      add_tri(id(i, j), id(i + 1, j), id(i + 1, j + 1));
      add_tri(id(i, j), id(i + 1, j + 1), id(i, j + 1));
    }
  return {mesh, make_bc(mesh, pins)};
}

}  // namespace ccsim
