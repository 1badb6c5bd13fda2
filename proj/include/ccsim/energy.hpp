#pragma once

#include "ccsim/linalg.hpp"
#include "ccsim/scene.hpp"

#include <Eigen/SVD>

#include <vector>

namespace ccsim {

/// Time-integration state in full space. Pinned entries of `x` always hold
/// their prescribed positions. In dynamic mode `x_tilde = x_prev + h*v_prev`
/// (Backward Euler inertial target).
struct SimState {
  Vec x;        // current positions, n*dim
  Vec v;        // velocities, n*dim
  Vec x_tilde;  // inertial target, n*dim
  double h = 0.0;
  Vec mass;     // lumped mass per DOF, n*dim
};

inline SimState make_initial_state(const Scene& scene) {
  SimState s;
  s.x = scene.mesh.rest_positions;
  if (scene.initial_scale.size() > 0) {
    if (scene.initial_scale.size() != scene.mesh.dim)
      throw ConfigError("initial_scale dimension mismatch");
    for (int v = 0; v < scene.mesh.vertex_count(); ++v)
      for (int c = 0; c < scene.mesh.dim; ++c) s.x[v * scene.mesh.dim + c] *= scene.initial_scale[c];
  }
  scene.bc.apply_pins(s.x);
  for (const PinSpec& nudge : scene.initial_nudges) {
    for (int v : select_vertices(scene.mesh, nudge.select, nudge.index))
      s.x.segment(v * scene.mesh.dim, scene.mesh.dim) += nudge.offset;
  }
  s.v = Vec::Zero(s.x.size());
  s.x_tilde = s.x;
  s.h = scene.timestep;
  s.mass = Vec::Zero(s.x.size());
  for (int v = 0; v < scene.mesh.vertex_count(); ++v)
    for (int c = 0; c < scene.mesh.dim; ++c)
      s.mass[v * scene.mesh.dim + c] = scene.mesh.vertex_volumes[v] * scene.material.density;
  return s;
}

/// Which potential terms participate in an assembly. Solvers use everything
/// the scene defines; basis construction may exclude the coupling springs.
struct TermMask {
  bool inertia = false;
  bool elastic = false;   // 1D segment springs or 2D FCR, by mesh dimension
  bool springs = false;   // scene.extra_springs
  bool gravity = false;
};

inline TermMask scene_terms(const Scene& scene) {
  TermMask t;
  t.inertia = scene.mode == Mode::Dynamic;
  t.elastic = true;
  t.springs = !scene.extra_springs.empty();
  t.gravity = scene.has_gravity();
  return t;
}

struct AssemblyOptions {
  bool with_hessian = true;
  bool project = true;  // clamp indefinite element Hessians to PSD
};

/// Total objective value, gradient, and sparse Hessian over the free DOFs.
/// In dynamic mode the potential terms are scaled by h^2 so the objective is
/// the Backward Euler increment ½(x-x~)'M(x-x~) + h^2 Psi(x).
struct EnergyAssembly {
  double value = 0.0;
  Vec gradient;   // free DOFs
  SpMat hessian;  // free DOFs, both triangles stored
  int dim = 0;
  int n_free_vertices = 0;

  // per-assembly diagnostics (reported, not fatal)
  std::vector<int> inverted_segments;
  std::vector<int> degenerate_elements;
};

namespace detail {

/// Clamp eigenvalues of a small symmetric matrix to at least `floor`.
inline void eigen_clamp_psd(Mat& A, double floor = 1e-12) {
  Eigen::SelfAdjointEigenSolver<Mat> eig(A);
  Vec lam = eig.eigenvalues();
  bool touched = false;
  for (Eigen::Index i = 0; i < lam.size(); ++i)
    if (lam[i] < floor) {
      lam[i] = floor;
      touched = true;
    }
  if (touched) A = eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
}

/// Signed 2x2 SVD: U, V proper rotations, sigma[1] possibly negative when F
/// is inverted. R = U V' is the polar rotation.
inline void signed_svd2(const Mat2& F, Mat2& U, Vec2& sigma, Mat2& V) {
  Eigen::JacobiSVD<Mat2> svd(F, Eigen::ComputeFullU | Eigen::ComputeFullV);
  U = svd.matrixU();
  V = svd.matrixV();
  sigma = svd.singularValues();
  if (U.determinant() < 0) {
    U.col(1) *= -1;
    sigma[1] *= -1;
  }
  if (V.determinant() < 0) {
    V.col(1) *= -1;
    sigma[1] *= -1;
  }
}

inline Eigen::Vector4d vec2x2(const Mat2& A) {
  return Eigen::Vector4d(A(0, 0), A(1, 0), A(0, 1), A(1, 1));
}

/// Value, first Piola-Kirchhoff stress, and Hessian (over vec F) of the
/// Fixed Corotational density
///   Psi(F) = mu * sum_i (sigma_i - 1)^2 + lambda/2 (J - 1)^2.
/// dPsi/dF = 2 mu (F - R) + lambda (J - 1) cof F, and d(F - R) uses the 2D
/// polar derivative dR = R G <R G, dF> / (sigma_0 + sigma_1), G the 90-degree
/// rotation generator.
struct FcrPointwise {
  double psi;
  Mat2 P;
  Eigen::Matrix4d HF;
};

inline FcrPointwise fcr_pointwise(const Mat2& F, double mu, double lambda, bool with_hessian) {
  FcrPointwise out;
  Mat2 U, V;
  Vec2 sigma;
  signed_svd2(F, U, sigma, V);
  const Mat2 R = U * V.transpose();
  const double J = F.determinant();
  Mat2 cofF;
  cofF << F(1, 1), -F(1, 0), -F(0, 1), F(0, 0);

  out.psi = mu * ((sigma[0] - 1) * (sigma[0] - 1) + (sigma[1] - 1) * (sigma[1] - 1)) +
            0.5 * lambda * (J - 1) * (J - 1);
  out.P = 2.0 * mu * (F - R) + lambda * (J - 1) * cofF;

  if (with_hessian) {
    Mat2 G;
    G << 0, -1, 1, 0;
    const Eigen::Vector4d twist = vec2x2(R * G);
    const double denom = std::max(sigma.sum(), 1e-8);
    const Eigen::Vector4d cf = vec2x2(cofF);
    Eigen::Matrix4d dcof = Eigen::Matrix4d::Zero();
    dcof(0, 3) = 1;
    dcof(1, 2) = -1;
    dcof(2, 1) = -1;
    dcof(3, 0) = 1;
    out.HF = 2.0 * mu * (Eigen::Matrix4d::Identity() - twist * twist.transpose() / denom) +
             lambda * cf * cf.transpose() + lambda * (J - 1) * dcof;
  }
  return out;
}

struct Accumulator {
  double value = 0.0;
  Vec grad;                     // full space
  std::vector<Triplet> trips;   // full-space indices
  bool with_hessian = true;

  void add_block(const std::vector<int>& dofs, const Mat& H) {
    if (!with_hessian) return;
    for (std::size_t r = 0; r < dofs.size(); ++r)
      for (std::size_t c = 0; c < dofs.size(); ++c)
        trips.emplace_back(dofs[r], dofs[c], H(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)));
  }
};

inline void add_inertia(const SimState& state, Accumulator& acc) {
  const Vec d = state.x - state.x_tilde;
  acc.value += 0.5 * d.dot(state.mass.cwiseProduct(d));
  acc.grad += state.mass.cwiseProduct(d);
  if (acc.with_hessian)
    for (Eigen::Index i = 0; i < state.mass.size(); ++i)
      acc.trips.emplace_back(i, i, state.mass[i]);
}

inline void add_segment_springs(const Scene& scene, const SimState& state, double w,
                                Accumulator& acc, std::vector<int>& inverted) {
  for (std::size_t e = 0; e < scene.mesh.elements.size(); ++e) {
    const int a = scene.mesh.elements[e][0];
    const int b = scene.mesh.elements[e][1];
    const double rest = scene.mesh.rest_positions[b] - scene.mesh.rest_positions[a];
    const double k = scene.material.young / rest;
    const double stretch = state.x[b] - state.x[a];
    if (stretch <= 0) inverted.push_back(static_cast<int>(e));
    const double delta = stretch - rest;
    acc.value += w * 0.5 * k * delta * delta;
    acc.grad[a] -= w * k * delta;
    acc.grad[b] += w * k * delta;
    if (acc.with_hessian) {
      const std::vector<int> dofs = {a, b};
      Mat H(2, 2);
      H << w * k, -w * k, -w * k, w * k;
      acc.add_block(dofs, H);
    }
  }
}

inline void add_fcr_triangles(const Scene& scene, const SimState& state, double w,
                              const AssemblyOptions& opts, Accumulator& acc,
                              std::vector<int>& degenerate) {
  const double mu = scene.material.lame_mu();
  const double lambda = scene.material.lame_lambda();
  for (std::size_t e = 0; e < scene.mesh.elements.size(); ++e) {
    const auto& tri = scene.mesh.elements[e];
    const Vec2 r0 = scene.mesh.rest_positions.segment<2>(2 * tri[0]);
    const Vec2 r1 = scene.mesh.rest_positions.segment<2>(2 * tri[1]);
    const Vec2 r2 = scene.mesh.rest_positions.segment<2>(2 * tri[2]);
    Mat2 Dm;
    Dm.col(0) = r1 - r0;
    Dm.col(1) = r2 - r0;
    const double detDm = Dm.determinant();
    if (detDm <= 0) throw GeometryError("fcr: non-positive rest area in element " + std::to_string(e));
    const double area = 0.5 * detDm;
    const Mat2 Bm = Dm.inverse();

    const Vec2 x0 = state.x.segment<2>(2 * tri[0]);
    const Vec2 x1 = state.x.segment<2>(2 * tri[1]);
    const Vec2 x2 = state.x.segment<2>(2 * tri[2]);
    Mat2 Ds;
    Ds.col(0) = x1 - x0;
    Ds.col(1) = x2 - x0;
    const Mat2 F = Ds * Bm;
    if (std::abs(F.determinant()) < 1e-12) degenerate.push_back(static_cast<int>(e));

    const FcrPointwise pw = fcr_pointwise(F, mu, lambda, acc.with_hessian);
    acc.value += w * area * pw.psi;

    // dF/dx as a 4x6 map from stacked vertex positions to vec(F)
    Eigen::Matrix<double, 4, 6> B = Eigen::Matrix<double, 4, 6>::Zero();
    for (int c = 0; c < 2; ++c)
      for (int r = 0; r < 2; ++r) {
        const int m = c * 2 + r;
        B(m, 0 + r) = -(Bm(0, c) + Bm(1, c));
        B(m, 2 + r) = Bm(0, c);
        B(m, 4 + r) = Bm(1, c);
      }

    const Eigen::Matrix<double, 6, 1> g6 = w * area * B.transpose() * vec2x2(pw.P);
    std::vector<int> dofs(6);
    for (int t = 0; t < 3; ++t) {
      dofs[2 * t] = 2 * tri[t];
      dofs[2 * t + 1] = 2 * tri[t] + 1;
    }
    for (int i = 0; i < 6; ++i) acc.grad[dofs[static_cast<std::size_t>(i)]] += g6[i];

    if (acc.with_hessian) {
      Mat H6 = w * area * (B.transpose() * pw.HF * B);
      if (opts.project) eigen_clamp_psd(H6, 1e-12);
      acc.add_block(dofs, H6);
    }
  }
}

inline void add_coupling_springs(const Scene& scene, const SimState& state, double w,
                                 const AssemblyOptions& opts, Accumulator& acc) {
  const int dim = scene.mesh.dim;
  for (const ExtraSpring& s : scene.extra_springs) {
    const Vec xa = state.x.segment(s.a * dim, dim);
    const Vec xb = state.x.segment(s.b * dim, dim);
    const Vec d = xa - xb;
    const double r = d.norm();
    if (r < 1e-12 * std::max(1.0, s.rest_length))
      throw GeometryError("coupling spring: coincident endpoints (vertices " +
                          std::to_string(s.a) + ", " + std::to_string(s.b) + ")");
    const Vec u = d / r;
    const double f = s.stiffness * (r - s.rest_length);
    acc.value += w * 0.5 * s.stiffness * (r - s.rest_length) * (r - s.rest_length);
    acc.grad.segment(s.a * dim, dim) += w * f * u;
    acc.grad.segment(s.b * dim, dim) -= w * f * u;
    if (acc.with_hessian) {
      const Mat uu = u * u.transpose();
      Mat Hb = s.stiffness * uu + (f / r) * (Mat::Identity(dim, dim) - uu);
      Mat H(2 * dim, 2 * dim);
      H.topLeftCorner(dim, dim) = Hb;
      H.bottomRightCorner(dim, dim) = Hb;
      H.topRightCorner(dim, dim) = -Hb;
      H.bottomLeftCorner(dim, dim) = -Hb;
      H *= w;
      if (opts.project) eigen_clamp_psd(H, 1e-12);
      std::vector<int> dofs(static_cast<std::size_t>(2 * dim));
      for (int c = 0; c < dim; ++c) {
        dofs[static_cast<std::size_t>(c)] = s.a * dim + c;
        dofs[static_cast<std::size_t>(dim + c)] = s.b * dim + c;
      }
      acc.add_block(dofs, H);
    }
  }
}

inline void add_gravity(const Scene& scene, const SimState& state, double w, Accumulator& acc) {
  const int dim = scene.mesh.dim;
  const Vec g = scene.gravity * scene.gravity_scale;
  for (int v = 0; v < scene.mesh.vertex_count(); ++v) {
    const double m = scene.mesh.vertex_volumes[v] * scene.material.density;
    acc.value -= w * m * g.dot(state.x.segment(v * dim, dim));
    acc.grad.segment(v * dim, dim) -= w * m * g;
  }
}

}  // namespace detail

inline EnergyAssembly assemble(const Scene& scene, const SimState& state, const TermMask& terms,
                               const AssemblyOptions& opts = {}) {
  const int dim = scene.mesh.dim;
  detail::Accumulator acc;
  acc.with_hessian = opts.with_hessian;
  acc.grad = Vec::Zero(state.x.size());

  EnergyAssembly out;
  out.dim = dim;
  out.n_free_vertices = scene.bc.free_vertex_count();

  const double w = scene.mode == Mode::Dynamic ? scene.timestep * scene.timestep : 1.0;
  if (terms.inertia) {
    if (scene.mode != Mode::Dynamic) throw ConfigError("inertia term requires dynamic mode");
    detail::add_inertia(state, acc);
  }
  if (terms.elastic) {
    if (dim == 1) detail::add_segment_springs(scene, state, w, acc, out.inverted_segments);
    else detail::add_fcr_triangles(scene, state, w, opts, acc, out.degenerate_elements);
  }
  if (terms.springs) detail::add_coupling_springs(scene, state, w, opts, acc);
  if (terms.gravity) detail::add_gravity(scene, state, w, acc);

  out.value = acc.value;
  out.gradient = scene.bc.reduce(acc.grad);
  if (opts.with_hessian) {
    const int nf = scene.bc.free_dof_count();
    std::vector<Triplet> reduced;
    reduced.reserve(acc.trips.size());
    for (const Triplet& t : acc.trips) {
      const int r = scene.bc.full_to_free(static_cast<int>(t.row()));
      const int c = scene.bc.full_to_free(static_cast<int>(t.col()));
      if (r >= 0 && c >= 0) reduced.emplace_back(r, c, t.value());
    }
    out.hessian.resize(nf, nf);
    out.hessian.setFromTriplets(reduced.begin(), reduced.end());
  }
  return out;
}

/// Objective value only; the cheap path used by line searches.
inline double energy_value(const Scene& scene, const SimState& state, const TermMask& terms) {
  AssemblyOptions opts;
  opts.with_hessian = false;
  detail::Accumulator acc;
  acc.with_hessian = false;
  acc.grad = Vec::Zero(state.x.size());
  const double w = scene.mode == Mode::Dynamic ? scene.timestep * scene.timestep : 1.0;
  std::vector<int> scratch;
  if (terms.inertia) detail::add_inertia(state, acc);
  if (terms.elastic) {
    if (scene.mesh.dim == 1) detail::add_segment_springs(scene, state, w, acc, scratch);
    else detail::add_fcr_triangles(scene, state, w, opts, acc, scratch);
  }
  if (terms.springs) detail::add_coupling_springs(scene, state, w, opts, acc);
  if (terms.gravity) detail::add_gravity(scene, state, w, acc);
  return acc.value;
}

/// The coordinate/complement partition of an assembled system for one free
/// vertex: H_ii (dim x dim), H_iC, H_CC, g_i, g_C. Row/column `k` of the
/// complement corresponds to free DOF c_to_free[k].
struct CoordinateBlocks {
  Mat Hii;
  Mat HiC;
  SpMat Hcc;
  Vec gi;
  Vec gC;
  std::vector<Eigen::Index> c_to_free;
};

inline CoordinateBlocks extract_blocks(const EnergyAssembly& assembly, const BoundaryConditions& bc,
                                       int vertex) {
  if (vertex < 0 || vertex >= static_cast<int>(bc.vertex_to_free.size()))
    throw ConfigError("extract_blocks: vertex out of range");
  const int f = bc.vertex_to_free[static_cast<std::size_t>(vertex)];
  if (f < 0) throw ConfigError("extract_blocks: vertex " + std::to_string(vertex) + " is pinned");
  const int dim = assembly.dim;
  const Eigen::Index n = assembly.hessian.rows();

  std::vector<Eigen::Index> block(static_cast<std::size_t>(dim));
  for (int c = 0; c < dim; ++c) block[static_cast<std::size_t>(c)] = f * dim + c;

  CoordinateBlocks out;
  Submatrix sub = delete_rowcol(assembly.hessian, block);
  out.Hcc = std::move(sub.matrix);
  out.c_to_free = std::move(sub.new_to_old);

  out.Hii = Mat::Zero(dim, dim);
  out.HiC = Mat::Zero(dim, n - dim);
  const Mat dense_cols = Mat(assembly.hessian.middleCols(f * dim, dim));
  for (int c = 0; c < dim; ++c) {
    for (Eigen::Index r = 0; r < n; ++r) {
      const double v = dense_cols(r, c);
      if (r >= f * dim && r < f * dim + dim) out.Hii(r - f * dim, c) = v;
      else {
        // H is symmetric, so column (i, c) transposed gives row c of H_iC
        const Eigen::Index k = r < f * dim ? r : r - dim;
        out.HiC(c, k) = v;
      }
    }
  }
  out.gi = assembly.gradient.segment(f * dim, dim);
  out.gC = Vec(n - dim);
  for (Eigen::Index k = 0; k < n - dim; ++k) out.gC[k] = assembly.gradient[out.c_to_free[static_cast<std::size_t>(k)]];
  return out;
}

}  // namespace ccsim
