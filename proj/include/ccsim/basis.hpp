#pragma once

#include "ccsim/energy.hpp"

#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

namespace ccsim {

/// Per-coordinate equilibrium responses, stored padded: column block i holds
/// U_i over ALL free DOFs with zeros at block i itself. With that convention,
/// for Y = H * U, the block-i rows of Y's column block i equal H_iC U_i and
/// the remaining rows equal H_CC U_i, so the solver never re-partitions H.
struct PerturbationBasis {
  int dim = 0;
  int n_free = 0;  // free vertex blocks
  Mat U;           // (n_free*dim) x (n_free*dim)

  // provenance of the build, used to validate reuse across steps
  std::uint64_t scene_hash = 0;
  Vec built_at_x;  // full-space configuration at build time
  int built_at_step = 0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(n_free) * dim; }

  /// Padded response of coordinate i (zeros at its own block).
  Eigen::Ref<const Mat> block(int i) const { return U.middleCols(static_cast<Eigen::Index>(i) * dim, dim); }
  Eigen::Ref<Mat> block(int i) { return U.middleCols(static_cast<Eigen::Index>(i) * dim, dim); }
};

/// Build the basis from a free-space Hessian: U_i = -H_CC^{-1} H_Ci for each
/// coordinate block i, each with its own factorization of the complement.
/// Each solve is verified against the defining equation; a residual above
/// rel_tol * ||H_Ci|| aborts the build. `labels`, when given, maps free block
/// index to a mesh vertex id for error messages.
inline PerturbationBasis build_basis(const SpMat& H, int dim,
                                     const std::vector<int>& labels = {},
                                     double rel_tol = 1e-8) {
  if (dim < 1) throw ConfigError("build_basis: dim must be positive");
  const Eigen::Index n = H.rows();
  if (n % dim != 0) throw ConfigError("build_basis: matrix size not a multiple of dim");
  const int n_free = static_cast<int>(n / dim);

  PerturbationBasis basis;
  basis.dim = dim;
  basis.n_free = n_free;
  basis.U = Mat::Zero(n, n);

  std::vector<Eigen::Index> block(static_cast<std::size_t>(dim));
  for (int i = 0; i < n_free; ++i) {
    for (int c = 0; c < dim; ++c) block[static_cast<std::size_t>(c)] = static_cast<Eigen::Index>(i) * dim + c;
    Submatrix sub = delete_rowcol(H, block);

    // H_Ci: columns of block i with the block's own rows removed
    const Mat cols = Mat(H.middleCols(static_cast<Eigen::Index>(i) * dim, dim));
    Mat Hci(n - dim, dim);
    for (Eigen::Index k = 0; k < n - dim; ++k)
      Hci.row(k) = cols.row(sub.new_to_old[static_cast<std::size_t>(k)]);

    Mat Ui;
    try {
      Factorization f = factorize(sub.matrix);
      Ui = f.solve(Mat(-Hci));
    } catch (const SolveError& err) {
      const int label = labels.empty() ? i : labels[static_cast<std::size_t>(i)];
      throw SolveError("basis build failed at vertex " + std::to_string(label) + ": " + err.what());
    }

    const double rhs_norm = Hci.norm();
    const double res = (sub.matrix * Ui + Hci).norm();
    if (res > rel_tol * rhs_norm + 1e-300) {
      const int label = labels.empty() ? i : labels[static_cast<std::size_t>(i)];
      throw SolveError("basis residual " + std::to_string(res) + " exceeds tolerance at vertex " +
                       std::to_string(label));
    }

    for (Eigen::Index k = 0; k < n - dim; ++k)
      basis.U.block(sub.new_to_old[static_cast<std::size_t>(k)], static_cast<Eigen::Index>(i) * dim, 1, dim) =
          Ui.row(k);
  }
  return basis;
}

/// Assemble the scene's Hessian at the given state and build the basis from
/// it. `include_springs = false` leaves the coupling springs out of the
/// build, yielding a basis unaware of them (the solve still sees them).
inline PerturbationBasis build_scene_basis(const Scene& scene, const SimState& state, int step,
                                           bool include_springs = true) {
  TermMask terms = scene_terms(scene);
  terms.springs = terms.springs && include_springs;
  EnergyAssembly a = assemble(scene, state, terms);
  PerturbationBasis basis = build_basis(a.hessian, scene.mesh.dim, scene.bc.free_vertices);
  basis.scene_hash = scene_hash(scene);
  basis.built_at_x = state.x;
  basis.built_at_step = step;
  return basis;
}

enum class NoiseLaw {
  Uniform,        // independent entrywise uniform on [0, sigma)
  ConstantShift,  // add sigma to every entry
};

/// Perturb the stored responses. Only complement entries are touched; the
/// structural zero block of each column stays zero. Draws come straight from
/// the raw engine so the stream is identical on every platform.
inline void inject_noise(PerturbationBasis& basis, double sigma, std::uint64_t seed,
                         NoiseLaw law = NoiseLaw::Uniform) {
  if (sigma == 0.0) return;
  Rng rng(seed);
  const Eigen::Index n = basis.size();
  for (int i = 0; i < basis.n_free; ++i) {
    const Eigen::Index i0 = static_cast<Eigen::Index>(i) * basis.dim;
    for (int c = 0; c < basis.dim; ++c) {
      for (Eigen::Index r = 0; r < n; ++r) {
        if (r >= i0 && r < i0 + basis.dim) continue;
        if (law == NoiseLaw::Uniform) {
          const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0,1)
          basis.U(r, i0 + c) += sigma * u;
        } else {
          basis.U(r, i0 + c) += sigma;
        }
      }
    }
  }
}

/// Least-squares rotation of each vertex one-ring from rest to `x`, via the
/// polar factor of the edge covariance. Degenerate rings fall back to the
/// identity. dim must be 2.
inline std::vector<Mat2> estimate_rotations(const Mesh& mesh, const Vec& x) {
  if (mesh.dim != 2) throw ConfigError("estimate_rotations: requires a 2D mesh");
  const int n = mesh.vertex_count();
  std::vector<Mat2> cov(static_cast<std::size_t>(n), Mat2::Zero());
  auto accumulate = [&](int a, int b) {
    const Vec2 e_cur = x.segment<2>(2 * b) - x.segment<2>(2 * a);
    const Vec2 e_rest = mesh.rest_positions.segment<2>(2 * b) - mesh.rest_positions.segment<2>(2 * a);
    cov[static_cast<std::size_t>(a)] += e_cur * e_rest.transpose();
    cov[static_cast<std::size_t>(b)] += e_cur * e_rest.transpose();
  };
  for (const auto& tri : mesh.elements) {
    accumulate(tri[0], tri[1]);
    accumulate(tri[1], tri[2]);
    accumulate(tri[2], tri[0]);
  }
  std::vector<Mat2> rot(static_cast<std::size_t>(n), Mat2::Identity());
  for (int v = 0; v < n; ++v) {
    Mat2& A = cov[static_cast<std::size_t>(v)];
    if (A.norm() < 1e-12) continue;  // isolated or collapsed ring
    Mat2 Uf, Vf;
    Vec2 sig;
    detail::signed_svd2(A, Uf, sig, Vf);
    rot[static_cast<std::size_t>(v)] = Uf * Vf.transpose();
  }
  return rot;
}

/// Rotate the stored responses to the current configuration: each vertex
/// row block j of U is premultiplied by R_j(now) * R_j(build)^T. Returns a
/// fresh matrix; the basis itself keeps the build-time responses.
inline Mat corotate_basis(const PerturbationBasis& basis, const Mesh& mesh,
                          const BoundaryConditions& bc, const Vec& x_now) {
  if (mesh.dim != 2) return basis.U;
  const std::vector<Mat2> r_now = estimate_rotations(mesh, x_now);
  const std::vector<Mat2> r_build = estimate_rotations(mesh, basis.built_at_x);
  Mat rotated = basis.U;
  for (int j = 0; j < basis.n_free; ++j) {
    const int vj = bc.free_vertices[static_cast<std::size_t>(j)];
    const Mat2 R = r_now[static_cast<std::size_t>(vj)] * r_build[static_cast<std::size_t>(vj)].transpose();
    rotated.middleRows(static_cast<Eigen::Index>(j) * 2, 2) =
        R * rotated.middleRows(static_cast<Eigen::Index>(j) * 2, 2);
  }
  return rotated;
}

/// Binary cache of a built basis, keyed by scene hash and build snapshot so a
/// stale file can never be applied to the wrong configuration.
inline void save_basis(const PerturbationBasis& basis, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("save_basis: cannot open " + path);
  const char magic[8] = {'C', 'C', 'B', 'A', 'S', 'I', 'S', '1'};
  out.write(magic, 8);
  auto put = [&out](const void* p, std::size_t bytes) { out.write(static_cast<const char*>(p), static_cast<std::streamsize>(bytes)); };
  const std::int64_t dim = basis.dim, n_free = basis.n_free, step = basis.built_at_step,
                     xn = basis.built_at_x.size();
  put(&dim, 8);
  put(&n_free, 8);
  put(&step, 8);
  put(&basis.scene_hash, 8);
  put(&xn, 8);
  put(basis.built_at_x.data(), static_cast<std::size_t>(xn) * 8);
  put(basis.U.data(), static_cast<std::size_t>(basis.U.size()) * 8);
  if (!out) throw ConfigError("save_basis: write failed for " + path);
}

inline PerturbationBasis load_basis(const std::string& path, std::uint64_t expect_scene_hash,
                                    const Vec& expect_x) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("load_basis: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::string(magic, 8) != "CCBASIS1") throw ConfigError("load_basis: bad header in " + path);
  auto get = [&in](void* p, std::size_t bytes) { in.read(static_cast<char*>(p), static_cast<std::streamsize>(bytes)); };
  std::int64_t dim = 0, n_free = 0, step = 0, xn = 0;
  std::uint64_t hash = 0;
  get(&dim, 8);
  get(&n_free, 8);
  get(&step, 8);
  get(&hash, 8);
  get(&xn, 8);
  PerturbationBasis basis;
  basis.dim = static_cast<int>(dim);
  basis.n_free = static_cast<int>(n_free);
  basis.built_at_step = static_cast<int>(step);
  basis.scene_hash = hash;
  basis.built_at_x = Vec(xn);
  get(basis.built_at_x.data(), static_cast<std::size_t>(xn) * 8);
  basis.U = Mat(basis.size(), basis.size());
  get(basis.U.data(), static_cast<std::size_t>(basis.U.size()) * 8);
  if (!in) throw ConfigError("load_basis: truncated file " + path);

  if (hash != expect_scene_hash) throw ConfigError("load_basis: scene hash mismatch for " + path);
  if (basis.built_at_x.size() != expect_x.size() || basis.built_at_x != expect_x)
    throw ConfigError("load_basis: configuration snapshot mismatch for " + path);
  return basis;
}

}  // namespace ccsim
