#pragma once

#include "ccsim/basis.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace ccsim {

enum class SolverKind { Newton, CD, JGS2, CC };

inline std::string to_string(SolverKind k) {
  switch (k) {
    case SolverKind::Newton: return "newton";
    case SolverKind::CD: return "cd";
    case SolverKind::JGS2: return "jgs2";
    case SolverKind::CC: return "cc";
  }
  return "?";
}

inline SolverKind parse_solver(const std::string& s) {
  if (s == "newton") return SolverKind::Newton;
  if (s == "cd") return SolverKind::CD;
  if (s == "jgs2") return SolverKind::JGS2;
  if (s == "cc") return SolverKind::CC;
  throw ConfigError("unknown solver '" + s + "' (expected newton|cd|jgs2|cc)");
}

inline bool solver_uses_basis(SolverKind k) { return k == SolverKind::CC || k == SolverKind::JGS2; }

enum class ConvergenceMode { NormalizedGradient, DistanceToReference };

struct SolverConfig {
  SolverKind kind = SolverKind::CC;
  int max_iters = 500;
  double tol = 1e-2;
  bool line_search = true;
  bool corotated = false;
  int restart_period = 0;  // rebuild the basis every this many steps; 0 = build once
  bool basis_includes_springs = true;
  double noise_sigma = 0.0;
  NoiseLaw noise_law = NoiseLaw::Uniform;
  std::uint64_t seed = 0;
  bool record_heatmap = false;
  ConvergenceMode mode = ConvergenceMode::NormalizedGradient;
  Vec reference;  // full-space positions; required in distance mode

  void validate() const {
    if (max_iters < 1) throw ConfigError("solver: max_iters must be at least 1");
    if (!(tol > 0)) throw ConfigError("solver: tol must be positive");
    if (mode == ConvergenceMode::DistanceToReference && reference.size() == 0)
      throw ConfigError("solver: distance convergence mode needs a reference solution");
  }
};

struct TraceRow {
  int iteration = 0;
  double energy = 0.0;
  double grad_norm = 0.0;
  double residual = 0.0;
  double step_norm = 0.0;  // norm of the search direction taken to reach this iterate
  double alpha = 0.0;      // line-search step taken to reach this iterate
};

struct ConvergenceTrace {
  std::vector<TraceRow> rows;  // rows[k] describes the iterate after k sweeps/steps
  bool converged = false;
  int iterations = 0;  // sweeps executed before convergence (or max_iters)
  double final_residual = std::numeric_limits<double>::quiet_NaN();
  int cc_fallbacks = 0;  // coordinates that fell back to the plain update
  int ls_fallbacks = 0;  // iterations re-run with the plain update after a failed line search
  std::vector<std::string> warnings;
  std::vector<Vec> heatmap;  // one entry per executed iteration: per-free-vertex displacement magnitude
};

/// Scale-invariant residual: ||g|| / (V * n * E), additionally / h in dynamic
/// mode, with V the total mesh volume, n the vertex count, E Young's modulus.
/// Distance mode instead measures ||x - x_ref|| / n against a reference.
inline double convergence_residual(const Scene& scene, const SimState& state,
                                   const EnergyAssembly& assembly, const SolverConfig& cfg) {
  const double n = static_cast<double>(scene.mesh.vertex_count());
  if (cfg.mode == ConvergenceMode::DistanceToReference) {
    if (cfg.reference.size() != state.x.size())
      throw ConfigError("convergence: reference size does not match configuration");
    return (state.x - cfg.reference).norm() / n;
  }
  double r = assembly.gradient.norm() / (scene.mesh.total_volume * n * scene.material.young);
  if (scene.mode == Mode::Dynamic) r /= scene.timestep;
  return r;
}

namespace detail {

inline Mat diag_block(const SpMat& H, int i, int dim) {
  Mat out = Mat::Zero(dim, dim);
  const Eigen::Index i0 = static_cast<Eigen::Index>(i) * dim;
  for (int c = 0; c < dim; ++c)
    for (SpMat::InnerIterator it(H, i0 + c); it; ++it)
      if (it.row() >= i0 && it.row() < i0 + dim) out(it.row() - i0, c) = it.value();
  return out;
}

}  // namespace detail

/// The condensed quantities of one coordinate solve, in partitioned form.
/// This is the dense reference path: `jacobi_sweep` computes the same update
/// through the padded-basis product and is cross-checked against it in tests.
struct SchurUpdate {
  Mat S;       // H_iC U_i Ht^{-1} U_i' H_iC'
  Mat Ht;      // U_i' H_CC U_i
  Vec gt;      // g_i - H_iC U_i Ht^{-1} U_i' g_C
  Vec dx;      // -(H_ii - S)^{-1} gt
  Vec dalpha;  // -Ht^{-1} (U_i' g_C + (H_iC U_i)' dx), the subspace displacement
};

inline SchurUpdate cc_update(const Mat& Hii, const Mat& HiC, const Mat& Hcc, const Vec& gi,
                             const Vec& gC, const Mat& Ui) {
  SchurUpdate out;
  const Mat W = HiC * Ui;
  out.Ht = Ui.transpose() * Hcc * Ui;
  const Eigen::FullPivLU<Mat> lu(out.Ht);
  if (!lu.isInvertible()) throw SolveError("cc_update: singular reduced complementary stiffness");
  out.S = W * lu.solve(W.transpose());
  const Vec utg = Ui.transpose() * gC;
  out.gt = gi - W * lu.solve(utg);
  out.dx = Eigen::FullPivLU<Mat>(Hii - out.S).solve(-out.gt);
  out.dalpha = -lu.solve(utg + W.transpose() * out.dx);
  return out;
}

inline Vec jgs2_update(const Mat& Hii, const Mat& Hcc, const Vec& gi, const Vec& gC, const Mat& Ui) {
  const Mat Ht = Ui.transpose() * Hcc * Ui;
  return Eigen::FullPivLU<Mat>(Hii + Ht).solve(-(gi + Ui.transpose() * gC));
}

struct SweepResult {
  Vec direction;      // free-space aggregate of all coordinate updates
  int fallbacks = 0;  // CC coordinates that used the plain update instead
};

/// One Jacobi sweep: every coordinate update is computed against the same
/// frozen gradient and Hessian, so the result is independent of traversal
/// order (`order` exists to let tests assert exactly that).
///
/// Per coordinate i with the padded responses U_i (zero at block i):
///   Y_i = H U_i gives H_iC U_i at the block rows and H_CC U_i elsewhere,
///   Ht  = U_i' Y_i = U_i' H_CC U_i,
///   cc:   dx_i = -(H_ii - S)^{-1} (g_i - W Ht^{-1} U_i' g),  W = block rows of Y_i, S = W Ht^{-1} W'
///   jgs2: dx_i = -(H_ii + Ht)^{-1} (g_i + U_i' g)
///   cd:   dx_i = -H_ii^{-1} g_i
inline SweepResult jacobi_sweep(const SpMat& H, const Vec& g, SolverKind kind, int dim,
                                const Mat* U = nullptr, const std::vector<int>* order = nullptr) {
  const Eigen::Index n = H.rows();
  const int n_blocks = static_cast<int>(n / dim);
  if (solver_uses_basis(kind)) {
    if (U == nullptr) throw ConfigError("jacobi_sweep: " + to_string(kind) + " needs a basis");
    if (U->rows() != n || U->cols() != n) throw ConfigError("jacobi_sweep: basis size mismatch");
  }

  SweepResult out;
  out.direction = Vec::Zero(n);

  Mat Y;
  if (solver_uses_basis(kind)) Y = H * (*U);

  for (int idx = 0; idx < n_blocks; ++idx) {
    const int i = order ? (*order)[static_cast<std::size_t>(idx)] : idx;
    const Eigen::Index i0 = static_cast<Eigen::Index>(i) * dim;
    const Mat Hii = detail::diag_block(H, i, dim);
    const Vec gi = g.segment(i0, dim);

    Vec dx;
    if (kind == SolverKind::CD) {
      dx = small_solve(Hii, Vec(-gi));
    } else {
      const auto Ui = U->middleCols(i0, dim);
      const auto Yi = Y.middleCols(i0, dim);
      const Mat Ht = Ui.transpose() * Yi;
      const Mat W = Yi.middleRows(i0, dim);  // H_iC U_i
      const Vec utg = Ui.transpose() * g;    // U_i' g_C
      if (kind == SolverKind::JGS2) {
        dx = small_solve(Mat(Hii + Ht), Vec(-(gi + utg)));
      } else {
        try {
          const Mat HtInvWt = small_solve(Ht, Mat(W.transpose()));  // Ht^{-1} W'
          const Vec HtInvUtg = small_solve(Ht, utg);
          const Mat K = Hii - W * HtInvWt;
          const Vec gt = gi - W * HtInvUtg;
          dx = small_solve(K, Vec(-gt));
          if (!dx.allFinite()) throw SolveError("non-finite coordinate update");
        } catch (const SolveError&) {
          dx = small_solve(Hii, Vec(-gi));
          ++out.fallbacks;
        }
      }
    }
    out.direction.segment(i0, dim) = dx;
  }
  return out;
}

/// Full Newton direction d = -H^{-1} g from a sparse factorization.
inline Vec newton_step(const EnergyAssembly& assembly) {
  Factorization f = factorize(assembly.hessian);
  return f.solve(Vec(-assembly.gradient));
}

struct LineSearchResult {
  double alpha = 0.0;
  int evals = 0;  // objective evaluations spent backtracking
  bool ok = false;
  std::string note;
};

/// Backtracking line search on the total objective with the Armijo condition
/// E(x + a d) <= E(x) + c a g'd, halving from a = 1.
inline LineSearchResult line_search(const Scene& scene, SimState& state, const TermMask& terms,
                                    double e0, const Vec& g, const Vec& d_free) {
  constexpr double armijo_c = 1e-4;
  constexpr int max_halvings = 30;
  LineSearchResult out;
  const double gd = g.dot(d_free);
  if (!(gd < 0)) {
    out.note = "search direction is not a descent direction";
    return out;
  }
  const Vec x0 = state.x;
  const Vec d_full = scene.bc.expand(d_free);
  double alpha = 1.0;
  for (int k = 0; k < max_halvings; ++k) {
    state.x = x0 + alpha * d_full;
    const double e = energy_value(scene, state, terms);
    ++out.evals;
    if (std::isfinite(e) && e <= e0 + armijo_c * alpha * gd) {
      out.alpha = alpha;
      out.ok = true;
      return out;  // state.x already holds the accepted iterate
    }
    alpha *= 0.5;
  }
  state.x = x0;
  out.note = "line search exhausted backtracking budget";
  return out;
}

/// Minimize the scene objective from the current state. The state is updated
/// in place; pinned DOFs are untouched. `basis` is required for cc/jgs2 and
/// is re-rotated to the current configuration each iteration when
/// cfg.corotated is set.
inline ConvergenceTrace solve_minimize(const Scene& scene, SimState& state, const SolverConfig& cfg,
                                       const PerturbationBasis* basis = nullptr) {
  cfg.validate();
  if (solver_uses_basis(cfg.kind) && basis == nullptr)
    throw ConfigError("solve: " + to_string(cfg.kind) + " requires a perturbation basis");

  const TermMask terms = scene_terms(scene);
  const int dim = scene.mesh.dim;
  const Vec x_start = state.x;
  ConvergenceTrace trace;
  double pending_step = 0.0;  // direction norm / alpha of the step that
  double pending_alpha = 0.0; // produced the current iterate (row 0: zeros)

  for (int iter = 0;; ++iter) {
    const EnergyAssembly assembly = assemble(scene, state, terms);
    const double residual = convergence_residual(scene, state, assembly, cfg);

    TraceRow row;
    row.iteration = iter;
    row.energy = assembly.value;
    row.grad_norm = assembly.gradient.norm();
    row.residual = residual;
    row.step_norm = pending_step;
    row.alpha = pending_alpha;
    trace.rows.push_back(row);

    trace.final_residual = residual;
    trace.iterations = iter;
    if (residual < cfg.tol) {
      trace.converged = true;
      break;
    }
    if (iter >= cfg.max_iters) break;

    Vec d;
    int fallbacks = 0;
    if (cfg.kind == SolverKind::Newton) {
      try {
        d = newton_step(assembly);
      } catch (const SolveError& err) {
        trace.warnings.push_back(std::string("newton: ") + err.what());
        break;
      }
    } else {
      const Mat* U_ptr = nullptr;
      Mat U_work;
      if (solver_uses_basis(cfg.kind)) {
        if (cfg.corotated && dim == 2) {
          U_work = corotate_basis(*basis, scene.mesh, scene.bc, state.x);
          U_ptr = &U_work;
        } else {
          U_ptr = &basis->U;
        }
      }
      SweepResult sweep = jacobi_sweep(assembly.hessian, assembly.gradient, cfg.kind, dim, U_ptr);
      d = std::move(sweep.direction);
      fallbacks = sweep.fallbacks;
    }
    trace.cc_fallbacks += fallbacks;

    double alpha = 1.0;
    if (cfg.line_search) {
      LineSearchResult ls = line_search(scene, state, terms, assembly.value, assembly.gradient, d);
      if (!ls.ok && solver_uses_basis(cfg.kind)) {
        // A stale or perturbed basis can aggregate into a non-descent sweep.
        // Re-run the iteration with the plain block-diagonal update, which is
        // a descent direction whenever the diagonal blocks are SPD.
        SweepResult plain = jacobi_sweep(assembly.hessian, assembly.gradient, SolverKind::CD, dim);
        d = std::move(plain.direction);
        ++trace.ls_fallbacks;
        ls = line_search(scene, state, terms, assembly.value, assembly.gradient, d);
      }
      if (!ls.ok) {
        trace.warnings.push_back("iteration " + std::to_string(iter) + ": " + ls.note);
        break;
      }
      alpha = ls.alpha;
    } else {
      state.x += scene.bc.expand(d);
    }

    if (!state.x.allFinite()) {
      trace.warnings.push_back("iteration " + std::to_string(iter + 1) + ": non-finite iterate, aborting");
      state.x = x_start;
      break;
    }

    pending_step = d.norm();
    pending_alpha = alpha;

    if (cfg.record_heatmap) {
      Vec hrow(scene.bc.free_vertex_count());
      for (int j = 0; j < scene.bc.free_vertex_count(); ++j) {
        const int v = scene.bc.free_vertices[static_cast<std::size_t>(j)];
        hrow[j] = (state.x.segment(v * dim, dim) - x_start.segment(v * dim, dim)).norm();
      }
      trace.heatmap.push_back(std::move(hrow));
    }
  }

  if (trace.cc_fallbacks > 0)
    trace.warnings.push_back("cc: plain-update fallback used for " + std::to_string(trace.cc_fallbacks) +
                             " coordinate solves");
  if (trace.ls_fallbacks > 0)
    trace.warnings.push_back("line search: " + std::to_string(trace.ls_fallbacks) +
                             " non-descent sweeps replaced by the plain update");
  return trace;
}

}  // namespace ccsim
