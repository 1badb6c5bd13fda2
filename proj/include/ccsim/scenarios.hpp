#pragma once

#include "ccsim/io.hpp"
#include "ccsim/simulation.hpp"

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#ifndef CCSIM_CONFIG_DIR
#define CCSIM_CONFIG_DIR "configs"
#endif

namespace ccsim {

struct ScenarioOptions {
  std::string config_dir = CCSIM_CONFIG_DIR;
  std::uint64_t seed = 0;
  bool timing = false;           // fill wall_ms; off by default so reruns are byte-identical
  bool record_heatmaps = true;   // per-vertex displacement maps where the scenario defines them
  std::optional<SolverKind> solver_filter;  // restrict the solver matrix (sweep subcommand)
};

/// Everything a scenario produces. Labels are stable strings such as
/// "cc-restart" or "cd"; the summary is the normative output, the rest feeds
/// traces, figures, and tests.
struct ScenarioResult {
  std::string name;
  std::vector<SummaryRecord> summary;
  std::vector<std::pair<std::string, ConvergenceTrace>> traces;
  std::vector<std::pair<std::string, std::vector<Vec>>> heatmaps;
  std::vector<std::pair<std::string, Vec>> final_positions;
  std::map<std::string, double> metrics;
};

inline const ConvergenceTrace* find_trace(const ScenarioResult& r, const std::string& label) {
  for (const auto& [name, trace] : r.traces)
    if (name == label) return &trace;
  return nullptr;
}

namespace detail {

inline nlohmann::json load_scenario_json(const std::string& config_dir, const std::string& name) {
  const std::string path = config_dir + "/" + name + ".json";
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario config: " + path);
  nlohmann::json j;
  in >> j;
  return j;
}

class StopWatch {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

inline bool variant_selected(const ScenarioOptions& opts, SolverKind kind) {
  return !opts.solver_filter || *opts.solver_filter == kind;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// rod-impulse: one Backward Euler step of a free rod kicked at the right end,
// swept over six decades of stiffness. Convergence is distance to a tightly
// solved Newton reference, so "iterations" means iterations to reach the
// answer, not to flatten the gradient.
// ---------------------------------------------------------------------------

struct RodImpulseProtocol {
  std::vector<double> stiffnesses = {1e1, 1e2, 1e3, 1e4, 1e5, 1e6};
  double heat_stiffness = 1e2;  // stiffness at which displacement maps and traces are kept
  int max_iters = 10000;
  double tol = 1e-3;
};

inline ScenarioResult run_rod_impulse(const ScenarioOptions& opts) {
  const RodImpulseProtocol proto;
  ScenarioResult out;
  out.name = "rod-impulse";
  nlohmann::json base = detail::load_scenario_json(opts.config_dir, out.name);

  const SolverKind kinds[] = {SolverKind::Newton, SolverKind::CD, SolverKind::JGS2, SolverKind::CC};
  for (double young : proto.stiffnesses) {
    nlohmann::json j = base;
    j["material"]["young"] = young;
    const Scene scene = scene_from_json(j);
    const Vec reference = newton_reference(scene);
    const bool keep_detail = young == proto.heat_stiffness;

    for (SolverKind kind : kinds) {
      if (!detail::variant_selected(opts, kind)) continue;
      SolverConfig cfg;
      cfg.kind = kind;
      cfg.max_iters = proto.max_iters;
      cfg.tol = proto.tol;
      cfg.mode = ConvergenceMode::DistanceToReference;
      cfg.reference = reference;
      cfg.line_search = false;  // pure sweeps, as in the propagation study
      cfg.record_heatmap = keep_detail && opts.record_heatmaps;
      cfg.seed = opts.seed;

      Simulation sim(scene, cfg);
      detail::StopWatch watch;
      ConvergenceTrace trace = sim.advance();
      const double ms = opts.timing ? watch.ms() : 0.0;

      out.summary.push_back({out.name, to_string(kind), young, trace.iterations, trace.converged,
                             trace.final_residual, ms, opts.seed});
      if (keep_detail) {
        if (cfg.record_heatmap) out.heatmaps.emplace_back(to_string(kind), trace.heatmap);
        trace.heatmap.clear();
        out.traces.emplace_back(to_string(kind), std::move(trace));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// stretch-resolution: a pinned square is stretched to 150% of its width in a
// single quasistatic solve, at grid resolutions from 5x5 to 29x29.
// ---------------------------------------------------------------------------

struct StretchResolutionProtocol {
  std::vector<int> grids = {5, 9, 13, 17, 21, 25, 29};
  int trace_grid = 29;
  int max_iters = 500;
  double tol = 1e-2;
};

inline ScenarioResult run_stretch_resolution(const ScenarioOptions& opts) {
  const StretchResolutionProtocol proto;
  ScenarioResult out;
  out.name = "stretch-resolution";
  nlohmann::json base = detail::load_scenario_json(opts.config_dir, out.name);

  const SolverKind kinds[] = {SolverKind::Newton, SolverKind::CD, SolverKind::JGS2, SolverKind::CC};
  for (int n : proto.grids) {
    nlohmann::json j = base;
    j["mesh"]["nx"] = n;
    j["mesh"]["ny"] = n;
    const Scene scene = scene_from_json(j);

    for (SolverKind kind : kinds) {
      if (!detail::variant_selected(opts, kind)) continue;
      SolverConfig cfg;
      cfg.kind = kind;
      cfg.max_iters = proto.max_iters;
      cfg.tol = proto.tol;
      cfg.line_search = true;
      cfg.seed = opts.seed;

      Simulation sim(scene, cfg);
      detail::StopWatch watch;
      ConvergenceTrace trace = sim.advance();
      const double ms = opts.timing ? watch.ms() : 0.0;

      out.summary.push_back({out.name, to_string(kind), static_cast<double>(n), trace.iterations,
                             trace.converged, trace.final_residual, ms, opts.seed});
      if (n == proto.trace_grid) out.traces.emplace_back(to_string(kind), std::move(trace));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// cantilever-staleness: gravity on a clamped beam is ramped over 20 quasistatic
// steps. The same initial basis is kept (cc), rebuilt every 5 steps
// (cc-restart), or re-rotated per iteration (cc-corotated); per-step iteration
// counts expose how each policy ages.
// ---------------------------------------------------------------------------

struct CantileverProtocol {
  int steps = 20;
  int restart_period = 5;
  int max_iters = 400;
  double tol = 1e-8;
};

inline ScenarioResult run_cantilever_staleness(const ScenarioOptions& opts) {
  const CantileverProtocol proto;
  ScenarioResult out;
  out.name = "cantilever-staleness";
  nlohmann::json base = detail::load_scenario_json(opts.config_dir, out.name);

  struct Variant {
    std::string label;
    SolverKind kind;
    int restart = 0;
    bool corotated = false;
  };
  const std::vector<Variant> variants = {
      {"newton", SolverKind::Newton},
      {"cc", SolverKind::CC},
      {"cc-restart", SolverKind::CC, proto.restart_period},
      {"cc-corotated", SolverKind::CC, 0, true},
  };

  for (const Variant& v : variants) {
    if (!detail::variant_selected(opts, v.kind)) continue;
    SolverConfig cfg;
    cfg.kind = v.kind;
    cfg.max_iters = proto.max_iters;
    cfg.tol = proto.tol;
    cfg.line_search = true;
    cfg.restart_period = v.restart;
    cfg.corotated = v.corotated;
    cfg.seed = opts.seed;

    Simulation sim(scene_from_json(base), cfg);
    for (int step = 0; step < proto.steps; ++step) {
      detail::StopWatch watch;
      ConvergenceTrace trace = sim.advance();
      const double ms = opts.timing ? watch.ms() : 0.0;
      out.summary.push_back({out.name, v.label, static_cast<double>(step), trace.iterations,
                             trace.converged, trace.final_residual, ms, opts.seed});
    }
    out.final_positions.emplace_back(v.label, sim.state().x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// basis-noise: a stretched rod whose exact basis is polluted with entrywise
// uniform noise of growing magnitude, solved with and without a global line
// search, three noise streams each.
// ---------------------------------------------------------------------------

struct BasisNoiseProtocol {
  std::vector<double> sigmas = {0.0, 1e-3, 3e-3, 1e-2, 2e-2, 3e-2};
  int seeds = 3;
  int max_iters = 1000;
  double tol = 1e-2;
};

inline ScenarioResult run_basis_noise(const ScenarioOptions& opts) {
  const BasisNoiseProtocol proto;
  ScenarioResult out;
  out.name = "basis-noise";
  nlohmann::json base = detail::load_scenario_json(opts.config_dir, out.name);
  const Scene scene = scene_from_json(base);

  for (bool line_search : {true, false}) {
    if (!detail::variant_selected(opts, SolverKind::CC)) continue;
    const std::string label = line_search ? "cc-ls" : "cc-nols";
    for (double sigma : proto.sigmas) {
      for (int k = 0; k < proto.seeds; ++k) {
        const std::uint64_t seed = opts.seed + static_cast<std::uint64_t>(k);
        SolverConfig cfg;
        cfg.kind = SolverKind::CC;
        cfg.max_iters = proto.max_iters;
        cfg.tol = proto.tol;
        cfg.line_search = line_search;
        cfg.noise_sigma = sigma;
        cfg.noise_law = NoiseLaw::Uniform;
        cfg.seed = seed;

        Simulation sim(scene, cfg);
        detail::StopWatch watch;
        ConvergenceTrace trace = sim.advance();
        const double ms = opts.timing ? watch.ms() : 0.0;
        out.summary.push_back({out.name, label, sigma, trace.iterations, trace.converged,
                               trace.final_residual, ms, seed});
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// buckling: a clamped beam compressed by 1.5% of its width per step for 18
// steps, through the buckling transition. A small lateral nudge biases the
// buckling direction; the buckling step is detected as the largest jump in
// maximum lateral deflection.
// ---------------------------------------------------------------------------

struct BucklingProtocol {
  int steps = 18;
  int max_iters = 500;
  double tol = 1e-8;
};

inline ScenarioResult run_buckling(const ScenarioOptions& opts) {
  const BucklingProtocol proto;
  ScenarioResult out;
  out.name = "buckling";
  nlohmann::json base = detail::load_scenario_json(opts.config_dir, out.name);

  struct Variant {
    std::string label;
    SolverKind kind;
    bool corotated = false;
  };
  const std::vector<Variant> variants = {
      {"newton", SolverKind::Newton},
      {"cc", SolverKind::CC},
      {"cc-corotated", SolverKind::CC, true},
  };

  for (const Variant& v : variants) {
    if (!detail::variant_selected(opts, v.kind)) continue;
    SolverConfig cfg;
    cfg.kind = v.kind;
    cfg.max_iters = proto.max_iters;
    cfg.tol = proto.tol;
    cfg.line_search = true;
    cfg.corotated = v.corotated;
    cfg.seed = opts.seed;

    Simulation sim(scene_from_json(base), cfg);
    const Scene& scene = sim.scene();
    double prev_lateral = 0.0, max_jump = 0.0;
    int buckle_step = -1;
    for (int step = 0; step < proto.steps; ++step) {
      detail::StopWatch watch;
      ConvergenceTrace trace = sim.advance();
      const double ms = opts.timing ? watch.ms() : 0.0;
      out.summary.push_back({out.name, v.label, static_cast<double>(step), trace.iterations,
                             trace.converged, trace.final_residual, ms, opts.seed});

      double lateral = 0.0;
      for (int vtx = 0; vtx < scene.mesh.vertex_count(); ++vtx)
        lateral = std::max(lateral, std::abs(sim.state().x[2 * vtx + 1] -
                                             scene.mesh.rest_positions[2 * vtx + 1]));
      const double jump = lateral - prev_lateral;
      if (jump > max_jump) {
        max_jump = jump;
        buckle_step = step;
      }
      prev_lateral = lateral;
    }
    out.metrics["buckle-step/" + v.label] = buckle_step;
    out.metrics["lateral-final/" + v.label] = prev_lateral;
    out.final_positions.emplace_back(v.label, sim.state().x);
  }
  return out;
}

// ---------------------------------------------------------------------------
// spring-coupling: a beam bent by a contracting spring between its top
// corners, solved once with every method. The spring is always part of the
// objective; the -with-spring / -without-spring suffix says whether the basis
// construction saw it.
// ---------------------------------------------------------------------------

struct SpringCouplingProtocol {
  int max_iters = 500;
  double tol = 1e-6;
};

inline ScenarioResult run_spring_coupling(const ScenarioOptions& opts) {
  const SpringCouplingProtocol proto;
  ScenarioResult out;
  out.name = "spring-coupling";
  nlohmann::json base = detail::load_scenario_json(opts.config_dir, out.name);
  const Scene scene = scene_from_json(base);

  struct Variant {
    std::string label;
    SolverKind kind;
    bool spring_in_basis = true;
  };
  const std::vector<Variant> variants = {
      {"newton", SolverKind::Newton},
      {"cd", SolverKind::CD},
      {"cc-with-spring", SolverKind::CC, true},
      {"cc-without-spring", SolverKind::CC, false},
      {"jgs2-with-spring", SolverKind::JGS2, true},
      {"jgs2-without-spring", SolverKind::JGS2, false},
  };

  for (const Variant& v : variants) {
    if (!detail::variant_selected(opts, v.kind)) continue;
    SolverConfig cfg;
    cfg.kind = v.kind;
    cfg.max_iters = proto.max_iters;
    cfg.tol = proto.tol;
    cfg.line_search = true;  // every method, to prevent divergence
    cfg.basis_includes_springs = v.spring_in_basis;
    cfg.seed = opts.seed;

    Simulation sim(scene, cfg);
    detail::StopWatch watch;
    ConvergenceTrace trace = sim.advance();
    const double ms = opts.timing ? watch.ms() : 0.0;

    out.summary.push_back({out.name, v.label, 0.0, trace.iterations, trace.converged,
                           trace.final_residual, ms, opts.seed});
    out.metrics["final-energy/" + v.label] = trace.rows.back().energy;
    out.metrics["grad-reduction/" + v.label] =
        trace.rows.front().grad_norm / trace.rows.back().grad_norm;
    out.final_positions.emplace_back(v.label, sim.state().x);
    out.traces.emplace_back(v.label, std::move(trace));
  }
  return out;
}

// ---------------------------------------------------------------------------
// registry
// ---------------------------------------------------------------------------

struct ScenarioInfo {
  std::string name;
  std::string description;
  std::function<ScenarioResult(const ScenarioOptions&)> run;
};

inline const std::vector<ScenarioInfo>& scenario_registry() {
  static const std::vector<ScenarioInfo> registry = {
      {"rod-impulse",
       "free rod, one dynamic step from an end impulse, stiffness sweep 1e1..1e6, "
       "distance-to-reference convergence",
       run_rod_impulse},
      {"stretch-resolution",
       "pinned square stretched 50% in one quasistatic solve, grids 5x5..29x29",
       run_stretch_resolution},
      {"cantilever-staleness",
       "clamped beam under a 20-step gravity ramp; fixed vs restarted vs corotated basis",
       run_cantilever_staleness},
      {"basis-noise",
       "stretched rod with uniform noise injected into the basis, with/without line search",
       run_basis_noise},
      {"buckling",
       "clamped beam compressed 1.5% per step for 18 steps through the buckling transition",
       run_buckling},
      {"spring-coupling",
       "beam bent by a top-corner spring; basis built with or without the spring term",
       run_spring_coupling},
  };
  return registry;
}

inline ScenarioResult run_scenario(const std::string& name, const ScenarioOptions& opts) {
  for (const ScenarioInfo& info : scenario_registry())
    if (info.name == name) return info.run(opts);
  std::string known;
  for (const ScenarioInfo& info : scenario_registry()) known += "\n  " + info.name;
  throw ConfigError("unknown scenario '" + name + "'; available:" + known);
}

}  // namespace ccsim
