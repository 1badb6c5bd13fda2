#pragma once

#include "ccsim/solvers.hpp"

namespace ccsim {

/// Drives a scene through load/time steps: applies the schedule, maintains
/// the perturbation basis per the restart policy, solves each step, and (in
/// dynamic mode) advances velocities with the Backward Euler rule.
class Simulation {
 public:
  Simulation(Scene scene, SolverConfig config)
      : scene_(std::move(scene)), config_(std::move(config)), state_(make_initial_state(scene_)) {
    config_.validate();
  }

  const Scene& scene() const { return scene_; }
  const SimState& state() const { return state_; }
  SimState& state() { return state_; }
  SolverConfig& config() { return config_; }
  int step_index() const { return step_; }
  const PerturbationBasis* basis() const { return basis_ ? &*basis_ : nullptr; }

  /// Inject an externally built basis (e.g. loaded from a cache file).
  void set_basis(PerturbationBasis basis) { basis_ = std::move(basis); }

  /// Advance one step and return its convergence trace. The basis policy
  /// runs against the state as it stands when the step begins (rest shape at
  /// step 0), before this step's schedule moves anything.
  ConvergenceTrace advance() {
    ensure_basis();

    const ScheduleEffect effect = apply_schedule_step(scene_, scene_.bc, step_);
    if (effect.gravity_scale) scene_.gravity_scale = *effect.gravity_scale;
    for (const auto& [v, dv] : effect.velocity_impulses)
      state_.v.segment(v * scene_.mesh.dim, scene_.mesh.dim) += dv;
    scene_.bc.apply_pins(state_.x);

    if (scene_.mode == Mode::Dynamic) {
      state_.x_tilde = state_.x + state_.h * state_.v;
    } else {
      state_.x_tilde = state_.x;
    }

    const Vec x_before = state_.x;
    ConvergenceTrace trace = solve_minimize(scene_, state_, config_, basis_ ? &*basis_ : nullptr);

    if (scene_.mode == Mode::Dynamic) {
      state_.v = (state_.x - x_before) / state_.h;
      for (int v = 0; v < scene_.mesh.vertex_count(); ++v)
        if (scene_.bc.is_pinned[static_cast<std::size_t>(v)])
          state_.v.segment(v * scene_.mesh.dim, scene_.mesh.dim).setZero();
    }
    ++step_;
    return trace;
  }

 private:
  void ensure_basis() {
    if (!solver_uses_basis(config_.kind)) return;
    const bool stale =
        basis_ && config_.restart_period > 0 && step_ - basis_->built_at_step >= config_.restart_period;
    if (basis_ && !stale) return;
    basis_ = build_scene_basis(scene_, state_, step_, config_.basis_includes_springs);
    if (config_.noise_sigma > 0)
      inject_noise(*basis_, config_.noise_sigma, config_.seed, config_.noise_law);
  }

  Scene scene_;
  SolverConfig config_;
  SimState state_;
  std::optional<PerturbationBasis> basis_;
  int step_ = 0;
};

/// Solve one step with Newton to a tight normalized-gradient tolerance and
/// return the resulting positions, for use as a distance-mode reference.
inline Vec newton_reference(const Scene& scene, double tol = 1e-10, int max_iters = 200) {
  SolverConfig cfg;
  cfg.kind = SolverKind::Newton;
  cfg.tol = tol;
  cfg.max_iters = max_iters;
  cfg.line_search = true;
  Simulation sim(scene, cfg);
  ConvergenceTrace trace = sim.advance();
  if (!trace.converged)
    throw SolveError("newton reference did not converge (residual " +
                     std::to_string(trace.final_residual) + ")");
  return sim.state().x;
}

}  // namespace ccsim
