// ccbench: benchmark CLI over the header-only solver library.
//
//   ccbench list
//   ccbench run <scenario-or-scene-file> [--solver cc] [solver flags] [output flags]
//   ccbench compare <scenario> [output flags]
//   ccbench sweep <scenario> --solver <name> [output flags]
//
// Exit codes: 0 success, 1 usage/configuration error, 2 solver failure.

#include "ccsim/scenarios.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <set>

using namespace ccsim;

namespace {

struct OutputOptions {
  std::string out_dir = "out";
  std::vector<std::string> emit = {"csv"};
  bool timing = false;

  bool wants(const std::string& kind) const {
    return std::find(emit.begin(), emit.end(), kind) != emit.end();
  }
};

void add_output_flags(CLI::App* cmd, OutputOptions& out, std::string& config_dir) {
  cmd->add_option("--out-dir", out.out_dir, "directory for emitted artifacts")
      ->check([](const std::string& s) {
        return s.empty() ? std::string("must not be empty") : std::string();
      });
  cmd->add_option("--emit", out.emit, "artifact kinds to write")
      ->check(CLI::IsMember({"csv", "json", "svg"}))
      ->delimiter(',');
  cmd->add_flag("--timing", out.timing, "record wall-clock times (off keeps reruns byte-identical)");
  cmd->add_option("--config-dir", config_dir, "directory holding the scenario configs");
}

std::string two_digits(int k) {
  return (k < 10 ? "0" : "") + std::to_string(k);
}

bool is_registered_scenario(const std::string& name) {
  for (const ScenarioInfo& info : scenario_registry())
    if (info.name == name) return true;
  return false;
}

int scheduled_steps(const Scene& scene) {
  int last = 0;
  for (const ScheduleEntry& e : scene.schedule) last = std::max(last, e.to);
  return last + 1;
}

void emit_scenario_result(const ScenarioResult& result, const OutputOptions& out) {
  write_summary_csv(out.out_dir + "/summary.csv", result.summary);
  if (out.wants("json")) write_summary_json(out.out_dir + "/summary.json", result.summary);
  if (out.wants("csv")) {
    for (const auto& [label, trace] : result.traces)
      write_trace_csv(out.out_dir + "/trace-" + label + ".csv", trace);
    for (const auto& [label, rows] : result.heatmaps)
      write_heatmap_csv(out.out_dir + "/heatmap-" + label + ".csv", rows);
    for (const auto& [label, x] : result.final_positions) {
      std::ofstream f = ccsim::detail::open_out(out.out_dir + "/final-" + label + ".csv");
      const int dim = x.size() % 2 == 0 ? 2 : 1;  // scenario meshes are 1D rods or 2D grids
      f << (dim == 2 ? "vertex,x,y\n" : "vertex,x\n");
      for (Eigen::Index v = 0; v < x.size() / dim; ++v) {
        f << v;
        for (int c = 0; c < dim; ++c) f << ',' << format_double(x[v * dim + c]);
        f << '\n';
      }
    }
  }
  if (!out.wants("svg")) return;

  // Best-effort chart: per-iteration gradient curves when the scenario keeps
  // traces of a single solve (spring coupling), otherwise iteration counts
  // against the sweep axis (stiffness, grid size, sigma, or step).
  std::vector<PlotSeries> series;
  std::string x_label = "sweep value";
  if (result.name == "spring-coupling") {
    x_label = "iteration";
    for (const auto& [label, trace] : result.traces) {
      PlotSeries s{label, {}, {}};
      for (const TraceRow& r : trace.rows) {
        s.x.push_back(r.iteration);
        s.y.push_back(r.grad_norm);
      }
      series.push_back(std::move(s));
    }
    write_svg_plot(out.out_dir + "/convergence.svg", result.name, x_label, "gradient norm", series);
    return;
  }

  const bool log_x = result.name == "rod-impulse";
  if (log_x) x_label = "log10 stiffness";
  else if (result.name == "stretch-resolution") x_label = "grid side";
  else if (result.name == "basis-noise") x_label = "noise sigma";
  else x_label = "step";

  std::vector<std::string> labels;
  for (const SummaryRecord& r : result.summary)
    if (std::find(labels.begin(), labels.end(), r.solver) == labels.end()) labels.push_back(r.solver);
  for (const std::string& label : labels) {
    // average duplicate sweep points (the noise scenario has one row per seed)
    std::vector<double> xs;
    std::vector<double> sums, counts;
    for (const SummaryRecord& r : result.summary) {
      if (r.solver != label) continue;
      const double x = log_x ? std::log10(r.sweep_value) : r.sweep_value;
      auto it = std::find(xs.begin(), xs.end(), x);
      if (it == xs.end()) {
        xs.push_back(x);
        sums.push_back(r.iterations);
        counts.push_back(1);
      } else {
        const auto k = static_cast<std::size_t>(it - xs.begin());
        sums[k] += r.iterations;
        counts[k] += 1;
      }
    }
    PlotSeries s{label, xs, {}};
    for (std::size_t k = 0; k < xs.size(); ++k) s.y.push_back(sums[k] / counts[k]);
    series.push_back(std::move(s));
  }
  write_svg_plot(out.out_dir + "/convergence.svg", result.name, x_label, "iterations", series);
}

int cmd_list() {
  for (const ScenarioInfo& info : scenario_registry())
    std::cout << info.name << "\n    " << info.description << "\n";
  return 0;
}

struct RunOptions {
  std::string target;
  std::string solver = "cc";
  int max_iters = 500;
  double tol = 1e-2;
  bool line_search = true;
  bool corotated = false;
  int restart_period = 0;
  std::uint64_t seed = 0;
};

int cmd_run(const RunOptions& run, const OutputOptions& out, const std::string& config_dir) {
  Scene scene;
  std::string name;
  if (is_registered_scenario(run.target)) {
    scene = scene_from_json(ccsim::detail::load_scenario_json(config_dir, run.target));
    name = run.target;
  } else if (std::filesystem::exists(run.target)) {
    scene = load_scene_file(run.target);
    name = std::filesystem::path(run.target).stem().string();
  } else {
    std::string known;
    for (const ScenarioInfo& info : scenario_registry()) known += "\n  " + info.name;
    throw ConfigError("'" + run.target + "' is neither a scenario nor a scene file; scenarios:" + known);
  }

  SolverConfig cfg;
  cfg.kind = parse_solver(run.solver);
  cfg.max_iters = run.max_iters;
  cfg.tol = run.tol;
  cfg.line_search = run.line_search;
  cfg.corotated = run.corotated;
  cfg.restart_period = run.restart_period;
  cfg.seed = run.seed;
  cfg.record_heatmap = true;

  const int steps = scheduled_steps(scene);
  Simulation sim(scene, cfg);
  std::vector<SummaryRecord> summary;
  bool all_converged = true;
  std::vector<PlotSeries> residual_series;

  for (int step = 0; step < steps; ++step) {
    ccsim::detail::StopWatch watch;
    ConvergenceTrace trace = sim.advance();
    const double ms = out.timing ? watch.ms() : 0.0;
    all_converged = all_converged && trace.converged;

    summary.push_back({name, run.solver, static_cast<double>(step), trace.iterations, trace.converged,
                       trace.final_residual, ms, run.seed});
    for (const std::string& w : trace.warnings) std::cerr << "step " << step << ": " << w << "\n";

    const std::string suffix = steps == 1 ? "" : "-step-" + two_digits(step);
    if (out.wants("csv")) {
      write_trace_csv(out.out_dir + "/trace" + suffix + ".csv", trace);
      write_heatmap_csv(out.out_dir + "/heatmap" + suffix + ".csv", trace);
    }
    if (out.wants("svg")) {
      PlotSeries s{steps == 1 ? "residual" : "step " + std::to_string(step), {}, {}};
      for (const TraceRow& r : trace.rows) {
        s.x.push_back(r.iteration);
        s.y.push_back(r.residual);
      }
      residual_series.push_back(std::move(s));
    }
  }

  write_summary_csv(out.out_dir + "/summary.csv", summary);
  if (out.wants("json")) write_summary_json(out.out_dir + "/summary.json", summary);
  if (out.wants("svg"))
    write_svg_plot(out.out_dir + "/convergence.svg", name + " (" + run.solver + ")", "iteration",
                   "residual", residual_series);

  if (!all_converged) {
    std::cerr << "solver did not reach tolerance on every step\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"convergence benchmarks for block coordinate solvers with subspace condensation"};
  app.require_subcommand(1);

  app.add_subcommand("list", "enumerate the built-in scenarios");

  RunOptions run;
  OutputOptions run_out;
  std::string run_config_dir = CCSIM_CONFIG_DIR;
  CLI::App* run_cmd = app.add_subcommand("run", "solve one scene with one solver");
  run_cmd->add_option("target", run.target, "scenario name or scene file")->required();
  run_cmd->add_option("--solver", run.solver, "newton|cd|jgs2|cc")
      ->check(CLI::IsMember({"newton", "cd", "jgs2", "cc"}));
  run_cmd->add_option("--max-iters", run.max_iters, "iteration cap per step");
  run_cmd->add_option("--tol", run.tol, "convergence tolerance");
  run_cmd->add_flag("--line-search,!--no-line-search", run.line_search, "global backtracking line search");
  run_cmd->add_flag("--corotated", run.corotated, "re-rotate the basis each iteration");
  run_cmd->add_option("--restart-period", run.restart_period, "rebuild the basis every N steps (0 = never)");
  run_cmd->add_option("--seed", run.seed, "noise stream seed");
  add_output_flags(run_cmd, run_out, run_config_dir);

  OutputOptions cmp_out;
  std::string cmp_scenario, cmp_config_dir = CCSIM_CONFIG_DIR;
  std::uint64_t cmp_seed = 0;
  CLI::App* cmp_cmd = app.add_subcommand("compare", "run a scenario's full solver matrix");
  cmp_cmd->add_option("scenario", cmp_scenario, "scenario name")->required();
  cmp_cmd->add_option("--seed", cmp_seed, "base seed for seeded scenarios");
  add_output_flags(cmp_cmd, cmp_out, cmp_config_dir);

  OutputOptions swp_out;
  std::string swp_scenario, swp_solver, swp_config_dir = CCSIM_CONFIG_DIR;
  std::uint64_t swp_seed = 0;
  CLI::App* swp_cmd = app.add_subcommand("sweep", "run a scenario's sweep axis for one solver");
  swp_cmd->add_option("scenario", swp_scenario, "scenario name")->required();
  swp_cmd->add_option("--solver", swp_solver, "newton|cd|jgs2|cc")
      ->check(CLI::IsMember({"newton", "cd", "jgs2", "cc"}))
      ->required();
  swp_cmd->add_option("--seed", swp_seed, "base seed for seeded scenarios");
  add_output_flags(swp_cmd, swp_out, swp_config_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand("list")) return cmd_list();
    if (app.got_subcommand("run")) return cmd_run(run, run_out, run_config_dir);

    ScenarioOptions opts;
    const OutputOptions& out = app.got_subcommand("compare") ? cmp_out : swp_out;
    opts.config_dir = app.got_subcommand("compare") ? cmp_config_dir : swp_config_dir;
    opts.seed = app.got_subcommand("compare") ? cmp_seed : swp_seed;
    opts.timing = out.timing;
    if (app.got_subcommand("sweep")) opts.solver_filter = parse_solver(swp_solver);

    const std::string& scenario = app.got_subcommand("compare") ? cmp_scenario : swp_scenario;
    const ScenarioResult result = run_scenario(scenario, opts);
    emit_scenario_result(result, out);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const SolveError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return 2;
  }
}
