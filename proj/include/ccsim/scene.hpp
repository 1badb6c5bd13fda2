#pragma once

#include "ccsim/material.hpp"
#include "ccsim/mesh.hpp"

#include <json.hpp>

#include <fstream>
#include <optional>
#include <string>
#include <vector>

namespace ccsim {

enum class Mode { Quasistatic, Dynamic };

/// Linear two-body spring, ½ k (|xa - xb| - L0)^2. Used both as scripted
/// scene content and as the "unanticipated coupling" term that may be
/// excluded from basis construction.
struct ExtraSpring {
  int a = -1;
  int b = -1;
  double stiffness = 0.0;
  double rest_length = 0.0;
};

/// One schedule entry, active for steps in [from, to]. Effects:
///   translate     - shift the selected pin targets by `delta` (applied once
///                   per active step, so deltas accumulate over a range)
///   impulse       - add `velocity` to the selected vertices (dynamic mode)
///   gravity_scale - set the gravity multiplier, linearly interpolated from
///                   `start` at step `from` to `end` at step `to`
struct ScheduleEntry {
  int from = 0;
  int to = 0;
  std::string select;
  int index = -1;
  Vec delta;      // translate
  Vec velocity;   // impulse
  std::optional<std::pair<double, double>> gravity_scale;

  bool active(int step) const { return step >= from && step <= to; }
};

/// Everything needed to pose one experiment: geometry, boundary conditions,
/// material, integration mode, and per-step scripting.
struct Scene {
  // declarative mesh description, kept for serialization and hashing
  std::string mesh_type;  // "rod" | "grid"
  int nx = 0, ny = 0;
  double length = 0, width = 0, height = 0;

  Mesh mesh;
  std::vector<PinSpec> pins;
  BoundaryConditions bc;

  MaterialParams material;
  Mode mode = Mode::Quasistatic;
  double timestep = 0.0;  // dynamic only

  Vec gravity;            // dim entries, zero when absent
  double gravity_scale = 1.0;

  std::vector<ScheduleEntry> schedule;
  std::vector<ExtraSpring> extra_springs;

  // optional symmetry-breaking displacement applied to the initial state
  std::vector<PinSpec> initial_nudges;

  // optional per-axis scaling about the origin applied to the initial state
  // (an affine initial guess for stretch protocols); empty = identity
  Vec initial_scale;

  int vertex_count() const { return mesh.vertex_count(); }
  bool has_gravity() const { return gravity.size() > 0 && gravity.squaredNorm() > 0; }

  void validate() const {
    material.validate();
    if (mode == Mode::Dynamic && !(timestep > 0))
      throw ConfigError("scene: dynamic mode requires timestep > 0");
    for (const ExtraSpring& s : extra_springs) {
      if (s.a == s.b || s.a < 0 || s.b < 0 || s.a >= vertex_count() || s.b >= vertex_count())
        throw ConfigError("scene: spring endpoints invalid");
      if (!(s.stiffness > 0)) throw ConfigError("scene: spring stiffness must be positive");
    }
  }

  /// Build mesh and boundary conditions from the declarative fields. Must be
  /// called once after filling them in (scene_from_json does it for you).
  void build_geometry() {
    MeshAndBC built;
    if (mesh_type == "rod") built = make_rod(nx, length, pins);
    else if (mesh_type == "grid") built = make_grid(nx, ny, width, height, pins);
    else throw ConfigError("scene: unknown mesh type '" + mesh_type + "'");
    mesh = std::move(built.mesh);
    bc = std::move(built.bc);
    if (gravity.size() > 0 && gravity.size() != mesh.dim)
      throw ConfigError("scene: gravity dimension mismatch");
    validate();
  }
};

/// Velocity impulses and gravity changes produced by one schedule step.
struct ScheduleEffect {
  std::vector<std::pair<int, Vec>> velocity_impulses;  // vertex -> dv
  std::optional<double> gravity_scale;
};

/// Apply every schedule entry active at `step`: pin targets are translated in
/// place, impulses and gravity changes are returned for the caller to apply.
/// An empty schedule is the identity.
inline ScheduleEffect apply_schedule_step(const Scene& scene, BoundaryConditions& bc, int step) {
  ScheduleEffect effect;
  for (const ScheduleEntry& entry : scene.schedule) {
    if (!entry.active(step)) continue;
    if (entry.delta.size() > 0) {
      for (int v : select_vertices(scene.mesh, entry.select, entry.index)) {
        auto it = bc.pin_targets.find(v);
        if (it == bc.pin_targets.end())
          throw ConfigError("schedule: translate target vertex " + std::to_string(v) + " is not pinned");
        it->second += entry.delta;
      }
    }
    if (entry.velocity.size() > 0) {
      for (int v : select_vertices(scene.mesh, entry.select, entry.index))
        effect.velocity_impulses.emplace_back(v, entry.velocity);
    }
    if (entry.gravity_scale) {
      const auto [s0, s1] = *entry.gravity_scale;
      const double t = entry.to == entry.from ? 1.0
                                              : double(step - entry.from) / double(entry.to - entry.from);
      effect.gravity_scale = s0 + (s1 - s0) * t;
    }
  }
  return effect;
}

// ---------------------------------------------------------------------------
// Scene file format (JSON, one scene per file; see README for the schema):
//   mesh{type, nx, ny, length, width, height}
//   material{young, poisson, density}
//   bc{pins, schedules}, mode, timestep, springs[], gravity[], nudges[]
// ---------------------------------------------------------------------------

namespace detail {

inline Vec json_to_vec(const nlohmann::json& j) {
  Vec v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

inline nlohmann::json vec_to_json(const Vec& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

inline PinSpec parse_pin(const nlohmann::json& j) {
  PinSpec p;
  p.select = j.at("select").get<std::string>();
  p.index = j.value("index", -1);
  if (j.contains("offset")) p.offset = json_to_vec(j["offset"]);
  if (j.contains("delta")) p.offset = json_to_vec(j["delta"]);
  return p;
}

}  // namespace detail

inline Scene scene_from_json(const nlohmann::json& j) {
  Scene s;
  const auto& jm = j.at("mesh");
  s.mesh_type = jm.at("type").get<std::string>();
  if (s.mesh_type == "rod") {
    s.nx = jm.at("nx").get<int>();
    s.length = jm.at("length").get<double>();
  } else if (s.mesh_type == "grid") {
    s.nx = jm.at("nx").get<int>();
    s.ny = jm.at("ny").get<int>();
    s.width = jm.at("width").get<double>();
    s.height = jm.at("height").get<double>();
  } else {
    throw ConfigError("scene: unknown mesh type '" + s.mesh_type + "'");
  }

  const auto& jmat = j.at("material");
  s.material.young = jmat.at("young").get<double>();
  s.material.poisson = jmat.value("poisson", 0.0);
  s.material.density = jmat.value("density", 0.0);

  const std::string mode = j.value("mode", "quasistatic");
  if (mode == "quasistatic") s.mode = Mode::Quasistatic;
  else if (mode == "dynamic") s.mode = Mode::Dynamic;
  else throw ConfigError("scene: unknown mode '" + mode + "'");
  s.timestep = j.value("timestep", 0.0);

  if (j.contains("bc")) {
    const auto& jbc = j["bc"];
    for (const auto& jp : jbc.value("pins", nlohmann::json::array()))
      s.pins.push_back(detail::parse_pin(jp));
    for (const auto& je : jbc.value("schedules", nlohmann::json::array())) {
      ScheduleEntry e;
      if (je.contains("step")) e.from = e.to = je["step"].get<int>();
      else {
        e.from = je.at("from").get<int>();
        e.to = je.at("to").get<int>();
      }
      if (je.contains("translate")) {
        const auto& jt = je["translate"];
        e.select = jt.at("select").get<std::string>();
        e.index = jt.value("index", -1);
        e.delta = detail::json_to_vec(jt.at("delta"));
      }
      if (je.contains("impulse")) {
        const auto& ji = je["impulse"];
        e.select = ji.at("select").get<std::string>();
        e.index = ji.value("index", -1);
        e.velocity = detail::json_to_vec(ji.at("velocity"));
      }
      if (je.contains("gravity_scale")) {
        const auto& jg = je["gravity_scale"];
        if (jg.is_number()) e.gravity_scale = {jg.get<double>(), jg.get<double>()};
        else e.gravity_scale = {jg.at("start").get<double>(), jg.at("end").get<double>()};
      }
      s.schedule.push_back(e);
    }
  }

  if (j.contains("gravity")) s.gravity = detail::json_to_vec(j["gravity"]);
  s.gravity_scale = j.value("gravity_scale", 1.0);

  for (const auto& jn : j.value("nudges", nlohmann::json::array()))
    s.initial_nudges.push_back(detail::parse_pin(jn));

  if (j.contains("initial_scale")) s.initial_scale = detail::json_to_vec(j["initial_scale"]);

  s.build_geometry();

  // springs last: selector endpoints ("a_select") need the built mesh
  for (const auto& js : j.value("springs", nlohmann::json::array())) {
    ExtraSpring spring;
    auto endpoint = [&](const char* idx_key, const char* sel_key) {
      if (js.contains(sel_key)) {
        const auto found = select_vertices(s.mesh, js[sel_key].get<std::string>(), js.value("index", -1));
        if (found.size() != 1)
          throw ConfigError("scene: spring selector '" + js[sel_key].get<std::string>() +
                            "' must name exactly one vertex");
        return found[0];
      }
      return js.at(idx_key).get<int>();
    };
    spring.a = endpoint("a", "a_select");
    spring.b = endpoint("b", "b_select");
    spring.stiffness = js.at("stiffness").get<double>();
    spring.rest_length = js.value("rest_length", 0.0);
    s.extra_springs.push_back(spring);
  }
  s.validate();
  return s;
}

inline nlohmann::json scene_to_json(const Scene& s) {
  nlohmann::json j;
  if (s.mesh_type == "rod") {
    j["mesh"] = {{"type", "rod"}, {"nx", s.nx}, {"length", s.length}};
  } else {
    j["mesh"] = {{"type", "grid"}, {"nx", s.nx}, {"ny", s.ny}, {"width", s.width}, {"height", s.height}};
  }
  j["material"] = {{"young", s.material.young}, {"poisson", s.material.poisson}, {"density", s.material.density}};
  j["mode"] = s.mode == Mode::Dynamic ? "dynamic" : "quasistatic";
  if (s.mode == Mode::Dynamic) j["timestep"] = s.timestep;

  nlohmann::json pins = nlohmann::json::array();
  for (const PinSpec& p : s.pins) {
    nlohmann::json jp = {{"select", p.select}};
    if (p.index >= 0) jp["index"] = p.index;
    if (p.offset.size() > 0) jp["offset"] = detail::vec_to_json(p.offset);
    pins.push_back(jp);
  }
  nlohmann::json schedules = nlohmann::json::array();
  for (const ScheduleEntry& e : s.schedule) {
    nlohmann::json je;
    if (e.from == e.to) je["step"] = e.from;
    else { je["from"] = e.from; je["to"] = e.to; }
    if (e.delta.size() > 0)
      je["translate"] = {{"select", e.select}, {"index", e.index}, {"delta", detail::vec_to_json(e.delta)}};
    if (e.velocity.size() > 0)
      je["impulse"] = {{"select", e.select}, {"index", e.index}, {"velocity", detail::vec_to_json(e.velocity)}};
    if (e.gravity_scale)
      je["gravity_scale"] = {{"start", e.gravity_scale->first}, {"end", e.gravity_scale->second}};
    schedules.push_back(je);
  }
  j["bc"] = {{"pins", pins}, {"schedules", schedules}};

  nlohmann::json springs = nlohmann::json::array();
  for (const ExtraSpring& sp : s.extra_springs)
    springs.push_back({{"a", sp.a}, {"b", sp.b}, {"stiffness", sp.stiffness}, {"rest_length", sp.rest_length}});
  j["springs"] = springs;

  if (s.gravity.size() > 0) j["gravity"] = detail::vec_to_json(s.gravity);
  if (s.gravity_scale != 1.0) j["gravity_scale"] = s.gravity_scale;
  if (!s.initial_nudges.empty()) {
    nlohmann::json nudges = nlohmann::json::array();
    for (const PinSpec& p : s.initial_nudges) {
      nlohmann::json jn = {{"select", p.select}, {"delta", detail::vec_to_json(p.offset)}};
      if (p.index >= 0) jn["index"] = p.index;
      nudges.push_back(jn);
    }
    j["nudges"] = nudges;
  }
  if (s.initial_scale.size() > 0) j["initial_scale"] = detail::vec_to_json(s.initial_scale);
  return j;
}

inline Scene load_scene_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scene file: " + path);
  nlohmann::json j;
  in >> j;
  return scene_from_json(j);
}

/// Content hash of the scene description; keys cached artifacts such as
/// saved perturbation bases.
inline std::uint64_t scene_hash(const Scene& s) { return fnv1a(scene_to_json(s).dump()); }

}  // namespace ccsim
