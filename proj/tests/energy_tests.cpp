#include "test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ccsim;
namespace ct = ccsim::testing;

namespace {

// Derivative check against central differences. Projection is disabled so the
// assembled Hessian is the true second derivative, not its PSD clamp.
void check_derivatives(const Scene& scene, const SimState& state, const TermMask& terms,
                       double grad_tol, double hess_tol) {
  AssemblyOptions opts;
  opts.project = false;
  const EnergyAssembly a = assemble(scene, state, terms, opts);
  REQUIRE(ct::rel_err(a.gradient, ct::fd_gradient(scene, state, terms)) < grad_tol);
  REQUIRE(ct::rel_err(Mat(a.hessian), ct::fd_hessian(scene, state, terms)) < hess_tol);
  REQUIRE(is_symmetric(a.hessian, 1e-12 * Mat(a.hessian).norm()));
}

}  // namespace

TEST_CASE("inertia term") {
  SECTION("hand-checked scalar case: m = 2, displacement 3") {
    SimState st;
    st.x = Vec::Constant(1, 3.0);
    st.x_tilde = Vec::Zero(1);
    st.mass = Vec::Constant(1, 2.0);
    detail::Accumulator acc;
    acc.grad = Vec::Zero(1);
    detail::add_inertia(st, acc);
    REQUIRE(acc.value == Catch::Approx(9.0));
    REQUIRE(acc.grad[0] == Catch::Approx(6.0));
    REQUIRE(acc.trips.size() == 1);
    REQUIRE(acc.trips[0].value() == Catch::Approx(2.0));
  }

  SECTION("vanishes at the inertial target") {
    Scene s = ct::rod_scene(6, 1e3, 0.0, false);
    s.mode = Mode::Dynamic;
    s.timestep = 0.1;
    SimState st = make_initial_state(s);
    TermMask terms;
    terms.inertia = true;
    REQUIRE(energy_value(s, st, terms) == 0.0);
  }

  SECTION("matches finite differences away from the target") {
    Scene s = ct::rod_scene(6, 1e3, 0.0, false);
    s.mode = Mode::Dynamic;
    s.timestep = 0.1;
    SimState st = make_initial_state(s);
    Rng rng(5);
    ct::jitter_free(s, st, rng, 0.05);
    TermMask terms;
    terms.inertia = true;
    check_derivatives(s, st, terms, 1e-6, 1e-6);
  }
}

TEST_CASE("segment springs") {
  SECTION("zero energy at rest") {
    Scene s = ct::rod_scene(5, 1e4);
    SimState st = make_initial_state(s);
    TermMask terms;
    terms.elastic = true;
    REQUIRE(energy_value(s, st, terms) == 0.0);
  }

  SECTION("hand-checked: k = 1, extension 0.5 stores 0.125") {
    Scene s = ct::rod_scene(2, 1.0, 0.0, false);  // one unit segment, k = E / rest = 1
    SimState st = make_initial_state(s);
    st.x[1] += 0.5;
    TermMask terms;
    terms.elastic = true;
    REQUIRE(energy_value(s, st, terms) == Catch::Approx(0.125));
  }

  SECTION("matches finite differences under random stretch") {
    Scene s = ct::rod_scene(7, 1e4, 0.2);
    SimState st = make_initial_state(s);
    Rng rng(9);
    ct::jitter_free(s, st, rng, 0.02);
    TermMask terms;
    terms.elastic = true;
    check_derivatives(s, st, terms, 1e-6, 1e-6);
  }
}

TEST_CASE("corotational triangles") {
  Scene s = ct::grid_scene(3, 1e4, 0.3);
  TermMask terms;
  terms.elastic = true;

  SECTION("zero energy and gradient at rest") {
    SimState st = make_initial_state(s);
    const EnergyAssembly a = assemble(s, st, terms);
    REQUIRE(a.value == Catch::Approx(0.0).margin(1e-12));
    REQUIRE(a.gradient.norm() < 1e-10);
  }

  SECTION("energy is invariant under rigid rotation") {
    SimState st = make_initial_state(s);
    const double theta = 0.9;
    Mat2 R;
    R << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    for (int v = 0; v < s.mesh.vertex_count(); ++v)
      st.x.segment<2>(2 * v) = R * Vec2(s.mesh.rest_positions.segment<2>(2 * v));
    REQUIRE(std::abs(energy_value(s, st, terms)) < 1e-10);
  }

  SECTION("matches finite differences under random deformation") {
    SimState st = make_initial_state(s);
    Rng rng(13);
    ct::jitter_free(s, st, rng, 0.05);
    check_derivatives(s, st, terms, 1e-5, 1e-4);
  }
}

TEST_CASE("coupling springs") {
  SECTION("zero energy at the rest length, quadratic away from it") {
    Scene s = ct::rod_scene(3, 1.0, 0.0, false);  // vertices at 0, 0.5, 1
    s.extra_springs.push_back({0, 2, 1.0, 1.0});
    TermMask terms;
    terms.springs = true;
    SimState st = make_initial_state(s);
    REQUIRE(energy_value(s, st, terms) == 0.0);

    // k = 1, rest length 0, separation 2: value 2, endpoint force magnitude 2
    s.extra_springs[0].rest_length = 0.0;
    st.x << 0.0, 0.5, 2.0;
    const EnergyAssembly a = assemble(s, st, terms);
    REQUIRE(a.value == Catch::Approx(2.0));
    REQUIRE(a.gradient.norm() == Catch::Approx(2.0));  // vertex 0 is pinned, vertex 2 carries +2
  }

  SECTION("coincident endpoints are a geometry error") {
    Scene s = ct::grid_scene(3, 1e4, 0.3);
    s.extra_springs.push_back({0, 5, 10.0, 0.5});
    SimState st = make_initial_state(s);
    st.x.segment<2>(2 * 5) = st.x.segment<2>(2 * 0);
    TermMask terms;
    terms.springs = true;
    REQUIRE_THROWS_AS(energy_value(s, st, terms), GeometryError);
  }

  SECTION("matches finite differences in 2D") {
    Scene s = ct::grid_scene(3, 1e4, 0.3);
    s.extra_springs.push_back({2, 6, 37.0, 0.4});
    SimState st = make_initial_state(s);
    Rng rng(21);
    ct::jitter_free(s, st, rng, 0.05);
    TermMask terms;
    terms.springs = true;
    check_derivatives(s, st, terms, 1e-5, 1e-5);
  }
}

TEST_CASE("gravity term") {
  Scene s = ct::grid_scene(3, 1e4, 0.3);
  s.gravity = Vec(2);
  s.gravity << 0.0, -9.8;
  s.gravity_scale = 0.5;
  SimState st = make_initial_state(s);
  Rng rng(31);
  ct::jitter_free(s, st, rng, 0.05);
  TermMask terms;
  terms.gravity = true;

  // linear in x: exact gradient, vanishing Hessian
  AssemblyOptions opts;
  opts.project = false;
  const EnergyAssembly a = assemble(s, st, terms, opts);
  REQUIRE(ct::rel_err(a.gradient, ct::fd_gradient(s, st, terms)) < 1e-9);
  REQUIRE(Mat(a.hessian).norm() == 0.0);

  // scaling gravity scales the gradient linearly
  s.gravity_scale = 1.0;
  const EnergyAssembly b = assemble(s, st, terms, opts);
  REQUIRE(ct::rel_err(Vec(2.0 * a.gradient), b.gradient) < 1e-14);
}

TEST_CASE("whole-scene assembly") {
  SECTION("no terms yields a zero objective") {
    Scene s = ct::grid_scene(3, 1e4, 0.3);
    SimState st = make_initial_state(s);
    TermMask none;
    const EnergyAssembly a = assemble(s, st, none);
    REQUIRE(a.value == 0.0);
    REQUIRE(a.gradient.norm() == 0.0);
    REQUIRE(Mat(a.hessian).norm() == 0.0);
  }

  SECTION("quasistatic rest configuration is stationary") {
    Scene s = ct::grid_scene(4, 1e4, 0.3);
    SimState st = make_initial_state(s);
    const EnergyAssembly a = assemble(s, st, scene_terms(s));
    REQUIRE(a.gradient.norm() < 1e-10);
  }

  SECTION("dynamic Hessian is the mass plus the scaled stiffness") {
    Scene s = ct::rod_scene(6, 1e4, 0.1);
    SimState st = make_initial_state(s);
    Rng rng(41);
    ct::jitter_free(s, st, rng, 0.02);

    TermMask elastic_only;
    elastic_only.elastic = true;
    const Mat K = Mat(assemble(s, st, elastic_only).hessian);

    s.mode = Mode::Dynamic;
    s.timestep = 0.25;
    SimState dyn = st;
    dyn.h = s.timestep;
    const Mat Hdyn = Mat(assemble(s, dyn, scene_terms(s)).hessian);

    const Mat M = Hdyn - s.timestep * s.timestep * K;
    // what remains is the diagonal lumped mass of the free DOFs
    for (int f = 0; f < s.bc.free_dof_count(); ++f) {
      const int full = s.bc.free_to_full(f / s.mesh.dim, f % s.mesh.dim);
      REQUIRE(M(f, f) == Catch::Approx(dyn.mass[full]));
    }
    REQUIRE((M - Mat(Vec(M.diagonal()).asDiagonal())).norm() < 1e-12 * K.norm());
  }

  SECTION("requesting inertia outside dynamic mode is an error") {
    Scene s = ct::rod_scene(4, 1e3);
    SimState st = make_initial_state(s);
    TermMask terms;
    terms.inertia = true;
    REQUIRE_THROWS_AS(assemble(s, st, terms), ConfigError);
  }
}

TEST_CASE("coordinate block extraction") {
  SECTION("a two-free-vertex rod has a 1x1 complement") {
    Scene s = ct::rod_scene(4, 1e3, 0.1);  // 2 free interior vertices
    SimState st = make_initial_state(s);
    const EnergyAssembly a = assemble(s, st, scene_terms(s));
    const CoordinateBlocks blocks = extract_blocks(a, s.bc, 1);
    REQUIRE(blocks.Hii.rows() == 1);
    REQUIRE(blocks.Hcc.rows() == 1);
    REQUIRE(blocks.HiC.cols() == 1);
    REQUIRE(blocks.c_to_free == std::vector<Eigen::Index>{1});
  }

  SECTION("the partition reassembles the full system") {
    Scene s = ct::grid_scene(3, 1e4, 0.3, 0.2);
    SimState st = make_initial_state(s);
    const EnergyAssembly a = assemble(s, st, scene_terms(s));
    const Mat H = Mat(a.hessian);
    const int dim = s.mesh.dim;

    for (int f = 0; f < s.bc.free_vertex_count(); ++f) {
      const int vertex = s.bc.free_vertices[static_cast<std::size_t>(f)];
      const CoordinateBlocks b = extract_blocks(a, s.bc, vertex);

      Mat rebuilt = Mat::Zero(H.rows(), H.cols());
      rebuilt.block(f * dim, f * dim, dim, dim) = b.Hii;
      for (Eigen::Index k = 0; k < b.HiC.cols(); ++k) {
        rebuilt.block(f * dim, b.c_to_free[static_cast<std::size_t>(k)], dim, 1) = b.HiC.col(k);
        rebuilt.block(b.c_to_free[static_cast<std::size_t>(k)], f * dim, 1, dim) =
            b.HiC.col(k).transpose();
      }
      const Mat Hcc = Mat(b.Hcc);
      for (Eigen::Index r = 0; r < Hcc.rows(); ++r)
        for (Eigen::Index c = 0; c < Hcc.cols(); ++c)
          rebuilt(b.c_to_free[static_cast<std::size_t>(r)], b.c_to_free[static_cast<std::size_t>(c)]) =
              Hcc(r, c);
      REQUIRE(ct::rel_err(rebuilt, H) < 1e-14);

      Vec g_rebuilt(H.rows());
      g_rebuilt.segment(f * dim, dim) = b.gi;
      for (Eigen::Index k = 0; k < b.gC.size(); ++k)
        g_rebuilt[b.c_to_free[static_cast<std::size_t>(k)]] = b.gC[k];
      REQUIRE(g_rebuilt == a.gradient);
    }
  }

  SECTION("complement blocks of a projected assembly are SPD") {
    Scene s = ct::grid_scene(3, 1e4, 0.3, 0.3);
    SimState st = make_initial_state(s);
    const EnergyAssembly a = assemble(s, st, scene_terms(s));
    const CoordinateBlocks b = extract_blocks(a, s.bc, s.bc.free_vertices[0]);
    Eigen::SelfAdjointEigenSolver<Mat> eig{Mat(b.Hcc)};
    REQUIRE(eig.eigenvalues().minCoeff() > 0.0);
  }

  SECTION("pinned or out-of-range vertices are rejected") {
    Scene s = ct::grid_scene(3, 1e4, 0.3);
    SimState st = make_initial_state(s);
    const EnergyAssembly a = assemble(s, st, scene_terms(s));
    REQUIRE_THROWS_AS(extract_blocks(a, s.bc, select_vertices(s.mesh, "left_edge")[0]), ConfigError);
    REQUIRE_THROWS_AS(extract_blocks(a, s.bc, 1000), ConfigError);
  }
}
