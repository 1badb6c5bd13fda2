#include "test_support.hpp"

#include <catch2/catch_amalgamated.hpp>

using namespace ccsim;

TEST_CASE("rod construction") {
  SECTION("two vertices make one unit segment") {
    auto [mesh, bc] = make_rod(2, 1.0);
    REQUIRE(mesh.elements.size() == 1);
    REQUIRE(mesh.rest_positions[1] - mesh.rest_positions[0] == Catch::Approx(1.0));
    REQUIRE(mesh.total_volume == Catch::Approx(1.0));
  }

  SECTION("pinning both ends leaves the interior free") {
    auto [mesh, bc] = make_rod(101, 1.0, {{"both_ends", -1, Vec()}});
    REQUIRE(mesh.vertex_count() == 101);
    REQUIRE(bc.free_vertex_count() == 99);
    REQUIRE(bc.is_pinned[0] == 1);
    REQUIRE(bc.is_pinned[100] == 1);
  }

  SECTION("total volume equals the length regardless of refinement") {
    auto [mesh, bc] = make_rod(50, 1.0);
    REQUIRE(mesh.total_volume == Catch::Approx(1.0));
    REQUIRE(mesh.vertex_volumes.sum() == Catch::Approx(1.0));
  }

  SECTION("degenerate requests are rejected") {
    REQUIRE_THROWS_AS(make_rod(1, 1.0), ConfigError);
    REQUIRE_THROWS_AS(make_rod(5, 0.0), ConfigError);
  }
}

TEST_CASE("grid construction") {
  SECTION("5x5 grid has 25 vertices and 32 triangles") {
    auto [mesh, bc] = make_grid(5, 5, 1.0, 1.0);
    REQUIRE(mesh.vertex_count() == 25);
    REQUIRE(mesh.elements.size() == 32);
  }

  SECTION("29x29 grid has 841 vertices") {
    auto [mesh, bc] = make_grid(29, 29, 1.0, 1.0);
    REQUIRE(mesh.vertex_count() == 841);
    REQUIRE(mesh.total_volume == Catch::Approx(1.0));
  }

  SECTION("2x2 unit grid splits into two half-area triangles") {
    auto [mesh, bc] = make_grid(2, 2, 1.0, 1.0);
    REQUIRE(mesh.elements.size() == 2);
    // recompute each area from the stored rest positions
    for (const auto& tri : mesh.elements) {
      const Vec2 a = mesh.rest_positions.segment<2>(2 * tri[0]);
      const Vec2 b = mesh.rest_positions.segment<2>(2 * tri[1]);
      const Vec2 c = mesh.rest_positions.segment<2>(2 * tri[2]);
      const double area = 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
      REQUIRE(area == Catch::Approx(0.5));
    }
  }

  SECTION("all vertex volumes are positive and sum to the total") {
    auto [mesh, bc] = make_grid(7, 4, 2.0, 0.5);
    REQUIRE(mesh.vertex_volumes.minCoeff() > 0.0);
    REQUIRE(mesh.vertex_volumes.sum() == Catch::Approx(mesh.total_volume));
    REQUIRE(mesh.total_volume == Catch::Approx(1.0));
  }

  SECTION("element areas are invariant under rigid motion of the rest shape") {
    auto [mesh, bc] = make_grid(4, 3, 1.5, 0.8);
    const double theta = 0.73;
    Mat2 R;
    R << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
    const Vec2 t(0.4, -2.1);
    double total = 0.0;
    for (const auto& tri : mesh.elements) {
      const Vec2 a = R * Vec2(mesh.rest_positions.segment<2>(2 * tri[0])) + t;
      const Vec2 b = R * Vec2(mesh.rest_positions.segment<2>(2 * tri[1])) + t;
      const Vec2 c = R * Vec2(mesh.rest_positions.segment<2>(2 * tri[2])) + t;
      total += 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y()));
    }
    REQUIRE(total == Catch::Approx(mesh.total_volume));
  }
}

TEST_CASE("vertex selectors") {
  auto [mesh, bc] = make_grid(5, 3, 1.0, 0.5);
  REQUIRE(select_vertices(mesh, "left_edge").size() == 3);
  REQUIRE(select_vertices(mesh, "right_edge").size() == 3);
  REQUIRE(select_vertices(mesh, "top_edge").size() == 5);
  REQUIRE(select_vertices(mesh, "bottom_edge").size() == 5);
  REQUIRE(select_vertices(mesh, "top_left") == std::vector<int>{10});
  REQUIRE(select_vertices(mesh, "top_right") == std::vector<int>{14});
  REQUIRE(select_vertices(mesh, "vertex", 7) == std::vector<int>{7});
  REQUIRE(select_vertices(mesh, "all").size() == 15);
  REQUIRE_THROWS_AS(select_vertices(mesh, "nope"), ConfigError);
  REQUIRE_THROWS_AS(select_vertices(mesh, "vertex", 99), ConfigError);
}

TEST_CASE("reduced DOF maps round-trip") {
  auto [mesh, bc] = make_grid(4, 4, 1.0, 1.0, {{"left_edge", -1, Vec()}});
  Rng rng(7);
  Vec r(bc.free_dof_count());
  for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = ccsim::testing::urand(rng);

  REQUIRE(bc.reduce(bc.expand(r)) == r);

  // expand puts zeros exactly at pinned DOFs
  const Vec full = bc.expand(r);
  for (int v = 0; v < mesh.vertex_count(); ++v)
    if (bc.is_pinned[static_cast<std::size_t>(v)]) {
      REQUIRE(full[2 * v] == 0.0);
      REQUIRE(full[2 * v + 1] == 0.0);
    }

  // index maps agree in both directions
  for (int f = 0; f < bc.free_vertex_count(); ++f)
    for (int c = 0; c < 2; ++c) REQUIRE(bc.full_to_free(bc.free_to_full(f, c)) == f * 2 + c);
}

TEST_CASE("schedule application") {
  Scene s = ccsim::testing::grid_scene(3, 1e4, 0.3, 0.0);
  const int pinned = select_vertices(s.mesh, "left_edge")[0];

  SECTION("an empty schedule changes nothing") {
    const auto targets_before = s.bc.pin_targets;
    const ScheduleEffect fx = apply_schedule_step(s, s.bc, 0);
    REQUIRE(fx.velocity_impulses.empty());
    REQUIRE_FALSE(fx.gravity_scale.has_value());
    REQUIRE(s.bc.pin_targets.at(pinned) == targets_before.at(pinned));
  }

  SECTION("an active translate accumulates once per step") {
    ScheduleEntry e;
    e.from = 0;
    e.to = 3;
    e.select = "left_edge";
    e.delta = Vec(2);
    e.delta << 0.01, 0.0;
    s.schedule.push_back(e);

    const Vec start = s.bc.pin_targets.at(pinned);
    for (int k = 0; k < 6; ++k) apply_schedule_step(s, s.bc, k);  // active only for 0..3
    const Vec moved = s.bc.pin_targets.at(pinned);
    REQUIRE(moved[0] == Catch::Approx(start[0] + 4 * 0.01));
    REQUIRE(moved[1] == Catch::Approx(start[1]));
  }

  SECTION("translating an unpinned vertex is a configuration error") {
    ScheduleEntry e;
    e.select = "right_edge";
    e.delta = Vec::Zero(2);
    e.delta[0] = 1.0;
    s.schedule.push_back(e);
    REQUIRE_THROWS_AS(apply_schedule_step(s, s.bc, 0), ConfigError);
  }

  SECTION("impulses are reported, not applied to pins") {
    ScheduleEntry e;
    e.select = "right_edge";
    e.velocity = Vec(2);
    e.velocity << 5.0, 0.0;
    s.schedule.push_back(e);
    const ScheduleEffect fx = apply_schedule_step(s, s.bc, 0);
    REQUIRE(fx.velocity_impulses.size() == 3);
    REQUIRE(fx.velocity_impulses[0].second[0] == 5.0);
  }

  SECTION("gravity ramps interpolate linearly over the active range") {
    ScheduleEntry e;
    e.from = 2;
    e.to = 6;
    e.gravity_scale = {0.0, 1.0};
    s.schedule.push_back(e);
    REQUIRE_FALSE(apply_schedule_step(s, s.bc, 1).gravity_scale.has_value());
    REQUIRE(*apply_schedule_step(s, s.bc, 2).gravity_scale == Catch::Approx(0.0));
    REQUIRE(*apply_schedule_step(s, s.bc, 4).gravity_scale == Catch::Approx(0.5));
    REQUIRE(*apply_schedule_step(s, s.bc, 6).gravity_scale == Catch::Approx(1.0));
  }
}
