#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "nld/errors.hpp"
#include "nld/mesh.hpp"

using namespace nld;

TEST(IntervalMesh, UniformPartition) {
  const Mesh m = build_interval_mesh(0.0, 1.0, 4);
  EXPECT_EQ(m.num_vertices(), 5u);
  EXPECT_EQ(m.num_elements(), 4u);
  EXPECT_EQ(m.num_dofs(), 3u);
  EXPECT_FALSE(m.is_interior_vertex(0));
  EXPECT_FALSE(m.is_interior_vertex(4));
  EXPECT_DOUBLE_EQ(m.h(), 0.25);
}

TEST(IntervalMesh, DegenerateDofCount) {
  const Mesh m = build_interval_mesh(0.0, 1.0, 1);
  EXPECT_EQ(m.num_vertices(), 2u);
  EXPECT_EQ(m.num_dofs(), 0u);
}

TEST(IntervalMesh, MeshSize) { EXPECT_DOUBLE_EQ(build_interval_mesh(0.0, 2.0, 8).h(), 0.25); }

TEST(IntervalMesh, RejectsBadInput) {
  EXPECT_THROW(build_interval_mesh(1.0, 0.0, 4), ParameterError);
  EXPECT_THROW(build_interval_mesh(0.0, 1.0, 0), ParameterError);
}

TEST(DiskMesh, StandardResolutions) {
  EXPECT_EQ(build_disk_mesh_for_dofs(1.0, 961).num_dofs(), 961u);
  EXPECT_EQ(build_disk_mesh_for_dofs(1.0, 3969).num_dofs(), 3969u);
  EXPECT_THROW(build_disk_mesh_for_dofs(1.0, 1000), ParameterError);
}

TEST(DiskMesh, CoarseSanity) {
  const Mesh m = build_disk_mesh(1.0, 0.5);
  EXPECT_LE(m.h(), 0.5);
  EXPECT_GT(m.num_dofs(), 0u);
  for (std::size_t v = 0; v < m.num_vertices(); ++v)
    if (!m.is_interior_vertex(v)) EXPECT_NEAR(std::hypot(m.vertex(v)[0], m.vertex(v)[1]), 1.0, 1e-14);
  EXPECT_THROW(build_disk_mesh(1.0, 1.5), ParameterError);
}

TEST(DiskMesh, AreaEqualsInscribedPolygon) {
  for (int rings : {2, 5, 16}) {
    const Mesh m = build_disk_mesh_rings(1.0, rings);
    const int nb = 8 * rings;
    const double polygon = 0.5 * nb * std::sin(2.0 * std::numbers::pi / nb);
    EXPECT_NEAR(m.interior_measure(), polygon, 1e-12 * polygon);
  }
}

TEST(DiskMesh, RefinementHalvesSizeWithBoundedRatio) {
  double target = build_disk_mesh_rings(1.0, 3).h();
  double prev_h = build_disk_mesh(1.0, target).h();
  for (int k = 0; k < 3; ++k) {
    target /= 2.0;
    const Mesh m = build_disk_mesh(1.0, target);
    EXPECT_LE(m.h(), prev_h / 2.0 + 1e-12);
    EXPECT_LE(m.quasi_uniformity_ratio(), 10.0);
    prev_h = m.h();
  }
}

TEST(Horizon, IntervalDilation) {
  const Mesh m = extend_with_horizon(build_interval_mesh(0.0, 1.0, 8), 0.25);
  double lo = 0.0, hi = 0.0;
  for (const Point& p : m.vertices()) {
    lo = std::min(lo, p[0]);
    hi = std::max(hi, p[0]);
  }
  EXPECT_DOUBLE_EQ(lo, -0.25);
  EXPECT_DOUBLE_EQ(hi, 1.25);
  EXPECT_EQ(m.num_interior_elements(), 8u);
  for (std::size_t e = 8; e < m.num_elements(); ++e) EXPECT_EQ(m.region(e), Region::HorizonLayer);
  EXPECT_NEAR(m.horizon_width(), 0.25, 1e-15);
  EXPECT_EQ(m.num_dofs(), 7u);
}

TEST(Horizon, DiskAnnulus) {
  const Mesh base = build_disk_mesh_rings(1.0, 4);
  const Mesh m = extend_with_horizon(base, 0.1);
  double rmax = 0.0;
  for (const Point& p : m.vertices()) rmax = std::max(rmax, std::hypot(p[0], p[1]));
  EXPECT_NEAR(rmax, 1.1, 1e-14);
  EXPECT_NEAR(m.horizon_width(), 0.1, 1e-12);
  EXPECT_EQ(m.num_dofs(), base.num_dofs());
  const int nb = 32;
  const double outer = 0.5 * nb * 1.21 * std::sin(2.0 * std::numbers::pi / nb);
  double total = 0.0;
  for (std::size_t e = 0; e < m.num_elements(); ++e) total += m.measure(e);
  EXPECT_GT(total, base.interior_measure());
  EXPECT_LE(total, std::numbers::pi * 1.21);
  EXPECT_GE(total, outer - 1e-12);
}

TEST(Horizon, ZeroIsIdentity) {
  const Mesh base = build_disk_mesh_rings(1.0, 3);
  EXPECT_EQ(mesh_to_string(extend_with_horizon(base, 0.0)), mesh_to_string(base));
}

TEST(PairClassification, BasicCases) {
  const Mesh m = build_interval_mesh(0.0, 1.0, 6);
  EXPECT_EQ(classify_pair(m, 2, 2), PairClass::Identical);
  EXPECT_EQ(classify_pair(m, 2, 3), PairClass::VertexTouch);
  EXPECT_EQ(classify_pair(m, 0, 5), PairClass::Disjoint);
  EXPECT_THROW(classify_pair(m, 0, 6), ParameterError);
}

TEST(PairClassification, SymmetricOnSmallMeshes) {
  for (const Mesh& m : {extend_with_horizon(build_disk_mesh_rings(1.0, 3), 0.2),
                        extend_with_horizon(build_interval_mesh(0.0, 1.0, 30), 0.1)}) {
    ASSERT_LE(m.num_elements(), 200u);
    bool saw_edge = false;
    for (std::size_t i = 0; i < m.num_elements(); ++i)
      for (std::size_t j = 0; j < m.num_elements(); ++j) {
        EXPECT_EQ(classify_pair(m, i, j), classify_pair(m, j, i));
        saw_edge |= classify_pair(m, i, j) == PairClass::EdgeTouch;
      }
    EXPECT_EQ(saw_edge, m.dimension() == 2);
  }
}

TEST(MeshIO, RoundTripIsExact) {
  const Mesh m = extend_with_horizon(build_disk_mesh_rings(1.0, 3), 0.15);
  const std::string text = mesh_to_string(m);
  std::istringstream in(text);
  const Mesh back = read_mesh(in);
  EXPECT_EQ(mesh_to_string(back), text);
  EXPECT_EQ(mesh_content_hash(back), mesh_content_hash(m));
}

TEST(MeshIO, HeaderAndLineLayout) {
  const std::string text = mesh_to_string(build_interval_mesh(0.0, 1.0, 2));
  EXPECT_EQ(text, "1 3 2\n0 0\n0.5 1\n1 0\n0 1 0\n1 2 0\n");
}

TEST(MeshQuery, LocatePoint) {
  const Mesh m = build_disk_mesh_rings(1.0, 4);
  const auto e = locate_point(m, {0.3, -0.2});
  ASSERT_TRUE(e.has_value());
  EXPECT_FALSE(locate_point(m, {2.0, 0.0}).has_value());
}
