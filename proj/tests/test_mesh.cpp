#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "borfem/mesh.hpp"

using namespace borfem;

namespace {

constexpr double kFreq = 2.43e9;

void check_invariants(const Mesh2D& m) {
  ASSERT_EQ(m.num_nodes() - m.num_edges() + m.num_triangles(), 1);
  for (int t = 0; t < m.num_triangles(); ++t) EXPECT_GT(m.signed_area(t), 0.0);
  // Each edge is shared by one or two triangles; boundary edges carry a tag.
  std::map<int, int> boundary_degree;
  for (int e = 0; e < m.num_edges(); ++e) {
    const bool boundary = m.edge_tris[e][1] < 0;
    EXPECT_EQ(boundary, m.edge_tag[e] != BoundaryTag::None);
    if (boundary) {
      ++boundary_degree[m.edges[e][0]];
      ++boundary_degree[m.edges[e][1]];
    }
    if (m.edge_tag[e] == BoundaryTag::Axis) {
      EXPECT_LE(std::abs(m.nodes[m.edges[e][0]].x()), 1e-12);
      EXPECT_LE(std::abs(m.nodes[m.edges[e][1]].x()), 1e-12);
    }
  }
  // The tagged edges form one closed loop.
  for (auto [v, d] : boundary_degree) EXPECT_EQ(d, 2) << "boundary vertex " << v;
  for (int t = 0; t < m.num_triangles(); ++t) {
    if (m.region[t] != Region::Body) continue;
    for (int v : m.triangles[t]) EXPECT_FALSE(m.in_pml(m.nodes[v]));
  }
  EXPECT_EQ(m.num_edge_dofs(), 2 * m.num_edges() + 2 * m.num_triangles());
  EXPECT_EQ(m.num_nodal_dofs(), m.num_nodes() + m.num_edges());
}

DomainSpec cylinder_spec() {
  return make_domain(build_cylinder_profile(0.1, 0.2), kFreq, cplx(52.7, -12.76));
}

}  // namespace

TEST(Domain, Validation) {
  auto d = cylinder_spec();
  EXPECT_NO_THROW(d.validate());
  auto bad = d;
  bad.pml_thickness = 0.0;
  EXPECT_THROW(bad.validate(), ParameterError);
  bad = d;
  bad.rho_max = 0.105;
  EXPECT_THROW(bad.validate(), GeometryError);
  bad = d;
  bad.h_body = -1;
  EXPECT_THROW(bad.validate(), ParameterError);
}

TEST(Mesh, SmallSquareInvariants) {
  DomainSpec d;
  d.body = build_cylinder_profile(0.1, 0.1);
  d.rho_max = 0.3;
  d.z_max = 0.3;
  d.pml_thickness = 0.1;
  d.h_air = 0.05;
  d.h_body = 0.02;
  const auto m = triangulate(d);
  check_invariants(m);
  for (int t = 0; t < m.num_triangles(); ++t) {
    const double h = m.region[t] == Region::Body ? d.h_body : d.h_air;
    EXPECT_LE(m.max_edge_length(t), h * (1 + 1e-9));
  }
  int body = 0, pml = 0, air = 0;
  for (auto r : m.region) (r == Region::Body ? body : r == Region::Pml ? pml : air)++;
  EXPECT_GT(body, 0);
  EXPECT_GT(pml, 0);
  EXPECT_GT(air, 0);
  // Areas per region match the geometry.
  double ab = 0, ap = 0, aa = 0;
  for (int t = 0; t < m.num_triangles(); ++t)
    (m.region[t] == Region::Body ? ab : m.region[t] == Region::Pml ? ap : aa) += m.signed_area(t);
  EXPECT_NEAR(ab, 0.01, 1e-12);
  EXPECT_NEAR(ab + aa, 0.09, 1e-12);
  EXPECT_NEAR(ap, 0.16 - 0.09, 1e-12);
}

TEST(Mesh, CylinderCountInRange) {
  const auto m = triangulate(cylinder_spec());
  check_invariants(m);
  EXPECT_GE(m.num_triangles(), 1500);
  EXPECT_LE(m.num_triangles(), 6000);
  std::set<BoundaryTag> tags(m.edge_tag.begin(), m.edge_tag.end());
  EXPECT_TRUE(tags.count(BoundaryTag::Axis));
  EXPECT_TRUE(tags.count(BoundaryTag::Ground));
  EXPECT_TRUE(tags.count(BoundaryTag::PmlOuter));
}

TEST(Mesh, RefinementScaling) {
  DomainSpec d = cylinder_spec();
  const auto coarse = triangulate(d);
  d.h_air /= 2;
  d.h_body /= 2;
  const auto fine = triangulate(d);
  EXPECT_GE(fine.num_triangles(), 4 * coarse.num_triangles() * 0.95);
  check_invariants(fine);
}

TEST(Mesh, FreeSpaceSphere) {
  MeshOptions opt;
  opt.ground = false;
  const auto d = make_domain(build_sphere_profile(0.1, 0.0), kFreq, cplx(4, -0.5), opt);
  const auto m = triangulate(d);
  check_invariants(m);
  std::set<BoundaryTag> tags(m.edge_tag.begin(), m.edge_tag.end());
  EXPECT_FALSE(tags.count(BoundaryTag::Ground));
  double ab = 0;
  for (int t = 0; t < m.num_triangles(); ++t)
    if (m.region[t] == Region::Body) ab += m.signed_area(t);
  EXPECT_NEAR(ab, 0.5 * kPi * 0.01, 0.01 * 0.5 * kPi * 0.01);
}

TEST(Mesh, HumanCountInRange) {
  const auto d = make_domain(build_human_profile(1.7, 0.2), kFreq, cplx(52.7, -12.76));
  const auto m = triangulate(d);
  check_invariants(m);
  EXPECT_GE(m.num_triangles(), 15000);
  EXPECT_LE(m.num_triangles(), 60000);
}

TEST(Mesh, Deterministic) {
  const auto a = triangulate(cylinder_spec());
  const auto b = triangulate(cylinder_spec());
  std::ostringstream sa, sb;
  a.write(sa);
  b.write(sb);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(Mesh, Locate) {
  const auto m = triangulate(cylinder_spec());
  for (int t = 0; t < m.num_triangles(); t += 37) EXPECT_EQ(m.locate(m.centroid(t)), t);
  EXPECT_EQ(m.locate({-1.0, 0.1}), -1);
  EXPECT_EQ(m.locate({0.05, 5.0}), -1);
}

TEST(Mesh, DofNumberingCoversRange) {
  const auto m = triangulate(cylinder_spec());
  std::vector<int> seen(m.num_edge_dofs(), 0), seen_n(m.num_nodal_dofs(), 0);
  for (int t = 0; t < m.num_triangles(); ++t) {
    for (int q : m.element_edge_dofs(t)) seen[q] = 1;
    for (int q : m.element_nodal_dofs(t)) seen_n[q] = 1;
  }
  for (int s : seen) EXPECT_EQ(s, 1);
  for (int s : seen_n) EXPECT_EQ(s, 1);
}
