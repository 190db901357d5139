#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "borfem/element.hpp"
#include "borfem/fem.hpp"
#include "borfem/geometry.hpp"

using namespace borfem;

namespace {

constexpr double kFreq = 2.43e9;
const cplx kMuscle(52.7, -12.76);
constexpr int kM = 11;

const Mesh2D& cylinder_mesh() {
  static const Mesh2D mesh = triangulate(make_domain(build_cylinder_profile(0.1, 0.2), kFreq, kMuscle));
  return mesh;
}

DipoleSource cylinder_source() {
  DipoleSource s;
  s.position = {1.0, 0.0, 0.1};
  s.freq = kFreq;
  s.gamma = 1.0;
  return s;
}

const HarmonicSystem& cylinder_system() {
  static const HarmonicSystem sys =
      assemble(cylinder_mesh(), kMuscle, PmlMap::for_mesh(cylinder_mesh(), kFreq), 0.0, kFreq, kM);
  return sys;
}

const std::vector<CVectorX>& cylinder_rhs() {
  static const auto K = assemble_rhs(azimuthal_decompose(cylinder_mesh(), cylinder_source(), kM),
                                     cylinder_mesh(), kMuscle);
  return K;
}

const HarmonicSolution& cylinder_solution() {
  static const HarmonicSolution sol = solve_all(cylinder_system(), cylinder_rhs(), kM);
  return sol;
}

double max_abs(const SparseMatrixC& A) {
  double m = 0.0;
  for (int k = 0; k < A.outerSize(); ++k)
    for (SparseMatrixC::InnerIterator it(A, k); it; ++it) m = std::max(m, std::abs(it.value()));
  return m;
}

double asymmetry(const SparseMatrixC& A) {
  const SparseMatrixC At = A.transpose();
  return max_abs(A - At) / max_abs(A);
}

// Single triangle (1,0), (2,0), (1,1) with full topology.
Mesh2D single_triangle() {
  Mesh2D m;
  m.nodes = {Vec2(1, 0), Vec2(2, 0), Vec2(1, 1)};
  m.triangles = {{0, 1, 2}};
  m.region = {Region::Body};
  m.edges = {{0, 1}, {1, 2}, {0, 2}};
  m.tri_edges = {{0, 1, 2}};
  m.edge_tris = {{0, -1}, {0, -1}, {0, -1}};
  m.edge_tag = {BoundaryTag::None, BoundaryTag::None, BoundaryTag::None};
  m.ground = false;
  return m;
}

// Exact integral of rho^i z^j over that triangle: rho in [1, 2], z in [0, 2 - rho].
double monomial_integral(int i, int j) {
  // (2 - rho)^(j+1) expanded binomially, then integrated term by term.
  double sum = 0.0;
  const int n = j + 1;
  double binom = 1.0;
  for (int k = 0; k <= n; ++k) {
    if (k > 0) binom = binom * (n - k + 1) / k;
    const double coef = binom * std::pow(2.0, n - k) * ((k % 2) ? -1.0 : 1.0);
    const int p = i + k;
    sum += coef * (std::pow(2.0, p + 1) - 1.0) / (p + 1);
  }
  return sum / (j + 1);
}

// Second-order Nedelec space spanned by 8 vector monomials in (rho, z).
std::array<Vec2, 8> vec_monomials(const Vec2& p) {
  const double r = p.x(), z = p.y();
  return {Vec2(1, 0), Vec2(r, 0), Vec2(z, 0), Vec2(0, 1), Vec2(0, r), Vec2(0, z), Vec2(-r * z, r * r),
          Vec2(-z * z, r * z)};
}

// Each monomial component as a list of (coefficient, i, j).
using Poly = std::vector<std::tuple<double, int, int>>;
std::array<std::array<Poly, 2>, 8> vec_monomial_polys() {
  return {{{Poly{{1, 0, 0}}, Poly{}},
           {Poly{{1, 1, 0}}, Poly{}},
           {Poly{{1, 0, 1}}, Poly{}},
           {Poly{}, Poly{{1, 0, 0}}},
           {Poly{}, Poly{{1, 1, 0}}},
           {Poly{}, Poly{{1, 0, 1}}},
           {Poly{{-1, 1, 1}}, Poly{{1, 2, 0}}},
           {Poly{{-1, 0, 2}}, Poly{{1, 1, 1}}}}};
}

}  // namespace

TEST(Quadrature, Degree5RuleIsExact) {
  const auto& q = TriangleQuadrature::degree5();
  const Mesh2D tri = single_triangle();
  for (int i = 0; i <= 5; ++i)
    for (int j = 0; i + j <= 5; ++j) {
      double s = 0.0;
      for (int k = 0; k < q.size; ++k) {
        const Vec2 x = q.bary[k][0] * tri.nodes[0] + q.bary[k][1] * tri.nodes[1] + q.bary[k][2] * tri.nodes[2];
        s += q.weight[k] * 0.5 * std::pow(x.x(), i) * std::pow(x.y(), j);
      }
      EXPECT_NEAR(s, monomial_integral(i, j), 1e-13);
    }
}

TEST(Element, EdgeMomentsAreDual) {
  // Tangential moments of basis k on edge e against {1, 2s-1} equal delta.
  const Mesh2D tri = single_triangle();
  const EdgeElement ee(tri, 0);
  const auto g = LineQuadrature::gauss(4);
  for (int e = 0; e < 3; ++e) {
    const Vec2 a = tri.nodes[tri.edges[e][0]], b = tri.nodes[tri.edges[e][1]];
    for (int q = 0; q < 2; ++q) {
      std::array<double, 8> mom{};
      for (std::size_t i = 0; i < g.x.size(); ++i) {
        const Vec2 x = a + g.x[i] * (b - a);
        const auto v = ee.value(x);
        const double w = q == 0 ? 1.0 : 2.0 * g.x[i] - 1.0;
        for (int k = 0; k < 8; ++k) mom[k] += g.w[i] * w * v[k].dot(b - a);
      }
      const auto dofs = tri.element_edge_dofs(0);
      for (int k = 0; k < 8; ++k)
        EXPECT_NEAR(mom[k], dofs[k] == tri.edge_dof(e, q) ? 1.0 : 0.0, 1e-12) << e << ' ' << q << ' ' << k;
    }
  }
}

TEST(Element, NodalPartitionOfUnity) {
  const Mesh2D& mesh = cylinder_mesh();
  for (int t : {0, 17, mesh.num_triangles() - 1}) {
    const NodalElement ne(mesh, t);
    const std::array<double, 3> l{0.2, 0.3, 0.5};
    double s = 0.0;
    Vec2 gs = Vec2::Zero();
    for (int a = 0; a < 6; ++a) {
      s += ne.value(l)[a];
      gs += ne.gradient(l)[a];
    }
    EXPECT_NEAR(s, 1.0, 1e-13);
    EXPECT_LE(gs.norm(), 1e-9 / mesh.max_edge_length(t));
  }
}

TEST(Element, TangentialContinuityAcrossSharedEdges) {
  const Mesh2D& mesh = cylinder_mesh();
  int checked = 0;
  for (int e = 0; e < mesh.num_edges() && checked < 50; e += 97) {
    const int t0 = mesh.edge_tris[e][0], t1 = mesh.edge_tris[e][1];
    if (t1 < 0) continue;
    const EdgeElement e0(mesh, t0), e1(mesh, t1);
    const auto d0 = mesh.element_edge_dofs(t0), d1 = mesh.element_edge_dofs(t1);
    const Vec2 a = mesh.nodes[mesh.edges[e][0]], b = mesh.nodes[mesh.edges[e][1]];
    const Vec2 x = a + 0.3 * (b - a), tan = (b - a).normalized();
    const auto v0 = e0.value(x), v1 = e1.value(x);
    for (int q = 0; q < 2; ++q) {
      const int dof = mesh.edge_dof(e, q);
      double s0 = 0.0, s1 = 0.0;
      for (int k = 0; k < 8; ++k) {
        if (d0[k] == dof) s0 = v0[k].dot(tan);
        if (d1[k] == dof) s1 = v1[k].dot(tan);
      }
      EXPECT_NEAR(s0, s1, 1e-9 * (std::abs(s0) + 1.0));
    }
    ++checked;
  }
  EXPECT_GT(checked, 10);
}

TEST(Assembly, MassPatchTestAgainstMonomialIntegrals) {
  // Fit each basis function in the monomial span, then form B_tt exactly.
  const Mesh2D tri = single_triangle();
  const EdgeElement ee(tri, 0);
  const HarmonicSystem sys = assemble(tri, 1.0, PmlMap{}, 0.0, kFreq, 0);
  const std::vector<Vec2> pts = {Vec2(1.1, 0.1), Vec2(1.8, 0.1), Vec2(1.1, 0.8), Vec2(1.3, 0.3),
                                 Vec2(1.5, 0.2), Vec2(1.2, 0.5), Vec2(1.4, 0.45), Vec2(1.6, 0.15)};
  Eigen::MatrixXd V(16, 8), T(16, 8);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto m = vec_monomials(pts[i]);
    const auto b = ee.value(pts[i]);
    for (int k = 0; k < 8; ++k) {
      V(2 * i, k) = m[k].x();
      V(2 * i + 1, k) = m[k].y();
      T(2 * i, k) = b[k].x();
      T(2 * i + 1, k) = b[k].y();
    }
  }
  const Eigen::MatrixXd C = V.colPivHouseholderQr().solve(T);
  ASSERT_LT((V * C - T).norm(), 1e-9 * T.norm());
  const auto P = vec_monomial_polys();
  Eigen::MatrixXd G(8, 8);  // int mono_a . mono_b rho
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) {
      double s = 0.0;
      for (int c = 0; c < 2; ++c)
        for (auto [ca, ia, ja] : P[a][c])
          for (auto [cb, ib, jb] : P[b][c]) s += ca * cb * monomial_integral(ia + ib + 1, ja + jb);
      G(a, b) = s;
    }
  const Eigen::MatrixXd B = C.transpose() * G * C;
  const auto dofs = tri.element_edge_dofs(0);
  const Eigen::MatrixXcd Bd = Eigen::MatrixXcd(sys.Btt);
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) EXPECT_NEAR(std::abs(Bd(dofs[a], dofs[b]) - B(a, b)), 0.0, 1e-10 * B.norm());
}

TEST(Assembly, BlocksSymmetricWithoutPml) {
  const HarmonicSystem sys = assemble(cylinder_mesh(), kMuscle, PmlMap{}, 0.0, kFreq, 3);
  for (const SparseMatrixC* A : {&sys.Att, &sys.Att1, &sys.App, &sys.Btt, &sys.Bpp})
    EXPECT_LE(asymmetry(*A), 1e-12);
}

TEST(Assembly, OperatorComplexSymmetricWithPml) {
  // The phi-t block is the transpose of the t-phi block.
  std::vector<int> free;
  const SparseMatrixC A = cylinder_system().matrix(3, free);
  EXPECT_LE(asymmetry(A), 1e-12);
}

TEST(Assembly, HarmonicZeroHasNoCouplingBlock) {
  std::vector<int> free;
  const SparseMatrixC A = cylinder_system().matrix(0, free);
  for (int d : free) EXPECT_LT(d, cylinder_system().Q());
  const SparseMatrixC A1 = cylinder_system().matrix(1, free);
  EXPECT_GT(A1.rows(), A.rows());
}

TEST(Assembly, ConstrainedDofsExcluded) {
  const auto& sys = cylinder_system();
  const Mesh2D& mesh = cylinder_mesh();
  for (int e = 0; e < mesh.num_edges(); ++e) {
    if (mesh.edge_tag[e] == BoundaryTag::Axis) {
      EXPECT_FALSE(sys.fixed[mesh.edge_dof(e, 0)]);
      EXPECT_TRUE(sys.axis_edge[mesh.edge_dof(e, 0)]);
      EXPECT_TRUE(sys.fixed[sys.Q() + mesh.midpoint_dof(e)]);
    }
    if (mesh.edge_tag[e] == BoundaryTag::Ground || mesh.edge_tag[e] == BoundaryTag::PmlOuter)
      EXPECT_TRUE(sys.fixed[mesh.edge_dof(e, 1)]);
  }
}

TEST(Assembly, Deterministic) {
  const HarmonicSystem a = assemble(cylinder_mesh(), kMuscle, PmlMap::for_mesh(cylinder_mesh(), kFreq), 0.0, kFreq, 2);
  const auto& b = cylinder_system();
  for (auto [x, y] : {std::pair{&a.Att, &b.Att}, {&a.Btt, &b.Btt}, {&a.Atp, &b.Atp}, {&a.Bpp, &b.Bpp}}) {
    ASSERT_EQ(x->nonZeros(), y->nonZeros());
    for (Eigen::Index i = 0; i < x->nonZeros(); ++i) {
      ASSERT_EQ(x->valuePtr()[i], y->valuePtr()[i]);
      ASSERT_EQ(x->innerIndexPtr()[i], y->innerIndexPtr()[i]);
    }
  }
}

TEST(Assembly, ImpedanceGroundBuildsBoundaryBlocks) {
  const Mesh2D& mesh = cylinder_mesh();
  const HarmonicSystem pec = assemble(mesh, kMuscle, PmlMap::for_mesh(mesh, kFreq), 0.0, kFreq, 1);
  const HarmonicSystem imp = assemble(mesh, kMuscle, PmlMap::for_mesh(mesh, kFreq), cplx(50.0, 10.0), kFreq, 1);
  EXPECT_EQ(pec.Ctt.nonZeros(), 0);
  EXPECT_GT(imp.Ctt.nonZeros(), 0);
  EXPECT_GT(imp.Cpp.nonZeros(), 0);
  int fixed_pec = 0, fixed_imp = 0;
  for (char f : pec.fixed) fixed_pec += f;
  for (char f : imp.fixed) fixed_imp += f;
  EXPECT_GT(fixed_pec, fixed_imp);
}

TEST(Pml, StretchIdentityOutsideAndContinuous) {
  const PmlMap p = PmlMap::for_mesh(cylinder_mesh(), kFreq);
  EXPECT_EQ(p.s_rho(p.rho_start - 1e-9), cplx(1.0));
  EXPECT_NEAR(std::abs(p.s_rho(p.rho_start + 1e-9) - 1.0), 0.0, 1e-12);
  EXPECT_EQ(p.rho_tilde(0.05), cplx(0.05));
  EXPECT_LT(p.s_rho(p.rho_start + p.thickness).imag(), 0.0);
  EXPECT_LT(p.s_z(p.z_top + 0.5 * p.thickness).imag(), 0.0);
  // Theoretical normal-incidence reflection exp(-2 k int Im) = 1e-3 (-60 dB).
  const double k = wavenumber(kFreq);
  EXPECT_NEAR(std::exp(-2.0 * k * p.beta * p.thickness / 3.0), 1e-3, 1e-12);
}

TEST(Solve, ResidualsOnCylinderCase) {
  const auto& sol = cylinder_solution();
  for (int m = 0; m <= kM; ++m) {
    EXPECT_LE(sol.residual[m], 1e-8) << m;
    EXPECT_TRUE(sol.u_t[m].allFinite());
  }
}

TEST(Solve, ZeroRhsGivesZero) {
  const auto c = solve_harmonic(cylinder_system(), CVectorX::Zero(cylinder_system().Q() + cylinder_system().Qp()), 2);
  EXPECT_EQ(c.u_t.norm(), 0.0);
  EXPECT_EQ(c.u_phi.norm(), 0.0);
}

TEST(Solve, Linear) {
  const HarmonicSolver s(cylinder_system(), 2);
  const auto a = s.solve(cylinder_rhs()[2]);
  const auto b = s.solve(2.0 * cylinder_rhs()[2]);
  EXPECT_LE((b.u_t - 2.0 * a.u_t).norm(), 1e-10 * a.u_t.norm());
  EXPECT_LE((b.u_phi - 2.0 * a.u_phi).norm(), 1e-10 * a.u_phi.norm());
}

TEST(Solve, ConstrainedDofsExactlyZero) {
  const auto& sol = cylinder_solution();
  const auto& sys = cylinder_system();
  for (int m = 0; m <= kM; ++m)
    for (int i = 0; i < sys.Q(); ++i)
      if (sys.fixed[i] || (m > 0 && sys.axis_edge[i])) ASSERT_EQ(sol.u_t[m][i], cplx(0.0));
}

TEST(Solve, ZeroContrastGivesZeroField) {
  const Mesh2D& mesh = cylinder_mesh();
  const auto sys = assemble(mesh, 1.0, PmlMap::for_mesh(mesh, kFreq), 0.0, kFreq, kM);
  const auto K = assemble_rhs(azimuthal_decompose(mesh, cylinder_source(), kM), mesh, 1.0);
  const auto sol = solve_all(sys, K, kM);
  for (int m = 0; m <= kM; ++m) EXPECT_EQ(sol.u_t[m].norm() + sol.u_phi[m].norm(), 0.0);
}

TEST(Solve, JobDriverMatchesDirectSolve) {
  const auto& sys = cylinder_system();
  std::vector<std::vector<CVectorX>> got(3, std::vector<CVectorX>(3));
  JobSolveOptions opts;
  opts.batch = 2;
  solve_jobs(
      sys, 2, 3, [&](int j) {
        std::vector<CVectorX> K(cylinder_rhs().begin(), cylinder_rhs().begin() + 3);
        for (auto& k : K) k *= double(j + 1);
        return K;
      },
      [&](int j, int m, const HarmonicCoefficients& c) { got[j][m] = c.u_t; }, opts);
  for (int j = 0; j < 3; ++j)
    for (int m = 0; m <= 2; ++m)
      EXPECT_LE((got[j][m] - double(j + 1) * cylinder_solution().u_t[m]).norm(),
                1e-10 * cylinder_solution().u_t[m].norm());
}

TEST(Solve, HarmonicSpectrumDecays) {
  // Field energy per harmonic on a ring around the body, tail monotone for m >= 4.
  const auto& sol = cylinder_solution();
  std::vector<double> energy(kM + 1, 0.0);
  for (double z : {0.05, 0.1, 0.15, 0.25})
    for (double rho : {0.13, 0.16}) {
      const auto f = harmonic_point_field(sol, {rho, z});
      for (int m = 0; m <= kM; ++m) energy[m] += std::norm(f.e_rho[m]) + std::norm(f.e_phi[m]) + std::norm(f.e_z[m]);
    }
  for (int m = 5; m <= kM; ++m) EXPECT_LT(energy[m], energy[m - 1]) << m;
  EXPECT_LT(energy[kM], 1e-6 * energy[1]);
}

TEST(Solve, SelfConvergenceInHarmonicCount) {
  const Mesh2D& mesh = cylinder_mesh();
  const int M2 = 16;
  const auto sys = assemble(mesh, kMuscle, PmlMap::for_mesh(mesh, kFreq), 0.0, kFreq, M2);
  const auto sol2 = solve_all(sys, assemble_rhs(azimuthal_decompose(mesh, cylinder_source(), M2), mesh, kMuscle), M2);
  const auto& sol1 = cylinder_solution();
  double num = 0.0, den = 0.0;
  for (double phi : {0.0, 0.8, 1.9, 3.1})
    for (double z : {0.05, 0.15, 0.22}) {
      const CylPoint p{0.12, phi, z};
      const auto a = reconstruct_fields(sol1, {p})[0], b = reconstruct_fields(sol2, {p})[0];
      num += (a.e - b.e).squaredNorm();
      den += b.e.squaredNorm();
    }
  EXPECT_LT(std::sqrt(num / den), 1e-4);
}

TEST(Reconstruct, MirrorParity) {
  const auto& sol = cylinder_solution();
  for (double phi : {0.3, 1.7}) {
    const auto a = reconstruct_fields(sol, {CylPoint{0.14, phi, 0.12}})[0];
    const auto b = reconstruct_fields(sol, {CylPoint{0.14, -phi, 0.12}})[0];
    EXPECT_LE(std::abs(a.e[0] - b.e[0]), 1e-12 * a.e.norm());
    EXPECT_LE(std::abs(a.e[2] - b.e[2]), 1e-12 * a.e.norm());
    EXPECT_LE(std::abs(a.e[1] + b.e[1]), 1e-12 * a.e.norm());
  }
}

TEST(Reconstruct, FaradayFiniteDifference) {
  const auto& sol = cylinder_solution();
  const Mesh2D& mesh = cylinder_mesh();
  const double d = 1e-4 * wavelength(kFreq);
  int checked = 0;
  for (int t = 0; t < mesh.num_triangles() && checked < 4; t += 53) {
    if (mesh.region[t] != Region::Air || mesh.in_pml(mesh.centroid(t))) continue;
    const Vec2 c = mesh.centroid(t);
    if (c.x() < 0.02) continue;
    const double phi = 0.6;
    const Vec3 x0 = CylPoint{c.x(), phi, c.y()}.cartesian();
    auto E = [&](const Vec3& x) {
      const CylPoint p = CylPoint::from_cartesian(x);
      return CVec3(cyl_to_cart<cplx>(reconstruct_fields(sol, {p})[0].e, p.phi));
    };
    CVec3 g[3];
    for (int a = 0; a < 3; ++a) {
      Vec3 xp = x0, xm = x0;
      xp[a] += d;
      xm[a] -= d;
      g[a] = (E(xp) - E(xm)) / (2 * d);
    }
    const CVec3 curl(g[1][2] - g[2][1], g[2][0] - g[0][2], g[0][1] - g[1][0]);
    const CVec3 h = cyl_to_cart<cplx>(reconstruct_fields(sol, {CylPoint{c.x(), phi, c.y()}})[0].h, phi);
    const cplx jwm = kJ * angular(kFreq) * constants::mu0;
    EXPECT_LT((-curl / jwm - h).norm(), 1e-3 * h.norm()) << "triangle " << t;
    ++checked;
  }
  EXPECT_EQ(checked, 4);
}

TEST(Reconstruct, OutsidePhysicalRegionRejected) {
  const auto& sol = cylinder_solution();
  EXPECT_THROW(reconstruct_fields(sol, {CylPoint{50.0, 0.0, 0.1}}), LocationError);
  EXPECT_THROW(reconstruct_fields(sol, {CylPoint{cylinder_mesh().rho_max + 0.01, 0.0, 0.1}}), LocationError);
}

TEST(Azimuth, HarmonicOrthogonality) {
  const int n = 64;
  for (int m = 0; m <= 6; ++m)
    for (int q = 0; q <= 6; ++q) {
      double cc = 0.0, ss = 0.0, cs = 0.0;
      for (int j = 0; j < n; ++j) {
        const double phi = 2 * kPi * j / n, w = 2 * kPi / n;
        cc += cos_harmonic(m, phi) * cos_harmonic(q, phi) * w;
        ss += sin_harmonic(m, phi) * sin_harmonic(q, phi) * w;
        cs += cos_harmonic(m, phi) * sin_harmonic(q, phi) * w;
      }
      EXPECT_NEAR(cc, m == q ? 1.0 : 0.0, 1e-13);
      if (m > 0 && q > 0) EXPECT_NEAR(ss, m == q ? 1.0 : 0.0, 1e-13);
      EXPECT_NEAR(cs, 0.0, 1e-13);
    }
}

TEST(Pml, ReflectionBelowMinus40dB) {
  // Same mesh, default grading against a much stronger layer: the field change
  // bounds the spurious reflection of the default layer.
  const double f = kFreq, lam = wavelength(f);
  const cplx eps(4.0, -0.5);
  MeshOptions o;
  o.ground = false;
  o.body_ppw = 6;
  const Mesh2D mesh = triangulate(make_domain(build_sphere_profile(0.03, 1.0, false), f, eps, o));
  DipoleSource src;
  src.position = {20 * lam, 0.0, 1.0};
  src.freq = f;
  src.model = DipoleModel::Full;
  const int M = 4;
  const auto K = assemble_rhs(azimuthal_decompose(mesh, src, M), mesh, eps);
  const auto a = solve_all(assemble(mesh, eps, PmlMap::for_mesh(mesh, f), 0.0, f, M), K, M);
  const auto b = solve_all(assemble(mesh, eps, PmlMap::for_mesh(mesh, f, 1e-6), 0.0, f, M), K, M);
  double num = 0.0, den = 0.0;
  for (double r : {0.05, 0.07, 0.085})
    for (double th : {0.5, 1.2, 1.57, 2.0, 2.6})
      for (double ph : {0.0, 1.0, 2.0, 3.0}) {
        const CylPoint p{r * std::sin(th), ph, 1.0 + r * std::cos(th)};
        const auto ea = reconstruct_fields(a, {p})[0].e, eb = reconstruct_fields(b, {p})[0].e;
        num += (ea - eb).squaredNorm();
        den += eb.squaredNorm();
      }
  EXPECT_LT(20.0 * std::log10(std::sqrt(num / den)), -40.0);
}

TEST(Dump, TripletFormat) {
  SparseMatrixC A(2, 3);
  A.insert(0, 1) = cplx(1.5, -2.0);
  A.insert(1, 2) = cplx(0.25, 0.0);
  std::ostringstream os;
  write_triplets(os, A);
  EXPECT_EQ(os.str(), "% 2 3 2\n0 1 1.5 -2\n1 2 0.25 0\n");
}
